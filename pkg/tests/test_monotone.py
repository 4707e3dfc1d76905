import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from viscoflow.convex_sets import Ball, Box, WholeSpace
from viscoflow.hilbert import inner, norm
from viscoflow.monotone import (AffineMonotoneOp, InnerSolveError,
                                QuadraticBifunction,
                                check_inverse_strongly_monotone,
                                equilibrium_resolvent, forward_step,
                                projected_gradient_map, resolvent)


def random_psd_op(rng, d, q_scale=1.0, mu=None):
    g = rng.standard_normal((d, d))
    m = g @ g.T / d
    return AffineMonotoneOp(m, q_scale * rng.standard_normal(d), mu)


def test_monotonicity_validated():
    with pytest.raises(ValueError):
        AffineMonotoneOp(-np.eye(2), np.zeros(2))


def test_monotonicity_sampled(rng):
    a = random_psd_op(rng, 4)
    for _ in range(200):
        x, y = rng.standard_normal(4), rng.standard_normal(4)
        assert inner(x - y, a(x) - a(y)) >= -1e-9


def test_resolvent_identity_operator_halves():
    a = AffineMonotoneOp(np.eye(2), np.zeros(2))
    j = resolvent(a, 1.0)
    x = np.array([3.0, -4.0])
    assert np.allclose(j(x), x / 2, atol=1e-14)
    assert j.known_fix.dim_subspace == 0
    assert np.allclose(j.known_fix.anchor, 0.0)


def test_resolvent_of_rank_deficient_operator():
    a = AffineMonotoneOp(np.diag([1.0, 0.0]), np.zeros(2))
    j = resolvent(a, 3.0)
    x = np.array([2.0, 5.0])
    assert np.allclose(j(x), [0.5, 5.0], atol=1e-14)
    # zero set is span{e2}
    assert j.known_fix.dim_subspace == 1
    assert abs(abs(j.known_fix.basis[0][1]) - 1.0) < 1e-10


def test_resolvent_rejects_nonpositive_r():
    a = AffineMonotoneOp(np.eye(2), np.zeros(2))
    with pytest.raises(ValueError):
        resolvent(a, 0.0)


def test_resolvent_identity_relation(rng):
    # J_lam x = J_mu((mu/lam) x + (1 - mu/lam) J_lam x)
    a = random_psd_op(rng, 3)
    lam, mu = 2.0, 0.5
    j_lam, j_mu = resolvent(a, lam), resolvent(a, mu)
    for _ in range(100):
        x = 3.0 * rng.standard_normal(3)
        rhs = j_mu((mu / lam) * x + (1 - mu / lam) * j_lam(x))
        assert norm(j_lam(x) - rhs) <= 1e-9


def test_resolvent_firmly_nonexpansive_sampled(rng):
    a = random_psd_op(rng, 3)
    j = resolvent(a, 0.7)
    for _ in range(500):
        x, y = 3 * rng.standard_normal(3), 3 * rng.standard_normal(3)
        assert norm(j(x) - j(y)) ** 2 <= inner(j(x) - j(y), x - y) + 1e-9


def test_fixed_set_independent_of_r(rng):
    a = AffineMonotoneOp(np.diag([2.0, 0.0, 1.0]), np.array([-2.0, 0.0, 0.0]))
    sets = [resolvent(a, r).known_fix for r in (0.1, 1.0, 10.0)]
    for s in sets[1:]:
        assert sets[0].equals(s, 1e-9)


def test_forward_step_constant_map():
    b = np.array([2.0, 0.0])
    a = AffineMonotoneOp(np.eye(2), -b, mu=1.0)
    t = forward_step(a, 1.0)
    for x in (np.zeros(2), np.array([5.0, -3.0])):
        assert np.allclose(t(x), b, atol=1e-14)


def test_forward_step_boundary_is_isometry(rng):
    a = AffineMonotoneOp(np.eye(2), np.zeros(2), mu=1.0)
    t = forward_step(a, 2.0)
    x = rng.standard_normal(2)
    assert np.allclose(t(x), -x, atol=1e-14)


def test_forward_step_sampled_nonexpansive(rng):
    a = AffineMonotoneOp(np.diag([1.0, 0.5]), np.zeros(2), mu=1.0)
    t = forward_step(a, 1.5)
    worst = 0.0
    for _ in range(1000):
        x, y = 4 * rng.standard_normal(2), 4 * rng.standard_normal(2)
        if norm(x - y) > 1e-12:
            worst = max(worst, norm(t(x) - t(y)) / norm(x - y))
    assert worst <= 1.0 + 1e-12


def test_forward_step_range_validated():
    a = AffineMonotoneOp(np.eye(2), np.zeros(2), mu=1.0)
    for lam in (0.0, 2.5, -1.0):
        with pytest.raises(ValueError):
            forward_step(a, lam)
    with pytest.raises(ValueError):
        forward_step(AffineMonotoneOp(np.eye(2), np.zeros(2)), 1.0)  # no mu


def test_forward_step_attracting_below_boundary(rng):
    from viscoflow.operators import check_attracting
    a = AffineMonotoneOp(np.eye(2), np.array([-1.0, 0.0]), mu=1.0)
    t = forward_step(a, 1.2)  # lam < 2 mu
    rep = check_attracting(t, [np.array([1.0, 0.0])], trials=500)
    assert rep.passed


def test_projected_gradient_ball_fixed_point(rng):
    b = np.array([2.0, 0.0])
    a = AffineMonotoneOp(np.eye(2), -b, mu=1.0)
    t = projected_gradient_map(Ball(np.zeros(2), 1.0), a, 1.0)
    star = np.array([1.0, 0.0])  # P_C(b)
    assert norm(t(star) - star) <= 1e-12
    # fixed point solves the variational inequality over C
    ball = Ball(np.zeros(2), 1.0)
    for _ in range(500):
        y = ball.sample(rng)
        assert inner(a(star), y - star) >= -1e-9


def test_projected_gradient_whole_space_zero():
    a = AffineMonotoneOp(np.eye(2), np.zeros(2), mu=1.0)
    t = projected_gradient_map(WholeSpace(2), a, 0.5)
    x = np.array([1.0, 1.0])
    for _ in range(200):
        x = t(x)
    assert norm(x) < 1e-12


def test_projected_gradient_box_matches_grid_oracle():
    # brute-force grid minimization of the fixed-point residual over the box
    a = AffineMonotoneOp(np.eye(2), np.array([-2.0, 0.5]), mu=1.0)
    box = Box(np.zeros(2), np.ones(2))
    t = projected_gradient_map(box, a, 1.0)
    xs = np.linspace(0.0, 1.0, 101)
    grid = [np.array([u, v]) for u in xs for v in xs]
    best = min(grid, key=lambda p: norm(t(p) - p))
    assert np.allclose(best, [1.0, 0.0], atol=1e-12)
    assert norm(t(best) - best) <= 1e-12


def test_projected_gradient_fixed_points_step_independent():
    a = AffineMonotoneOp(np.eye(2), np.array([-2.0, 0.5]), mu=1.0)
    box = Box(np.zeros(2), np.ones(2))
    t1 = projected_gradient_map(box, a, 0.6)
    t2 = projected_gradient_map(box, a, 1.4)
    x = np.array([0.3, 0.7])
    for _ in range(300):
        x = t1(x)
    assert norm(t1(x) - x) <= 1e-12
    assert norm(t2(x) - x) <= 1e-7


def test_projected_gradient_step_range():
    a = AffineMonotoneOp(np.eye(2), np.zeros(2), mu=1.0)
    with pytest.raises(ValueError):
        projected_gradient_map(Ball(np.zeros(2), 1.0), a, 2.0)  # must be < 2 mu


# --- equilibrium resolvent -----------------------------------------------------

def test_equilibrium_zero_matrix_matches_projection_closed_form(rng):
    # with M = 0 the resolvent is exactly x -> P_C(x - r q)
    q = np.array([0.4, -0.7])
    bif = QuadraticBifunction(np.zeros((2, 2)), q)
    for cset in (Ball(np.zeros(2), 1.0), Box(np.zeros(2), np.ones(2))):
        for _ in range(100):
            r = float(rng.uniform(0.1, 10.0))
            x = 3.0 * rng.standard_normal(2)
            t = equilibrium_resolvent(bif, cset, r, inner_tol=1e-12)
            assert norm(t(x) - cset.project(x - r * q)) <= 1e-7


def test_equilibrium_trivial_reduces_to_projection(rng):
    bif = QuadraticBifunction(np.zeros((2, 2)), np.zeros(2))
    cset = Ball(np.zeros(2), 1.0)
    t = equilibrium_resolvent(bif, cset, 2.0, inner_tol=1e-12)
    for _ in range(50):
        x = 3.0 * rng.standard_normal(2)
        assert norm(t(x) - cset.project(x)) <= 1e-9


def test_equilibrium_identity_matrix_whole_space(rng):
    # M = I, q = 0, C = R^d: T_r x = x / (1 + r)
    bif = QuadraticBifunction(np.eye(2), np.zeros(2))
    t = equilibrium_resolvent(bif, WholeSpace(2), 3.0, inner_tol=1e-12)
    for _ in range(50):
        x = 3.0 * rng.standard_normal(2)
        assert norm(t(x) - x / 4.0) <= 1e-7


def test_equilibrium_firmly_nonexpansive_sampled(rng):
    bif = QuadraticBifunction(np.array([[1.0, 0.0], [0.0, 0.3]]),
                              np.array([-0.5, 0.2]))
    t = equilibrium_resolvent(bif, Box(np.zeros(2), np.ones(2)), 1.5,
                              inner_tol=1e-12)
    for _ in range(200):
        x, y = 2 * rng.standard_normal(2), 2 * rng.standard_normal(2)
        tx, ty = t(x), t(y)
        assert norm(tx - ty) ** 2 <= inner(tx - ty, x - y) + 1e-9


def test_equilibrium_inner_failure_raises_with_residual():
    # skew part forces the conservative (slow) step; a tiny budget must fail
    bif = QuadraticBifunction(np.array([[0.0, -1.0], [1.0, 0.0]]),
                              np.array([-2.0, 0.0]))
    t = equilibrium_resolvent(bif, Ball(np.zeros(2), 1.0), 5.0,
                              inner_tol=1e-12, max_inner=3)
    with pytest.raises(InnerSolveError) as exc:
        t(np.array([3.0, 3.0]))
    assert exc.value.residual > 0
    assert exc.value.iterations == 3


def test_equilibrium_skew_converges():
    bif = QuadraticBifunction(np.array([[0.0, -1.0], [1.0, 0.0]]),
                              np.array([-2.0, 0.0]))
    t = equilibrium_resolvent(bif, Ball(np.zeros(2), 1.0), 5.0, inner_tol=1e-10)
    z = t(np.array([3.0, 3.0]))
    # the returned point satisfies the regularized inequality over samples
    rng = np.random.default_rng(3)
    cset = Ball(np.zeros(2), 1.0)
    g = bif.m @ z + bif.q + (z - np.array([3.0, 3.0])) / 5.0
    for _ in range(500):
        y = cset.sample(rng)
        assert inner(g, y - z) >= -1e-7


def test_bifunction_conditions(rng):
    bif = QuadraticBifunction(np.array([[1.0, 0.2], [-0.2, 0.5]]),
                              np.array([0.3, -0.1]))
    for _ in range(200):
        x, y = rng.standard_normal(2), rng.standard_normal(2)
        assert bif.value(x, x) == 0.0
        assert bif.value(x, y) + bif.value(y, x) <= 1e-9
    with pytest.raises(ValueError):
        QuadraticBifunction(-np.eye(2), np.zeros(2))


# --- inverse strong monotonicity -------------------------------------------------

def test_ism_identity_passes_with_zero_slack():
    a = AffineMonotoneOp(np.eye(2), np.zeros(2))
    rep = check_inverse_strongly_monotone(a, 1.0, trials=300)
    assert rep.passed
    assert abs(rep.details["min_slack"]) <= 1e-9


def test_ism_doubling_fails_at_mu_one():
    a = AffineMonotoneOp(2.0 * np.eye(2), np.zeros(2))
    rep = check_inverse_strongly_monotone(a, 1.0, trials=300)
    assert not rep.passed
    assert check_inverse_strongly_monotone(a, 0.5, trials=300).passed


def test_ism_threshold_matches_eigenvalue_oracle():
    # for symmetric M the check passes exactly when mu <= 1 / max eigenvalue
    a = AffineMonotoneOp(np.diag([1.0, 1.0 / 3.0]), np.zeros(2))
    max_eig = 1.0
    assert check_inverse_strongly_monotone(a, 1.0 / max_eig, trials=500).passed
    assert check_inverse_strongly_monotone(a, 1.0 / 3.0, trials=500).passed
    assert not check_inverse_strongly_monotone(a, 1.2 / max_eig, trials=500).passed


@given(st.integers(0, 200))
def test_resolvent_never_expands(seed):
    rng = np.random.default_rng(seed)
    a = random_psd_op(rng, 2)
    j = resolvent(a, float(rng.uniform(0.1, 5.0)))
    x, y = 3 * rng.standard_normal(2), 3 * rng.standard_normal(2)
    assert norm(j(x) - j(y)) <= norm(x - y) + 1e-12
