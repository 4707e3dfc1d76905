import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from viscoflow.hilbert import (AffineSet, DimensionMismatch, as_vector, inner,
                               norm, solve_affine_fixed_set, solve_linear)

finite_floats = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def vec(dim_min=1, dim_max=16):
    return st.integers(dim_min, dim_max).flatmap(
        lambda d: arrays(np.float64, d, elements=finite_floats))


def test_inner_orthogonal():
    assert inner([1.0, 0.0], [0.0, 1.0]) == 0.0


def test_inner_norm_squared():
    assert inner([2.0, 3.0], [2.0, 3.0]) == 13.0


def test_inner_hand_arithmetic():
    assert inner([1.0, 2.0, 3.0], [4.0, 5.0, 6.0]) == 32.0


def test_inner_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        inner([1.0, 2.0], [1.0, 2.0, 3.0])


def test_norm_zero():
    assert norm([0.0, 0.0, 0.0]) == 0.0


def test_norm_pythagorean():
    assert norm([3.0, 4.0]) == 5.0


def test_norm_hand():
    assert norm([1.0, 1.0, 1.0, 1.0]) == 2.0


def test_as_vector_rejects_nonfinite():
    with pytest.raises(ValueError):
        as_vector([1.0, float("nan")])
    with pytest.raises(ValueError):
        as_vector([float("inf")])


@given(vec(), st.data())
def test_cauchy_schwarz(x, data):
    y = data.draw(arrays(np.float64, x.size, elements=finite_floats))
    assert abs(inner(x, y)) <= norm(x) * norm(y) + 1e-12 * (1 + norm(x) * norm(y))


@given(vec(), st.data())
def test_parallelogram_law(x, data):
    y = data.draw(arrays(np.float64, x.size, elements=finite_floats))
    lhs = norm(x + y) ** 2 + norm(x - y) ** 2
    rhs = 2 * norm(x) ** 2 + 2 * norm(y) ** 2
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)


def test_fixed_set_of_rotation_is_origin():
    m = np.array([[0.0, -1.0], [1.0, 0.0]])  # rotation by pi/2
    s = solve_affine_fixed_set(m, np.zeros(2))
    assert s.dim_subspace == 0
    assert np.allclose(s.anchor, 0.0)


def test_fixed_set_of_identity_is_whole_space():
    s = solve_affine_fixed_set(np.eye(3), np.zeros(3))
    assert s.dim_subspace == 3


def test_fixed_set_of_resolvent_matrix():
    # resolvent of diag(1, 0) at r = 1: M = diag(1/2, 1); fixed set = span{e2}
    s = solve_affine_fixed_set(np.diag([0.5, 1.0]), np.zeros(2))
    assert s.dim_subspace == 1
    assert np.allclose(s.anchor, 0.0)
    assert abs(abs(s.basis[0][1]) - 1.0) < 1e-12


def test_fixed_set_inconsistent_returns_none():
    # (I - I) x = b has no solution for b != 0
    assert solve_affine_fixed_set(np.eye(2), np.array([1.0, 0.0])) is None


def test_fixed_set_rejects_nonsquare():
    with pytest.raises(ValueError):
        solve_affine_fixed_set(np.ones((2, 3)), np.zeros(2))


def test_solution_points_satisfy_system(rng):
    # random singular nonexpansive map with a nontrivial fixed set
    for d in (2, 5, 16):
        q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        scales = np.concatenate([np.ones(d // 2),
                                 rng.uniform(0.1, 0.9, d - d // 2)])
        m = q @ np.diag(scales) @ q.T
        z = rng.standard_normal(d)
        b = (np.eye(d) - m) @ z
        s = solve_affine_fixed_set(m, b)
        assert s is not None
        for _ in range(100):
            p = s.sample(rng, scale=3.0)
            assert norm((np.eye(d) - m) @ p - b) <= 1e-8 * (1 + norm(b))


def test_affine_set_projection_idempotent(rng):
    s = AffineSet(np.array([1.0, 2.0, 3.0]),
                  np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))
    x = rng.standard_normal(3)
    p = s.project(x)
    assert np.allclose(s.project(p), p, atol=1e-12)
    assert np.allclose(s.project(s.anchor), s.anchor, atol=1e-12)


def test_affine_set_requires_orthonormal_basis():
    with pytest.raises(ValueError):
        AffineSet(np.zeros(2), np.array([[1.0, 1.0]]))


def test_affine_intersection_of_two_lines_is_origin():
    line1 = AffineSet(np.zeros(2), np.array([[1.0, 0.0]]))
    diag = math.sqrt(0.5)
    line2 = AffineSet(np.zeros(2), np.array([[diag, diag]]))
    inter = line1.intersect(line2)
    assert inter is not None
    assert inter.dim_subspace == 0
    assert norm(inter.anchor) < 1e-9


def test_affine_intersection_disjoint_is_none():
    line1 = AffineSet(np.array([0.0, 0.0]), np.array([[1.0, 0.0]]))
    line2 = AffineSet(np.array([0.0, 1.0]), np.array([[1.0, 0.0]]))
    assert line1.intersect(line2) is None


def test_solve_linear_minimum_norm_anchor():
    s = solve_linear(np.array([[1.0, 0.0]]), np.array([2.0]))
    assert np.allclose(s.anchor, [2.0, 0.0])
    assert s.dim_subspace == 1
