import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from viscoflow.convex_sets import (AffineSubspace, Ball, Box, Halfspace,
                                   Hyperplane, Simplex, WholeSpace,
                                   projection_operator)
from viscoflow.hilbert import AffineSet, DimensionMismatch, inner, norm

ALL_SETS = [
    Ball(np.array([0.5, -1.0]), 2.0),
    Box(np.array([-1.0, 0.0]), np.array([1.0, 2.0])),
    Halfspace(np.array([1.0, 1.0]), 1.0),
    Hyperplane(np.array([0.0, 1.0]), 0.5),
    AffineSubspace(AffineSet(np.array([1.0, 1.0]), np.array([[1.0, 0.0]]))),
    Simplex(2),
    WholeSpace(2),
]


def test_ball_radial_projection():
    b = Ball(np.zeros(2), 1.0)
    assert np.allclose(b.project(np.array([2.0, 0.0])), [1.0, 0.0])


def test_halfspace_drops_normal_component():
    h = Halfspace(np.array([1.0, 0.0]), 0.0)  # x1 <= 0
    assert np.allclose(h.project(np.array([3.0, 4.0])), [0.0, 4.0])


def test_box_projection_clips():
    b = Box(np.zeros(2), np.ones(2))
    assert np.allclose(b.project(np.array([2.0, -0.5])), [1.0, 0.0])


def test_simplex_center_projection():
    s = Simplex(3)
    p = s.project(np.array([1.0, 1.0, 1.0]))
    assert np.allclose(p, np.ones(3) / 3, atol=1e-12)


def test_simplex_projection_matches_brute_force_grid():
    # dense grid over the simplex as an independent minimizer of ||x - y||
    s = Simplex(3)
    step = 0.02
    grid = [np.array([i * step, j * step, 1.0 - (i + j) * step])
            for i in range(51) for j in range(51 - i)]
    rng = np.random.default_rng(7)
    for _ in range(10):
        x = rng.uniform(-1.0, 2.0, 3)
        p = s.project(x)
        best = min(norm(x - g) for g in grid)
        assert norm(x - p) <= best + 1e-12
        assert s.contains(p, 1e-9)


def test_contains_examples():
    b = Ball(np.zeros(2), 1.0)
    assert b.contains(np.array([0.5, 0.5]), 1e-9)
    assert not b.contains(np.array([1.0 + 1e-3, 0.0]), 1e-9)
    box = Box(np.zeros(2), np.ones(2))
    assert box.contains(np.array([1.0 + 5e-10, 0.5]), 1e-9)


def test_dimension_mismatch_rejected():
    with pytest.raises(DimensionMismatch):
        Ball(np.zeros(2), 1.0).project(np.zeros(3))
    with pytest.raises(DimensionMismatch):
        Ball(np.zeros(2), 1.0).contains(np.zeros(3))


@pytest.mark.parametrize("s", ALL_SETS, ids=lambda s: s.kind)
def test_projection_idempotent(s, rng):
    for _ in range(50):
        x = 4.0 * rng.standard_normal(2)
        p = s.project(x)
        assert norm(s.project(p) - p) <= 1e-10


@pytest.mark.parametrize("s", ALL_SETS, ids=lambda s: s.kind)
def test_firm_nonexpansiveness(s, rng):
    for _ in range(1000 if s.kind == "ball" else 200):
        x, y = 4.0 * rng.standard_normal(2), 4.0 * rng.standard_normal(2)
        px, py = s.project(x), s.project(y)
        assert norm(px - py) ** 2 <= inner(px - py, x - y) + 1e-9


@pytest.mark.parametrize("s", ALL_SETS, ids=lambda s: s.kind)
def test_variational_characterization(s, rng):
    # the projection satisfies <x - Px, y - Px> <= 0 for every y in the set
    for _ in range(100):
        x = 4.0 * rng.standard_normal(2)
        px = s.project(x)
        for _ in range(100):
            y = s.sample(rng)
            assert inner(x - px, y - px) <= 1e-9


@pytest.mark.parametrize("s", ALL_SETS, ids=lambda s: s.kind)
def test_projection_is_closest_sampled(s, rng):
    for _ in range(50):
        x = 4.0 * rng.standard_normal(2)
        px = s.project(x)
        for _ in range(20):
            y = s.sample(rng)
            assert norm(x - px) <= norm(x - y) + 1e-12


@pytest.mark.parametrize("s", ALL_SETS, ids=lambda s: s.kind)
def test_samples_lie_in_set(s, rng):
    for _ in range(100):
        assert s.contains(s.sample(rng), 1e-9)


def test_projection_operator_metadata():
    op = projection_operator(Ball(np.zeros(2), 1.0))
    assert op.lipschitz_bound == 1.0
    assert op.is_firmly_nonexpansive
    assert op.known_fix is None  # ball is not affine

    hp = projection_operator(Hyperplane(np.array([0.0, 1.0]), 0.0))
    assert isinstance(hp.known_fix, AffineSet)
    assert hp.known_fix.dim_subspace == 1

    wh = projection_operator(WholeSpace(3))
    x = np.array([1.0, -2.0, 3.0])
    assert np.allclose(wh(x), x, atol=0)


def test_hyperplane_projection_operator_is_affine_idempotent(rng):
    hp = projection_operator(Hyperplane(np.array([1.0, 2.0]), 3.0))
    x = rng.standard_normal(2)
    assert norm(hp(hp(x)) - hp(x)) <= 1e-12


@given(st.integers(0, 300))
def test_ball_projection_never_expands(seed):
    rng = np.random.default_rng(seed)
    b = Ball(rng.standard_normal(3), float(rng.uniform(0.5, 3.0)))
    x, y = 5 * rng.standard_normal(3), 5 * rng.standard_normal(3)
    assert norm(b.project(x) - b.project(y)) <= norm(x - y) + 1e-12


def test_set_validation():
    with pytest.raises(ValueError):
        Ball(np.zeros(2), -1.0)
    with pytest.raises(ValueError):
        Box(np.ones(2), np.zeros(2))
    with pytest.raises(ValueError):
        Halfspace(np.zeros(2), 1.0)
