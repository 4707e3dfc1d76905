"""Operator algebra: contractions, nonexpansive maps and their combinators.

Operators are immutable wrappers around a pure evaluation function plus
declared regularity metadata (Lipschitz bound, firm nonexpansiveness, known
fixed-point set).  Declared properties are *metadata*: they are verified by
randomized sampling in the check_* report generators, not proven symbolically.
All report generators take an explicit seed and are deterministic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .hilbert import AffineSet, DimensionMismatch, as_matrix, as_vector, norm, solve_affine_fixed_set

FixSet = Union[AffineSet, tuple]


@dataclass(frozen=True)
class Operator:
    """An evaluable map R^d -> R^d with regularity metadata.

    The evaluation function must be pure and must not mutate its input (it
    may return the input object unchanged).
    """

    fn: Callable[[np.ndarray], np.ndarray]
    dim: int
    lipschitz_bound: Optional[float] = None
    is_firmly_nonexpansive: bool = False
    known_fix: Optional[FixSet] = None
    label: str = ""

    def __call__(self, x):
        return self.fn(x)


def identity_op(dim):
    return Operator(lambda x: x, dim, lipschitz_bound=1.0,
                    known_fix=AffineSet.whole_space(dim), label="id")


def constant_op(value, label="const"):
    v = as_vector(value)
    v.flags.writeable = False
    return Operator(lambda x: v, v.size, lipschitz_bound=0.0,
                    known_fix=(v,), label=label)


def affine_op(m, b, label="affine"):
    """x -> M x + b.  Lipschitz bound is the spectral norm of M; the fixed
    point set is attached whenever M is nonexpansive."""
    m = as_matrix(m)
    b = as_vector(b, dim=m.shape[0])
    lip = float(np.linalg.norm(m, 2))
    fix = solve_affine_fixed_set(m, b) if lip <= 1.0 + 1e-10 else None
    return Operator(lambda x: m @ x + b, m.shape[0], lipschitz_bound=lip,
                    known_fix=fix, label=label)


def rotation_op(angle):
    """Planar rotation about the origin (an isometry)."""
    c, s = math.cos(angle), math.sin(angle)
    m = np.array([[c, -s], [s, c]])
    fix = AffineSet.point([0.0, 0.0]) if abs(angle % (2 * math.pi)) > 1e-12 else \
        AffineSet.whole_space(2)
    return Operator(lambda x: m @ x, 2, lipschitz_bound=1.0, known_fix=fix,
                    label=f"rot({angle:.3g})")


def _same_fix(a, b, tol=1e-9):
    if a is None or b is None:
        return False
    if isinstance(a, AffineSet) and isinstance(b, AffineSet):
        return a.equals(b, tol)
    if isinstance(a, tuple) and isinstance(b, tuple):
        if len(a) != len(b):
            return False
        return all(any(norm(p - q) <= tol for q in b) for p in a) and \
            all(any(norm(p - q) <= tol for p in a) for q in b)
    return False


def compose(a, b):
    """Operator x -> a(b(x))."""
    if a.dim != b.dim:
        raise DimensionMismatch(f"compose: dims {a.dim} and {b.dim} differ")
    lip = None
    if a.lipschitz_bound is not None and b.lipschitz_bound is not None:
        lip = a.lipschitz_bound * b.lipschitz_bound
    fix = a.known_fix if _same_fix(a.known_fix, b.known_fix) else None
    af, bf = a.fn, b.fn
    return Operator(lambda x: af(bf(x)), a.dim, lipschitz_bound=lip,
                    known_fix=fix, label=f"{a.label}*{b.label}")


def convex_combination(ops, weights):
    """Operator x -> sum_i w_i T_i(x); nonexpansive when every T_i is."""
    if not ops:
        raise ValueError("need at least one operator")
    w = np.asarray(weights, dtype=float)
    if w.size != len(ops):
        raise ValueError("one weight per operator required")
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    if abs(float(w.sum()) - 1.0) > 1e-9:
        raise ValueError(f"weights must sum to 1 (off by {w.sum() - 1.0:.3e})")
    d = ops[0].dim
    if any(op.dim != d for op in ops):
        raise DimensionMismatch("convex_combination: mixed dimensions")
    lips = [op.lipschitz_bound for op in ops]
    lip = float(np.dot(w, lips)) if all(L is not None for L in lips) else None
    firmly = all(op.is_firmly_nonexpansive for op in ops)
    fns = [op.fn for op in ops]
    wl = w.tolist()

    def fn(x):
        acc = wl[0] * fns[0](x)
        for wi, f in zip(wl[1:], fns[1:]):
            acc += wi * f(x)
        return acc

    return Operator(fn, d, lipschitz_bound=lip, is_firmly_nonexpansive=firmly,
                    label="+".join(f"{wi:.3g}*{op.label}" for wi, op in zip(wl, ops)))


def averaged(t, lam):
    """Relaxation (1 - lam) * I + lam * T; keeps Fix(T) and, for nonexpansive
    T, is attracting."""
    if not 0.0 < lam < 1.0:
        raise ValueError(f"relaxation parameter must lie in (0,1), got {lam}")
    lip = None
    if t.lipschitz_bound is not None:
        lip = (1.0 - lam) + lam * t.lipschitz_bound
    firmly = lam <= 0.5 + 1e-12 and t.lipschitz_bound is not None \
        and t.lipschitz_bound <= 1.0 + 1e-12
    tf = t.fn
    cl = 1.0 - lam
    return Operator(lambda x: cl * x + lam * tf(x), t.dim, lipschitz_bound=lip,
                    is_firmly_nonexpansive=firmly, known_fix=t.known_fix,
                    label=f"avg({lam:.3g},{t.label})")


@dataclass(frozen=True)
class ContractionSpec:
    """A strict contraction with declared modulus alpha in (0, 1)."""

    base: Operator
    alpha: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"contraction modulus must lie in (0,1), got {self.alpha}")

    def __call__(self, x):
        return self.base.fn(x)

    @property
    def dim(self):
        return self.base.dim


@dataclass(frozen=True)
class MeirKeelerSpec:
    """A Meir-Keeler contraction with an optional testable modulus witness.

    `modulus_witness(eps) -> delta > 0` asserts that pairs closer than
    eps + delta are mapped to pairs closer than eps.
    """

    base: Operator
    modulus_witness: Optional[Callable[[float], float]] = None

    def __call__(self, x):
        return self.base.fn(x)

    @property
    def dim(self):
        return self.base.dim


@dataclass
class CheckReport:
    """Outcome of a randomized property check."""

    check: str
    passed: bool
    details: dict = field(default_factory=dict)
    witness: Optional[tuple] = None

    def __bool__(self):
        return self.passed


class BoxSampler:
    """Uniform point source on a box; carries its bounds so closeness-
    constrained pair construction can stay inside the domain."""

    def __init__(self, lo, hi):
        self.lo = as_vector(lo)
        self.hi = as_vector(hi, dim=self.lo.size)
        if np.any(self.hi <= self.lo):
            raise ValueError("box sampler needs lo < hi")

    def __call__(self, rng):
        return rng.uniform(self.lo, self.hi)

    def clip(self, x):
        return np.clip(x, self.lo, self.hi)


def box_sampler(lo, hi):
    return BoxSampler(lo, hi)


def default_sampler(dim, radius=5.0):
    return BoxSampler(-radius * np.ones(dim), radius * np.ones(dim))


def check_nonexpansive(t, sampler=None, trials=1000, tol=1e-9, seed=0):
    """Sampled expansion-ratio report: max ||Tx - Ty|| / ||x - y|| vs 1 + tol."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    sampler = sampler or default_sampler(t.dim)
    rng = np.random.default_rng(seed)
    max_ratio, worst = 0.0, None
    for _ in range(trials):
        x, y = sampler(rng), sampler(rng)
        dxy = norm(x - y)
        if dxy < 1e-12:
            continue
        ratio = norm(t(x) - t(y)) / dxy
        if ratio > max_ratio:
            max_ratio, worst = ratio, (x, y)
    return CheckReport("nonexpansive", max_ratio <= 1.0 + tol,
                       {"max_ratio": max_ratio, "trials": trials, "tol": tol},
                       witness=None if max_ratio <= 1.0 + tol else worst)


def check_attracting(t, fix_points, sampler=None, trials=1000, tol=1e-9, seed=0):
    """Sampled strict-distance-decrease report against verified fixed points.

    For every sampled x outside Fix(T) and every supplied p the gap
    ||x - p|| - ||Tx - p|| must exceed tol.
    """
    if not fix_points:
        raise ValueError("need at least one fixed point")
    pts = [as_vector(p, dim=t.dim) for p in fix_points]
    for p in pts:
        if norm(t(p) - p) > 1e-9 * (1.0 + norm(p)):
            raise ValueError(f"supplied point is not fixed (residual {norm(t(p) - p):.3e})")
    sampler = sampler or default_sampler(t.dim)
    rng = np.random.default_rng(seed)
    min_gap, worst, used = math.inf, None, 0
    for _ in range(trials):
        x = sampler(rng)
        tx = t(x)
        if norm(tx - x) <= 1e-10 * (1.0 + norm(x)):
            continue  # x is (numerically) a fixed point; skip
        used += 1
        for p in pts:
            gap = norm(x - p) - norm(tx - p)
            if gap < min_gap:
                min_gap, worst = gap, (x, p)
    passed = used > 0 and min_gap > tol
    return CheckReport("attracting", passed,
                       {"min_gap": min_gap, "samples_used": used, "tol": tol},
                       witness=None if passed else worst)


def check_meir_keeler(spec, eps_grid, sampler=None, trials=1000, seed=0):
    """For each eps, sampled pairs with ||x-y|| < eps + delta(eps) must map to
    ||Fx - Fy|| < eps.  Reports the first violating pair if any."""
    if np.any(np.asarray(eps_grid, dtype=float) <= 0):
        raise ValueError("eps grid must be positive")
    if spec.modulus_witness is None:
        return CheckReport("meir_keeler", False, {"status": "witness required"})
    t = spec.base
    sampler = sampler or default_sampler(t.dim)
    rng = np.random.default_rng(seed)
    results = {}
    for eps in eps_grid:
        delta = float(spec.modulus_witness(eps))
        if delta <= 0:
            return CheckReport("meir_keeler", False,
                               {"status": f"witness returned delta <= 0 at eps={eps}"})
        for _ in range(trials):
            x = sampler(rng)
            direction = rng.standard_normal(t.dim)
            dn = norm(direction)
            if dn < 1e-12:
                continue
            y = x + direction * (rng.uniform(0.0, eps + delta) * 0.999999 / dn)
            if isinstance(sampler, BoxSampler):
                y = sampler.clip(y)
            if norm(x - y) >= eps + delta:
                continue
            if norm(t(x) - t(y)) >= eps:
                return CheckReport(
                    "meir_keeler", False,
                    {"eps": eps, "delta": delta, "status": "violation"},
                    witness=(x, y))
        results[float(eps)] = delta
    return CheckReport("meir_keeler", True, {"deltas": results, "trials": trials})


def verify_operator_metadata(op, sampler=None, trials=200, seed=0):
    """Sampled verification of the declared Lipschitz bound and fixed points."""
    sampler = sampler or default_sampler(op.dim)
    rng = np.random.default_rng(seed)
    if op.lipschitz_bound is not None:
        for _ in range(trials):
            x, y = sampler(rng), sampler(rng)
            d = norm(x - y)
            if d < 1e-12:
                continue
            if norm(op(x) - op(y)) > op.lipschitz_bound * d + 1e-9:
                return CheckReport("operator_metadata", False,
                                   {"status": "lipschitz violated"}, witness=(x, y))
    if op.known_fix is not None:
        pts = op.known_fix.sample(rng, count=20) if isinstance(op.known_fix, AffineSet) \
            else op.known_fix
        for p in pts:
            if norm(op(p) - p) > 1e-9 * (1.0 + norm(p)):
                return CheckReport("operator_metadata", False,
                                   {"status": "declared fixed point not fixed"},
                                   witness=(p,))
    return CheckReport("operator_metadata", True, {"trials": trials})
