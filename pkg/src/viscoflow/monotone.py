"""Monotone affine operators and their derived nonexpansive maps.

Covers resolvents (I + rA)^{-1}, forward steps I - lam*A for inverse-strongly
monotone A, projected-gradient maps P_C(I - lam*A), and the regularized-VI
resolvent of a quadratic bifunction F(z, y) = <Mz + q, y - z>.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .convex_sets import projection_operator
from .hilbert import as_matrix, as_vector, norm
from .operators import CheckReport, Operator, compose, default_sampler

MONOTONE_TOL = 1e-9


class InnerSolveError(RuntimeError):
    """The inner projected-gradient loop did not reach its residual target."""

    def __init__(self, residual, iterations):
        super().__init__(f"inner solver stalled at residual {residual:.3e} "
                         f"after {iterations} iterations")
        self.residual = residual
        self.iterations = iterations


@dataclass
class AffineMonotoneOp:
    """A(x) = M x + q with positive semidefinite symmetric part.

    `mu` optionally declares an inverse-strong-monotonicity modulus:
    <x - y, Ax - Ay> >= mu * ||Ax - Ay||^2.
    """

    m: np.ndarray
    q: np.ndarray
    mu: Optional[float] = None

    def __post_init__(self):
        self.m = as_matrix(self.m)
        self.q = as_vector(self.q, dim=self.m.shape[0])
        sym = 0.5 * (self.m + self.m.T)
        w = np.linalg.eigvalsh(sym)
        if w.min() < -MONOTONE_TOL:
            raise ValueError(f"symmetric part has negative eigenvalue {w.min():.3e}; "
                             "operator is not monotone")
        if self.mu is not None and not self.mu > 0:
            raise ValueError("mu must be positive when declared")
        self._sym_eigs = w
        self._is_symmetric = float(np.abs(self.m - self.m.T).max()) <= 1e-12
        if self._is_symmetric:
            self._eigw, self._eigv = np.linalg.eigh(self.m)
        self.opnorm = float(np.linalg.norm(self.m, 2))

    @property
    def dim(self):
        return self.q.size

    def __call__(self, x):
        return self.m @ x + self.q

    def zero_set(self):
        """Solutions of A x = 0 as an AffineSet (or None when empty),
        recovered as the fixed-point set of the unit resolvent."""
        d = self.dim
        r_inv = np.linalg.inv(np.eye(d) + self.m)
        from .hilbert import solve_affine_fixed_set
        return solve_affine_fixed_set(r_inv, -r_inv @ self.q)

    def resolvent_coeffs(self, r):
        """(matrix, offset) with J_r(x) = matrix @ x + offset."""
        if r <= 0:
            raise ValueError(f"resolvent parameter must be positive, got {r}")
        d = self.dim
        rm = np.linalg.inv(np.eye(d) + r * self.m)
        return rm, -rm @ (r * self.q)


def resolvent(a, r):
    """J_r = (I + rA)^{-1}: firmly nonexpansive, Fix(J_r) = zeros of A."""
    rm, rb = a.resolvent_coeffs(r)
    return Operator(lambda x: rm @ x + rb, a.dim, lipschitz_bound=1.0,
                    is_firmly_nonexpansive=True, known_fix=a.zero_set(),
                    label=f"J_{r:.3g}")


def forward_step(a, lam):
    """I - lam*A, nonexpansive for lam <= 2*mu (mu must be declared)."""
    if a.mu is None:
        raise ValueError("forward_step needs a declared inverse-strong-monotonicity modulus")
    if not 0.0 < lam <= 2.0 * a.mu:
        raise ValueError(f"step lam must lie in (0, 2*mu] = (0, {2 * a.mu}], got {lam}")
    fm = np.eye(a.dim) - lam * a.m
    fb = -lam * a.q
    return Operator(lambda x: fm @ x + fb, a.dim, lipschitz_bound=1.0,
                    known_fix=a.zero_set(), label=f"fwd_{lam:.3g}")


def projected_gradient_map(c, a, lam):
    """P_C(x - lam*A x); its fixed points solve the variational inequality
    <Ax, y - x> >= 0 for all y in C."""
    if a.mu is None or not 0.0 < lam < 2.0 * a.mu:
        raise ValueError(f"projected-gradient step must lie in (0, 2*mu), got {lam}")
    op = compose(projection_operator(c), forward_step(a, lam))
    return Operator(op.fn, op.dim, lipschitz_bound=1.0,
                    label=f"pg_{lam:.3g}")


@dataclass
class QuadraticBifunction:
    """F(z, y) = <M z + q, y - z> with monotone M.

    F(x, x) = 0 holds structurally and F(x, y) + F(y, x) <= 0 follows from
    monotonicity of M.
    """

    m: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        op = AffineMonotoneOp(self.m, self.q)
        self.m, self.q = op.m, op.q
        self._op = op

    @property
    def dim(self):
        return self.q.size

    def value(self, z, y):
        return float(np.dot(self.m @ z + self.q, y - z))

    @property
    def operator(self):
        return self._op


def _inner_step(bif, r):
    """Fixed projected-gradient step for G(z) = Mz + q + (z - x)/r.

    For symmetric M the step is the optimal 2 / (eig_min + eig_max + 2/r);
    otherwise the conservative s / L^2 with s = 1/r, L = ||M|| + 1/r, which
    keeps the iteration a strict contraction for any monotone M.
    """
    s = 1.0 / r
    op = bif.operator
    if op._is_symmetric:
        w = op._sym_eigs
        return 2.0 / (float(w.min()) + float(w.max()) + 2.0 * s)
    big_l = op.opnorm + s
    return s / (big_l * big_l)


def solve_regularized_vi(bif, cset, r, x, tol, max_iters=100000):
    """Unique z in C with <Mz + q + (z - x)/r, y - z> >= 0 for all y in C,
    by projected gradient from the deterministic start z0 = P_C(x).

    Determinism of the start point keeps engine traces exactly replayable.
    """
    tau = _inner_step(bif, r)
    s = 1.0 / r
    m, q = bif.m, bif.q
    proj = cset.project
    z = proj(x)
    res = np.inf
    for k in range(max_iters):
        g = m @ z + q + s * (z - x)
        z_next = proj(z - tau * g)
        dz = z_next - z
        res = float(np.sqrt(np.dot(dz, dz)))
        z = z_next
        if res <= tol:
            return z
    raise InnerSolveError(res, max_iters)


def equilibrium_resolvent(bif, cset, r, inner_tol=1e-10, max_inner=100000):
    """The single-valued, firmly nonexpansive map T_r with
    T_r(x) = {z in C : F(z,y) + (1/r)<y - z, z - x> >= 0 for all y in C}."""
    if r <= 0:
        raise ValueError(f"equilibrium resolvent parameter must be positive, got {r}")
    if inner_tol <= 0:
        raise ValueError("inner tolerance must be positive")
    if bif.dim != cset.dim:
        raise ValueError("bifunction and constraint set dimensions differ")

    def fn(x):
        return solve_regularized_vi(bif, cset, r, x, inner_tol, max_inner)

    return Operator(fn, bif.dim, lipschitz_bound=1.0, is_firmly_nonexpansive=True,
                    label=f"T_{r:.3g}")


def check_inverse_strongly_monotone(a, mu, sampler=None, trials=1000, seed=0, tol=1e-9):
    """Sampled slack report for <x-y, Ax-Ay> >= mu ||Ax-Ay||^2."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    sampler = sampler or default_sampler(a.dim)
    rng = np.random.default_rng(seed)
    min_slack, worst = np.inf, None
    for _ in range(trials):
        x, y = sampler(rng), sampler(rng)
        av = a(x) - a(y)
        slack = float(np.dot(x - y, av)) - mu * float(np.dot(av, av))
        if slack < min_slack:
            min_slack, worst = slack, (x, y)
    passed = min_slack >= -tol
    return CheckReport("inverse_strongly_monotone", passed,
                       {"min_slack": min_slack, "mu": mu, "trials": trials},
                       witness=None if passed else worst)
