"""Post-hoc verification of run limits and residual analytics.

The central check is the limit inequality

    <x_tilde - f(x_tilde), x_tilde - p> <= 0   for all p in F,

evaluated exactly over affine fixed-point sets (the supremum reduces to a
direction-space component plus one inequality at the projected anchor) and by
sampled maximization otherwise.  Verdicts are labeled exact vs sampled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .hilbert import AffineSet, as_vector, norm


@dataclass
class LimitReport:
    """Limit-quality summary at a candidate limit point."""

    x_tilde: np.ndarray
    vi_max_violation: float
    mode: str  # "exact" | "sampled"
    passed: bool
    tol: float
    direction_component: Optional[float] = None
    fixres: Optional[float] = None
    distance_to_fix: Optional[float] = None
    anchor_tail: Optional[float] = None
    samples: int = 0

    def to_json(self):
        def f(v):
            return None if v is None else float(v)
        return {
            "x_tilde": [float(v) for v in self.x_tilde],
            "vi_max_violation": f(self.vi_max_violation),
            "mode": self.mode,
            "passed": bool(self.passed),
            "tol": float(self.tol),
            "direction_component": f(self.direction_component),
            "fixres": f(self.fixres),
            "distance_to_fix": f(self.distance_to_fix),
            "anchor_tail": f(self.anchor_tail),
            "samples": int(self.samples),
        }


def check_vi_limit(x_tilde, f, fix_set, tol=1e-6, t_op=None):
    """Limit-inequality report at `x_tilde` against the fixed-point set.

    `fix_set` is an AffineSet (exact maximization) or a sequence of points
    (sampled maximization).  `t_op` optionally supplies the fixed map for the
    fixed-point residual field.
    """
    x_tilde = as_vector(x_tilde)
    v = x_tilde - np.asarray(f(x_tilde), dtype=float)
    if isinstance(fix_set, AffineSet):
        if fix_set.dim != x_tilde.size:
            raise ValueError("fixed-point set dimension mismatch")
        dir_comp = norm(fix_set.basis @ v) if fix_set.dim_subspace else 0.0
        anchor_violation = float(np.dot(v, x_tilde - fix_set.project(x_tilde)))
        violation = anchor_violation if dir_comp <= tol else np.inf
        passed = dir_comp <= tol and anchor_violation <= tol
        dist = norm(x_tilde - fix_set.project(x_tilde))
        mode, samples = "exact", 0
    else:
        pts = [as_vector(p, dim=x_tilde.size) for p in fix_set]
        if not pts:
            raise ValueError("fixed-point sample set must be nonempty")
        violations = [float(np.dot(v, x_tilde - p)) for p in pts]
        violation = max(violations)
        dir_comp = None
        passed = violation <= tol
        dist = min(norm(x_tilde - p) for p in pts)
        mode, samples = "sampled", len(pts)
    fixres = norm(x_tilde - t_op(x_tilde)) if t_op is not None else None
    return LimitReport(x_tilde=x_tilde, vi_max_violation=violation, mode=mode,
                       passed=passed, tol=tol, direction_component=dir_comp,
                       fixres=fixres, distance_to_fix=dist, samples=samples)


def check_anchor_tail(trace, f, p, tail_fraction=0.1):
    """Max of <f(p) - p, x_n - p> over the trailing fraction of the trace.

    On runs converging to p this tail max must trend to <= 0.
    """
    if not 0.0 < tail_fraction < 1.0:
        raise ValueError("tail fraction must lie in (0, 1)")
    p = as_vector(p, dim=trace.iterates.shape[1])
    g = np.asarray(f(p), dtype=float) - p
    count = max(1, int(round(trace.iterates.shape[0] * tail_fraction)))
    tail = trace.iterates[-count:]
    return float(((tail - p) @ g).max())


def envelope_recursion(s0, alpha, beta=0.0, gamma=0.0, n_terms=1000):
    """Exact trajectory of s_{n+1} = (1 - a_n) s_n + a_n b_n + a_n c_n.

    This is the tight upper-bound envelope used to dominate error sequences;
    with summable a_n * c_n and b_n -> 0 the tail falls below any positive
    threshold for large n.  `beta`/`gamma` may be scalars or arrays.
    """
    if s0 < 0:
        raise ValueError("s0 must be nonnegative")
    a = alpha.prefix(n_terms) if hasattr(alpha, "prefix") else \
        np.asarray(alpha, dtype=float)[:n_terms]
    if np.any(a <= 0.0) or np.any(a >= 1.0 + 1e-12):
        raise ValueError("envelope weights must lie in (0, 1]")
    b = np.broadcast_to(np.asarray(beta, dtype=float), (n_terms,))
    c = np.broadcast_to(np.asarray(gamma, dtype=float), (n_terms,))
    out = np.empty(n_terms + 1)
    out[0] = s0
    s = float(s0)
    for n in range(n_terms):
        s = (1.0 - a[n]) * s + a[n] * b[n] + a[n] * c[n]
        out[n + 1] = s
    return out


def residual_series(trace, shift=1):
    """||x_{n+shift} - x_n|| for all valid n; shift=1 matches the stored
    per-step residuals bit for bit (identical arithmetic to the run loop)."""
    if shift < 1:
        raise ValueError("shift must be >= 1")
    x = trace.iterates
    if x.shape[0] <= shift:
        raise ValueError("trace shorter than the requested shift")
    out = np.empty(x.shape[0] - shift)
    for n in range(out.size):
        d = x[n + shift] - x[n]
        out[n] = math.sqrt(float(np.dot(d, d)))
    return out


def fixres_series(trace, t_op, stride=1):
    """||x_n - T x_n|| along the trace for a fixed map T."""
    idx = range(0, trace.iterates.shape[0], stride)
    return np.array([norm(trace.iterates[i] - t_op(trace.iterates[i])) for i in idx])


def cyclic_displacement(trace, family, n):
    """||x_{n+N} - T_{n+N-1} ... T_n x_n|| for a periodic family."""
    big_n = family.period
    if n + big_n > trace.steps:
        raise ValueError("index too close to the end of the trace")
    z = trace.iterates[n]
    for k in range(n, n + big_n):
        z = family.apply(k, z)
    return norm(trace.iterates[n + big_n] - z)
