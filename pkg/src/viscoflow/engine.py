"""The anchored iteration driver x_{n+1} = a_n f(x_n) + (1 - a_n) T_n x_n.

`OperatorFamily` supplies T_n for the supported family kinds; `run` drives the
recurrence and records a fully replayable trace; `run_viscosity_path` and
`estimate_q_map` solve the regularization path x_t = t f(x_t) + (1 - t) T x_t
and follow it to t -> 0, which is the independent oracle for run limits.

A single run is strictly sequential; distinct runs share no mutable state and
may execute concurrently.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .hilbert import AffineSet, as_vector, norm
from .monotone import InnerSolveError, resolvent
from .operators import ContractionSpec, MeirKeelerSpec, Operator, compose
from .convex_sets import projection_operator


class FamilyValidationError(ValueError):
    """A family precondition failed; the message names the violated condition."""


class PathSolveError(RuntimeError):
    """The path map did not contract as the declared modulus requires."""


class NoStableLimit(RuntimeError):
    """The regularization path did not settle; `.path` holds the points."""

    def __init__(self, path):
        super().__init__("no stable limit along the regularization path")
        self.path = path


@dataclass
class StopRule:
    max_iters: int = 100000
    residual: float = 1e-10


@dataclass
class IterationTrace:
    """Complete record of one run.

    `iterates` has shape (K+1, d); `alpha_values` and `residuals` have length
    K; `iterates[n+1]` always reproduces a_n f(x_n) + (1 - a_n) T_n x_n when
    recomputed.
    """

    iterates: np.ndarray
    alpha_values: np.ndarray
    residuals: np.ndarray
    stop_cause: str  # residual_met | max_iters | diverged | inner_solver_failure
    config_echo: dict
    wall_time: float
    family_period: int = 1
    aux_iterates: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.residuals.size != self.iterates.shape[0] - 1:
            raise ValueError("residual list length must be iterate count - 1")

    @property
    def steps(self):
        return self.iterates.shape[0] - 1

    @property
    def final(self):
        return self.iterates[-1]


@dataclass
class OperatorFamily:
    """A sequence n -> T_n of nonexpansive maps.

    `apply(n, x)` is the hot-path evaluation; `member(n)` wraps the same
    arithmetic as an Operator so traces replay bit-exactly.  `reference` is a
    fixed nonexpansive map sharing the family's common fixed points, used by
    diagnostics and by the path oracle.
    """

    kind: str
    dim: int
    apply: Callable[[int, np.ndarray], np.ndarray]
    period: int = 1
    reference: Optional[Operator] = None
    fix_points: Optional[tuple] = None
    fix_affine: Optional[AffineSet] = None
    label: str = ""
    components: dict = field(default_factory=dict)

    def member(self, n):
        return Operator(lambda x, _n=n: self.apply(_n, x), self.dim,
                        lipschitz_bound=1.0, label=f"{self.label}[{n}]")

    def verify_fix_points(self, sample_indices=(0, 1, 2, 3, 5, 10, 100, 1000), tol=1e-9):
        if not self.fix_points:
            return
        for p in self.fix_points:
            for n in sample_indices:
                r = norm(self.apply(n, p) - p)
                if r > tol:
                    raise FamilyValidationError(
                        f"declared common fixed point has residual {r:.3e} at n={n}")


def _positive(value, what, floor=0.0):
    if not value > floor:
        raise FamilyValidationError(f"{what} must be > {floor}, got {value}")
    return value


def _schedule_value(schedule, n, lo, hi, what, lo_strict=True, hi_strict=True):
    v = schedule.value(n)
    lo_ok = v > lo if lo_strict else v >= lo
    hi_ok = v < hi if hi_strict else v <= hi
    if not (lo_ok and hi_ok):
        raise FamilyValidationError(f"{what} violated at n={n}: value {v}")
    return v


def constant_family(t, fix_points=None):
    fix_affine = t.known_fix if isinstance(t.known_fix, AffineSet) else None
    if fix_points is None and isinstance(t.known_fix, tuple):
        fix_points = t.known_fix
    fam = OperatorFamily("constant", t.dim, lambda n, x: t.fn(x), period=1,
                         reference=t, fix_points=fix_points, fix_affine=fix_affine,
                         label=f"const[{t.label}]", components={"operator": t})
    fam.verify_fix_points()
    return fam


def mann_family(t, beta, fix_points=None):
    """T_n x = beta_n x + (1 - beta_n) T x with beta_n in (0, 1)."""
    tf = t.fn

    def apply(n, x):
        b = _schedule_value(beta, n, 0.0, 1.0, "mann relaxation weight in (0,1)")
        return b * x + (1.0 - b) * tf(x)

    fix_affine = t.known_fix if isinstance(t.known_fix, AffineSet) else None
    fam = OperatorFamily("mann", t.dim, apply, period=1, reference=t,
                         fix_points=fix_points, fix_affine=fix_affine,
                         label=f"mann[{t.label}]",
                         components={"operator": t, "beta": beta})
    fam.verify_fix_points()
    return fam


def cyclic_family(ops, fix_points=None):
    """T_n = ops[n mod N]."""
    if not ops:
        raise FamilyValidationError("cyclic family needs a nonempty operator list")
    d = ops[0].dim
    if any(op.dim != d for op in ops):
        raise FamilyValidationError("cyclic family operators have mixed dimensions")
    n_ops = len(ops)
    fns = [op.fn for op in ops]

    ref = ops[0]
    for op in ops[1:]:
        ref = compose(op, ref)
    fix_affine = None
    affine_fixes = [op.known_fix for op in ops if isinstance(op.known_fix, AffineSet)]
    if len(affine_fixes) == len(ops):
        fix_affine = affine_fixes[0]
        for fa in affine_fixes[1:]:
            fix_affine = fix_affine.intersect(fa) if fix_affine is not None else None
    fam = OperatorFamily("cyclic", d, lambda n, x: fns[n % n_ops](x), period=n_ops,
                         reference=ref, fix_points=fix_points, fix_affine=fix_affine,
                         label=f"cyclic[{n_ops}]", components={"operators": tuple(ops)})
    fam.verify_fix_points()
    return fam


def resolvent_family(a, r_schedule, r_floor=1e-9, r_ref=None, fix_points=None):
    """T_n = (I + r_n A)^{-1} with r_n >= r_floor > 0."""
    _positive(r_floor, "resolvent parameter floor")
    if a._is_symmetric:
        w, v = a._eigw, a._eigv
        vt = v.T
        qhat = vt @ a.q

        def apply(n, x):
            r = _schedule_value(r_schedule, n, r_floor, math.inf,
                                "resolvent parameter r_n >= floor", lo_strict=False)
            y = (vt @ x - r * qhat) / (1.0 + r * w)
            return v @ y
    else:
        eye = np.eye(a.dim)

        def apply(n, x):
            r = _schedule_value(r_schedule, n, r_floor, math.inf,
                                "resolvent parameter r_n >= floor", lo_strict=False)
            return np.linalg.solve(eye + r * a.m, x - r * a.q)

    if r_ref is None:
        r_ref = float(min(r_schedule.value(n) for n in (0, 10, 1000, 99999)))
    ref = resolvent(a, r_ref)
    fam = OperatorFamily("resolvent", a.dim, apply, period=1, reference=ref,
                         fix_points=fix_points, fix_affine=a.zero_set(),
                         label=f"resolvent[{r_schedule.label}]",
                         components={"monotone": a, "r": r_schedule, "r_ref": r_ref})
    fam.verify_fix_points()
    return fam


def convex_combination_family(ops, weight_schedules, bounds=(1e-6, 1.0), fix_points=None):
    """T_n = sum_i w_i(n) T_i, with weights in [a,b] (a > 0) summing to 1."""
    if len(ops) != len(weight_schedules) or not ops:
        raise FamilyValidationError("need one weight schedule per operator")
    d = ops[0].dim
    if any(op.dim != d for op in ops):
        raise FamilyValidationError("combination operators have mixed dimensions")
    lo, hi = bounds
    _positive(lo, "weight lower bound")
    fns = [op.fn for op in ops]

    def apply(n, x):
        ws = [_schedule_value(s, n, lo, hi, "combination weight in [a,b]",
                              lo_strict=False, hi_strict=False)
              for s in weight_schedules]
        total = sum(ws)
        if abs(total - 1.0) > 1e-9:
            raise FamilyValidationError(
                f"combination weights must sum to 1 at every n (n={n}, sum={total})")
        acc = ws[0] * fns[0](x)
        for w, f in zip(ws[1:], fns[1:]):
            acc += w * f(x)
        return acc

    from .operators import convex_combination
    ref = convex_combination(ops, np.full(len(ops), 1.0 / len(ops)))
    fix_affine = None
    affine_fixes = [op.known_fix for op in ops if isinstance(op.known_fix, AffineSet)]
    if len(affine_fixes) == len(ops):
        fix_affine = affine_fixes[0]
        for fa in affine_fixes[1:]:
            fix_affine = fix_affine.intersect(fa) if fix_affine is not None else None
    fam = OperatorFamily("convex_combination", d, apply, period=1, reference=ref,
                         fix_points=fix_points, fix_affine=fix_affine,
                         label="convex_combination",
                         components={"operators": tuple(ops),
                                     "weights": tuple(weight_schedules)})
    fam.verify_fix_points()
    return fam


def projected_gradient_family(cset, a, lam_schedule, lam_range=None, fix_points=None):
    """T_n x = P_C(x - lam_n A x) with lam_n in [a,b], 0 < a <= b < 2 mu."""
    if a.mu is None:
        raise FamilyValidationError("projected-gradient family needs a declared mu")
    lo, hi = lam_range if lam_range is not None else (1e-12, 2.0 * a.mu)
    if not (0.0 < lo <= hi < 2.0 * a.mu):
        raise FamilyValidationError(
            f"step range [a,b] must satisfy 0 < a <= b < 2*mu = {2 * a.mu}")
    proj = cset.project
    m, q = a.m, a.q

    def apply(n, x):
        lam = _schedule_value(lam_schedule, n, lo, hi, "projected-gradient step in [a,b]",
                              lo_strict=False, hi_strict=False)
        return proj(x - lam * (m @ x + q))

    from .monotone import projected_gradient_map
    lam_ref = 0.5 * (lo + hi)
    ref = projected_gradient_map(cset, a, lam_ref)
    fam = OperatorFamily("projected_gradient", a.dim, apply, period=1, reference=ref,
                         fix_points=fix_points, label="projected_gradient",
                         components={"set": cset, "monotone": a, "lam": lam_schedule,
                                     "lam_ref": lam_ref})
    fam.verify_fix_points()
    return fam


def equilibrium_family(bif, cset, r_schedule, inner_tol=1e-10, r_floor=1e-6,
                       max_inner=100000, fix_points=None):
    """T_n = equilibrium resolvent at r_n, with liminf r_n > 0 enforced via a
    hard floor."""
    _positive(inner_tol, "inner tolerance")
    _positive(r_floor, "equilibrium parameter floor")
    from .monotone import solve_regularized_vi

    def apply(n, x):
        r = _schedule_value(r_schedule, n, r_floor, math.inf,
                            "equilibrium parameter liminf r_n > 0", lo_strict=False)
        return solve_regularized_vi(bif, cset, r, x, inner_tol, max_inner)

    from .monotone import equilibrium_resolvent
    r_ref = float(min(r_schedule.value(n) for n in (0, 10, 1000, 99999)))
    ref = equilibrium_resolvent(bif, cset, r_ref, inner_tol, max_inner)
    fam = OperatorFamily("equilibrium", bif.dim, apply, period=1, reference=ref,
                         fix_points=fix_points, label="equilibrium",
                         components={"bifunction": bif, "set": cset, "r": r_schedule,
                                     "inner_tol": inner_tol, "r_ref": r_ref})
    fam.verify_fix_points()
    return fam


def nested_mann_family(ops, beta_schedules, fix_points=None):
    """Nested relaxation chain

        G_j(n, x) = b_j(n) x + (1 - b_j(n)) T_j G_{j+1}(n, x),  G_{m+1} = id,

    evaluated at j = 1.  Every beta schedule must decay to zero.
    """
    if len(ops) != len(beta_schedules) or not ops:
        raise FamilyValidationError("need one relaxation schedule per operator")
    d = ops[0].dim
    if any(op.dim != d for op in ops):
        raise FamilyValidationError("chain operators have mixed dimensions")
    from .schedules import certified_conditions
    for s in beta_schedules:
        if s.family == "custom_list":
            vals = s.prefix(s.length)
            if vals[-max(1, len(vals) // 10):].max() > 0.05 * max(vals.max(), 1e-12):
                raise FamilyValidationError(
                    "chain relaxation weights must decay to zero")
        elif "decay" not in certified_conditions(s):
            raise FamilyValidationError(
                "chain relaxation weights must decay to zero (no decay certificate)")
    fns = [op.fn for op in ops]
    m = len(ops)

    def apply(n, x):
        z = x
        for j in range(m - 1, -1, -1):
            b = _schedule_value(beta_schedules[j], n, 0.0, 1.0,
                                "chain relaxation weight in (0,1)")
            z = b * x + (1.0 - b) * fns[j](z)
        return z

    ref = ops[m - 1]
    for op in reversed(ops[:-1]):
        ref = compose(op, ref)
    fam = OperatorFamily("nested_mann", d, apply, period=1, reference=ref,
                         fix_points=fix_points, label=f"nested_mann[{m}]",
                         components={"operators": tuple(ops),
                                     "betas": tuple(beta_schedules)})
    fam.verify_fix_points()
    return fam


def retracted_family(cset, t, fix_points=None):
    """Ambient-space realization of the retracted scheme: T_n = T o P with P
    the metric projection onto the constraint set.  The driver composes the
    contraction with P as well, and the trace carries y_n = P(x_n)."""
    if cset.dim != t.dim:
        raise FamilyValidationError("retraction set and operator dimensions differ")
    proj = cset.project
    tf = t.fn
    p_op = projection_operator(cset)
    ref = compose(t, p_op)
    fam = OperatorFamily("retracted", t.dim, lambda n, x: tf(proj(x)), period=1,
                         reference=ref, fix_points=fix_points,
                         label=f"retracted[{t.label}]",
                         components={"set": cset, "operator": t, "projection": p_op})
    fam.verify_fix_points()
    return fam


def composition_family(fam1, fam2, fix_points=None):
    """T_n = T^1_n o T^2_n."""
    if fam1.dim != fam2.dim:
        raise FamilyValidationError("composed families have mixed dimensions")
    period = math.lcm(fam1.period, fam2.period)
    ref = None
    if fam1.reference is not None and fam2.reference is not None:
        ref = compose(fam1.reference, fam2.reference)
    fam = OperatorFamily(
        "composition", fam1.dim,
        lambda n, x: fam1.apply(n, fam2.apply(n, x)), period=period,
        reference=ref, fix_points=fix_points,
        label=f"comp[{fam1.label},{fam2.label}]",
        components={"outer": fam1, "inner": fam2})
    fam.verify_fix_points()
    return fam


_FAMILY_BUILDERS = {
    "constant": constant_family,
    "mann": mann_family,
    "cyclic": cyclic_family,
    "resolvent": resolvent_family,
    "convex_combination": convex_combination_family,
    "projected_gradient": projected_gradient_family,
    "equilibrium": equilibrium_family,
    "nested_mann": nested_mann_family,
    "retracted": retracted_family,
    "composition": composition_family,
}


def make_family(kind, **components):
    """Dispatching constructor for every supported family kind."""
    try:
        builder = _FAMILY_BUILDERS[kind]
    except KeyError:
        raise FamilyValidationError(f"unknown family kind {kind!r}") from None
    return builder(**components)


DIVERGENCE_LIMIT = 1e12


def run(x0, f, family, alpha, stop=None, config_echo=None):
    """Drive x_{n+1} = a_n f(x_n) + (1 - a_n) T_n x_n and record the trace.

    Stops on the first of: step residual <= stop.residual, stop.max_iters
    reached, a non-finite/overflowing iterate (diverged), or an inner-solver
    failure raised by the family.
    """
    if not isinstance(f, (ContractionSpec, MeirKeelerSpec)):
        raise TypeError("f must be a ContractionSpec or MeirKeelerSpec")
    x0 = as_vector(x0, dim=family.dim)
    if f.dim != family.dim:
        raise ValueError("anchor map and family dimensions differ")
    stop = stop or StopRule()
    k_max = int(stop.max_iters)
    avals = alpha.prefix(k_max)
    if np.any(avals <= 0.0) or np.any(avals > 1.0):
        bad = int(np.where((avals <= 0.0) | (avals > 1.0))[0][0])
        raise ValueError(f"anchor weights must lie in (0, 1] "
                         f"(step-size range condition; violated at n={bad})")
    alist = avals.tolist()
    f_fn = f.base.fn
    fam_apply = family.apply

    xs = np.empty((k_max + 1, x0.size))
    xs[0] = x0
    res = np.empty(k_max)
    x = x0
    steps = k_max
    stop_cause = "max_iters"
    t0 = time.perf_counter()
    for n in range(k_max):
        a = alist[n]
        try:
            tx = fam_apply(n, x)
        except InnerSolveError:
            steps, stop_cause = n, "inner_solver_failure"
            break
        x1 = a * f_fn(x)
        x1 += (1.0 - a) * tx
        dx = x1 - x
        r = math.sqrt(float(np.dot(dx, dx)))
        xs[n + 1] = x1
        res[n] = r
        if not r < DIVERGENCE_LIMIT or float(np.abs(x1).max()) > DIVERGENCE_LIMIT:
            steps, stop_cause = n + 1, "diverged"
            break
        if r <= stop.residual:
            steps, stop_cause = n + 1, "residual_met"
            break
        x = x1
    wall = time.perf_counter() - t0

    aux = None
    if family.kind == "retracted":
        proj = family.components["set"].project
        aux = np.stack([proj(xs[i]) for i in range(steps + 1)])
    return IterationTrace(iterates=xs[:steps + 1].copy(),
                          alpha_values=avals[:steps].copy(),
                          residuals=res[:steps].copy(),
                          stop_cause=stop_cause,
                          config_echo=dict(config_echo or {}),
                          wall_time=wall,
                          family_period=family.period,
                          aux_iterates=aux)


def replay_max_error(trace, f, family, sample=200):
    """Max recomputation error of the stored recurrence over sampled steps."""
    k = trace.steps
    idx = range(k) if k <= sample else \
        sorted({int(i) for i in np.linspace(0, k - 1, sample)})
    f_fn = f.base.fn
    worst = 0.0
    for n in idx:
        a = trace.alpha_values[n]
        want = a * f_fn(trace.iterates[n]) + (1.0 - a) * family.apply(n, trace.iterates[n])
        worst = max(worst, norm(want - trace.iterates[n + 1]))
    return worst


def run_viscosity_path(f, t, big_t, x_init, tol=1e-10, max_iters=None):
    """Solve x = t f(x) + (1 - t) T x by Picard iteration.

    For a ContractionSpec the combined modulus 1 - t(1 - alpha) gives an
    enforced iteration budget and a geometric-decrease guard; a Meir-Keeler
    anchor gets a monotone-decrease guard and a large hard budget.
    """
    if not 0.0 < t < 1.0:
        raise ValueError(f"path parameter t must lie in (0,1), got {t}")
    x = as_vector(x_init, dim=big_t.dim)
    f_fn = f.base.fn
    t_fn = big_t.fn
    modulus = None
    if isinstance(f, ContractionSpec):
        modulus = 1.0 - t * (1.0 - f.alpha)
    budget = max_iters
    r_prev = None
    k = 0
    while True:
        y = t * f_fn(x) + (1.0 - t) * t_fn(x)
        dy = y - x
        r = math.sqrt(float(np.dot(dy, dy)))
        if r <= tol:
            return y
        floor = 1e-14 * (1.0 + norm(x))
        if r_prev is not None:
            limit = (modulus * r_prev if modulus is not None else r_prev) + floor
            if r > limit:
                raise PathSolveError(
                    f"path residual not contracting at t={t}: {r_prev:.3e} -> {r:.3e}")
        if budget is None:
            if modulus is not None:
                budget = int(math.ceil(math.log(max(tol, 1e-300) / max(r, tol))
                                       / math.log(modulus))) + 64
            else:
                budget = 2_000_000
        if k >= budget:
            raise PathSolveError(f"iteration budget exhausted at t={t} "
                                 f"(residual {r:.3e}, tol {tol:.1e})")
        x = y
        r_prev = r
        k += 1


def default_t_sequence(k_max=20):
    return [2.0 ** -k for k in range(1, k_max + 1)]


def estimate_q_map(f, big_t, t_sequence=None, tol=1e-4, path_tol=1e-9,
                   x_init=None, refine_tol=1e-13):
    """Follow the path x_t toward t -> 0 and return the settled limit.

    Accepts once successive path points differ by less than `tol`, then
    re-solves at the accepted t to `refine_tol` so the returned point
    satisfies the limit inequality essentially exactly.  Raises NoStableLimit
    (with the path attached) when the sequence never settles.
    """
    ts = list(t_sequence) if t_sequence is not None else default_t_sequence()
    if any(b >= a for a, b in zip(ts, ts[1:])) or not ts:
        raise ValueError("t sequence must be strictly decreasing")
    x = as_vector(x_init, dim=big_t.dim) if x_init is not None \
        else np.zeros(big_t.dim)
    path = []
    prev = None
    for t in ts:
        x = run_viscosity_path(f, t, big_t, x, tol=path_tol)
        path.append((t, x))
        if prev is not None and norm(x - prev) < tol:
            return _refine_path_point(f, t, big_t, x, refine_tol)
        prev = x
    raise NoStableLimit(path)


def _refine_path_point(f, t, big_t, x, refine_tol):
    """Polish a path point down to (near) the floating-point residual floor."""
    f_fn, t_fn = f.base.fn, big_t.fn
    best, best_r = x, math.inf
    for _ in range(100000):
        y = t * f_fn(x) + (1.0 - t) * t_fn(x)
        dy = y - x
        r = math.sqrt(float(np.dot(dy, dy)))
        if r < best_r:
            best, best_r = y, r
        if r <= refine_tol or r >= best_r * 4.0 + 1e-300:
            break
        x = y
    return best
