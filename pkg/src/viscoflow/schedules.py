"""Parameter-sequence generators and step-size condition checkers.

A Schedule generates an indexed real sequence (used for anchor weights
alpha_n, relaxation weights beta_n, resolvent parameters r_n, step sizes
lambda_n).  The step-size conditions checked here, for a shift N >= 1, are

    (i)    alpha_n in (0, 1)
    (ii)   alpha_n -> 0
    (iii)  sum alpha_n = infinity
    (iv)   sum |alpha_{n+N} - alpha_n| < infinity
    (iv')  alpha_{n+N} / alpha_n -> 1

Conditions (ii)-(iv') are asymptotic and not finitely decidable, so verdicts
separate *certified* (an analytic certificate is registered for the family /
parameter range) from *consistent* (finite-prefix observations only).  A
`violated` verdict always carries a concrete witness index.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

FAMILIES = ("power", "harmonic", "constant_over_log", "custom_list")

# condition identifiers
RANGE, DECAY, DIVSUM, SUMDIFF, RATIO1 = (
    "range", "decay", "divergent_sum", "summable_differences", "ratio_to_one")
CORE = (RANGE, DECAY, DIVSUM)


@dataclass(frozen=True)
class Schedule:
    """An indexed real sequence from a registered family."""

    family: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown schedule family {self.family!r}")

    @property
    def label(self):
        if self.family == "custom_list":
            return f"custom_list(len={len(self.params['values'])})"
        inner = ",".join(f"{k}={v:g}" for k, v in sorted(self.params.items()))
        return f"{self.family}({inner})"

    @property
    def length(self):
        """Available length (None = unbounded)."""
        if self.family == "custom_list":
            return len(self.params["values"])
        return None

    def prefix(self, count):
        """First `count` values as a float array."""
        if count < 1:
            raise ValueError("count must be >= 1")
        if self.family == "power":
            p, c = self.params["p"], self.params["c"]
            off = self.params.get("offset", 0.0)
            return off + c / np.power(np.arange(1.0, count + 1.0), p)
        if self.family == "harmonic":
            return 1.0 / np.arange(2.0, count + 2.0)
        if self.family == "constant_over_log":
            c = self.params["c"]
            return c / np.log(np.arange(count) + math.e)
        vals = self.params["values"]
        if count > len(vals):
            raise ValueError(f"custom_list holds {len(vals)} values, {count} requested")
        return np.asarray(vals[:count], dtype=float)

    def value(self, n):
        if self.family == "power":
            return self.params.get("offset", 0.0) + \
                self.params["c"] / (n + 1.0) ** self.params["p"]
        if self.family == "harmonic":
            return 1.0 / (n + 2.0)
        if self.family == "constant_over_log":
            return self.params["c"] / math.log(n + math.e)
        return float(self.params["values"][n])


def make_schedule(family, **params):
    """Validated Schedule constructor.

    power: offset + c/(n+1)^p with p in (0, 2], c in (0, 1], offset >= 0.
    harmonic: 1/(n+2).
    constant_over_log: c/log(n+e) with c in (0, 1).
    custom_list: values=<finite list>.
    """
    if family == "power":
        p = float(params.get("p", 1.0))
        c = float(params.get("c", 1.0))
        offset = float(params.get("offset", 0.0))
        if not 0.0 < p <= 2.0:
            raise ValueError(f"power exponent p must lie in (0, 2], got {p}")
        if not 0.0 < c <= 1.0:
            raise ValueError(f"power scale c must lie in (0, 1], got {c}")
        if offset < 0.0:
            raise ValueError(f"power offset must be >= 0, got {offset}")
        return Schedule("power", {"p": p, "c": c, "offset": offset})
    if family == "harmonic":
        if params:
            raise ValueError("harmonic takes no parameters")
        return Schedule("harmonic", {})
    if family == "constant_over_log":
        c = float(params.get("c", 0.5))
        if not 0.0 < c < 1.0:
            raise ValueError(f"constant_over_log scale must lie in (0, 1), got {c}")
        return Schedule("constant_over_log", {"c": c})
    if family == "custom_list":
        vals = np.asarray(params["values"], dtype=float)
        if vals.ndim != 1 or vals.size == 0 or not np.all(np.isfinite(vals)):
            raise ValueError("custom_list needs a nonempty list of finite values")
        return Schedule("custom_list", {"values": tuple(float(v) for v in vals)})
    raise ValueError(f"unknown schedule family {family!r}")


def certified_conditions(s, shift=1):
    """The step-size conditions analytically certified for this family and
    parameter range (valid for every shift N >= 1).

    The registry is deliberately conservative; it is itself tested against
    long prefix oracles.
    """
    certs = set()
    if s.family == "power":
        p, c = s.params["p"], s.params["c"]
        if s.params.get("offset", 0.0) == 0.0 and p <= 1.0:
            certs |= {DECAY, DIVSUM}
            if c < 1.0:
                certs.add(RANGE)
            if p == 1.0:
                certs.add(SUMDIFF)
            if p < 1.0:
                certs.add(RATIO1)
    elif s.family == "harmonic":
        certs |= {RANGE, DECAY, DIVSUM, SUMDIFF, RATIO1}
    elif s.family == "constant_over_log":
        certs |= {RANGE, DECAY, DIVSUM, SUMDIFF, RATIO1}
    return frozenset(certs)


def _diff_decay_exponent(s):
    """Asymptotic decay exponent of |s_{n+N} - s_n| (None if unknown)."""
    if s.family == "power":
        return s.params["p"] + 1.0
    if s.family == "harmonic":
        return 2.0
    if s.family == "constant_over_log":
        return 1.0  # 1/(n log^2 n): exponent 1 with extra log decay
    return None


def _alpha_decay_exponent(alpha):
    if alpha.family == "power" and alpha.params.get("offset", 0.0) == 0.0:
        return alpha.params["p"]
    if alpha.family == "harmonic":
        return 1.0
    return None


def certified_difference(seq, alpha=None, mode="summable"):
    """Registry of analytic certificates for the shifted-difference
    conditions: either sum |s_{n+N} - s_n| < inf, or |s_{n+N} - s_n| /
    alpha_n -> 0."""
    if mode == "summable":
        # monotone bounded families telescope
        return seq.family in ("power", "harmonic", "constant_over_log")
    if mode == "ratio_vanishes":
        if alpha is None:
            return False
        es = _diff_decay_exponent(seq)
        ea = _alpha_decay_exponent(alpha)
        if es is None or ea is None:
            return False
        if seq.family == "constant_over_log":
            return ea <= 1.0  # log^2 factor covers the boundary case
        return ea < es
    raise ValueError(f"unknown difference mode {mode!r}")


@dataclass
class HypothesisReport:
    """Verdict on a (family of) step-size or drift conditions.

    mode is "analytic" when a registry certificate settles the question and
    "prefix_heuristic" when only finite-prefix observations back the verdict.
    """

    hypothesis: str
    shift: int
    mode: str
    prefix_length: int
    observations: dict
    verdict: str  # "certified" | "consistent" | "violated"
    witness: Optional[int] = None

    def to_json(self):
        def clean(v):
            if isinstance(v, dict):
                return {k: clean(x) for k, x in v.items()}
            if isinstance(v, (list, tuple)):
                return [clean(x) for x in v]
            if isinstance(v, (np.floating, np.integer)):
                return float(v)
            return v
        return {
            "hypothesis": self.hypothesis,
            "shift": self.shift,
            "mode": self.mode,
            "prefix_length": self.prefix_length,
            "observations": clean(self.observations),
            "verdict": self.verdict,
            "witness": self.witness,
        }


def _effective_prefix(s, prefix):
    if s.length is not None:
        return min(prefix, s.length)
    return prefix


def _tail_slice(n):
    return max(10, n // 10)


def check_step_size_conditions(s, shift=1, prefix=100000):
    """Step-size condition report for `s` at the given shift.

    Certified when the registry covers (i)-(iii) plus one of (iv)/(iv');
    otherwise prefix observations decide consistent/violated.
    """
    if shift < 1:
        raise ValueError("shift must be >= 1")
    prefix = _effective_prefix(s, max(prefix, 100) if s.length is None else prefix)
    name = f"step_size(N={shift})"
    certs = certified_conditions(s, shift)
    if set(CORE) <= certs and (SUMDIFF in certs or RATIO1 in certs):
        return HypothesisReport(name, shift, "analytic", 0,
                                {"certified": sorted(certs)}, "certified")

    a = s.prefix(prefix)
    obs = {"certified": sorted(certs)}
    verdict, witness = "consistent", None

    def flag(item, idx, data):
        nonlocal verdict, witness
        obs[item] = {"status": "violated", **data}
        if verdict != "violated":
            verdict, witness = "violated", int(idx)

    # (i) range
    bad = np.where(~((a > 0.0) & (a < 1.0)))[0]
    if RANGE in certs:
        obs[RANGE] = {"status": "certified"}
    elif bad.size:
        flag(RANGE, bad[0], {"value": float(a[bad[0]]), "index": int(bad[0])})
    else:
        obs[RANGE] = {"status": "consistent"}

    t = _tail_slice(prefix)
    # (ii) decay toward zero
    if DECAY in certs:
        obs[DECAY] = {"status": "certified"}
    else:
        head_max = float(np.abs(a[:t]).max())
        tail = np.abs(a[-t:])
        tail_max = float(tail.max())
        data = {"head_max": head_max, "tail_max": tail_max}
        if tail_max > max(1e-6, 0.5 * head_max):
            flag(DECAY, prefix - t + int(tail.argmax()), data)
        else:
            obs[DECAY] = {"status": "consistent", **data}

    # (iii) divergent partial sums
    if DIVSUM in certs:
        obs[DIVSUM] = {"status": "certified"}
    else:
        total = float(a.sum())
        increment = float(a[prefix // 2:].sum())
        data = {"partial_sum": total, "second_half_increment": increment}
        if increment <= 1e-3 * (1.0 + total):
            flag(DIVSUM, prefix - 1,
                 {**data, "note": "summable-looking partial sums; inconsistent with a divergent sum"})
        else:
            obs[DIVSUM] = {"status": "consistent", **data}

    # (iv) / (iv'): shifted differences.  A near-constant share of the
    # partial sum in the second half is positive evidence of linear growth
    # (non-summability); a slowly decaying tail merely fails to establish.
    d = np.abs(a[shift:] - a[:-shift])
    dsum = float(d.sum())
    dinc = float(d[d.size // 2:].sum())
    sumdiff_ok = SUMDIFF in certs or dinc <= 1e-3 * (1.0 + dsum)
    sumdiff_bad = SUMDIFF not in certs and dinc >= 0.4 * dsum and dsum > 0
    obs[SUMDIFF] = {"status": "certified" if SUMDIFF in certs else
                    ("consistent" if sumdiff_ok else
                     ("violated" if sumdiff_bad else "not_established")),
                    "partial_sum": dsum, "second_half_increment": dinc}
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(np.abs(a[:-shift]) > 0, a[shift:] / a[:-shift], np.inf)
    tail_dev = np.abs(ratios[-t:] - 1.0)
    ratio_ok = RATIO1 in certs or float(tail_dev.max()) <= 1e-2
    obs[RATIO1] = {"status": "certified" if RATIO1 in certs else
                   ("consistent" if ratio_ok else "not_established"),
                   "tail_max_deviation": float(tail_dev.max())}
    if verdict != "violated" and sumdiff_bad and not ratio_ok:
        idx = ratios.size - t + int(tail_dev.argmax())
        flag("difference", idx,
             {"note": "shifted-difference sums grow linearly and shift ratios "
                      "stay away from 1 on the prefix"})

    return HypothesisReport(name, shift, "prefix_heuristic", prefix, obs,
                            verdict, witness)


def check_difference_condition(seq, alpha=None, shift=1, prefix=100000,
                               mode="summable"):
    """Shifted-difference condition on `seq`: either summable differences or
    differences vanishing relative to the `alpha` schedule."""
    if mode not in ("summable", "ratio_vanishes"):
        raise ValueError(f"unknown difference mode {mode!r}")
    if mode == "ratio_vanishes" and alpha is None:
        raise ValueError("ratio_vanishes mode needs the alpha schedule")
    prefix = _effective_prefix(seq, prefix)
    if alpha is not None:
        prefix = _effective_prefix(alpha, prefix)
    name = f"difference:{mode}(N={shift})"
    if certified_difference(seq, alpha, mode):
        return HypothesisReport(name, shift, "analytic", 0,
                                {"certified": True, "sequence": seq.label},
                                "certified")

    vals = seq.prefix(prefix)
    d = np.abs(vals[shift:] - vals[:-shift])
    if mode == "summable":
        dsum = float(d.sum())
        dinc = float(d[d.size // 2:].sum())
        obs = {"partial_sum": dsum, "second_half_increment": dinc}
        if dinc >= 0.4 * dsum and dsum > 0:
            obs["note"] = "partial sums of |differences| keep growing linearly"
            return HypothesisReport(name, shift, "prefix_heuristic", prefix, obs,
                                    "violated", witness=int(d.size - 1))
        if dinc > 1e-3 * (1.0 + dsum):
            obs["note"] = "tail still decaying; no contradiction observed"
        return HypothesisReport(name, shift, "prefix_heuristic", prefix, obs,
                                "consistent")

    avals = alpha.prefix(prefix)[:d.size]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(np.abs(avals) > 0, d / np.abs(avals), np.inf)
    t = _tail_slice(r.size)
    head_max = float(r[:t].max())
    tail_max = float(r[-t:].max())
    obs = {"head_max": head_max, "tail_max": tail_max}
    if tail_max <= max(1e-3, 1e-2 * head_max):
        return HypothesisReport(name, shift, "prefix_heuristic", prefix, obs,
                                "consistent")
    idx = r.size - t + int(np.argmax(r[-t:]))
    return HypothesisReport(name, shift, "prefix_heuristic", prefix, obs,
                            "violated", witness=idx)


def check_step_coupling_on_run(trace, family, shift=1, head=20000, tail=2000):
    """Coupled-step drift along stored iterates:

        d_n = || (1 - a_{n+N}) T_{n+N}(x_n) - (1 - a_n) T_n(x_n) ||

    Reports partial sums of d_n over a head window and the tail behavior of
    d_n / a_n; consistent when either the sums plateau or the tail ratios
    vanish.
    """
    if shift < 1:
        raise ValueError("shift must be >= 1")
    x = trace.iterates
    a = trace.alpha_values
    if x.shape[1] != family.dim:
        raise ValueError("trace dimension does not match the family")
    total = x.shape[0] - 1 - shift
    if total < 10:
        raise ValueError("trace too short for the requested shift")
    name = f"step_coupling(N={shift})"

    def drift(n):
        xn = x[n]
        v = (1.0 - a[n + shift]) * family.apply(n + shift, xn) \
            - (1.0 - a[n]) * family.apply(n, xn)
        return float(np.sqrt(np.dot(v, v)))

    head_n = min(head, total)
    d_head = np.array([drift(n) for n in range(head_n)])
    dsum = float(d_head.sum())
    dinc = float(d_head[head_n // 2:].sum())
    sum_ok = dinc <= 1e-3 * (1.0 + dsum)

    tail_n = min(tail, total)
    tail_idx = range(total - tail_n, total)
    tail_ratio = np.array([drift(n) / a[n] for n in tail_idx])
    tail_max = float(tail_ratio.max()) if tail_ratio.size else np.inf
    ratio_ok = tail_max <= 1e-2

    obs = {"head_window": head_n, "tail_window": tail_n,
           "drift_partial_sum": dsum, "drift_second_half_increment": dinc,
           "tail_max_drift_over_alpha": tail_max}
    if sum_ok or ratio_ok:
        return HypothesisReport(name, shift, "prefix_heuristic", head_n, obs,
                                "consistent")
    idx = total - tail_n + int(np.argmax(tail_ratio))
    return HypothesisReport(name, shift, "prefix_heuristic", head_n, obs,
                            "violated", witness=idx)
