"""Experiment configuration: JSON schema, validation, and object builders.

A config JSON describes one run: start point, anchor map f, operator family,
anchor-weight schedule, stopping rule, emission options, and the analysis
block (declared fixed points, limit-inequality sampling, expected limit).
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import jsonschema

from . import engine, monotone, schedules
from .convex_sets import (AffineSubspace, Ball, Box, Halfspace, Hyperplane,
                          Simplex, WholeSpace, projection_operator)
from .hilbert import AffineSet, as_vector, norm
from .operators import (ContractionSpec, MeirKeelerSpec, Operator, affine_op,
                        averaged, compose, constant_op, convex_combination,
                        rotation_op)


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


_NUMBER_ARRAY = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_MATRIX = {"type": "array", "items": _NUMBER_ARRAY, "minItems": 1}

_SCHEDULE_SCHEMA = {
    "type": "object",
    "properties": {
        "family": {"enum": list(schedules.FAMILIES)},
        "p": {"type": "number"},
        "c": {"type": "number"},
        "offset": {"type": "number"},
        "values": _NUMBER_ARRAY,
    },
    "required": ["family"],
}

_SET_SCHEMA = {
    "type": "object",
    "properties": {"kind": {"enum": ["ball", "box", "halfspace", "hyperplane",
                                     "affine", "simplex", "whole_space"]}},
    "required": ["kind"],
}

_OPERATOR_SCHEMA = {
    "type": "object",
    "properties": {"kind": {"enum": ["affine", "projection", "rotation",
                                     "composition", "convex_combination",
                                     "averaged", "contraction_affine"]}},
    "required": ["kind"],
}

CONFIG_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "properties": {
        "scenario": {"type": "string"},
        "description": {"type": "string"},
        "seed": {"type": "integer"},
        "x0": _NUMBER_ARRAY,
        "f": {
            "type": "object",
            "properties": {"kind": {"enum": ["constant", "contraction_affine",
                                             "mkc_radial"]}},
            "required": ["kind"],
        },
        "family": {
            "type": "object",
            "properties": {"kind": {"enum": list(engine._FAMILY_BUILDERS)}},
            "required": ["kind"],
        },
        "alpha": _SCHEDULE_SCHEMA,
        "stop": {
            "type": "object",
            "properties": {
                "max_iters": {"type": "integer", "minimum": 1},
                "residual": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "emit": {
            "type": "object",
            "properties": {
                "trace_csv": {"type": "boolean"},
                "every_k": {"type": "integer", "minimum": 1},
            },
        },
        "analysis": {"type": "object"},
    },
    "required": ["x0", "f", "family", "alpha"],
}

SCHEDULE_SCHEMA = _SCHEDULE_SCHEMA
SET_SCHEMA = _SET_SCHEMA
OPERATOR_SCHEMA = _OPERATOR_SCHEMA


def config_sha256(cfg):
    """Canonical hash of a config dict (sorted keys, compact separators)."""
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def validate_config(cfg):
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as e:
        raise ConfigError(f"config schema violation: {e.message}") from None


def build_set(cfg):
    kind = cfg.get("kind")
    try:
        if kind == "ball":
            return Ball(np.asarray(cfg["center"], float), float(cfg["radius"]))
        if kind == "box":
            return Box(np.asarray(cfg["lo"], float), np.asarray(cfg["hi"], float))
        if kind == "halfspace":
            return Halfspace(np.asarray(cfg["normal"], float), float(cfg["offset"]))
        if kind == "hyperplane":
            return Hyperplane(np.asarray(cfg["normal"], float), float(cfg["offset"]))
        if kind == "affine":
            return AffineSubspace(AffineSet(np.asarray(cfg["anchor"], float),
                                            np.asarray(cfg["basis"], float)))
        if kind == "simplex":
            return Simplex(int(cfg["dim"]))
        if kind == "whole_space":
            return WholeSpace(int(cfg["dim"]))
    except (KeyError, ValueError, TypeError) as e:
        raise ConfigError(f"bad {kind} set config: {e}") from None
    raise ConfigError(f"unknown set kind {kind!r}")


def build_operator(cfg):
    kind = cfg.get("kind")
    try:
        if kind == "affine":
            return affine_op(cfg["M"], cfg["b"], label=cfg.get("label", "affine"))
        if kind == "projection":
            return projection_operator(build_set(cfg["set"]))
        if kind == "rotation":
            return rotation_op(float(cfg["angle"]))
        if kind == "composition":
            ops = [build_operator(c) for c in cfg["ops"]]
            out = ops[-1]
            for op in reversed(ops[:-1]):
                out = compose(op, out)
            return out
        if kind == "convex_combination":
            return convex_combination([build_operator(c) for c in cfg["ops"]],
                                      np.asarray(cfg["weights"], float))
        if kind == "averaged":
            return averaged(build_operator(cfg["op"]), float(cfg["lam"]))
        if kind == "contraction_affine":
            alpha = float(cfg["alpha"])
            op = affine_op(cfg["M"], cfg["b"], label="contraction_affine")
            if op.lipschitz_bound > alpha + 1e-12:
                raise ConfigError(
                    f"contraction_affine: ||M|| = {op.lipschitz_bound:.6g} exceeds "
                    f"the declared modulus {alpha}")
            return op
    except ConfigError:
        raise
    except (KeyError, ValueError, TypeError) as e:
        raise ConfigError(f"bad {kind} operator config: {e}") from None
    raise ConfigError(f"unknown operator kind {kind!r}")


def build_schedule(cfg):
    try:
        params = {k: v for k, v in cfg.items() if k != "family"}
        return schedules.make_schedule(cfg["family"], **params)
    except (KeyError, ValueError, TypeError) as e:
        raise ConfigError(f"bad schedule config: {e}") from None


# --- the registered Meir-Keeler test function -------------------------------

def _mkc_psi(t):
    """1-D profile t - t^2 / (2(1+t)): concave, increasing, psi(t) < t for
    t > 0 with slope -> 1 at 0 (so not a strict contraction near 0)."""
    return t - t * t / (2.0 * (1.0 + t))


def _mkc_delta(eps):
    """Modulus witness: largest safe delta with 2*psi((eps+delta)/2) < eps,
    halved for sampling headroom.  2*psi(s/2) dominates the planar distortion
    of the radial map at separation s."""
    lo, hi = 0.0, max(4.0, 4.0 * eps)
    target = eps * (1.0 - 1e-9)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if 2.0 * _mkc_psi((eps + mid) / 2.0) < target:
            lo = mid
        else:
            hi = mid
    if lo <= 0.0:
        raise ConfigError(f"no usable Meir-Keeler modulus at eps={eps}")
    return 0.5 * lo


def mkc_radial(anchor):
    """Registered Meir-Keeler test map: anchor + g(x - anchor) with the
    radial profile g(v) = psi(||v||) v / ||v||."""
    anchor = as_vector(anchor)
    anchor.flags.writeable = False

    def fn(x):
        v = x - anchor
        r = math.sqrt(float(np.dot(v, v)))
        if r < 1e-300:
            return anchor.copy()
        return anchor + v * (_mkc_psi(r) / r)

    base = Operator(fn, anchor.size, lipschitz_bound=1.0,
                    is_firmly_nonexpansive=True, known_fix=(anchor,),
                    label="mkc_radial")
    return MeirKeelerSpec(base, modulus_witness=_mkc_delta)


def build_f(cfg, dim):
    kind = cfg.get("kind")
    try:
        if kind == "constant":
            return ContractionSpec(constant_op(as_vector(cfg["value"], dim=dim)),
                                   float(cfg.get("alpha", 0.5)))
        if kind == "contraction_affine":
            return ContractionSpec(build_operator(cfg), float(cfg["alpha"]))
        if kind == "mkc_radial":
            return mkc_radial(as_vector(cfg["anchor"], dim=dim))
    except ConfigError:
        raise
    except (KeyError, ValueError, TypeError) as e:
        raise ConfigError(f"bad anchor map config: {e}") from None
    raise ConfigError(f"unknown anchor map kind {kind!r}")


def build_family(cfg, analysis=None):
    kind = cfg.get("kind")
    fix_points = None
    if analysis and analysis.get("fix_points"):
        fix_points = tuple(as_vector(p) for p in analysis["fix_points"])
    try:
        if kind == "constant":
            return engine.constant_family(build_operator(cfg["operator"]),
                                          fix_points=fix_points)
        if kind == "mann":
            return engine.mann_family(build_operator(cfg["operator"]),
                                      build_schedule(cfg["beta"]),
                                      fix_points=fix_points)
        if kind == "cyclic":
            return engine.cyclic_family([build_operator(c) for c in cfg["operators"]],
                                        fix_points=fix_points)
        if kind == "resolvent":
            op = monotone.AffineMonotoneOp(cfg["op"]["M"], cfg["op"]["q"],
                                           cfg["op"].get("mu"))
            return engine.resolvent_family(op, build_schedule(cfg["r"]),
                                           fix_points=fix_points)
        if kind == "convex_combination":
            return engine.convex_combination_family(
                [build_operator(c) for c in cfg["operators"]],
                [build_schedule(c) for c in cfg["weights"]],
                bounds=tuple(cfg.get("bounds", (1e-6, 1.0))),
                fix_points=fix_points)
        if kind == "projected_gradient":
            op = monotone.AffineMonotoneOp(cfg["op"]["M"], cfg["op"]["q"],
                                           cfg["op"].get("mu"))
            return engine.projected_gradient_family(
                build_set(cfg["set"]), op, build_schedule(cfg["lam"]),
                lam_range=tuple(cfg["lam_range"]) if "lam_range" in cfg else None,
                fix_points=fix_points)
        if kind == "equilibrium":
            bif = monotone.QuadraticBifunction(cfg["bifunction"]["M"],
                                               cfg["bifunction"]["q"])
            return engine.equilibrium_family(
                bif, build_set(cfg["set"]), build_schedule(cfg["r"]),
                inner_tol=float(cfg.get("inner_tol", 1e-10)),
                r_floor=float(cfg.get("r_floor", 1e-6)),
                fix_points=fix_points)
        if kind == "nested_mann":
            return engine.nested_mann_family(
                [build_operator(c) for c in cfg["operators"]],
                [build_schedule(c) for c in cfg["betas"]],
                fix_points=fix_points)
        if kind == "retracted":
            return engine.retracted_family(build_set(cfg["set"]),
                                           build_operator(cfg["operator"]),
                                           fix_points=fix_points)
        if kind == "composition":
            fams = [build_family(c) for c in cfg["families"]]
            if len(fams) != 2:
                raise ConfigError("composition takes exactly two families")
            return engine.composition_family(fams[0], fams[1],
                                             fix_points=fix_points)
    except (ConfigError, engine.FamilyValidationError):
        raise
    except (KeyError, ValueError, TypeError) as e:
        raise ConfigError(f"bad {kind} family config: {e}") from None
    raise ConfigError(f"unknown family kind {kind!r}")


@dataclass
class Experiment:
    """A fully built run description."""

    name: str
    seed: int
    x0: np.ndarray
    f: object  # ContractionSpec | MeirKeelerSpec (as configured)
    f_effective: object  # composed with P for retracted families
    family: engine.OperatorFamily
    alpha: schedules.Schedule
    stop: engine.StopRule
    emit: dict
    analysis: dict
    config: dict
    sha: str = ""

    def vi_fix_set(self, rng=None, samples=None):
        """The fixed-point description used for limit-inequality checks:
        an AffineSet (exact) or a tuple of sampled/explicit points."""
        spec = self.analysis.get("vi_sample")
        n = samples or int(self.analysis.get("vi_samples", 1000))
        if spec is None:
            if self.family.fix_affine is not None:
                return self.family.fix_affine
            if self.family.fix_points:
                return self.family.fix_points
            raise ConfigError(f"{self.name}: no fixed-point description for checks")
        if isinstance(spec, dict) and "points" in spec:
            return tuple(as_vector(p) for p in spec["points"])
        if isinstance(spec, dict) and spec.get("kind") == "affine_exact":
            if self.family.fix_affine is None:
                raise ConfigError(f"{self.name}: family carries no affine fixed set")
            return self.family.fix_affine
        rng = rng or np.random.default_rng(self.seed + 7919)
        if isinstance(spec, dict) and spec.get("kind") == "segment":
            a = as_vector(spec["a"])
            b = as_vector(spec["b"], dim=a.size)
            return tuple(a + rng.uniform() * (b - a) for _ in range(n))
        cset = build_set(spec)
        return tuple(cset.sample(rng) for _ in range(n))


def build_experiment(cfg):
    """Validate a config dict and build every component of the run."""
    validate_config(cfg)
    x0 = as_vector(cfg["x0"])
    analysis = dict(cfg.get("analysis", {}))
    family = build_family(cfg["family"], analysis)
    if family.dim != x0.size:
        raise ConfigError(f"x0 has dimension {x0.size}, family needs {family.dim}")
    f = build_f(cfg["f"], x0.size)
    alpha = build_schedule(cfg["alpha"])

    stop_cfg = cfg.get("stop", {})
    stop = engine.StopRule(max_iters=int(stop_cfg.get("max_iters", 100000)),
                           residual=float(stop_cfg.get("residual", 1e-10)))

    # anchor weights must be usable: positive, <= 1 on the whole horizon
    probe = alpha.prefix(min(stop.max_iters, 100000)
                         if alpha.length is None else min(stop.max_iters, alpha.length))
    bad = np.where((probe <= 0.0) | (probe > 1.0))[0]
    if bad.size:
        raise ConfigError(
            f"alpha schedule emits {probe[bad[0]]:g} at n={int(bad[0])}, outside (0, 1]: "
            "violates the step-size range condition (i)")
    if alpha.length is not None and alpha.length < stop.max_iters:
        raise ConfigError("custom alpha list shorter than stop.max_iters")

    # nested-solver error budget: outer residual >= 10x inner tolerance
    if family.kind == "equilibrium":
        inner_tol = family.components["inner_tol"]
        if stop.residual < 10.0 * inner_tol:
            raise ConfigError(
                f"stop.residual = {stop.residual:g} must be at least 10x the "
                f"equilibrium inner tolerance {inner_tol:g}")

    f_eff = f
    if family.kind == "retracted":
        p_op = family.components["projection"]
        if isinstance(f, ContractionSpec):
            f_eff = ContractionSpec(compose(f.base, p_op), f.alpha)
        else:
            f_eff = MeirKeelerSpec(compose(f.base, p_op), f.modulus_witness)

    return Experiment(
        name=cfg.get("scenario", "unnamed"),
        seed=int(cfg.get("seed", 0)),
        x0=x0, f=f, f_effective=f_eff, family=family, alpha=alpha, stop=stop,
        emit=dict(cfg.get("emit", {"trace_csv": True, "every_k": 1})),
        analysis=analysis, config=cfg, sha=config_sha256(cfg))


def load_config(path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    return cfg
