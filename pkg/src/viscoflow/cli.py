"""Config-driven batch runner, schedule validator, and trace analyzer.

Subcommands: run, validate-schedule, analyze, list-scenarios.
Exit codes for `run`: 0 residual met, 1 bad config, 2 max-iteration stop,
3 diverged or inner-solver failure.  `validate-schedule` and `analyze`
return 4 on a violated condition.  VISCOFLOW_OUT overrides --out.
"""
from __future__ import annotations

import argparse
import concurrent.futures
import glob
import json
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import diagnostics, engine, schedules, trace_io
from .config import (ConfigError, build_experiment, build_schedule,
                     config_sha256, load_config)

RUN_EXIT = {"residual_met": 0, "max_iters": 2, "diverged": 3,
            "inner_solver_failure": 3}


def scenario_names():
    root = resources.files("viscoflow") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def scenario_path(name):
    p = resources.files("viscoflow") / "scenarios" / f"{name}.json"
    if not p.is_file():
        raise ConfigError(f"unknown bundled scenario {name!r}")
    return p


def resolve_config(path_or_name):
    """A filesystem path, or failing that a bundled scenario name."""
    p = Path(path_or_name)
    if p.is_file():
        return load_config(p)
    name = path_or_name[:-5] if path_or_name.endswith(".json") else path_or_name
    if name in scenario_names():
        with scenario_path(name).open() as fh:
            return json.load(fh)
    raise ConfigError(f"config file not found: {path_or_name}")


def _out_dir(args):
    out = os.environ.get("VISCOFLOW_OUT") or args.out
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _summarize(exp, trace):
    """Post-run report: limit-inequality check at the final iterate plus the
    coupled-step drift report."""
    rng = np.random.default_rng(exp.seed + 7919)
    fix = exp.vi_fix_set(rng=rng)
    tol = float(exp.analysis.get("vi_tol", 1e-6))
    ref = exp.family.reference
    report = diagnostics.check_vi_limit(trace.final, exp.f_effective, fix,
                                        tol=tol, t_op=ref)
    if exp.analysis.get("fix_points"):
        report.anchor_tail = diagnostics.check_anchor_tail(
            trace, exp.f_effective, exp.analysis["fix_points"][0])
    h1n = schedules.check_step_coupling_on_run(trace, exp.family,
                                               shift=exp.family.period)
    return {
        "scenario": exp.name,
        "seed": exp.seed,
        "config_sha256": exp.sha,
        "limit": [float(v) for v in trace.final],
        "stop_cause": trace.stop_cause,
        "iterations": int(trace.steps),
        "wall_time": trace.wall_time,
        "vi_report": report.to_json(),
        "h1n_report": h1n.to_json(),
    }


def run_one(cfg, out_dir, seed=None, max_iters=None):
    """Build, run, and write artifacts for one config.  Returns (code, summary)."""
    if seed is not None:
        cfg = {**cfg, "seed": int(seed)}
    if max_iters is not None:
        stop = dict(cfg.get("stop", {}))
        stop["max_iters"] = int(max_iters)
        cfg = {**cfg, "stop": stop}
    exp = build_experiment(cfg)
    trace = engine.run(exp.x0, exp.f_effective, exp.family, exp.alpha, exp.stop,
                       config_echo=cfg)
    summary = _summarize(exp, trace)
    stem = exp.name if exp.name != "unnamed" else "run"
    if exp.emit.get("trace_csv", True):
        alpha_full = exp.alpha.prefix(trace.steps + 1) \
            if (exp.alpha.length is None or exp.alpha.length > trace.steps) \
            else np.concatenate([trace.alpha_values, [np.nan]])
        trace_io.write_trace_csv(out_dir / f"{stem}_trace.csv", trace,
                                 alpha_full=alpha_full, config_sha=exp.sha,
                                 seed=exp.seed,
                                 every_k=int(exp.emit.get("every_k", 1)))
        summary["trace_csv"] = str(out_dir / f"{stem}_trace.csv")
    with open(out_dir / f"{stem}_summary.json", "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return RUN_EXIT[trace.stop_cause], summary


def cmd_run(args):
    out = _out_dir(args)
    if args.sweep:
        paths = sorted(glob.glob(args.sweep))
        if not paths:
            print(f"error: no configs match {args.sweep!r}", file=sys.stderr)
            return 1
        worst = 0
        with concurrent.futures.ProcessPoolExecutor() as pool:
            futs = {pool.submit(_sweep_worker, p, str(out), args.seed,
                                args.max_iters): p for p in paths}
            for fut in concurrent.futures.as_completed(futs):
                code, line = fut.result()
                print(line)
                worst = max(worst, code)
        return worst
    if not args.config:
        print("error: --config or --sweep is required", file=sys.stderr)
        return 1
    try:
        cfg = resolve_config(args.config)
        code, summary = run_one(cfg, out, seed=args.seed, max_iters=args.max_iters)
    except (ConfigError, engine.FamilyValidationError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(json.dumps(summary, sort_keys=True, indent=2))
    return code


def _sweep_worker(path, out, seed, max_iters):
    try:
        cfg = resolve_config(path)
        code, summary = run_one(cfg, Path(out), seed=seed, max_iters=max_iters)
        return code, (f"{path}: exit {code}, stop={summary['stop_cause']}, "
                      f"limit={summary['limit']}")
    except (ConfigError, engine.FamilyValidationError, ValueError) as e:
        return 1, f"{path}: error: {e}"


def cmd_validate_schedule(args):
    try:
        cfg = resolve_config(args.config)
        sched_cfg = cfg.get("schedule") or cfg.get("alpha")
        if sched_cfg is None:
            raise ConfigError("config carries no schedule")
        sched = build_schedule(sched_cfg)
        shift = int(cfg.get("shift", cfg.get("n_shift", 1)))
        prefix = int(cfg.get("prefix", 100000))
        if cfg.get("mode") in ("summable", "ratio_vanishes"):
            alpha = build_schedule(cfg["alpha"]) if cfg.get("mode") == "ratio_vanishes" \
                else None
            report = schedules.check_difference_condition(
                sched, alpha=alpha, shift=shift, prefix=prefix, mode=cfg["mode"])
        else:
            report = schedules.check_step_size_conditions(sched, shift=shift,
                                                          prefix=prefix)
    except (ConfigError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(json.dumps(report.to_json(), sort_keys=True, indent=2))
    return 0 if report.verdict in ("certified", "consistent") else 4


def cmd_analyze(args):
    try:
        cfg = resolve_config(args.config)
        exp = build_experiment(cfg)
        meta, cols = trace_io.read_trace_csv(args.trace)
    except (ConfigError, trace_io.TraceReadError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    if meta.get("config_sha256") != exp.sha:
        print("error: trace/config mismatch (config hash differs)", file=sys.stderr)
        return 1
    try:
        x_tilde = trace_io.final_point(cols)
        rng = np.random.default_rng(exp.seed + 7919)
        fix = exp.vi_fix_set(rng=rng)
        tol = float(exp.analysis.get("vi_tol", 1e-6))
        report = diagnostics.check_vi_limit(x_tilde, exp.f_effective, fix,
                                            tol=tol, t_op=exp.family.reference)
    except (ConfigError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(json.dumps(report.to_json(), sort_keys=True, indent=2))
    return 0 if report.passed else 4


def cmd_list_scenarios(args):
    for name in scenario_names():
        with scenario_path(name).open() as fh:
            desc = json.load(fh).get("description", "")
        print(f"{name}: {desc}")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="viscoflow",
        description="Anchored fixed-point iteration runner and diagnostics")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one config (or a sweep) and write "
                                       "trace CSV + summary JSON")
    p_run.add_argument("--config", help="config path or bundled scenario name")
    p_run.add_argument("--out", default="out", help="output directory")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--max-iters", type=int, default=None)
    p_run.add_argument("--sweep", help="glob of configs to run concurrently")
    p_run.set_defaults(func=cmd_run)

    p_val = sub.add_parser("validate-schedule",
                           help="check step-size / difference conditions")
    p_val.add_argument("--config", required=True)
    p_val.set_defaults(func=cmd_validate_schedule)

    p_ana = sub.add_parser("analyze", help="limit report for a stored trace")
    p_ana.add_argument("trace", help="trace CSV produced by run")
    p_ana.add_argument("--config", required=True)
    p_ana.set_defaults(func=cmd_analyze)

    p_ls = sub.add_parser("list-scenarios", help="list bundled scenarios")
    p_ls.set_defaults(func=cmd_list_scenarios)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
