#!/usr/bin/env python3
"""Dev calibration: run every bundled scenario and print the acceptance-
relevant quantities (limit error, regularity ratios, limit-inequality
violations at the final iterate and at the refined path limit, path/run
agreement, boundedness margin, fixed-point residual, timing)."""
import sys
import numpy as np

from viscoflow import diagnostics, engine
from viscoflow.cli import resolve_config, scenario_names
from viscoflow.config import build_experiment
from viscoflow.hilbert import norm
from viscoflow.operators import ContractionSpec


def main():
    names = sys.argv[1:] or scenario_names()
    for name in names:
        cfg = resolve_config(name)
        exp = build_experiment(cfg)
        tr = engine.run(exp.x0, exp.f_effective, exp.family, exp.alpha, exp.stop)
        expect = np.asarray(exp.analysis["expected_limit"])
        err = norm(tr.final - expect)
        print(f"== {name}: steps={tr.steps} cause={tr.stop_cause} "
              f"wall={tr.wall_time:.2f}s err={err:.2e}")

        n_shift = exp.family.period
        rs = diagnostics.residual_series(tr, n_shift)
        if tr.steps > 10000 + n_shift:
            print(f"   regularity: r({100})={rs[100]:.3e} r(1e4)={rs[10000]:.3e} "
                  f"ratio={rs[10000]/rs[100]:.3e} (need <=1e-2); "
                  f"r(1e4)/r(0)={rs[10000]/rs[0]:.2e} (need <=0.1)")

        rng = np.random.default_rng(exp.seed + 7919)
        fix = exp.vi_fix_set(rng=rng)
        rep_final = diagnostics.check_vi_limit(tr.final, exp.f_effective, fix,
                                               tol=1.0, t_op=exp.family.reference)
        print(f"   final-iterate: vi={rep_final.vi_max_violation:.3e} "
              f"dir={rep_final.direction_component} fixres={rep_final.fixres:.3e}")

        try:
            xq = engine.estimate_q_map(exp.f_effective, exp.family.reference,
                                       tol=1e-4, x_init=exp.x0)
            rep_ref = diagnostics.check_vi_limit(xq, exp.f_effective, fix, tol=1e-6)
            print(f"   refined: |run-qmap|={norm(tr.final - xq):.3e} (need <=1e-3); "
                  f"vi={rep_ref.vi_max_violation:.3e} (need <=1e-6) "
                  f"dir={rep_ref.direction_component}")
        except Exception as e:
            print(f"   refined: FAILED {type(e).__name__}: {e}")

        if exp.analysis.get("fix_points") and isinstance(exp.f_effective, ContractionSpec):
            f, al = exp.f_effective, exp.f_effective.alpha
            for p in exp.analysis["fix_points"]:
                p = np.asarray(p, float)
                bound = max(norm(exp.x0 - p), norm(f(p) - p) / (1 - al))
                dmax = float(np.sqrt(((tr.iterates - p) ** 2).sum(axis=1)).max())
                print(f"   bound @p={p}: max|x-p|={dmax:.4f} bound={bound:.4f} "
                      f"margin={bound - dmax:+.2e}")


if __name__ == "__main__":
    main()
