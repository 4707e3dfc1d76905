"""viscoflow: anchored fixed-point iteration toolkit for nonexpansive
operator families on R^d.

Core pieces: exact convex projections and resolvents (`convex_sets`,
`monotone`), operator combinators with sampled regularity checks
(`operators`), step-size schedules with certified/heuristic condition reports
(`schedules`), the iteration driver and regularization-path oracle
(`engine`), limit diagnostics (`diagnostics`), and a config-driven CLI
(`cli`).
"""
from .hilbert import AffineSet, inner, norm, solve_affine_fixed_set
from .operators import (ContractionSpec, MeirKeelerSpec, Operator, averaged,
                        check_attracting, check_meir_keeler,
                        check_nonexpansive, compose, convex_combination)
from .convex_sets import (Ball, Box, Halfspace, Hyperplane, Simplex,
                          WholeSpace, projection_operator)
from .monotone import (AffineMonotoneOp, QuadraticBifunction,
                       check_inverse_strongly_monotone, equilibrium_resolvent,
                       forward_step, projected_gradient_map, resolvent)
from .schedules import (HypothesisReport, Schedule, check_difference_condition,
                        check_step_coupling_on_run, check_step_size_conditions,
                        make_schedule)
from .engine import (IterationTrace, OperatorFamily, StopRule, estimate_q_map,
                     make_family, run, run_viscosity_path)
from .diagnostics import (LimitReport, check_anchor_tail, check_vi_limit,
                          envelope_recursion, residual_series)

__version__ = "0.1.0"
