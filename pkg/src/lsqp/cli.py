"""Command line: ``lsqp bench|solve|scan|list``.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import lsqp as lsqp_engine
from . import sqp as sqp_engine
from ._accel import USE_NUMBA
from .benchmarks import NAMES, get_case
from .gp import gp_compatibility_scan
from .harness import (ExperimentConfig, GUESS_DELTA, Outcome, curve_csv, initial_guess,
                      records_to_csv, run_experiment)
from .problem import MissingConstants, load_description
from .report import render

OUT_ENV = "LSQP_OUT_DIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _common(p):
    p.add_argument("--problem", required=True, choices=NAMES)
    p.add_argument("--max-iter", type=_positive_int, default=500)
    p.add_argument("--eps-gl", type=_positive_float, default=None, help="gradient-of-Lagrangian tolerance")
    p.add_argument("--eps-dx", type=_positive_float, default=None, help="step-size tolerance")
    p.add_argument("--enforce-positivity", action="store_true",
                   help="cap line-search steps so f, g, h stay positive")
    p.add_argument("--constants", default=None,
                   help="JSON problem description with a 'constants' table")


def build_parser():
    parser = _Parser(prog="lsqp", description="SQP and logspace SQP benchmark runner")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("bench", help="Monte Carlo comparison on one benchmark")
    _common(b)
    b.add_argument("--algo", choices=("sqp", "lsqp", "both"), default="both")
    b.add_argument("--guess", choices=tuple(GUESS_DELTA), default="good")
    b.add_argument("--trials", type=_positive_int, default=100)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--workers", type=_positive_int, default=1)
    b.add_argument("--positive-starts", action=argparse.BooleanOptionalAction, default=None,
                   help="redraw starts where some f, g, h <= 0 (default: per benchmark)")
    b.add_argument("--format", choices=("md", "csv", "json"), default="md")
    b.add_argument("--out", default=None, help=f"artifact directory (default ${OUT_ENV} or ./lsqp_out)")

    s = sub.add_parser("solve", help="one solve with an iterate trace")
    _common(s)
    s.add_argument("--algo", choices=("sqp", "lsqp"), default="lsqp")
    s.add_argument("--x0", default=None, help="comma-separated start (default: a seeded good guess)")
    s.add_argument("--seed", type=int, default=0)

    c = sub.add_parser("scan", help="GP-compatibility report")
    c.add_argument("--problem", required=True, choices=NAMES)
    c.add_argument("--threshold", type=float, default=0.5)
    c.add_argument("--format", choices=("md", "json"), default="md")
    c.add_argument("--constants", default=None)

    sub.add_parser("list", help="list benchmarks")
    return parser


def _constants(args):
    if not getattr(args, "constants", None):
        return None
    try:
        return load_description(args.constants)["constants"] or None
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read --constants: {exc}") from exc


def _print_config(pairs):
    print("# configuration")
    for k, v in pairs:
        print(f"#   {k}: {v}")
    print()


def cmd_bench(args):
    algorithms = ("sqp", "lsqp") if args.algo == "both" else (args.algo,)
    config = ExperimentConfig(
        benchmark=args.problem, algorithms=algorithms, trials_per_cell=args.trials,
        guess_quality=args.guess, rng_seed=args.seed, max_iter=args.max_iter,
        worker_count=args.workers, eps_grad_lagrangian=args.eps_gl, eps_step=args.eps_dx,
        enforce_positivity=args.enforce_positivity, positive_starts=args.positive_starts,
        constants=_constants(args))
    case = get_case(args.problem, constants=config.constants)
    opts = config.solver_options(case, algorithms[0])
    out_dir = Path(args.out or os.environ.get(OUT_ENV) or "lsqp_out")
    positive = case.positive_starts if args.positive_starts is None else args.positive_starts
    _print_config([
        ("problem", args.problem), ("algorithms", ",".join(algorithms)), ("guess", args.guess),
        ("trials", args.trials), ("seed", args.seed), ("max_iter", opts.max_iter),
        ("eps_grad_lagrangian", opts.eps_grad_lagrangian), ("eps_step", opts.eps_step),
        ("enforce_positivity", args.enforce_positivity), ("positive_starts", positive),
        ("trust_fractions", list(opts.trust_fractions) or "none"), ("workers", args.workers),
        ("numba", USE_NUMBA), ("out", out_dir)])
    summary, records = run_experiment(config, return_records=True)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{args.problem}_{args.guess}_s{args.seed}"
    with open(out_dir / f"{stem}_trials.csv", "w", newline="") as fh:
        records_to_csv(records, summary.variable_names, fh)
    (out_dir / f"{stem}_summary.json").write_text(summary.to_json(indent=2) + "\n")
    (out_dir / f"{stem}_curve.csv").write_text(curve_csv(summary))
    sys.stdout.write(render(summary, args.format))
    errors = sum(r.outcome is Outcome.ERROR for r in records)
    if errors:
        print(f"error: {errors} trial(s) aborted with an exception", file=sys.stderr)
        return 2
    return 0


def _parse_x0(text, n):
    try:
        x0 = np.array([float(t) for t in text.split(",")])
    except ValueError as exc:
        raise UsageError(f"--x0: {exc}") from exc
    if x0.size != n:
        raise UsageError(f"--x0 needs {n} values, got {x0.size}")
    return x0


def cmd_solve(args):
    case = get_case(args.problem, constants=_constants(args))
    opts = case.options_for(args.algo).merged(
        max_iter=args.max_iter, eps_grad_lagrangian=args.eps_gl, eps_step=args.eps_dx,
        enforce_positivity_in_linesearch=args.enforce_positivity)
    if args.x0:
        x0 = _parse_x0(args.x0, case.problem.n_vars)
        if np.any(x0 < case.problem.lower_bounds):
            raise UsageError("--x0 is below the variable floors")
    else:
        x0 = initial_guess(case, "good", args.seed, 0)
    _print_config([("problem", args.problem), ("algorithm", args.algo),
                   ("x0", ",".join(f"{v:.6g}" for v in x0)), ("max_iter", opts.max_iter),
                   ("eps_grad_lagrangian", opts.eps_grad_lagrangian), ("eps_step", opts.eps_step),
                   ("enforce_positivity", opts.enforce_positivity_in_linesearch),
                   ("trust_fractions", list(opts.trust_fractions) or "none")])
    engine = sqp_engine.solve if args.algo == "sqp" else lsqp_engine.solve
    res = engine(case.problem, x0, opts)
    print(f"{'k':>4} {'f':>14} {'merit':>14} {'|step|':>10} {'violation':>10}")
    for k, rec in enumerate(res.trace):
        print(f"{k:4d} {rec.f:14.7g} {rec.merit:14.7g} {rec.step_norm:10.3e} {rec.violation:10.3e}")
    print()
    print(f"termination: {res.termination.value} after {res.iterations} iterations")
    if res.message:
        print(f"message: {res.message}")
    print(f"f_final: {res.f_final:.10g}")
    for name, v in zip(case.problem.variable_names, res.x_final):
        print(f"  {name} = {v:.8g}")
    if not res.converged:
        print(f"error: solve failed with {res.termination.value}", file=sys.stderr)
        return 2
    return 0


def cmd_scan(args):
    case = get_case(args.problem, constants=_constants(args))
    report = gp_compatibility_scan(case.problem, threshold=args.threshold)
    _print_config([("problem", args.problem), ("threshold", args.threshold)])
    if args.format == "json":
        print(report.to_json(indent=2))
        return 0
    print(f"objective: {report.objective_kind}")
    for kind, count in report.counts.items():
        print(f"{kind:>11}: {count}")
    print(f"GP-compatible: {report.n_compatible}/{report.n_constraints} "
          f"({100 * report.fraction:.1f}%) of objective + constraints")
    cons = report.constraint_counts
    print(f"constraints: {cons['monomial']} monomial, {cons['posynomial']} posynomial, "
          f"{cons['signomial']} signomial, {cons['opaque']} opaque")
    verdict = "consider LSQP" if report.recommend_lsqp else "prefer SQP"
    print(f"recommendation: {verdict} (advisory)")
    return 0


def cmd_list(args):
    print(f"{'name':<17} {'vars':>4} {'ineq':>4} {'eq':>3} {'f*':>12}")
    for name in NAMES:
        case = get_case(name)
        p = case.problem
        print(f"{name:<17} {p.n_vars:>4} {p.n_ineq:>4} {p.n_eq:>3} "
              f"{case.known_optimum.objective_value:>12.6g}")
    return 0


COMMANDS = {"bench": cmd_bench, "solve": cmd_solve, "scan": cmd_scan, "list": cmd_list}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, MissingConstants) as exc:
        print(f"lsqp: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"lsqp: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
