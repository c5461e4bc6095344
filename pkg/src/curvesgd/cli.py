"""Command-line surface: run, sweep, verify, estimate-curvature, schedule.

Exit codes: 0 on success, 1 when a run aborts or a verify check fails,
2 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from .dataio import execute_runfile, build_objective, read_runfile
from .engine import EngineError
from .omega import fit_curvature
from .schedule import (
    C_of_t,
    M_of_t,
    c_bar,
    eta,
    exp_neg_M,
    parse_schedule,
)
from .verify import verify_all


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="curvesgd",
        description="Curvature-aware SGD runs, schedules, and invariant checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a single-schedule runfile")
    sweep_p = sub.add_parser(
        "sweep", help="execute a runfile over all its schedules, with a plot script"
    )
    for p in (run_p, sweep_p):
        p.add_argument("runfile", help="path to a runfile")
        p.add_argument("--seed", type=int, default=None,
                       help="replace the runfile's seed list with one seed")
        p.add_argument("--epochs", type=int, default=None,
                       help="override the runfile's epoch count")
        p.add_argument("--stride", type=int, default=None,
                       help="override the runfile's record stride")
        p.add_argument("--out", default=None,
                       help="override the runfile's output path")

    verify_p = sub.add_parser("verify", help="run the invariant check suite")
    verify_p.add_argument("--quick", action="store_true",
                          help="smaller sample sizes, same coverage")

    est_p = sub.add_parser(
        "estimate-curvature",
        help="fit the curvature exponent h of a runfile's objective",
    )
    est_p.add_argument("runfile", help="path to a runfile naming the objective")
    est_p.add_argument("--seed", type=int, default=0,
                       help="sampling seed for the fit")

    sched_p = sub.add_parser(
        "schedule", help="print eta/M/C/C_bar for a schedule string"
    )
    sched_p.add_argument(
        "text", help="e.g. paper-opt:h=1,beta=0.5,L=1,r=inf or const:0.01"
    )
    sched_p.add_argument("--t", default="0,1,10,100,1000",
                         help="comma-separated times to tabulate")
    return parser


def _load_config(args):
    config = read_runfile(args.runfile)
    overrides = {}
    if args.seed is not None:
        overrides["seeds"] = (args.seed,)
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if args.stride is not None:
        overrides["stride"] = args.stride
    if args.out is not None:
        overrides["out"] = args.out
    if overrides:
        config = dataclasses.replace(config, **overrides)
    return config


def _cmd_run(args) -> int:
    config = _load_config(args)
    if len(config.schedule_list()) != 1:
        print("error: run expects exactly one schedule; use sweep",
              file=sys.stderr)
        return 2
    # outputs land next to the runfile, not wherever the shell happens to be
    base_dir = os.path.dirname(os.path.abspath(args.runfile))
    written, _ = execute_runfile(config, base_dir=base_dir, emit_plot=False)
    for path in written:
        print(path)
    return 0


def _cmd_sweep(args) -> int:
    config = _load_config(args)
    base_dir = os.path.dirname(os.path.abspath(args.runfile))
    written, plot_path = execute_runfile(config, base_dir=base_dir,
                                         emit_plot=True)
    for path in written:
        print(path)
    if plot_path is not None:
        print(plot_path)
    return 0


def _cmd_verify(args) -> int:
    results = verify_all(quick=args.quick)
    failed = 0
    for res in results:
        status = "pass" if res.passed else "FAIL"
        print("[%s] %s: %s (%.2fs)" % (status, res.name, res.detail, res.seconds))
        if not res.passed:
            failed += 1
    if failed:
        print("%d of %d checks failed" % (failed, len(results)))
        return 1
    print("all %d checks passed" % len(results))
    return 0


def _cmd_estimate(args) -> int:
    config = read_runfile(args.runfile)
    objective, _ = build_objective(config)
    h = fit_curvature(objective, seed=args.seed)
    print("fitted h = %.4g" % h)
    return 0


def _cmd_schedule(args) -> int:
    spec = parse_schedule(args.text)
    try:
        times = [float(v) for v in args.t.split(",") if v.strip()]
    except ValueError:
        print("error: --t expects comma-separated numbers", file=sys.stderr)
        return 2
    if not times:
        print("error: --t expects at least one time", file=sys.stderr)
        return 2

    matched = spec.kind == "curvature_matched"
    if matched:
        print("t eta M exp_neg_M C C_bar")
    else:
        print("t eta")
    for t in times:
        t_eff = max(t, 1.0) if spec.kind == "power_law" else t
        step = eta(spec, t_eff)
        if matched:
            print("%.10g %.10g %.10g %.10g %.10g %.10g" % (
                t, step, M_of_t(spec, t), exp_neg_M(spec, t),
                C_of_t(spec, t), c_bar(spec, t),
            ))
        else:
            print("%.10g %.10g" % (t, step))
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "verify": _cmd_verify,
    "estimate-curvature": _cmd_estimate,
    "schedule": _cmd_schedule,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        if code is None:
            return 0
        return code if isinstance(code, int) else 2
    try:
        return _COMMANDS[args.command](args)
    except EngineError as err:
        print("error: %s" % err, file=sys.stderr)
        return 1
    except (ValueError, OverflowError, RuntimeError, OSError) as err:
        print("error: %s" % err, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
