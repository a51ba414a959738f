"""Command-line front end.

Exit codes: 0 run+verify pass, 2 verification fail, 3 solver abort,
4 config error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import bounds, runner
from .scenario import ConfigError, load_scenario

EXIT_OK = 0
EXIT_VERIFY_FAIL = 2
EXIT_SOLVER_ABORT = 3
EXIT_CONFIG_ERROR = 4

OUTPUT_ROOT_ENV = "PDEMAS_OUTPUT_ROOT"


def _outdir(args) -> Path:
    root = Path(os.environ.get(OUTPUT_ROOT_ENV, "."))
    return root / args.out


def _print_report(report: runner.VerificationReport):
    for check in report.checks:
        status = "PASS" if check.passed else "FAIL"
        print(
            f"theorem {check.theorem} [{check.index}] sigma={check.sigma:g}: "
            f"{status} worst margin {check.worst_margin:.6g} at t={check.worst_time:.4g}"
        )
    print("verification:", "PASS" if report.passed else "FAIL")


def cmd_run(args) -> int:
    config = load_scenario(args.config)
    try:
        result = runner.run(config, _outdir(args))
    except FloatingPointError as exc:
        print(f"solver abort: {exc}", file=sys.stderr)
        return EXIT_SOLVER_ABORT
    report = runner.verify(result)
    _print_report(report)
    print(f"run completed in {result.runtime_s:.2f}s, outputs in {_outdir(args)}")
    return EXIT_OK if report.passed else EXIT_VERIFY_FAIL


def cmd_verify(args) -> int:
    config = load_scenario(args.config)
    result = runner.load_run(args.rundir, config)
    report = runner.verify(result)
    _print_report(report)
    return EXIT_OK if report.passed else EXIT_VERIFY_FAIL


def cmd_sweep(args) -> int:
    config = load_scenario(args.config)
    try:
        entries = runner.sweep(config, _outdir(args))
    except FloatingPointError as exc:
        print(f"solver abort: {exc}", file=sys.stderr)
        return EXIT_SOLVER_ABORT
    all_pass = True
    for knobs, result, report in entries:
        tag = ", ".join(f"{k}={v:g}" for k, v in sorted(knobs.items()))
        status = "PASS" if report.passed else "FAIL"
        print(f"[{tag}] {status} ({result.runtime_s:.2f}s)")
        all_pass = all_pass and report.passed
    return EXIT_OK if all_pass else EXIT_VERIFY_FAIL


def cmd_converge(args) -> int:
    config = load_scenario(args.config)
    study = runner.convergence_study(config, args.levels, args.problem)
    print(json.dumps(study, indent=2))
    return EXIT_OK


def cmd_constants(args) -> int:
    config = load_scenario(args.config)
    dump = {
        str(sigma): runner._constants_dump(config.plant, sigma)
        for sigma in config.sigmas
    }
    dump["det_diagnostic"] = bounds.resolvent_determinant(config.plant)
    print(json.dumps(dump, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdemas",
        description=(
            "Simulate a disturbed parabolic-PDE multi-agent loop and audit "
            "its robustness bounds."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one scenario and verify bounds")
    p.add_argument("config")
    p.add_argument("--out", default="rundir")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="re-verify a finished run directory")
    p.add_argument("rundir")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="run every amplitude-knob combination")
    p.add_argument("config")
    p.add_argument("--out", default="sweepdir")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("converge", help="grid/time refinement study")
    p.add_argument("config")
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--problem", choices=("eigenmode", "bench"), default="eigenmode")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("constants", help="dump all bound constants")
    p.add_argument("config")
    p.set_defaults(func=cmd_constants)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
