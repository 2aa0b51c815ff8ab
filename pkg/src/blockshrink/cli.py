"""Command-line entry point: ``blockshrink run|validate|list-estimators|list-functions``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import config as cfgmod
from . import estimators as est
from . import runner
from .model import FUNCTION_NAMES
from .risk import ORACLE_ESTIMATORS

FUNCTION_HELP = {
    "zero": "f = 0",
    "constant": "f = value (default 1)",
    "ramp": "M (x - 1/2); its periodic extension jumps at 0",
    "alpha_cusp": "scaled |x - x0|^alpha, alpha <= 2",
    "smooth_bump": "C-infinity bump of width 0.25 (param width) at x0",
    "lacunary": "sum of 2^{-j alpha} cos(2 pi 2^j x + phase_j), alpha <= 1 (param terms)",
    "two_point_bumped": "plateau bump at x0 with n * ||f1 - f0||^2 = log B_n (params n, B_n, M_prime)",
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="blockshrink", description="Block-shrinkage risk experiments.")
    p.add_argument("-v", "--verbose", action="store_true", help="log estimator switches and progress")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config")
    run.add_argument("--seed", type=int, help="override the master seed")
    run.add_argument("--reps", type=int, help="override the replication count")
    run.add_argument("--out", help="override the output directory")
    run.add_argument("--threads", type=int, help="worker threads (does not change results)")
    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("config")
    sub.add_parser("list-estimators", help="show the available estimators")
    sub.add_parser("list-functions", help="show the test-function catalog")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "list-estimators":
        for name, text in est.ESTIMATORS.items():
            print(f"{name:16s} {text}")
        for name in ORACLE_ESTIMATORS:
            print(f"{name:16s} oracle baseline")
        return 0
    if args.command == "list-functions":
        for name in FUNCTION_NAMES:
            print(f"{name:18s} {FUNCTION_HELP[name]}")
        return 0
    if args.command == "validate":
        problems = cfgmod.validate(args.config)
        for line in problems:
            print(line, file=sys.stderr)
        if not problems:
            print(f"{args.config}: ok")
        return 1 if problems else 0
    try:
        cfg = cfgmod.load(args.config).with_overrides(args.seed, args.reps, args.out, args.threads)
    except cfgmod.ConfigError as exc:
        for line in exc.diagnostics:
            print(line, file=sys.stderr)
        return 2
    try:
        result = runner.run(cfg)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(runner.summary(result))
    print(f"wrote {result.csv_path} and {result.json_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
