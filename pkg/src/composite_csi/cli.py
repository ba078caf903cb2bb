"""Command line entry point: ``composite-csi run <config.toml> --out DIR``."""

import argparse
import logging
import os
import sys

import numpy as np

from .channel import QuadratureError
from .sim.config import ConfigError, load_config
from .sim.report import emit
from .sim.runner import run_experiment

log = logging.getLogger("composite_csi")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def build_parser():
    parser = argparse.ArgumentParser(prog="composite-csi", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment config")
    run.add_argument("config", help="TOML experiment file")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--trials", type=int, help="override n_trials")
    run.add_argument("--seed", type=int, help="override seed")
    run.add_argument("--workers", type=int, help="override worker process count")
    run.add_argument(
        "--format", nargs="+", choices=("csv", "plot_svg"), default=["csv", "plot_svg"],
        help="outputs to write (default: both)",
    )
    run.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config).with_overrides(
            n_trials=args.trials, seed=args.seed, workers=args.workers
        )
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    log.info("running %s: %d trials, seed %d, %d workers", cfg.scenario, cfg.n_trials, cfg.seed, cfg.workers)
    try:
        with np.errstate(over="raise"):
            rows = run_experiment(cfg)
    except (np.linalg.LinAlgError, QuadratureError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    try:
        os.makedirs(args.out, exist_ok=True)
        for fmt in args.format:
            for f in emit(rows, fmt, args.out):
                log.info("wrote %s", f)
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return 1
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
