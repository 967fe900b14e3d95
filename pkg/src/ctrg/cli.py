"""``bench run``: run a benchmark sweep and write CSV.

Exit codes: 0 on success, 1 on a usage or configuration error, 2 when a
numeric failure (non-convergence, non-finite values, capacity) stops the run.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .bench import ConfigError, RunConfig, load_config, parse_overrides, run_to_csv
from .errors import CapacityError, NumericError

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bench", description="CTRG / TRG benchmark sweeps")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = sub.add_parser("run", help="run a sweep and write CSV")
    run.add_argument("--config", help="key = value config file")
    run.add_argument("--method", choices=("ctrg", "trg"))
    run.add_argument("--mode", choices=("torus", "strip", "thermo-limit"))
    run.add_argument("--chi", help="comma list of bond dimensions; 'exact' for no truncation")
    run.add_argument("--temps", help="comma list of temperatures (units of T_c by default)")
    run.add_argument("--temps-unit", choices=("tc", "absolute"))
    run.add_argument("--size", help="torus L, strip width, or thermo-limit size cap")
    run.add_argument("--boundary", choices=("open", "periodic"))
    run.add_argument("--reference-chi", help="bond dimension of the strip reference run")
    run.add_argument("--tolerance", help="thermo-limit convergence tolerance")
    run.add_argument("--out", help="CSV path (default: stdout)")
    run.add_argument("--deterministic", action="store_true", help="single-threaded BLAS")
    run.add_argument("--reps", help="timing repetitions per cell (median reported)")
    run.add_argument("--no-u", action="store_true", help="skip the internal energy")
    return parser


def _config_from_args(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    raw = {
        key: getattr(args, key)
        for key in ("method", "mode", "chi", "temps", "temps_unit", "size", "boundary",
                    "reference_chi", "tolerance", "out", "reps")
        if getattr(args, key) is not None
    }
    values = parse_overrides(raw)
    if args.deterministic:
        values["deterministic"] = True
    if args.no_u:
        values["with_u"] = False
    return replace(config, **values)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="bench: %(levelname)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        config = _config_from_args(args)
    except (UsageError, ConfigError, OSError) as exc:
        print(f"bench: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        _, text = run_to_csv(config)
    except (NumericError, CapacityError, FloatingPointError, MemoryError) as exc:
        print(f"bench: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if config.out:
        with open(config.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
