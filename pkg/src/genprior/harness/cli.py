"""Command line entry point: ``genprior <subcommand> [--config PATH] [...]``.

Exit status is 0 when every trial succeeded, 2 when some trial rows carry
``status = error``, and 1 when the configuration (or output path) is unusable.
"""
from __future__ import annotations

import argparse
import sys

from .config import ConfigError, default_config, load_config
from .report import emit_report
from .runner import run_experiment

SUBCOMMANDS = {
    "wdc-sweep": "wdc_sweep",
    "recover": "recovery_sweep",
    "expansion-phase": "expansion_phase",
    "collision": "collision_demo",
    "net-demo": "net_demo",
    "rric": "rric_sweep",
    "landscape": "landscape",
}

HELP = {
    "wdc-sweep": "weight distribution deviation against layer width",
    "recover": "recovery error against measurements and noise",
    "expansion-phase": "WDC success over (k, expansion ratio)",
    "collision": "non-injective layers with 2k-1 rows",
    "net-demo": "aspherical net size and coverage",
    "rric": "range restricted isometry deviation against m",
    "landscape": "multi-start census of descent end points",
}


def _uint64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment config (defaults to a small built-in sweep)")
    common.add_argument("--seed", type=_uint64, help="override master_seed")
    common.add_argument("--out", default="-", help="report path, '-' for stdout")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--threads", type=_positive, default=1)
    common.add_argument("--trials", type=_positive, default=3, help="trial count for the built-in sweep")

    parser = argparse.ArgumentParser(prog="genprior", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=HELP[name])
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; usage errors are config errors here.
        return 0 if exc.code == 0 else 1
    kind = SUBCOMMANDS[args.command]
    try:
        if args.config:
            config = load_config(args.config)
            if config.kind != kind:
                raise ConfigError(f"config kind {config.kind!r} does not match subcommand {args.command!r}")
        else:
            config = default_config(kind, trial_count=args.trials)
        if args.seed is not None:
            config = config.with_seed(args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    rows = run_experiment(config, threads=args.threads)
    try:
        emit_report(rows, args.format, args.out)
    except OSError as exc:
        print(f"cannot write report: {exc}", file=sys.stderr)
        return 1
    failed = sum(row["status"] != "ok" for row in rows)
    if failed:
        print(f"{failed} of {len(rows)} trials failed", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
