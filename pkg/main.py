"""Command-line entry point for the cutoff lab."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from loguru import logger

from config.constants import SUBCOMMANDS
from config.storage import load_experiment, resolve
from core.errors import ConfigInvalid, to_exit_code
from core.runner import resolve_output_dir, run
from logging_config import LOG_LEVEL, setup_json_logger

logger = logger.bind(module="cli")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cutoff-lab",
        description="Small-noise Levy SDE cutoff experiments in Wasserstein distance",
    )
    parser.add_argument("--log-level", default=None, help="override LOG_LEVEL")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, default=None, help="experiment YAML or JSON file")
        p.add_argument("--output-dir", default=None, help="override output_dir of the config")
        p.add_argument("--workers", type=int, default=None, help="worker threads")
        p.add_argument("--seed", type=int, default=None, help="override master_seed")
        if name == "wasserstein":
            p.add_argument("samples_a", type=Path)
            p.add_argument("samples_b", type=Path)
            p.add_argument("--p", type=float, default=None)
            p.add_argument("--method", choices=["auto", "exact_1d", "assignment", "sliced"], default=None)
            p.add_argument("--directions", type=int, default=None)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_json_logger(args.log_level or LOG_LEVEL)

    overrides: dict = {}
    if args.output_dir:
        overrides["output_dir"] = args.output_dir
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    try:
        cfg = load_experiment(args.config, overrides) if args.config else resolve(overrides)
    except ConfigInvalid as exc:
        for msg in exc.errors:
            print(f"config error: {msg}", file=sys.stderr)
        return to_exit_code(exc)
    except FileNotFoundError as exc:
        print(f"config file not found: {exc}", file=sys.stderr)
        return 2

    extra: dict = {}
    if args.subcommand == "wasserstein":
        extra = {"samples_a": args.samples_a, "samples_b": args.samples_b}
        for key in ("p", "method", "directions"):
            if getattr(args, key) is not None:
                extra[key] = getattr(args, key)
        if args.seed is not None:
            extra["seed"] = args.seed

    code = run(cfg, args.subcommand, extra=extra, workers=args.workers)
    if code == 0 and args.subcommand == "wasserstein":
        print((resolve_output_dir(cfg) / "wasserstein.json").read_text(encoding="utf-8"), end="")
    return code


if __name__ == "__main__":
    sys.exit(main())
