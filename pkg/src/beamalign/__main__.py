"""Command line entry point: ``python -m beamalign <subcommand> [options]``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields

from . import harness
from .config import MODES, ExperimentConfig


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="beamalign", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for mode in MODES:
        p = sub.add_parser(mode)
        p.add_argument("-c", "--config", help="flat key = value config file")
        p.add_argument("-v", "--verbose", action="store_true")
        for f in fields(ExperimentConfig):
            if f.name == "mode":
                continue
            p.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, metavar="VALUE",
                           help=f"override config key {f.name}")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    overrides = {"mode": args.command}
    for f in fields(ExperimentConfig):
        raw = getattr(args, f.name, None)
        if f.name != "mode" and raw is not None:
            overrides[f.name] = ExperimentConfig.parse_value(f.name, raw)
    if args.config:
        return ExperimentConfig.load(args.config, **overrides)
    return ExperimentConfig(**overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        if cfg.mode == "train-map":
            out = harness.run_map_training(cfg)
        elif cfg.mode == "train-agent":
            out = harness.run_training(cfg)
        elif cfg.mode == "eval":
            out = harness.run_eval(cfg)
        elif cfg.mode == "baselines":
            out = harness.run_baselines(cfg)
        else:
            out = harness.run_export_patterns(cfg)
    except (ValueError, KeyError, FileNotFoundError, FloatingPointError, OSError) as exc:
        print(f"beamalign {args.command}: error: {exc}", file=sys.stderr)
        return 1
    for path in out if isinstance(out, list) else [out]:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
