"""Command-line entry point: ``higgslab <experiment> --config FILE [--out DIR]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Sequence

from .config import KINDS, ConfigError, load_config

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="experiment configuration (YAML or JSON)")
    common.add_argument("--out", help="output directory (overrides the config)")
    common.add_argument("--grid", type=int, help="nodes per axis (overrides the config)")
    common.add_argument("--tol", type=float, help="Newton residual tolerance")
    common.add_argument("--seed", type=int, help="seed for randomized scans")
    common.add_argument("-v", "--verbose", action="store_true", help="log Newton iterations")
    parser = argparse.ArgumentParser(prog="higgslab", description="Hitchin-equation experiments on coordinate charts.")
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        sub.add_parser(kind, parents=[common], help=f"run a {kind} experiment")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if cfg.kind != args.command:
            raise ConfigError(f"config describes a '{cfg.kind}' experiment, not '{args.command}'", "kind",
                              source=args.config)
        cfg = cfg.with_overrides(grid=args.grid, tol=args.tol, seed=args.seed, out=args.out)
        if cfg.out is None:
            raise ConfigError("no output directory: pass --out or set 'out'", "out", source=args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    from .experiments import run

    status, summary = run(cfg)
    brief = {k: summary[k] for k in ("kind", "status", "wall_time_s", "error") if k in summary}
    print(json.dumps(brief))
    if status:
        print(f"error: {summary.get('error', 'experiment failed')}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
