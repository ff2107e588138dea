"""Command line entry point: ``deloclab <experiment> [--config PATH] ...``.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import sys

from .config import EXPERIMENTS, ConfigError, ExperimentConfig, load_config
from .io import emit_results
from .runner import run_experiment

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="deloclab", description="Seeded Monte Carlo experiments")
    sub = p.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="flat key = value config file (schema = 1)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int)
        sp.add_argument("--out")
        sp.add_argument("--format", choices=("csv", "json"))
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    over = {"seed": args.seed, "workers": args.workers, "out": args.out, "format": args.format}
    try:
        if args.config:
            cfg = load_config(args.config, experiment=args.experiment, **over)
        else:
            cfg = ExperimentConfig(experiment=args.experiment).with_overrides(**over)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        manifest, rows = run_experiment(cfg)
        paths = emit_results(rows, manifest, cfg.out, cfg.format)
    except Exception as exc:
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    n_err = sum(r.status != "ok" for r in rows)
    print(f"{cfg.experiment}: {len(rows)} rows ({n_err} failed) -> {paths['rows']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
