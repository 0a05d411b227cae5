"""Command line entry point: ``pmelab <experiment> --config <file>``."""
from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .config import EXPERIMENTS, ConfigError, default_config, load_config
from .experiments import run_experiment
from .report import emit_report


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pmelab", description="Porous medium experiments on model manifolds.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", type=Path, help="TOML file; omitted keys take the experiment defaults")
    p.add_argument("--out", type=Path, help="output directory (overrides out_dir)")
    p.add_argument("--seed", type=int, help="unsigned 64-bit seed recorded in the manifest")
    p.add_argument("--cartan-hadamard", action="store_true", help="use the bound without the linear-in-time term")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.experiment) if args.config else default_config(args.experiment)
        updates = {}
        if args.out is not None:
            updates["out_dir"] = str(args.out)
        if args.seed is not None:
            updates["seed"] = args.seed
        if args.cartan_hadamard:
            updates["cartan_hadamard"] = True
        cfg = dataclasses.replace(cfg, **updates)
    except (ConfigError, OSError) as exc:
        print(f"pmelab: configuration error: {exc}", file=sys.stderr)
        return 2
    report = run_experiment(cfg)
    emit_report(report, cfg.out_dir)
    for name, v in sorted(report.verdicts.items()):
        state = {True: "PASS", False: "FAIL", None: "WITHHELD"}[v.passed]
        print(f"{state} {report.experiment}.{name} value={v.value} threshold={v.threshold} {v.note}".rstrip())
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
