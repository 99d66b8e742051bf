"""Command-line entry point for runs and parameter sweeps."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .config import ExperimentConfig, load_config
from .harness import run, sensitivity_sweep


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="flmarket",
        description="Multi-service FL client market: training runs and sweeps",
    )
    p.add_argument("--config", metavar="PATH", help="YAML experiment config")
    p.add_argument("--algo", choices=["mahdrl", "lcfa", "hqfa", "random"])
    p.add_argument("--episodes", type=int, metavar="INT")
    p.add_argument("--steps", type=int, metavar="INT")
    p.add_argument("--seed", type=int, action="append", metavar="INT",
                   help="repeatable; overrides the config seed list")
    p.add_argument("--oracle", choices=["surrogate", "external"])
    p.add_argument("--oracle-cmd", nargs="+", metavar="ARG",
                   help="command for the external oracle process")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--checkpoint", metavar="PATH",
                   help="path prefix for saved network checkpoints")
    p.add_argument("--sweep", choices=["budget", "cores"],
                   help="run a sensitivity sweep instead of a single run")
    p.add_argument("--sweep-values", metavar="V1,V2,...",
                   help="comma-separated sweep values")
    return p


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    updates = {}
    if args.algo:
        updates["algo"] = args.algo
    if args.episodes:
        updates["episodes"] = args.episodes
    if args.steps:
        updates["steps"] = args.steps
    if args.seed:
        updates["seeds"] = tuple(args.seed)
    if args.oracle:
        updates["oracle"] = args.oracle
    if args.oracle_cmd:
        updates["oracle_cmd"] = tuple(args.oracle_cmd)
    if args.out:
        updates["out_dir"] = args.out
    return replace(config, **updates) if updates else config


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
        if args.sweep:
            if not args.sweep_values:
                raise ValueError("--sweep requires --sweep-values")
            values = [float(v) for v in args.sweep_values.split(",")]
            rows = sensitivity_sweep(config, args.sweep, values)
            for row in rows:
                print(
                    f"{row['parameter']}={row['value']:g} service={row['service']} "
                    f"median_final_accuracy={row['median_final_accuracy']:.4f} "
                    f"median_slots_to_target={row['median_slots_to_target']:g}"
                )
        else:
            path = run(config, checkpoint=args.checkpoint)
            print(path)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
