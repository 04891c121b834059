"""Command-line entry point: ``dsmd-experiment`` / ``python -m dsmd``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .harness import ConfigError, ExperimentConfig, run_experiment

# flag -> config field
FLAGS = {
    "algorithm": "algorithm",
    "constraint": "constraint",
    "nodes": "m",
    "dim": "d",
    "sigma": "sigma",
    "iters": "T",
    "realizations": "realizations",
    "seed": "master_seed",
    "activation": "activation",
    "window_B": "B",
    "output": "output",
    "checkpoints": "checkpoints",
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dsmd-experiment",
        description="Monte Carlo runs of distributed stochastic mirror descent on a time-varying network.",
    )
    p.add_argument("--config", help="YAML config file; flags below override its values")
    p.add_argument("--algorithm", choices=["dsmd", "epoch-dsmd", "dsps"])
    p.add_argument("--constraint", choices=["simplex", "box"])
    p.add_argument("--nodes", type=int, help="number of nodes m")
    p.add_argument("--dim", type=int, help="dimension d")
    p.add_argument("--sigma", type=float, help="noise standard deviation")
    p.add_argument("--iters", type=int, help="total rounds T")
    p.add_argument("--realizations", type=int)
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--activation", type=float, help="fraction of links active per round")
    p.add_argument("--window-B", type=int, help="connectivity window B")
    p.add_argument("--output", help="output path prefix for .csv and .json")
    p.add_argument("--checkpoints", type=lambda s: [int(x) for x in s.split(",") if x],
                   help="comma-separated rounds to record (default: powers of two)")
    p.add_argument("--geometry", choices=["auto", "euclidean", "entropy"])
    p.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    p.add_argument("--dump-config", action="store_true", help="print the resolved config and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    for flag, name in FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            setattr(cfg, name, value)
    if args.geometry is not None:
        cfg.geometry = args.geometry
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        cfg = resolve_config(args).validate()
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    if args.dump_config:
        import yaml

        print(yaml.safe_dump(cfg.to_dict(), sort_keys=False), end="")
        return 0
    result = run_experiment(cfg, workers=args.workers)
    s = result.summary
    print(f"{cfg.algorithm} on {cfg.constraint}: m={cfg.m} d={cfg.d} sigma={cfg.sigma} "
          f"T={cfg.T} realizations={cfg.realizations} ({s['runtime_seconds']:.1f}s)")
    print(f"{'t':>7} {'mean error':>12} {'stderr':>10} {'bound':>10}")
    for row in s["checkpoints"]:
        bound = "-" if row["theorem_bound"] is None else f"{row['theorem_bound']:.3e}"
        print(f"{row['t']:>7} {row['mean']:12.4e} {row['stderr']:10.2e} {bound:>10}")
    if s["fit"]:
        print("fit:", json.dumps({k: s["fit"][k] for k in ("model", "coefficients", "r_squared")}))
    if cfg.output:
        print(f"wrote {cfg.output}.csv and {cfg.output}.json")
    return 0


if __name__ == "__main__":
    sys.exit(main())
