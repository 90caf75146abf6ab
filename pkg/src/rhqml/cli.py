"""Command-line experiment runner.

    rhqml run <experiment> [--dataset ... --seeds ... --rounds ... --out ...]
    rhqml run --config experiment.json
    rhqml verify
    rhqml partition-inspect <config>

Exit codes: 0 success, 1 failed checks/runtime error, 2 invalid config.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import numpy as np

from .config import KNOWN_EXPERIMENTS, ExperimentConfig, load_experiment_config
from .data import load_named_dataset, partition_clients
from .errors import ConfigurationError, DataError
from .experiments import run_experiment
from .seeding import derive_seed
from .verify import print_report, verify_suite


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rhqml")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a registry experiment")
    run.add_argument("experiment", nargs="?", choices=KNOWN_EXPERIMENTS)
    run.add_argument("--config", help="JSON experiment config (flags override it)")
    run.add_argument("--dataset")
    run.add_argument("--seeds", help="count ('5') or explicit list ('0,1,2')")
    run.add_argument("--rounds", type=int)
    run.add_argument("--clients", type=int)
    run.add_argument("--with-shadow", action="store_true")
    run.add_argument("--out")
    run.add_argument("--data-dir")

    sub.add_parser("verify", help="fast oracle self-checks")

    pi = sub.add_parser("partition-inspect", help="print client class histograms")
    pi.add_argument("config", help="JSON config with dataset/clients/seed")
    pi.add_argument("--mode", default="dirichlet", choices=["iid", "dirichlet"])
    return parser


def _parse_seeds(text: str) -> tuple[int, ...]:
    parts = [p for p in text.split(",") if p.strip()]
    if len(parts) == 1 and "," not in text:
        return tuple(range(int(parts[0])))
    return tuple(int(p) for p in parts)


def _config_from_args(args) -> ExperimentConfig:
    if args.config:
        cfg = load_experiment_config(args.config)
        if args.experiment and args.experiment != cfg.experiment:
            cfg = replace(cfg, experiment=args.experiment)
    elif args.experiment:
        cfg = ExperimentConfig(experiment=args.experiment)
    else:
        raise ConfigurationError("specify an experiment name or --config")
    overrides = {}
    if args.dataset:
        overrides["dataset"] = args.dataset
    if args.seeds:
        overrides["seeds"] = _parse_seeds(args.seeds)
    if args.rounds is not None:
        overrides["rounds"] = args.rounds
    if args.clients is not None:
        overrides["clients"] = args.clients
    if args.with_shadow:
        overrides["with_shadow"] = True
    if args.out:
        overrides["out_dir"] = args.out
    if args.data_dir:
        overrides["data_dir"] = args.data_dir
    return replace(cfg, **overrides) if overrides else cfg


def _cmd_run(args) -> int:
    try:
        cfg = _config_from_args(args)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        paths = run_experiment(cfg)
    except (ConfigurationError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for p in paths:
        print(f"wrote {p}")
    return 0


def _cmd_partition_inspect(args) -> int:
    try:
        cfg = load_experiment_config(args.config)
        name = cfg.dataset or "wine"
        ds = load_named_dataset(name, cfg.resolve_data_dir())
    except (ConfigurationError, DataError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    seed = cfg.seeds[0]
    partition = partition_clients(
        np.arange(ds.n_samples),
        ds.labels,
        cfg.clients,
        args.mode,
        seed=derive_seed(seed, "partition"),
        alpha=cfg.dirichlet_alpha,
    )
    hist = partition.class_histograms(ds.labels, ds.n_classes)
    print(f"{name}: {cfg.clients} clients, mode={args.mode}, seed={seed}")
    header = "client " + " ".join(f"class{c:>2d}" for c in range(ds.n_classes))
    print(header)
    for c, row in enumerate(hist):
        print(f"{c:>6d} " + " ".join(f"{v:>7d}" for v in row))
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "verify":
        return 0 if print_report(verify_suite()) else 1
    if args.command == "partition-inspect":
        return _cmd_partition_inspect(args)
    return 2


if __name__ == "__main__":
    sys.exit(main())
