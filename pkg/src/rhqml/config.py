"""Experiment configuration: JSON file + CLI overrides.

The data directory resolves in this order: explicit --data-dir / config
value, the RHQML_DATA_DIR environment variable, then ./data.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigurationError

KNOWN_EXPERIMENTS = (
    "table1",
    "table2",
    "table3",
    "table4",
    "table5",
    "table6",
    "ablation",
)


@dataclass
class ExperimentConfig:
    experiment: str
    dataset: str | None = None  # None = every dataset the experiment covers
    seeds: tuple[int, ...] = (0, 1, 2)
    rounds: int = 50
    clients: int = 5
    local_epochs: int = 5
    dirichlet_alpha: float = 0.5
    dp_epsilons: tuple[float, ...] = (1.0, 2.0, 4.0)
    dp_clip_norm: float = 1.0
    mia_rounds: int = 30  # federated rounds for privacy-context models
    n_shadows: int = 8
    with_shadow: bool = False  # shadow attack for table5 cells (slow on circuits)
    inversion_samples: int = 10
    inversion_iters: int = 300
    out_dir: str = "runs"
    data_dir: str | None = None

    def __post_init__(self):
        if self.experiment not in KNOWN_EXPERIMENTS:
            raise ConfigurationError(
                f"unknown experiment '{self.experiment}'; pick one of {KNOWN_EXPERIMENTS}"
            )
        if not self.seeds:
            raise ConfigurationError("seeds must be non-empty")

    def resolve_data_dir(self) -> Path:
        if self.data_dir:
            return Path(self.data_dir)
        env = os.environ.get("RHQML_DATA_DIR")
        return Path(env) if env else Path("data")


def load_experiment_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: line {exc.lineno}, col {exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path}: top level must be an object")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigurationError(f"{path}: unknown keys {sorted(unknown)}")
    if "seeds" in raw:
        raw["seeds"] = tuple(raw["seeds"])
    if "dp_epsilons" in raw:
        raw["dp_epsilons"] = tuple(raw["dp_epsilons"])
    try:
        return ExperimentConfig(**raw)
    except TypeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
