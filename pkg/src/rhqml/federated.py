"""Federated simulation: FedAvg, an optional Gaussian-noise DP baseline,
a local-only baseline, and exact communication accounting.

One round: broadcast the global flat parameters, train every client locally
for ``local_epochs``, optionally clip+noise the client deltas, aggregate by
sample-weighted averaging, evaluate the global model on the union of the
clients' held-out shards. All clients participate every round; client RNG
streams derive from (seed, round, client), so results are independent of
client execution order.

Wire accounting is normative, not measured: every round moves the full
parameter vector down and up per client at 8 bytes per value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import ClientPartition, Dataset, Preprocessor, partition_clients, split_train_test
from .errors import UsageError
from .models import ArchitectureSpec, HybridModel, build, clone_model, flatten_params, unflatten_params
from .seeding import derive_seed, make_rng
from .training import TrainConfig, eval_accuracy, local_train, train_centralized

BYTES_PER_PARAM = 8


@dataclass(frozen=True)
class DPConfig:
    epsilon: float
    delta: float = 1e-5
    clip_norm: float = 1.0

    def __post_init__(self):
        if self.epsilon <= 0 or not 0 < self.delta < 1 or self.clip_norm <= 0:
            raise ValueError("need epsilon > 0, 0 < delta < 1, clip_norm > 0")

    @property
    def noise_sigma(self) -> float:
        """Per-round Gaussian mechanism scale (no composition accounting)."""
        return self.clip_norm * math.sqrt(2.0 * math.log(1.25 / self.delta)) / self.epsilon


@dataclass
class FedConfig:
    n_clients: int = 5
    rounds: int = 50
    local_epochs: int = 5
    partition_mode: str = "iid"  # "iid" | "dirichlet"
    dirichlet_alpha: float = 0.5
    test_fraction: float = 0.2
    dp: DPConfig | None = None
    seed: int = 0


@dataclass
class CommLedger:
    n_params: int
    n_clients: int
    rounds_logged: int = 0

    @property
    def bytes_per_round(self) -> int:
        # full model down + up for every client
        return self.n_params * BYTES_PER_PARAM * 2 * self.n_clients

    def cumulative_bytes(self, round_idx: int) -> int:
        return self.bytes_per_round * (round_idx + 1)

    def cumulative_mb(self, round_idx: int) -> float:
        return self.cumulative_bytes(round_idx) / 2**20

    @property
    def total_mb(self) -> float:
        return self.cumulative_mb(self.rounds_logged - 1) if self.rounds_logged else 0.0


@dataclass
class RoundRecord:
    round_idx: int
    accuracy: float
    cumulative_mb: float


@dataclass
class FedResult:
    model: HybridModel
    rounds: list[RoundRecord]
    ledger: CommLedger
    partition: ClientPartition
    client_train: list[np.ndarray]
    client_test: list[np.ndarray]

    @property
    def final_accuracy(self) -> float:
        return self.rounds[-1].accuracy

    def rounds_to_reach(self, fraction: float = 0.9) -> int:
        """1-based round count to reach ``fraction`` of the peak accuracy."""
        peak = max(r.accuracy for r in self.rounds)
        for r in self.rounds:
            if r.accuracy >= fraction * peak:
                return r.round_idx + 1
        return len(self.rounds)


def fedavg_aggregate(updates: list[tuple[np.ndarray, int]]) -> np.ndarray:
    """Sample-weighted mean of client vectors, summed in client order."""
    if not updates:
        raise UsageError("no client updates to aggregate")
    length = updates[0][0].shape[0]
    total = sum(n for _, n in updates)
    if total < 1:
        raise UsageError("aggregate weights must be positive")
    out = np.zeros(length)
    for vec, n in updates:
        if vec.shape[0] != length:
            raise UsageError("client update length mismatch")
        out += (n / total) * vec
    return out


def dp_sanitize(delta: np.ndarray, dp: DPConfig, rng: np.random.Generator) -> np.ndarray:
    """Clip the update to L2 <= clip_norm, then add isotropic Gaussian noise."""
    norm = float(np.linalg.norm(delta))
    if norm > dp.clip_norm:
        delta = delta * (dp.clip_norm / norm)
    return delta + rng.normal(0.0, dp.noise_sigma, size=delta.shape)


def split_clients(
    partition: ClientPartition, labels: np.ndarray, test_fraction: float, seed: int
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Per-client local train/test splits (the federated 80/20 protocol)."""
    train, test = [], []
    for c, idx in enumerate(partition.client_indices):
        tr, te = split_train_test(idx, labels, test_fraction, seed=derive_seed(seed, "holdout", c))
        train.append(tr)
        test.append(te)
    return train, test


def run_federated(
    arch: ArchitectureSpec,
    dataset: Dataset,
    fed: FedConfig,
    train_cfg: TrainConfig,
) -> FedResult:
    """Full FedAvg simulation on one dataset; deterministic in (configs, seeds)."""
    labels = dataset.labels
    partition = partition_clients(
        np.arange(dataset.n_samples),
        labels,
        fed.n_clients,
        fed.partition_mode,
        seed=derive_seed(fed.seed, "partition"),
        alpha=fed.dirichlet_alpha,
    )
    client_train, client_test = split_clients(partition, labels, fed.test_fraction, fed.seed)
    all_train = np.sort(np.concatenate(client_train))
    all_test = np.sort(np.concatenate(client_test))
    pre = Preprocessor.fit(dataset.features[all_train], dataset.pca_dim)
    feats = pre.transform(dataset.features)
    x_test, y_test = feats[all_test], labels[all_test]

    model = build(arch, make_rng(fed.seed, "init"))
    params = flatten_params(model)
    ledger = CommLedger(params.shape[0], fed.n_clients)
    records: list[RoundRecord] = []

    for round_idx in range(fed.rounds):
        updates: list[tuple[np.ndarray, int]] = []
        for c in range(fed.n_clients):
            client_model = clone_model(model)
            unflatten_params(client_model, params)
            rng = make_rng(fed.seed, "client", round_idx, c)
            w = local_train(
                client_model,
                feats[client_train[c]],
                labels[client_train[c]],
                fed.local_epochs,
                train_cfg,
                rng,
            )
            n_c = client_train[c].shape[0]
            if fed.dp is not None:
                noisy = dp_sanitize(w - params, fed.dp, make_rng(fed.seed, "dp", round_idx, c))
                updates.append((noisy, n_c))
            else:
                updates.append((w, n_c))
        if fed.dp is not None:
            params = params + fedavg_aggregate(updates)
        else:
            params = fedavg_aggregate(updates)
        unflatten_params(model, params)
        ledger.rounds_logged = round_idx + 1
        records.append(
            RoundRecord(round_idx, eval_accuracy(model, x_test, y_test), ledger.cumulative_mb(round_idx))
        )
    return FedResult(model, records, ledger, partition, client_train, client_test)


@dataclass
class LocalOnlyResult:
    client_id: int
    n_train: int
    local_accuracy: float
    global_accuracy: float


def local_only_baseline(
    arch: ArchitectureSpec,
    dataset: Dataset,
    fed: FedConfig,
    train_cfg: TrainConfig,
) -> list[LocalOnlyResult]:
    """Every client trains alone on its own shard; no aggregation at all."""
    labels = dataset.labels
    partition = partition_clients(
        np.arange(dataset.n_samples),
        labels,
        fed.n_clients,
        fed.partition_mode,
        seed=derive_seed(fed.seed, "partition"),
        alpha=fed.dirichlet_alpha,
    )
    client_train, client_test = split_clients(partition, labels, fed.test_fraction, fed.seed)
    all_train = np.sort(np.concatenate(client_train))
    all_test = np.sort(np.concatenate(client_test))
    pre = Preprocessor.fit(dataset.features[all_train], dataset.pca_dim)
    feats = pre.transform(dataset.features)

    results = []
    for c in range(fed.n_clients):
        model = build(arch, make_rng(fed.seed, "local-init", c))
        model, _ = train_centralized(
            model,
            feats[client_train[c]],
            labels[client_train[c]],
            train_cfg,
            rng=make_rng(fed.seed, "local-train", c),
        )
        local_acc = (
            eval_accuracy(model, feats[client_test[c]], labels[client_test[c]])
            if client_test[c].size
            else float("nan")
        )
        global_acc = eval_accuracy(model, feats[all_test], labels[all_test])
        results.append(LocalOnlyResult(c, client_train[c].shape[0], local_acc, global_acc))
    return results
