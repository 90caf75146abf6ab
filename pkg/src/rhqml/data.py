"""Dataset ingestion, preprocessing, CV splits, and client partitioning.

Datasets come in as CSV plus a JSON config naming the label column, class
mapping, optional subset size, and optional PCA target dimension (see the
files under ``data/``). Loading returns raw features; per-fold preparation
fits PCA and the [0,1] scaler on the training portion only and transforms
the rest with those statistics (test values are clamped back into [0,1]).

Everything downstream of a seed is deterministic: splits, subsets, and
partitions are pure functions of (inputs, seed).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DataError
from .seeding import make_rng


@dataclass(frozen=True)
class DatasetConfig:
    name: str
    csv: str
    header: bool = False
    label_column: int = 0
    feature_columns: tuple[int, ...] | None = None
    classes: tuple[float, ...] | None = None
    subset_size: int | None = None
    subset_seed: int = 7
    pca_dim: int | None = None

    @classmethod
    def from_file(cls, path: str | Path) -> "DatasetConfig":
        d = json.loads(Path(path).read_text())
        return cls(
            name=d["name"],
            csv=d["csv"],
            header=bool(d.get("header", False)),
            label_column=int(d.get("label_column", 0)),
            feature_columns=(
                tuple(d["feature_columns"]) if d.get("feature_columns") else None
            ),
            classes=tuple(d["classes"]) if d.get("classes") else None,
            subset_size=d.get("subset_size"),
            subset_seed=int(d.get("subset_seed", 7)),
            pca_dim=d.get("pca_dim"),
        )


@dataclass
class Dataset:
    name: str
    features: np.ndarray  # (n, d) raw, unscaled
    labels: np.ndarray  # (n,) class indices in [0, n_classes)
    n_classes: int
    pca_dim: int | None = None

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def input_dim(self) -> int:
        """Model-facing feature count (after PCA when configured)."""
        return self.pca_dim if self.pca_dim is not None else self.features.shape[1]


def _read_csv_matrix(path: Path, header: bool) -> np.ndarray:
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    rows = []
    width = None
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if header and lineno == 1:
                continue
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DataError(
                    f"{path.name} line {lineno}: expected {width} columns, got {len(row)}"
                )
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise DataError(f"{path.name} line {lineno}: {exc}") from exc
    if not rows:
        raise DataError(f"{path.name}: no data rows")
    return np.asarray(rows, dtype=np.float64)


def _stratified_take(labels: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
    """Indices of a class-proportional subsample of the given size."""
    n = labels.shape[0]
    classes, counts = np.unique(labels, return_counts=True)
    exact = counts * (size / n)
    take = np.floor(exact).astype(int)
    remainder_order = np.argsort(-(exact - take), kind="stable")
    for j in remainder_order[: size - take.sum()]:
        take[j] += 1
    picked = []
    for cls, k in zip(classes, take):
        idx = np.flatnonzero(labels == cls)
        picked.append(rng.permutation(idx)[:k])
    return np.sort(np.concatenate(picked))


def load_dataset(config: DatasetConfig, data_dir: str | Path) -> Dataset:
    """Read, class-map, and (optionally) subsample one dataset."""
    data_dir = Path(data_dir)
    matrix = _read_csv_matrix(data_dir / config.csv, config.header)
    n_cols = matrix.shape[1]
    label_col = config.label_column % n_cols
    raw_labels = matrix[:, label_col]
    if config.feature_columns is not None:
        feat_cols = list(config.feature_columns)
    else:
        feat_cols = [c for c in range(n_cols) if c != label_col]
    features = matrix[:, feat_cols]

    class_values = (
        list(config.classes) if config.classes is not None else sorted(set(raw_labels))
    )
    keep = np.isin(raw_labels, class_values)
    features = features[keep]
    mapping = {v: i for i, v in enumerate(class_values)}
    labels = np.asarray([mapping[v] for v in raw_labels[keep]], dtype=np.int64)
    if labels.size == 0:
        raise DataError(f"{config.name}: no rows left after class filtering")

    if config.subset_size is not None and config.subset_size < labels.size:
        rng = make_rng(config.subset_seed, "subset", config.name)
        idx = _stratified_take(labels, config.subset_size, rng)
        features, labels = features[idx], labels[idx]

    return Dataset(config.name, features, labels, len(class_values), config.pca_dim)


def load_named_dataset(name: str, data_dir: str | Path) -> Dataset:
    """Load via the dataset's JSON config file sitting next to its CSV."""
    return load_dataset(DatasetConfig.from_file(Path(data_dir) / f"{name}.json"), data_dir)


# -- scaling --


@dataclass
class MinMaxScaler:
    mins: np.ndarray
    maxs: np.ndarray

    @classmethod
    def fit(cls, features: np.ndarray) -> "MinMaxScaler":
        return cls(features.min(axis=0), features.max(axis=0))

    def transform(self, features: np.ndarray, clamp: bool = True) -> np.ndarray:
        span = self.maxs - self.mins
        constant = span == 0
        safe_span = np.where(constant, 1.0, span)
        out = (features - self.mins) / safe_span
        out = np.where(constant, 0.5, out)  # constant columns carry no signal
        return np.clip(out, 0.0, 1.0) if clamp else out

    def inverse(self, scaled: np.ndarray) -> np.ndarray:
        span = self.maxs - self.mins
        return scaled * np.where(span == 0, 1.0, span) + self.mins


def minmax_scale(features: np.ndarray) -> tuple[np.ndarray, MinMaxScaler]:
    """Columnwise map onto [0,1]; returns the fitted scaler for test reuse."""
    scaler = MinMaxScaler.fit(features)
    return scaler.transform(features, clamp=False), scaler


# -- PCA --


@dataclass
class PcaBasis:
    mean: np.ndarray  # (d,)
    components: np.ndarray  # (k, d), rows are eigenvectors, eigenvalue-descending
    eigenvalues: np.ndarray  # (k,)

    def transform(self, features: np.ndarray) -> np.ndarray:
        return (features - self.mean) @ self.components.T


def pca_reduce(features: np.ndarray, target_dim: int) -> tuple[np.ndarray, PcaBasis]:
    """Project onto the top eigenvectors of the covariance matrix.

    Sign convention: the largest-magnitude entry of every component is
    positive, which makes the basis unique and runs reproducible.
    """
    features = np.asarray(features, dtype=np.float64)
    n, d = features.shape
    if target_dim > d:
        raise ConfigurationError(f"target_dim {target_dim} exceeds feature dim {d}")
    if n < 2:
        raise DataError("PCA needs at least two samples")
    mean = features.mean(axis=0)
    centered = features - mean
    cov = centered.T @ centered / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:target_dim]
    components = eigvecs[:, order].T
    eigenvalues = eigvals[order]
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    basis = PcaBasis(mean, components, eigenvalues)
    return basis.transform(features), basis


# -- per-fold preparation: PCA and scaling fit on the training side only --


@dataclass
class Preprocessor:
    pca: PcaBasis | None
    scaler: MinMaxScaler

    @classmethod
    def fit(cls, train_features: np.ndarray, pca_dim: int | None) -> "Preprocessor":
        pca = None
        feats = train_features
        if pca_dim is not None:
            feats, pca = pca_reduce(train_features, pca_dim)
        return cls(pca, MinMaxScaler.fit(feats))

    def transform(self, features: np.ndarray) -> np.ndarray:
        if self.pca is not None:
            features = self.pca.transform(features)
        return self.scaler.transform(features, clamp=True)


def prepare_split(
    ds: Dataset, train_idx: np.ndarray, test_idx: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(Xtr, ytr, Xte, yte) with preprocessing fit on the training indices."""
    pre = Preprocessor.fit(ds.features[train_idx], ds.pca_dim)
    return (
        pre.transform(ds.features[train_idx]),
        ds.labels[train_idx],
        pre.transform(ds.features[test_idx]),
        ds.labels[test_idx],
    )


# -- splits and partitions --


@dataclass(frozen=True)
class FoldSplit:
    fold_id: int
    train_indices: np.ndarray
    test_indices: np.ndarray


def stratified_kfold(labels: np.ndarray, k: int, seed: int) -> list[FoldSplit]:
    """k folds whose test sets partition the index set, class-balanced."""
    labels = np.asarray(labels)
    if k < 2:
        raise ConfigurationError("k must be >= 2")
    classes, counts = np.unique(labels, return_counts=True)
    if counts.min() < k:
        raise DataError(f"class with {counts.min()} members cannot fill {k} folds")
    rng = make_rng(seed, "kfold", k)
    fold_test: list[list[int]] = [[] for _ in range(k)]
    cursor = 0
    for cls in classes:
        idx = rng.permutation(np.flatnonzero(labels == cls))
        for j, sample in enumerate(idx):
            fold_test[(cursor + j) % k].append(int(sample))
        cursor += len(idx)
    all_idx = np.arange(labels.shape[0])
    splits = []
    for fold_id in range(k):
        test = np.sort(np.asarray(fold_test[fold_id], dtype=np.int64))
        train = np.setdiff1d(all_idx, test)
        splits.append(FoldSplit(fold_id, train, test))
    return splits


def split_train_test(
    indices: np.ndarray, labels: np.ndarray, test_fraction: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Stratified train/test split of an index subset (e.g. a client shard)."""
    indices = np.asarray(indices)
    rng = make_rng(seed, "holdout")
    test_parts = []
    for cls in np.unique(labels[indices]):
        cls_idx = rng.permutation(indices[labels[indices] == cls])
        n_test = int(round(len(cls_idx) * test_fraction))
        test_parts.append(cls_idx[:n_test])
    test = np.sort(np.concatenate(test_parts)) if test_parts else np.zeros(0, dtype=np.int64)
    if test.size == 0 and indices.size >= 2:
        test = np.asarray([int(rng.choice(indices))])
    train = np.setdiff1d(indices, test)
    return train, test


@dataclass
class ClientPartition:
    client_indices: list[np.ndarray]
    mode: str  # "iid" | "dirichlet"
    alpha: float | None
    seed: int

    @property
    def n_clients(self) -> int:
        return len(self.client_indices)

    def class_histograms(self, labels: np.ndarray, n_classes: int) -> np.ndarray:
        hist = np.zeros((self.n_clients, n_classes), dtype=np.int64)
        for c, idx in enumerate(self.client_indices):
            for lbl in labels[idx]:
                hist[c, lbl] += 1
        return hist


def _dirichlet_counts(
    n_items: int, proportions: np.ndarray
) -> np.ndarray:
    counts = np.floor(proportions * n_items).astype(int)
    remainder_order = np.argsort(-(proportions * n_items - counts), kind="stable")
    for j in remainder_order[: n_items - counts.sum()]:
        counts[j] += 1
    return counts


def partition_clients(
    train_indices: np.ndarray,
    labels: np.ndarray,
    n_clients: int,
    mode: str,
    seed: int,
    alpha: float = 0.5,
    max_retries: int = 100,
) -> ClientPartition:
    """Disjoint per-client index lists covering ``train_indices``.

    IID deals each class round-robin (near-equal class ratios per client);
    dirichlet draws per-class client proportions from Dirichlet(alpha).
    Empty clients are re-drawn a bounded number of times, then fixed up by
    moving samples from the largest client.
    """
    train_indices = np.asarray(train_indices)
    if n_clients < 1:
        raise ConfigurationError("need at least one client")
    if n_clients > train_indices.size:
        raise ConfigurationError(
            f"cannot split {train_indices.size} samples across {n_clients} clients"
        )
    rng = make_rng(seed, "partition", mode, n_clients)
    class_indices = [
        rng.permutation(train_indices[labels[train_indices] == cls])
        for cls in np.unique(labels[train_indices])
    ]

    if mode == "iid":
        shards: list[list[int]] = [[] for _ in range(n_clients)]
        cursor = 0
        for cls_idx in class_indices:
            for j, sample in enumerate(cls_idx):
                shards[(cursor + j) % n_clients].append(int(sample))
            cursor += len(cls_idx)
        client_lists = [np.sort(np.asarray(s, dtype=np.int64)) for s in shards]
        return ClientPartition(client_lists, "iid", None, seed)

    if mode != "dirichlet":
        raise ConfigurationError(f"unknown partition mode: {mode}")

    for _ in range(max_retries):
        shards = [[] for _ in range(n_clients)]
        for cls_idx in class_indices:
            counts = _dirichlet_counts(len(cls_idx), rng.dirichlet([alpha] * n_clients))
            start = 0
            for c, take in enumerate(counts):
                shards[c].extend(int(v) for v in cls_idx[start : start + take])
                start += take
        if all(len(s) > 0 for s in shards):
            break
    else:
        shards = shards  # fall through to fix-up with the last draw
    while any(len(s) == 0 for s in shards):
        largest = max(range(n_clients), key=lambda c: len(shards[c]))
        empty = min(c for c in range(n_clients) if len(shards[c]) == 0)
        shards[empty].append(shards[largest].pop())
    client_lists = [np.sort(np.asarray(s, dtype=np.int64)) for s in shards]
    return ClientPartition(client_lists, "dirichlet", alpha, seed)


# -- cached prepared datasets: flat little-endian reals + JSON sidecar --


def save_prepared(
    stem: str | Path, features: np.ndarray, labels: np.ndarray, provenance: dict
) -> None:
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    stem.with_suffix(".features.bin").write_bytes(
        np.ascontiguousarray(features, dtype="<f8").tobytes()
    )
    stem.with_suffix(".labels.bin").write_bytes(
        np.ascontiguousarray(labels, dtype="<i8").tobytes()
    )
    sidecar = {
        "n_samples": int(features.shape[0]),
        "n_features": int(features.shape[1]),
        "dtype": "<f8",
        "label_dtype": "<i8",
        "provenance": provenance,
    }
    stem.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))


def load_prepared(stem: str | Path) -> tuple[np.ndarray, np.ndarray, dict]:
    stem = Path(stem)
    sidecar = json.loads(stem.with_suffix(".json").read_text())
    n, d = sidecar["n_samples"], sidecar["n_features"]
    features = np.frombuffer(
        stem.with_suffix(".features.bin").read_bytes(), dtype="<f8"
    ).reshape(n, d)
    labels = np.frombuffer(stem.with_suffix(".labels.bin").read_bytes(), dtype="<i8")
    return features.astype(np.float64), labels.astype(np.int64), sidecar
