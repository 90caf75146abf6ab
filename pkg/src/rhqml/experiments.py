"""Experiment registry reproducing the benchmark tables.

Each experiment is a pure function of its config (seeds included), caches
unit results as JSON under ``<out_dir>/cache`` so interrupted runs resume,
and emits deterministic CSV + Markdown tables. Accuracy cells always travel
with the parameter counts actually used, so architecture drift shows up in
the output.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .data import Dataset, Preprocessor, load_named_dataset, prepare_split, stratified_kfold
from .errors import ConfigurationError, DataError
from .federated import DPConfig, FedConfig, dp_sanitize, run_federated
from .models import (
    ArchKind,
    ArchitectureSpec,
    Variant,
    ablate_bypass,
    arch_for_dataset,
    build,
    count_params,
)
from .privacy import (
    gradient_inversion,
    mia_shadow_attack,
    mia_threshold_attack,
    single_sample_gradient,
)
from .results import ResultsTable, emit_table, fmt_mean_std, fmt_pct, fmt_real
from .seeding import make_rng
from .training import TrainConfig, eval_accuracy, train_centralized

ALL_DATASETS = ("wine", "breast_cancer", "fashion_mnist", "covtype")

MODEL_LABELS = {
    "classical": "Classical",
    "pure_quantum": "Pure Quantum (a)",
    "original_hybrid": "Original Hybrid (b)",
    "residual_6q": "Residual-6q (c)",
    "residual_multi": "Residual (multi-basis)",
    "residual_8q": "Residual-8q (c)",
    "residual_deep": "Residual-6q-Deep",
}


def standard_archs(ds: Dataset, dsname: str) -> dict[str, ArchitectureSpec]:
    d, c = ds.input_dim, ds.n_classes
    return {
        "classical": arch_for_dataset(ArchKind.CLASSICAL, d, c, dsname),
        "pure_quantum": arch_for_dataset(ArchKind.PURE_QUANTUM, d, c, dsname),
        "original_hybrid": arch_for_dataset(ArchKind.ORIGINAL_HYBRID, d, c, dsname),
        "residual_6q": arch_for_dataset(ArchKind.RESIDUAL_HYBRID, d, c, dsname),
        "residual_deep": arch_for_dataset(
            ArchKind.RESIDUAL_HYBRID, d, c, dsname, variant=Variant.DEEP
        ),
    }


def table2_archs(ds: Dataset, dsname: str) -> dict[str, ArchitectureSpec]:
    archs = standard_archs(ds, dsname)
    d, c = ds.input_dim, ds.n_classes
    archs["residual_multi"] = arch_for_dataset(
        ArchKind.RESIDUAL_HYBRID, d, c, dsname, variant=Variant.MULTI_BASIS
    )
    archs["residual_8q"] = arch_for_dataset(
        ArchKind.RESIDUAL_HYBRID, d, c, dsname, n_qubits=8
    )
    # keep the presentation order stable
    order = [
        "classical",
        "pure_quantum",
        "original_hybrid",
        "residual_6q",
        "residual_multi",
        "residual_8q",
        "residual_deep",
    ]
    return {k: archs[k] for k in order}


class RunCache:
    """JSON-per-unit cache; re-running a finished experiment is a no-op."""

    def __init__(self, out_dir: str | Path, experiment: str):
        self.dir = Path(out_dir) / "cache" / experiment
        self.dir.mkdir(parents=True, exist_ok=True)

    def get_or_run(self, key: str, fn) -> dict:
        path = self.dir / f"{key}.json"
        if path.exists():
            return json.loads(path.read_text())
        value = fn()
        path.write_text(json.dumps(value, indent=2, sort_keys=True))
        return value


# -- measurement units --


def split_accuracy(ds: Dataset, spec: ArchitectureSpec, seed: int) -> float:
    """Train on the 80% side of a stratified split, score the 20% side."""
    fold = stratified_kfold(ds.labels, 5, seed=seed)[0]
    xtr, ytr, xte, yte = prepare_split(ds, fold.train_indices, fold.test_indices)
    model = build(spec, make_rng(seed, "init", spec.kind.value, spec.variant.value))
    model, _ = train_centralized(model, xtr, ytr, TrainConfig(seed=seed))
    return eval_accuracy(model, xte, yte)


def cv_accuracy(ds: Dataset, spec: ArchitectureSpec, seed: int) -> float:
    """Mean test accuracy over a stratified 5-fold cross-validation."""
    accs = []
    for fold in stratified_kfold(ds.labels, 5, seed=seed):
        xtr, ytr, xte, yte = prepare_split(ds, fold.train_indices, fold.test_indices)
        model = build(spec, make_rng(seed, "init", spec.kind.value, fold.fold_id))
        model, _ = train_centralized(model, xtr, ytr, TrainConfig(seed=seed))
        accs.append(eval_accuracy(model, xte, yte))
    return float(np.mean(accs))


def fed_summary(
    ds: Dataset, spec: ArchitectureSpec, cfg: ExperimentConfig, mode: str, seed: int,
    rounds: int | None = None, dp: DPConfig | None = None,
) -> dict:
    fed = FedConfig(
        n_clients=cfg.clients,
        rounds=rounds if rounds is not None else cfg.rounds,
        local_epochs=cfg.local_epochs,
        partition_mode=mode,
        dirichlet_alpha=cfg.dirichlet_alpha,
        dp=dp,
        seed=seed,
    )
    res = run_federated(spec, ds, fed, TrainConfig(seed=seed))
    return {
        "accuracy": res.final_accuracy,
        "comm_mb": res.ledger.total_mb,
        "rounds_to_90": res.rounds_to_reach(0.9),
        "n_params": count_params(res.model),
    }


def fed_privacy_unit(
    ds: Dataset, spec: ArchitectureSpec, cfg: ExperimentConfig, seed: int,
    dp: DPConfig | None = None, with_shadow: bool = False,
) -> dict:
    """Train a federated model and attack it: the model-release threat model.

    Members are a subsample of the union of client training shards;
    non-members come from the held-out shards; both sets have equal size.
    """
    fed = FedConfig(
        n_clients=cfg.clients,
        rounds=cfg.mia_rounds,
        local_epochs=cfg.local_epochs,
        partition_mode="iid",
        dp=dp,
        seed=seed,
    )
    res = run_federated(spec, ds, fed, TrainConfig(seed=seed))
    train_union = np.sort(np.concatenate(res.client_train))
    test_union = np.sort(np.concatenate(res.client_test))
    pre = Preprocessor.fit(ds.features[train_union], ds.pca_dim)
    feats = pre.transform(ds.features)
    rng = make_rng(seed, "mia-eval")
    k = min(train_union.size, test_union.size)
    members = rng.permutation(train_union)[:k]
    non_members = rng.permutation(test_union)[:k]
    m_xy = (feats[members], ds.labels[members])
    n_xy = (feats[non_members], ds.labels[non_members])
    _, thr = mia_threshold_attack(res.model, m_xy, n_xy)
    out = {"accuracy": res.final_accuracy, "auc_threshold": thr.auc}
    if with_shadow:
        pool = (feats[test_union], ds.labels[test_union])
        sh = mia_shadow_attack(
            spec, pool, cfg.n_shadows, res.model, m_xy, n_xy,
            TrainConfig(seed=seed), seed=seed,
        )
        out["auc_shadow"] = sh.auc
    return out


def inversion_unit(
    ds: Dataset, spec: ArchitectureSpec, cfg: ExperimentConfig, seed: int,
    dp: DPConfig | None = None,
) -> dict:
    """Mean reconstruction error over attacked training samples."""
    fold = stratified_kfold(ds.labels, 5, seed=seed)[0]
    xtr, ytr, _, _ = prepare_split(ds, fold.train_indices, fold.test_indices)
    model = build(spec, make_rng(seed, "init", spec.kind.value))
    model, _ = train_centralized(model, xtr, ytr, TrainConfig(seed=seed))
    rng = make_rng(seed, "inversion")
    picks = rng.permutation(len(ytr))[: cfg.inversion_samples]
    mses, psnrs = [], []
    for j, i in enumerate(picks):
        grad = single_sample_gradient(model, xtr[i], int(ytr[i]))
        if dp is not None:
            # under DP the adversary only ever sees sanitized updates
            grad = dp_sanitize(grad, dp, make_rng(seed, "dp-obs", j))
        result = gradient_inversion(
            model, grad, int(ytr[i]), xtr[i], iters=cfg.inversion_iters,
            rng=make_rng(seed, "invert", j),
        )
        mses.append(result.mse)
        psnrs.append(result.psnr)
    return {"mse": float(np.mean(mses)), "psnr": float(np.mean(psnrs))}


# -- table experiments --


def _datasets_for(cfg: ExperimentConfig, default: tuple[str, ...] = ALL_DATASETS) -> list[str]:
    wanted = (cfg.dataset,) if cfg.dataset else default
    data_dir = cfg.resolve_data_dir()
    available = []
    missing = []
    for name in wanted:
        try:
            load_named_dataset(name, data_dir)
            available.append(name)
        except DataError as exc:
            missing.append((name, str(exc)))
    if cfg.dataset and missing:
        raise DataError(missing[0][1])
    for name, msg in missing:
        print(f"skipping {name}: {msg} (see scripts/fetch_datasets.py)")
    if not available:
        raise DataError("no datasets available; run scripts/export_builtin_datasets.py")
    return available


def _footer(cfg: ExperimentConfig, counts: dict[str, int]) -> dict[str, str]:
    footer = {
        "seeds": ",".join(str(s) for s in cfg.seeds),
        "param_counts": "; ".join(f"{k}={v}" for k, v in sorted(counts.items())),
    }
    return footer


def run_table1(cfg: ExperimentConfig) -> list[ResultsTable]:
    cache = RunCache(cfg.out_dir, "table1")
    names = _datasets_for(cfg)
    data_dir = cfg.resolve_data_dir()
    table = ResultsTable("table1", ["Method"] + list(names))
    counts: dict[str, int] = {}
    rows = [
        ("Classical Centralized", "classical", "centralized", None),
        ("Quantum Centralized", "pure_quantum", "centralized", None),
        ("Classical FL (IID)", "classical", "fed", "iid"),
        ("Classical FL (Non-IID)", "classical", "fed", "dirichlet"),
        ("Quantum FL (IID)", "pure_quantum", "fed", "iid"),
        ("Quantum FL (Non-IID)", "pure_quantum", "fed", "dirichlet"),
    ]
    for label, model_key, setting, mode in rows:
        cells = [label]
        for name in names:
            ds = load_named_dataset(name, data_dir)
            spec = standard_archs(ds, name)[model_key]
            counts[f"{name}/{model_key}"] = count_params(build(spec, make_rng(0, "count")))
            accs = []
            for seed in cfg.seeds:
                if setting == "centralized":
                    unit = cache.get_or_run(
                        f"cv_{name}_{model_key}_s{seed}",
                        lambda: {"accuracy": cv_accuracy(ds, spec, seed)},
                    )
                else:
                    unit = cache.get_or_run(
                        f"fed_{name}_{model_key}_{mode}_s{seed}",
                        lambda: fed_summary(ds, spec, cfg, mode, seed),
                    )
                accs.append(unit["accuracy"])
            cells.append(fmt_pct(float(np.mean(accs))))
        table.add_row(*cells)
    table.footer = _footer(cfg, counts)
    return [table]


def run_table2(cfg: ExperimentConfig) -> list[ResultsTable]:
    cache = RunCache(cfg.out_dir, "table2")
    name = cfg.dataset or "wine"
    ds = load_named_dataset(name, cfg.resolve_data_dir())
    archs = table2_archs(ds, name)
    table = ResultsTable("table2", ["Model", "Accuracy (%)", "Parameters"])
    counts = {}
    for key, spec in archs.items():
        n_params = count_params(build(spec, make_rng(0, "count")))
        counts[key] = n_params
        accs = [
            cache.get_or_run(
                f"split_{name}_{key}_s{seed}",
                lambda: {"accuracy": split_accuracy(ds, spec, seed)},
            )["accuracy"]
            for seed in cfg.seeds
        ]
        table.add_row(MODEL_LABELS[key], fmt_mean_std(accs), n_params)
    table.footer = _footer(cfg, counts)
    table.footer["dataset"] = name
    return [table]


def run_table3(cfg: ExperimentConfig) -> list[ResultsTable]:
    cache = RunCache(cfg.out_dir, "table3")
    names = _datasets_for(cfg)
    data_dir = cfg.resolve_data_dir()
    keys = ["classical", "pure_quantum", "original_hybrid", "residual_6q", "residual_deep"]
    table = ResultsTable("table3", ["Dataset"] + [MODEL_LABELS[k] for k in keys])
    counts = {}
    seed = cfg.seeds[0]
    for name in names:
        ds = load_named_dataset(name, data_dir)
        archs = standard_archs(ds, name)
        cells = [name]
        for key in keys:
            counts[f"{name}/{key}"] = count_params(build(archs[key], make_rng(0, "count")))
            unit = cache.get_or_run(
                f"cv_{name}_{key}_s{seed}",
                lambda: {"accuracy": cv_accuracy(ds, archs[key], seed)},
            )
            cells.append(fmt_pct(unit["accuracy"]))
        table.add_row(*cells)
    table.footer = _footer(cfg, counts)
    table.footer["protocol"] = "5-fold CV mean"
    return [table]


def run_table4(cfg: ExperimentConfig) -> list[ResultsTable]:
    cache = RunCache(cfg.out_dir, "table4")
    name = cfg.dataset or "wine"
    ds = load_named_dataset(name, cfg.resolve_data_dir())
    archs = standard_archs(ds, name)
    table = ResultsTable(
        "table4",
        ["Model", "Test Acc (%)", "MIA AUC (thr)", "MIA AUC (shadow)", "Recon MSE", "PSNR (dB)"],
    )
    counts = {}

    def privacy_row(label, key, dp):
        spec = archs[key]
        counts[label] = count_params(build(spec, make_rng(0, "count")))
        accs, aucs = [], []
        shadow_cell = "-"
        for i, seed in enumerate(cfg.seeds):
            with_shadow = dp is None and i == 0
            tag = f"mia_{name}_{key}_{'dp%g' % dp.epsilon if dp else 'clean'}_s{seed}"
            unit = cache.get_or_run(
                tag, lambda: fed_privacy_unit(ds, spec, cfg, seed, dp=dp, with_shadow=with_shadow)
            )
            accs.append(unit["accuracy"])
            aucs.append(unit["auc_threshold"])
            if "auc_shadow" in unit:
                shadow_cell = fmt_real(unit["auc_shadow"])
        inv = cache.get_or_run(
            f"inv_{name}_{key}_{'dp%g' % dp.epsilon if dp else 'clean'}_s{cfg.seeds[0]}",
            lambda: inversion_unit(ds, spec, cfg, cfg.seeds[0], dp=dp),
        )
        table.add_row(
            label,
            fmt_pct(float(np.mean(accs))),
            fmt_real(float(np.mean(aucs))),
            shadow_cell,
            fmt_real(inv["mse"]),
            fmt_real(inv["psnr"]),
        )

    privacy_row(MODEL_LABELS["classical"], "classical", None)
    privacy_row(MODEL_LABELS["pure_quantum"], "pure_quantum", None)
    for eps in cfg.dp_epsilons:
        privacy_row(f"DP (eps={eps:g})", "classical", DPConfig(eps, clip_norm=cfg.dp_clip_norm))
    table.footer = _footer(cfg, counts)
    table.footer["context"] = f"federated IID, {cfg.mia_rounds} rounds, {cfg.clients} clients"
    return [table]


def run_table5(cfg: ExperimentConfig) -> list[ResultsTable]:
    cache = RunCache(cfg.out_dir, "table5")
    names = _datasets_for(cfg)
    data_dir = cfg.resolve_data_dir()
    keys = ["classical", "pure_quantum", "original_hybrid", "residual_6q", "residual_deep"]
    tables = []
    attacks = ["threshold"] + (["shadow"] if cfg.with_shadow else [])
    for attack in attacks:
        table = ResultsTable(f"table5_{attack}", ["Model"] + list(names))
        counts = {}
        for key in keys:
            cells = [MODEL_LABELS[key]]
            for name in names:
                ds = load_named_dataset(name, data_dir)
                spec = standard_archs(ds, name)[key]
                counts[f"{name}/{key}"] = count_params(build(spec, make_rng(0, "count")))
                aucs = []
                for seed in cfg.seeds:
                    unit = cache.get_or_run(
                        f"mia_{name}_{key}_{attack}_s{seed}",
                        lambda: fed_privacy_unit(
                            ds, spec, cfg, seed, with_shadow=(attack == "shadow")
                        ),
                    )
                    aucs.append(unit["auc_shadow" if attack == "shadow" else "auc_threshold"])
                arr = np.asarray(aucs)
                cells.append(f"{arr.mean():.3f}+-{arr.std():.3f}")
            table.add_row(*cells)
        table.footer = _footer(cfg, counts)
        table.footer["attack"] = attack
        table.footer["context"] = f"federated IID, {cfg.mia_rounds} rounds"
        tables.append(table)
    return tables


def run_table6(cfg: ExperimentConfig) -> list[ResultsTable]:
    cache = RunCache(cfg.out_dir, "table6")
    names = _datasets_for(cfg)
    data_dir = cfg.resolve_data_dir()
    table = ResultsTable(
        "table6",
        ["Dataset", "Model", "Dist.", "Accuracy (%)", "Comm. (MB)", "Rounds to 90% peak"],
    )
    counts = {}
    for name in names:
        ds = load_named_dataset(name, data_dir)
        archs = standard_archs(ds, name)
        for key in ["classical", "residual_6q"]:
            spec = archs[key]
            counts[f"{name}/{key}"] = count_params(build(spec, make_rng(0, "count")))
            for mode, dist in [("iid", "IID"), ("dirichlet", "Non-IID")]:
                accs, r90s, mb = [], [], None
                for seed in cfg.seeds:
                    unit = cache.get_or_run(
                        f"fed_{name}_{key}_{mode}_s{seed}",
                        lambda: fed_summary(ds, spec, cfg, mode, seed),
                    )
                    accs.append(unit["accuracy"])
                    r90s.append(unit["rounds_to_90"])
                    mb = unit["comm_mb"]
                table.add_row(
                    name,
                    MODEL_LABELS[key],
                    dist,
                    fmt_pct(float(np.mean(accs))),
                    f"{mb:.2f}",
                    f"{float(np.mean(r90s)):.1f}",
                )
    table.footer = _footer(cfg, counts)
    table.footer["protocol"] = f"{cfg.clients} clients, {cfg.rounds} rounds"
    return [table]


def run_ablation(cfg: ExperimentConfig) -> list[ResultsTable]:
    cache = RunCache(cfg.out_dir, "ablation")
    name = cfg.dataset or "wine"
    ds = load_named_dataset(name, cfg.resolve_data_dir())
    archs = standard_archs(ds, name)
    table = ResultsTable("ablation", ["Model", "Accuracy (%)", "Parameters"])

    residual_spec = archs["residual_6q"]
    ablated_spec = ablate_bypass(
        build(residual_spec, make_rng(0, "shape")), make_rng(0, "shape")
    ).spec
    entries = [
        (MODEL_LABELS["residual_6q"], residual_spec),
        ("Residual w/o bypass (ablated)", ablated_spec),
        (MODEL_LABELS["pure_quantum"], archs["pure_quantum"]),
    ]
    counts = {}
    for label, spec in entries:
        counts[label] = count_params(build(spec, make_rng(0, "count")))
        accs = [
            cache.get_or_run(
                f"split_{name}_{label.replace(' ', '_')}_s{seed}",
                lambda: {"accuracy": split_accuracy(ds, spec, seed)},
            )["accuracy"]
            for seed in cfg.seeds
        ]
        table.add_row(label, fmt_mean_std(accs), counts[label])
    table.footer = _footer(cfg, counts)
    table.footer["dataset"] = name
    return [table]


REGISTRY = {
    "table1": run_table1,
    "table2": run_table2,
    "table3": run_table3,
    "table4": run_table4,
    "table5": run_table5,
    "table6": run_table6,
    "ablation": run_ablation,
}


def run_experiment(cfg: ExperimentConfig) -> list[Path]:
    if cfg.experiment not in REGISTRY:
        raise ConfigurationError(f"unknown experiment {cfg.experiment}")
    tables = REGISTRY[cfg.experiment](cfg)
    paths = []
    for table in tables:
        csv_path, md_path = emit_table(table, cfg.out_dir)
        paths += [csv_path, md_path]
    return paths
