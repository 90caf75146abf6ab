"""Mini-batch Adam training with optional early stopping.

`_run_epoch` is the single inner loop shared by the centralized trainer and
the federated clients, so the two paths stay bit-identical when fed the
same RNG stream (which the degenerate-equivalence tests rely on).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .models import HybridModel, flatten_params, model_grad, unflatten_params
from .nn import AdamState, adam_step, forward, loss_softmax_ce
from .seeding import make_rng
from .data import split_train_test
from .models import forward_batch


@dataclass
class TrainConfig:
    lr: float = 0.01
    batch_size: int = 8
    max_epochs: int = 50
    early_stop_patience: int | None = 10  # None disables early stopping
    val_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.lr < 0 or self.batch_size < 1:
            raise ValueError("lr must be >= 0 and batch_size >= 1")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float | None
    val_accuracy: float | None


def _run_epoch(
    model: HybridModel,
    xs: np.ndarray,
    ys: np.ndarray,
    cfg: TrainConfig,
    rng: np.random.Generator,
    adam: AdamState,
    params: np.ndarray,
) -> tuple[np.ndarray, float]:
    """One shuffled pass of mini-batch Adam; returns (params, mean batch loss)."""
    order = rng.permutation(ys.shape[0])
    losses = []
    for start in range(0, ys.shape[0], cfg.batch_size):
        idx = order[start : start + cfg.batch_size]
        loss, grads = model_grad(model, xs[idx], ys[idx], train_mode=True, rng=rng)
        params = adam_step(params, grads, adam)
        unflatten_params(model, params)
        losses.append(loss)
    return params, float(np.mean(losses))


def eval_loss(model: HybridModel, xs: np.ndarray, ys: np.ndarray) -> float:
    logits = forward_batch(model, xs)
    total = 0.0
    for row, y in zip(logits, ys):
        total += loss_softmax_ce(row, int(y))[0]
    return total / len(ys)


def eval_accuracy(model: HybridModel, xs: np.ndarray, ys: np.ndarray) -> float:
    logits = forward_batch(model, xs)
    return float((logits.argmax(axis=1) == np.asarray(ys)).mean())


def train_centralized(
    model: HybridModel,
    xs: np.ndarray,
    ys: np.ndarray,
    cfg: TrainConfig,
    rng: np.random.Generator | None = None,
) -> tuple[HybridModel, list[EpochRecord]]:
    """Train in place with Adam; early-stop on validation loss when enabled.

    With ``early_stop_patience=None`` or ``val_fraction=0`` this is a plain
    fixed-epoch run, which is the mode the federated equivalence contracts
    compare against.
    """
    if rng is None:
        rng = make_rng(cfg.seed, "centralized")
    use_es = cfg.early_stop_patience is not None and cfg.val_fraction > 0
    if use_es:
        tr_idx, val_idx = split_train_test(
            np.arange(ys.shape[0]), ys, cfg.val_fraction, seed=cfg.seed
        )
        x_tr, y_tr = xs[tr_idx], ys[tr_idx]
        x_val, y_val = xs[val_idx], ys[val_idx]
    else:
        x_tr, y_tr = xs, ys

    params = flatten_params(model)
    adam = AdamState.init(params.shape[0], cfg.lr)
    history: list[EpochRecord] = []
    best_loss = np.inf
    best_params = params.copy()
    best_epoch = -1
    for epoch in range(cfg.max_epochs):
        params, train_loss = _run_epoch(model, x_tr, y_tr, cfg, rng, adam, params)
        if use_es:
            v_loss = eval_loss(model, x_val, y_val)
            v_acc = eval_accuracy(model, x_val, y_val)
            history.append(EpochRecord(epoch, train_loss, v_loss, v_acc))
            if v_loss < best_loss:
                best_loss, best_epoch = v_loss, epoch
                best_params = params.copy()
            elif epoch - best_epoch >= cfg.early_stop_patience:
                break
        else:
            history.append(EpochRecord(epoch, train_loss, None, None))
    if use_es:
        unflatten_params(model, best_params)
    return model, history


def local_train(
    model: HybridModel,
    xs: np.ndarray,
    ys: np.ndarray,
    local_epochs: int,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Fixed-epoch training for one federated client; returns the flat params.

    No early stopping; a fresh optimizer per call (state does not persist
    across rounds). The caller passes a clone of the global model.
    """
    params = flatten_params(model)
    adam = AdamState.init(params.shape[0], cfg.lr)
    for _ in range(local_epochs):
        params, _ = _run_epoch(model, xs, ys, cfg, rng, adam, params)
    return params
