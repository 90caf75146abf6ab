"""Membership inference and gradient-inversion attacks with ROC/AUC scoring.

Threat model: the adversary holds the released model weights. Membership
scores come from per-sample loss (threshold attack) or from a logistic
attack model trained on shadow models' confidence statistics (shadow
attack). AUC is computed two independent ways, trapezoid-over-ROC and the
rank statistic, which the tests require to agree.

Gradient inversion reconstructs a training input from a single-sample
gradient by descending a cosine-matching objective over a dummy input;
the objective's gradient is taken by central finite differences over the
input coordinates (models here are tiny, so this stays cheap) and the
dummy stays clamped to the feature box [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AttackError, ConfigurationError, UsageError
from .models import (
    ArchitectureSpec,
    HybridModel,
    build,
    forward_batch,
    per_sample_grads,
)
from .nn import AdamState, DenseLayer, MlpHead, adam_step, backward
from .nn import forward as head_forward
from .nn import loss_softmax_ce, softmax
from .seeding import make_rng
from .training import TrainConfig, train_centralized


@dataclass
class MembershipScore:
    sample_id: int
    score: float  # higher = more member-like
    is_member: bool


@dataclass
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float


def auc_rank(scores: np.ndarray, is_member: np.ndarray) -> float:
    """Mann-Whitney AUC with half credit for ties."""
    scores = np.asarray(scores, dtype=np.float64)
    is_member = np.asarray(is_member, dtype=bool)
    n_pos = int(is_member.sum())
    n_neg = is_member.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UsageError("need both members and non-members to score")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(scores.size, dtype=np.float64)
    ranks[order] = np.arange(1, scores.size + 1)
    # average ranks within tie groups
    sorted_scores = scores[order]
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        if j > i:
            ranks[order[i : j + 1]] = 0.5 * (i + 1 + j + 1)
        i = j + 1
    r_pos = ranks[is_member].sum()
    return float((r_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_curve(scores: np.ndarray, is_member: np.ndarray) -> RocCurve:
    """ROC swept over all thresholds (ties grouped); AUC by trapezoid."""
    scores = np.asarray(scores, dtype=np.float64)
    is_member = np.asarray(is_member, dtype=bool)
    n_pos = int(is_member.sum())
    n_neg = is_member.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UsageError("need both members and non-members to score")
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = is_member[order]
    tps, fps = [0.0], [0.0]
    tp = fp = 0
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        tp += int(sorted_labels[i : j + 1].sum())
        fp += (j - i + 1) - int(sorted_labels[i : j + 1].sum())
        tps.append(tp)
        fps.append(fp)
        i = j + 1
    tpr = np.asarray(tps) / n_pos
    fpr = np.asarray(fps) / n_neg
    auc = float(np.trapezoid(tpr, fpr))
    return RocCurve(fpr, tpr, auc)


def _per_sample_losses(model: HybridModel, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    logits = forward_batch(model, xs)
    z = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    return lse - z[np.arange(len(ys)), np.asarray(ys)]


def mia_threshold_attack(
    model: HybridModel,
    members: tuple[np.ndarray, np.ndarray],
    non_members: tuple[np.ndarray, np.ndarray],
) -> tuple[list[MembershipScore], RocCurve]:
    """Loss-threshold attack: score = -loss, lower loss reads as member."""
    (mx, my), (nx, ny) = members, non_members
    if len(my) == 0 or len(ny) == 0:
        raise UsageError("member and non-member sets must be non-empty")
    scores = np.concatenate([-_per_sample_losses(model, mx, my), -_per_sample_losses(model, nx, ny)])
    truth = np.concatenate([np.ones(len(my), dtype=bool), np.zeros(len(ny), dtype=bool)])
    records = [
        MembershipScore(i, float(s), bool(t)) for i, (s, t) in enumerate(zip(scores, truth))
    ]
    return records, roc_curve(scores, truth)


# -- shadow-model attack --


def _attack_features(model: HybridModel, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Per-sample (sorted confidence vector, loss) in a fixed layout."""
    logits = forward_batch(model, xs)
    feats = np.empty((len(ys), logits.shape[1] + 1))
    for i, (row, y) in enumerate(zip(logits, ys)):
        probs = softmax(row)
        feats[i, : logits.shape[1]] = np.sort(probs)[::-1]
        feats[i, -1] = loss_softmax_ce(row, int(y))[0]
    return feats


def _fit_logistic(feats: np.ndarray, labels: np.ndarray, seed: int) -> tuple:
    """Tiny 2-class logistic model on standardized features (own stack)."""
    mean = feats.mean(axis=0)
    std = feats.std(axis=0)
    std[std == 0] = 1.0
    z = (feats - mean) / std
    rng = make_rng(seed, "attack-model")
    head = MlpHead([DenseLayer(0.01 * rng.standard_normal((2, z.shape[1])), np.zeros(2))], 0.0)
    from .nn import flatten_layers, unflatten_layers

    params = flatten_layers(head.layers)
    adam = AdamState.init(params.shape[0], lr=0.05)
    for _ in range(150):
        order = rng.permutation(len(labels))
        for start in range(0, len(labels), 32):
            idx = order[start : start + 32]
            grad = np.zeros_like(params)
            for i in idx:
                out, cache = head_forward(head, z[i])
                _, dlogits = loss_softmax_ce(out, int(labels[i]))
                g, _ = backward(head, cache, dlogits)
                grad += g
            params = adam_step(params, grad / len(idx), adam)
            unflatten_layers(head.layers, params)
    return head, mean, std


def _score_logistic(fit, feats: np.ndarray) -> np.ndarray:
    head, mean, std = fit
    z = (feats - mean) / std
    return np.array([softmax(head_forward(head, row)[0])[1] for row in z])


def mia_shadow_attack(
    arch: ArchitectureSpec,
    attack_pool: tuple[np.ndarray, np.ndarray],
    n_shadows: int,
    target_model: HybridModel,
    members: tuple[np.ndarray, np.ndarray],
    non_members: tuple[np.ndarray, np.ndarray],
    train_cfg: TrainConfig | None = None,
    seed: int = 0,
) -> RocCurve:
    """Shadow-model attack scored on the target's member/non-member sets.

    Shadows mimic the target's architecture and training recipe on random
    halves of the attack pool; their in/out confidence statistics train a
    logistic membership classifier.
    """
    pool_x, pool_y = attack_pool
    if len(pool_y) < 4:
        raise ConfigurationError("attack pool too small to split for shadow training")
    train_cfg = train_cfg or TrainConfig()
    feats, labels = [], []
    for s in range(n_shadows):
        rng = make_rng(seed, "shadow", s)
        order = rng.permutation(len(pool_y))
        half = len(pool_y) // 2
        in_idx, out_idx = order[:half], order[half:]
        shadow = build(arch, make_rng(seed, "shadow-init", s))
        shadow, _ = train_centralized(
            shadow, pool_x[in_idx], pool_y[in_idx], train_cfg, rng=make_rng(seed, "shadow-train", s)
        )
        feats.append(_attack_features(shadow, pool_x[in_idx], pool_y[in_idx]))
        labels.append(np.ones(len(in_idx), dtype=np.int64))
        feats.append(_attack_features(shadow, pool_x[out_idx], pool_y[out_idx]))
        labels.append(np.zeros(len(out_idx), dtype=np.int64))
    fit = _fit_logistic(np.vstack(feats), np.concatenate(labels), seed)

    (mx, my), (nx, ny) = members, non_members
    scores = np.concatenate(
        [_score_logistic(fit, _attack_features(target_model, mx, my)),
         _score_logistic(fit, _attack_features(target_model, nx, ny))]
    )
    truth = np.concatenate([np.ones(len(my), dtype=bool), np.zeros(len(ny), dtype=bool)])
    return roc_curve(scores, truth)


# -- gradient inversion --


@dataclass
class ReconstructionResult:
    target: np.ndarray
    reconstructed: np.ndarray
    mse: float
    psnr: float
    matching_loss: float

    @staticmethod
    def score(target: np.ndarray, reconstructed: np.ndarray) -> tuple[float, float]:
        mse = float(np.mean((target - reconstructed) ** 2))
        psnr = float("inf") if mse == 0 else float(10.0 * np.log10(1.0 / mse))
        return mse, psnr


def gradient_inversion(
    model: HybridModel,
    observed_grad: np.ndarray,
    label: int,
    target_x: np.ndarray,
    iters: int,
    rng: np.random.Generator,
    lr: float = 0.1,
    fd_step: float = 1e-4,
) -> ReconstructionResult:
    """Reconstruct an input from its single-sample parameter gradient.

    Minimizes 1 - cos(grad(x_hat), observed_grad) with Adam on x_hat; the
    input stays clamped to [0,1]. The best iterate by reconstruction MSE is
    reported (target_x is used for scoring only, never by the optimizer's
    objective).
    """
    obs_norm = float(np.linalg.norm(observed_grad))
    if obs_norm < 1e-12:
        raise AttackError("observed gradient is (near) zero: nothing to invert")
    obs_unit = observed_grad / obs_norm
    d = model.spec.input_dim
    target_x = np.asarray(target_x, dtype=np.float64)

    def matching_from_grads(grads: np.ndarray) -> np.ndarray:
        norms = np.linalg.norm(grads, axis=1)
        norms[norms == 0] = 1.0
        return 1.0 - (grads @ obs_unit) / norms

    x_hat = rng.uniform(0.0, 1.0, size=d)
    adam = AdamState.init(d, lr=lr)
    best_mse, best_x, best_match = np.inf, x_hat.copy(), np.inf
    labels = np.full(2 * d, int(label))
    idx = np.arange(d)
    for t in range(iters):
        probes = np.broadcast_to(x_hat, (2 * d, d)).copy()
        probes[2 * idx, idx] += fd_step
        probes[2 * idx + 1, idx] -= fd_step
        _, grads = per_sample_grads(model, probes, labels)
        j = matching_from_grads(grads)
        fd_grad = (j[0::2] - j[1::2]) / (2.0 * fd_step)
        # cosine decay: Adam's steady-state step is ~lr, so precision needs
        # the rate to shrink as the match tightens
        adam.lr = lr * max(0.5 * (1.0 + np.cos(np.pi * t / iters)), 1e-3)
        x_hat = np.clip(adam_step(x_hat, fd_grad, adam), 0.0, 1.0)
        mse, _ = ReconstructionResult.score(target_x, x_hat)
        if mse < best_mse:
            best_mse, best_x = mse, x_hat.copy()
            _, g_now = per_sample_grads(model, x_hat[None, :], labels[:1])
            best_match = float(matching_from_grads(g_now)[0])
    mse, psnr = ReconstructionResult.score(target_x, best_x)
    return ReconstructionResult(target_x, best_x, mse, psnr, best_match)


def single_sample_gradient(model: HybridModel, x: np.ndarray, y: int) -> np.ndarray:
    """The observed quantity in the inversion threat model."""
    _, grads = per_sample_grads(model, np.asarray(x)[None, :], np.asarray([y]))
    return grads[0]
