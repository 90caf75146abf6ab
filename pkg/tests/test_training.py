import numpy as np
import pytest

from rhqml.models import (
    ArchKind,
    ArchitectureSpec,
    build,
    clone_model,
    flatten_params,
)
from rhqml.seeding import make_rng
from rhqml.training import (
    TrainConfig,
    eval_accuracy,
    eval_loss,
    local_train,
    train_centralized,
)


def blobs(n_per_class, rng, spread=0.08):
    centers = np.array([[0.25, 0.25], [0.75, 0.75]])
    xs, ys = [], []
    for label, c in enumerate(centers):
        xs.append(c + spread * rng.standard_normal((n_per_class, 2)))
        ys.append(np.full(n_per_class, label))
    x = np.clip(np.vstack(xs), 0, 1)
    return x, np.concatenate(ys)


TOY_SPEC = ArchitectureSpec(ArchKind.CLASSICAL, 2, 2, hidden_dims=(8,))


class TestTrainCentralized:
    def test_separable_blobs_reach_high_accuracy(self):
        rng = np.random.default_rng(0)
        x, y = blobs(40, rng)
        model = build(TOY_SPEC, make_rng(0, "init"))
        model, history = train_centralized(model, x, y, TrainConfig(seed=0))
        assert eval_accuracy(model, x, y) >= 0.99
        assert len(history) <= 50

    def test_zero_learning_rate_leaves_weights(self):
        rng = np.random.default_rng(1)
        x, y = blobs(10, rng)
        model = build(TOY_SPEC, make_rng(1, "init"))
        before = flatten_params(model)
        model, _ = train_centralized(
            model, x, y, TrainConfig(lr=0.0, max_epochs=3, early_stop_patience=None, val_fraction=0, seed=1)
        )
        np.testing.assert_array_equal(flatten_params(model), before)

    def test_same_seed_identical_weights(self):
        x, y = blobs(20, np.random.default_rng(2))
        results = []
        for _ in range(2):
            model = build(TOY_SPEC, make_rng(2, "init"))
            model, _ = train_centralized(model, x, y, TrainConfig(seed=5, max_epochs=8))
            results.append(flatten_params(model))
        np.testing.assert_array_equal(results[0], results[1])

    def test_early_stopping_restores_best(self):
        rng = np.random.default_rng(3)
        x, y = blobs(25, rng, spread=0.3)
        model = build(TOY_SPEC, make_rng(3, "init"))
        cfg = TrainConfig(seed=3, max_epochs=50, early_stop_patience=3)
        model, history = train_centralized(model, x, y, cfg)
        assert len(history) <= 50
        # recorded best epoch's validation loss is the minimum seen
        val_losses = [r.val_loss for r in history]
        assert min(val_losses) == pytest.approx(val_losses[int(np.argmin(val_losses))])

    def test_history_records_epochs(self):
        x, y = blobs(10, np.random.default_rng(4))
        model = build(TOY_SPEC, make_rng(4, "init"))
        _, history = train_centralized(
            model, x, y, TrainConfig(seed=4, max_epochs=6, early_stop_patience=None, val_fraction=0)
        )
        assert [r.epoch for r in history] == list(range(6))
        assert all(r.val_loss is None for r in history)


class TestLocalTrain:
    def test_zero_epochs_unchanged(self):
        x, y = blobs(10, np.random.default_rng(5))
        model = build(TOY_SPEC, make_rng(5, "init"))
        before = flatten_params(model)
        after = local_train(model, x, y, 0, TrainConfig(seed=0), make_rng(0, "c"))
        np.testing.assert_array_equal(after, before)

    def test_single_sample_client(self):
        model = build(TOY_SPEC, make_rng(6, "init"))
        params = local_train(
            model, np.array([[0.2, 0.8]]), np.array([1]), 2, TrainConfig(seed=0), make_rng(0, "c")
        )
        assert np.all(np.isfinite(params))

    def test_matches_centralized_without_early_stop(self):
        # same inner loop, same rng stream -> bit-identical weights
        x, y = blobs(16, np.random.default_rng(7))
        cfg = TrainConfig(seed=9, max_epochs=4, early_stop_patience=None, val_fraction=0)
        a = build(TOY_SPEC, make_rng(7, "init"))
        b = clone_model(a)
        params_local = local_train(a, x, y, 4, cfg, make_rng(42, "stream"))
        b, _ = train_centralized(b, x, y, cfg, rng=make_rng(42, "stream"))
        np.testing.assert_array_equal(params_local, flatten_params(b))

    def test_loss_decreases_on_blobs(self):
        x, y = blobs(20, np.random.default_rng(8))
        model = build(TOY_SPEC, make_rng(8, "init"))
        before = eval_loss(model, x, y)
        local_train(model, x, y, 5, TrainConfig(seed=0), make_rng(1, "c"))
        assert eval_loss(model, x, y) < before
