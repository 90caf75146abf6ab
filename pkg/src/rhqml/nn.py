"""Minimal dense network stack with exact reverse-mode gradients.

Only what the model zoo needs: affine layers, ReLU, inverted dropout,
softmax cross-entropy, and Adam on a flat parameter vector. Everything is
float64 numpy; gradients are hand-derived and checked against finite
differences in the test suite.

Flat parameter order is canonical everywhere: layers in order, each as
row-major weights followed by bias (when present). Serialization is the
flat vector as little-endian 8-byte reals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DataError, UsageError


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray | None = None  # (out,)

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def n_params(self) -> int:
        return self.weights.size + (self.bias.size if self.bias is not None else 0)


@dataclass
class MlpHead:
    """Affine -> ReLU -> dropout stacks, final layer affine only."""

    layers: list[DenseLayer]
    dropout_rate: float = 0.1

    def __post_init__(self):
        for a, b in zip(self.layers, self.layers[1:]):
            if b.in_dim != a.out_dim:
                raise ConfigurationError(
                    f"layer dims do not chain: {a.out_dim} -> {b.in_dim}"
                )
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigurationError("dropout_rate must be in [0, 1)")

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def n_params(self) -> int:
        return sum(layer.n_params for layer in self.layers)


def glorot_layer(out_dim: int, in_dim: int, rng: np.random.Generator,
                 bias: bool = True) -> DenseLayer:
    """Uniform(-sqrt(6/(in+out)), +sqrt(6/(in+out))) weights, zero bias."""
    bound = np.sqrt(6.0 / (in_dim + out_dim))
    w = rng.uniform(-bound, bound, size=(out_dim, in_dim))
    return DenseLayer(w, np.zeros(out_dim) if bias else None)


def make_mlp(dims: list[int], rng: np.random.Generator,
             dropout_rate: float = 0.1) -> MlpHead:
    """MLP with the given dim chain, e.g. [8, 16, 3] -> two affine layers."""
    layers = [glorot_layer(o, i, rng) for i, o in zip(dims[:-1], dims[1:])]
    return MlpHead(layers, dropout_rate)


def forward(head: MlpHead, x: np.ndarray, train_mode: bool = False,
            rng: np.random.Generator | None = None):
    """Run the head on one sample; returns (output, cache for backward)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (head.in_dim,):
        raise ConfigurationError(f"input dim {x.shape} != expected ({head.in_dim},)")
    inputs, relu_in, drop_masks = [], [], []
    h = x
    last = len(head.layers) - 1
    for i, layer in enumerate(head.layers):
        inputs.append(h)
        z = layer.weights @ h
        if layer.bias is not None:
            z = z + layer.bias
        if i < last:
            relu_in.append(z)
            h = np.maximum(z, 0.0)
            if train_mode and head.dropout_rate > 0.0:
                # inverted dropout: expectation equals the undropped activations
                keep = rng.random(h.shape) >= head.dropout_rate
                mask = keep / (1.0 - head.dropout_rate)
                h = h * mask
                drop_masks.append(mask)
            else:
                drop_masks.append(None)
        else:
            h = z
    cache = {
        "inputs": inputs,
        "relu_in": relu_in,
        "drop_masks": drop_masks,
        "n_layers": len(head.layers),
        "out_dim": head.out_dim,
    }
    return h, cache


def backward(head: MlpHead, cache: dict, dout: np.ndarray):
    """Exact gradients from a forward cache; returns (flat param grads, dinput)."""
    dout = np.asarray(dout, dtype=np.float64)
    if cache.get("n_layers") != len(head.layers) or dout.shape != (cache.get("out_dim"),):
        raise UsageError("backward called with a cache that does not match this head")
    per_layer = [None] * len(head.layers)
    delta = dout
    for i in reversed(range(len(head.layers))):
        layer = head.layers[i]
        x_in = cache["inputs"][i]
        dw = np.outer(delta, x_in)
        db = delta.copy() if layer.bias is not None else None
        dx = layer.weights.T @ delta
        per_layer[i] = (dw, db)
        if i > 0:
            mask = cache["drop_masks"][i - 1]
            if mask is not None:
                dx = dx * mask
            dx = dx * (cache["relu_in"][i - 1] > 0.0)
        delta = dx
    chunks = []
    for dw, db in per_layer:
        chunks.append(dw.ravel())
        if db is not None:
            chunks.append(db)
    return np.concatenate(chunks), delta


def loss_softmax_ce(logits: np.ndarray, label: int):
    """Cross-entropy of softmax(logits) at the true label; returns (loss, dlogits)."""
    logits = np.asarray(logits, dtype=np.float64)
    c = logits.shape[0]
    if c < 2:
        raise ConfigurationError("need at least 2 classes")
    if not 0 <= label < c:
        raise DataError(f"label {label} out of range for {c} classes")
    z = logits - logits.max()
    lse = np.log(np.exp(z).sum())
    probs = np.exp(z - lse)
    dlogits = probs.copy()
    dlogits[label] -= 1.0
    return float(lse - z[label]), dlogits


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


# -- flat parameter views --


def flatten_layers(layers: list[DenseLayer]) -> np.ndarray:
    chunks = []
    for layer in layers:
        chunks.append(layer.weights.ravel())
        if layer.bias is not None:
            chunks.append(layer.bias)
    return np.concatenate(chunks) if chunks else np.zeros(0)


def unflatten_layers(layers: list[DenseLayer], vec: np.ndarray) -> None:
    """Write a flat vector back into the layers (in place)."""
    expected = sum(layer.n_params for layer in layers)
    if vec.shape != (expected,):
        raise UsageError(f"flat vector length {vec.shape} != expected ({expected},)")
    pos = 0
    for layer in layers:
        k = layer.weights.size
        layer.weights[...] = vec[pos : pos + k].reshape(layer.weights.shape)
        pos += k
        if layer.bias is not None:
            layer.bias[...] = vec[pos : pos + layer.bias.size]
            pos += layer.bias.size


def params_to_bytes(vec: np.ndarray) -> bytes:
    """Canonical wire format: 8-byte little-endian reals in flat order."""
    return np.ascontiguousarray(vec, dtype="<f8").tobytes()


def bytes_to_params(blob: bytes) -> np.ndarray:
    return np.frombuffer(blob, dtype="<f8").astype(np.float64)


# -- Adam --


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, n_params: int, lr: float = 0.01, beta1: float = 0.9,
             beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(np.zeros(n_params), np.zeros(n_params), 0, lr, beta1, beta2, eps)


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState) -> np.ndarray:
    """One Adam update with bias correction; mutates state, returns new params."""
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise UsageError("params/grads/state length mismatch")
    state.step += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads**2
    m_hat = state.m / (1.0 - state.beta1**state.step)
    v_hat = state.v / (1.0 - state.beta2**state.step)
    return params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
