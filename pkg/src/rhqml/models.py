"""The four benchmark architectures and their ablation variants.

All models share one trainable-parameter convention: a flat float64 vector
in the order [variational angles | projection weights | head layers], which
is what the optimizer, the aggregation code, and the wire-format accounting
operate on.

Architectures:
  * classical        - MLP straight on the input.
  * pure quantum     - circuit features into a single linear layer.
  * original hybrid  - circuit features into an MLP.
  * residual hybrid  - input concatenated with circuit features, projected
                       by a bias-free linear map, then an MLP.

Hidden widths and the projection width are config values; the defaults
below were fixed once per dataset so that parameter counts line up with the
intended ordering (pure quantum < original hybrid < residual < classical <
residual-deep). Every results table reports the counts actually used.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, UsageError
from .feature_map import (
    EncodingSpec,
    Entangler,
    MeasurementSpec,
    QuantumFeatureExtractor,
    Squash,
    VariationalSpec,
)
from .nn import (
    DenseLayer,
    MlpHead,
    backward,
    flatten_layers,
    forward,
    glorot_layer,
    loss_softmax_ce,
    make_mlp,
    unflatten_layers,
)


class ArchKind(Enum):
    CLASSICAL = "classical"
    PURE_QUANTUM = "pure_quantum"
    ORIGINAL_HYBRID = "original_hybrid"
    RESIDUAL_HYBRID = "residual_hybrid"


class Variant(Enum):
    BASE = "base"
    MULTI_BASIS = "multi_basis"
    DEEP = "deep"


@dataclass(frozen=True)
class ArchitectureSpec:
    kind: ArchKind
    input_dim: int
    n_classes: int
    n_qubits: int = 6
    n_circuit_layers: int = 3
    variant: Variant = Variant.BASE
    projection_dim: int = 8
    hidden_dims: tuple[int, ...] = (16,)
    entangler: Entangler = Entangler.CZ_CHAIN
    squash: Squash = Squash.PI_TANH
    dropout_rate: float = 0.1

    def __post_init__(self):
        if self.input_dim < 1 or self.n_classes < 2:
            raise ConfigurationError("need input_dim >= 1 and n_classes >= 2")

    @property
    def n_measured(self) -> int:
        if self.kind is ArchKind.CLASSICAL:
            return 0
        base = self.n_qubits
        return 2 * base if self.variant is Variant.MULTI_BASIS else base

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "input_dim": self.input_dim,
            "n_classes": self.n_classes,
            "n_qubits": self.n_qubits,
            "n_circuit_layers": self.n_circuit_layers,
            "variant": self.variant.value,
            "projection_dim": self.projection_dim,
            "hidden_dims": list(self.hidden_dims),
            "entangler": self.entangler.value,
            "squash": self.squash.value,
            "dropout_rate": self.dropout_rate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArchitectureSpec":
        return cls(
            kind=ArchKind(d["kind"]),
            input_dim=int(d["input_dim"]),
            n_classes=int(d["n_classes"]),
            n_qubits=int(d.get("n_qubits", 6)),
            n_circuit_layers=int(d.get("n_circuit_layers", 3)),
            variant=Variant(d.get("variant", "base")),
            projection_dim=int(d.get("projection_dim", 8)),
            hidden_dims=tuple(d.get("hidden_dims", (16,))),
            entangler=Entangler(d.get("entangler", "cz_chain")),
            squash=Squash(d.get("squash", "pi_tanh")),
            dropout_rate=float(d.get("dropout_rate", 0.1)),
        )


# widths fixed once per dataset; breast_cancer needs a wider classical MLP
# to keep its count above the residual model's
_CLASSICAL_HIDDEN = {"breast_cancer": (28,)}
_DEFAULT_CLASSICAL_HIDDEN = (26,)
_HYBRID_HIDDEN = (26,)
_RESIDUAL_HIDDEN = (16,)


def arch_for_dataset(
    kind: ArchKind,
    input_dim: int,
    n_classes: int,
    dataset_name: str = "",
    variant: Variant = Variant.BASE,
    n_qubits: int = 6,
) -> ArchitectureSpec:
    """Reference architecture config for a dataset's dimensions."""
    if kind is ArchKind.CLASSICAL:
        hidden = _CLASSICAL_HIDDEN.get(dataset_name, _DEFAULT_CLASSICAL_HIDDEN)
        return ArchitectureSpec(kind, input_dim, n_classes, hidden_dims=hidden)
    if kind is ArchKind.ORIGINAL_HYBRID:
        return ArchitectureSpec(
            kind, input_dim, n_classes, n_qubits=n_qubits, hidden_dims=_HYBRID_HIDDEN
        )
    if kind is ArchKind.PURE_QUANTUM:
        return ArchitectureSpec(kind, input_dim, n_classes, n_qubits=n_qubits, hidden_dims=())
    k = 10 if n_qubits == 8 else 8
    return ArchitectureSpec(
        kind,
        input_dim,
        n_classes,
        n_qubits=n_qubits,
        variant=variant,
        projection_dim=k,
        hidden_dims=_RESIDUAL_HIDDEN,
    )


@dataclass
class HybridModel:
    spec: ArchitectureSpec
    quantum: QuantumFeatureExtractor | None
    projection: DenseLayer | None
    head: MlpHead

    @property
    def n_params(self) -> int:
        total = self.head.n_params
        if self.projection is not None:
            total += self.projection.n_params
        if self.quantum is not None:
            total += self.quantum.n_params
        return total


def build(spec: ArchitectureSpec, rng: np.random.Generator) -> HybridModel:
    """Instantiate a model with freshly initialized parameters."""
    quantum = None
    projection = None
    hidden = list(spec.hidden_dims)
    if spec.variant is Variant.DEEP:
        hidden = hidden + [hidden[-1] if hidden else 16]

    if spec.kind is not ArchKind.CLASSICAL:
        enc = EncodingSpec(spec.input_dim, spec.n_qubits, spec.squash)
        var = VariationalSpec(
            spec.n_qubits,
            spec.n_circuit_layers,
            spec.entangler,
            rng.uniform(-np.pi, np.pi, size=spec.n_circuit_layers * spec.n_qubits * 2),
        )
        meas = (
            MeasurementSpec.z_and_x(spec.n_qubits)
            if spec.variant is Variant.MULTI_BASIS
            else MeasurementSpec.z_basis(spec.n_qubits)
        )
        quantum = QuantumFeatureExtractor(enc, var, meas)

    if spec.kind is ArchKind.CLASSICAL:
        head_in = spec.input_dim
    elif spec.kind is ArchKind.RESIDUAL_HYBRID:
        projection = glorot_layer(
            spec.projection_dim, spec.input_dim + spec.n_measured, rng, bias=False
        )
        head_in = spec.projection_dim
    else:
        head_in = spec.n_measured

    if spec.kind is ArchKind.PURE_QUANTUM:
        head = MlpHead([glorot_layer(spec.n_classes, head_in, rng)], spec.dropout_rate)
    else:
        head = make_mlp([head_in] + hidden + [spec.n_classes], rng, spec.dropout_rate)
    return HybridModel(spec, quantum, projection, head)


def clone_model(model: HybridModel) -> HybridModel:
    quantum = model.quantum.clone() if model.quantum is not None else None
    projection = None
    if model.projection is not None:
        projection = DenseLayer(model.projection.weights.copy(), None)
    head = MlpHead(
        [
            DenseLayer(l.weights.copy(), None if l.bias is None else l.bias.copy())
            for l in model.head.layers
        ],
        model.head.dropout_rate,
    )
    return HybridModel(model.spec, quantum, projection, head)


def count_params(model: HybridModel) -> int:
    return model.n_params


# -- flat parameter view over the whole model --


def flatten_params(model: HybridModel) -> np.ndarray:
    chunks = []
    if model.quantum is not None:
        chunks.append(model.quantum.var.params.copy())
    if model.projection is not None:
        chunks.append(model.projection.weights.ravel().copy())
    chunks.append(flatten_layers(model.head.layers))
    return np.concatenate(chunks)


def unflatten_params(model: HybridModel, vec: np.ndarray) -> None:
    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape != (model.n_params,):
        raise UsageError(f"flat vector length {vec.shape} != model size ({model.n_params},)")
    pos = 0
    if model.quantum is not None:
        p = model.quantum.n_params
        model.quantum.var.params[...] = vec[pos : pos + p]
        pos += p
    if model.projection is not None:
        k = model.projection.weights.size
        model.projection.weights[...] = vec[pos : pos + k].reshape(model.projection.weights.shape)
        pos += k
    unflatten_layers(model.head.layers, vec[pos:])


# -- forward / gradients --


def _head_inputs(model: HybridModel, xs: np.ndarray, q: np.ndarray | None) -> np.ndarray:
    """Per-sample inputs to the projection/head stage, shape (N, *)."""
    kind = model.spec.kind
    if kind is ArchKind.CLASSICAL:
        return xs
    if kind is ArchKind.RESIDUAL_HYBRID:
        return np.concatenate([xs, q], axis=1)  # input first, then circuit features
    return q


def forward_batch(
    model: HybridModel,
    xs: np.ndarray,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Logits for a batch, shape (N, n_classes)."""
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    q = model.quantum.forward_batch(xs) if model.quantum is not None else None
    zs = _head_inputs(model, xs, q)
    out = np.empty((xs.shape[0], model.spec.n_classes))
    for i in range(xs.shape[0]):
        z = zs[i]
        if model.projection is not None:
            z = model.projection.weights @ z
        out[i], _ = forward(model.head, z, train_mode, rng)
    return out


def model_forward(
    model: HybridModel,
    x: np.ndarray,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Logits for a single sample, shape (n_classes,)."""
    return forward_batch(model, np.asarray(x)[None, :], train_mode, rng)[0]


def predict(model: HybridModel, xs: np.ndarray) -> np.ndarray:
    return forward_batch(model, xs).argmax(axis=1)


def accuracy(model: HybridModel, xs: np.ndarray, ys: np.ndarray) -> float:
    return float((predict(model, xs) == np.asarray(ys)).mean())


def per_sample_grads(
    model: HybridModel,
    xs: np.ndarray,
    ys: np.ndarray,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Loss and full flat gradient for every sample: ((N,), (N, n_params)).

    Circuit gradients come from the shift rule and are chained with the
    classifier's input gradient: dL/dphi = (dQ/dphi)^T dL/dQ. All shifted
    circuit evaluations for the batch run as one stacked pass.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    ys = np.asarray(ys)
    n = xs.shape[0]
    if n == 0:
        raise UsageError("empty batch")
    q = jac = None
    if model.quantum is not None:
        q, jac = model.quantum.forward_and_jacobian(xs)
    zs = _head_inputs(model, xs, q)
    d = model.spec.input_dim
    losses = np.empty(n)
    grads = np.empty((n, model.n_params))
    for i in range(n):
        z = zs[i]
        if model.projection is not None:
            proj_in = z
            z = model.projection.weights @ z
        logits, cache = forward(model.head, z, train_mode, rng)
        losses[i], dlogits = loss_softmax_ce(logits, int(ys[i]))
        head_grads, dz = backward(model.head, cache, dlogits)
        parts = []
        if model.projection is not None:
            dproj = np.outer(dz, proj_in)
            dz = model.projection.weights.T @ dz
            parts.append(dproj.ravel())
        if model.quantum is not None:
            dq = dz if model.spec.kind is not ArchKind.RESIDUAL_HYBRID else dz[d:]
            dphi = jac[i].T @ dq
            parts.insert(0, dphi)
        parts.append(head_grads)
        grads[i] = np.concatenate(parts)
    return losses, grads


def model_grad(
    model: HybridModel,
    batch_x: np.ndarray,
    batch_y: np.ndarray,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[float, np.ndarray]:
    """Mean loss and mean flat gradient over a batch."""
    losses, grads = per_sample_grads(model, batch_x, batch_y, train_mode, rng)
    return float(losses.mean()), grads.mean(axis=0)


def ablate_bypass(model: HybridModel, rng: np.random.Generator) -> HybridModel:
    """Drop the input bypass: same circuit block, head fed by Q(x) alone."""
    if model.spec.kind is not ArchKind.RESIDUAL_HYBRID:
        raise UsageError("bypass ablation only applies to residual hybrid models")
    spec = replace(
        model.spec,
        kind=ArchKind.ORIGINAL_HYBRID,
        variant=Variant.BASE if model.spec.variant is Variant.MULTI_BASIS else model.spec.variant,
    )
    ablated = build(spec, rng)
    ablated.quantum = model.quantum.clone()
    if model.spec.variant is Variant.MULTI_BASIS:
        ablated.quantum = QuantumFeatureExtractor(
            ablated.quantum.enc, ablated.quantum.var, MeasurementSpec.z_basis(spec.n_qubits)
        )
    return ablated


# -- checkpoints: structured spec + canonical parameter blob --


def save_checkpoint(model: HybridModel, stem: str | Path) -> tuple[Path, Path]:
    from .nn import params_to_bytes

    stem = Path(stem)
    arch_path = stem.with_suffix(".arch.json")
    blob_path = stem.with_suffix(".params.bin")
    arch_path.write_text(json.dumps(model.spec.to_dict(), indent=2, sort_keys=True))
    blob_path.write_bytes(params_to_bytes(flatten_params(model)))
    return arch_path, blob_path


def load_checkpoint(stem: str | Path) -> HybridModel:
    from .nn import bytes_to_params

    stem = Path(stem)
    spec = ArchitectureSpec.from_dict(json.loads(stem.with_suffix(".arch.json").read_text()))
    model = build(spec, np.random.default_rng(0))
    unflatten_params(model, bytes_to_params(stem.with_suffix(".params.bin").read_bytes()))
    return model
