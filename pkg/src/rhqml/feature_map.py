"""Quantum feature extraction: angle encoding, variational layers, readout.

The circuit family is fixed: an encoding stage loading features as Ry
angles with a CNOT chain after each sub-layer, then ``n_layers`` trainable
blocks of per-qubit Ry/Rz rotations followed by an entangler chain, then
single-qubit Pauli expectations as the feature vector.

When the input has more features than qubits, the angles are consumed in
chunks of ``n_qubits`` (re-uploading): every chunk gets its own Ry
sub-layer and CNOT chain, so all features reach the circuit.

Gradients use the shift rule, exact for Ry/Rz: dQ/dtheta =
(Q(theta + pi/2) - Q(theta - pi/2)) / 2. All shifted evaluations for a
batch run as one vectorized pass over stacked amplitude rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigurationError, DataError
from .statevector import (
    PauliAxis,
    PauliObservable,
    StateVector,
    apply_cnot,
    apply_cz,
    apply_ry,
    apply_rz,
    cnot_kernel,
    cz_kernel,
    expectation_kernel,
    ry_kernel,
    ryrz_kernel,
    rz_kernel,
)


class Squash(Enum):
    PI_TANH = "pi_tanh"
    MINMAX_TO_PI = "minmax_to_pi"


class Entangler(Enum):
    CZ_CHAIN = "cz_chain"
    CNOT_CHAIN = "cnot_chain"


@dataclass(frozen=True)
class EncodingSpec:
    input_dim: int
    n_qubits: int = 6
    squash: Squash = Squash.PI_TANH

    def __post_init__(self):
        if self.n_qubits < 1 or self.input_dim < 1:
            raise ConfigurationError("n_qubits and input_dim must be >= 1")


@dataclass
class VariationalSpec:
    """Trainable block structure plus its current angles."""

    n_qubits: int
    n_layers: int
    entangler: Entangler = Entangler.CZ_CHAIN
    params: np.ndarray = field(default=None)  # shape (n_layers * n_qubits * 2,)

    def __post_init__(self):
        if self.params is None:
            self.params = np.zeros(self.n_params)
        self.params = np.asarray(self.params, dtype=np.float64)
        if self.params.shape != (self.n_params,):
            raise ConfigurationError(
                f"expected {self.n_params} variational params, got {self.params.shape}"
            )

    @property
    def n_params(self) -> int:
        return self.n_layers * self.n_qubits * 2


@dataclass(frozen=True)
class MeasurementSpec:
    observables: tuple[PauliObservable, ...]

    @classmethod
    def z_basis(cls, n_qubits: int) -> "MeasurementSpec":
        return cls(tuple(PauliObservable(PauliAxis.Z, q) for q in range(n_qubits)))

    @classmethod
    def z_and_x(cls, n_qubits: int) -> "MeasurementSpec":
        zs = tuple(PauliObservable(PauliAxis.Z, q) for q in range(n_qubits))
        xs = tuple(PauliObservable(PauliAxis.X, q) for q in range(n_qubits))
        return cls(zs + xs)

    @property
    def n_features(self) -> int:
        return len(self.observables)


def squash_input(x: np.ndarray, spec: EncodingSpec) -> np.ndarray:
    """Map raw features to rotation angles in [-pi, pi]."""
    x = np.asarray(x, dtype=np.float64)
    if np.isnan(x).any():
        raise DataError("NaN in encoder input")
    if spec.squash is Squash.PI_TANH:
        return np.pi * np.tanh(x)
    # linear map of [0, 1] onto [-pi, pi]; out-of-range values are clipped
    return np.clip(np.pi * (2.0 * x - 1.0), -np.pi, np.pi)


def squash_derivative(x: np.ndarray, spec: EncodingSpec) -> np.ndarray:
    """d(angle)/dx, elementwise."""
    x = np.asarray(x, dtype=np.float64)
    if spec.squash is Squash.PI_TANH:
        return np.pi * (1.0 - np.tanh(x) ** 2)
    inside = (x >= 0.0) & (x <= 1.0)
    return np.where(inside, 2.0 * np.pi, 0.0)


# -- single-state circuit stages (compose the public statevector ops) --


def encode(state: StateVector, angles: np.ndarray, spec: EncodingSpec) -> StateVector:
    """Ry sub-layer + CNOT chain per chunk of n_qubits angles."""
    n = spec.n_qubits
    angles = np.asarray(angles, dtype=np.float64)
    for start in range(0, len(angles), n):
        chunk = angles[start : start + n]
        for q, theta in enumerate(chunk):
            apply_ry(state, q, float(theta))
        for j in range(n - 1):
            apply_cnot(state, j, j + 1)
    return state


def apply_variational(state: StateVector, spec: VariationalSpec) -> StateVector:
    """Per layer: Ry then Rz on every qubit, then the entangler chain."""
    n = spec.n_qubits
    phi = spec.params.reshape(spec.n_layers, n, 2)
    for layer in range(spec.n_layers):
        for q in range(n):
            apply_ry(state, q, float(phi[layer, q, 0]))
        for q in range(n):
            apply_rz(state, q, float(phi[layer, q, 1]))
        for j in range(n - 1):
            if spec.entangler is Entangler.CZ_CHAIN:
                apply_cz(state, j, j + 1)
            else:
                apply_cnot(state, j, j + 1)
    return state


# -- batched circuit core --


def _encode_rows(angle_rows: np.ndarray, enc: EncodingSpec) -> np.ndarray:
    """Amplitudes after the encoding stage for R rows of angles."""
    n = enc.n_qubits
    rows = angle_rows.shape[0]
    amps = np.zeros((rows, 1 << n), dtype=np.complex128)
    amps[:, 0] = 1.0
    d = angle_rows.shape[1]
    for start in range(0, d, n):
        chunk = angle_rows[:, start : start + n]
        for q in range(chunk.shape[1]):
            ry_kernel(amps, n, q, chunk[:, q])
        for j in range(n - 1):
            cnot_kernel(amps, n, j, j + 1)
    return amps


def _variational_rows(amps: np.ndarray, phi_rows: np.ndarray, var: VariationalSpec) -> None:
    n = var.n_qubits
    phi3 = phi_rows.reshape(amps.shape[0], var.n_layers, n, 2)
    for layer in range(var.n_layers):
        for q in range(n):
            # Ry then Rz on the same qubit, applied as one fused pass
            ryrz_kernel(amps, n, q, phi3[:, layer, q, 0], phi3[:, layer, q, 1])
        for j in range(n - 1):
            if var.entangler is Entangler.CZ_CHAIN:
                cz_kernel(amps, n, j, j + 1)
            else:
                cnot_kernel(amps, n, j, j + 1)


def _measure_rows(amps: np.ndarray, n: int, meas: MeasurementSpec) -> np.ndarray:
    return np.stack(
        [expectation_kernel(amps, n, obs) for obs in meas.observables], axis=-1
    )


def _run_rows(
    angle_rows: np.ndarray,
    phi_rows: np.ndarray,
    enc: EncodingSpec,
    var: VariationalSpec,
    meas: MeasurementSpec,
) -> np.ndarray:
    """Run the full circuit on R independent rows; returns (R, m) features."""
    amps = _encode_rows(angle_rows, enc)
    _variational_rows(amps, phi_rows, var)
    return _measure_rows(amps, enc.n_qubits, meas)


def _check_specs(enc: EncodingSpec, var: VariationalSpec) -> None:
    if enc.n_qubits != var.n_qubits:
        raise ConfigurationError("encoding and variational qubit counts differ")


def quantum_forward_batch(
    xs: np.ndarray, enc: EncodingSpec, var: VariationalSpec, meas: MeasurementSpec
) -> np.ndarray:
    """Feature vectors for a batch of inputs, shape (N, m)."""
    _check_specs(enc, var)
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    angles = squash_input(xs, enc)
    phis = np.broadcast_to(var.params, (xs.shape[0], var.n_params))
    return _run_rows(angles, phis, enc, var, meas)


def quantum_forward(
    x: np.ndarray, enc: EncodingSpec, var: VariationalSpec, meas: MeasurementSpec
) -> np.ndarray:
    """Feature vector Q(x), shape (m,), every entry in [-1, 1]."""
    return quantum_forward_batch(np.asarray(x)[None, :], enc, var, meas)[0]


def param_shift_grad_batch(
    xs: np.ndarray, enc: EncodingSpec, var: VariationalSpec, meas: MeasurementSpec
) -> tuple[np.ndarray, np.ndarray]:
    """Features and their Jacobian w.r.t. the variational angles.

    Returns ``(Q, jac)`` with shapes (N, m) and (N, m, P). Runs the base
    circuit plus both shifts of every parameter as one stacked pass.
    """
    _check_specs(enc, var)
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    n_samples = xs.shape[0]
    p = var.n_params
    m = meas.n_features

    variants = np.broadcast_to(var.params, (2 * p + 1, p)).copy()
    idx = np.arange(p)
    variants[1 + 2 * idx, idx] += np.pi / 2
    variants[2 + 2 * idx, idx] -= np.pi / 2

    # the encoding stage does not depend on phi: run it once per sample and
    # fan the amplitudes out across all 2P+1 shift variants
    encoded = _encode_rows(squash_input(xs, enc), enc)
    amps = np.repeat(encoded, 2 * p + 1, axis=0)
    phi_rows = np.tile(variants, (n_samples, 1))
    _variational_rows(amps, phi_rows, var)
    out = _measure_rows(amps, enc.n_qubits, meas).reshape(n_samples, 2 * p + 1, m)
    q = out[:, 0, :]
    jac = 0.5 * (out[:, 1::2, :] - out[:, 2::2, :])  # (N, P, m)
    return q, np.swapaxes(jac, 1, 2)


def param_shift_grad(
    x: np.ndarray, enc: EncodingSpec, var: VariationalSpec, meas: MeasurementSpec
) -> np.ndarray:
    """Jacobian dQ/dphi for one input, shape (m, P)."""
    _, jac = param_shift_grad_batch(np.asarray(x)[None, :], enc, var, meas)
    return jac[0]


def input_grad(
    x: np.ndarray, enc: EncodingSpec, var: VariationalSpec, meas: MeasurementSpec
) -> np.ndarray:
    """Jacobian dQ/dx, shape (m, d).

    Each feature controls exactly one encoding Ry gate, so the shift rule
    applies to its angle; the squash derivative supplies the chain-rule
    factor.
    """
    _check_specs(enc, var)
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[0]
    m = meas.n_features
    base = squash_input(x, enc)
    angle_rows = np.broadcast_to(base, (2 * d, d)).copy()
    idx = np.arange(d)
    angle_rows[2 * idx, idx] += np.pi / 2
    angle_rows[2 * idx + 1, idx] -= np.pi / 2
    phis = np.broadcast_to(var.params, (2 * d, var.n_params))
    out = _run_rows(angle_rows, phis, enc, var, meas)  # (2d, m)
    dq_dangle = 0.5 * (out[0::2, :] - out[1::2, :])  # (d, m)
    return dq_dangle.T * squash_derivative(x, enc)[None, :]


@dataclass
class QuantumFeatureExtractor:
    """Bundles the three specs; the trainable state is ``var.params``."""

    enc: EncodingSpec
    var: VariationalSpec
    meas: MeasurementSpec

    @property
    def n_features(self) -> int:
        return self.meas.n_features

    @property
    def n_params(self) -> int:
        return self.var.n_params

    def forward_batch(self, xs: np.ndarray) -> np.ndarray:
        return quantum_forward_batch(xs, self.enc, self.var, self.meas)

    def forward_and_jacobian(self, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return param_shift_grad_batch(xs, self.enc, self.var, self.meas)

    def clone(self) -> "QuantumFeatureExtractor":
        var = VariationalSpec(
            self.var.n_qubits, self.var.n_layers, self.var.entangler, self.var.params.copy()
        )
        return QuantumFeatureExtractor(self.enc, var, self.meas)
