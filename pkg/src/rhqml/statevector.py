"""Dense statevector simulation of small qubit registers.

Amplitudes are stored as a flat complex128 array of length ``2**n_qubits``.
Qubit 0 is the **least-significant bit** of the basis-state index, so for
two qubits the basis order is ``|00>, |01>, |10>, |11>`` with the left bit
being qubit 1. Gate kernels operate on arrays of shape ``(..., 2**n)`` and
broadcast over leading batch axes; per-row rotation angles are supported,
which is what makes batched parameter-shift evaluation cheap.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError

MAX_QUBITS = 12


class PauliAxis(Enum):
    X = "X"
    Y = "Y"
    Z = "Z"


@dataclass(frozen=True)
class PauliObservable:
    """Single-qubit Pauli observable (axis, target qubit)."""

    axis: PauliAxis
    qubit: int


@dataclass
class StateVector:
    """Amplitudes of an ``n_qubits``-qubit register; single-owner mutable."""

    n_qubits: int
    amps: np.ndarray

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amps.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))


# -- cached index helpers (keyed by register size and qubit positions) --


@lru_cache(maxsize=None)
def _pair_indices(n: int, control: int, target: int) -> tuple[np.ndarray, np.ndarray]:
    """Indices (i0, i1) with control bit 1, differing only in the target bit."""
    basis = np.arange(1 << n)
    i0 = basis[((basis >> control) & 1 == 1) & ((basis >> target) & 1 == 0)]
    return i0, i0 | (1 << target)


@lru_cache(maxsize=None)
def _both_one_indices(n: int, a: int, b: int) -> np.ndarray:
    basis = np.arange(1 << n)
    return basis[((basis >> a) & 1 == 1) & ((basis >> b) & 1 == 1)]


@lru_cache(maxsize=None)
def _z_signs(n: int, qubit: int) -> np.ndarray:
    basis = np.arange(1 << n)
    return (1.0 - 2.0 * ((basis >> qubit) & 1)).astype(np.float64)


@lru_cache(maxsize=None)
def _bit_split_indices(n: int, qubit: int) -> tuple[np.ndarray, np.ndarray]:
    """Indices with the qubit's bit 0, and the same indices with the bit set."""
    basis = np.arange(1 << n)
    i0 = basis[(basis >> qubit) & 1 == 0]
    return i0, i0 | (1 << qubit)


def _bit_view(amps: np.ndarray, n: int, qubit: int) -> np.ndarray:
    """Reshape so axis -2 is the qubit's bit. Raises if amps is not contiguous."""
    view = amps.view()
    view.shape = amps.shape[:-1] + (1 << (n - qubit - 1), 2, 1 << qubit)
    return view


def _angle_axes(theta):
    """cos/sin of theta/2, shaped to broadcast over a _bit_view."""
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    if np.ndim(theta) > 0:
        c, s = c[..., None, None], s[..., None, None]
    return c, s


# -- batched kernels (in place on contiguous (..., 2**n) arrays) --


def ry_kernel(amps: np.ndarray, n: int, qubit: int, theta) -> None:
    c, s = _angle_axes(theta)
    view = _bit_view(amps, n, qubit)
    a0 = view[..., 0, :].copy()
    a1 = view[..., 1, :]
    view[..., 0, :] = c * a0 - s * a1
    view[..., 1, :] = s * a0 + c * a1


def rz_kernel(amps: np.ndarray, n: int, qubit: int, theta) -> None:
    half = np.asarray(theta) / 2.0
    phase = np.cos(half) - 1j * np.sin(half)  # e^{-i theta/2}
    if np.ndim(theta) > 0:
        phase = phase[..., None, None]
    view = _bit_view(amps, n, qubit)
    view[..., 0, :] *= phase
    view[..., 1, :] *= np.conj(phase)


def ryrz_kernel(amps: np.ndarray, n: int, qubit: int, theta_y, theta_z) -> None:
    """Fused Rz(theta_z) . Ry(theta_y) on one qubit; single pass over amps.

    Exactly equivalent to ry_kernel followed by rz_kernel; used by the
    batched circuit runner where the two rotations always appear paired.
    """
    c, s = _angle_axes(theta_y)
    half = np.asarray(theta_z) / 2.0
    phase = np.cos(half) - 1j * np.sin(half)  # e^{-i theta_z/2}
    if np.ndim(theta_z) > 0:
        phase = phase[..., None, None]
    view = _bit_view(amps, n, qubit)
    a0 = view[..., 0, :].copy()
    a1 = view[..., 1, :]
    view[..., 0, :] = phase * (c * a0 - s * a1)
    view[..., 1, :] = np.conj(phase) * (s * a0 + c * a1)


def cnot_kernel(amps: np.ndarray, n: int, control: int, target: int) -> None:
    i0, i1 = _pair_indices(n, control, target)
    tmp = amps[..., i0].copy()
    amps[..., i0] = amps[..., i1]
    amps[..., i1] = tmp


def cz_kernel(amps: np.ndarray, n: int, a: int, b: int) -> None:
    amps[..., _both_one_indices(n, a, b)] *= -1.0


def expectation_kernel(amps: np.ndarray, n: int, obs: PauliObservable) -> np.ndarray:
    """Exact expectation value(s), shape = batch shape of ``amps``."""
    if obs.axis is PauliAxis.Z:
        # elementwise multiply + sum keeps the reduction order independent
        # of the batch shape (no BLAS dispatch), so results are bit-stable
        return ((np.abs(amps) ** 2) * _z_signs(n, obs.qubit)).sum(axis=-1)
    i0, i1 = _bit_split_indices(n, obs.qubit)
    cross = np.conj(amps[..., i0]) * amps[..., i1]
    if obs.axis is PauliAxis.X:
        return 2.0 * cross.real.sum(axis=-1)
    return 2.0 * cross.imag.sum(axis=-1)


# -- single-state API --


def _check_qubit(state: StateVector, qubit: int) -> None:
    if not 0 <= qubit < state.n_qubits:
        raise IndexError(f"qubit {qubit} out of range for {state.n_qubits}-qubit state")


def init_zero_state(n_qubits: int) -> StateVector:
    """|0...0> on ``n_qubits`` qubits."""
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise ConfigurationError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(n_qubits, amps)


def apply_ry(state: StateVector, qubit: int, theta: float) -> StateVector:
    """Rotate the target qubit by theta around Y."""
    _check_qubit(state, qubit)
    ry_kernel(state.amps, state.n_qubits, qubit, theta)
    return state


def apply_rz(state: StateVector, qubit: int, theta: float) -> StateVector:
    """Phase-rotate the target qubit by theta around Z."""
    _check_qubit(state, qubit)
    rz_kernel(state.amps, state.n_qubits, qubit, theta)
    return state


def apply_cnot(state: StateVector, control: int, target: int) -> StateVector:
    """Flip the target bit where the control bit is 1."""
    if control == target:
        raise ConfigurationError("CNOT control and target must differ")
    _check_qubit(state, control)
    _check_qubit(state, target)
    cnot_kernel(state.amps, state.n_qubits, control, target)
    return state


def apply_cz(state: StateVector, a: int, b: int) -> StateVector:
    """Negate amplitudes of basis states with both bits set; symmetric in (a, b)."""
    if a == b:
        raise ConfigurationError("CZ qubits must differ")
    _check_qubit(state, a)
    _check_qubit(state, b)
    cz_kernel(state.amps, state.n_qubits, a, b)
    return state


def expectation(state: StateVector, obs: PauliObservable) -> float:
    """<psi| P |psi> for a single-qubit Pauli P; always a real in [-1, 1]."""
    _check_qubit(state, obs.qubit)
    return float(expectation_kernel(state.amps, state.n_qubits, obs))
