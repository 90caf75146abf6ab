import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rhqml.errors import ConfigurationError, DataError
from rhqml.feature_map import (
    EncodingSpec,
    Entangler,
    MeasurementSpec,
    Squash,
    VariationalSpec,
    apply_variational,
    encode,
    input_grad,
    param_shift_grad,
    param_shift_grad_batch,
    quantum_forward,
    quantum_forward_batch,
    squash_input,
)
from rhqml.statevector import expectation, init_zero_state

import dense_oracle as oracle
from finite_diff import central_diff


def make_specs(n_qubits, input_dim, n_layers, phi=None, entangler=Entangler.CZ_CHAIN,
               multi_basis=False, squash=Squash.PI_TANH):
    enc = EncodingSpec(input_dim=input_dim, n_qubits=n_qubits, squash=squash)
    var = VariationalSpec(n_qubits, n_layers, entangler, phi)
    meas = MeasurementSpec.z_and_x(n_qubits) if multi_basis else MeasurementSpec.z_basis(n_qubits)
    return enc, var, meas


def circuit_gate_list(angles, enc, var):
    """The same circuit as a dense-oracle gate list, built independently."""
    n = enc.n_qubits
    ops = []
    for start in range(0, len(angles), n):
        chunk = angles[start : start + n]
        ops += [("ry", q, float(t)) for q, t in enumerate(chunk)]
        ops += [("cnot", j, j + 1) for j in range(n - 1)]
    phi = var.params.reshape(var.n_layers, n, 2)
    ent = "cz" if var.entangler is Entangler.CZ_CHAIN else "cnot"
    for layer in range(var.n_layers):
        ops += [("ry", q, float(phi[layer, q, 0])) for q in range(n)]
        ops += [("rz", q, float(phi[layer, q, 1])) for q in range(n)]
        ops += [(ent, j, j + 1) for j in range(n - 1)]
    return ops


class TestSquash:
    def test_zero_maps_to_zero(self):
        enc = EncodingSpec(input_dim=3)
        np.testing.assert_array_equal(squash_input(np.zeros(3), enc), np.zeros(3))

    def test_saturates_toward_pi(self):
        enc = EncodingSpec(input_dim=1)
        out = squash_input(np.array([50.0]), enc)
        assert out[0] == pytest.approx(np.pi, abs=1e-12)
        assert out[0] <= np.pi

    def test_unit_input_value(self):
        # pi * tanh(1) = 2.39261860..., frozen from math.pi * math.tanh(1.0)
        enc = EncodingSpec(input_dim=1)
        out = squash_input(np.array([1.0]), enc)
        assert out[0] == pytest.approx(2.39261860536755, abs=1e-12)
        assert out[0] == pytest.approx(math.pi * math.tanh(1.0), abs=0)

    def test_nan_rejected(self):
        enc = EncodingSpec(input_dim=2)
        with pytest.raises(DataError):
            squash_input(np.array([0.1, np.nan]), enc)

    def test_minmax_mode_bounds(self):
        enc = EncodingSpec(input_dim=4, squash=Squash.MINMAX_TO_PI)
        out = squash_input(np.array([0.0, 0.5, 1.0, 1.7]), enc)
        np.testing.assert_allclose(out, [-np.pi, 0.0, np.pi, np.pi], atol=1e-12)

    @settings(max_examples=50)
    @given(arrays(np.float64, 5, elements=st.floats(-100, 100)))
    def test_angles_always_in_range(self, x):
        for squash in Squash:
            enc = EncodingSpec(input_dim=5, squash=squash)
            out = squash_input(x, enc)
            assert np.all(out >= -np.pi) and np.all(out <= np.pi)


class TestEncode:
    def test_truth_table_two_qubits(self):
        enc = EncodingSpec(input_dim=2, n_qubits=2)
        s = encode(init_zero_state(2), np.array([np.pi, 0.0]), enc)
        # Ry(pi) sets qubit 0, CNOT then sets qubit 1 -> index 3
        np.testing.assert_allclose(np.abs(s.amps), [0, 0, 0, 1], atol=1e-12)

    def test_zero_angles_identity(self):
        enc = EncodingSpec(input_dim=4, n_qubits=4)
        s = encode(init_zero_state(4), np.zeros(4), enc)
        assert s.amps[0] == pytest.approx(1.0, abs=1e-15)

    def test_reuploading_matches_oracle(self):
        # d=7 on 3 qubits: chunks 3+3+1, a CNOT chain after each
        rng = np.random.default_rng(0)
        angles = rng.uniform(-np.pi, np.pi, size=7)
        enc, var, _ = make_specs(3, 7, 0)
        s = encode(init_zero_state(3), angles, enc)
        dense = oracle.run_dense(circuit_gate_list(angles, enc, var), 3)
        np.testing.assert_allclose(s.amps, dense, atol=1e-10)


class TestApplyVariational:
    def test_zero_params_leave_zero_state(self):
        _, var, _ = make_specs(3, 3, 2)
        s = apply_variational(init_zero_state(3), var)
        assert s.amps[0] == pytest.approx(1.0, abs=1e-15)

    def test_param_budget_three_layers_six_qubits(self):
        var = VariationalSpec(6, 3)
        assert var.n_params == 36
        assert var.params.shape == (36,)

    def test_param_length_mismatch(self):
        with pytest.raises(ConfigurationError):
            VariationalSpec(6, 3, Entangler.CZ_CHAIN, np.zeros(35))

    @pytest.mark.parametrize("entangler", list(Entangler))
    def test_single_layer_matches_oracle(self, entangler):
        rng = np.random.default_rng(1)
        phi = rng.uniform(-np.pi, np.pi, size=4)
        enc, var, _ = make_specs(2, 2, 1, phi, entangler)
        s = apply_variational(init_zero_state(2), var)
        ops = circuit_gate_list(np.zeros(0), enc, var)
        np.testing.assert_allclose(s.amps, oracle.run_dense(ops, 2), atol=1e-10)


class TestQuantumForward:
    def test_identity_circuit_gives_all_ones(self):
        enc, var, meas = make_specs(4, 4, 2)
        q = quantum_forward(np.zeros(4), enc, var, meas)
        np.testing.assert_allclose(q, np.ones(4), atol=1e-12)

    def test_small_instance_matches_oracle(self):
        rng = np.random.default_rng(2)
        phi = rng.uniform(-np.pi, np.pi, size=4)
        x = rng.uniform(-1, 1, size=2)
        enc, var, meas = make_specs(2, 2, 1, phi)
        q = quantum_forward(x, enc, var, meas)
        dense = oracle.run_dense(circuit_gate_list(squash_input(x, enc), enc, var), 2)
        want = [oracle.pauli_expectation(dense, "Z", i, 2) for i in range(2)]
        np.testing.assert_allclose(q, want, atol=1e-10)

    def test_matches_single_state_composition(self):
        rng = np.random.default_rng(3)
        phi = rng.uniform(-np.pi, np.pi, size=12)
        x = rng.uniform(-2, 2, size=5)
        enc, var, meas = make_specs(3, 5, 2, phi)
        q = quantum_forward(x, enc, var, meas)
        s = apply_variational(encode(init_zero_state(3), squash_input(x, enc), enc), var)
        want = [expectation(s, obs) for obs in meas.observables]
        np.testing.assert_allclose(q, want, atol=1e-12)

    def test_deterministic(self):
        rng = np.random.default_rng(4)
        phi = rng.uniform(-np.pi, np.pi, size=16)
        x = rng.uniform(-1, 1, size=6)
        enc, var, meas = make_specs(4, 6, 2, phi)
        a = quantum_forward(x, enc, var, meas)
        b = quantum_forward(x, enc, var, meas)
        assert np.array_equal(a, b)

    def test_multi_basis_feature_count(self):
        enc, var, meas = make_specs(3, 3, 1, multi_basis=True)
        assert meas.n_features == 6
        q = quantum_forward(np.zeros(3), enc, var, meas)
        assert q.shape == (6,)

    @settings(max_examples=40, deadline=None)
    @given(
        st.integers(0, 2**31 - 1),
        st.integers(2, 4),
        st.integers(1, 7),
        st.booleans(),
    )
    def test_features_bounded(self, seed, n_qubits, input_dim, multi):
        rng = np.random.default_rng(seed)
        phi = rng.uniform(-np.pi, np.pi, size=n_qubits * 2 * 2)
        enc, var, meas = make_specs(n_qubits, input_dim, 2, phi, multi_basis=multi)
        x = rng.uniform(-3, 3, size=input_dim)
        q = quantum_forward(x, enc, var, meas)
        assert np.all(np.abs(q) <= 1.0 + 1e-12)

    def test_batch_matches_loop(self):
        rng = np.random.default_rng(5)
        phi = rng.uniform(-np.pi, np.pi, size=12)
        xs = rng.uniform(-1, 1, size=(6, 5))
        enc, var, meas = make_specs(3, 5, 2, phi)
        batch = quantum_forward_batch(xs, enc, var, meas)
        for i in range(6):
            np.testing.assert_array_equal(batch[i], quantum_forward(xs[i], enc, var, meas))


class TestParamShiftGrad:
    def test_zero_at_extremum(self):
        enc, var, meas = make_specs(3, 3, 2)
        jac = param_shift_grad(np.zeros(3), enc, var, meas)
        np.testing.assert_allclose(jac, 0.0, atol=1e-12)

    @pytest.mark.parametrize("n_qubits", [2, 3, 4])
    def test_matches_finite_difference(self, n_qubits):
        rng = np.random.default_rng(30 + n_qubits)
        for _ in range(8):
            d = int(rng.integers(1, 6))
            layers = int(rng.integers(1, 3))
            phi = rng.uniform(-np.pi, np.pi, size=layers * n_qubits * 2)
            x = rng.uniform(-2, 2, size=d)
            enc, var, meas = make_specs(n_qubits, d, layers, phi)
            jac = param_shift_grad(x, enc, var, meas)

            def f(p):
                v = VariationalSpec(n_qubits, layers, var.entangler, p)
                return quantum_forward(x, enc, v, meas)

            fd = central_diff(f, phi, h=1e-5)
            np.testing.assert_allclose(jac, fd, atol=1e-6)

    def test_symmetry_under_qubit_relabeling(self):
        # x = 0 keeps the (directed) encoding chain trivial; identical
        # per-qubit angles + the symmetric CZ chain then make the two
        # qubits identically wired, so swapping labels swaps the Jacobian
        phi = np.array([0.6, -0.3, 0.6, -0.3])
        enc, var, meas = make_specs(2, 2, 1, phi)
        jac = param_shift_grad(np.zeros(2), enc, var, meas)
        assert np.abs(jac).max() > 1e-3  # non-degenerate instance
        np.testing.assert_allclose(jac[0, 0:2], jac[1, 2:4], atol=1e-10)
        np.testing.assert_allclose(jac[0, 2:4], jac[1, 0:2], atol=1e-10)
        # all-zero angles sit at an extremum: symmetric and identically zero
        var0 = VariationalSpec(2, 1, Entangler.CZ_CHAIN)
        jac0 = param_shift_grad(np.zeros(2), enc, var0, meas)
        np.testing.assert_allclose(jac0, jac0[::-1, [2, 3, 0, 1]], atol=1e-12)

    def test_batch_jacobian_matches_single(self):
        rng = np.random.default_rng(6)
        phi = rng.uniform(-np.pi, np.pi, size=8)
        xs = rng.uniform(-1, 1, size=(3, 4))
        enc, var, meas = make_specs(2, 4, 2, phi)
        q, jac = param_shift_grad_batch(xs, enc, var, meas)
        for i in range(3):
            np.testing.assert_array_equal(q[i], quantum_forward(xs[i], enc, var, meas))
            np.testing.assert_array_equal(jac[i], param_shift_grad(xs[i], enc, var, meas))


class TestInputGrad:
    def test_saturated_rows_vanish(self):
        enc, var, meas = make_specs(2, 2, 1, np.array([0.3, 0.1, -0.2, 0.4]))
        jac = input_grad(np.array([25.0, -25.0]), enc, var, meas)
        np.testing.assert_allclose(jac, 0.0, atol=1e-9)

    def test_matches_finite_difference(self):
        rng = np.random.default_rng(7)
        for _ in range(6):
            phi = rng.uniform(-np.pi, np.pi, size=8)
            x = rng.uniform(-1.5, 1.5, size=3)
            enc, var, meas = make_specs(2, 3, 2, phi)
            jac = input_grad(x, enc, var, meas)
            fd = central_diff(lambda xv: quantum_forward(xv, enc, var, meas), x, h=1e-5)
            np.testing.assert_allclose(jac, fd, atol=1e-6)

    def test_reuploading_matches_finite_difference(self):
        # d > n_qubits: every feature flows through exactly one Ry gate
        rng = np.random.default_rng(8)
        phi = rng.uniform(-np.pi, np.pi, size=12)
        x = rng.uniform(-1, 1, size=7)
        enc, var, meas = make_specs(3, 7, 2, phi)
        jac = input_grad(x, enc, var, meas)
        fd = central_diff(lambda xv: quantum_forward(xv, enc, var, meas), x, h=1e-5)
        np.testing.assert_allclose(jac, fd, atol=1e-6)
