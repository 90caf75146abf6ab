"""Fast self-checks intended as a CI smoke test (well under a minute).

Each check re-derives its expected values through an independent route:
dense Kronecker-product matrices for the gate kernels, central finite
differences for the shift-rule gradients, direct local training for the
single-client federated run, and the rank statistic for the ROC area.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import statevector as sv
from .data import Dataset
from .feature_map import EncodingSpec, MeasurementSpec, VariationalSpec, quantum_forward, param_shift_grad
from .federated import FedConfig, run_federated, split_clients
from .models import ArchKind, ArchitectureSpec, build, clone_model, flatten_params, unflatten_params
from .privacy import auc_rank, roc_curve
from .seeding import derive_seed, make_rng
from .training import TrainConfig, local_train


@dataclass
class CheckResult:
    name: str
    passed: bool
    seconds: float
    detail: str = ""


def _dense_gate(op, n):
    i2 = np.eye(2, dtype=complex)
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    z = np.diag([1.0, -1.0]).astype(complex)
    p0 = np.diag([1.0, 0.0]).astype(complex)
    p1 = np.diag([0.0, 1.0]).astype(complex)

    def embed(u, q):
        return np.kron(np.eye(1 << (n - 1 - q)), np.kron(u, np.eye(1 << q)))

    kind = op[0]
    if kind == "ry":
        c, s = np.cos(op[2] / 2), np.sin(op[2] / 2)
        return embed(np.array([[c, -s], [s, c]], dtype=complex), op[1])
    if kind == "rz":
        return embed(np.diag([np.exp(-1j * op[2] / 2), np.exp(1j * op[2] / 2)]), op[1])
    if kind == "cnot":
        return embed(p0, op[1]) + embed(p1, op[1]) @ embed(x, op[2])
    return embed(p0, op[1]) + embed(p1, op[1]) @ embed(z, op[2])


def check_gate_oracle() -> tuple[bool, str]:
    rng = np.random.default_rng(0)
    for trial in range(10):
        n = int(rng.integers(2, 4))
        state = sv.init_zero_state(n)
        dense = np.zeros(1 << n, dtype=complex)
        dense[0] = 1.0
        for _ in range(8):
            kind = ["ry", "rz", "cnot", "cz"][int(rng.integers(0, 4))]
            if kind in ("ry", "rz"):
                op = (kind, int(rng.integers(0, n)), float(rng.uniform(-np.pi, np.pi)))
                (sv.apply_ry if kind == "ry" else sv.apply_rz)(state, op[1], op[2])
            else:
                a = int(rng.integers(0, n))
                b = int(rng.integers(0, n - 1))
                b = b + 1 if b >= a else b
                op = (kind, a, b)
                (sv.apply_cnot if kind == "cnot" else sv.apply_cz)(state, a, b)
            dense = _dense_gate(op, n) @ dense
        if not np.allclose(state.amps, dense, atol=1e-10):
            return False, f"trial {trial}: max err {np.abs(state.amps - dense).max():.2e}"
        if abs(state.norm() - 1.0) > 1e-12:
            return False, f"trial {trial}: norm drift {state.norm() - 1.0:.2e}"
    return True, "10 random circuits vs dense matrices"


def check_param_shift() -> tuple[bool, str]:
    rng = np.random.default_rng(1)
    enc = EncodingSpec(input_dim=4, n_qubits=3)
    var = VariationalSpec(3, 2, params=rng.uniform(-np.pi, np.pi, 12))
    meas = MeasurementSpec.z_basis(3)
    x = rng.uniform(-1, 1, 4)
    jac = param_shift_grad(x, enc, var, meas)
    h = 1e-5
    for j in range(12):
        plus = var.params.copy()
        minus = var.params.copy()
        plus[j] += h
        minus[j] -= h
        fd = (
            quantum_forward(x, enc, VariationalSpec(3, 2, params=plus), meas)
            - quantum_forward(x, enc, VariationalSpec(3, 2, params=minus), meas)
        ) / (2 * h)
        if np.abs(jac[:, j] - fd).max() > 1e-6:
            return False, f"param {j}: shift vs FD gap {np.abs(jac[:, j] - fd).max():.2e}"
    return True, "12 parameters vs central differences"


def check_fedavg_degenerate() -> tuple[bool, str]:
    rng = np.random.default_rng(2)
    x = np.clip(rng.standard_normal((40, 2)) * 0.1 + 0.5, 0, 1)
    y = (np.arange(40) % 2).astype(np.int64)
    ds = Dataset("smoke", x, y, 2)
    spec = ArchitectureSpec(ArchKind.CLASSICAL, 2, 2, hidden_dims=(4,))
    fed = FedConfig(n_clients=1, rounds=1, local_epochs=2, seed=3)
    cfg = TrainConfig(seed=3)
    res = run_federated(spec, ds, fed, cfg)

    from .data import Preprocessor, partition_clients

    partition = partition_clients(np.arange(40), y, 1, "iid", seed=derive_seed(3, "partition"))
    train_idx, _ = split_clients(partition, y, fed.test_fraction, fed.seed)
    pre = Preprocessor.fit(x[train_idx[0]], None)
    feats = pre.transform(x)
    model = build(spec, make_rng(3, "init"))
    clone = clone_model(model)
    unflatten_params(clone, flatten_params(model))
    params = local_train(
        clone, feats[train_idx[0]], y[train_idx[0]], 2, cfg, make_rng(3, "client", 0, 0)
    )
    same = np.array_equal(flatten_params(res.model), params)
    return same, "single-client round vs direct local training (bit-exact)" if same else "drift"


def check_auc_sanity() -> tuple[bool, str]:
    rng = np.random.default_rng(4)
    scores = rng.standard_normal(200)
    labels = rng.random(200) < 0.5
    labels[0], labels[1] = True, False
    gap = abs(roc_curve(scores, labels).auc - auc_rank(scores, labels))
    if gap > 1e-9:
        return False, f"trapezoid vs rank gap {gap:.2e}"
    perfect = roc_curve(np.array([2.0, 1.0, -1.0, -2.0]), np.array([1, 1, 0, 0], dtype=bool))
    if perfect.auc != 1.0:
        return False, f"perfect separation gave {perfect.auc}"
    return True, "trapezoid == rank; perfect separation == 1"


CHECKS = [
    ("gate-oracle", check_gate_oracle),
    ("param-shift-vs-fd", check_param_shift),
    ("fedavg-degenerate", check_fedavg_degenerate),
    ("auc-sanity", check_auc_sanity),
]


def verify_suite() -> list[CheckResult]:
    results = []
    for name, fn in CHECKS:
        start = time.perf_counter()
        try:
            passed, detail = fn()
        except Exception as exc:  # a crash is a failure, not an abort
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, passed, time.perf_counter() - start, detail))
    return results


def print_report(results: list[CheckResult]) -> bool:
    ok = True
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"[{status}] {r.name:22s} {r.seconds:6.2f}s  {r.detail}")
        ok &= r.passed
    print(f"verify: {'all checks passed' if ok else 'CHECKS FAILED'}")
    return ok
