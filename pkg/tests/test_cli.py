import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

import rhqml.statevector
from rhqml.cli import main
from rhqml.config import ExperimentConfig, load_experiment_config
from rhqml.errors import ConfigurationError
from rhqml.verify import print_report, verify_suite

REPO = Path(__file__).resolve().parent.parent


def make_toy_data_dir(tmp_path, n=60, d=4, classes=3, seed=0):
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n):
        label = i % classes
        center = label / classes
        feats = np.clip(center + 0.08 * rng.standard_normal(d), 0, 1)
        rows.append(",".join([str(label)] + [repr(float(v)) for v in feats]))
    (tmp_path / "toy.csv").write_text("\n".join(rows) + "\n")
    (tmp_path / "toy.json").write_text(
        json.dumps(
            {
                "name": "toy",
                "csv": "toy.csv",
                "header": False,
                "label_column": 0,
                "classes": list(range(classes)),
            }
        )
    )
    return tmp_path


class TestConfig:
    def test_defaults(self):
        cfg = ExperimentConfig(experiment="table2")
        assert cfg.seeds == (0, 1, 2)
        assert cfg.rounds == 50 and cfg.clients == 5

    def test_unknown_experiment(self):
        with pytest.raises(ConfigurationError):
            ExperimentConfig(experiment="table9")

    def test_empty_seeds(self):
        with pytest.raises(ConfigurationError):
            ExperimentConfig(experiment="table2", seeds=())

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "exp.json"
        path.write_text(json.dumps({"experiment": "table6", "seeds": [3, 4], "rounds": 10}))
        cfg = load_experiment_config(path)
        assert cfg.experiment == "table6"
        assert cfg.seeds == (3, 4)
        assert cfg.rounds == 10

    def test_malformed_json_reports_line(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"experiment": "table2",\n  "seeds": [0,]\n}')
        with pytest.raises(ConfigurationError, match="line"):
            load_experiment_config(path)

    def test_unknown_keys_rejected(self, tmp_path):
        path = tmp_path / "extra.json"
        path.write_text(json.dumps({"experiment": "table2", "bogus": 1}))
        with pytest.raises(ConfigurationError, match="bogus"):
            load_experiment_config(path)

    def test_env_var_data_dir(self, monkeypatch, tmp_path):
        monkeypatch.setenv("RHQML_DATA_DIR", str(tmp_path))
        assert ExperimentConfig(experiment="table2").resolve_data_dir() == tmp_path


class TestVerifyCommand:
    def test_all_checks_pass(self, capsys):
        results = verify_suite()
        assert all(r.passed for r in results)
        assert sum(r.seconds for r in results) < 60
        assert print_report(results) is True
        out = capsys.readouterr().out
        assert out.count("[PASS]") == len(results)
        assert all(f"{r.name}" in out for r in results)

    def test_mutated_gate_kernel_is_caught(self, monkeypatch):
        real = rhqml.statevector.ry_kernel

        def corrupted(amps, n, qubit, theta):
            real(amps, n, qubit, np.asarray(theta) * 1.0000001)  # subtly wrong angle

        monkeypatch.setattr(rhqml.statevector, "ry_kernel", corrupted)
        results = {r.name: r for r in verify_suite()}
        assert not results["gate-oracle"].passed

    def test_cli_verify_exit_code(self):
        assert main(["verify"]) == 0


class TestRunCommand:
    def test_malformed_config_exits_2_without_output(self, tmp_path, capsys):
        cfg = tmp_path / "broken.json"
        cfg.write_text("{not json")
        out_dir = tmp_path / "out"
        code = main(["run", "--config", str(cfg), "--out", str(out_dir)])
        assert code == 2
        assert not out_dir.exists()

    def test_missing_dataset_exits_2(self, tmp_path):
        code = main(
            ["run", "table2", "--dataset", "covtype", "--data-dir", str(tmp_path),
             "--out", str(tmp_path / "out"), "--seeds", "1"]
        )
        assert code == 2

    def test_table2_on_toy_dataset(self, tmp_path, capsys):
        data_dir = make_toy_data_dir(tmp_path)
        out = tmp_path / "runs"
        code = main(
            ["run", "table2", "--dataset", "toy", "--data-dir", str(data_dir),
             "--out", str(out), "--seeds", "1"]
        )
        assert code == 0
        csv = (out / "table2.csv").read_text()
        assert csv.splitlines()[0] == "Model,Accuracy (%),Parameters"
        assert "Residual-6q (c)" in csv
        # accuracy cells travel with parameter counts
        assert "param_counts" in csv

    def test_rerun_is_byte_identical(self, tmp_path):
        data_dir = make_toy_data_dir(tmp_path)
        out = tmp_path / "runs"
        args = ["run", "ablation", "--dataset", "toy", "--data-dir", str(data_dir),
                "--out", str(out), "--seeds", "1"]
        assert main(args) == 0
        first = (out / "ablation.csv").read_bytes()
        assert main(args) == 0
        assert (out / "ablation.csv").read_bytes() == first


class TestPartitionInspect:
    def test_prints_histograms(self, tmp_path, capsys):
        data_dir = make_toy_data_dir(tmp_path)
        cfg = tmp_path / "exp.json"
        cfg.write_text(
            json.dumps(
                {"experiment": "table6", "dataset": "toy", "clients": 3,
                 "data_dir": str(data_dir), "seeds": [0]}
            )
        )
        assert main(["partition-inspect", str(cfg), "--mode", "iid"]) == 0
        out = capsys.readouterr().out
        assert "client" in out
        assert out.count("\n") >= 4  # header + 3 clients

    def test_missing_config_exits_2(self, tmp_path):
        assert main(["partition-inspect", str(tmp_path / "nope.json")]) == 2


class TestModuleEntryPoint:
    def test_python_dash_m(self):
        proc = subprocess.run(
            [sys.executable, "-m", "rhqml", "verify"],
            capture_output=True, text=True, cwd=REPO,
        )
        assert proc.returncode == 0
        assert "all checks passed" in proc.stdout
