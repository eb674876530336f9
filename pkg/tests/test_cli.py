"""Configuration validation and the command-line driver."""

import csv
import json

import numpy as np
import pytest

from ashgp.cli import main
from ashgp.config import (
    PRESET_NAMES,
    ConfigError,
    build_learner_config,
    build_model,
    build_random_vector,
    load_config,
    validate_config,
)

TINY = {
    "name": "tiny",
    "model": {"name": "linear", "dimension": 4, "beta0": -2.0, "y_f": 0.0},
    "rv": {"preset": "standard_normal"},
    "learner": {
        "n_initial": 15,
        "n_pool": 5000,
        "n_candidates": 500,
        "max_iterations": 5,
        "seed": 1,
        "hgp_restarts": 2,
        "hgp_max_iter": 200,
    },
    "baselines": {"mcs_n": 20000, "form": True},
}


def write_config(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


class TestConfigValidation:
    def test_unknown_key_rejected(self):
        doc = json.loads(json.dumps(TINY))
        doc["modell"] = {}
        with pytest.raises(ConfigError):
            validate_config(doc)

    def test_unknown_nested_key_rejected(self):
        doc = json.loads(json.dumps(TINY))
        doc["learner"]["pool"] = 10
        with pytest.raises(ConfigError, match="learner"):
            validate_config(doc)

    def test_doe_constraint_named(self):
        doc = json.loads(json.dumps(TINY))
        doc["learner"]["n_initial"] = 51
        doc["learner"]["n_pool"] = 5000
        validate_config(doc)  # schema-valid; the constraint is semantic
        with pytest.raises(ConfigError, match="n_initial <= n_pool/100"):
            build_learner_config(doc)

    def test_invalid_json_is_line_anchored(self, tmp_path):
        p = tmp_path / "broken.json"
        p.write_text('{\n  "model": \n}')
        with pytest.raises(ConfigError, match=r"broken\.json:\d+:\d+"):
            load_config(p)

    def test_rv_needs_exactly_one_source(self):
        doc = json.loads(json.dumps(TINY))
        doc["rv"] = {}
        with pytest.raises(ConfigError, match="exactly one"):
            validate_config(doc)
        doc["rv"] = {
            "preset": "standard_normal",
            "marginals": [{"kind": "gaussian", "p1": 0, "p2": 1}],
        }
        with pytest.raises(ConfigError, match="exactly one"):
            validate_config(doc)

    def test_marginal_list_length_checked(self):
        doc = json.loads(json.dumps(TINY))
        doc["rv"] = {"marginals": [{"kind": "gaussian", "p1": 0.0, "p2": 1.0}]}
        validate_config(doc)
        model = build_model(doc)
        with pytest.raises(ConfigError, match="marginals"):
            build_random_vector(doc, model.dimension)

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="no such config"):
            load_config("/nonexistent/nowhere.json")

    @pytest.mark.parametrize("name", PRESET_NAMES)
    def test_bundled_presets_load_and_build(self, name):
        doc = load_config(name)
        model = build_model(doc)
        spec = build_random_vector(doc, model.dimension)
        cfg = build_learner_config(doc)
        assert spec.dimension == model.dimension
        assert cfg.n_initial <= cfg.n_pool / 100

    def test_fd_gradient_mode(self):
        doc = json.loads(json.dumps(TINY))
        doc["model"]["gradient_mode"] = "fd"
        model = build_model(doc)
        e = model.evaluate(np.zeros(4))
        assert np.allclose(e.grad, -1.0, atol=1e-9)


class TestCliCommands:
    def test_run_writes_outputs(self, tmp_path):
        cfg = write_config(tmp_path, TINY)
        out = tmp_path / "run"
        code = main(["run", "--config", cfg, "--out", str(out), "--quiet"])
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert report["method"] == "aas_hgp"
        assert 0.0 <= report["pf"] <= 1.0
        for fname in ("history.csv", "features.csv", "spectrum.csv"):
            with open(out / fname, newline="") as fh:
                rows = list(csv.reader(fh))
            assert len(rows) >= 2  # header + data

    def test_history_columns(self, tmp_path):
        cfg = write_config(tmp_path, TINY)
        out = tmp_path / "run"
        assert main(["run", "--config", cfg, "--out", str(out), "--quiet"]) == 0
        with open(out / "history.csv", newline="") as fh:
            header = next(csv.reader(fh))
        assert header[:5] == ["iteration", "pf", "eps1", "eps2", "d_r"]
        assert header[5] == "lambda_1" and header[12] == "lambda_8"
        assert header[-1] == "n_s"

    def test_budget_stop_exit_code(self, tmp_path):
        doc = json.loads(json.dumps(TINY))
        doc["learner"]["max_iterations"] = 1
        doc["learner"]["eps1_tol"] = 1e-12
        doc["learner"]["eps2_tol"] = 1e-12
        cfg = write_config(tmp_path, doc)
        code = main(["run", "--config", cfg, "--out", str(tmp_path / "b"), "--quiet"])
        assert code == 2

    def test_global_doe_mode_exit_zero(self, tmp_path):
        doc = json.loads(json.dumps(TINY))
        doc["learner"]["mode"] = "global_doe"
        cfg = write_config(tmp_path, doc)
        out = tmp_path / "g"
        code = main(["run", "--config", cfg, "--out", str(out), "--quiet"])
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert report["stop_reason"] == "global_doe"
        assert report["n_s"] == 15

    def test_invalid_config_exit_one(self, tmp_path):
        doc = json.loads(json.dumps(TINY))
        doc["learner"]["n_initial"] = 1000
        cfg = write_config(tmp_path, doc)
        assert main(["run", "--config", cfg, "--quiet", "--out", str(tmp_path)]) == 1

    def test_mcs_command(self, tmp_path):
        cfg = write_config(tmp_path, TINY)
        out = tmp_path / "mcs"
        assert main(["mcs", "--config", cfg, "--out", str(out), "--quiet"]) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["method"] == "mcs"
        assert report["n"] == 20000

    def test_form_command(self, tmp_path):
        cfg = write_config(tmp_path, TINY)
        out = tmp_path / "form"
        assert main(["form", "--config", cfg, "--out", str(out), "--quiet"]) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["beta"] == pytest.approx(2.0, abs=1e-6)

    def test_seed_override_changes_result(self, tmp_path):
        cfg = write_config(tmp_path, TINY)
        outs = []
        for seed in (1, 99):
            out = tmp_path / f"s{seed}"
            main(["mcs", "--config", cfg, "--out", str(out), "--seed", str(seed),
                  "--quiet"])
            outs.append(json.loads((out / "report.json").read_text()))
        assert outs[0]["seed"] == 1 and outs[1]["seed"] == 99

    def test_report_command(self, tmp_path):
        cfg = write_config(tmp_path, TINY)
        a, b = tmp_path / "a", tmp_path / "bdir"
        main(["mcs", "--config", cfg, "--out", str(a), "--quiet"])
        main(["form", "--config", cfg, "--out", str(b), "--quiet"])
        out = tmp_path / "cmp"
        assert main(["report", str(a), str(b), "--out", str(out), "--quiet"]) == 0
        with open(out / "comparison.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["run", "method", "pf", "beta_g", "n_s", "eps_p"]
        assert len(rows) == 3
        assert float(rows[1][5]) == 0.0  # reference row has zero relative error
        md = (out / "comparison.md").read_text()
        assert md.startswith("| run |")

    def test_unreadable_config_exit_one(self):
        assert main(["run", "--config", "/no/such/file.json", "--quiet"]) == 1
