"""Configuration schema, environment overrides, CLI subcommands and exit codes."""

import json

import numpy as np
import pytest

from mhdsplit import cli
from mhdsplit.config import load_config
from mhdsplit.errors import ConfigError

BASE = {
    "grid": {"n": 16, "box_length": 6.283185307179586},
    "scheme": {"epsilon": 0.5, "dt": 0.0078125, "horizon": 0.125, "picard_tol": 1e-11},
    "initial": {"preset": "elsasser_aligned", "seed": 1, "amplitude": 0.1},
    "audits": [{"name": "global_energy"}, {"name": "energy_identity"}],
    "output": {"dir": "out"},
}


def write_config(tmp_path, data, name="config.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return p


class TestConfigSchema:
    def test_valid_config(self, tmp_path):
        cfg = load_config(write_config(tmp_path, BASE))
        assert cfg.grid_n == 16
        assert cfg.scheme.epsilon == 0.5
        assert cfg.preset == "elsasser_aligned"

    def test_unknown_root_key_rejected(self, tmp_path):
        bad = dict(BASE, extra={"a": 1})
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, bad))

    def test_unknown_section_key_rejected(self, tmp_path):
        bad = json.loads(json.dumps(BASE))
        bad["scheme"]["viscosity"] = 1.0
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, bad))

    def test_missing_section_rejected(self, tmp_path):
        bad = {k: v for k, v in BASE.items() if k != "grid"}
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, bad))

    def test_unknown_preset_rejected(self, tmp_path):
        bad = json.loads(json.dumps(BASE))
        bad["initial"]["preset"] = "laminar"
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, bad))

    def test_unknown_audit_rejected(self, tmp_path):
        bad = json.loads(json.dumps(BASE))
        bad["audits"] = [{"name": "vibes"}]
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, bad))

    def test_unknown_audit_option_rejected(self, tmp_path):
        bad = json.loads(json.dumps(BASE))
        bad["audits"] = [{"name": "global_energy", "tolerance": 5}]
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, bad))

    def test_numeric_constraints_rechecked(self, tmp_path):
        bad = json.loads(json.dumps(BASE))
        bad["scheme"]["epsilon"] = -1.0
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, bad))
        bad = json.loads(json.dumps(BASE))
        bad["grid"]["n"] = 7
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, bad))

    def test_env_override(self, tmp_path, monkeypatch):
        monkeypatch.setenv("MHDSPLIT_SCHEME_EPSILON", "0.25")
        monkeypatch.setenv("MHDSPLIT_OUTPUT_DIR", str(tmp_path / "elsewhere"))
        cfg = load_config(write_config(tmp_path, BASE))
        assert cfg.scheme.epsilon == 0.25
        assert cfg.out_dir.endswith("elsewhere")


class TestCliExitCodes:
    def test_run_elsasser_passes(self, tmp_path):
        data = json.loads(json.dumps(BASE))
        data["output"]["dir"] = str(tmp_path / "out")
        code = cli.main(["run", "--config", str(write_config(tmp_path, data))])
        assert code == cli.EXIT_OK
        summary = json.loads((tmp_path / "out" / "summary.json").read_text())
        assert summary["all_passed"] is True
        assert summary["certificates"][0]["iterations"] <= 2

    def test_config_error_exit_code(self, tmp_path):
        bad = dict(BASE, bogus=1)
        code = cli.main(["run", "--config", str(write_config(tmp_path, bad))])
        assert code == cli.EXIT_CONFIG

    def test_missing_config_file(self, tmp_path):
        code = cli.main(["run", "--config", str(tmp_path / "nope.json")])
        assert code == cli.EXIT_CONFIG

    def test_solver_error_exit_code(self, tmp_path):
        data = json.loads(json.dumps(BASE))
        data["initial"] = {"preset": "random", "seed": 3, "amplitude": 500.0, "decay": 1.2}
        data["scheme"]["epsilon"] = 0.125
        data["scheme"]["dt"] = 0.03125
        data["output"]["dir"] = str(tmp_path / "out")
        code = cli.main(["run", "--config", str(write_config(tmp_path, data))])
        assert code == cli.EXIT_SOLVER

    def test_verify_without_trajectory(self, tmp_path):
        data = json.loads(json.dumps(BASE))
        data["output"]["dir"] = str(tmp_path / "empty")
        code = cli.main(["verify", "--config", str(write_config(tmp_path, data))])
        assert code == cli.EXIT_CONFIG

    def test_report_roundtrip(self, tmp_path):
        data = json.loads(json.dumps(BASE))
        data["output"]["dir"] = str(tmp_path / "out")
        cli.main(["run", "--config", str(write_config(tmp_path, data))])
        assert cli.main(["report", "--out-dir", str(tmp_path / "out")]) == cli.EXIT_OK

    def test_verify_after_run(self, tmp_path):
        data = json.loads(json.dumps(BASE))
        data["output"]["dir"] = str(tmp_path / "out")
        cli.main(["run", "--config", str(write_config(tmp_path, data))])
        assert cli.main(["verify", "--config", str(write_config(tmp_path, data))]) == cli.EXIT_OK


class TestSweeps:
    def test_dt_sweep_second_order(self, tmp_path):
        data = json.loads(json.dumps(BASE))
        data["initial"] = {"preset": "taylor_green", "seed": 1, "amplitude": 0.1}
        data["scheme"]["dt"] = 0.015625
        data["scheme"]["picard_tol"] = 1e-12
        data["output"]["dir"] = str(tmp_path / "out")
        code = cli.main(
            ["sweep", "--config", str(write_config(tmp_path, data)), "--dimension", "dt"]
        )
        assert code == cli.EXIT_OK
        out = json.loads((tmp_path / "out" / "sweep_dt.json").read_text())
        assert out["passed"]
        assert out["orders"][0] >= 1.7

    def test_n_sweep_resolvable_data_hits_spectral_floor(self, tmp_path):
        data = json.loads(json.dumps(BASE))
        data["grid"]["n"] = 8
        data["initial"] = {"preset": "taylor_green", "seed": 1, "amplitude": 3e-4}
        data["scheme"]["dt"] = 0.015625
        data["scheme"]["picard_tol"] = 1e-13
        data["output"]["dir"] = str(tmp_path / "out")
        code = cli.main(
            [
                "sweep",
                "--config",
                str(write_config(tmp_path, data)),
                "--dimension",
                "n",
                "--levels",
                "8,16,32",
                "--jobs",
                "2",
            ]
        )
        assert code == cli.EXIT_OK
        out = json.loads((tmp_path / "out" / "sweep_n.json").read_text())
        assert all(d <= 1e-10 for d in out["distances"])

    def test_epsilon_sweep_zero_data(self, tmp_path):
        data = json.loads(json.dumps(BASE))
        data["initial"] = {"preset": "random", "seed": 1, "amplitude": 0.0}
        data["output"]["dir"] = str(tmp_path / "out")
        code = cli.main(
            ["sweep", "--config", str(write_config(tmp_path, data)), "--dimension", "epsilon"]
        )
        assert code == cli.EXIT_OK
        out = json.loads((tmp_path / "out" / "sweep_epsilon.json").read_text())
        assert all(d == 0.0 for d in out["distances"])

    def test_too_few_levels_rejected(self, tmp_path):
        data = json.loads(json.dumps(BASE))
        data["output"]["dir"] = str(tmp_path / "out")
        code = cli.main(
            [
                "sweep",
                "--config",
                str(write_config(tmp_path, data)),
                "--dimension",
                "dt",
                "--levels",
                "0.0078125,0.00390625",
            ]
        )
        assert code == cli.EXIT_CONFIG


class TestStabilityCommand:
    def test_stability_writes_verdict(self, tmp_path):
        data = json.loads(json.dumps(BASE))
        data["initial"] = {"preset": "taylor_green", "seed": 1, "amplitude": 0.1}
        data["output"]["dir"] = str(tmp_path / "out")
        code = cli.main(
            [
                "stability",
                "--config",
                str(write_config(tmp_path, data)),
                "--deltas",
                "1e-4,1e-5",
            ]
        )
        assert code == cli.EXIT_OK
        verdict = json.loads((tmp_path / "out" / "stability_verdict.json").read_text())
        assert verdict["passed"]
        assert (tmp_path / "out" / "stability_delta_0.0001.csv").exists()


class TestCsvLayout:
    def test_main_csv_columns(self, tmp_path):
        data = json.loads(json.dumps(BASE))
        data["output"]["dir"] = str(tmp_path / "out")
        cli.main(["run", "--config", str(write_config(tmp_path, data))])
        lines = (tmp_path / "out" / "run.csv").read_text().splitlines()
        assert lines[0] == ",".join(cli.MAIN_CSV_COLUMNS)
        # one row per node
        assert len(lines) == 1 + 17
