from __future__ import annotations

import csv
import json
import math
import subprocess
import sys

import pytest

from cpflow import checks
from cpflow import cli
from cpflow.errors import ConfigError


def run_cli(tmp_path, name, config, *extra):
    cfg = tmp_path / f"{name}.json"
    cfg.write_text(json.dumps(config))
    out = tmp_path / name
    code = cli.main(["--config", str(cfg), "--out", str(out), "--quiet", *extra])
    return code, out


def all_finite(path):
    rows = list(csv.reader(path.open()))
    return all(math.isfinite(float(v)) for row in rows[1:] for v in row)


class TestConfig:
    def test_unknown_key_named(self, tmp_path, capsys):
        code, _ = run_cli(tmp_path, "bad", {"command": "point-run", "material": {"elastc": {}}})
        assert code == cli.EXIT_ERROR
        assert "'material.elastc'" in capsys.readouterr().err

    def test_bad_value_named(self):
        with pytest.raises(ConfigError, match="solver.steps"):
            cli.validate_config({"solver": {"steps": -3}})

    def test_missing_command(self):
        with pytest.raises(ConfigError, match="command"):
            cli.resolve_config({})

    def test_invalid_json(self, tmp_path, capsys):
        p = tmp_path / "c.json"
        p.write_text("{not json")
        assert cli.main(["point-run", "--config", str(p), "--quiet"]) == cli.EXIT_ERROR
        assert "not valid JSON" in capsys.readouterr().err

    def test_merge_keeps_defaults(self):
        cfg = cli.resolve_config({"solver": {"steps": 32}}, "point-run")
        assert cfg["solver"]["steps"] == 32
        assert cfg["solver"]["margin_samples"] == cli.DEFAULTS["point-run"]["solver"]["margin_samples"]
        assert cfg["output"] == "cpflow-out" and cfg["seed"] == 0

    def test_threads_fallback(self, monkeypatch):
        monkeypatch.setenv("CPFLOW_THREADS", "4")
        assert cli.resolve_config({}, "point-sweep")["threads"] == 4
        assert cli.resolve_config({}, "point-sweep", threads=2)["threads"] == 2

    def test_command_line_overrides_file(self):
        cfg = cli.resolve_config({"command": "check", "seed": 5}, "point-run", seed=7)
        assert cfg["command"] == "point-run" and cfg["seed"] == 7


class TestPointCommands:
    def test_zero_load(self, tmp_path):
        code, out = run_cli(tmp_path, "zero", {"command": "point-run", "load": {"kind": "zero"},
                                               "solver": {"steps": 8}})
        assert code == cli.EXIT_PASS
        rows = list(csv.DictReader((out / "trajectory.csv").open()))
        assert len(rows) == 9
        assert len({tuple((k, v) for k, v in r.items() if k != "t") for r in rows}) == 1
        run = json.loads((out / "run.json").read_text())
        assert run["status"] == "PASS" and run["summary"]["dissipation"] == 0.0

    def test_default_run_and_determinism(self, tmp_path):
        config = {"command": "point-run", "solver": {"steps": 32}}
        code_a, a = run_cli(tmp_path, "a", config)
        code_b, b = run_cli(tmp_path, "b", config)
        assert code_a == code_b == cli.EXIT_PASS
        assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()
        assert all_finite(a / "trajectory.csv")
        assert (a / "trajectory.gp").exists()
        assert json.loads((a / "run.json").read_text())["summary"]["dissipation"] > 0

    def test_sweep_threads_identical(self, tmp_path):
        config = {"command": "point-sweep", "solver": {"steps": 16, "epsilons": [0.1, 0.03, 0.01]}}
        code_a, a = run_cli(tmp_path, "a", config, "--threads", "1")
        code_b, b = run_cli(tmp_path, "b", config, "--threads", "3")
        assert code_a == code_b == cli.EXIT_PASS
        assert (a / "convergence.csv").read_bytes() == (b / "convergence.csv").read_bytes()
        assert all_finite(a / "convergence.csv")

    def test_bad_epsilons(self, tmp_path):
        code, _ = run_cli(tmp_path, "e", {"command": "point-sweep", "solver": {"epsilons": [0.01, 0.1]}})
        assert code == cli.EXIT_ERROR

    def test_samples_load(self, tmp_path):
        times = [0.0, 0.1, 0.2]
        cs = [[[1 + s, 0, 0], [0, 1 - s, 0], [0, 0, 1]] for s in (0.0, 0.1, 0.2)]
        code, out = run_cli(tmp_path, "s", {"command": "point-run", "solver": {"steps": 16},
                                            "load": {"kind": "samples", "times": times, "sample_c": cs}})
        assert code == cli.EXIT_PASS and all_finite(out / "trajectory.csv")


class TestGridAndCheck:
    def test_quasi_run(self, tmp_path):
        code, out = run_cli(tmp_path, "q", {"command": "quasi-run", "solver": {"steps": 4}})
        assert code == cli.EXIT_PASS
        assert all_finite(out / "fields.csv") and all_finite(out / "trajectory.csv")

    def test_check_quick_controls(self):
        base = checks.check_suites(0, suites=("linearized",), quick=True)
        assert base.passed
        broken = checks.check_suites(0, tolerances={"linearized.subgradient": 0.0},
                                     suites=("linearized",), quick=True)
        assert not broken.row("linearized.subgradient").passed
        other = checks.check_suites(1, suites=("linearized",), quick=True)
        assert [r.passed for r in other.rows] == [r.passed for r in base.rows]

    def test_check_rejects_unknown_names(self):
        with pytest.raises(KeyError):
            checks.check_suites(0, tolerances={"nope.x": 1.0})
        with pytest.raises(KeyError):
            checks.check_suites(0, suites=("nope",))

    def test_module_entry_point(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "cpflow", "point-run", "--out", str(tmp_path / "m")],
                              input="", capture_output=True, text=True,
                              env={"CPFLOW_THREADS": "1", "PATH": ""}, timeout=300)
        assert proc.returncode == cli.EXIT_PASS, proc.stderr
        assert "point-run: PASS" in proc.stdout
