"""Scenario parsing, validation, CLI exit codes and output formats."""

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml

from lrsim.cli import main
from lrsim.scenario import (
    ScenarioParseError,
    ScenarioValidationError,
    build_scenario,
    load_scenario,
)

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"

MINIMAL_FREE_TOP = {
    "system": "lr",
    "n": 3,
    "inertia": {"kind": "bivector-diag", "values": [1.0, 2.0, 3.0]},
    "constraints": {"generators": []},
    "initial": {"g": "identity", "omega": {"pairs": [[1, 2, 0.3], [1, 3, 1.0]]}},
    "integrator": {"h": 1e-3, "steps": 100},
}


def write_yaml(path, data):
    path.write_text(yaml.safe_dump(data))
    return str(path)


class TestScenarioBuilding:
    def test_minimal_free_top(self):
        scenario = build_scenario(MINIMAL_FREE_TOP)
        assert scenario.system.kind == "lr"
        assert scenario.integrator.steps == 100

    def test_all_shipped_scenarios_build(self):
        for path in sorted(SCENARIO_DIR.glob("*.yaml")):
            scenario = load_scenario(path)
            assert scenario.system.dim == scenario.initial.size

    def test_unknown_system_is_schema_error(self):
        data = dict(MINIMAL_FREE_TOP, system="quaternionic")
        with pytest.raises(ScenarioParseError, match="unknown system"):
            build_scenario(data)

    def test_missing_key_is_schema_error(self):
        data = {k: v for k, v in MINIMAL_FREE_TOP.items() if k != "initial"}
        with pytest.raises(ScenarioParseError, match="initial"):
            build_scenario(data)

    def test_dimension_mismatch_is_validation_error(self):
        data = dict(MINIMAL_FREE_TOP)
        data["inertia"] = {"kind": "bivector-diag", "values": [1.0, 2.0]}
        with pytest.raises(ScenarioParseError, match="3 entries"):
            build_scenario(data)

    def test_violated_constraint_named(self):
        data = dict(MINIMAL_FREE_TOP)
        data["constraints"] = {"generators": [[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]]}
        # omega_12 = 0.3 violates the right-invariant constraint
        with pytest.raises(ScenarioValidationError, match="right_invariant_1"):
            build_scenario(data)

    def test_non_unit_gamma_rejected(self):
        data = {
            "system": "cotangent",
            "n": 3,
            "inertia": {"kind": "identity"},
            "mass": 1.0,
            "radius": 1.0,
            "initial": {"gamma": [0.0, 0.0, 2.0], "p": [0.1, 0.0, 0.0]},
        }
        with pytest.raises(ScenarioValidationError, match="gamma_norm"):
            build_scenario(data)

    def test_non_skew_matrix_rejected(self):
        data = dict(MINIMAL_FREE_TOP)
        data["initial"] = {"g": "identity", "omega": [[0, 1, 0], [1, 0, 0], [0, 0, 0]]}
        with pytest.raises(ScenarioValidationError, match="skew"):
            build_scenario(data)

    def test_overrides_take_precedence(self):
        scenario = build_scenario(MINIMAL_FREE_TOP, overrides={"steps": 7, "h": 0.5, "method": None})
        assert scenario.integrator.steps == 7
        assert scenario.integrator.h == 0.5


class TestParseErrors:
    def test_yaml_syntax_error_carries_position(self, tmp_path):
        path = tmp_path / "broken.yaml"
        path.write_text("system: [unclosed\n")
        with pytest.raises(ScenarioParseError, match=r"line \d+"):
            load_scenario(path)

    def test_non_mapping_file(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ScenarioParseError, match="mapping"):
            load_scenario(path)


class TestCliRun:
    def test_row_count_and_exit_zero(self, tmp_path, capsys):
        scen = write_yaml(tmp_path / "top.yaml", MINIMAL_FREE_TOP)
        out = tmp_path / "out"
        assert main(["run", scen, "--out", str(out)]) == 0
        rows = (out / "trajectory.csv").read_text().splitlines()
        assert len(rows) == 1 + 101  # header + steps + 1 data rows
        header = rows[0].split(",")
        assert header[0] == "t"
        assert "omega_12" in header and "g_11" in header

    def test_reports_written(self, tmp_path):
        scen = write_yaml(tmp_path / "top.yaml", MINIMAL_FREE_TOP)
        out = tmp_path / "out"
        main(["run", scen, "--out", str(out)])
        report = json.loads((out / "report.json").read_text())
        assert report["system"] == "lr"
        assert report["quantities"]["energy"]["max_rel_drift"] < 1e-10
        txt = (out / "report.txt").read_text()
        assert "energy" in txt

    def test_byte_identical_reruns(self, tmp_path):
        scen = write_yaml(tmp_path / "top.yaml", MINIMAL_FREE_TOP)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        main(["run", scen, "--out", str(out_a)])
        main(["run", scen, "--out", str(out_b)])
        assert (out_a / "trajectory.csv").read_bytes() == (out_b / "trajectory.csv").read_bytes()

    def test_csv_is_locale_independent_and_round_trips(self, tmp_path):
        scen = write_yaml(tmp_path / "top.yaml", MINIMAL_FREE_TOP)
        out = tmp_path / "out"
        main(["run", scen, "--out", str(out)])
        body = (out / "trajectory.csv").read_text()
        assert "," in body and ";" not in body
        data = np.genfromtxt(out / "trajectory.csv", delimiter=",", names=True)
        assert data.shape[0] == 101
        # 17 significant digits round-trip doubles exactly
        assert data["omega_13"][0] == 1.0

    def test_unknown_system_exit_2(self, tmp_path):
        scen = write_yaml(tmp_path / "bad.yaml", dict(MINIMAL_FREE_TOP, system="nope"))
        assert main(["run", scen, "--out", str(tmp_path / "o")]) == 2

    def test_invalid_initial_state_exit_3(self, tmp_path):
        data = dict(MINIMAL_FREE_TOP)
        data["constraints"] = {"generators": [[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]]}
        scen = write_yaml(tmp_path / "bad.yaml", data)
        assert main(["run", scen, "--out", str(tmp_path / "o")]) == 3

    def test_integration_failure_exit_4_with_partial_csv(self, tmp_path, monkeypatch, capsys):
        from lrsim import cli
        from lrsim.integrators import IntegrationError, Trajectory

        def exploding(system, y0, cfg, hook=None):
            partial = Trajectory(system, np.array([0.0]), y0[None, :].copy())
            raise IntegrationError("stage blew up", partial, 3)

        monkeypatch.setattr(cli, "integrate", exploding)
        scen = write_yaml(tmp_path / "top.yaml", MINIMAL_FREE_TOP)
        out = tmp_path / "out"
        assert main(["run", scen, "--out", str(out)]) == 4
        assert "step 3" in capsys.readouterr().err
        assert (out / "trajectory.csv").exists()

    def test_rolling_demo_scenario_energy_drift(self, tmp_path):
        out = tmp_path / "out"
        assert main(["run", str(SCENARIO_DIR / "rubber_chaplygin3.yaml"), "--out", str(out)]) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["quantities"]["energy"]["max_rel_drift"] < 1e-8

    def test_step_overrides(self, tmp_path):
        scen = write_yaml(tmp_path / "top.yaml", MINIMAL_FREE_TOP)
        out = tmp_path / "out"
        main(["run", scen, "--out", str(out), "--steps", "10", "--method", "lie-rk4"])
        rows = (out / "trajectory.csv").read_text().splitlines()
        assert len(rows) == 1 + 11


class TestCliVerify:
    def test_free_top_passes(self, tmp_path, capsys):
        scen = write_yaml(tmp_path / "top.yaml", MINIMAL_FREE_TOP)
        assert main(["verify", scen]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "FAIL" not in out

    def test_coupled_scenario_includes_equivalence_check(self, capsys):
        assert main(["verify", str(SCENARIO_DIR / "coupled.yaml")]) == 0
        out = capsys.readouterr().out
        assert "reduction_equivalence" in out
        assert "W_reconstruction" in out

    def test_penalty_scenario_prints_decreasing_table(self, capsys):
        assert main(["verify", str(SCENARIO_DIR / "lplusr_penalty.yaml")]) == 0
        out = capsys.readouterr().out
        assert "penalty-limit error table" in out
        assert "epsilon_limit[decreasing]" in out

    def test_entry_point_runs_as_subprocess(self, tmp_path):
        scen = write_yaml(tmp_path / "top.yaml", MINIMAL_FREE_TOP)
        proc = subprocess.run(
            [sys.executable, "-m", "lrsim.cli", "verify", scen],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert "checks passed" in proc.stdout
