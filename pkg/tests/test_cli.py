"""End-to-end checks of the command line verbs."""

import csv
import json

import pytest

from uamsim import cli


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr().out
    return code, out


class TestPlan:
    def test_plan_prints_cost_report(self, capsys):
        code, out = run_cli(capsys, "plan", "--count", "4", "--seed", "3")
        assert code == 0
        doc = json.loads(out)
        assert doc["aircraft"] == 4
        assert doc["total_cost_s"] > 0
        assert doc["evaluations"] >= 1
        assert len(doc["paths"]) == 4

    def test_plan_deterministic(self, capsys):
        _, first = run_cli(capsys, "plan", "--count", "6", "--seed", "9")
        _, second = run_cli(capsys, "plan", "--count", "6", "--seed", "9")
        assert first == second


class TestRun:
    def test_run_writes_outputs(self, tmp_path, capsys):
        code, out = run_cli(
            capsys, "run", "--horizon", "90", "--rate", "0.05",
            "--out", str(tmp_path))
        assert code == 0
        summary = json.loads(out)
        assert summary["horizon"] == 90
        assert (tmp_path / "trajectory.csv").exists()
        assert (tmp_path / "metrics.json").exists()
        with open(tmp_path / "trajectory.csv") as fh:
            header = next(csv.reader(fh))
        assert {"t", "id", "x", "y", "z"} <= set(header)

    def test_validate_accepts_run_output(self, tmp_path, capsys):
        run_cli(capsys, "run", "--horizon", "90", "--out", str(tmp_path))
        code, out = run_cli(capsys, "validate", str(tmp_path / "trajectory.csv"))
        assert code == 0
        assert json.loads(out)["problems"] == []


class TestErrors:
    def test_missing_config_is_config_error(self, capsys):
        code, _ = run_cli(capsys, "run", "--scenario", "file",
                          "--config", "/nonexistent/scn.json")
        assert code == cli.EXIT_CONFIG

    def test_file_scenario_requires_config(self, capsys):
        code, _ = run_cli(capsys, "run", "--scenario", "file")
        assert code == cli.EXIT_CONFIG

    def test_bad_verb_rejected(self):
        with pytest.raises(SystemExit):
            cli.main(["frobnicate"])

    def test_fit_mfd_malformed_csv_is_config_error(self, tmp_path, capsys):
        bad = tmp_path / "samples.csv"
        bad.write_text("accumulation,outflow\n1.0,0.0\n")
        code, _ = run_cli(capsys, "fit-mfd", str(bad))
        assert code == cli.EXIT_CONFIG

    def test_fit_mfd_degenerate_data_is_runtime_error(self, tmp_path, capsys):
        bad = tmp_path / "samples.csv"
        bad.write_text("window_start,accumulation,outflow,density,flow\n"
                       "0.0,1.0,0.0,0.1,0.0\n")
        code, _ = run_cli(capsys, "fit-mfd", str(bad))
        assert code == cli.EXIT_RUNTIME
