import copy
import json

import pandas as pd
import pytest
from typer.testing import CliRunner

from burgers_stab.certificates import CertificateLedger
from burgers_stab.cli import EXIT_CONFIG, EXIT_DIVERGED, EXIT_INFEASIBLE, EXIT_VIOLATIONS, app
from burgers_stab.defaults import DEFAULT_TOLERANCE
from burgers_stab.harness import LEDGER_FILE, MANIFEST_FILE, SUMMARY_FILE, TRACE_FILE

runner = CliRunner()

SYNC = {
    "name": "cli-sync",
    "system": "obe-controlled",
    "physical": {"nu": 1.0, "R": 1.0},
    "initial": {
        "master": {"preset": "bump", "amplitude": 0.5},
        "follower": {"preset": "bump", "amplitude": 0.5},
        "U0": 0.0,
        "U0_follower": 0.5,
    },
    "grid": {"points": 32},
    "stepper": {"dt": 1e-3},
    "controller": {"family": "modal", "mu": 5.0, "count": 2},
    "fit": {"burn_in": 0.1},
    "horizon": 2.0,
    "sample_stride": 10,
}


def test_run_writes_the_trace(tmp_path, obe_payload, write_json):
    result = runner.invoke(app, ["run", str(write_json("run.json", obe_payload)), "-o", str(tmp_path / "out")])
    assert result.exit_code == 0, result.output
    assert "status: completed" in result.output
    trace = pd.read_csv(tmp_path / "out" / TRACE_FILE)
    assert len(trace) == 101
    assert (tmp_path / "out" / MANIFEST_FILE).exists()


def test_run_rejects_an_invalid_config(tmp_path, obe_payload, write_json):
    obe_payload["physical"]["nu"] = 0.0
    result = runner.invoke(app, ["run", str(write_json("run.json", obe_payload)), "-o", str(tmp_path / "out")])
    assert result.exit_code == EXIT_CONFIG
    assert "invalid configuration" in result.output


def test_run_rejects_a_step_above_the_advective_limit(tmp_path, obe_payload, write_json):
    obe_payload["initial"]["master"]["amplitude"] = 100.0
    obe_payload["grid"]["points"] = 64
    result = runner.invoke(app, ["run", str(write_json("run.json", obe_payload)), "-o", str(tmp_path / "out")])
    assert result.exit_code == EXIT_CONFIG
    assert "dt <=" in result.output


def test_run_reports_divergence(tmp_path, write_json):
    payload = {
        "system": "bnn",
        "physical": {"nu": 0.01, "R": 200.0, "k": 1e-6},
        "initial": {"master": {"preset": "mode1", "amplitude": 0.1}},
        "grid": {"points": 64},
        "stepper": {"dt": 1e-3},
        "horizon": 1.0,
    }
    result = runner.invoke(app, ["run", str(write_json("blowup.json", payload)), "-o", str(tmp_path / "out")])
    assert result.exit_code == EXIT_DIVERGED
    assert "diverged" in result.output
    # artifacts of a diverged run are still written
    assert (tmp_path / "out" / TRACE_FILE).exists()


def test_plan_in_the_viscous_regime(tmp_path):
    ledger_path = tmp_path / "ledger.json"
    result = runner.invoke(app, ["plan", "obe-l2", "--nu", "10", "--R", "0.1", "-o", str(ledger_path)])
    assert result.exit_code == 0, result.output
    assert "N = 1" in result.output
    ledger = CertificateLedger.from_json(ledger_path.read_text())
    assert ledger.N == 1


def test_plan_reports_infeasibility():
    result = runner.invoke(app, ["plan", "obe-l2", "--nu", "1", "--R", "1"])
    assert result.exit_code == EXIT_INFEASIBLE
    assert "infeasible" in result.output


def test_plan_volume_count_for_a_user_gain():
    result = runner.invoke(app, ["plan", "bnn-volume-l2", "--mu", "10", "--nu", "1", "--R", "1", "--xi", "6"])
    assert result.exit_code == 0, result.output
    assert "N = 7" in result.output


def test_plan_rejects_a_rate_below_half_the_first_eigenvalue():
    result = runner.invoke(app, ["plan", "bnn-modal-l2", "--nu", "1", "--R", "1", "--xi", "4"])
    assert result.exit_code == EXIT_INFEASIBLE


def test_verify_inequalities_with_default_constants():
    result = runner.invoke(app, ["verify-inequalities"])
    assert result.exit_code == 0, result.output
    assert "no violations in 1000 samples" in result.output


def test_verify_inequalities_is_deterministic(tmp_path):
    for name in ("first.json", "second.json"):
        result = runner.invoke(app, ["verify-inequalities", "--count", "1", "--seed", "7", "-o", str(tmp_path / name)])
        assert result.exit_code == 0, result.output
    assert (tmp_path / "first.json").read_text() == (tmp_path / "second.json").read_text()


def test_verify_inequalities_flags_a_wrong_constant():
    result = runner.invoke(app, ["verify-inequalities", "--count", "20", "--beta4", "0.1"])
    assert result.exit_code == EXIT_VIOLATIONS
    assert "violations" in result.output


def test_sweep_command(tmp_path, write_json):
    path = write_json("sweep.json", {"base": SYNC, "axes": {"physical.R": [0.5, 1.0], "controller.mu": [0.0, 5.0]}})
    result = runner.invoke(app, ["sweep", str(path), "-o", str(tmp_path / "sweep")])
    assert result.exit_code == 0, result.output
    assert "4 runs finished, 0 failed" in result.output
    assert len(pd.read_csv(tmp_path / "sweep" / SUMMARY_FILE)) == 4


def test_sweep_rejects_an_empty_axis(tmp_path, write_json):
    path = write_json("sweep.json", {"base": SYNC, "axes": {"physical.R": []}})
    result = runner.invoke(app, ["sweep", str(path), "-o", str(tmp_path / "sweep")])
    assert result.exit_code == EXIT_CONFIG


@pytest.fixture
def sync_run(tmp_path, write_json):
    out = tmp_path / "sync"
    result = runner.invoke(app, ["run", str(write_json("sync.json", copy.deepcopy(SYNC))), "-o", str(out)])
    assert result.exit_code == 0, result.output
    return out


def test_fit_rate_of_a_stored_trace(sync_run):
    args = ["fit-rate", str(sync_run / TRACE_FILE), "--observable", "z_energy", "--burn-in", "0.1"]
    result = runner.invoke(app, args)
    assert result.exit_code == 0, result.output
    assert "z_energy rate:" in result.output


def test_fit_rate_against_an_uncertified_ledger(sync_run):
    args = ["fit-rate", str(sync_run / TRACE_FILE), "--burn-in", "0.1", "--ledger", str(sync_run / LEDGER_FILE)]
    assert runner.invoke(app, args).exit_code == EXIT_CONFIG
    result = runner.invoke(app, args + ["--claim", "obe-l2"])
    assert result.exit_code == EXIT_INFEASIBLE


def _verdict(output):
    line = next(line for line in output.splitlines() if line.startswith("[burgers-stab] verdict: "))
    return json.loads(line[len("[burgers-stab] verdict: ") :])


@pytest.mark.parametrize("extra, tolerance", [([], DEFAULT_TOLERANCE), (["--tolerance", "0.25"], 0.25)])
def test_fit_rate_verdict_tolerance(sync_run, tmp_path, extra, tolerance):
    ledger_path = tmp_path / "planned.json"
    assert runner.invoke(app, ["plan", "obe-l2", "--nu", "10", "--R", "0.1", "-o", str(ledger_path)]).exit_code == 0
    args = ["fit-rate", str(sync_run / TRACE_FILE), "--burn-in", "0.1", "--ledger", str(ledger_path)]
    result = runner.invoke(app, args + ["--claim", "obe-l2"] + extra)
    assert result.exit_code == 0, result.output
    assert _verdict(result.output)["tolerance"] == tolerance


def test_output_root_from_the_environment(tmp_path, monkeypatch, obe_payload, write_json):
    monkeypatch.setenv("BURGERS_STAB_OUT", str(tmp_path / "root"))
    result = runner.invoke(app, ["run", str(write_json("run.json", obe_payload))])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "root" / "obe-small" / TRACE_FILE).exists()
