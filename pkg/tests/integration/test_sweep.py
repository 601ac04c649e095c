import copy

import numpy as np
import pandas as pd
import pytest

from burgers_stab.analysis import Observable, compare_to_certificate, fit_decay_rate
from burgers_stab.config import RunConfig, SweepConfig
from burgers_stab.harness import (
    FINAL_STATE_FILE,
    LEDGER_FILE,
    MANIFEST_FILE,
    SUMMARY_FILE,
    TRACE_FILE,
    load_run,
    run_simulation,
    run_sweep,
)

SMALL_SYNC = {
    "name": "small-sync",
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
    "fit": {"burn_in": 0.2},
    "horizon": 2.0,
    "sample_stride": 10,
}

BNN_GAINS = {
    "system": "bnn-controlled-modal",
    "physical": {"nu": 0.5, "R": 8.0, "k": 1.0},
    "initial": {
        "master": {"preset": "mode1", "amplitude": 0.5},
        "follower": {"preset": "mode1", "amplitude": -0.5},
    },
    "grid": {"points": 128},
    "stepper": {"dt": 5e-4},
    "controller": {"family": "modal", "mu": 0.0, "count": 8},
    "planner": {"xi": 5.0},
    "fit": {"burn_in": 0.05},
    "horizon": 1.0,
    "sample_stride": 2,
}


def test_run_writes_every_artifact(tmp_path):
    result = run_simulation(RunConfig.from_dict(SMALL_SYNC), tmp_path / "run")
    for name in (TRACE_FILE, FINAL_STATE_FILE, LEDGER_FILE, MANIFEST_FILE):
        assert (tmp_path / "run" / name).exists()
    manifest = result.manifest
    assert manifest.status == "completed"
    assert manifest.claim == "obe-l2"
    assert manifest.observable == "z_energy"
    assert manifest.controller == {"family": "modal", "mu": 5.0, "count": 2}
    assert manifest.final_state["t"] == pytest.approx(2.0)
    final = pd.read_csv(tmp_path / "run" / FINAL_STATE_FILE)
    assert list(final.columns) == ["x", "master_v", "follower_v"]
    assert len(final) == 32


def test_loaded_run_matches_the_manifest(tmp_path):
    config = RunConfig.from_dict(SMALL_SYNC)
    result = run_simulation(config, tmp_path / "run")
    trace, ledger, manifest = load_run(tmp_path / "run")
    np.testing.assert_array_equal(trace.times, result.trace.times)
    assert ledger.to_json() == result.ledger.to_json()
    assert manifest["fingerprint"] == config.fingerprint()
    assert RunConfig.from_dict(manifest["config"]).fingerprint() == manifest["fingerprint"]
    assert manifest["fit"]["rate"] == pytest.approx(result.manifest.fit.rate)


def test_runs_are_reproducible(tmp_path):
    payload = copy.deepcopy(SMALL_SYNC)
    payload["initial"]["follower"]["perturbation"] = {"preset": "random", "amplitude": 0.2}
    config = RunConfig.from_dict(payload)
    run_simulation(config, tmp_path / "first")
    run_simulation(config, tmp_path / "second")
    first = (tmp_path / "first" / TRACE_FILE).read_bytes()
    assert first == (tmp_path / "second" / TRACE_FILE).read_bytes()


@pytest.mark.parametrize("n_jobs", [1, 2])
def test_sweep_writes_one_directory_per_run(tmp_path, n_jobs):
    sweep = SweepConfig(base=SMALL_SYNC, axes={"physical.R": [0.5, 1.0], "controller.mu": [0.0, 5.0]})
    summary = run_sweep(sweep, tmp_path, n_jobs=n_jobs)
    assert len(summary) == 4
    assert sorted(p.name for p in tmp_path.iterdir() if p.is_dir()) == ["run-000", "run-001", "run-002", "run-003"]
    written = pd.read_csv(tmp_path / SUMMARY_FILE)
    assert list(written["run"]) == ["run-000", "run-001", "run-002", "run-003"]
    assert set(written["status"]) == {"completed"}
    assert list(written["mu"]) == [0.0, 5.0, 0.0, 5.0]


def test_summary_agrees_with_the_run_directories(tmp_path):
    sweep = SweepConfig(base=SMALL_SYNC, axes={"controller.mu": [0.0, 5.0]})
    summary = run_sweep(sweep, tmp_path)
    for _, row in summary.iterrows():
        trace, ledger, manifest = load_run(tmp_path / row["run"])
        config = RunConfig.from_dict(manifest["config"])
        fit = fit_decay_rate(trace, Observable.for_claim(config.claim()), manifest["burn_in"], config.fit.floor)
        verdict = compare_to_certificate(fit, ledger, config.claim(), config.fit.tolerance, require_conditions=False)
        assert fit.rate == pytest.approx(row["fitted_rate"])
        assert verdict.passed == row["passed"] == manifest["verdict"]["passed"]


def test_failing_run_does_not_stop_the_sweep(tmp_path):
    # the second step breaks the advective limit of the initial datum
    base = copy.deepcopy(SMALL_SYNC)
    base["initial"]["master"] = {"preset": "mode1", "amplitude": 20.0}
    sweep = SweepConfig(base=base, axes={"stepper.dt": [1e-4, 5e-3]})
    summary = run_sweep(sweep, tmp_path)
    assert list(summary["status"]) == ["completed", "failed"]
    assert "StepSizeError" in summary["error"].iloc[1]


def test_feedback_gain_decides_the_verdict(tmp_path):
    sweep = SweepConfig(base=BNN_GAINS, axes={"controller.mu": [0.0, 60.0]})
    summary = run_sweep(sweep, tmp_path)
    assert list(summary["claim"]) == ["bnn-l2-modal", "bnn-l2-modal"]
    assert list(summary["passed"]) == [False, True]
    assert summary["fitted_rate"].iloc[1] >= 4.5
