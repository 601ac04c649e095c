"""Run orchestration: simulate, persist artifacts, evaluate the certificate, and run parameter sweeps."""

import json
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import pandas as pd
from dataclasses_json import dataclass_json
from joblib import Parallel, delayed

from burgers_stab._logging import logger
from burgers_stab.analysis import (
    FitDomainError,
    InsufficientDataError,
    Observable,
    RateFit,
    Verdict,
    compare_to_certificate,
    default_burn_in,
    fit_decay_rate,
)
from burgers_stab.certificates import CertificateLedger, GainPlan
from burgers_stab.config import RunConfig, SweepConfig
from burgers_stab.defaults import CSV_FLOAT_FORMAT
from burgers_stab.dynamics import simulate
from burgers_stab.trace import Trace
from burgers_stab.utils import package_versions

TRACE_FILE = "trace.csv"
LEDGER_FILE = "ledger.json"
MANIFEST_FILE = "manifest.json"
FINAL_STATE_FILE = "final_state.csv"
SUMMARY_FILE = "summary.csv"


@dataclass_json
@dataclass
class RunManifest:
    """Provenance of one run directory."""

    name: str
    fingerprint: str
    config: Dict[str, Any]
    versions: Dict[str, Optional[str]]
    started_at: str
    wall_time: float
    status: str
    divergence_time: Optional[float] = None
    controller: Dict[str, Any] = field(default_factory=dict)
    claim: Optional[str] = None
    observable: Optional[str] = None
    burn_in: Optional[float] = None
    fit: Optional[RateFit] = None
    verdict: Optional[Verdict] = None
    final_state: Dict[str, float] = field(default_factory=dict)
    files: List[str] = field(default_factory=list)


@dataclass
class RunResult:
    directory: Path
    trace: Trace
    manifest: RunManifest
    ledger: Optional[CertificateLedger] = None
    plan: Optional[GainPlan] = None

    @property
    def diverged(self) -> bool:
        return self.trace.diverged


def persist_final_state(trace: Trace, path: Path) -> Dict[str, float]:
    """Write the last finite fields to ``path``; returns the scalar part of the final state."""
    arrays = {k: v for k, v in trace.final_state.items() if k in ("x", "master_v", "follower_v")}
    pd.DataFrame(arrays).to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
    return {k: float(v) for k, v in trace.final_state.items() if k not in arrays}


def evaluate_run(
    trace: Trace, config: RunConfig, ledger: Optional[CertificateLedger]
) -> Tuple[Optional[float], Optional[RateFit], Optional[Verdict]]:
    """Fit the error decay of a finished run and compare it with the ledger.

    Returns the burn-in used, the fit and the verdict; the last two are ``None`` when no follower was simulated,
    the run diverged, or too little data remains above the floor.
    """
    if trace.diverged or not trace.has_channel("l2_z"):
        return None, None, None
    claim = config.claim()
    burn_in = config.fit.burn_in
    if burn_in is None:
        burn_in = 0.0 if ledger is None else default_burn_in(trace, ledger.ball_radius())
    try:
        fit = fit_decay_rate(trace, Observable.for_claim(claim), burn_in, config.fit.floor)
    except (InsufficientDataError, FitDomainError) as e:
        logger.warning(f"no decay rate for {config.name}: {e}")
        return burn_in, None, None
    if ledger is None:
        return burn_in, fit, None
    verdict = compare_to_certificate(fit, ledger, claim, config.fit.tolerance, require_conditions=False)
    return burn_in, fit, verdict


def run_simulation(config: RunConfig, directory: Path) -> RunResult:
    """Execute one run and write its trace, final state, ledger and manifest into ``directory``.

    A diverged run still writes every artifact; the trace ends at the last finite sample.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    started_at = datetime.now(timezone.utc).isoformat()
    started = time.perf_counter()

    controller, gains = config.resolve_controller()
    ledger = config.ledger(controller)
    trace = simulate(config.to_simulation(controller))

    files = [TRACE_FILE, FINAL_STATE_FILE]
    trace.to_csv(directory / TRACE_FILE)
    final_scalars = persist_final_state(trace, directory / FINAL_STATE_FILE)
    if ledger is not None:
        (directory / LEDGER_FILE).write_text(ledger.to_json(indent=2))
        files.append(LEDGER_FILE)

    burn_in, fit, verdict = evaluate_run(trace, config, ledger)
    files.append(MANIFEST_FILE)
    manifest = RunManifest(
        name=config.name,
        fingerprint=config.fingerprint(),
        config=config.to_dict(),
        versions=package_versions(),
        started_at=started_at,
        wall_time=time.perf_counter() - started,
        status="diverged" if trace.diverged else "completed",
        divergence_time=trace.divergence_time,
        controller=json.loads(controller.to_json()),
        claim=config.claim().value,
        observable=None if fit is None else fit.observable,
        burn_in=burn_in,
        fit=fit,
        verdict=verdict,
        final_state=final_scalars,
        files=files,
    )
    (directory / MANIFEST_FILE).write_text(manifest.to_json(indent=2))
    logger.info(f"wrote {', '.join(files)} to {directory}")
    return RunResult(directory, trace, manifest, ledger, gains)


def _summary_row(name: str, overrides: Dict[str, Any], config: RunConfig, directory: Path) -> Dict[str, Any]:
    row: Dict[str, Any] = {"run": name, **{axis: json.dumps(value) for axis, value in overrides.items()}}
    try:
        result = run_simulation(config, directory / name)
    except Exception as e:
        logger.warning(f"sweep run {name} failed: {e}")
        return {**row, "status": "failed", "error": f"{type(e).__name__}: {e}"}
    m = result.manifest
    return {
        **row,
        "status": m.status,
        "mu": m.controller.get("mu"),
        "N": m.controller.get("count"),
        "claim": m.claim,
        "fitted_rate": None if m.fit is None else m.fit.rate,
        "certified_rate": None if m.verdict is None else m.verdict.certified_rate,
        "passed": None if m.verdict is None else m.verdict.passed,
        "conditions_satisfied": None if m.verdict is None else m.verdict.conditions_satisfied,
        "error": None,
    }


def run_sweep(sweep: SweepConfig, directory: Path, n_jobs: int = 1) -> pd.DataFrame:
    """Run every configuration of the sweep in its own subdirectory and write ``summary.csv``.

    A failing run is recorded in the summary and does not stop the sweep.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    runs = sweep.expand()
    logger.info(f"sweeping {len(runs)} runs over {', '.join(sweep.axes)} with n_jobs={n_jobs}")
    rows = Parallel(n_jobs=n_jobs)(
        delayed(_summary_row)(name, overrides, config, directory) for name, overrides, config in runs
    )
    summary = pd.DataFrame(rows)
    summary.to_csv(directory / SUMMARY_FILE, index=False, float_format=CSV_FLOAT_FORMAT)
    logger.info(f"wrote {SUMMARY_FILE} with {len(summary)} rows to {directory}")
    return summary


def load_run(directory: Path) -> Tuple[Trace, Optional[CertificateLedger], Dict[str, Any]]:
    """Read back the trace, ledger and raw manifest of a run directory."""
    directory = Path(directory)
    manifest = json.loads((directory / MANIFEST_FILE).read_text())
    trace = Trace.from_csv(directory / TRACE_FILE, meta=dict(manifest.get("config") or {}))
    ledger_path = directory / LEDGER_FILE
    ledger = CertificateLedger.from_json(ledger_path.read_text()) if ledger_path.exists() else None
    return trace, ledger, manifest
