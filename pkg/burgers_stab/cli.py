"""burgers-stab cli."""

import json
from pathlib import Path
from typing import Optional

import typer

from burgers_stab.analysis import (
    CertificatePreconditionError,
    FitDomainError,
    InsufficientDataError,
    Observable,
    compare_to_certificate,
    fit_decay_rate,
    inequality_ensemble,
)
from burgers_stab.certificates import (
    CertificateLedger,
    Claim,
    InequalityConstants,
    InfeasibleCertificateError,
    PlanFamily,
    RateTooSmallError,
    plan,
)
from burgers_stab.config import ConfigError, RunConfig, SweepConfig
from burgers_stab.defaults import (
    DEFAULT_BETA3,
    DEFAULT_BETA4,
    DEFAULT_C0,
    DEFAULT_FLOOR,
    DEFAULT_PLANNER_MARGIN,
    DEFAULT_TOLERANCE,
)
from burgers_stab.dynamics import PhysicalParams, StepSizeError
from burgers_stab.harness import run_simulation, run_sweep
from burgers_stab.spectral_basis import ResolutionError
from burgers_stab.trace import Trace
from burgers_stab.utils import output_root

app = typer.Typer()

EXIT_CONFIG = 1
EXIT_DIVERGED = 2
EXIT_INFEASIBLE = 3
EXIT_VIOLATIONS = 4


def _fail(message: str, code: int):
    typer.echo(f"[burgers-stab] {message}", err=True)
    raise typer.Exit(code=code)


@app.command()
def run(
    config: Path = typer.Argument(..., help="JSON run configuration."),
    output_dir: Path = typer.Option(None, "--output-dir", "-o", help="run directory, defaults to <output root>/<name>"),
):
    r"""Simulate one configuration and write its trace, ledger and manifest."""
    try:
        run_config = RunConfig.from_file(config)
    except ConfigError as e:
        _fail(f"invalid configuration: {e}", EXIT_CONFIG)
    directory = output_dir or output_root() / run_config.name
    typer.echo(f"[burgers-stab] running {run_config.name} ({run_config.system.value}) into {directory}")
    try:
        result = run_simulation(run_config, directory)
    except StepSizeError as e:
        _fail(f"{e}", EXIT_CONFIG)
    except (InfeasibleCertificateError, RateTooSmallError) as e:
        _fail(f"planner failed: {e}", EXIT_INFEASIBLE)
    except (ResolutionError, ValueError, OSError) as e:
        _fail(f"invalid run: {e}", EXIT_CONFIG)

    manifest = result.manifest
    typer.echo(f"[burgers-stab] status: {manifest.status}, {len(result.trace)} samples")
    if manifest.fit is not None:
        typer.echo(f"[burgers-stab] fitted {manifest.fit.observable} rate: {manifest.fit.rate:.6g}")
    if manifest.verdict is not None:
        outcome = "pass" if manifest.verdict.passed else "fail"
        typer.echo(f"[burgers-stab] certified rate: {manifest.verdict.certified_rate:.6g} ({outcome})")
    if result.diverged:
        _fail(f"run diverged near t={result.trace.divergence_time:g}; trace truncated", EXIT_DIVERGED)


@app.command("plan")
def plan_command(
    family: PlanFamily = typer.Argument(..., help="certificate family to plan for."),
    nu: float = typer.Option(..., "--nu", help="viscosity."),
    r: float = typer.Option(..., "--R", help="pressure constant."),
    k: float = typer.Option(1.0, "--k", help="nonlocal coefficient."),
    xi: float = typer.Option(None, "--xi", help="prescribed decay rate (nonlocal Burgers families)."),
    h0: float = typer.Option(0.0, "--H0", help="time integral of the squared source norm."),
    h0_sup: float = typer.Option(0.0, "--H0-sup", help="supremum of the squared source norm."),
    mu: float = typer.Option(None, "--mu", help="user gain (volume family only)."),
    beta4: float = typer.Option(DEFAULT_BETA4, "--beta4"),
    beta3: float = typer.Option(DEFAULT_BETA3, "--beta3"),
    c0: float = typer.Option(DEFAULT_C0, "--c0"),
    margin: float = typer.Option(DEFAULT_PLANNER_MARGIN, "--margin", help="relative margin over the threshold."),
    output: Path = typer.Option(None, "--output", "-o", help="write the ledger as JSON to this file."),
):
    r"""Plan the controller gain and size certifying a synchronization claim."""
    try:
        params = PhysicalParams(nu, r, k)
        constants = InequalityConstants(beta4, beta3, c0)
    except ValueError as e:
        _fail(f"invalid parameters: {e}", EXIT_CONFIG)
    try:
        gains = plan(family, params, constants, xi, h0, h0_sup, mu, margin)
    except (InfeasibleCertificateError, RateTooSmallError) as e:
        _fail(f"infeasible: {e}", EXIT_INFEASIBLE)
    except ValueError as e:
        _fail(f"invalid request: {e}", EXIT_CONFIG)

    ledger = gains.ledger
    typer.echo(f"[burgers-stab] {family.value}: mu = {gains.mu:.10g}, N = {gains.N}")
    typer.echo(f"[burgers-stab] certified rate: {ledger.certified_rate(family.claim):.10g}")
    for check in ledger.conditions_for(family.claim):
        relation = ">" if check.strict else ">="
        typer.echo(f"[burgers-stab]   {check.name}: margin {check.margin:.6g} {relation} 0 ({check.satisfied})")
    for correction in ledger.corrections:
        typer.echo(f"[burgers-stab] correction: {correction}")
    if output is not None:
        output.write_text(ledger.to_json(indent=2))
        typer.echo(f"[burgers-stab] ledger written to {output}")


@app.command()
def sweep(
    config: Path = typer.Argument(..., help="JSON sweep configuration."),
    output_dir: Path = typer.Option(None, "--output-dir", "-o", help="sweep directory, defaults to the output root."),
    jobs: int = typer.Option(1, "--jobs", "-j", help="number of runs executed in parallel."),
):
    r"""Run the cartesian product of a sweep and write a summary table."""
    try:
        sweep_config = SweepConfig.from_file(config)
        runs = sweep_config.expand()
    except ConfigError as e:
        _fail(f"invalid sweep: {e}", EXIT_CONFIG)
    directory = output_dir or output_root()
    typer.echo(f"[burgers-stab] sweeping {len(runs)} runs into {directory}")
    summary = run_sweep(sweep_config, directory, n_jobs=jobs)
    failed = int((summary["status"] == "failed").sum())
    typer.echo(f"[burgers-stab] {len(summary) - failed} runs finished, {failed} failed")


@app.command("verify-inequalities")
def verify_inequalities(
    seed: int = typer.Option(42, "--seed"),
    count: int = typer.Option(1000, "--count"),
    max_mode: int = typer.Option(20, "--max-mode"),
    points: int = typer.Option(512, "--points"),
    beta4: float = typer.Option(DEFAULT_BETA4, "--beta4"),
    beta3: float = typer.Option(DEFAULT_BETA3, "--beta3"),
    c0: float = typer.Option(DEFAULT_C0, "--c0"),
    output: Path = typer.Option(None, "--output", "-o", help="write the report as JSON to this file."),
):
    r"""Check the functional inequalities on seeded random fields."""
    try:
        report = inequality_ensemble(seed, count, max_mode, InequalityConstants(beta4, beta3, c0), points)
    except ValueError as e:
        _fail(f"invalid request: {e}", EXIT_CONFIG)
    for name, margin in sorted(report.worst_margins.items()):
        typer.echo(f"[burgers-stab] {name}: worst relative margin {margin:.6g}")
    if output is not None:
        output.write_text(report.to_json(indent=2))
    if not report.passed:
        _fail(f"{len(report.violations)} violations in {count} samples", EXIT_VIOLATIONS)
    typer.echo(f"[burgers-stab] no violations in {count} samples")


@app.command("fit-rate")
def fit_rate(
    trace_csv: Path = typer.Argument(..., help="trace CSV written by a run."),
    observable: Observable = typer.Option(Observable.Z_ENERGY, "--observable"),
    burn_in: float = typer.Option(0.0, "--burn-in"),
    floor: float = typer.Option(DEFAULT_FLOOR, "--floor"),
    ledger_path: Path = typer.Option(None, "--ledger", help="ledger JSON to compare the fitted rate against."),
    claim: Claim = typer.Option(None, "--claim"),
    tolerance: float = typer.Option(DEFAULT_TOLERANCE, "--tolerance"),
):
    r"""Fit the decay rate of a stored trace, optionally against a certificate."""
    try:
        trace = Trace.from_csv(trace_csv)
        fit = fit_decay_rate(trace, observable, burn_in, floor)
    except (InsufficientDataError, FitDomainError, ValueError, OSError) as e:
        _fail(f"cannot fit {trace_csv}: {e}", EXIT_CONFIG)
    typer.echo(f"[burgers-stab] {observable.value} rate: {fit.rate:.10g} over [{fit.window[0]:g}, {fit.window[1]:g}]")
    typer.echo(f"[burgers-stab] residual: {fit.residual:.3g}, floor hit: {fit.floor_hit}")
    if ledger_path is None:
        return
    if claim is None:
        _fail("--claim is required with --ledger", EXIT_CONFIG)
    ledger = CertificateLedger.from_json(ledger_path.read_text())
    try:
        verdict = compare_to_certificate(fit, ledger, claim, tolerance)
    except CertificatePreconditionError as e:
        _fail(f"{e}", EXIT_INFEASIBLE)
    typer.echo(f"[burgers-stab] verdict: {json.dumps(verdict.to_dict())}")


@app.callback()
def callback():
    r"""burgers-stab command-line tool."""


if __name__ == "__main__":
    app()
