"""Post-processing of traces: decay-rate fits, certificate verdicts, and inequality checks on random fields."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from dataclasses_json import dataclass_json
from sklearn.linear_model import LinearRegression

from burgers_stab._logging import logger
from burgers_stab.certificates import CertificateLedger, Claim, InequalityConstants, energy_envelope
from burgers_stab.defaults import (
    DEFAULT_BURN_IN_HOLD,
    DEFAULT_FLOOR,
    DEFAULT_TAIL_COUNTS,
    DEFAULT_TOLERANCE,
    INEQUALITY_SLACK,
    MIN_FIT_SAMPLES,
)
from burgers_stab.dynamics import PhysicalParams, SystemKind
from burgers_stab.spectral_basis import (
    GridField,
    GridSpec,
    VolumePartition,
    dirichlet_eigenvalue,
    h1_seminorm,
    l2_norm,
    lp_norm,
    modal_coeffs,
    modal_reconstruct,
    piecewise_reconstruct,
    sup_norm,
    volume_averages,
)
from burgers_stab.trace import CHANNELS, TRACE_COLUMNS, Trace

__all__ = [
    "CHANNELS",
    "TRACE_COLUMNS",
    "Trace",
    "Observable",
    "RateFit",
    "Verdict",
    "InequalityReport",
    "InsufficientDataError",
    "FitDomainError",
    "CertificatePreconditionError",
    "fit_series",
    "fit_decay_rate",
    "compare_to_certificate",
    "check_inequalities",
    "inequality_ensemble",
    "default_burn_in",
    "envelope_violations",
]


class InsufficientDataError(ValueError):
    pass


class FitDomainError(ValueError):
    pass


class CertificatePreconditionError(RuntimeError):
    """Raised when a verdict is requested for a claim whose sufficient conditions do not hold."""


class Observable(str, Enum):
    """Squared quantities bounded by the synchronization results."""

    Z_ENERGY = "z_energy"
    Z_H1_ENERGY = "z_h1_energy"
    Z_L2 = "z_l2"
    Z_H1 = "z_h1"
    V_ENERGY = "v_energy"

    def evaluate(self, trace: Trace) -> np.ndarray:
        if self is Observable.Z_ENERGY:
            return _square(trace, "l2_z") + _square(trace, "W", optional=True)
        if self is Observable.Z_H1_ENERGY:
            return 0.5 * _square(trace, "h1_z") + _square(trace, "l2_z") + _square(trace, "W", optional=True)
        if self is Observable.Z_L2:
            return _square(trace, "l2_z")
        if self is Observable.Z_H1:
            return _square(trace, "h1_z")
        return _square(trace, "l2_v") + _square(trace, "U", optional=True)

    @classmethod
    def for_claim(cls, claim: Union[Claim, str]) -> "Observable":
        claim = Claim(claim)
        if claim is Claim.OBE_L2:
            return cls.Z_ENERGY
        if claim is Claim.OBE_H1:
            return cls.Z_H1_ENERGY
        if claim is Claim.BNN_H1_MODAL:
            return cls.Z_H1
        return cls.Z_L2


def _square(trace: Trace, name: str, optional: bool = False) -> np.ndarray:
    if optional and not trace.has_channel(name):
        return np.zeros(len(trace))
    return trace.channel(name) ** 2


@dataclass_json
@dataclass(frozen=True)
class RateFit:
    """Log-linear fit ``log q(t) ~ intercept - rate * t``.

    ``rate`` refers to the squared quantity that was fitted; ``residual`` is the RMS misfit in log space.
    """

    rate: float
    intercept: float
    window: Tuple[float, float]
    residual: float
    floor_hit: bool
    samples: int
    observable: Optional[str] = None

    def __post_init__(self):
        if not self.window[0] < self.window[1]:
            raise ValueError(f"fit window must have positive length, found {self.window}")
        if self.residual < 0:
            raise ValueError(f"fit residual must be non-negative, found {self.residual}")


def fit_series(
    times: Sequence[float], values: Sequence[float], burn_in: float = 0.0, floor: float = DEFAULT_FLOOR
) -> RateFit:
    """Fit an exponential decay to ``values`` from ``burn_in`` until the first sample at or below ``floor``.

    :raises InsufficientDataError: fewer than ``MIN_FIT_SAMPLES`` samples remain in the window.
    :raises FitDomainError: a non-finite or non-positive value remains in the window.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = times >= burn_in
    t, y = times[keep], values[keep]

    below = np.flatnonzero(y <= floor)
    floor_hit = below.size > 0
    if floor_hit:
        t, y = t[: below[0]], y[: below[0]]
    if len(t) < MIN_FIT_SAMPLES:
        raise InsufficientDataError(
            f"only {len(t)} samples above floor {floor:g} after burn-in {burn_in:g}; at least {MIN_FIT_SAMPLES} needed"
        )
    if not np.all(np.isfinite(y)) or np.any(y <= 0):
        raise FitDomainError("cannot fit a decay rate to non-finite or non-positive values")

    log_y = np.log(y)
    model = LinearRegression().fit(t.reshape(-1, 1), log_y)
    residual = float(np.sqrt(np.mean((log_y - model.predict(t.reshape(-1, 1))) ** 2)))
    return RateFit(
        rate=float(-model.coef_[0]),
        intercept=float(model.intercept_),
        window=(float(t[0]), float(t[-1])),
        residual=residual,
        floor_hit=bool(floor_hit),
        samples=len(t),
    )


def fit_decay_rate(
    trace: Trace,
    observable: Union[Observable, str] = Observable.Z_ENERGY,
    burn_in: float = 0.0,
    floor: float = DEFAULT_FLOOR,
) -> RateFit:
    """Decay rate of a squared observable of ``trace`` after ``burn_in``."""
    observable = Observable(observable)
    fit = fit_series(trace.times, observable.evaluate(trace), burn_in, floor)
    logger.info(
        f"fitted {observable.value} decay rate {fit.rate:.6g} over [{fit.window[0]:g}, {fit.window[1]:g}] "
        f"({fit.samples} samples, floor hit: {fit.floor_hit})"
    )
    return RateFit(fit.rate, fit.intercept, fit.window, fit.residual, fit.floor_hit, fit.samples, observable.value)


@dataclass_json
@dataclass(frozen=True)
class Verdict:
    claim: str
    passed: bool
    fitted_rate: float
    certified_rate: float
    margin: float
    tolerance: float
    conditions_satisfied: bool


def compare_to_certificate(
    fit: RateFit,
    ledger: CertificateLedger,
    claim: Union[Claim, str],
    tolerance: float = DEFAULT_TOLERANCE,
    require_conditions: bool = True,
) -> Verdict:
    """Pass when the fitted rate reaches the certified rate up to a relative ``tolerance``.

    :param require_conditions: raise when the ledger does not meet the claim's conditions; when ``False`` the
        comparison is still made and ``conditions_satisfied`` records that the claim was not certified.
    """
    claim = Claim(claim)
    if not 0 <= tolerance < 1:
        raise ValueError(f"tolerance must lie in [0, 1), found {tolerance}")
    satisfied = ledger.satisfies(claim)
    if require_conditions and not satisfied:
        failing = [c.name for c in ledger.conditions_for(claim) if not c.satisfied]
        raise CertificatePreconditionError(
            f"the {claim.value} conditions fail at mu={ledger.mu:g}, N={ledger.N}: {', '.join(failing)}"
        )
    certified = ledger.certified_rate(claim)
    return Verdict(
        claim=claim.value,
        passed=bool(fit.rate >= certified * (1.0 - tolerance)),
        fitted_rate=fit.rate,
        certified_rate=certified,
        margin=fit.rate - certified,
        tolerance=tolerance,
        conditions_satisfied=satisfied,
    )


@dataclass_json
@dataclass(frozen=True)
class InequalityViolation:
    sample: int
    inequality: str
    lhs: float
    rhs: float


@dataclass_json
@dataclass
class InequalityReport:
    """Outcome of checking the functional inequalities on a seeded ensemble of random fields.

    ``worst_margins`` holds, per inequality, the smallest relative margin ``(rhs - lhs) / rhs`` seen.
    """

    seed: int
    count: int
    max_mode: int
    points: int
    constants: InequalityConstants
    violations: List[InequalityViolation] = field(default_factory=list)
    worst_margins: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.violations


def check_inequalities(
    u: GridField, constants: InequalityConstants, tail_counts: Sequence[int] = DEFAULT_TAIL_COUNTS
) -> List[Tuple[str, float, float]]:
    """Left and right sides of every checked inequality for the field ``u``."""
    grid = u.grid
    norm_sq = l2_norm(u) ** 2
    grad = h1_seminorm(u)
    grad_sq = grad**2
    checks = [
        ("poincare", norm_sq, grad_sq / dirichlet_eigenvalue(1)),
        ("agmon", sup_norm(u) ** 2, constants.c0 * grad_sq),
        ("l4-interpolation", lp_norm(u, 4), constants.beta4 * norm_sq ** (3.0 / 8.0) * grad ** (1.0 / 4.0)),
    ]
    for n in tail_counts:
        if n < grid.max_mode:
            tail = max(norm_sq - float(np.sum(modal_coeffs(u, n) ** 2)), 0.0)
            checks.append((f"tail-N{n}", tail, grad_sq / dirichlet_eigenvalue(n + 1)))
        if n <= grid.max_cells:
            partition = VolumePartition(n)
            remainder = u - piecewise_reconstruct(volume_averages(u, partition), partition, grid)
            checks.append((f"volume-N{n}", l2_norm(remainder), partition.width * grad))
    return checks


def inequality_ensemble(
    seed: int = 42,
    count: int = 1000,
    max_mode: int = 20,
    constants: Optional[InequalityConstants] = None,
    points: int = 512,
    slack: float = INEQUALITY_SLACK,
) -> InequalityReport:
    """Check the functional inequalities on ``count`` seeded random sine polynomials with modes up to
    ``max_mode`` and coefficients uniform in [-1, 1]."""
    if count < 1:
        raise ValueError(f"ensemble needs count >= 1, found {count}")
    constants = constants or InequalityConstants()
    grid = GridSpec(points)
    rng = np.random.default_rng(seed)
    report = InequalityReport(seed, count, max_mode, points, constants)
    for sample in range(count):
        u = modal_reconstruct(rng.uniform(-1.0, 1.0, size=max_mode), grid)
        for name, lhs, rhs in check_inequalities(u, constants):
            if lhs > rhs + slack * max(1.0, abs(rhs)):
                report.violations.append(InequalityViolation(sample, name, lhs, rhs))
            margin = (rhs - lhs) / rhs if rhs > 0 else 0.0
            report.worst_margins[name] = min(report.worst_margins.get(name, np.inf), margin)
    if report.violations:
        logger.warning(f"{len(report.violations)} inequality violations in {count} samples (seed {seed})")
    else:
        logger.info(f"no inequality violations in {count} samples (seed {seed})")
    return report


def default_burn_in(trace: Trace, radius: float, hold: float = DEFAULT_BURN_IN_HOLD) -> float:
    """First sample time from which the reference energy stays inside ``radius`` for ``hold`` time units.

    Returns the end of the trace when the energy never settles.
    """
    energy = Observable.V_ENERGY.evaluate(trace)
    inside = np.isfinite(energy) & (energy <= radius)
    times = trace.times
    n = len(times)
    next_outside = np.full(n + 1, n)
    for i in range(n - 1, -1, -1):
        next_outside[i] = next_outside[i + 1] if inside[i] else i
    for i in range(n):
        if not inside[i]:
            continue
        exit_index = next_outside[i]
        if exit_index == n or times[exit_index] > times[i] + hold:
            return float(times[i])
    return float(times[-1])


def envelope_violations(
    trace: Trace,
    params: PhysicalParams,
    system: Optional[Union[SystemKind, str]] = None,
    source_energy: Optional[Sequence[float]] = None,
    slack: float = 1e-3,
) -> List[float]:
    """Sample times at which the reference energy exceeds its transient envelope by more than ``slack``.

    :param source_energy: accumulated ``int_0^t ||h||^2`` at every sample time, nonlocal equation only.
    """
    system = SystemKind(system or trace.meta["system"])
    energy = Observable.V_ENERGY.evaluate(trace)
    start = trace.times[0]
    accumulated = np.zeros(len(trace)) if source_energy is None else np.asarray(source_energy, dtype=float)
    violations = []
    for t, e, h0 in zip(trace.times, energy, accumulated):
        bound = energy_envelope(params, system, energy[0], t - start, h0)
        if not e <= bound * (1.0 + slack) + slack:
            violations.append(float(t))
    return violations
