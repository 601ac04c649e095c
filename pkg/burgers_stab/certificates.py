"""Closed-form stabilization certificates and gain planning.

Every constant entering the sufficient conditions for exponential synchronization is evaluated in floating point.
Overflowing intermediate quantities evaluate to ``inf`` instead of raising, so an infeasible planning problem is
reported rather than crashing the arithmetic.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, NamedTuple, Optional, Union

import numpy as np
from dataclasses_json import dataclass_json

from burgers_stab._logging import logger
from burgers_stab.defaults import (
    DEFAULT_BETA3,
    DEFAULT_BETA4,
    DEFAULT_C0,
    DEFAULT_PLANNER_MARGIN,
    FIXED_POINT_CEILING,
    FIXED_POINT_MAX_ITER,
    FIXED_POINT_RTOL,
)
from burgers_stab.dynamics import PhysicalParams, SystemKind
from burgers_stab.spectral_basis import dirichlet_eigenvalue

LAMBDA1 = dirichlet_eigenvalue(1)


class InfeasibleCertificateError(RuntimeError):
    """Raised when no finite gain satisfies the sufficient conditions."""

    def __init__(self, message: str, bound: str, last_iterate: float):
        super().__init__(message)
        self.bound = bound
        self.last_iterate = last_iterate


class RateTooSmallError(ValueError):
    """Raised when the prescribed decay rate ``xi`` does not exceed ``lambda1 * nu / 2``."""


class Claim(str, Enum):
    """Synchronization statements a ledger can certify."""

    OBE_L2 = "obe-l2"
    OBE_H1 = "obe-h1"
    BNN_L2_MODAL = "bnn-l2-modal"
    BNN_H1_MODAL = "bnn-h1-modal"
    BNN_L2_VOLUME = "bnn-l2-volume"


class PlanFamily(str, Enum):
    OBE_L2 = "obe-l2"
    OBE_H1 = "obe-h1"
    BNN_MODAL_L2 = "bnn-modal-l2"
    BNN_MODAL_H1 = "bnn-modal-h1"
    BNN_VOLUME_L2 = "bnn-volume-l2"

    @property
    def claim(self) -> Claim:
        return {
            PlanFamily.OBE_L2: Claim.OBE_L2,
            PlanFamily.OBE_H1: Claim.OBE_H1,
            PlanFamily.BNN_MODAL_L2: Claim.BNN_L2_MODAL,
            PlanFamily.BNN_MODAL_H1: Claim.BNN_H1_MODAL,
            PlanFamily.BNN_VOLUME_L2: Claim.BNN_L2_VOLUME,
        }[self]

    @property
    def is_obe(self) -> bool:
        return self in (PlanFamily.OBE_L2, PlanFamily.OBE_H1)


@dataclass_json
@dataclass(frozen=True)
class InequalityConstants:
    """Interpolation constants on (0, 1).

    :param beta4: Gagliardo-Nirenberg constant of ``||u||_L4 <= beta4 ||u||^(3/4) ||u'||^(1/4)``.
    :param beta3: Gagliardo-Nirenberg constant used for the cubic derivative terms.
    :param c0: Agmon constant of ``||u||_inf^2 <= c0 ||u'||^2``.
    """

    beta4: float = DEFAULT_BETA4
    beta3: float = DEFAULT_BETA3
    c0: float = DEFAULT_C0

    def __post_init__(self):
        for name in ("beta4", "beta3", "c0"):
            if getattr(self, name) <= 0:
                raise ValueError(f"inequality constant {name} must be positive, found {getattr(self, name)}")


@dataclass_json
@dataclass(frozen=True)
class ConditionCheck:
    """One inequality of a sufficient condition, stored as ``margin = lhs - rhs``."""

    name: str
    satisfied: bool
    margin: float
    strict: bool = False
    claims: List[str] = field(default_factory=list)

    @staticmethod
    def holds(margin: float, strict: bool) -> bool:
        return bool(margin > 0) if strict else bool(margin >= 0)

    @classmethod
    def evaluate(cls, name: str, margin: float, strict: bool, claims: List[Claim]) -> "ConditionCheck":
        return cls(name, cls.holds(margin, strict), float(margin), strict, [c.value for c in claims])

    def recheck(self) -> bool:
        return self.holds(self.margin, self.strict)


@dataclass_json
@dataclass
class CertificateLedger:
    """All constants of one certificate evaluation, the condition margins, and how each constant was obtained.

    Bounds that do not apply to the ledger's system stay ``None``. ``H1`` and ``H3`` are norms; ``M1``-``M4``,
    ``H2`` and ``H4`` bound squared norms.
    """

    system: str
    nu: float
    R: float
    k: float
    mu: float
    N: int
    constants: InequalityConstants
    lambda1: float = LAMBDA1
    lambda_tail: float = 0.0
    target: Optional[str] = None
    d0: Optional[float] = None
    d1: Optional[float] = None
    d2: Optional[float] = None
    a0: Optional[float] = None
    alpha0: Optional[float] = None
    sigma: Optional[float] = None
    xi: Optional[float] = None
    M1: Optional[float] = None
    M2: Optional[float] = None
    M3: Optional[float] = None
    M4: Optional[float] = None
    M5: Optional[float] = None
    Q0: Optional[float] = None
    H0: Optional[float] = None
    H0_sup: Optional[float] = None
    H1: Optional[float] = None
    H2: Optional[float] = None
    H3: Optional[float] = None
    H4: Optional[float] = None
    A0: Optional[float] = None
    A1: Optional[float] = None
    Q1: Optional[float] = None
    mu_min: Optional[float] = None
    N_min: Optional[int] = None
    condition_report: List[ConditionCheck] = field(default_factory=list)
    provenance: Dict[str, str] = field(default_factory=dict)
    corrections: List[str] = field(default_factory=list)

    def conditions_for(self, claim: Union[Claim, str]) -> List[ConditionCheck]:
        claim = Claim(claim)
        checks = [c for c in self.condition_report if claim.value in c.claims]
        if not checks:
            raise ValueError(f"a {self.system} ledger cannot certify the {claim.value} claim")
        return checks

    def satisfies(self, claim: Union[Claim, str]) -> bool:
        return all(c.satisfied for c in self.conditions_for(claim))

    def certified_rate(self, claim: Union[Claim, str]) -> float:
        """Decay rate of the squared error quantity guaranteed once the claim's conditions hold."""
        claim = Claim(claim)
        self.conditions_for(claim)
        if claim is Claim.OBE_L2:
            return self.d2
        if claim is Claim.OBE_H1:
            return self.alpha0
        if claim is Claim.BNN_L2_VOLUME:
            return self.sigma + self.a0
        return self.xi

    def ball_radius(self) -> float:
        """Radius of the absorbing ball for the squared energy of the reference trajectory."""
        if self.system == "obe":
            return self.M1
        return self.H1**2

    def replays(self) -> bool:
        return all(c.recheck() == c.satisfied for c in self.condition_report)


class GainPlan(NamedTuple):
    mu: float
    N: int
    ledger: CertificateLedger


def _pow(base: float, exponent: float) -> float:
    with np.errstate(over="ignore", invalid="ignore"):
        return float(np.float_power(base, exponent))


def _mul(*factors: float) -> float:
    with np.errstate(over="ignore", invalid="ignore"):
        return float(np.prod(np.array(factors, dtype=float)))


def tail_eigenvalue(N: int) -> float:
    return dirichlet_eigenvalue(N + 1)


def cubic_coupling_constant(nu: float, constants: InequalityConstants) -> float:
    """Constant ``beta3^24 7^7 2^-9 nu^-7`` produced by Young's inequality on the cubic derivative terms."""
    return _mul(_pow(constants.beta3, 24), 7.0**7, 2.0**-9, _pow(nu, -7))


def coupling_bound_a0(nu: float, H2: float, H4: float, constants: InequalityConstants) -> float:
    """Advective coupling bound entering the nonlocal Burgers L2 conditions."""
    scale = 0.75 * _pow(nu, -1.0 / 3.0)
    return scale * (
        _pow(2.0 * constants.beta4, 4.0 / 3.0) * _pow(H4, 2.0 / 3.0)
        + _pow(constants.beta4, 4.0 / 3.0) * _pow(H2, 2.0 / 3.0)
    )


def coupling_bound_q1(
    params: PhysicalParams, H1: float, H2: float, H3: float, H4: float, constants: InequalityConstants
) -> float:
    """Coupling bound entering the nonlocal Burgers H1 conditions."""
    c0, nu = constants.c0, params.nu
    return (
        4.0 * c0**2 / nu * (H4 + H3)
        + params.R
        + params.k * _pow(LAMBDA1, -0.5) * (H1 + H3) * _pow(H2, 0.5)
    )


def obe_rates(nu: float) -> Dict[str, float]:
    return {
        "d0": nu * min(1.0, 2.0 * LAMBDA1),
        "d1": nu * min(1.0, 2.0 * LAMBDA1),
        "d2": nu * min(1.0, LAMBDA1),
        "alpha0": 0.5 * nu * min(1.0, LAMBDA1 / 2.0),
        "a0": 0.5 * nu * LAMBDA1,
    }


OBE_PROVENANCE = {
    "d0": "nu * min(1, 2 lambda1), decay rate of the reference energy",
    "d1": "nu * min(1, 2 lambda1), decay rate of the controlled energy",
    "d2": "nu * min(1, lambda1), L2 synchronization rate",
    "alpha0": "(nu / 2) * min(1, lambda1 / 2), H1 synchronization rate",
    "M1": "2 R^2 / (nu d0), absorbing radius of ||v||^2 + U^2",
    "M2": "2 (M1^2 / nu + C M1^5) / (lambda1 nu), twice the steady Gronwall quotient for ||v_x||^2",
    "M3": "2 R^2 / (nu d1) + (mu / d1) M1, absorbing radius of the controlled energy",
    "M4": "2 (M1 M3 / nu + C M3^5 + (mu / 2) M2) / (lambda1 nu), twice the steady quotient, controlled ||v_x||^2",
    "M5": "sqrt(M3) + M3^2 / (2 nu) + (3/4) nu^(-1/3) beta4^(8/3) (sqrt(M4) + 2 sqrt(M2))^(4/3)",
    "Q0": "(4 c0^2 / nu) M4 + (4 c0^2 / nu + 1 / (2 nu)) M2 + sqrt(M3)",
    "C": "beta3^24 7^7 2^-9 nu^-7",
}

OBE_CORRECTIONS = [
    "Q0: leading coefficient printed as 4 nu c0^2 / nu, evaluated as 4 c0^2 / nu",
    "H1 error estimate: repeated ||z_x||^2 term read as the sum of the controlled and reference gradients",
    "H1 synchronization exponent printed without alpha0; certified rate is alpha0",
]


def obe_bounds(params: PhysicalParams, constants: InequalityConstants, mu: float) -> Dict[str, float]:
    """Absorbing-ball radii and the gain thresholds ``M5`` and ``Q0`` of the original Burgers system."""
    nu, R = params.nu, params.R
    rates = obe_rates(nu)
    C = cubic_coupling_constant(nu, constants)
    M1 = 2.0 * R**2 / (nu * rates["d0"])
    M2 = 2.0 * (M1**2 / nu + _mul(C, _pow(M1, 5))) / (LAMBDA1 * nu)
    M3 = 2.0 * R**2 / (nu * rates["d1"]) + mu / rates["d1"] * M1
    M4 = 2.0 * (M1 * M3 / nu + _mul(C, _pow(M3, 5)) + 0.5 * mu * M2) / (LAMBDA1 * nu)
    M5 = (
        _pow(M3, 0.5)
        + _pow(M3, 2) / (2.0 * nu)
        + 0.75
        * _pow(nu, -1.0 / 3.0)
        * _pow(constants.beta4, 8.0 / 3.0)
        * _pow(_pow(M4, 0.5) + 2.0 * _pow(M2, 0.5), 4.0 / 3.0)
    )
    c = 4.0 * constants.c0**2 / nu
    Q0 = c * M4 + (c + 1.0 / (2.0 * nu)) * M2 + _pow(M3, 0.5)
    return {**rates, "C": C, "M1": M1, "M2": M2, "M3": M3, "M4": M4, "M5": M5, "Q0": Q0}


def obe_ledger(
    params: PhysicalParams,
    constants: Optional[InequalityConstants] = None,
    mu: float = 0.0,
    N: int = 1,
    target: str = "l2",
) -> CertificateLedger:
    """Evaluate every constant of the original Burgers certificate at gain ``mu`` with ``N`` controlled modes."""
    constants = constants or InequalityConstants()
    if mu < 0:
        raise ValueError(f"gain must be non-negative, found {mu}")
    if N < 1:
        raise ValueError(f"number of controlled modes must be >= 1, found {N}")
    b = obe_bounds(params, constants, mu)
    lam = tail_eigenvalue(N)
    nu = params.nu
    l2_claims = [Claim.OBE_L2, Claim.OBE_H1]
    h1_claims = [Claim.OBE_H1]
    report = [
        ConditionCheck.evaluate("M5 <= mu", mu - b["M5"], False, l2_claims),
        ConditionCheck.evaluate("M5 / lambda_{N+1} <= nu / 4", nu / 4 - b["M5"] / lam, False, l2_claims),
        ConditionCheck.evaluate("Q0 <= mu", mu - b["Q0"], False, h1_claims),
        ConditionCheck.evaluate("Q0 / lambda_{N+1} <= nu / 4", nu / 4 - b["Q0"] / lam, False, h1_claims),
    ]
    return CertificateLedger(
        system="obe",
        nu=nu,
        R=params.R,
        k=params.k,
        mu=float(mu),
        N=int(N),
        constants=constants,
        lambda_tail=lam,
        target=target,
        d0=b["d0"],
        d1=b["d1"],
        d2=b["d2"],
        a0=b["a0"],
        alpha0=b["alpha0"],
        M1=b["M1"],
        M2=b["M2"],
        M3=b["M3"],
        M4=b["M4"],
        M5=b["M5"],
        Q0=b["Q0"],
        condition_report=report,
        provenance=dict(OBE_PROVENANCE),
        corrections=list(OBE_CORRECTIONS),
    )


BNN_PROVENANCE = {
    "sigma": "xi - lambda1 nu / 2",
    "a0": "nu lambda1 / 2, dissipation gained on the uncontrolled volume-element remainder",
    "H1": "sqrt(2 (R^2 / (2 lambda1 nu k) + H0 / (lambda1 nu))), absorbing radius of ||v||",
    "H2": "2 (4 H0_sup / nu + 4 R^2 H1^2 / nu + C H1^10) / (nu lambda1), twice the steady quotient for ||v_x||^2",
    "H3": "sqrt(((mu / 2) H1^2 + H0_sup / 2 + (1 + R^2) / k) / (nu lambda1)), absorbing radius of ||u||",
    "H4": "2 (C H3^10 + 8 R^2 H3^2 + 8 H0_sup + (mu / 2) H2) / (nu lambda1), twice the steady quotient for ||u_x||^2",
    "A0": "(3/4) (2 beta4)^(4/3) nu^(-1/3) H4^(2/3) + (3/4) beta4^(4/3) nu^(-1/3) H2^(2/3)",
    "A1": "R + (3/4) beta4^(4/3) nu^(-1/3) H2^(2/3)",
    "Q1": "(4 c0^2 / nu) (H4 + H3) + R + k lambda1^(-1/2) (H1 + H3) sqrt(H2)",
    "C": "beta3^24 7^7 2^-9 nu^-7",
}

BNN_CORRECTIONS = [
    "volume gain: stated threshold sigma + A1 and derived threshold A1 + sigma / 2 are both enforced",
    "volume resolution: interval length taken as 1 / N on the unit interval",
]


def bnn_bounds(
    params: PhysicalParams, constants: InequalityConstants, H0: float, H0_sup: float, mu: float
) -> Dict[str, float]:
    """Absorbing-ball radii and coupling bounds of the nonlocal Burgers equation."""
    nu, R, k = params.nu, params.R, params.k
    C = cubic_coupling_constant(nu, constants)
    H1_sq = 2.0 * (R**2 / (2.0 * LAMBDA1 * nu * k) + H0 / (LAMBDA1 * nu))
    H2 = 2.0 * (4.0 * H0_sup / nu + 4.0 * R**2 * H1_sq / nu + _mul(C, _pow(H1_sq, 5))) / (nu * LAMBDA1)
    H3_sq = (0.5 * mu * H1_sq + 0.5 * H0_sup + (1.0 + R**2) / k) / (nu * LAMBDA1)
    H4 = 2.0 * (_mul(C, _pow(H3_sq, 5)) + 8.0 * R**2 * H3_sq + 8.0 * H0_sup + 0.5 * mu * H2) / (nu * LAMBDA1)
    H1, H3 = math.sqrt(H1_sq), _pow(H3_sq, 0.5)
    A0 = coupling_bound_a0(nu, H2, H4, constants)
    A1 = R + 0.75 * _pow(constants.beta4, 4.0 / 3.0) * _pow(nu, -1.0 / 3.0) * _pow(H2, 2.0 / 3.0)
    Q1 = coupling_bound_q1(params, H1, H2, H3, H4, constants)
    return {"C": C, "H1": H1, "H2": H2, "H3": H3, "H4": H4, "A0": A0, "A1": A1, "Q1": Q1}


def _check_rate(nu: float, xi: float) -> float:
    sigma = xi - LAMBDA1 * nu / 2.0
    if sigma <= 0:
        raise RateTooSmallError(
            f"prescribed rate xi={xi:g} must exceed lambda1 * nu / 2 = {LAMBDA1 * nu / 2.0:.6g}"
        )
    return sigma


def bnn_ledger(
    params: PhysicalParams,
    constants: Optional[InequalityConstants] = None,
    H0: float = 0.0,
    mu: float = 0.0,
    N: int = 1,
    xi: float = 0.0,
    H0_sup: float = 0.0,
    target: str = "l2",
) -> CertificateLedger:
    """Evaluate every constant of the nonlocal Burgers certificates at gain ``mu`` and ``N`` modes or intervals.

    :param H0: time integral of ``||h(t)||^2`` over the whole run.
    :param H0_sup: supremum in time of ``||h(t)||^2``.
    :param xi: prescribed decay rate, must exceed ``lambda1 * nu / 2``.
    """
    constants = constants or InequalityConstants()
    if H0 < 0 or H0_sup < 0:
        raise ValueError(f"source energies must be non-negative, found H0={H0}, H0_sup={H0_sup}")
    if mu < 0:
        raise ValueError(f"gain must be non-negative, found {mu}")
    if N < 1:
        raise ValueError(f"N must be >= 1, found {N}")
    sigma = _check_rate(params.nu, xi)
    b = bnn_bounds(params, constants, H0, H0_sup, mu)
    nu, R = params.nu, params.R
    lam = tail_eigenvalue(N)
    a0 = 0.5 * nu * LAMBDA1
    modal = [Claim.BNN_L2_MODAL, Claim.BNN_H1_MODAL]
    h1 = [Claim.BNN_H1_MODAL]
    volume = [Claim.BNN_L2_VOLUME]
    report = [
        ConditionCheck.evaluate(
            "mu > xi / 2 - lambda1 nu / 4 + R + A0", mu - (0.5 * xi - LAMBDA1 * nu / 4.0 + R + b["A0"]), True, modal
        ),
        ConditionCheck.evaluate(
            "(sigma + 2 A0 + 2 R) / lambda_{N+1} < nu / 2",
            nu / 2 - (sigma + 2.0 * b["A0"] + 2.0 * R) / lam,
            True,
            modal,
        ),
        ConditionCheck.evaluate("mu > Q1 + sigma / 2", mu - (b["Q1"] + 0.5 * sigma), True, h1),
        ConditionCheck.evaluate(
            "(sigma + 2 Q1) / lambda_{N+1} < nu / 2", nu / 2 - (sigma + 2.0 * b["Q1"]) / lam, True, h1
        ),
        ConditionCheck.evaluate("mu >= A1 + sigma / 2", mu - (b["A1"] + 0.5 * sigma), False, volume),
        ConditionCheck.evaluate("mu >= sigma + A1", mu - (sigma + b["A1"]), False, volume),
        ConditionCheck.evaluate(
            "nu lambda1 >= (4 / nu) mu^2 / N^2", nu * LAMBDA1 - 4.0 / nu * mu**2 / N**2, False, volume
        ),
    ]
    return CertificateLedger(
        system="bnn",
        nu=nu,
        R=R,
        k=params.k,
        mu=float(mu),
        N=int(N),
        constants=constants,
        lambda_tail=lam,
        target=target,
        a0=a0,
        sigma=sigma,
        xi=float(xi),
        H0=float(H0),
        H0_sup=float(H0_sup),
        H1=b["H1"],
        H2=b["H2"],
        H3=b["H3"],
        H4=b["H4"],
        A0=b["A0"],
        A1=b["A1"],
        Q1=b["Q1"],
        condition_report=report,
        provenance=dict(BNN_PROVENANCE),
        corrections=list(BNN_CORRECTIONS),
    )


def solve_gain(bound: Callable[[float], float], name: str, margin: float = DEFAULT_PLANNER_MARGIN) -> float:
    """Smallest self-consistent gain: iterate ``mu <- (1 + margin) * bound(mu)`` from zero.

    :raises InfeasibleCertificateError: when the iterates overflow, exceed the ceiling or stop converging.
    """
    mu = 0.0
    for iteration in range(1, FIXED_POINT_MAX_ITER + 1):
        update = (1.0 + margin) * bound(mu)
        logger.debug(f"fixed point for {name}: iteration {iteration}, mu={update:.17g}")
        if not math.isfinite(update) or update > FIXED_POINT_CEILING:
            raise InfeasibleCertificateError(
                f"the gain threshold {name} grows faster than the gain (iterate {update:.6g} after {iteration} "
                "steps); no finite gain satisfies the conditions",
                bound=name,
                last_iterate=mu,
            )
        if abs(update - mu) <= FIXED_POINT_RTOL * abs(update):
            if iteration > FIXED_POINT_MAX_ITER // 2:
                logger.warning(f"fixed point for {name} converged slowly ({iteration} iterations); near tangency")
            return update
        mu = update
    raise InfeasibleCertificateError(
        f"the gain threshold {name} did not settle within {FIXED_POINT_MAX_ITER} iterations (last mu={mu:.6g})",
        bound=name,
        last_iterate=mu,
    )


def smallest_count(holds: Callable[[int], bool], estimate: float) -> int:
    """Smallest ``N >= 1`` with ``holds(N)``, searched around a closed-form estimate."""
    N = max(1, int(math.ceil(estimate)))
    while not holds(N):
        N += 1
    while N > 1 and holds(N - 1):
        N -= 1
    return N


def _tail_estimate(threshold: float) -> float:
    # lambda_{N+1} >= threshold  <=>  N >= sqrt(threshold) / pi - 1
    return math.sqrt(max(threshold, 0.0)) / math.pi - 1.0


def plan_gains_obe(
    params: PhysicalParams,
    constants: Optional[InequalityConstants] = None,
    target: str = "l2",
    margin: float = DEFAULT_PLANNER_MARGIN,
) -> GainPlan:
    """Plan ``(mu, N)`` certifying L2 (``target="l2"``) or H1 (``target="h1"``) synchronization of the original
    Burgers system."""
    constants = constants or InequalityConstants()
    if target not in ("l2", "h1"):
        raise ValueError(f"target must be 'l2' or 'h1', found {target!r}")
    if target == "l2":
        name = "M5"

        def threshold(mu: float) -> float:
            return obe_bounds(params, constants, mu)["M5"]

    else:
        name = "max(M5, Q0)"

        def threshold(mu: float) -> float:
            b = obe_bounds(params, constants, mu)
            return max(b["M5"], b["Q0"])

    mu = solve_gain(threshold, name, margin)
    bound = threshold(mu)
    nu = params.nu
    N = smallest_count(
        lambda n: ConditionCheck.holds(nu / 4 - bound / tail_eigenvalue(n), False), _tail_estimate(4.0 * bound / nu)
    )
    ledger = obe_ledger(params, constants, mu, N, target)
    ledger.mu_min, ledger.N_min = mu, N
    claim = Claim.OBE_L2 if target == "l2" else Claim.OBE_H1
    logger.info(f"planned obe-{target}: mu={mu:.6g}, N={N}, certified rate {ledger.certified_rate(claim):.6g}")
    for correction in ledger.corrections:
        logger.warning(f"certificate correction applied: {correction}")
    return GainPlan(mu, N, ledger)


def plan_gains_bnn(
    params: PhysicalParams,
    constants: Optional[InequalityConstants] = None,
    H0: float = 0.0,
    H0_sup: float = 0.0,
    xi: float = 0.0,
    family: str = "modal-l2",
    mu: Optional[float] = None,
    margin: float = DEFAULT_PLANNER_MARGIN,
) -> GainPlan:
    """Plan ``(mu, N)`` for the nonlocal Burgers equation.

    :param family: ``modal-l2``, ``modal-h1`` or ``volume-l2``.
    :param mu: volume family only; a user gain from which ``N`` is derived instead of the planned minimum.
    """
    constants = constants or InequalityConstants()
    if family not in ("modal-l2", "modal-h1", "volume-l2"):
        raise ValueError(f"family must be one of modal-l2, modal-h1, volume-l2, found {family!r}")
    if mu is not None and family != "volume-l2":
        raise ValueError("a user gain is only accepted by the volume-l2 family")
    nu, R = params.nu, params.R
    sigma = _check_rate(nu, xi)

    if family == "volume-l2":
        A1 = bnn_bounds(params, constants, H0, H0_sup, 0.0)["A1"]
        planned = (1.0 + margin) * max(A1 + 0.5 * sigma, sigma + A1)
        if not math.isfinite(planned) or planned > FIXED_POINT_CEILING:
            raise InfeasibleCertificateError(
                f"volume gain threshold A1 + sigma evaluates to {planned:.6g}", bound="A1", last_iterate=0.0
            )
        gain = planned if mu is None else float(mu)
        if gain <= 0:
            raise ValueError(f"volume gain must be positive, found {gain}")
        N = smallest_count(
            lambda n: ConditionCheck.holds(nu * LAMBDA1 - 4.0 / nu * gain**2 / n**2, False),
            2.0 * gain / (nu * math.sqrt(LAMBDA1)) - 1.0,
        )
        ledger = bnn_ledger(params, constants, H0, gain, N, xi, H0_sup, target="l2")
        if not ledger.satisfies(Claim.BNN_L2_VOLUME):
            negative = [c.name for c in ledger.conditions_for(Claim.BNN_L2_VOLUME) if not c.satisfied]
            logger.warning(f"user gain mu={gain:g} misses the volume conditions: {', '.join(negative)}")
    else:
        h1 = family == "modal-h1"

        def gain_threshold(m: float) -> float:
            b = bnn_bounds(params, constants, H0, H0_sup, m)
            threshold = 0.5 * xi - LAMBDA1 * nu / 4.0 + R + b["A0"]
            return max(threshold, b["Q1"] + 0.5 * sigma) if h1 else threshold

        def tail_ok(m: float, n: int) -> bool:
            b = bnn_bounds(params, constants, H0, H0_sup, m)
            lam = tail_eigenvalue(n)
            ok = ConditionCheck.holds(nu / 2 - (sigma + 2.0 * b["A0"] + 2.0 * R) / lam, True)
            if h1:
                ok = ok and ConditionCheck.holds(nu / 2 - (sigma + 2.0 * b["Q1"]) / lam, True)
            return ok

        name = "max(A0-threshold, Q1 + sigma / 2)" if h1 else "A0-threshold"
        gain = solve_gain(gain_threshold, name, margin)
        b = bnn_bounds(params, constants, H0, H0_sup, gain)
        tail = sigma + 2.0 * max(b["A0"] + R, b["Q1"] if h1 else 0.0)
        if not math.isfinite(tail):
            raise InfeasibleCertificateError(
                f"tail threshold overflows at mu={gain:.6g}", bound=name, last_iterate=gain
            )
        N = smallest_count(lambda n: tail_ok(gain, n), _tail_estimate(2.0 * tail / nu))
        ledger = bnn_ledger(params, constants, H0, gain, N, xi, H0_sup, target="h1" if h1 else "l2")

    ledger.mu_min, ledger.N_min = gain, N
    claim = PlanFamily(f"bnn-{family}").claim
    logger.info(f"planned bnn-{family}: mu={gain:.6g}, N={N}, certified rate {ledger.certified_rate(claim):.6g}")
    return GainPlan(gain, N, ledger)


def plan(
    family: Union[PlanFamily, str],
    params: PhysicalParams,
    constants: Optional[InequalityConstants] = None,
    xi: Optional[float] = None,
    H0: float = 0.0,
    H0_sup: float = 0.0,
    mu: Optional[float] = None,
    margin: float = DEFAULT_PLANNER_MARGIN,
) -> GainPlan:
    """Dispatch to the planner of a certificate family."""
    family = PlanFamily(family)
    if family.is_obe:
        if mu is not None:
            raise ValueError(f"the {family.value} planner does not take a user gain")
        return plan_gains_obe(params, constants, family.value.split("-")[1], margin)
    if xi is None:
        raise ValueError(f"the {family.value} planner needs a prescribed rate xi")
    return plan_gains_bnn(params, constants, H0, H0_sup, xi, family.value[len("bnn-") :], mu, margin)


def energy_envelope(
    params: PhysicalParams, system: Union[SystemKind, str], initial_energy: float, t: float, H0_partial: float = 0.0
) -> float:
    """Transient upper bound on the reference energy at time ``t``.

    For the original Burgers system the energy is ``||v||^2 + U^2``; for the nonlocal equation it is ``||v||^2``
    and ``H0_partial`` is the source energy accumulated up to ``t``.
    """
    system = SystemKind(system)
    nu, R = params.nu, params.R
    if system.is_obe:
        d0 = obe_rates(nu)["d0"]
        decay = math.exp(-d0 * t)
        return initial_energy * decay + R**2 / (nu * d0) * (1.0 - decay)
    rate = nu * LAMBDA1
    return initial_energy * math.exp(-rate * t) + R**2 / (2.0 * rate * params.k) + H0_partial / rate
