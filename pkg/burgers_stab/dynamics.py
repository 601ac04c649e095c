"""Finite-difference IMEX integration of the original Burgers system, the nonlocal Burgers equation, and their
controlled counterparts in a coupled reference/follower setup."""

import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from dataclasses_json import dataclass_json
from scipy.linalg import solve_banded

from burgers_stab._logging import logger
from burgers_stab.controllers import ControllerFamily, ControllerSpec, feedback
from burgers_stab.defaults import DEFAULT_CFL_SAFETY, DEFAULT_DT_SPACING_FACTOR, DEFAULT_MAX_DT
from burgers_stab.spectral_basis import GridField, GridSpec, h1_seminorm, l2_norm
from burgers_stab.trace import TRACE_COLUMNS, Trace


class SystemKind(str, Enum):
    OBE = "obe"
    OBE_CONTROLLED = "obe-controlled"
    BNN = "bnn"
    BNN_CONTROLLED_MODAL = "bnn-controlled-modal"
    BNN_CONTROLLED_VOLUME = "bnn-controlled-volume"

    @property
    def is_obe(self) -> bool:
        return self in (SystemKind.OBE, SystemKind.OBE_CONTROLLED)

    @property
    def controller_family(self) -> ControllerFamily:
        if self in (SystemKind.OBE_CONTROLLED, SystemKind.BNN_CONTROLLED_MODAL):
            return ControllerFamily.MODAL
        if self is SystemKind.BNN_CONTROLLED_VOLUME:
            return ControllerFamily.VOLUME
        return ControllerFamily.NONE

    @property
    def is_controlled(self) -> bool:
        return self.controller_family is not ControllerFamily.NONE


class Scheme(str, Enum):
    IMEX_CN_AB2 = "imex-cn-ab2"
    IMEX_BE_FE = "imex-be-fe"


class StepSizeError(ValueError):
    """Raised when the time step violates the advective step-size restriction."""

    def __init__(self, message: str, admissible_dt: float):
        super().__init__(message)
        self.admissible_dt = admissible_dt


class DivergenceError(RuntimeError):
    """Raised when the solution stops being finite; keeps the last finite state."""

    def __init__(self, message: str, t: float, last_state: Optional["State"] = None):
        super().__init__(message)
        self.t = t
        self.last_state = last_state


@dataclass_json
@dataclass(frozen=True)
class PhysicalParams:
    """Physical constants.

    :param nu: kinematic viscosity.
    :param R: pressure constant.
    :param k: coefficient of the nonlocal damping term, only used by the nonlocal Burgers equation.
    """

    nu: float
    R: float
    k: float = 1.0

    def __post_init__(self):
        if self.nu <= 0:
            raise ValueError(f"viscosity nu must be positive, found {self.nu}")
        if self.R <= 0:
            raise ValueError(f"pressure constant R must be positive, found {self.R}")
        if self.k < 0:
            raise ValueError(f"nonlocal coefficient k must be non-negative, found {self.k}")

    def check_for(self, system: SystemKind):
        if not system.is_obe and self.k <= 0:
            raise ValueError(f"the {system.value} system needs k > 0, found {self.k}")


@dataclass(frozen=True, eq=False)
class ObeState:
    t: float
    v: GridField
    U: float


@dataclass(frozen=True, eq=False)
class BnnState:
    t: float
    v: GridField


State = Union[ObeState, BnnState]


class SourceKind(str, Enum):
    ZERO = "zero"
    SAMPLED = "sampled"
    ANALYTIC = "analytic"


ANALYTIC_SOURCES = ("manufactured", "decaying-mode1")


def manufactured_solution(t: float, grid: GridSpec) -> GridField:
    """Exact solution ``exp(-t) sin(pi x)`` forced by the ``manufactured`` source."""
    return GridField.from_function(grid, lambda x: np.exp(-t) * np.sin(np.pi * x))


@dataclass(frozen=True, eq=False)
class SourceTerm:
    """Right-hand side ``h(t, x)`` of the nonlocal Burgers equation.

    :param kind: zero, a sampled profile, or a named analytic expression.
    :param profile: node values of the sampled profile.
    :param expression: one of ``ANALYTIC_SOURCES``.
    :param amplitude: scale applied to sampled and ``decaying-mode1`` sources.
    :param decay: sampled sources are multiplied by ``exp(-decay t)``.
    :param params: physical constants the ``manufactured`` forcing is built for.
    """

    kind: SourceKind = SourceKind.ZERO
    profile: Optional[np.ndarray] = None
    expression: Optional[str] = None
    amplitude: float = 1.0
    decay: float = 0.0
    params: Optional[PhysicalParams] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", SourceKind(self.kind))
        if self.kind is SourceKind.SAMPLED and self.profile is None:
            raise ValueError("a sampled source needs a profile")
        if self.kind is SourceKind.ANALYTIC:
            if self.expression not in ANALYTIC_SOURCES:
                raise ValueError(f"unknown analytic source {self.expression!r}, expected one of {ANALYTIC_SOURCES}")
            if self.expression == "manufactured" and self.params is None:
                raise ValueError("the manufactured source needs the physical parameters it is built for")
        if self.decay < 0:
            raise ValueError(f"source decay rate must be non-negative, found {self.decay}")

    @property
    def is_zero(self) -> bool:
        return self.kind is SourceKind.ZERO

    @property
    def is_square_integrable(self) -> bool:
        """Whether ``int_0^inf ||h||^2 dt`` is finite."""
        if self.kind is SourceKind.SAMPLED:
            return self.decay > 0 or not np.any(self.profile)
        return True

    def evaluate(self, t: float, grid: GridSpec) -> GridField:
        if self.kind is SourceKind.ZERO:
            return GridField.zeros(grid)
        if self.kind is SourceKind.SAMPLED:
            return GridField(grid, self.amplitude * np.exp(-self.decay * t) * np.asarray(self.profile))
        x = grid.nodes
        if self.expression == "decaying-mode1":
            return GridField(grid, self.amplitude * np.exp(-t) * np.sqrt(2.0) * np.sin(np.pi * x))
        p = self.params
        mode1 = np.sin(np.pi * x)
        values = (
            (p.nu * np.pi**2 - 1.0 - p.R) * np.exp(-t) * mode1
            + np.pi * np.exp(-2.0 * t) * np.sin(2.0 * np.pi * x)
            + 0.5 * p.k * np.exp(-3.0 * t) * mode1
        )
        return GridField(grid, values)


@dataclass_json
@dataclass(frozen=True)
class StepperConfig:
    """Time-stepping settings.

    :param dt: time step.
    :param scheme: ``imex-cn-ab2`` (Crank-Nicolson diffusion, Adams-Bashforth 2 for the rest) or ``imex-be-fe``.
    :param cfl_safety: fraction of the advective step-size limit that may be used.
    :param diffusion_only: drop advection, reaction, nonlocal and channel-coupling terms (heat-equation limit).
    """

    dt: float
    scheme: Scheme = Scheme.IMEX_CN_AB2
    cfl_safety: float = DEFAULT_CFL_SAFETY
    diffusion_only: bool = False

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if self.dt <= 0:
            raise ValueError(f"time step must be positive, found {self.dt}")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError(f"cfl_safety must lie in (0, 1], found {self.cfl_safety}")

    @staticmethod
    def default_dt(grid: GridSpec) -> float:
        return min(DEFAULT_MAX_DT, DEFAULT_DT_SPACING_FACTOR * grid.spacing)


def laplacian(values: np.ndarray, h: float) -> np.ndarray:
    """Second-order centered second difference with homogeneous Dirichlet ends."""
    padded = np.concatenate(([0.0], values, [0.0]))
    return (padded[2:] - 2.0 * padded[1:-1] + padded[:-2]) / h**2


def advection(values: np.ndarray, h: float) -> np.ndarray:
    """Skew-symmetric centered discretization of ``2 v dv/dx``.

    Averages the conservative form ``d(v^2)/dx`` with ``v dv/dx`` so that the discrete inner product with ``v``
    vanishes identically.
    """
    padded = np.concatenate(([0.0], values, [0.0]))
    conservative = padded[2:] ** 2 - padded[:-2] ** 2
    convective = padded[1:-1] * (padded[2:] - padded[:-2])
    return (conservative + convective) / (3.0 * h)


def admissible_dt(v: GridField, cfl_safety: float) -> float:
    return cfl_safety * v.grid.spacing / max(1.0, float(np.max(np.abs(v.values))))


def _check_finite(state: State):
    finite = state.v.is_finite() and (not isinstance(state, ObeState) or np.isfinite(state.U))
    if not finite:
        raise DivergenceError(f"non-finite solution at t={state.t}", t=state.t)


def _controller_values(controller_input: Optional[GridField], grid: GridSpec) -> Union[np.ndarray, float]:
    if controller_input is None:
        return 0.0
    if controller_input.grid != grid:
        raise ValueError("controller input lives on a different grid than the state")
    return controller_input.values


def rhs_obe(
    state: ObeState, params: PhysicalParams, controller_input: Optional[GridField] = None
) -> Tuple[GridField, float]:
    """Time derivatives ``(dv/dt, dU/dt)`` of the original Burgers system."""
    _check_finite(state)
    v = state.v.values
    h = state.v.grid.spacing
    dv = (
        state.U * v
        + params.nu * laplacian(v, h)
        - advection(v, h)
        + _controller_values(controller_input, state.v.grid)
    )
    dU = params.R - params.nu * state.U - l2_norm(state.v) ** 2
    return GridField(state.v.grid, dv), float(dU)


def rhs_bnn(
    state: BnnState,
    params: PhysicalParams,
    h_field: Optional[GridField] = None,
    controller_input: Optional[GridField] = None,
) -> GridField:
    """Time derivative ``dv/dt`` of the Burgers equation with nonlocal nonlinearity."""
    _check_finite(state)
    grid = state.v.grid
    v = state.v.values
    h = grid.spacing
    source = 0.0 if h_field is None else h_field.values
    dv = (
        params.nu * laplacian(v, h)
        - advection(v, h)
        + params.R * v
        - params.k * l2_norm(state.v) ** 2 * v
        + source
        + _controller_values(controller_input, grid)
    )
    return GridField(grid, dv)


class Stepper:
    """Multistep IMEX integrator for one trajectory.

    Diffusion is implicit (Crank-Nicolson or backward Euler, one tridiagonal solve per step); every other term,
    including the scalar channel ``U`` and the controller input, is explicit. The explicit part uses
    second-order Adams-Bashforth after a forward Euler start, so a stepper must only be fed consecutive states.
    """

    def __init__(
        self,
        system: SystemKind,
        params: PhysicalParams,
        grid: GridSpec,
        config: StepperConfig,
        source: Optional[SourceTerm] = None,
    ):
        self.system = system
        self.params = params
        self.grid = grid
        self.config = config
        self.source = SourceTerm() if source is None else source
        self._theta = 0.5 if config.scheme is Scheme.IMEX_CN_AB2 else 1.0
        self._multistep = config.scheme is Scheme.IMEX_CN_AB2

        ratio = self._theta * config.dt * params.nu / grid.spacing**2
        banded = np.zeros((3, grid.points))
        banded[0, 1:] = -ratio
        banded[1, :] = 1.0 + 2.0 * ratio
        banded[2, :-1] = -ratio
        self._banded = banded
        self._history: Optional[Tuple[np.ndarray, float]] = None

    def reset(self):
        self._history = None

    def check_step_size(self, state: State):
        limit = admissible_dt(state.v, self.config.cfl_safety)
        if self.config.dt > limit:
            raise StepSizeError(
                f"time step {self.config.dt:g} violates the advective restriction at t={state.t:g}; "
                f"use dt <= {limit:.6g}",
                admissible_dt=limit,
            )

    def explicit_terms(self, state: State, controller_input: Optional[GridField] = None) -> Tuple[np.ndarray, float]:
        p = self.params
        v = state.v.values
        h = self.grid.spacing
        control = _controller_values(controller_input, self.grid)
        if isinstance(state, ObeState):
            energy = l2_norm(state.v) ** 2
            channel = p.R - p.nu * state.U - energy
            if self.config.diffusion_only:
                return np.zeros_like(v) + control, channel
            return state.U * v - advection(v, h) + control, channel

        source = 0.0 if self.source.is_zero else self.source.evaluate(state.t, self.grid).values
        if self.config.diffusion_only:
            return np.zeros_like(v) + source + control, 0.0
        energy = l2_norm(state.v) ** 2
        return -advection(v, h) + p.R * v - p.k * energy * v + source + control, 0.0

    def step(self, state: State, controller_input: Optional[GridField] = None) -> State:
        """Advance ``state`` by one time step."""
        _check_finite(state)
        self.check_step_size(state)
        dt = self.config.dt
        v = state.v.values

        forcing, channel = self.explicit_terms(state, controller_input)
        if self._multistep and self._history is not None:
            previous_forcing, previous_channel = self._history
            explicit = 1.5 * forcing - 0.5 * previous_forcing
            channel_rate = 1.5 * channel - 0.5 * previous_channel
        else:
            explicit, channel_rate = forcing, channel
        self._history = (forcing, channel)

        rhs = v + dt * explicit
        if self._theta < 1.0:
            rhs = rhs + (1.0 - self._theta) * dt * self.params.nu * laplacian(v, self.grid.spacing)
        new_v = solve_banded((1, 1), self._banded, rhs, check_finite=False)
        t = state.t + dt

        if isinstance(state, ObeState):
            new_state: State = ObeState(t, GridField(self.grid, new_v), state.U + dt * channel_rate)
        else:
            new_state = BnnState(t, GridField(self.grid, new_v))
        try:
            _check_finite(new_state)
        except DivergenceError as e:
            raise DivergenceError(str(e), t=t, last_state=state) from None
        return new_state


def step(
    state: State,
    params: PhysicalParams,
    config: StepperConfig,
    source: Optional[SourceTerm] = None,
    controller: Optional[ControllerSpec] = None,
    reference: Optional[State] = None,
) -> State:
    """Single forward-Euler-started IMEX step of ``state``.

    When a controller and a reference state are supplied, the controller acts on ``state - reference``. Use a
    :class:`Stepper` to integrate trajectories, since the multistep history lives there.
    """
    system = SystemKind.OBE if isinstance(state, ObeState) else SystemKind.BNN
    control = None
    if controller is not None and reference is not None:
        control = feedback(state.v - reference.v, controller)
    return Stepper(system, params, state.v.grid, config, source).step(state, control)


@dataclass(frozen=True, eq=False)
class Simulation:
    """Everything needed to integrate one reference trajectory and an optional follower.

    :param system: which equations to integrate.
    :param master: initial state of the uncontrolled reference trajectory.
    :param follower: initial state of the follower; controlled systems drive it towards the reference.
    :param horizon: final time.
    :param sample_stride: number of time steps between trace samples.
    :param meta: run description copied into the trace.
    """

    system: SystemKind
    params: PhysicalParams
    grid: GridSpec
    stepper: StepperConfig
    master: State
    follower: Optional[State] = None
    controller: ControllerSpec = field(default_factory=ControllerSpec.none)
    source: SourceTerm = field(default_factory=SourceTerm)
    horizon: float = 1.0
    sample_stride: int = 1
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "system", SystemKind(self.system))
        self.params.check_for(self.system)
        if self.horizon <= 0:
            raise ValueError(f"horizon must be positive, found {self.horizon}")
        if self.sample_stride < 1:
            raise ValueError(f"sample stride must be >= 1, found {self.sample_stride}")
        state_type = ObeState if self.system.is_obe else BnnState
        for state in (self.master, self.follower):
            if state is not None and not isinstance(state, state_type):
                raise ValueError(f"the {self.system.value} system needs {state_type.__name__} initial data")
        if self.system.is_controlled and self.follower is None:
            raise ValueError(f"the {self.system.value} system needs follower initial data")
        if self.controller.family is not self.system.controller_family:
            raise ValueError(
                f"the {self.system.value} system needs a {self.system.controller_family.value} controller, "
                f"found {self.controller.family.value}"
            )
        if self.system.is_obe and not self.source.is_zero:
            raise ValueError("the original Burgers system takes no source term")
        ratio = self.horizon / self.stepper.dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            logger.warning(
                f"horizon {self.horizon:g} is not a multiple of dt={self.stepper.dt:g}; "
                f"integrating to t={self.n_steps * self.stepper.dt:g} instead"
            )

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.horizon / self.stepper.dt)))


def _sample_row(t: float, master: State, follower: Optional[State], control: Optional[GridField]) -> List[float]:
    row = dict.fromkeys(TRACE_COLUMNS, np.nan)
    row["t"] = t
    row["l2_v"] = l2_norm(master.v)
    row["h1_v"] = h1_seminorm(master.v)
    if isinstance(master, ObeState):
        row["U"] = master.U
    if follower is not None:
        z = follower.v - master.v
        row["l2_z"] = l2_norm(z)
        row["h1_z"] = h1_seminorm(z)
        if isinstance(master, ObeState):
            row["W"] = abs(follower.U - master.U)
    if control is not None:
        row["control_l2"] = l2_norm(control)
    return [row[c] for c in TRACE_COLUMNS]


def _final_state(master: State, follower: Optional[State]) -> Dict[str, Any]:
    final: Dict[str, Any] = {"t": master.t, "x": master.v.grid.nodes, "master_v": np.array(master.v.values)}
    if isinstance(master, ObeState):
        final["master_U"] = master.U
    if follower is not None:
        final["follower_v"] = np.array(follower.v.values)
        if isinstance(follower, ObeState):
            final["follower_U"] = follower.U
    return final


def _warn_if_source_persists(source: SourceTerm, times: List[float], energy: List[float]):
    # an L2-in-time source accumulates energy sublinearly; a persistent one grows linearly
    if source.is_zero or len(energy) < 4 or energy[-1] <= 0:
        return
    half = len(energy) // 2
    late_share = (energy[-1] - energy[half]) / energy[-1]
    late_time_share = (times[-1] - times[half]) / times[-1]
    if not source.is_square_integrable or late_share >= 0.8 * late_time_share:
        logger.warning(
            f"source energy int ||h||^2 dt keeps growing ({energy[-1]:.4g} at t={times[-1]:g}); "
            "the nonlocal Burgers certificates assume a square-integrable source"
        )


def simulate(simulation: Simulation) -> Trace:
    """Integrate the reference trajectory and the follower in lock-step and record a :class:`Trace`.

    The controller is evaluated every step from same-time states. Divergence ends the run early; the trace is
    truncated at the last finite sample and the last finite states are kept in ``trace.final_state``.
    """
    sim = simulation
    dt = sim.stepper.dt
    base_system = SystemKind.OBE if sim.system.is_obe else SystemKind.BNN
    master_stepper = Stepper(base_system, sim.params, sim.grid, sim.stepper, sim.source)
    follower_stepper = Stepper(base_system, sim.params, sim.grid, sim.stepper, sim.source)

    master_stepper.check_step_size(sim.master)
    if sim.follower is not None:
        follower_stepper.check_step_size(sim.follower)

    logger.info(
        f"simulating {sim.system.value}: {sim.grid.points} points, dt={dt:g}, {sim.n_steps} steps, "
        f"controller={sim.controller.family.value} mu={sim.controller.mu:g} N={sim.controller.count}"
    )
    started = time.perf_counter()
    master, follower = sim.master, sim.follower
    rows: List[List[float]] = []
    times: List[float] = []
    source_times: List[float] = []
    source_energy: List[float] = []
    accumulated = 0.0
    diverged, divergence_time = False, None

    for n in range(sim.n_steps + 1):
        t = n * dt
        control = None if follower is None else feedback(follower.v - master.v, sim.controller)
        if n % sim.sample_stride == 0:
            rows.append(_sample_row(t, master, follower, control))
            times.append(t)
        if not sim.source.is_zero:
            accumulated += dt * l2_norm(sim.source.evaluate(t, sim.grid)) ** 2
            source_times.append(t + dt)
            source_energy.append(accumulated)
        if n == sim.n_steps:
            break
        try:
            next_master = master_stepper.step(master)
            next_follower = None if follower is None else follower_stepper.step(follower, control)
        except (DivergenceError, StepSizeError) as e:
            diverged, divergence_time = True, (n + 1) * dt
            logger.warning(f"run diverged near t={divergence_time:g}: {e}")
            break
        # state times stay exactly n * dt
        master = replace(next_master, t=t + dt)
        follower = None if next_follower is None else replace(next_follower, t=t + dt)

    _warn_if_source_persists(sim.source, source_times, source_energy)
    elapsed = time.perf_counter() - started
    logger.info(f"finished {sim.system.value} in {elapsed:.2f}s ({len(rows)} samples, diverged={diverged})")

    channels = np.array(rows, dtype=float)[:, 1:]
    return Trace(
        times=np.array(times),
        channels=dict(zip(TRACE_COLUMNS[1:], channels.T)),
        meta={**sim.meta, "system": sim.system.value, "wall_time": elapsed},
        diverged=diverged,
        divergence_time=divergence_time,
        final_state=_final_state(master, follower),
    )
