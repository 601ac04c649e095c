"""JSON run and sweep configuration."""

import copy
import itertools
import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PrivateAttr, ValidationError, model_validator

from burgers_stab.certificates import (
    CertificateLedger,
    Claim,
    GainPlan,
    InequalityConstants,
    PlanFamily,
    bnn_ledger,
    obe_ledger,
    plan,
)
from burgers_stab.controllers import ControllerFamily, ControllerSpec
from burgers_stab.defaults import (
    DEFAULT_BETA3,
    DEFAULT_BETA4,
    DEFAULT_C0,
    DEFAULT_CFL_SAFETY,
    DEFAULT_FLOOR,
    DEFAULT_GRID_POINTS,
    DEFAULT_PLANNER_MARGIN,
    DEFAULT_TOLERANCE,
    MIN_GRID_POINTS,
    RANDOM_PRESET_MAX_MODE,
)
from burgers_stab.dynamics import (
    ANALYTIC_SOURCES,
    BnnState,
    ObeState,
    PhysicalParams,
    Scheme,
    Simulation,
    SourceKind,
    SourceTerm,
    State,
    StepperConfig,
    SystemKind,
)
from burgers_stab.spectral_basis import GridField, GridSpec, l2_norm, modal_reconstruct
from burgers_stab.utils import fingerprint

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Raised for unreadable or invalid configuration documents."""


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PhysicalSection(_Section):
    nu: PositiveFloat
    R: PositiveFloat
    k: float = Field(1.0, ge=0)


class SourceSection(_Section):
    kind: SourceKind = SourceKind.ZERO
    expression: Optional[str] = None
    path: Optional[Path] = None
    amplitude: float = 1.0
    decay: float = Field(0.0, ge=0)

    @model_validator(mode="after")
    def _check_payload(self) -> "SourceSection":
        if self.kind is SourceKind.SAMPLED and self.path is None:
            raise ValueError("a sampled source needs a path to a CSV file with columns x,h")
        if self.kind is SourceKind.ANALYTIC and self.expression not in ANALYTIC_SOURCES:
            raise ValueError(f"analytic source expression must be one of {ANALYTIC_SOURCES}, found {self.expression!r}")
        return self


class InitialDatum(_Section):
    """Initial field: a named preset or node values read from a CSV file with columns ``x,v``."""

    preset: Optional[Literal["mode1", "bump", "random"]] = None
    amplitude: float = 1.0
    path: Optional[Path] = None
    perturbation: Optional["InitialDatum"] = None

    @model_validator(mode="after")
    def _check_origin(self) -> "InitialDatum":
        if (self.preset is None) == (self.path is None):
            raise ValueError("an initial datum needs exactly one of 'preset' and 'path'")
        return self


class InitialSection(_Section):
    master: InitialDatum
    follower: Optional[InitialDatum] = None
    U0: float = 0.0
    U0_follower: Optional[float] = None


class GridSection(_Section):
    points: int = Field(DEFAULT_GRID_POINTS, ge=MIN_GRID_POINTS)


class StepperSection(_Section):
    dt: Optional[PositiveFloat] = None
    scheme: Scheme = Scheme.IMEX_CN_AB2
    cfl_safety: float = Field(DEFAULT_CFL_SAFETY, gt=0, le=1)


class ControllerSection(_Section):
    family: ControllerFamily
    mu: float = Field(0.0, ge=0)
    count: int = Field(0, ge=0)


class PlannerSection(_Section):
    xi: Optional[float] = None
    H0: float = Field(0.0, ge=0)
    H0_sup: float = Field(0.0, ge=0)
    target: Literal["l2", "h1"] = "l2"
    beta4: PositiveFloat = DEFAULT_BETA4
    beta3: PositiveFloat = DEFAULT_BETA3
    c0: PositiveFloat = DEFAULT_C0
    margin: float = Field(DEFAULT_PLANNER_MARGIN, ge=0)


class FitSection(_Section):
    burn_in: Optional[float] = Field(None, ge=0)
    floor: PositiveFloat = DEFAULT_FLOOR
    tolerance: float = Field(DEFAULT_TOLERANCE, ge=0, lt=1)


class RunConfig(_Section):
    """One simulation run.

    ``controller`` is either an explicit controller or ``"auto"``, in which case the gain and the number of
    modes or intervals come from the certificate planner configured in ``planner``.
    """

    schema_version: Literal[1] = SCHEMA_VERSION
    name: str = "run"
    system: SystemKind
    physical: PhysicalSection
    source: SourceSection = Field(default_factory=SourceSection)
    initial: InitialSection
    grid: GridSection = Field(default_factory=GridSection)
    stepper: StepperSection = Field(default_factory=StepperSection)
    controller: Union[Literal["auto"], ControllerSection, None] = None
    planner: Optional[PlannerSection] = None
    fit: FitSection = Field(default_factory=FitSection)
    horizon: PositiveFloat
    sample_stride: int = Field(1, ge=1)
    seed: int = Field(0, ge=0)

    _base_dir: Path = PrivateAttr(default_factory=Path.cwd)

    @model_validator(mode="after")
    def _check_system(self) -> "RunConfig":
        system = self.system
        if system.is_controlled and self.initial.follower is None:
            raise ValueError(f"the {system.value} system needs initial.follower")
        if not system.is_obe and self.physical.k <= 0:
            raise ValueError(f"the {system.value} system needs physical.k > 0")
        if system.is_obe and self.source.kind is not SourceKind.ZERO:
            raise ValueError("the original Burgers system takes no source term")
        if self.controller == "auto":
            if not system.is_controlled:
                raise ValueError(f"the {system.value} system has no controller to plan")
            if self.planner is None:
                raise ValueError("controller 'auto' needs a planner section")
            if not system.is_obe and self.planner.xi is None:
                raise ValueError("controller 'auto' for the nonlocal Burgers equation needs planner.xi")
            if system is SystemKind.BNN_CONTROLLED_VOLUME and self.planner.target != "l2":
                raise ValueError("the volume-element controller is only certified for the l2 target")
        elif isinstance(self.controller, ControllerSection):
            if self.controller.family is not system.controller_family:
                raise ValueError(
                    f"the {system.value} system needs a {system.controller_family.value} controller, "
                    f"found {self.controller.family.value}"
                )
        elif system.is_controlled:
            raise ValueError(f"the {system.value} system needs a controller section or 'auto'")
        return self

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "RunConfig":
        path = Path(path)
        config = cls.from_dict(_read_json(path), source=str(path))
        config._base_dir = path.resolve().parent
        return config

    @classmethod
    def from_dict(cls, payload: Dict[str, Any], source: str = "config") -> "RunConfig":
        try:
            return cls.model_validate(payload)
        except ValidationError as e:
            raise ConfigError(_format_validation_error(e, source)) from None

    def to_dict(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")

    def fingerprint(self) -> str:
        return fingerprint(self.to_dict())

    def physical_params(self) -> PhysicalParams:
        return PhysicalParams(self.physical.nu, self.physical.R, self.physical.k)

    def constants(self) -> InequalityConstants:
        if self.planner is None:
            return InequalityConstants()
        return InequalityConstants(self.planner.beta4, self.planner.beta3, self.planner.c0)

    def plan_family(self) -> Optional[PlanFamily]:
        target = "l2" if self.planner is None else self.planner.target
        if self.system is SystemKind.OBE_CONTROLLED:
            return PlanFamily(f"obe-{target}")
        if self.system is SystemKind.BNN_CONTROLLED_MODAL:
            return PlanFamily(f"bnn-modal-{target}")
        if self.system is SystemKind.BNN_CONTROLLED_VOLUME:
            return PlanFamily.BNN_VOLUME_L2
        return None

    def claim(self) -> Claim:
        """Synchronization claim the run is judged against."""
        family = self.plan_family()
        if family is not None:
            return family.claim
        return Claim.OBE_L2 if self.system.is_obe else Claim.BNN_L2_MODAL

    def resolve_controller(self) -> Tuple[ControllerSpec, Optional[GainPlan]]:
        if self.controller is None:
            return ControllerSpec.none(), None
        if isinstance(self.controller, ControllerSection):
            return ControllerSpec(self.controller.family, self.controller.mu, self.controller.count), None
        p = self.planner
        gains = plan(
            self.plan_family(), self.physical_params(), self.constants(), p.xi, p.H0, p.H0_sup, margin=p.margin
        )
        return ControllerSpec(self.system.controller_family, gains.mu, gains.N), gains

    def ledger(self, controller: ControllerSpec) -> Optional[CertificateLedger]:
        """Certificate evaluated at the run's actual gain; ``None`` when the inputs are not available."""
        params = self.physical_params()
        mu, count = controller.mu, max(controller.count, 1)
        target = "l2" if self.planner is None else self.planner.target
        if self.system.is_obe:
            return obe_ledger(params, self.constants(), mu, count, target)
        if self.planner is None or self.planner.xi is None:
            return None
        p = self.planner
        return bnn_ledger(params, self.constants(), p.H0, mu, count, p.xi, p.H0_sup, target)

    def resolve_path(self, path: Path) -> Path:
        return path if path.is_absolute() else self._base_dir / path

    def to_simulation(self, controller: Optional[ControllerSpec] = None) -> Simulation:
        """Build the simulation; ``controller`` overrides the configured one (used once a plan is resolved)."""
        if controller is None:
            controller, _ = self.resolve_controller()
        grid = GridSpec(self.grid.points)
        params = self.physical_params()
        master_v = self.initial_field(self.initial.master, grid)
        follower_v = None if self.initial.follower is None else self.initial_field(self.initial.follower, grid)
        master: State
        follower: Optional[State]
        if self.system.is_obe:
            U0_follower = self.initial.U0 if self.initial.U0_follower is None else self.initial.U0_follower
            master = ObeState(0.0, master_v, self.initial.U0)
            follower = None if follower_v is None else ObeState(0.0, follower_v, U0_follower)
        else:
            master = BnnState(0.0, master_v)
            follower = None if follower_v is None else BnnState(0.0, follower_v)
        dt = self.stepper.dt or StepperConfig.default_dt(grid)
        return Simulation(
            system=self.system,
            params=params,
            grid=grid,
            stepper=StepperConfig(dt, self.stepper.scheme, self.stepper.cfl_safety),
            master=master,
            follower=follower,
            controller=controller,
            source=self.source_term(grid, params),
            horizon=self.horizon,
            sample_stride=self.sample_stride,
            meta={"name": self.name, "fingerprint": self.fingerprint(), "seed": self.seed},
        )

    def initial_field(self, datum: InitialDatum, grid: GridSpec, depth: int = 0) -> GridField:
        """Sample ``datum`` on ``grid``.

        A random preset draws from a generator seeded with ``(seed, depth)``, so equal presets give equal fields
        for master and follower while a perturbation draws independently of the datum it perturbs.
        """
        if datum.path is not None:
            frame = pd.read_csv(self.resolve_path(datum.path))
            field = GridField(grid, datum.amplitude * np.interp(grid.nodes, frame["x"], frame["v"]))
        elif datum.preset == "mode1":
            field = GridField.from_function(grid, lambda x: datum.amplitude * np.sqrt(2.0) * np.sin(np.pi * x))
        elif datum.preset == "bump":
            field = GridField.from_function(grid, lambda x: datum.amplitude * x * (1.0 - x))
        else:
            modes = min(RANDOM_PRESET_MAX_MODE, grid.max_mode)
            rng = np.random.default_rng([self.seed, depth])
            shape = modal_reconstruct(rng.uniform(-1.0, 1.0, size=modes), grid)
            field = (datum.amplitude / l2_norm(shape)) * shape
        if datum.perturbation is not None:
            field = field + self.initial_field(datum.perturbation, grid, depth + 1)
        return field

    def source_term(self, grid: GridSpec, params: PhysicalParams) -> SourceTerm:
        s = self.source
        if s.kind is SourceKind.ZERO:
            return SourceTerm()
        if s.kind is SourceKind.SAMPLED:
            frame = pd.read_csv(self.resolve_path(s.path))
            profile = np.interp(grid.nodes, frame["x"], frame["h"])
            return SourceTerm(SourceKind.SAMPLED, profile=profile, amplitude=s.amplitude, decay=s.decay)
        return SourceTerm(SourceKind.ANALYTIC, expression=s.expression, amplitude=s.amplitude, params=params)


InitialDatum.model_rebuild()


class SweepConfig(_Section):
    """Cartesian product of overrides applied to a base run configuration.

    Axis keys are dotted paths into the run configuration, e.g. ``"physical.R"`` or ``"controller.mu"``.
    """

    schema_version: Literal[1] = SCHEMA_VERSION
    base: Dict[str, Any]
    axes: Dict[str, List[Any]]

    _base_dir: Path = PrivateAttr(default_factory=Path.cwd)

    @model_validator(mode="after")
    def _check_axes(self) -> "SweepConfig":
        if not self.axes:
            raise ValueError("a sweep needs at least one axis")
        empty = [name for name, values in self.axes.items() if not values]
        if empty:
            raise ValueError(f"sweep axes must not be empty: {', '.join(empty)}")
        return self

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "SweepConfig":
        path = Path(path)
        try:
            sweep = cls.model_validate(_read_json(path))
        except ValidationError as e:
            raise ConfigError(_format_validation_error(e, str(path))) from None
        sweep._base_dir = path.resolve().parent
        return sweep

    def expand(self) -> List[Tuple[str, Dict[str, Any], RunConfig]]:
        """Every run of the sweep as ``(run name, axis values, validated config)``."""
        names = list(self.axes)
        runs = []
        for index, values in enumerate(itertools.product(*(self.axes[n] for n in names))):
            overrides = dict(zip(names, values))
            payload = copy.deepcopy(self.base)
            for dotted, value in overrides.items():
                _set_dotted(payload, dotted, value)
            run_name = f"run-{index:03d}"
            payload["name"] = run_name
            config = RunConfig.from_dict(payload, source=f"sweep {run_name}")
            config._base_dir = self._base_dir
            runs.append((run_name, overrides, config))
        return runs


def _set_dotted(payload: Dict[str, Any], dotted: str, value: Any):
    keys = dotted.split(".")
    node = payload
    for key in keys[:-1]:
        child = node.get(key)
        if not isinstance(child, dict):
            child = {}
            node[key] = child
        node = child
    node[keys[-1]] = value


def _read_json(path: Path) -> Dict[str, Any]:
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from None
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from None
    if not isinstance(payload, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return payload


def _format_validation_error(error: ValidationError, source: str) -> str:
    lines = [f"{source}: {error.error_count()} validation error(s)"]
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"  {location}: {item['msg']}")
    return "\n".join(lines)
