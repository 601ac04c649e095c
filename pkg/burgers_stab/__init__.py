from importlib import metadata

from burgers_stab.analysis import Observable, compare_to_certificate, fit_decay_rate, inequality_ensemble
from burgers_stab.certificates import InequalityConstants, bnn_ledger, obe_ledger, plan, plan_gains_bnn, plan_gains_obe
from burgers_stab.config import RunConfig, SweepConfig
from burgers_stab.controllers import ControllerFamily, ControllerSpec
from burgers_stab.dynamics import BnnState, ObeState, PhysicalParams, Simulation, StepperConfig, SystemKind, simulate
from burgers_stab.spectral_basis import GridField, GridSpec
from burgers_stab.trace import Trace

# single source version from setup.py
__title__ = "burgers-stab"
__version__ = metadata.version(__title__)
