import numpy as np
import pytest

from burgers_stab.dynamics import (
    BnnState,
    PhysicalParams,
    Simulation,
    SourceKind,
    SourceTerm,
    StepperConfig,
    SystemKind,
    manufactured_solution,
    simulate,
)
from burgers_stab.spectral_basis import GridField, GridSpec, l2_norm

PARAMS = PhysicalParams(nu=1.0, R=0.5, k=1.0)
SOURCE = SourceTerm(SourceKind.ANALYTIC, expression="manufactured", params=PARAMS)


def _manufactured_run(points: int, dt: float, horizon: float) -> GridField:
    grid = GridSpec(points)
    simulation = Simulation(
        system=SystemKind.BNN,
        params=PARAMS,
        grid=grid,
        stepper=StepperConfig(dt),
        master=BnnState(0.0, manufactured_solution(0.0, grid)),
        source=SOURCE,
        horizon=horizon,
        sample_stride=1000,
    )
    trace = simulate(simulation)
    assert not trace.diverged
    return GridField(grid, trace.final_state["master_v"])


def test_spatial_order_is_two():
    horizon = 0.05
    points = [64, 128, 256, 512]
    errors, spacings = [], []
    for m in points:
        final = _manufactured_run(m, 1e-5, horizon)
        errors.append(l2_norm(final - manufactured_solution(horizon, final.grid)))
        spacings.append(final.grid.spacing)
    orders = np.diff(np.log(errors)) / np.diff(np.log(spacings))
    np.testing.assert_allclose(orders, 2.0, atol=0.2)


def test_temporal_order_is_at_least_three_halves():
    horizon = 0.2
    finals = [_manufactured_run(128, dt, horizon) for dt in (4e-3, 2e-3, 1e-3)]
    coarse = l2_norm(finals[0] - finals[1])
    fine = l2_norm(finals[1] - finals[2])
    assert np.log2(coarse / fine) >= 1.5


def test_manufactured_solution_is_tracked():
    final = _manufactured_run(128, 1e-3, 0.5)
    error = l2_norm(final - manufactured_solution(0.5, final.grid))
    assert error <= 1e-2 * l2_norm(manufactured_solution(0.5, final.grid))


def test_heat_limit_decays_at_the_first_eigenvalue():
    grid = GridSpec(256)
    w1 = GridField.from_function(grid, lambda x: np.sqrt(2.0) * np.sin(np.pi * x))
    simulation = Simulation(
        system=SystemKind.BNN,
        params=PhysicalParams(nu=1.0, R=1.0, k=1.0),
        grid=grid,
        stepper=StepperConfig(1e-4, diffusion_only=True),
        master=BnnState(0.0, w1),
        horizon=0.1,
        sample_stride=100,
    )
    trace = simulate(simulation)
    assert trace.channel("l2_v")[-1] == pytest.approx(np.exp(-np.pi**2 * 0.1), abs=1e-3)
    assert trace.times[-1] == pytest.approx(0.1)
