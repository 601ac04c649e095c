import json
from pathlib import Path
from typing import Any, Callable, Dict

import numpy as np
import pytest

from burgers_stab.spectral_basis import GridField, GridSpec


def mode(k: int, grid: GridSpec, amplitude: float = 1.0) -> GridField:
    return GridField.from_function(grid, lambda x: amplitude * np.sqrt(2.0) * np.sin(k * np.pi * x))


@pytest.fixture
def grid() -> GridSpec:
    return GridSpec(128)


@pytest.fixture
def obe_payload() -> Dict[str, Any]:
    """Small uncontrolled run of the original Burgers system."""
    return {
        "name": "obe-small",
        "system": "obe",
        "physical": {"nu": 1.0, "R": 1.0},
        "initial": {"master": {"preset": "mode1", "amplitude": 0.1}},
        "grid": {"points": 32},
        "stepper": {"dt": 1e-3},
        "horizon": 1.0,
        "sample_stride": 10,
    }


@pytest.fixture
def write_json(tmp_path: Path) -> Callable[[str, Dict[str, Any]], Path]:
    def _write(name: str, payload: Dict[str, Any]) -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(payload))
        return path

    return _write
