"""Finite-dimensional feedback laws acting on the difference between follower and reference."""

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from dataclasses_json import dataclass_json

from burgers_stab.spectral_basis import (
    GridField,
    VolumePartition,
    modal_coeffs,
    modal_reconstruct,
    piecewise_reconstruct,
    volume_averages,
)


class ControllerFamily(str, Enum):
    MODAL = "modal"
    VOLUME = "volume"
    NONE = "none"


@dataclass_json
@dataclass(frozen=True)
class ControllerSpec:
    """Feedback law ``-mu * P_N z`` where ``P_N`` projects on the first N sine modes or on N volume elements.

    :param family: which projection the controller uses.
    :param mu: feedback gain.
    :param count: number of controlled modes or volume elements.
    """

    family: ControllerFamily = ControllerFamily.NONE
    mu: float = 0.0
    count: int = 0

    def __post_init__(self):
        object.__setattr__(self, "family", ControllerFamily(self.family))
        if self.mu < 0:
            raise ValueError(f"controller gain must be non-negative, found {self.mu}")
        if self.count < 0:
            raise ValueError(f"controller count must be non-negative, found {self.count}")
        if self.family is not ControllerFamily.NONE and self.mu > 0 and self.count < 1:
            raise ValueError(f"a {self.family.value} controller with gain > 0 needs count >= 1, found {self.count}")

    @classmethod
    def none(cls) -> "ControllerSpec":
        return cls(ControllerFamily.NONE, 0.0, 0)

    @property
    def partition(self) -> Optional[VolumePartition]:
        if self.family is not ControllerFamily.VOLUME or self.count == 0:
            return None
        return VolumePartition(self.count)


def _check_family(spec: ControllerSpec, expected: ControllerFamily):
    if spec.family is not expected:
        raise ValueError(f"expected a {expected.value} controller, found {spec.family.value}")


def modal_feedback(z: GridField, spec: ControllerSpec) -> GridField:
    _check_family(spec, ControllerFamily.MODAL)
    return -spec.mu * modal_reconstruct(modal_coeffs(z, spec.count), z.grid)


def volume_feedback(z: GridField, spec: ControllerSpec) -> GridField:
    # the average of u - v equals the difference of averages, so one pass over z suffices
    _check_family(spec, ControllerFamily.VOLUME)
    partition = spec.partition
    if partition is None:
        return GridField.zeros(z.grid)
    return -spec.mu * piecewise_reconstruct(volume_averages(z, partition), partition, z.grid)


def feedback(z: GridField, spec: ControllerSpec) -> Optional[GridField]:
    """Evaluate the controller on the error ``z``; ``None`` when no controller is active."""
    if spec.family is ControllerFamily.MODAL:
        return modal_feedback(z, spec)
    if spec.family is ControllerFamily.VOLUME:
        return volume_feedback(z, spec)
    return None
