"""Sampled time series of one simulation run."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

import numpy as np
import pandas as pd

from burgers_stab.defaults import CSV_FLOAT_FORMAT

TRACE_COLUMNS = ("t", "l2_v", "h1_v", "U", "l2_z", "h1_z", "W", "control_l2")
CHANNELS = TRACE_COLUMNS[1:]


@dataclass(eq=False)
class Trace:
    """Norms of the reference trajectory, the synchronization error and the control, sampled in time.

    Channels a system does not have (``U`` and ``W`` for the nonlocal equation, the error channels without a
    follower, ``control_l2`` without a controller) hold ``NaN``.

    :param times: strictly increasing sample times.
    :param channels: one column per entry of ``CHANNELS``.
    :param meta: description of the run that produced the trace.
    :param diverged: whether the run stopped early on a non-finite state.
    :param final_state: last finite fields, keyed ``x``, ``master_v``, ``follower_v`` plus scalar channels.
    """

    times: np.ndarray
    channels: Union[pd.DataFrame, Mapping[str, np.ndarray]]
    meta: Dict[str, Any] = field(default_factory=dict)
    diverged: bool = False
    divergence_time: Optional[float] = None
    final_state: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        frame = pd.DataFrame(self.channels).reset_index(drop=True)
        unknown = set(frame.columns) - set(CHANNELS)
        if unknown:
            raise ValueError(f"unknown trace channels {sorted(unknown)}, expected a subset of {CHANNELS}")
        frame = frame.reindex(columns=list(CHANNELS)).astype(float)
        if len(frame) != len(self.times):
            raise ValueError(f"trace has {len(self.times)} times but {len(frame)} channel rows")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trace times must be strictly increasing")
        self.channels = frame

    def __len__(self) -> int:
        return len(self.times)

    def channel(self, name: str) -> np.ndarray:
        if name == "t":
            return self.times
        return self.channels[name].to_numpy()

    def has_channel(self, name: str) -> bool:
        return not self.channels[name].isna().all()

    def to_frame(self) -> pd.DataFrame:
        frame = self.channels.copy()
        frame.insert(0, "t", self.times)
        return frame

    def to_csv(self, path: Union[str, Path]):
        self.to_frame().to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, na_rep="")

    @classmethod
    def from_csv(cls, path: Union[str, Path], meta: Optional[Dict[str, Any]] = None) -> "Trace":
        frame = pd.read_csv(path)
        if tuple(frame.columns) != TRACE_COLUMNS:
            raise ValueError(f"{path} is not a trace file: header {list(frame.columns)}, expected {TRACE_COLUMNS}")
        return cls(frame["t"].to_numpy(), frame[list(CHANNELS)], meta or {})
