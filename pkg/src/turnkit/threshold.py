"""Yaw-delta threshold turn detection and merging of nearby turn steps."""

from dataclasses import dataclass

import numpy as np

from .angles import wrapped_diff
from .errors import InsufficientDataError
from .events import TurnEvent


@dataclass(frozen=True)
class ThresholdConfig:
    tau: float = 22.5  # degrees
    merge_gap: int = 1  # unflagged steps allowed inside one merged turn

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.merge_gap < 0:
            raise ValueError("merge_gap must be >= 0")


def detect_threshold(yaw, cfg: ThresholdConfig = ThresholdConfig()):
    """Boolean flag per step: |wrapped yaw change from the previous step| > tau."""
    yaw = np.asarray(yaw, dtype=np.float64)
    if len(yaw) < 2:
        raise InsufficientDataError("threshold detection needs at least 2 steps")
    flags = np.zeros(len(yaw), dtype=bool)
    flags[1:] = np.abs(wrapped_diff(yaw)) > cfg.tau
    return flags


def flagged_steps(flags):
    """Sorted flagged step indices from a boolean mask or an iterable of indices."""
    arr = np.asarray(list(flags) if isinstance(flags, (set, frozenset)) else flags)
    if arr.dtype == bool:
        return [int(i) for i in np.flatnonzero(arr)]
    return sorted({int(i) for i in arr.ravel()})


def flags_to_events(flags, method="threshold"):
    """One single-step event per flagged step."""
    return [TurnEvent(i, i, method) for i in flagged_steps(flags)]


def merge_adjacent(flags, cfg: ThresholdConfig = ThresholdConfig()):
    """Group flagged steps at most ``merge_gap + 1`` apart into one event."""
    steps = flagged_steps(flags)
    events = []
    if not steps:
        return events
    first = prev = steps[0]
    for i in steps[1:]:
        if i - prev > cfg.merge_gap + 1:
            events.append(TurnEvent(first, prev, "threshold_merged"))
            first = i
        prev = i
    events.append(TurnEvent(first, prev, "threshold_merged"))
    return events
