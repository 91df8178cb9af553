"""
Stability labeling from bus voltage magnitudes.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from stvs_lab.config import FEATURE_CONFIG
from stvs_lab.exceptions import TrajectoryError
from stvs_lab.simulation.models import VoltageTrajectory

logger = logging.getLogger(__name__)

STABLE = 0
UNSTABLE = 1
LABEL_NAMES = {STABLE: "stable", UNSTABLE: "unstable"}


@dataclass(frozen=True)
class StabilityLabel:
    label: str
    worst_bus: Optional[int]
    dwell: float

    @property
    def code(self) -> int:
        return UNSTABLE if self.label == "unstable" else STABLE


def longest_dwell(below: np.ndarray) -> np.ndarray:
    """
    Longest run of consecutive True samples in each row.

    Args:
        below: Boolean matrix (rows x samples)

    Returns:
        Integer run length per row
    """
    below = np.atleast_2d(below)
    padded = np.pad(below.astype(np.int8), ((0, 0), (1, 1)))
    edges = np.diff(padded, axis=1)
    runs = np.zeros(below.shape[0], dtype=int)
    for row in range(below.shape[0]):
        starts = np.flatnonzero(edges[row] == 1)
        ends = np.flatnonzero(edges[row] == -1)
        if starts.size:
            runs[row] = int(np.max(ends - starts))
    return runs


def dwell_times(vm: np.ndarray, dt: float, v_thresh: float) -> np.ndarray:
    """Longest time in seconds each bus spends below v_thresh."""
    return longest_dwell(vm < v_thresh) * dt


def label_trajectory(traj: VoltageTrajectory, v_thresh: float = FEATURE_CONFIG["v_thresh"],
                     dwell_thresh: float = FEATURE_CONFIG["dwell_thresh"]) -> StabilityLabel:
    """
    Unstable iff some bus stays below v_thresh for longer than dwell_thresh.

    A numerically collapsed record is unstable.

    Args:
        traj: Clean (noise-free) trajectory
        v_thresh: Voltage threshold in p.u.
        dwell_thresh: Dwell threshold in seconds

    Returns:
        StabilityLabel with the worst bus and its dwell

    Raises:
        TrajectoryError: If the record ends less than dwell_thresh after fault clearing
    """
    if traj.collapsed:
        return StabilityLabel("unstable", None, float("inf"))

    fault = traj.metadata.get("fault") or {}
    t_clear = float(fault.get("t_on", 0.0)) + float(fault.get("duration", 0.0))
    covered = traj.n_samples * traj.dt - t_clear
    if covered < dwell_thresh - 1e-9:
        raise TrajectoryError(f"record covers {covered:.3f} s after clearing, need {dwell_thresh:.3f} s")

    dwell = dwell_times(traj.vm, traj.dt, v_thresh)
    worst = int(np.argmax(dwell))
    worst_dwell = float(dwell[worst])
    worst_bus = traj.bus_ids[worst] if worst_dwell > 0 else None
    label = "unstable" if worst_dwell > dwell_thresh + 1e-9 else "stable"
    return StabilityLabel(label, worst_bus, worst_dwell)


def instability_indicator(traj: VoltageTrajectory, v_thresh: float = FEATURE_CONFIG["v_thresh"]) -> float:
    """
    Total bus-seconds spent below v_thresh over the record.

    Samples lost to a numerical collapse count as below the threshold.
    """
    total = float(np.sum(traj.vm < v_thresh) * traj.dt)
    if traj.collapsed:
        missing = max(traj.nominal_samples - traj.n_samples, 0)
        total += missing * len(traj.bus_ids) * traj.dt
    return total


def class_counts(labels: np.ndarray) -> Tuple[int, int]:
    """(stable, unstable) counts."""
    labels = np.asarray(labels)
    return int(np.sum(labels == STABLE)), int(np.sum(labels == UNSTABLE))
