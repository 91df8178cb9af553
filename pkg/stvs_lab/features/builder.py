"""
Voltage dynamic features.

Every trajectory frame t is turned into the vector Delta_t = L_s^-1 q_L(V_L(t)),
with q_L evaluated from the measured load voltage magnitudes and the pre-fault
generator voltages. L_s stays at its pre-fault value for the whole record and
its factorization is shared by all frames. Stacking the frames gives an
m x N image; windows of it are the classifier input.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from stvs_lab.config import FEATURE_CONFIG
from stvs_lab.exceptions import TrajectoryError, WindowError
from stvs_lab.grid.loader import susceptance_partition
from stvs_lab.grid.models import GridModel, SusceptancePartition
from stvs_lab.simulation.models import VoltageTrajectory
from stvs_lab.steady_state.stability import LoadMatrix, load_matrix, reactive_demand
from stvs_lab.utils.converters import seconds_to_steps

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FeatureContext:
    """Partition, load matrix and generator voltages of one topology."""
    part: SusceptancePartition
    lm: LoadMatrix
    V_G: np.ndarray

    @property
    def topology_id(self) -> str:
        return self.lm.topology_id

    @property
    def load_buses(self):
        return self.part.load_buses

    @classmethod
    def for_grid(cls, grid: GridModel, V_G: Optional[np.ndarray] = None) -> "FeatureContext":
        """
        Build the context of a topology.

        Args:
            grid: Grid model
            V_G: Pre-fault generator voltages (default: the generator set-points,
                which every converged power flow reproduces)
        """
        part = susceptance_partition(grid)
        if V_G is None:
            V_G = np.array([grid.bus(bus_id).vm for bus_id in part.gen_buses])
        return cls(part=part, lm=load_matrix(part, V_G), V_G=np.asarray(V_G, dtype=float))

    def features(self, V_L: np.ndarray) -> np.ndarray:
        """Delta snapshots for an m x k block of load voltage magnitudes."""
        return self.lm.solve(reactive_demand(V_L, self.part, self.V_G))


@dataclass(eq=False)
class FeatureWindow:
    """m x n block of Delta snapshots starting at t_start."""
    matrix: np.ndarray
    t_start: float
    T_w: float
    dt: float
    label: Optional[int] = None
    provenance: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        expected = seconds_to_steps(self.T_w, self.dt)
        if self.matrix.ndim != 2 or self.matrix.shape[1] != expected:
            raise WindowError(f"window must have {expected} columns, got shape {self.matrix.shape}")
        if not np.all(np.isfinite(self.matrix)):
            raise WindowError("window contains non-finite entries")

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @property
    def n(self) -> int:
        return self.matrix.shape[1]


def delta_snapshot(lm: LoadMatrix, V_L_t: np.ndarray, part: SusceptancePartition, V_G: np.ndarray) -> np.ndarray:
    """
    Delta_t = L_s^-1 q_L(V_L_t) for one frame.

    Args:
        lm: Load matrix of the topology
        V_L_t: Load voltage magnitudes at time t (m)
        part: Susceptance partition of the same topology
        V_G: Pre-fault generator voltages

    Returns:
        Vector of length m
    """
    if lm.topology_id != part.topology_id:
        raise TrajectoryError(f"load matrix is for {lm.topology_id}, partition for {part.topology_id}")
    return lm.solve(reactive_demand(V_L_t, part, V_G))


def build_features(traj: VoltageTrajectory, lm: LoadMatrix, part: SusceptancePartition,
                   V_G: np.ndarray) -> np.ndarray:
    """
    Stack Delta snapshots of every trajectory frame.

    Args:
        traj: Voltage trajectory covering all load buses
        lm: Load matrix
        part: Susceptance partition
        V_G: Pre-fault generator voltages

    Returns:
        m x N feature matrix, column t for frame t

    Raises:
        TrajectoryError: On a topology mismatch or missing load buses
    """
    if lm.topology_id != part.topology_id:
        raise TrajectoryError(f"load matrix is for {lm.topology_id}, partition for {part.topology_id}")
    if traj.topology_id is not None and traj.topology_id != lm.topology_id:
        raise TrajectoryError(f"trajectory was simulated on {traj.topology_id}, features requested for {lm.topology_id}")
    V_L = traj.vm[traj.rows(part.load_buses)]
    if V_L.shape[1] == 0:
        return np.zeros((part.m, 0))
    return lm.solve(reactive_demand(V_L, part, V_G))


def extract_window(features: np.ndarray, t_start: float, T_w: float, dt: float,
                   label: Optional[int] = None, provenance: Optional[Dict[str, Any]] = None) -> FeatureWindow:
    """
    Cut the window of length T_w starting at the step nearest t_start.

    Raises:
        WindowError: If the window is empty or runs past the last frame
    """
    n = seconds_to_steps(T_w, dt)
    start = seconds_to_steps(t_start, dt)
    if n < 1:
        raise WindowError(f"window length {T_w} s is shorter than one step")
    if start < 0 or start + n > features.shape[1]:
        raise WindowError(f"window [{t_start:.3f}, {t_start + T_w:.3f}] s exceeds the "
                          f"{features.shape[1] * dt:.3f} s feature record")
    return FeatureWindow(
        matrix=np.array(features[:, start:start + n]),
        t_start=start * dt,
        T_w=T_w,
        dt=dt,
        label=label,
        provenance=dict(provenance or {}),
    )


def inject_pmu_noise(traj: VoltageTrajectory, sigma_mag: float = FEATURE_CONFIG["noise_sigma_mag"],
                     sigma_ang_deg: float = FEATURE_CONFIG["noise_sigma_ang_deg"],
                     seed: Optional[int] = None) -> VoltageTrajectory:
    """
    Add white Gaussian measurement noise to magnitudes and angles.

    Magnitudes are clamped at zero. A zero sigma leaves that component untouched.

    Args:
        traj: Clean trajectory
        sigma_mag: Magnitude standard deviation in p.u.
        sigma_ang_deg: Angle standard deviation in degrees
        seed: Seed of the noise generator

    Returns:
        New trajectory; the input is not modified
    """
    if sigma_mag < 0 or sigma_ang_deg < 0:
        raise ValueError("noise standard deviations must be non-negative")
    rng = np.random.default_rng(seed)
    vm, va = traj.vm.copy(), traj.va.copy()
    if sigma_mag > 0:
        vm = np.maximum(vm + rng.normal(0.0, sigma_mag, vm.shape), 0.0)
    if sigma_ang_deg > 0:
        va = va + rng.normal(0.0, np.deg2rad(sigma_ang_deg), va.shape)
    noisy = traj.copy(vm=vm, va=va)
    if sigma_mag > 0 or sigma_ang_deg > 0:
        noisy.metadata["noise"] = {"sigma_mag": sigma_mag, "sigma_ang_deg": sigma_ang_deg, "seed": seed}
    return noisy
