"""
Records exchanged with the dynamic simulator.
"""
import logging
from dataclasses import dataclass, field, asdict
from typing import Any, Dict, Iterable, List, Optional, Tuple

import numpy as np

from stvs_lab.config import SIM_CONFIG
from stvs_lab.exceptions import SimulationError, TrajectoryError
from stvs_lab.grid.models import MotorParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FaultSpec:
    """Three-phase fault applied as a shunt admittance at one bus."""
    fault_bus: int
    t_on: float = SIM_CONFIG["t_on"]
    duration: float = 0.1
    fault_admittance: float = SIM_CONFIG["fault_admittance"]

    def __post_init__(self):
        if not self.duration > 0:
            raise SimulationError(f"fault duration must be positive, got {self.duration}")
        if self.t_on < 0:
            raise SimulationError(f"fault inception must be non-negative, got {self.t_on}")
        if self.fault_admittance < 0:
            raise SimulationError("fault admittance must be non-negative")

    @property
    def t_clear(self) -> float:
        return self.t_on + self.duration

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(eq=False)
class VoltageTrajectory:
    """
    Bus voltage record sampled every dt.

    vm and va have one row per bus (bus_ids order) and one column per sample
    t_k = k * dt. A collapsed run keeps only the samples computed before the
    network solve failed.
    """
    bus_ids: Tuple[int, ...]
    dt: float
    horizon: float
    vm: np.ndarray
    va: np.ndarray
    metadata: Dict[str, Any] = field(default_factory=dict)
    collapsed: bool = False
    collapse_time: Optional[float] = None

    def __post_init__(self):
        if self.vm.shape != self.va.shape:
            raise TrajectoryError(f"magnitude shape {self.vm.shape} differs from angle shape {self.va.shape}")
        if self.vm.ndim != 2 or self.vm.shape[0] != len(self.bus_ids):
            raise TrajectoryError(f"expected {len(self.bus_ids)} bus rows, got shape {self.vm.shape}")
        if self.vm.size and np.nanmin(self.vm) < 0:
            raise TrajectoryError("voltage magnitudes must be non-negative")

    @property
    def n_samples(self) -> int:
        return self.vm.shape[1]

    @property
    def nominal_samples(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.dt

    @property
    def index_map(self) -> Dict[int, int]:
        return {bus_id: k for k, bus_id in enumerate(self.bus_ids)}

    @property
    def topology_id(self) -> Optional[str]:
        return self.metadata.get("topology_id")

    def rows(self, buses: Iterable[int]) -> List[int]:
        """Row indices of the given buses."""
        index = self.index_map
        missing = [bus for bus in buses if bus not in index]
        if missing:
            raise TrajectoryError(f"trajectory does not cover buses {missing}")
        return [index[bus] for bus in buses]

    def copy(self, vm: Optional[np.ndarray] = None, va: Optional[np.ndarray] = None) -> "VoltageTrajectory":
        return VoltageTrajectory(
            bus_ids=self.bus_ids,
            dt=self.dt,
            horizon=self.horizon,
            vm=self.vm.copy() if vm is None else vm,
            va=self.va.copy() if va is None else va,
            metadata=dict(self.metadata),
            collapsed=self.collapsed,
            collapse_time=self.collapse_time,
        )


__all__ = ["FaultSpec", "VoltageTrajectory", "MotorParams"]
