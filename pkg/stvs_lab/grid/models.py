"""
Grid data model.

Buses, branches, generators and composite loads are frozen dataclasses so a
GridModel can be shared between worker processes without copying concerns.
Line identity is the unordered bus pair.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from stvs_lab.config import DEFAULT_MOTOR_FRACTION, MOTOR_DEFAULTS
from stvs_lab.utils.converters import LinePair, format_line, normalize_line

logger = logging.getLogger(__name__)

BUS_KINDS = ("generator", "load")
BRANCH_STATUSES = ("connected", "disconnected")


@dataclass(frozen=True)
class Bus:
    id: int
    kind: str
    vm: float = 1.0
    base_kv: Optional[float] = None


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    x: float
    r: float = 0.0
    b: float = 0.0
    tap: float = 1.0
    status: str = "connected"

    @property
    def pair(self) -> LinePair:
        return normalize_line((self.from_bus, self.to_bus))

    @property
    def connected(self) -> bool:
        return self.status == "connected"

    @property
    def susceptance(self) -> float:
        """Series susceptance magnitude 1/x used by the lossless B model."""
        return 1.0 / self.x


@dataclass(frozen=True)
class Generator:
    bus: int
    p: float
    h: float
    d: float
    xd_prime: float


@dataclass(frozen=True)
class Load:
    bus: int
    p: float
    q: float
    motor_fraction: float = DEFAULT_MOTOR_FRACTION
    motor_params: str = "default"


@dataclass(frozen=True)
class MotorParams:
    """Third-order induction motor parameters, per unit on the motor's own base."""
    rs: float = MOTOR_DEFAULTS["rs"]
    xs: float = MOTOR_DEFAULTS["xs"]
    xm: float = MOTOR_DEFAULTS["xm"]
    rr: float = MOTOR_DEFAULTS["rr"]
    xr: float = MOTOR_DEFAULTS["xr"]
    h: float = MOTOR_DEFAULTS["h"]
    torque_exponent: float = MOTOR_DEFAULTS["torque_exponent"]

    @property
    def x0(self) -> float:
        """Open-circuit reactance."""
        return self.xs + self.xm

    @property
    def x_prime(self) -> float:
        """Transient reactance."""
        return self.xs + self.xr * self.xm / (self.xr + self.xm)

    def t0_prime(self, omega_s: float) -> float:
        """Open-circuit transient time constant in seconds."""
        return (self.xr + self.xm) / (omega_s * self.rr)

    def to_dict(self) -> Dict[str, float]:
        return {
            "rs": self.rs, "xs": self.xs, "xm": self.xm, "rr": self.rr,
            "xr": self.xr, "h": self.h, "torque_exponent": self.torque_exponent,
        }


@dataclass(frozen=True)
class GridModel:
    name: str
    base_mva: float
    buses: Tuple[Bus, ...]
    branches: Tuple[Branch, ...]
    generators: Tuple[Generator, ...]
    loads: Tuple[Load, ...]
    motor_params: Tuple[Tuple[str, MotorParams], ...] = ()
    frequency: float = 60.0

    @property
    def bus_ids(self) -> List[int]:
        return sorted(bus.id for bus in self.buses)

    @property
    def generator_buses(self) -> List[int]:
        """Generator-side partition, ascending bus id."""
        return sorted(gen.bus for gen in self.generators)

    @property
    def load_buses(self) -> List[int]:
        """Load-side partition: every bus without a generator, ascending."""
        gens = set(self.generator_buses)
        return [bus_id for bus_id in self.bus_ids if bus_id not in gens]

    @property
    def slack_bus(self) -> int:
        return max(self.generator_buses)

    @property
    def connected_branches(self) -> List[Branch]:
        return [branch for branch in self.branches if branch.connected]

    @property
    def disconnected_lines(self) -> List[LinePair]:
        return sorted(branch.pair for branch in self.branches if not branch.connected)

    @property
    def topology_id(self) -> str:
        """Base name plus the disconnected lines, e.g. "ne39~2-3~5-8"."""
        return "~".join([self.name] + [format_line(pair) for pair in self.disconnected_lines])

    def bus(self, bus_id: int) -> Bus:
        for bus in self.buses:
            if bus.id == bus_id:
                return bus
        raise KeyError(bus_id)

    def generator_at(self, bus_id: int) -> Optional[Generator]:
        for gen in self.generators:
            if gen.bus == bus_id:
                return gen
        return None

    def load_at(self, bus_id: int) -> Optional[Load]:
        for load in self.loads:
            if load.bus == bus_id:
                return load
        return None

    def motor_param_set(self, set_id: str) -> MotorParams:
        params = dict(self.motor_params)
        if set_id not in params:
            if set_id == "default":
                return MotorParams()
            raise KeyError(f"unknown motor parameter set '{set_id}'")
        return params[set_id]

    def with_motor_fraction(self, fraction: float) -> "GridModel":
        """Copy with every load's induction-motor fraction set to `fraction`."""
        loads = tuple(replace(load, motor_fraction=fraction) for load in self.loads)
        return replace(self, loads=loads)

    def lossless(self) -> "GridModel":
        """Copy with resistance, line charging and taps removed from every branch."""
        branches = tuple(replace(branch, r=0.0, b=0.0, tap=1.0) for branch in self.branches)
        return replace(self, branches=branches)

    def to_dict(self) -> Dict:
        """Serialize to the grid file layout."""
        return {
            "name": self.name,
            "base_mva": self.base_mva,
            "frequency": self.frequency,
            "buses": [
                {"id": bus.id, "kind": bus.kind, "vm": bus.vm, "base_kv": bus.base_kv}
                for bus in self.buses
            ],
            "branches": [
                {"from": br.from_bus, "to": br.to_bus, "r": br.r, "x": br.x, "b": br.b,
                 "tap": br.tap, "status": br.status}
                for br in self.branches
            ],
            "generators": [
                {"bus": g.bus, "p": g.p, "h": g.h, "d": g.d, "xd_prime": g.xd_prime}
                for g in self.generators
            ],
            "loads": [
                {"bus": ld.bus, "p": ld.p, "q": ld.q, "motor_fraction": ld.motor_fraction,
                 "motor_params": ld.motor_params}
                for ld in self.loads
            ],
            "motor_params": {name: params.to_dict() for name, params in self.motor_params},
        }


@dataclass(frozen=True, eq=False)
class SusceptancePartition:
    """
    Series susceptance matrix split into load (L) and generator (G) blocks.

    Sign convention: diagonal entries are -sum(b_ij), off-diagonal entries +b_ij,
    with b_ij = 1/x_ij for every connected branch.
    """
    B_LL: np.ndarray
    B_LG: np.ndarray
    B_GG: np.ndarray
    B_GL: np.ndarray
    load_buses: Tuple[int, ...]
    gen_buses: Tuple[int, ...]
    topology_id: str
    load_index_map: Dict[int, int] = field(default_factory=dict)
    gen_index_map: Dict[int, int] = field(default_factory=dict)

    @property
    def m(self) -> int:
        return len(self.load_buses)

    @property
    def n(self) -> int:
        return len(self.gen_buses)

    def full_matrix(self) -> np.ndarray:
        """Block matrix [B_GG B_GL; B_LG B_LL] (generators first)."""
        return np.block([[self.B_GG, self.B_GL], [self.B_LG, self.B_LL]])

    def bus_matrix(self) -> Tuple[np.ndarray, List[int]]:
        """
        Full matrix in ascending bus order.

        Returns:
            Tuple of (matrix, bus ids labelling its rows and columns)
        """
        order = list(self.gen_buses) + list(self.load_buses)
        full = self.full_matrix()
        perm = np.argsort(order, kind="stable")
        return full[np.ix_(perm, perm)], [order[i] for i in perm]

    def entry(self, bus_i: int, bus_j: int) -> float:
        """Element B_ij addressed by bus ids."""
        matrix, ids = self.bus_matrix()
        index = {bus_id: k for k, bus_id in enumerate(ids)}
        return float(matrix[index[bus_i], index[bus_j]])
