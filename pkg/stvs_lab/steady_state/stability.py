"""
Steady-state voltage-stability quantities on the series susceptance model.

reactive_injection evaluates Q_i = -sum_j V_i V_j b_ij cos(theta_i - theta_j).
load_matrix builds L_s = 1/4 diag(v_oc) B_LL diag(v_oc) from the open-circuit
load voltages v_oc = -B_LL^-1 B_LG V_G, reactive_demand is the
angle-decoupled load demand -[V_L](B_LL V_L + B_LG V_G) and stability_index
is the infinity norm of L_s^-1 q_L. Delta = 1 marks the depleted margin.

With diagonal -sum(b) and off-diagonal +b the physically positive
open-circuit voltage carries a leading minus sign; L_s is quadratic in v_oc
so the choice does not change it.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from stvs_lab.exceptions import ShapeError, SingularMatrixError
from stvs_lab.grid.models import GridModel, SusceptancePartition
from stvs_lab.steady_state.power_flow import OperatingPoint

logger = logging.getLogger(__name__)

_SINGULAR_RTOL = 1e-12


def factorize(matrix: np.ndarray, what: str) -> Tuple[np.ndarray, np.ndarray]:
    """
    LU-factorize a square matrix.

    Raises:
        SingularMatrixError: If a pivot is numerically zero
    """
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] == 0:
        raise ShapeError(f"{what} must be a non-empty square matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise SingularMatrixError(f"{what} has non-finite entries")
    lu, piv = lu_factor(matrix, check_finite=False)
    scale = max(float(np.max(np.abs(matrix))), np.finfo(float).tiny)
    if np.min(np.abs(np.diag(lu))) <= _SINGULAR_RTOL * scale:
        raise SingularMatrixError(f"{what} is singular")
    return lu, piv


@dataclass(frozen=True, eq=False)
class LoadMatrix:
    L_s: np.ndarray
    v_oc: np.ndarray
    topology_id: str
    lu: Tuple[np.ndarray, np.ndarray]

    @property
    def m(self) -> int:
        return len(self.v_oc)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """L_s^-1 rhs through the stored factorization; rhs may be m or m x k."""
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.m:
            raise ShapeError(f"right-hand side has {rhs.shape[0]} rows, load matrix is {self.m}x{self.m}")
        return lu_solve(self.lu, rhs, check_finite=False)


def _check_vector(values: np.ndarray, size: int, name: str) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.shape[0] != size:
        raise ShapeError(f"{name} must be a vector of length {size}, got shape {values.shape}")
    return values


def reactive_injections(op: OperatingPoint, part: SusceptancePartition) -> Dict[int, float]:
    """Reactive injection at every bus of the partition, keyed by bus id."""
    matrix, ids = part.bus_matrix()
    vm = np.array([abs(op.voltage_at(bus_id)) for bus_id in ids])
    va = np.array([np.angle(op.voltage_at(bus_id)) for bus_id in ids])
    coupling = matrix * np.cos(va[:, None] - va[None, :])
    q = -vm * (coupling @ vm)
    return {bus_id: float(q[k]) for k, bus_id in enumerate(ids)}


def reactive_injection(op: OperatingPoint, part: SusceptancePartition, bus: int) -> float:
    """
    Reactive injection at one bus on the series susceptance model.

    Args:
        op: Operating point supplying magnitudes and angles
        part: Susceptance partition of the same topology
        bus: Bus id

    Returns:
        Q_i in p.u.
    """
    return reactive_injections(op, part)[bus]


def load_matrix(part: SusceptancePartition, V_G: np.ndarray) -> LoadMatrix:
    """
    Build the load matrix L_s and the open-circuit load voltages.

    Args:
        part: Susceptance partition
        V_G: Generator voltage magnitudes in partition order

    Returns:
        LoadMatrix holding L_s, v_oc and the LU factors of L_s

    Raises:
        SingularMatrixError: If B_LL or L_s is singular
        ShapeError: If V_G does not match the partition
    """
    V_G = _check_vector(V_G, part.n, "V_G")
    if np.any(V_G <= 0):
        raise ValueError("generator voltages must be positive")

    b_ll_lu = factorize(np.array(part.B_LL), "B_LL")
    rhs = part.B_LG @ V_G
    v_oc = -lu_solve(b_ll_lu, rhs, check_finite=False)
    # one refinement step keeps B_LL v_oc + B_LG V_G at rounding level
    v_oc -= lu_solve(b_ll_lu, part.B_LL @ v_oc + rhs, check_finite=False)
    if np.any(v_oc <= 0):
        raise SingularMatrixError("open-circuit load voltages are not all positive; load subnetwork is detached")

    L_s = 0.25 * (v_oc[:, None] * part.B_LL * v_oc[None, :])
    L_s = 0.5 * (L_s + L_s.T)
    lu = factorize(L_s, "L_s")
    L_s.flags.writeable = False
    v_oc.flags.writeable = False
    logger.debug(f"Load matrix for {part.topology_id}: v_oc in [{v_oc.min():.4f}, {v_oc.max():.4f}]")
    return LoadMatrix(L_s=L_s, v_oc=v_oc, topology_id=part.topology_id, lu=lu)


def reactive_demand(V_L: np.ndarray, part: SusceptancePartition, V_G: np.ndarray) -> np.ndarray:
    """
    Load reactive demand from voltage magnitudes.

    Args:
        V_L: Load voltage magnitudes (m), or an m x k block of snapshots
        part: Susceptance partition
        V_G: Generator voltage magnitudes (n)

    Returns:
        q_L with the same shape as V_L
    """
    V_G = _check_vector(V_G, part.n, "V_G")
    V_L = np.asarray(V_L, dtype=float)
    if V_L.shape[0] != part.m or V_L.ndim not in (1, 2):
        raise ShapeError(f"V_L must have {part.m} rows, got shape {V_L.shape}")
    injection = part.B_LG @ V_G
    if V_L.ndim == 2:
        injection = injection[:, None]
    return -V_L * (part.B_LL @ V_L + injection)


def stability_index(lm: LoadMatrix, q_L: np.ndarray) -> float:
    """
    Distance-to-collapse index: infinity norm of L_s^-1 q_L.

    Args:
        lm: Load matrix
        q_L: Reactive demand vector

    Returns:
        Delta (dimensionless)
    """
    q_L = _check_vector(q_L, lm.m, "q_L")
    return float(np.linalg.norm(lm.solve(q_L), np.inf))


def stability_summary(grid: GridModel, op: OperatingPoint, part: SusceptancePartition) -> Dict:
    """
    Topology summary: branch count, Delta at the operating point and v_oc range.
    """
    lm = load_matrix(part, op.V_G)
    q_L = reactive_demand(op.V_L, part, op.V_G)
    return {
        "topology_id": grid.topology_id,
        "connected_branches": len(grid.connected_branches),
        "delta": stability_index(lm, q_L),
        "v_oc_min": float(lm.v_oc.min()),
        "v_oc_max": float(lm.v_oc.max()),
    }
