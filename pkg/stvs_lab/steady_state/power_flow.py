"""
Newton-Raphson AC power flow.

Generator buses are PV (the highest-numbered one is the slack), every other
bus is PQ with its demand scaled by the load scale. Generation set-points stay
fixed; the slack picks up the difference.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.sparse import csr_matrix, diags, hstack, vstack
from scipy.sparse.linalg import spsolve

from stvs_lab.config import SIM_CONFIG
from stvs_lab.exceptions import PowerFlowError, SimulationError
from stvs_lab.grid.models import GridModel

logger = logging.getLogger(__name__)


def admittance_matrix(grid: GridModel) -> csr_matrix:
    """
    Bus admittance matrix over connected branches, ascending bus order.

    Uses the pi model with series impedance r + jx, total charging b split
    between both ends and an off-nominal tap on the from side.

    Args:
        grid: Grid model

    Returns:
        Sparse complex Ybus
    """
    index = {bus_id: k for k, bus_id in enumerate(grid.bus_ids)}
    rows: List[int] = []
    cols: List[int] = []
    vals: List[complex] = []
    for branch in grid.connected_branches:
        f, t = index[branch.from_bus], index[branch.to_bus]
        ys = 1.0 / complex(branch.r, branch.x)
        half_charging = 0.5j * branch.b
        tap = branch.tap
        rows += [f, t, f, t]
        cols += [f, t, t, f]
        vals += [(ys + half_charging) / tap ** 2, ys + half_charging, -ys / tap, -ys / tap]
    size = len(index)
    return csr_matrix((vals, (rows, cols)), shape=(size, size), dtype=complex)


def bus_power_injections(grid: GridModel, load_scale: float = 1.0) -> np.ndarray:
    """
    Scheduled complex injections per bus (generation minus scaled demand).

    Only load records are scaled; demand netted into a generator set-point is not.
    """
    index = {bus_id: k for k, bus_id in enumerate(grid.bus_ids)}
    sbus = np.zeros(len(index), dtype=complex)
    for gen in grid.generators:
        sbus[index[gen.bus]] += gen.p
    for load in grid.loads:
        sbus[index[load.bus]] -= load_scale * complex(load.p, load.q)
    return sbus


def dsbus_dv(ybus: csr_matrix, v: np.ndarray) -> Tuple[csr_matrix, csr_matrix]:
    """
    Partial derivatives of bus power injections with respect to voltage.

    Returns:
        Tuple (dS/dVm, dS/dVa)
    """
    ibus = ybus @ v
    diag_v = diags(v)
    diag_ibus = diags(ibus)
    diag_vnorm = diags(v / np.abs(v))
    ds_dvm = diag_v @ (ybus @ diag_vnorm).conj() + diag_ibus.conj() @ diag_vnorm
    ds_dva = 1j * diag_v @ (diag_ibus - ybus @ diag_v).conj()
    return csr_matrix(ds_dvm), csr_matrix(ds_dva)


@dataclass(frozen=True, eq=False)
class OperatingPoint:
    """Solved steady state."""
    bus_ids: Tuple[int, ...]
    V: np.ndarray
    P_inj: np.ndarray
    Q_inj: np.ndarray
    V_G: np.ndarray
    V_L: np.ndarray
    load_scale: float
    topology_id: str
    iterations: int = 0
    mismatch: float = 0.0
    index_map: Dict[int, int] = field(default_factory=dict)

    @property
    def vm(self) -> np.ndarray:
        return np.abs(self.V)

    @property
    def va(self) -> np.ndarray:
        return np.angle(self.V)

    def voltage_at(self, bus_id: int) -> complex:
        return complex(self.V[self.index_map[bus_id]])

    def to_dict(self) -> Dict:
        """Provenance summary for manifests."""
        return {
            "topology_id": self.topology_id,
            "load_scale": self.load_scale,
            "iterations": self.iterations,
            "mismatch": self.mismatch,
            "vm": self.vm.tolist(),
            "va": self.va.tolist(),
        }


def solve_power_flow(grid: GridModel, load_scale: float = 1.0, tol: Optional[float] = None,
                     max_iter: Optional[int] = None) -> OperatingPoint:
    """
    Solve the AC power flow by Newton-Raphson from a flat start.

    Args:
        grid: Validated grid
        load_scale: Multiplier applied to every load's demand
        tol: Maximum absolute mismatch in p.u. (default from SIM_CONFIG)
        max_iter: Iteration limit (default from SIM_CONFIG)

    Returns:
        OperatingPoint with mismatch below tol

    Raises:
        SimulationError: If load_scale is not positive
        PowerFlowError: If the iteration does not converge
    """
    if not load_scale > 0:
        raise SimulationError(f"load_scale must be positive, got {load_scale}")
    tol = SIM_CONFIG["pf_tol"] if tol is None else tol
    max_iter = SIM_CONFIG["pf_max_iter"] if max_iter is None else max_iter

    bus_ids = grid.bus_ids
    index = {bus_id: k for k, bus_id in enumerate(bus_ids)}
    ybus = admittance_matrix(grid)
    sbus = bus_power_injections(grid, load_scale)

    slack = index[grid.slack_bus]
    pv = np.array(sorted(index[b] for b in grid.generator_buses if index[b] != slack), dtype=int)
    pq = np.array([index[b] for b in grid.load_buses], dtype=int)
    pvpq = np.concatenate([pv, pq])
    n_pvpq = len(pvpq)

    vm = np.ones(len(bus_ids))
    for gen_bus in grid.generator_buses:
        vm[index[gen_bus]] = grid.bus(gen_bus).vm
    va = np.zeros(len(bus_ids))
    v = vm * np.exp(1j * va)

    def mismatch_vector(v: np.ndarray) -> np.ndarray:
        mis = v * np.conj(ybus @ v) - sbus
        return np.concatenate([mis[pvpq].real, mis[pq].imag])

    f = mismatch_vector(v)
    norm_f = float(np.linalg.norm(f, np.inf)) if f.size else 0.0
    iterations = 0
    while norm_f > tol and iterations < max_iter:
        iterations += 1
        ds_dvm, ds_dva = dsbus_dv(ybus, v)
        j11 = ds_dva[pvpq][:, pvpq].real
        j12 = ds_dvm[pvpq][:, pq].real
        j21 = ds_dva[pq][:, pvpq].imag
        j22 = ds_dvm[pq][:, pq].imag
        jac = csr_matrix(vstack([hstack([j11, j12]), hstack([j21, j22])]))

        with np.errstate(all="ignore"):
            dx = -spsolve(jac, f)
        if not np.all(np.isfinite(dx)):
            raise PowerFlowError(norm_f, iterations, "singular Jacobian")

        va[pvpq] += dx[:n_pvpq]
        vm[pq] += dx[n_pvpq:]
        v = vm * np.exp(1j * va)
        f = mismatch_vector(v)
        norm_f = float(np.linalg.norm(f, np.inf))
        logger.debug(f"Power flow iteration {iterations}: mismatch {norm_f:.3e}")
        if not np.isfinite(norm_f) or np.any(vm <= 0):
            raise PowerFlowError(norm_f, iterations, "diverged")

    if norm_f > tol:
        raise PowerFlowError(norm_f, iterations)

    s_inj = v * np.conj(ybus @ v)
    vm_final = np.abs(v)
    op = OperatingPoint(
        bus_ids=tuple(bus_ids),
        V=v,
        P_inj=s_inj.real,
        Q_inj=s_inj.imag,
        V_G=np.array([vm_final[index[b]] for b in grid.generator_buses]),
        V_L=np.array([vm_final[index[b]] for b in grid.load_buses]),
        load_scale=float(load_scale),
        topology_id=grid.topology_id,
        iterations=iterations,
        mismatch=norm_f,
        index_map=index,
    )
    logger.debug(f"Power flow on {grid.topology_id} (scale {load_scale:.3f}) converged "
                 f"in {iterations} iterations, mismatch {norm_f:.2e}")
    return op
