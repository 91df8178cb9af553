"""
Algebraic network solve for the dynamic simulation.

Machines enter as Norton equivalents, so the nodal equations read

    Y_aug V - I_src + I_cp(V) = 0

with I_cp the constant-power load current conj(S) V / |V|^2, which turns into a
constant admittance below the cutoff voltage. The system is solved by Newton
iterations in rectangular coordinates, warm-started from the last solution.
"""
import logging
from typing import Optional, Tuple

import numpy as np

from stvs_lab.config import SIM_CONFIG
from stvs_lab.exceptions import NetworkSolveError

logger = logging.getLogger(__name__)


def _real_form(y: np.ndarray) -> np.ndarray:
    g, b = y.real, y.imag
    return np.block([[g, -b], [b, g]])


class NetworkSolver:
    """
    Newton solver for the nodal current balance.

    Args:
        y_aug: Dense complex admittance matrix including machine Norton admittances
        s_cp: Constant-power consumption per bus (complex, p.u.)
        v_cutoff: Voltage below which constant power becomes constant admittance
        tol: Convergence tolerance on the current mismatch and on the Newton step
        max_iter: Newton iteration limit per solve
    """

    def __init__(self, y_aug: np.ndarray, s_cp: np.ndarray, v_cutoff: Optional[float] = None,
                 tol: Optional[float] = None, max_iter: Optional[int] = None):
        self.y_aug = np.array(y_aug, dtype=complex)
        self.size = self.y_aug.shape[0]
        self.v_cutoff = SIM_CONFIG["v_cutoff"] if v_cutoff is None else v_cutoff
        self.tol = SIM_CONFIG["newton_tol"] if tol is None else tol
        self.max_iter = SIM_CONFIG["newton_max_iter"] if max_iter is None else max_iter

        s_cp = np.asarray(s_cp, dtype=complex)
        self.cp_index = np.flatnonzero(s_cp != 0)
        self.cp_conj = np.conj(s_cp[self.cp_index])

        self._base_jacobian = _real_form(self.y_aug)
        self._fault_cache = {}

    def _linear_part(self, fault: Optional[Tuple[int, float]]) -> Tuple[np.ndarray, np.ndarray]:
        if fault is None:
            return self.y_aug, self._base_jacobian
        if fault not in self._fault_cache:
            bus, admittance = fault
            y = self.y_aug.copy()
            y[bus, bus] += -1j * admittance
            self._fault_cache[fault] = (y, _real_form(y))
        return self._fault_cache[fault]

    def constant_power_current(self, v: np.ndarray) -> np.ndarray:
        """Current drawn by the constant-power loads at voltage v."""
        current = np.zeros(self.size, dtype=complex)
        if self.cp_index.size:
            vk = v[self.cp_index]
            mag2 = np.maximum(np.abs(vk) ** 2, self.v_cutoff ** 2)
            current[self.cp_index] = self.cp_conj * vk / mag2
        return current

    def residual(self, v: np.ndarray, i_src: np.ndarray, fault: Optional[Tuple[int, float]] = None) -> np.ndarray:
        y, _ = self._linear_part(fault)
        return y @ v - i_src + self.constant_power_current(v)

    def _jacobian(self, v: np.ndarray, base: np.ndarray) -> np.ndarray:
        jac = base.copy()
        if not self.cp_index.size:
            return jac
        vk = v[self.cp_index]
        low = np.abs(vk) < self.v_cutoff
        with np.errstate(divide="ignore", invalid="ignore"):
            d_de = np.where(low, self.cp_conj / self.v_cutoff ** 2, -self.cp_conj / np.conj(vk) ** 2)
            d_df = 1j * np.where(low, self.cp_conj / self.v_cutoff ** 2, self.cp_conj / np.conj(vk) ** 2)
        i, n = self.cp_index, self.size
        jac[i, i] += d_de.real
        jac[i, n + i] += d_df.real
        jac[n + i, i] += d_de.imag
        jac[n + i, n + i] += d_df.imag
        return jac

    def solve(self, i_src: np.ndarray, v0: np.ndarray, fault: Optional[Tuple[int, float]] = None,
              time: float = 0.0) -> np.ndarray:
        """
        Solve for the bus voltages given the machine source currents.

        Args:
            i_src: Norton source current per bus
            v0: Starting voltages (previous solution)
            fault: Optional (bus index, shunt admittance magnitude)
            time: Simulation time, for diagnostics

        Returns:
            Complex bus voltages

        Raises:
            NetworkSolveError: If Newton does not converge
        """
        _, base = self._linear_part(fault)
        n = self.size
        v = np.array(v0, dtype=complex)
        mismatch = np.inf
        for _ in range(self.max_iter):
            f = self.residual(v, i_src, fault)
            mismatch = float(np.max(np.abs(f)))
            if not np.isfinite(mismatch):
                break
            if mismatch <= self.tol:
                return v
            rhs = -np.concatenate([f.real, f.imag])
            try:
                dx = np.linalg.solve(self._jacobian(v, base), rhs)
            except np.linalg.LinAlgError:
                break
            v = v + dx[:n] + 1j * dx[n:]
            if not np.all(np.isfinite(v)):
                break
            if np.max(np.abs(dx)) <= self.tol:
                return v
        logger.debug(f"Network solve failed at t={time:.3f}s, mismatch {mismatch:.3e}")
        raise NetworkSolveError(time, mismatch)
