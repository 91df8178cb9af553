"""
Time-domain simulation with classical generators and composite loads.

Generators: constant EMF behind transient reactance with the swing equation
    d(delta)/dt = omega_s * dw,   2H d(dw)/dt = Pm - Pe - D dw.

Loads: a third-order induction motor takes a share of each bus's active demand,
the rest is constant power. Motor quantities are per unit on the motor's own
rating, which equals its share of the bus demand; network currents are
rating times own-base currents. In the synchronous frame

    dE'/dt = -j omega_s s E' - (E' - j (X0 - X') I) / T0'
    2H ds/dt = T_load(s) - Te,   I = (V - E') / (Rs + jX'),   Te = Re(E' conj(I))

with T_load(s) = T0 ((1 - s) / (1 - s0))^k. Slip is capped at 1 (stalled).

A negative reactive remainder after the motor is taken out (compensation on
the bus) is represented as a fixed shunt susceptance.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from stvs_lab.config import SIM_CONFIG
from stvs_lab.exceptions import EquilibriumError, MotorInitError, NetworkSolveError, SimulationError
from stvs_lab.grid.models import GridModel, MotorParams
from stvs_lab.simulation.models import FaultSpec, VoltageTrajectory
from stvs_lab.simulation.network import NetworkSolver
from stvs_lab.steady_state.power_flow import OperatingPoint, admittance_matrix
from stvs_lab.utils.converters import seconds_to_steps

logger = logging.getLogger(__name__)


def motor_impedance(params: MotorParams, slip: float) -> complex:
    """Steady-state input impedance of the equivalent circuit at a given slip (own base)."""
    rotor = complex(params.rr / slip, params.xr)
    magnetizing = complex(0.0, params.xm)
    return complex(params.rs, params.xs) + magnetizing * rotor / (magnetizing + rotor)


def motor_power(params: MotorParams, v_mag: float, slip: float) -> float:
    """Electrical input power at terminal voltage v_mag and slip (own base)."""
    return float((v_mag ** 2 / np.conj(motor_impedance(params, slip))).real)


def solve_motor_slip(params: MotorParams, v_mag: float, p_target: float, bus: int) -> float:
    """
    Steady-state slip on the stable branch of the power-slip curve.

    Raises:
        MotorInitError: If the demand exceeds the motor's peak power at v_mag
    """
    s_min = 1e-9
    peak = minimize_scalar(lambda s: -motor_power(params, v_mag, s), bounds=(s_min, 1.0),
                           method="bounded", options={"xatol": 1e-10})
    s_peak = float(peak.x)
    p_peak = motor_power(params, v_mag, s_peak)
    if p_peak < p_target:
        raise MotorInitError(bus, f"demand {p_target:.3f} exceeds peak power {p_peak:.3f} at |V|={v_mag:.3f}")
    if motor_power(params, v_mag, s_min) >= p_target:
        raise MotorInitError(bus, "demand below no-load losses")
    return float(brentq(lambda s: motor_power(params, v_mag, s) - p_target, s_min, s_peak, xtol=1e-14))


@dataclass(eq=False)
class DynamicState:
    """
    Mutable machine states plus the constants needed to integrate them.

    Owned by a single simulation run.
    """
    bus_ids: Tuple[int, ...]
    topology_id: str
    omega_s: float
    network: NetworkSolver
    v: np.ndarray

    gen_index: np.ndarray
    gen_h: np.ndarray
    gen_d: np.ndarray
    gen_xd: np.ndarray
    gen_e: np.ndarray
    gen_pm: np.ndarray
    delta: np.ndarray
    domega: np.ndarray

    motor_index: np.ndarray
    motor_buses: Tuple[int, ...]
    motor_rating: np.ndarray
    motor_zp: np.ndarray
    motor_dx: np.ndarray
    motor_t0p: np.ndarray
    motor_h: np.ndarray
    motor_k: np.ndarray
    motor_s0: np.ndarray
    motor_torque0: np.ndarray
    motor_e: np.ndarray
    slip: np.ndarray

    load_scale: float = 1.0

    @property
    def n_gen(self) -> int:
        return len(self.gen_index)

    @property
    def n_motor(self) -> int:
        return len(self.motor_index)

    def pack(self) -> np.ndarray:
        return np.concatenate([self.delta, self.domega, self.motor_e.real, self.motor_e.imag, self.slip])

    def unpack(self, x: np.ndarray) -> Tuple[np.ndarray, ...]:
        ng, nm = self.n_gen, self.n_motor
        delta = x[:ng]
        domega = x[ng:2 * ng]
        e_m = x[2 * ng:2 * ng + nm] + 1j * x[2 * ng + nm:2 * ng + 2 * nm]
        slip = x[2 * ng + 2 * nm:]
        return delta, domega, e_m, slip

    def source_currents(self, x: np.ndarray) -> np.ndarray:
        delta, _, e_m, _ = self.unpack(x)
        i_src = np.zeros(len(self.bus_ids), dtype=complex)
        i_src[self.gen_index] += self.gen_e * np.exp(1j * delta) / (1j * self.gen_xd)
        if self.n_motor:
            i_src[self.motor_index] += self.motor_rating * e_m / self.motor_zp
        return i_src

    def derivatives(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Time derivative of the packed state given the network voltages."""
        delta, domega, e_m, slip = self.unpack(x)

        e_gen = self.gen_e * np.exp(1j * delta)
        i_gen = (e_gen - v[self.gen_index]) / (1j * self.gen_xd)
        p_e = (e_gen * np.conj(i_gen)).real
        d_delta = self.omega_s * domega
        d_domega = (self.gen_pm - p_e - self.gen_d * domega) / (2.0 * self.gen_h)

        if self.n_motor:
            i_m = (v[self.motor_index] - e_m) / self.motor_zp
            d_e = -1j * self.omega_s * slip * e_m - (e_m - 1j * self.motor_dx * i_m) / self.motor_t0p
            t_e = (e_m * np.conj(i_m)).real
            ratio = np.maximum(1.0 - slip, 0.0) / (1.0 - self.motor_s0)
            t_load = self.motor_torque0 * ratio ** self.motor_k
            d_slip = (t_load - t_e) / (2.0 * self.motor_h)
        else:
            d_e = np.zeros(0, dtype=complex)
            d_slip = np.zeros(0)

        return np.concatenate([d_delta, d_domega, d_e.real, d_e.imag, d_slip])

    def solve_network(self, x: np.ndarray, v0: np.ndarray, fault: Optional[Tuple[int, float]] = None,
                      time: float = 0.0) -> np.ndarray:
        return self.network.solve(self.source_currents(x), v0, fault, time)

    def max_derivative(self) -> float:
        """Largest absolute state derivative at the current state with the network re-solved."""
        x = self.pack()
        v = self.solve_network(x, self.v)
        d = self.derivatives(x, v)
        return float(np.max(np.abs(d))) if d.size else 0.0


def init_dynamic_state(grid: GridModel, op: OperatingPoint, params: Optional[MotorParams] = None,
                       check_equilibrium: bool = True) -> DynamicState:
    """
    Initialize machine states at equilibrium with a solved operating point.

    Args:
        grid: Grid the operating point was solved on
        op: Solved operating point
        params: Motor parameters applied to every load (default: each load's parameter set)
        check_equilibrium: Verify that all derivatives vanish

    Returns:
        DynamicState at equilibrium

    Raises:
        MotorInitError: If a motor has no steady-state operating point
        SimulationError: If the operating point belongs to another topology
        EquilibriumError: If check_equilibrium finds a non-zero derivative
    """
    if op.topology_id != grid.topology_id:
        raise SimulationError(f"operating point is for {op.topology_id}, grid is {grid.topology_id}")

    omega_s = 2.0 * np.pi * grid.frequency
    bus_ids = tuple(grid.bus_ids)
    index = {bus_id: k for k, bus_id in enumerate(bus_ids)}
    v = np.array(op.V, dtype=complex)
    y_aug = admittance_matrix(grid).toarray()
    s_inj = v * np.conj(y_aug @ v)

    gen_rows = []
    for gen in sorted(grid.generators, key=lambda g: g.bus):
        k = index[gen.bus]
        i_g = np.conj(s_inj[k] / v[k])
        e = v[k] + 1j * gen.xd_prime * i_g
        gen_rows.append((k, gen.h, gen.d, gen.xd_prime, abs(e), float((e * np.conj(i_g)).real), np.angle(e)))
        y_aug[k, k] += 1.0 / (1j * gen.xd_prime)
    gen_arr = np.array(gen_rows, dtype=float).reshape(-1, 7)

    s_cp = np.zeros(len(bus_ids), dtype=complex)
    motors: List[Dict] = []
    for load in sorted(grid.loads, key=lambda ld: ld.bus):
        k = index[load.bus]
        s_load = op.load_scale * complex(load.p, load.q)
        s_motor = 0.0j
        rating = load.motor_fraction * s_load.real
        if rating > 0:
            motor = params if params is not None else grid.motor_param_set(load.motor_params)
            v_mag = abs(v[k])
            slip = solve_motor_slip(motor, v_mag, 1.0, load.bus)
            i_own = v[k] / motor_impedance(motor, slip)
            zp = complex(motor.rs, motor.x_prime)
            e_m = v[k] - zp * i_own
            s_motor = rating * v[k] * np.conj(i_own)
            y_aug[k, k] += rating / zp
            motors.append({
                "index": k, "bus": load.bus, "rating": rating, "zp": zp,
                "dx": motor.x0 - motor.x_prime, "t0p": motor.t0_prime(omega_s),
                "h": motor.h, "k": motor.torque_exponent, "s0": slip,
                "torque0": float((e_m * np.conj(i_own)).real), "e": e_m,
            })
        remainder = s_load - s_motor
        if remainder.imag < 0:
            # compensation: fixed shunt susceptance
            y_aug[k, k] += 1j * (-remainder.imag) / abs(v[k]) ** 2
            remainder = complex(remainder.real, 0.0)
        s_cp[k] = remainder

    def column(key, dtype=float):
        return np.array([m[key] for m in motors], dtype=dtype)

    state = DynamicState(
        bus_ids=bus_ids,
        topology_id=grid.topology_id,
        omega_s=omega_s,
        network=NetworkSolver(y_aug, s_cp),
        v=v,
        gen_index=gen_arr[:, 0].astype(int),
        gen_h=gen_arr[:, 1],
        gen_d=gen_arr[:, 2],
        gen_xd=gen_arr[:, 3],
        gen_e=gen_arr[:, 4],
        gen_pm=gen_arr[:, 5],
        delta=gen_arr[:, 6].copy(),
        domega=np.zeros(len(gen_arr)),
        motor_index=column("index", int),
        motor_buses=tuple(m["bus"] for m in motors),
        motor_rating=column("rating"),
        motor_zp=column("zp", complex),
        motor_dx=column("dx"),
        motor_t0p=column("t0p"),
        motor_h=column("h"),
        motor_k=column("k"),
        motor_s0=column("s0"),
        motor_torque0=column("torque0"),
        motor_e=column("e", complex),
        slip=column("s0").copy(),
        load_scale=op.load_scale,
    )

    if check_equilibrium:
        worst = state.max_derivative()
        logger.debug(f"Initial state on {grid.topology_id}: max derivative {worst:.2e}")
        if worst > SIM_CONFIG["equilibrium_tol"]:
            raise EquilibriumError(f"initial state is not an equilibrium (max derivative {worst:.3e})")
    return state


def simulate(grid: GridModel, op: OperatingPoint, fault: FaultSpec, horizon: Optional[float] = None,
             dt: Optional[float] = None, state: Optional[DynamicState] = None,
             params: Optional[MotorParams] = None) -> VoltageTrajectory:
    """
    Integrate the post-disturbance dynamics with fixed-step RK4.

    The fault shunt is active on steps round(t_on/dt) up to, not including,
    round(t_on/dt) + round(duration/dt). Sample k is the network solution at
    t_k = k*dt with the switching state of the interval starting at t_k.
    A failed network solve truncates the record and flags it collapsed.

    Args:
        grid: Grid model
        op: Solved operating point
        fault: Fault specification
        horizon: Trajectory length in seconds
        dt: Step size in seconds
        state: Pre-built initial state (built from op when omitted)
        params: Motor parameter override for a freshly built state

    Returns:
        VoltageTrajectory with one row per bus

    Raises:
        SimulationError: For an invalid step size, horizon or fault bus
    """
    horizon = SIM_CONFIG["horizon"] if horizon is None else horizon
    dt = SIM_CONFIG["dt"] if dt is None else dt
    if not 0 < dt <= 0.02:
        raise SimulationError(f"dt must be in (0, 0.02], got {dt}")
    if horizon < fault.t_clear + 2.0 - 1e-9:
        raise SimulationError(f"horizon {horizon} s must cover fault clearing plus 2 s ({fault.t_clear + 2.0:.3f} s)")
    if fault.fault_bus not in grid.bus_ids:
        raise SimulationError(f"fault bus {fault.fault_bus} does not exist")

    if state is None:
        state = init_dynamic_state(grid, op, params)
    fault_index = state.bus_ids.index(fault.fault_bus)
    n_samples = seconds_to_steps(horizon, dt)
    on_step = seconds_to_steps(fault.t_on, dt)
    off_step = on_step + seconds_to_steps(fault.duration, dt)
    fault_key = (fault_index, float(fault.fault_admittance))
    motor_slots = slice(len(state.pack()) - state.n_motor, None)

    vm = np.zeros((len(state.bus_ids), n_samples))
    va = np.zeros((len(state.bus_ids), n_samples))
    x = state.pack()
    v = state.v.copy()
    collapsed = False
    collapse_time = None

    logger.debug(f"Simulating {grid.topology_id}: fault at bus {fault.fault_bus}, "
                 f"{fault.duration:.3f} s, {n_samples} steps")
    for k in range(n_samples):
        t = k * dt
        active = fault_key if (on_step <= k < off_step and fault.fault_admittance > 0) else None
        try:
            v = state.solve_network(x, v, active, t)
            vm[:, k] = np.abs(v)
            va[:, k] = np.angle(v)
            if k == n_samples - 1:
                break
            k1 = state.derivatives(x, v)
            x2 = x + 0.5 * dt * k1
            k2 = state.derivatives(x2, state.solve_network(x2, v, active, t + 0.5 * dt))
            x3 = x + 0.5 * dt * k2
            k3 = state.derivatives(x3, state.solve_network(x3, v, active, t + 0.5 * dt))
            x4 = x + dt * k3
            k4 = state.derivatives(x4, state.solve_network(x4, v, active, t + dt))
        except NetworkSolveError as e:
            collapsed = True
            collapse_time = t
            vm, va = vm[:, :k], va[:, :k]
            logger.warning(f"Numerically collapsed on {grid.topology_id} at t={t:.2f}s: {e}")
            break
        x = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        x[motor_slots] = np.minimum(x[motor_slots], 1.0)

    return VoltageTrajectory(
        bus_ids=state.bus_ids,
        dt=dt,
        horizon=horizon,
        vm=vm,
        va=va,
        metadata={
            "topology_id": grid.topology_id,
            "load_scale": op.load_scale,
            "fault": fault.to_dict(),
        },
        collapsed=collapsed,
        collapse_time=collapse_time,
    )
