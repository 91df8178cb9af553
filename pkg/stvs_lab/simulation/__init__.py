"""
Dynamic simulation of post-fault voltage trajectories.
"""
from stvs_lab.simulation.models import FaultSpec, VoltageTrajectory, MotorParams
from stvs_lab.simulation.network import NetworkSolver
from stvs_lab.simulation.dynamics import (
    DynamicState, init_dynamic_state, simulate, motor_impedance, motor_power, solve_motor_slip
)
from stvs_lab.simulation.trajectory_io import write_trajectory, read_trajectory, trajectory_frame

__all__ = [
    'FaultSpec',
    'VoltageTrajectory',
    'MotorParams',
    'NetworkSolver',
    'DynamicState',
    'init_dynamic_state',
    'simulate',
    'motor_impedance',
    'motor_power',
    'solve_motor_slip',
    'write_trajectory',
    'read_trajectory',
    'trajectory_frame'
]
