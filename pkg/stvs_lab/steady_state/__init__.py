"""
Steady state: AC power flow and the load-matrix stability quantities.
"""
from stvs_lab.steady_state.power_flow import (
    OperatingPoint, admittance_matrix, bus_power_injections, dsbus_dv, solve_power_flow
)
from stvs_lab.steady_state.stability import (
    LoadMatrix, factorize, reactive_injection, reactive_injections, load_matrix,
    reactive_demand, stability_index, stability_summary
)

__all__ = [
    'OperatingPoint',
    'admittance_matrix',
    'bus_power_injections',
    'dsbus_dv',
    'solve_power_flow',
    'LoadMatrix',
    'factorize',
    'reactive_injection',
    'reactive_injections',
    'load_matrix',
    'reactive_demand',
    'stability_index',
    'stability_summary'
]
