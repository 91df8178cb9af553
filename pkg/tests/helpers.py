"""
Small grids and synthetic records shared by the tests.
"""
import os
import unittest

import numpy as np

from stvs_lab.experiments.dataset import DatasetSpec, LabeledDataset
from stvs_lab.grid.loader import grid_from_dict
from stvs_lab.simulation.models import VoltageTrajectory

RUN_SLOW = os.environ.get("STVS_RUN_SLOW") == "1"

slow = unittest.skipUnless(RUN_SLOW, "set STVS_RUN_SLOW=1 to run long simulations")

DEFAULT_MOTOR = {"rs": 0.01, "xs": 0.1, "xm": 3.0, "rr": 0.018, "xr": 0.18, "h": 0.5, "torque_exponent": 2.0}


def two_bus_dict(x=0.2, p=1.0, q=0.2, motor_fraction=1.0, vm=1.0):
    """Generator at bus 1 feeding a load at bus 2 over one lossless line."""
    return {
        "name": "toy2",
        "base_mva": 100.0,
        "buses": [
            {"id": 1, "kind": "generator", "vm": vm},
            {"id": 2, "kind": "load"},
        ],
        "branches": [{"from": 1, "to": 2, "x": x}],
        "generators": [{"bus": 1, "p": 0.0, "h": 5.0, "d": 10.0, "xd_prime": 0.05}],
        "loads": [{"bus": 2, "p": p, "q": q, "motor_fraction": motor_fraction, "motor_params": "default"}],
        "motor_params": {"default": dict(DEFAULT_MOTOR)},
    }


def two_bus_grid(**kwargs):
    return grid_from_dict(two_bus_dict(**kwargs))


def four_bus_dict(motor_fraction=0.5):
    """Two generators, two loads, meshed and lossless."""
    return {
        "name": "toy4",
        "base_mva": 100.0,
        "buses": [
            {"id": 1, "kind": "load"},
            {"id": 2, "kind": "load"},
            {"id": 3, "kind": "generator", "vm": 1.02},
            {"id": 4, "kind": "generator", "vm": 1.0},
        ],
        "branches": [
            {"from": 1, "to": 2, "x": 0.1},
            {"from": 1, "to": 3, "x": 0.08},
            {"from": 2, "to": 4, "x": 0.12},
            {"from": 3, "to": 4, "x": 0.15},
            {"from": 1, "to": 4, "x": 0.2},
        ],
        "generators": [
            {"bus": 3, "p": 0.8, "h": 6.0, "d": 12.0, "xd_prime": 0.06},
            {"bus": 4, "p": 0.0, "h": 8.0, "d": 16.0, "xd_prime": 0.05},
        ],
        "loads": [
            {"bus": 1, "p": 0.9, "q": 0.3, "motor_fraction": motor_fraction},
            {"bus": 2, "p": 0.6, "q": 0.2, "motor_fraction": motor_fraction},
        ],
        "motor_params": {"default": dict(DEFAULT_MOTOR)},
    }


def four_bus_grid(**kwargs):
    return grid_from_dict(four_bus_dict(**kwargs))


def random_grid_dict(rng, max_gens=3, max_loads=6):
    """Connected lossless grid: random spanning tree plus a few extra lines."""
    n_gen = int(rng.integers(1, max_gens + 1))
    n_load = int(rng.integers(1, max_loads + 1))
    size = n_gen + n_load
    order = [int(k) + 1 for k in rng.permutation(size)]
    pairs = {tuple(sorted((order[k], order[int(rng.integers(0, k))]))) for k in range(1, size)}
    for _ in range(int(rng.integers(0, size))):
        a, b = (int(k) + 1 for k in rng.choice(size, 2, replace=False))
        pairs.add((min(a, b), max(a, b)))
    return {
        "name": "random",
        "base_mva": 100.0,
        "buses": ([{"id": k, "kind": "load"} for k in range(1, n_load + 1)]
                  + [{"id": k, "kind": "generator", "vm": float(rng.uniform(0.95, 1.05))}
                     for k in range(n_load + 1, size + 1)]),
        "branches": [{"from": a, "to": b, "x": float(rng.uniform(0.02, 0.5))} for a, b in sorted(pairs)],
        "generators": [{"bus": k, "p": 0.5, "h": 5.0, "d": 10.0, "xd_prime": 0.05}
                       for k in range(n_load + 1, size + 1)],
        "loads": [{"bus": k, "p": float(rng.uniform(0.1, 1.0)), "q": float(rng.uniform(0.0, 0.3))}
                  for k in range(1, n_load + 1)],
        "motor_params": {"default": dict(DEFAULT_MOTOR)},
    }


def flat_trajectory(bus_ids=(1, 2), dt=0.01, horizon=5.0, t_on=0.1, duration=0.1):
    """Trajectory at 1.0 p.u. everywhere, with fault metadata."""
    n = int(round(horizon / dt))
    return VoltageTrajectory(
        bus_ids=tuple(bus_ids),
        dt=dt,
        horizon=horizon,
        vm=np.ones((len(bus_ids), n)),
        va=np.zeros((len(bus_ids), n)),
        metadata={"topology_id": "toy", "fault": {"t_on": t_on, "duration": duration}},
    )


def separable_windows(count=64, rows=3, steps=4, seed=0):
    """Two Gaussian blobs of windows, class 1 shifted up by 2."""
    rng = np.random.default_rng(seed)
    y = np.tile([0, 1], count // 2)
    X = rng.normal(0.0, 0.3, (count, rows, steps)) + 2.0 * y[:, None, None]
    return X.astype(np.float32), y


def synthetic_dataset(grid, count=40, steps=20, seed=0, spec=None, labels=None):
    """
    Labeled windows without simulation: unstable samples sag to 0.6 p.u.
    on every load bus, stable ones sit near 0.98 p.u.
    """
    rng = np.random.default_rng(seed)
    if labels is None:
        labels = np.tile([0, 1], count // 2)
    labels = np.asarray(labels, dtype=np.int64)
    m = len(grid.load_buses)
    level = np.where(labels == 1, 0.6, 0.98)
    vm = (level[:, None, None] + rng.normal(0.0, 0.01, (count, m, steps))).astype(np.float32)
    if spec is None:
        spec = DatasetSpec(count=count, seed=seed, lines=tuple(grid.disconnected_lines), window=steps * 0.01)
    return LabeledDataset(
        spec=spec,
        topology_id=grid.topology_id,
        bus_ids=tuple(grid.load_buses),
        vm=vm,
        va=np.zeros_like(vm),
        labels=labels,
        indices=np.arange(count, dtype=np.int64),
        load_scale=np.linspace(0.8, 1.2, count),
        duration=np.full(count, 0.2),
        fault_bus=np.full(count, 4, dtype=np.int64),
        collapsed=np.zeros(count, dtype=bool),
        worst_bus=np.full(count, -1, dtype=np.int64),
        dwell=np.zeros(count),
    )
