import unittest

import numpy as np

from stvs_lab.config import TRANSFER_SCENARIOS
from stvs_lab.exceptions import PowerFlowError, SimulationError, ShapeError
from stvs_lab.grid.loader import load_grid, disconnect_lines, grid_from_dict, susceptance_partition
from stvs_lab.steady_state.power_flow import (
    OperatingPoint, admittance_matrix, bus_power_injections, solve_power_flow
)
from stvs_lab.steady_state.stability import (
    load_matrix, reactive_demand, reactive_injection, reactive_injections, stability_index, stability_summary
)

from tests.helpers import four_bus_grid, random_grid_dict, two_bus_grid

# Published base-case magnitudes of buses 1-29 of the 39-bus system
PUBLISHED_VM = [
    1.0394, 1.0484, 1.0307, 1.0045, 1.0060, 1.0082, 0.9984, 0.9979, 1.0383, 1.0178,
    1.0134, 1.0007, 1.0150, 1.0125, 1.0162, 1.0325, 1.0342, 1.0316, 1.0501, 0.9910,
    1.0323, 1.0501, 1.0451, 1.0380, 1.0577, 1.0526, 1.0384, 1.0504, 1.0501,
]


def flat_point(grid, vm, va=None):
    """OperatingPoint with the given magnitudes and angles, no power flow."""
    ids = tuple(grid.bus_ids)
    vm = np.asarray(vm, dtype=float)
    va = np.zeros(len(ids)) if va is None else np.asarray(va, dtype=float)
    index = {bus_id: k for k, bus_id in enumerate(ids)}
    v = vm * np.exp(1j * va)
    return OperatingPoint(
        bus_ids=ids, V=v, P_inj=np.zeros(len(ids)), Q_inj=np.zeros(len(ids)),
        V_G=np.array([vm[index[b]] for b in grid.generator_buses]),
        V_L=np.array([vm[index[b]] for b in grid.load_buses]),
        load_scale=1.0, topology_id=grid.topology_id, index_map=index,
    )


class TestPowerFlow(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.grid = load_grid("builtin:ne39")
        cls.op = solve_power_flow(cls.grid, 1.0)

    def test_base_case_matches_published_solution(self):
        np.testing.assert_allclose(self.op.vm[:29], PUBLISHED_VM, atol=1e-3)
        self.assertTrue(np.all((self.op.vm > 0.9) & (self.op.vm < 1.1)))

    def test_generator_set_points_held(self):
        expected = [self.grid.bus(b).vm for b in self.grid.generator_buses]
        np.testing.assert_allclose(self.op.V_G, expected, atol=1e-12)

    def test_power_balance(self):
        self.assertLess(self.op.mismatch, 1e-8)
        self.assertLessEqual(self.op.iterations, 50)
        ybus = admittance_matrix(self.grid)
        s = self.op.V * np.conj(ybus @ self.op.V)
        index = self.op.index_map
        for load in self.grid.loads:
            k = index[load.bus]
            self.assertAlmostEqual(s[k].real, -load.p, delta=1e-8)
            self.assertAlmostEqual(s[k].imag, -load.q, delta=1e-8)

    def test_heavy_loading_does_not_converge(self):
        with self.assertRaises(PowerFlowError) as ctx:
            solve_power_flow(self.grid, 50.0)
        self.assertGreater(ctx.exception.iterations, 0)

    def test_load_scale_leaves_generator_set_points(self):
        base = bus_power_injections(self.grid, 1.0)
        heavy = bus_power_injections(self.grid, 1.2)
        index = self.op.index_map
        self.assertFalse({31, 39} & {load.bus for load in self.grid.loads})
        for bus in self.grid.generator_buses:
            self.assertEqual(heavy[index[bus]], base[index[bus]])
        for load in self.grid.loads:
            self.assertAlmostEqual(heavy[index[load.bus]], 1.2 * base[index[load.bus]], places=12)
        # bus 31 carries 9.2 MW of netted local demand
        self.assertAlmostEqual(base[index[31]].real, 6.68671, places=12)

    def test_non_positive_scale(self):
        with self.assertRaises(SimulationError):
            solve_power_flow(self.grid, 0.0)

    def test_zero_demand_toy(self):
        grid = two_bus_grid(p=0.0, q=0.0)
        op = solve_power_flow(grid)
        self.assertEqual(op.iterations, 0)
        np.testing.assert_array_equal(op.V_L, op.V_G)
        np.testing.assert_allclose(op.P_inj, 0.0, atol=1e-15)

    def test_toy_delivers_demand(self):
        op = solve_power_flow(two_bus_grid(x=0.2, p=1.0, q=0.2), load_scale=0.5)
        self.assertAlmostEqual(op.P_inj[1], -0.5, delta=1e-8)
        self.assertAlmostEqual(op.Q_inj[1], -0.1, delta=1e-8)
        self.assertAlmostEqual(op.P_inj[0], 0.5, delta=1e-8)
        self.assertLess(op.V_L[0], 1.0)


class TestStabilityQuantities(unittest.TestCase):

    def test_two_bus_oracles(self):
        part = susceptance_partition(two_bus_grid(x=0.2))
        lm = load_matrix(part, np.array([1.0]))
        np.testing.assert_allclose(lm.v_oc, [1.0])
        np.testing.assert_allclose(lm.L_s, [[-1.25]])
        q_L = reactive_demand(np.array([0.9]), part, np.array([1.0]))
        np.testing.assert_allclose(q_L, [-0.45])
        self.assertAlmostEqual(stability_index(lm, q_L), 0.36, places=12)

    def test_index_reaches_one_at_half_open_circuit_voltage(self):
        part = susceptance_partition(two_bus_grid(x=0.2))
        lm = load_matrix(part, np.array([1.0]))
        for v, expected in [(0.5, 1.0), (0.25, 0.75), (1.0, 0.0)]:
            q_L = reactive_demand(np.array([v]), part, np.array([1.0]))
            self.assertAlmostEqual(stability_index(lm, q_L), expected, places=12)

    def test_flat_start_injection_is_zero(self):
        grid = two_bus_grid()
        part = susceptance_partition(grid)
        op = flat_point(grid, [1.0, 1.0])
        self.assertAlmostEqual(reactive_injection(op, part, 2), 0.0, places=12)

    def test_injection_matches_direct_summation(self):
        grid = four_bus_grid()
        part = susceptance_partition(grid)
        rng = np.random.default_rng(3)
        vm = rng.uniform(0.9, 1.1, 4)
        va = rng.uniform(-0.3, 0.3, 4)
        op = flat_point(grid, vm, va)
        matrix, ids = part.bus_matrix()
        for i, bus in enumerate(ids):
            expected = -sum(vm[i] * vm[j] * matrix[i, j] * np.cos(va[i] - va[j]) for j in range(4))
            self.assertAlmostEqual(reactive_injection(op, part, bus), expected, places=12)

    def test_injection_matches_power_flow_on_lossless_grid(self):
        grid = four_bus_grid()
        op = solve_power_flow(grid)
        q = reactive_injections(op, susceptance_partition(grid))
        for bus in grid.load_buses:
            self.assertAlmostEqual(q[bus], -grid.load_at(bus).q, delta=1e-7)

    def test_demand_equals_injection_at_equal_angles(self):
        grid = four_bus_grid()
        part = susceptance_partition(grid)
        vm = np.array([0.97, 0.95, 1.02, 1.0])
        q = reactive_injections(flat_point(grid, vm), part)
        q_L = reactive_demand(vm[:2], part, vm[2:])
        np.testing.assert_allclose(q_L, [q[1], q[2]], atol=1e-12)

    def test_load_matrix_matches_dense_evaluation(self):
        grid = load_grid("builtin:ne39")
        part = susceptance_partition(grid)
        V_G = np.array([grid.bus(b).vm for b in part.gen_buses])
        lm = load_matrix(part, V_G)
        v_oc = -np.linalg.inv(part.B_LL) @ part.B_LG @ V_G
        naive = np.zeros((part.m, part.m))
        for i in range(part.m):
            for j in range(part.m):
                naive[i, j] = 0.25 * v_oc[i] * part.B_LL[i, j] * v_oc[j]
        np.testing.assert_allclose(lm.L_s, naive, rtol=1e-10, atol=1e-10 * np.abs(naive).max())
        self.assertLess(np.max(np.abs(lm.L_s - lm.L_s.T)), 1e-12)
        self.assertTrue(np.all(lm.v_oc > 0))

    def test_generator_voltage_scaling(self):
        part = susceptance_partition(load_grid("builtin:ne39"))
        V_G = np.linspace(0.98, 1.06, part.n)
        base = load_matrix(part, V_G)
        scaled = load_matrix(part, 1.1 * V_G)
        np.testing.assert_allclose(scaled.v_oc, 1.1 * base.v_oc, rtol=1e-10)
        np.testing.assert_allclose(scaled.L_s, 1.21 * base.L_s, rtol=1e-10, atol=1e-12)

    def test_open_circuit_demand_vanishes_on_every_topology(self):
        grid = load_grid("builtin:ne39")
        V_G = np.array([grid.bus(b).vm for b in grid.generator_buses])
        for name, lines in [("base", ())] + list(TRANSFER_SCENARIOS.items()):
            part = susceptance_partition(disconnect_lines(grid, lines) if lines else grid)
            lm = load_matrix(part, V_G)
            q_L = reactive_demand(lm.v_oc, part, V_G)
            self.assertLess(np.max(np.abs(q_L)), 1e-12, name)
            self.assertEqual(stability_index(lm, np.zeros(part.m)), 0.0)

    def test_random_grids_match_dense_formulas(self):
        rng = np.random.default_rng(21)
        for case in range(50):
            data = random_grid_dict(rng)
            with self.subTest(case=case):
                part = susceptance_partition(grid_from_dict(data))
                ids = list(part.load_buses) + list(part.gen_buses)
                pos = {bus_id: k for k, bus_id in enumerate(ids)}
                B = np.zeros((len(ids), len(ids)))
                for branch in data["branches"]:
                    i, j, b = pos[branch["from"]], pos[branch["to"]], 1.0 / branch["x"]
                    B[i, j] += b
                    B[j, i] += b
                    B[i, i] -= b
                    B[j, j] -= b
                m = part.m
                set_points = {bus["id"]: bus.get("vm", 1.0) for bus in data["buses"]}
                V_G = np.array([set_points[bus_id] for bus_id in part.gen_buses])

                lm = load_matrix(part, V_G)
                v_oc = -np.linalg.solve(B[:m, :m], B[:m, m:] @ V_G)
                np.testing.assert_allclose(lm.v_oc, v_oc, rtol=1e-10)
                np.testing.assert_allclose(lm.L_s, 0.25 * np.outer(v_oc, v_oc) * B[:m, :m], rtol=1e-10, atol=1e-12)

                V_L = rng.uniform(0.7, 1.1, m)
                V = np.concatenate([V_L, V_G])
                np.testing.assert_allclose(reactive_demand(V_L, part, V_G), -(V * (B @ V))[:m],
                                           rtol=1e-10, atol=1e-12)
                self.assertLess(np.max(np.abs(reactive_demand(lm.v_oc, part, V_G))), 1e-12)

    def test_index_is_homogeneous(self):
        part = susceptance_partition(four_bus_grid())
        lm = load_matrix(part, np.array([1.02, 1.0]))
        q = np.array([0.3, -0.2])
        for alpha in (-2.0, 0.5, 3.0):
            self.assertAlmostEqual(stability_index(lm, alpha * q), abs(alpha) * stability_index(lm, q), places=12)

    def test_base_case_inside_margin(self):
        grid = load_grid("builtin:ne39")
        op = solve_power_flow(grid)
        summary = stability_summary(grid, op, susceptance_partition(grid))
        self.assertGreaterEqual(summary["delta"], 0.0)
        self.assertLess(summary["delta"], 1.0)
        self.assertEqual(summary["connected_branches"], 46)

    def test_shape_errors(self):
        part = susceptance_partition(four_bus_grid())
        with self.assertRaises(ShapeError):
            load_matrix(part, np.array([1.0]))
        with self.assertRaises(ShapeError):
            reactive_demand(np.ones(3), part, np.ones(2))


if __name__ == '__main__':
    unittest.main()
