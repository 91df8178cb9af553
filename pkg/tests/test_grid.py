import unittest
import os
import json
import tempfile

import numpy as np

from stvs_lab.config import DEFAULT_MOTOR_FRACTION, MOTOR_DEFAULTS, TRANSFER_SCENARIOS
from stvs_lab.exceptions import GridFormatError, GridValidationError, IslandingError, UnknownLineError
from stvs_lab.grid.cases import BUILTIN_GRIDS
from stvs_lab.grid.models import MotorParams
from stvs_lab.grid.loader import (
    load_grid, parse_grid_text, grid_from_dict, disconnect_lines, susceptance_matrix, susceptance_partition
)
from stvs_lab.utils.converters import format_line, parse_line_list, parse_line_pair

from tests.helpers import two_bus_dict, two_bus_grid, four_bus_grid


class TestGridLoading(unittest.TestCase):

    def setUp(self):
        self.grid = load_grid("builtin:ne39")

    def test_builtin_case_counts(self):
        self.assertEqual(len(self.grid.buses), 39)
        self.assertEqual(len(self.grid.generators), 10)
        self.assertEqual(len(self.grid.loads), 17)
        self.assertEqual(len(self.grid.branches), 46)
        self.assertEqual(len(self.grid.load_buses), 29)
        self.assertEqual(self.grid.slack_bus, 39)
        self.assertEqual(self.grid.topology_id, "ne39")

    def test_builtin_is_packaged_file(self):
        path = BUILTIN_GRIDS["ne39"]
        self.assertTrue(os.path.isfile(path))
        self.assertEqual(os.path.basename(os.path.dirname(path)), "data")
        self.assertEqual(load_grid(path), self.grid)

    def test_round_trip_through_file(self):
        fd, path = tempfile.mkstemp(suffix=".json")
        try:
            with os.fdopen(fd, "w") as handle:
                json.dump(self.grid.to_dict(), handle)
            self.assertEqual(load_grid(path), self.grid)
        finally:
            os.unlink(path)

    def test_unknown_builtin(self):
        with self.assertRaises(GridFormatError):
            load_grid("builtin:ieee14")

    def test_malformed_json_reports_position(self):
        with self.assertRaises(GridFormatError) as ctx:
            parse_grid_text("{bad")
        self.assertEqual(ctx.exception.line, 1)

    def test_missing_field_is_named(self):
        data = two_bus_dict()
        del data["branches"][0]["x"]
        with self.assertRaises(GridFormatError) as ctx:
            grid_from_dict(data)
        self.assertEqual(ctx.exception.field, "branches[0].x")

    def test_dangling_bus_reference(self):
        data = two_bus_dict()
        data["branches"].append({"from": 2, "to": 99, "x": 0.1})
        with self.assertRaises(GridValidationError):
            grid_from_dict(data)

    def test_non_positive_reactance(self):
        data = two_bus_dict(x=0.0)
        with self.assertRaises(GridValidationError):
            grid_from_dict(data)

    def test_load_at_generator_bus(self):
        data = two_bus_dict()
        data["loads"][0]["bus"] = 1
        with self.assertRaises(GridValidationError):
            grid_from_dict(data)

    def test_motor_fraction_range(self):
        with self.assertRaises(GridValidationError):
            grid_from_dict(two_bus_dict(motor_fraction=1.5))

    def test_islanded_input(self):
        data = two_bus_dict()
        data["buses"].append({"id": 3, "kind": "load"})
        with self.assertRaises(IslandingError):
            grid_from_dict(data)

    def test_two_bus_toy(self):
        grid = two_bus_grid()
        self.assertEqual(grid.load_buses, [2])
        self.assertEqual(grid.generator_buses, [1])
        self.assertEqual(grid.motor_param_set("default").xm, 3.0)

    def test_motor_fraction_override(self):
        grid = self.grid.with_motor_fraction(0.8)
        self.assertTrue(all(load.motor_fraction == 0.8 for load in grid.loads))
        self.assertTrue(all(load.motor_fraction == 0.5 for load in self.grid.loads))

    def test_load_defaults_follow_configuration(self):
        data = two_bus_dict()
        del data["loads"][0]["motor_fraction"]
        del data["motor_params"]["default"]["xr"]
        grid = grid_from_dict(data)
        self.assertEqual(grid.loads[0].motor_fraction, DEFAULT_MOTOR_FRACTION)
        self.assertEqual(grid.motor_param_set("default").xr, MOTOR_DEFAULTS["xr"])
        self.assertEqual(MotorParams(), MotorParams(**MOTOR_DEFAULTS))


class TestTopology(unittest.TestCase):

    def setUp(self):
        self.grid = load_grid("builtin:ne39")

    def test_disconnect_is_order_independent(self):
        a = disconnect_lines(self.grid, [(2, 3), (5, 8)])
        b = disconnect_lines(self.grid, [(8, 5), (3, 2)])
        self.assertEqual(a.topology_id, "ne39~2-3~5-8")
        self.assertEqual(a.topology_id, b.topology_id)
        self.assertEqual(len(a.connected_branches), 44)
        # source untouched
        self.assertEqual(len(self.grid.connected_branches), 46)

    def test_unknown_line(self):
        with self.assertRaises(UnknownLineError):
            disconnect_lines(self.grid, [(1, 3)])

    def test_line_already_out(self):
        reduced = disconnect_lines(self.grid, [(2, 3)])
        with self.assertRaises(UnknownLineError):
            disconnect_lines(reduced, [(2, 3)])

    def test_radial_line_islands(self):
        # bus 30 hangs off bus 2
        with self.assertRaises(IslandingError):
            disconnect_lines(self.grid, [(2, 30)])

    def test_every_scenario_stays_connected(self):
        for name, lines in TRANSFER_SCENARIOS.items():
            reduced = disconnect_lines(self.grid, lines)
            self.assertEqual(len(reduced.connected_branches), 46 - len(lines), name)
            self.assertEqual(reduced.disconnected_lines, sorted(tuple(sorted(p)) for p in lines))

    def test_line_parsing(self):
        self.assertEqual(parse_line_pair("5-2"), (2, 5))
        self.assertEqual(parse_line_list("2-3, 14:15"), [(2, 3), (14, 15)])
        self.assertEqual(parse_line_list(""), [])
        self.assertEqual(format_line((15, 14)), "14-15")
        with self.assertRaises(ValueError):
            parse_line_pair("2-")


class TestSusceptancePartition(unittest.TestCase):

    def test_two_bus_blocks(self):
        part = susceptance_partition(two_bus_grid(x=0.2))
        np.testing.assert_allclose(part.B_LL, [[-5.0]])
        np.testing.assert_allclose(part.B_LG, [[5.0]])
        np.testing.assert_allclose(part.B_GG, [[-5.0]])
        self.assertEqual(part.entry(1, 2), 5.0)

    def test_partition_symmetry_and_row_sums(self):
        grid = load_grid("builtin:ne39")
        part = susceptance_partition(grid)
        self.assertEqual(part.B_LL.shape, (29, 29))
        self.assertEqual(part.B_LG.shape, (29, 10))
        np.testing.assert_array_equal(part.B_LL, part.B_LL.T)
        np.testing.assert_array_equal(part.B_LG, part.B_GL.T)
        full = susceptance_matrix(grid)
        np.testing.assert_allclose(full.sum(axis=1), 0.0, atol=1e-9)

    def test_blocks_are_read_only(self):
        part = susceptance_partition(four_bus_grid())
        with self.assertRaises(ValueError):
            part.B_LL[0, 0] = 1.0

    def test_bus_matrix_reassembles_full_matrix(self):
        grid = four_bus_grid()
        matrix, ids = susceptance_partition(grid).bus_matrix()
        self.assertEqual(ids, [1, 2, 3, 4])
        np.testing.assert_allclose(matrix, susceptance_matrix(grid))

    def test_outage_changes_blocks(self):
        grid = load_grid("builtin:ne39")
        reduced = disconnect_lines(grid, [(2, 3)])
        part = susceptance_partition(reduced)
        self.assertEqual(part.topology_id, "ne39~2-3")
        self.assertEqual(part.entry(2, 3), 0.0)
        self.assertNotEqual(susceptance_partition(grid).entry(2, 3), 0.0)


if __name__ == '__main__':
    unittest.main()
