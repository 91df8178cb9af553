import unittest
import io
import os
import json
import tempfile
from contextlib import redirect_stdout
from unittest.mock import patch

import pandas as pd

from stvs_lab.cli import create_parser, main
from stvs_lab.database.db_manager import create_connection, get_row_count
from stvs_lab.experiments.metrics import MetricsReport
from stvs_lab.grid.loader import load_grid
from stvs_lab.learning.checkpoint import load_checkpoint

from tests.helpers import synthetic_dataset, two_bus_dict


class CliTestCase(unittest.TestCase):

    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.db_path = os.path.join(self.temp_dir.name, "stvs.db")
        patcher = patch("stvs_lab.cli.configure_logging")
        self.mock_logging = patcher.start()
        self.addCleanup(patcher.stop)

    def tearDown(self):
        self.temp_dir.cleanup()

    def path(self, name):
        return os.path.join(self.temp_dir.name, name)

    def run_cli(self, *argv):
        buffer = io.StringIO()
        with redirect_stdout(buffer):
            code = main(["--db-path", self.db_path, *argv])
        return code, buffer.getvalue()

    def row_count(self, table):
        conn = create_connection(self.db_path)
        try:
            return get_row_count(conn, table)
        finally:
            conn.close()


class TestParser(CliTestCase):

    def test_no_command(self):
        code, output = self.run_cli()
        self.assertEqual(code, 2)
        self.assertIn("gen-data", output)
        self.mock_logging.assert_not_called()

    def test_missing_required_option(self):
        with self.assertRaises(SystemExit) as ctx:
            create_parser().parse_args(["simulate"])
        self.assertEqual(ctx.exception.code, 2)

    def test_eval_needs_seed_for_kfold(self):
        with self.assertRaises(SystemExit) as ctx:
            self.run_cli("eval", "--dataset", self.path("data"), "--kfold", "5")
        self.assertEqual(ctx.exception.code, 2)

    def test_line_lists(self):
        args = create_parser().parse_args(["power-flow", "--lines", "3-2,14-15"])
        self.assertEqual(args.lines, [(2, 3), (14, 15)])
        with self.assertRaises(SystemExit):
            create_parser().parse_args(["power-flow", "--lines", "2-"])

    def test_window_offset_option(self):
        base = ["gen-data", "--seed", "1", "--out", self.path("data")]
        self.assertEqual(create_parser().parse_args(base).window_offset, 0.0)
        self.assertEqual(create_parser().parse_args(base + ["--window-offset", "0.05"]).window_offset, 0.05)

    def test_logging_configured_at_requested_level(self):
        self.run_cli("--log-level", "DEBUG", "power-flow")
        self.mock_logging.assert_called_once_with("DEBUG")


class TestGridCommands(CliTestCase):

    def test_power_flow(self):
        out = self.path("op.json")
        code, output = self.run_cli("power-flow", "--out", out)
        self.assertEqual(code, 0)
        self.assertIn("ne39", output)
        with open(out) as handle:
            data = json.load(handle)
        self.assertLess(data["stability"]["delta"], 1.0)

    def test_power_flow_on_scenario(self):
        code, output = self.run_cli("power-flow", "--scenario", "G7")
        self.assertEqual(code, 0)
        self.assertIn("ne39~2-3~5-8", output)

    def test_islanding_outage_fails(self):
        code, _ = self.run_cli("power-flow", "--lines", "2-30")
        self.assertEqual(code, 1)

    def test_simulate_toy_grid(self):
        grid_path = self.path("toy.json")
        with open(grid_path, "w") as handle:
            json.dump(two_bus_dict(x=0.02, p=0.5, q=0.1, motor_fraction=0.5), handle)
        out = self.path("run.stvt")
        code, output = self.run_cli("simulate", "--grid", grid_path, "--fault-bus", "2", "--horizon", "2.5",
                                    "--out", out, "--csv", self.path("run.csv"))
        self.assertEqual(code, 0)
        self.assertIn("toy2: stable", output)
        self.assertTrue(os.path.exists(out))
        self.assertTrue(os.path.exists(self.path("run.json")))
        self.assertEqual(len(pd.read_csv(self.path("run.csv"))), 250)

    def test_simulate_unknown_bus(self):
        code, _ = self.run_cli("simulate", "--fault-bus", "99", "--out", self.path("run.stvt"))
        self.assertEqual(code, 1)


class TestPipeline(CliTestCase):
    """gen-data -> train -> eval -> heatmap -> export on a synthetic dataset."""

    def setUp(self):
        super().setUp()
        source_grid = load_grid("builtin:ne39")

        def fake_generate(spec, jobs=1, progress=False, grid=None):
            return synthetic_dataset(source_grid if grid is None else grid, count=spec.count, seed=spec.seed, spec=spec)

        patcher = patch("stvs_lab.cli.generate_dataset", side_effect=fake_generate)
        patcher.start()
        self.addCleanup(patcher.stop)
        self.data_dir = self.path("source")
        code, _ = self.run_cli("gen-data", "--count", "40", "--seed", "0", "--window", "0.2",
                               "--jobs", "1", "--quiet", "--out", self.data_dir)
        self.assertEqual(code, 0)

    def test_gen_data_registers_dataset(self):
        self.assertEqual(self.row_count("datasets"), 1)
        self.assertTrue(os.path.exists(os.path.join(self.data_dir, "manifest.json")))

    def test_train_and_evaluate(self):
        ckpt = self.path("model.ckpt")
        code, _ = self.run_cli("train", "--dataset", self.data_dir, "--out", ckpt, "--seed", "0",
                               "--epochs", "2")
        self.assertEqual(code, 0)
        self.assertEqual(self.row_count("checkpoints"), 1)

        report = self.path("eval.txt")
        code, output = self.run_cli("eval", "--dataset", self.data_dir, "--model", ckpt, "--noise",
                                    "--seed", "3", "--out", report)
        self.assertEqual(code, 0)
        self.assertIn("held-out test part", output)
        self.assertIn("PMU noise robustness", output)
        with open(self.path("eval.json")) as handle:
            data = json.load(handle)
        self.assertEqual(data["model"]["total"], 8)
        self.assertEqual(self.row_count("reports"), 1)

    def test_kfold_registers_fold_mean(self):
        folds = [MetricsReport(tp=1, fp=0, fn=0, tn=1), MetricsReport(tp=2, fp=3, fn=3, tn=2)]
        report = self.path("kfold.txt")
        with patch("stvs_lab.cli.kfold_evaluate", return_value=MetricsReport.pooled(folds)):
            code, output = self.run_cli("eval", "--dataset", self.data_dir, "--kfold", "2", "--seed", "1",
                                        "--out", report)
        self.assertEqual(code, 0)
        self.assertIn("pooled", output)
        with open(self.path("kfold.json")) as handle:
            data = json.load(handle)["kfold"]
        self.assertEqual((data["accuracy"], data["pooled"]["accuracy"]), (70.0, 50.0))
        conn = create_connection(self.db_path)
        try:
            recorded = conn.execute("SELECT accuracy FROM reports WHERE kind = 'eval'").fetchone()[0]
        finally:
            conn.close()
        self.assertEqual(recorded, 70.0)

    def test_transfer_links_fine_tuned_checkpoints_to_parent(self):
        ckpt = self.path("model.ckpt")
        code, _ = self.run_cli("train", "--dataset", self.data_dir, "--out", ckpt, "--seed", "0", "--epochs", "1")
        self.assertEqual(code, 0)
        out = self.path("transfer")
        code, output = self.run_cli("transfer", "--model", ckpt, "--scenario", "G1", "--finetune", "10",
                                    "--test-count", "20", "--seed", "2", "--jobs", "1", "--quiet", "--out", out)
        self.assertEqual(code, 0)
        self.assertIn("Fine-tuned", output)
        tuned = os.path.join(out, "G1.ckpt")
        _, header = load_checkpoint(tuned)
        self.assertEqual(header["parent"], os.path.abspath(ckpt))
        with open(os.path.join(out, "transfer.json")) as handle:
            result = json.load(handle)["results"][0]
        self.assertEqual(result["checkpoint"], os.path.abspath(tuned))
        self.assertEqual(header["topology_id"], result["topology_id"])
        conn = create_connection(self.db_path)
        try:
            parents = conn.execute("SELECT parent_path FROM checkpoints ORDER BY id").fetchall()
        finally:
            conn.close()
        self.assertEqual([row[0] for row in parents], [None, os.path.abspath(ckpt)])

    def test_window_ablation(self):
        out = self.path("window.txt")
        code, output = self.run_cli("ablate", "--dataset", self.data_dir, "--kind", "window", "--windows",
                                    "0.1,0.2", "--seed", "0", "--epochs", "1", "--out", out)
        self.assertEqual(code, 0)
        self.assertIn("Window (s)", output)
        with open(self.path("window.json")) as handle:
            rows = json.load(handle)["rows"]
        self.assertEqual([row["steps"] for row in rows], [10, 20])

    def test_heatmap(self):
        out = self.path("window.pgm")
        code, _ = self.run_cli("heatmap", "--dataset", self.data_dir, "--index", "1", "--out", out)
        self.assertEqual(code, 0)
        self.assertTrue(os.path.exists(out))
        frame = pd.read_csv(self.path("window.csv"), index_col="bus")
        self.assertEqual(frame.shape, (29, 20))

    def test_heatmap_index_out_of_range(self):
        code, _ = self.run_cli("heatmap", "--dataset", self.data_dir, "--index", "40", "--out", self.path("x.pgm"))
        self.assertEqual(code, 1)

    def test_export(self):
        code, _ = self.run_cli("export", "--table", "datasets", "--output", self.path("exports"))
        self.assertEqual(code, 0)
        frame = pd.read_csv(os.path.join(self.path("exports"), "datasets.csv"))
        self.assertEqual(len(frame), 1)
        self.assertEqual(frame["sample_count"][0], 40)

    def test_export_unknown_table(self):
        code, _ = self.run_cli("export", "--table", "games", "--output", self.path("exports"))
        self.assertEqual(code, 1)


if __name__ == '__main__':
    unittest.main()
