#!/usr/bin/env python
"""
Command-line interface for STVS Lab.
"""
import os
import sys
import argparse
import logging
import time
from dataclasses import replace
from typing import List, Optional

import numpy as np
import pandas as pd
from tabulate import tabulate

from stvs_lab.config import (
    configure_logging, DB_PATH, DEFAULT_LOG_LEVEL, DATASET_CONFIG, FEATURE_CONFIG, GRID_CONFIG, SIM_CONFIG,
    TRAIN_CONFIG, TRANSFER_SCENARIOS,
)
from stvs_lab.database.db_manager import (
    get_db_connection, get_tables, record_checkpoint, record_dataset, record_report
)
from stvs_lab.exceptions import StvsError
from stvs_lab.experiments.dataset import (
    DatasetSpec, LabeledDataset, generate_dataset, load_dataset, save_dataset, stratified_split
)
from stvs_lab.experiments.evaluation import (
    cnn_fit_predict, kfold_evaluate, run_noise_robustness, run_size_ablation, run_window_ablation
)
from stvs_lab.experiments.metrics import compute_metrics
from stvs_lab.experiments.reports import (
    metrics_table, noise_table, size_table, transfer_table, window_table, write_report
)
from stvs_lab.experiments.transfer import resolve_scenarios, run_transfer_suite
from stvs_lab.features.export import write_heatmap
from stvs_lab.features.labels import label_trajectory
from stvs_lab.grid.loader import disconnect_lines, load_grid, susceptance_partition
from stvs_lab.learning.checkpoint import load_checkpoint, save_checkpoint
from stvs_lab.learning.model import Architecture, CnnClassifier
from stvs_lab.learning.training import TrainConfig, accuracy, train
from stvs_lab.simulation.dynamics import simulate
from stvs_lab.simulation.models import FaultSpec
from stvs_lab.simulation.trajectory_io import write_trajectory
from stvs_lab.steady_state.power_flow import solve_power_flow
from stvs_lab.steady_state.stability import stability_summary
from stvs_lab.utils.converters import parse_line_list
from stvs_lab.utils.io import atomic_write, write_json

logger = logging.getLogger(__name__)


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def _line_list(text: str):
    try:
        return parse_line_list(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def _add_grid_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--grid", default=GRID_CONFIG["default_grid"],
                        help="Grid JSON file or builtin:<name> (default: %(default)s)")
    parser.add_argument("--lines", type=_line_list, default=[],
                        help="Lines to disconnect, e.g. 2-3,5-8")
    parser.add_argument("--scenario", choices=list(TRANSFER_SCENARIOS),
                        help="Named topology change (overrides --lines)")


def _add_train_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--epochs", type=int, default=TRAIN_CONFIG["epochs"], help="Epoch budget")
    parser.add_argument("--batch-size", type=int, default=TRAIN_CONFIG["batch_size"], help="Mini-batch size")
    parser.add_argument("--lr", type=float, default=TRAIN_CONFIG["learning_rate"], help="Learning rate")
    parser.add_argument("--patience", type=int, default=TRAIN_CONFIG["patience"],
                        help="Early-stopping patience in epochs")
    parser.add_argument("--optimizer", choices=["adam", "sgd"], default="adam", help="Optimizer")
    parser.add_argument("--window", type=float, help="Window length in seconds (default: the stored length)")


def create_parser() -> argparse.ArgumentParser:
    """Create the command-line argument parser."""
    parser = argparse.ArgumentParser(prog="stvs", description="Short-term voltage stability laboratory")

    # Global options
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
                        default=DEFAULT_LOG_LEVEL.upper(), help="Set the logging level")
    parser.add_argument("--db-path", default=DB_PATH, help="Path to the SQLite run registry")
    parser.add_argument("--no-registry", action="store_true", help="Do not record artifacts in the registry")

    subparsers = parser.add_subparsers(dest="command", help="Command to run")

    # gen-data
    gen_parser = subparsers.add_parser("gen-data", help="Generate a labeled dataset")
    _add_grid_options(gen_parser)
    gen_parser.add_argument("--count", type=int, default=DATASET_CONFIG["source_count"], help="Number of samples")
    gen_parser.add_argument("--seed", type=int, required=True, help="Master seed")
    gen_parser.add_argument("--out", required=True, help="Output directory")
    gen_parser.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="Worker processes")
    gen_parser.add_argument("--window", type=float, default=FEATURE_CONFIG["window"],
                            help="Stored window length in seconds")
    gen_parser.add_argument("--window-offset", type=float, default=FEATURE_CONFIG["window_offset"],
                            help="Window start relative to fault inception in seconds")
    gen_parser.add_argument("--load-range", type=float, nargs=2, default=DATASET_CONFIG["load_scale_range"],
                            metavar=("LOW", "HIGH"), help="Load scale range")
    gen_parser.add_argument("--duration-range", type=float, nargs=2, default=DATASET_CONFIG["duration_range"],
                            metavar=("LOW", "HIGH"), help="Fault duration range in seconds")
    gen_parser.add_argument("--fault-policy", choices=["load", "all"], default="load",
                            help="Candidate fault buses")
    gen_parser.add_argument("--motor-fraction", type=float, help="Override every load's motor share")
    gen_parser.add_argument("--dt", type=float, default=SIM_CONFIG["dt"], help="Integration step in seconds")
    gen_parser.add_argument("--horizon", type=float, default=SIM_CONFIG["horizon"], help="Simulated seconds")
    gen_parser.add_argument("--no-balance", action="store_true", help="Skip rejection balancing")
    gen_parser.add_argument("--quiet", action="store_true", help="Hide progress bars")

    # train
    train_parser = subparsers.add_parser("train", help="Train a classifier on a dataset")
    train_parser.add_argument("--dataset", required=True, help="Dataset directory")
    train_parser.add_argument("--out", required=True, help="Checkpoint path")
    train_parser.add_argument("--seed", type=int, required=True, help="Split, initialization and shuffling seed")
    train_parser.add_argument("--split", type=float, nargs=3, default=DATASET_CONFIG["split"],
                              metavar=("TRAIN", "VAL", "TEST"), help="Split fractions")
    _add_train_options(train_parser)

    # eval
    eval_parser = subparsers.add_parser("eval", help="Evaluate a checkpoint or run k-fold validation")
    eval_parser.add_argument("--dataset", required=True, help="Dataset directory")
    eval_parser.add_argument("--model", help="Checkpoint to evaluate")
    eval_parser.add_argument("--kfold", type=int, help="Run k-fold cross-validation with k folds")
    eval_parser.add_argument("--noise", action="store_true", help="Also evaluate on PMU-noise-injected data")
    eval_parser.add_argument("--sigma-mag", type=float, default=FEATURE_CONFIG["noise_sigma_mag"],
                             help="Magnitude noise in p.u.")
    eval_parser.add_argument("--sigma-ang", type=float, default=FEATURE_CONFIG["noise_sigma_ang_deg"],
                             help="Angle noise in degrees")
    eval_parser.add_argument("--seed", type=int, help="Seed (required for --kfold and --noise)")
    eval_parser.add_argument("--out", help="Report path (text; JSON written alongside)")
    _add_train_options(eval_parser)

    # transfer
    transfer_parser = subparsers.add_parser("transfer", help="Direct transfer and fine-tuning on new topologies")
    transfer_parser.add_argument("--model", required=True, help="Pre-trained checkpoint")
    transfer_parser.add_argument("--scenario", nargs="*", choices=list(TRANSFER_SCENARIOS),
                                 help="Scenario names (default: all)")
    transfer_parser.add_argument("--lines", type=_line_list, help="Explicit lines to disconnect, e.g. 2-3,5-8")
    transfer_parser.add_argument("--finetune", type=int, default=DATASET_CONFIG["target_finetune"],
                                 help="Target samples used for fine-tuning")
    transfer_parser.add_argument("--test-count", type=int, default=DATASET_CONFIG["target_test"],
                                 help="Held-out target test samples")
    transfer_parser.add_argument("--freeze-conv", action="store_true", help="Fine-tune only the dense head")
    transfer_parser.add_argument("--source-dataset", help="Source dataset for the forgetting diagnostic")
    transfer_parser.add_argument("--grid", default=GRID_CONFIG["default_grid"], help="Base grid")
    transfer_parser.add_argument("--seed", type=int, required=True, help="Master seed of the target datasets")
    transfer_parser.add_argument("--out", required=True, help="Output directory")
    transfer_parser.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="Worker processes")
    transfer_parser.add_argument("--quiet", action="store_true", help="Hide progress bars")
    _add_train_options(transfer_parser)

    # ablate
    ablate_parser = subparsers.add_parser("ablate", help="Dataset-size or window-length ablation")
    ablate_parser.add_argument("--dataset", required=True, help="Dataset directory")
    ablate_parser.add_argument("--kind", choices=["size", "window"], required=True, help="Ablation type")
    ablate_parser.add_argument("--sizes", type=_int_list, default=[500, 2000, 3000],
                               help="Training-set sizes, e.g. 500,2000,3000")
    ablate_parser.add_argument("--windows", type=_float_list, default=[0.1, 0.2, 0.4, 0.6, 0.8],
                               help="Window lengths in seconds")
    ablate_parser.add_argument("--test-fraction", type=float, default=DATASET_CONFIG["split"][2],
                               help="Held-out share")
    ablate_parser.add_argument("--seed", type=int, required=True, help="Split and training seed")
    ablate_parser.add_argument("--out", required=True, help="Report path (text; JSON written alongside)")
    _add_train_options(ablate_parser)

    # heatmap
    heatmap_parser = subparsers.add_parser("heatmap", help="Export one feature window as PGM and CSV")
    heatmap_parser.add_argument("--dataset", required=True, help="Dataset directory")
    heatmap_parser.add_argument("--index", type=int, default=0, help="Sample position")
    heatmap_parser.add_argument("--window", type=float, help="Window length in seconds")
    heatmap_parser.add_argument("--out", required=True, help="PGM path")
    heatmap_parser.add_argument("--csv", help="CSV path (default: next to the PGM)")

    # simulate
    sim_parser = subparsers.add_parser("simulate", help="Simulate one fault and write the trajectory")
    _add_grid_options(sim_parser)
    sim_parser.add_argument("--load-scale", type=float, default=1.0, help="Load multiplier")
    sim_parser.add_argument("--fault-bus", type=int, required=True, help="Faulted bus")
    sim_parser.add_argument("--duration", type=float, default=0.1, help="Fault duration in seconds")
    sim_parser.add_argument("--t-on", type=float, default=SIM_CONFIG["t_on"], help="Fault inception in seconds")
    sim_parser.add_argument("--dt", type=float, default=SIM_CONFIG["dt"], help="Integration step in seconds")
    sim_parser.add_argument("--horizon", type=float, default=SIM_CONFIG["horizon"], help="Simulated seconds")
    sim_parser.add_argument("--motor-fraction", type=float, help="Override every load's motor share")
    sim_parser.add_argument("--out", required=True, help="Trajectory binary path (JSON sidecar alongside)")
    sim_parser.add_argument("--csv", help="Optional CSV export path")

    # power-flow
    pf_parser = subparsers.add_parser("power-flow", help="Solve the power flow and print the bus table")
    _add_grid_options(pf_parser)
    pf_parser.add_argument("--load-scale", type=float, default=1.0, help="Load multiplier")
    pf_parser.add_argument("--out", help="Optional JSON path for the operating point")

    # export
    export_parser = subparsers.add_parser("export", help="Export registry tables to CSV/JSON")
    export_parser.add_argument("--format", choices=["csv", "json"], default="csv", help="Export format")
    export_parser.add_argument("--table", required=True, help="Table to export")
    export_parser.add_argument("--output", required=True, help="Output directory or file")
    export_parser.add_argument("--query", help="Custom SQL query (overrides --table)")

    return parser


def _train_config(args: argparse.Namespace, **overrides) -> TrainConfig:
    return TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=args.seed if args.seed is not None else 0,
        patience=args.patience,
        optimizer=args.optimizer,
        progress=args.log_level == "DEBUG",
        **overrides,
    )


def _grid(args: argparse.Namespace):
    grid = load_grid(args.grid)
    if getattr(args, "motor_fraction", None) is not None:
        grid = grid.with_motor_fraction(args.motor_fraction)
    lines = TRANSFER_SCENARIOS[args.scenario] if args.scenario else args.lines
    return disconnect_lines(grid, lines) if lines else grid


def _test_part(dataset: LabeledDataset, header: dict) -> Optional[np.ndarray]:
    """Held-out positions when the checkpoint was trained on this dataset."""
    split = header.get("split")
    if not split or header.get("dataset_hash") != dataset.content_hash:
        return None
    return stratified_split(dataset.labels, split["fractions"], split["seed"])[2]


def run_gen_data(args: argparse.Namespace) -> None:
    """Generate, save and register a dataset."""
    lines = TRANSFER_SCENARIOS[args.scenario] if args.scenario else args.lines
    spec = DatasetSpec(
        count=args.count,
        seed=args.seed,
        grid=args.grid,
        lines=tuple(tuple(pair) for pair in lines),
        load_scale_range=tuple(args.load_range),
        duration_range=tuple(args.duration_range),
        fault_policy=args.fault_policy,
        window=args.window,
        window_offset=args.window_offset,
        dt=args.dt,
        horizon=args.horizon,
        motor_fraction=args.motor_fraction,
        balance=not args.no_balance,
    )
    start_time = time.time()
    dataset = generate_dataset(spec, jobs=args.jobs, progress=not args.quiet)
    manifest = save_dataset(dataset, args.out)
    if not args.no_registry:
        record_dataset(args.out, manifest, args.db_path)
    mix = manifest["class_mix"]
    print(f"{len(dataset)} samples ({mix['stable']} stable, {mix['unstable']} unstable, "
          f"{mix['collapsed']} collapsed) written to {args.out}")
    print(f"content hash {manifest['content_hash']}")
    logger.info(f"Time elapsed: {time.time() - start_time:.2f} seconds")


def run_train(args: argparse.Namespace) -> None:
    """Train on the train part, stop early on the validation part, report on the test part."""
    dataset = load_dataset(args.dataset)
    ctx = dataset.context()
    X = dataset.features(ctx, args.window)
    y = dataset.labels
    train_pos, val_pos, test_pos = stratified_split(y, args.split, args.seed)
    cfg = _train_config(args)

    model = CnnClassifier(Architecture(input_shape=tuple(X.shape[1:]), seed=args.seed))
    _, log = train(model, X[train_pos], y[train_pos], cfg, X[val_pos], y[val_pos])
    report = compute_metrics(model.predict(X[test_pos]), y[test_pos]) if len(test_pos) else None

    metrics = {"training": log.to_dict()}
    if report is not None:
        metrics["test"] = report.to_dict()
        metrics["val_accuracy"] = 100.0 * accuracy(model, X[val_pos], y[val_pos]) if len(val_pos) else None
        print(metrics_table(report))
    extra = {
        "topology_id": dataset.topology_id,
        "split": {"fractions": list(args.split), "seed": args.seed},
        "window": X.shape[2] * dataset.dt,
    }
    save_checkpoint(model, args.out, cfg.to_dict(), dataset.content_hash, metrics, extra)
    if not args.no_registry:
        _, header = load_checkpoint(args.out)
        record_checkpoint(args.out, header, args.db_path)
    print(f"checkpoint written to {args.out}")


def run_eval(args: argparse.Namespace) -> None:
    """Evaluate a checkpoint, optionally under PMU noise, or run k-fold validation."""
    dataset = load_dataset(args.dataset)
    ctx = dataset.context()
    sections, data = [], {}
    headline = None

    if args.kfold:
        X = dataset.features(ctx, args.window)
        report = kfold_evaluate(X, dataset.labels, args.kfold, cnn_fit_predict(_train_config(args)), args.seed,
                                progress=True)
        sections.append(f"{args.kfold}-fold cross-validation\n" + metrics_table(report))
        data["kfold"] = report.to_dict()
        headline = report.headline["accuracy"]

    if args.model:
        model, header = load_checkpoint(args.model)
        test_pos = _test_part(dataset, header)
        subset = dataset if test_pos is None else dataset.subset(test_pos)
        T_w = model.arch.input_shape[1] * dataset.dt
        report = compute_metrics(model.predict(subset.features(ctx, T_w)), subset.labels)
        scope = "held-out test part" if test_pos is not None else "whole dataset"
        sections.append(f"Checkpoint {args.model} on {scope}\n" + metrics_table(report))
        data["model"] = report.to_dict()
        headline = report.accuracy
        if args.noise:
            noise = run_noise_robustness(model, subset, ctx, args.sigma_mag, args.sigma_ang, args.seed, T_w)
            sections.append("PMU noise robustness\n" + noise_table(noise))
            data["noise"] = noise.to_dict()

    if not sections:
        raise ValueError("nothing to evaluate: give --model and/or --kfold")
    text = "\n\n".join(sections)
    print(text)
    if args.out:
        json_path = os.path.splitext(args.out)[0] + ".json"
        write_report(text, data, args.out, json_path)
        if not args.no_registry:
            record_report("eval", json_path, data, args.model, dataset.content_hash, args.seed,
                          headline, args.db_path)


def run_transfer(args: argparse.Namespace) -> None:
    """Run the transfer suite on the selected topologies."""
    model, header = load_checkpoint(args.model)
    scenarios = resolve_scenarios(args.scenario, args.lines)
    cfg = _train_config(args, freeze_conv=args.freeze_conv)

    source_test = None
    base_spec = DatasetSpec(count=1, seed=args.seed, grid=args.grid)
    if args.source_dataset:
        source = load_dataset(args.source_dataset)
        test_pos = _test_part(source, header)
        subset = source if test_pos is None else source.subset(test_pos)
        source_test = (subset.features(source.context(), model.arch.input_shape[1] * source.dt), subset.labels)
        base_spec = replace(source.spec, seed=args.seed)

    results = run_transfer_suite(model, scenarios, base_spec, cfg, args.finetune, args.test_count, args.jobs,
                                 progress=not args.quiet, source_test=source_test, generate=generate_dataset)
    text = transfer_table(results)
    print(text)
    os.makedirs(args.out, exist_ok=True)

    # fine-tuned models keep a link to the checkpoint they started from
    parent = os.path.abspath(args.model)
    rows = []
    for result in results:
        row = result.to_dict()
        if result.model is not None:
            ckpt_path = os.path.join(args.out, f"{result.scenario}.ckpt")
            extra = {"parent": parent, "topology_id": result.topology_id, "scenario": result.scenario}
            save_checkpoint(result.model, ckpt_path, cfg.to_dict(), result.dataset_hash,
                            {"test": result.fine_tuned.to_dict()}, extra)
            if not args.no_registry:
                _, ckpt_header = load_checkpoint(ckpt_path)
                record_checkpoint(ckpt_path, ckpt_header, args.db_path)
            row["checkpoint"] = os.path.abspath(ckpt_path)
        rows.append(row)

    json_path = os.path.join(args.out, "transfer.json")
    data = {"model": parent, "freeze_conv": args.freeze_conv, "finetune": args.finetune, "results": rows}
    write_report(text, data, os.path.join(args.out, "transfer.txt"), json_path)
    if not args.no_registry:
        record_report("transfer", json_path, data, args.model, header.get("dataset_hash"), args.seed,
                      float(np.mean([r.fine_tuned.accuracy for r in results])), args.db_path)


def run_ablate(args: argparse.Namespace) -> None:
    """Dataset-size or window-length ablation."""
    dataset = load_dataset(args.dataset)
    ctx = dataset.context()
    fit_predict = cnn_fit_predict(_train_config(args))
    if args.kind == "size":
        X = dataset.features(ctx, args.window)
        rows = run_size_ablation(X, dataset.labels, args.sizes, fit_predict, args.seed, args.test_fraction)
        text = size_table(rows)
    else:
        rows = run_window_ablation(dataset, ctx, args.windows, fit_predict, args.seed, args.test_fraction)
        text = window_table(rows)
    print(text)
    json_path = os.path.splitext(args.out)[0] + ".json"
    data = {"kind": args.kind, "dataset_hash": dataset.content_hash, "rows": rows}
    write_report(text, data, args.out, json_path)
    if not args.no_registry:
        record_report(f"ablate-{args.kind}", json_path, data, None, dataset.content_hash, args.seed,
                      rows[-1]["accuracy"], args.db_path)


def run_heatmap(args: argparse.Namespace) -> None:
    """Export the feature window of one sample."""
    dataset = load_dataset(args.dataset)
    if not 0 <= args.index < len(dataset):
        raise ValueError(f"index {args.index} is outside the dataset (0..{len(dataset) - 1})")
    window = dataset.window(args.index, dataset.context(), args.window)
    csv_path = args.csv or os.path.splitext(args.out)[0] + ".csv"
    write_heatmap(window.matrix, args.out, csv_path, row_labels=dataset.bus_ids, dt=dataset.dt)
    print(f"{window.m} x {window.n} window of {window.provenance['sample_id']} "
          f"(label {window.label}) written to {args.out} and {csv_path}")


def run_simulate(args: argparse.Namespace) -> None:
    """Simulate one fault and write the trajectory."""
    grid = _grid(args)
    op = solve_power_flow(grid, args.load_scale)
    fault = FaultSpec(args.fault_bus, args.t_on, args.duration)
    traj = simulate(grid, op, fault, args.horizon, args.dt)
    write_trajectory(traj, args.out, args.csv)
    label = label_trajectory(traj)
    print(f"{grid.topology_id}: {label.label} (worst bus {label.worst_bus}, dwell {label.dwell:.2f} s)"
          + (f", collapsed at {traj.collapse_time:.2f} s" if traj.collapsed else ""))


def run_power_flow(args: argparse.Namespace) -> None:
    """Print the bus table and the stability summary of the topology."""
    grid = _grid(args)
    op = solve_power_flow(grid, args.load_scale)
    rows = [[bus_id, grid.bus(bus_id).kind, op.vm[k], np.degrees(op.va[k]), op.P_inj[k], op.Q_inj[k]]
            for k, bus_id in enumerate(op.bus_ids)]
    print(tabulate(rows, headers=["Bus", "Kind", "|V| (p.u.)", "Angle (deg)", "P (p.u.)", "Q (p.u.)"],
                   floatfmt=".4f"))
    summary = stability_summary(grid, op, susceptance_partition(grid))
    print()
    print(tabulate([[summary["topology_id"], summary["connected_branches"], summary["delta"],
                     summary["v_oc_min"], summary["v_oc_max"], op.iterations, op.mismatch]],
                   headers=["Topology", "Branches", "Delta", "v_oc min", "v_oc max", "Iterations", "Mismatch"],
                   floatfmt=".4g"))
    if args.out:
        write_json(args.out, {**op.to_dict(), "stability": summary})


def run_export(args: argparse.Namespace) -> None:
    """Export registry tables to CSV or JSON."""
    logger.info(f"Exporting {args.table} to {args.format}...")
    with get_db_connection(args.db_path) as conn:
        if not args.query and args.table not in get_tables(conn):
            raise ValueError(f"table '{args.table}' does not exist in {args.db_path}")
        query = args.query or f"SELECT * FROM {args.table}"
        df = pd.read_sql_query(query, conn)

    output_path = args.output
    if not output_path.endswith(f".{args.format}"):
        os.makedirs(output_path, exist_ok=True)
        output_path = os.path.join(output_path, f"{args.table}.{args.format}")
    with atomic_write(output_path, "w") as handle:
        if args.format == "csv":
            df.to_csv(handle, index=False)
        else:
            df.to_json(handle, orient="records")
    logger.info(f"Exported {len(df)} rows to {output_path}")


COMMANDS = {
    "gen-data": run_gen_data,
    "train": run_train,
    "eval": run_eval,
    "transfer": run_transfer,
    "ablate": run_ablate,
    "heatmap": run_heatmap,
    "simulate": run_simulate,
    "power-flow": run_power_flow,
    "export": run_export,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the CLI; returns the exit code."""
    parser = create_parser()
    args = parser.parse_args(argv)

    if args.command is None:
        parser.print_help()
        return 2
    if args.command == "eval" and (args.kfold or args.noise) and args.seed is None:
        parser.error("--seed is required with --kfold or --noise")

    configure_logging(args.log_level)

    try:
        COMMANDS[args.command](args)
    except (StvsError, OSError, ValueError) as e:
        logger.error(f"{args.command} failed: {e}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
