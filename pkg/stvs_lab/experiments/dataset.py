"""
Randomized dataset generation, storage and splitting.

Each sample draws a load level, a fault duration and a fault bus from its own
seed stream, solves the power flow, simulates the fault and keeps the load-bus
voltage windows that start at fault inception. Features are computed from
the stored windows on demand, so every window length and noise setting reuses
identical trajectories.
"""
import os
import math
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict, field, replace
from datetime import datetime
from functools import partial
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from stvs_lab.config import DATASET_CONFIG, FEATURE_CONFIG, GRID_CONFIG, SIM_CONFIG
from stvs_lab.exceptions import DatasetError, EquilibriumError, MotorInitError, PowerFlowError, WindowError
from stvs_lab.features.builder import FeatureContext, FeatureWindow, extract_window, inject_pmu_noise
from stvs_lab.features.labels import LABEL_NAMES, STABLE, UNSTABLE, class_counts, label_trajectory
from stvs_lab.grid.loader import disconnect_lines, load_grid
from stvs_lab.grid.models import GridModel
from stvs_lab.simulation.dynamics import simulate
from stvs_lab.simulation.models import FaultSpec, VoltageTrajectory
from stvs_lab.steady_state.power_flow import solve_power_flow
from stvs_lab.utils.converters import LinePair, normalize_line, seconds_to_steps
from stvs_lab.utils.io import atomic_write, hash_arrays, read_json, version_string, write_json

logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.json"
SAMPLES_FILE = "samples.npz"
METADATA_FILE = "metadata.csv"
FAULT_POLICIES = ("load", "all")


@dataclass(frozen=True)
class DatasetSpec:
    """Everything that determines a generated dataset."""
    count: int
    seed: int
    grid: str = GRID_CONFIG["default_grid"]
    lines: Tuple[LinePair, ...] = ()
    load_scale_range: Tuple[float, float] = DATASET_CONFIG["load_scale_range"]
    duration_range: Tuple[float, float] = DATASET_CONFIG["duration_range"]
    fault_policy: str = "load"
    fault_buses: Tuple[int, ...] = ()
    window: float = FEATURE_CONFIG["window"]
    window_offset: float = FEATURE_CONFIG["window_offset"]
    noise_sigma_mag: float = 0.0
    noise_sigma_ang_deg: float = 0.0
    dt: float = SIM_CONFIG["dt"]
    horizon: float = SIM_CONFIG["horizon"]
    t_on: float = SIM_CONFIG["t_on"]
    fault_admittance: float = SIM_CONFIG["fault_admittance"]
    motor_fraction: Optional[float] = None
    v_thresh: float = FEATURE_CONFIG["v_thresh"]
    dwell_thresh: float = FEATURE_CONFIG["dwell_thresh"]
    balance: bool = True
    min_class_fraction: float = DATASET_CONFIG["min_class_fraction"]
    balance_budget: float = DATASET_CONFIG["balance_budget"]
    max_redraws: int = DATASET_CONFIG["max_redraws"]

    def __post_init__(self):
        if self.count < 1:
            raise ValueError(f"sample count must be at least 1, got {self.count}")
        for name in ("load_scale_range", "duration_range"):
            low, high = getattr(self, name)
            if not 0 < low < high:
                raise ValueError(f"{name} must satisfy 0 < low < high, got ({low}, {high})")
        if self.fault_policy not in FAULT_POLICIES:
            raise ValueError(f"fault policy must be one of {FAULT_POLICIES}, got '{self.fault_policy}'")
        if not self.window > 0:
            raise ValueError(f"window length must be positive, got {self.window}")
        if self.window_start < 0:
            raise ValueError(f"window starts before t=0 (t_on {self.t_on} s, offset {self.window_offset} s)")
        if self.window_start + self.window > self.horizon:
            raise ValueError("window extends past the simulation horizon")
        if self.balance_budget < 1:
            raise ValueError("balance budget must be at least 1")

    @property
    def window_start(self) -> float:
        """Start of the stored window: fault inception plus the configured offset."""
        return self.t_on + self.window_offset

    @property
    def window_steps(self) -> int:
        return seconds_to_steps(self.window, self.dt)

    def build_grid(self) -> GridModel:
        """Load the grid, apply the motor share override and the line outages."""
        grid = load_grid(self.grid)
        if self.motor_fraction is not None:
            grid = grid.with_motor_fraction(self.motor_fraction)
        if self.lines:
            grid = disconnect_lines(grid, self.lines)
        return grid

    def fault_candidates(self, grid: GridModel) -> List[int]:
        if self.fault_buses:
            missing = [bus for bus in self.fault_buses if bus not in grid.bus_ids]
            if missing:
                raise DatasetError(f"fault buses {missing} are not in the grid")
            return list(self.fault_buses)
        return list(grid.load_buses) if self.fault_policy == "load" else list(grid.bus_ids)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["lines"] = [list(pair) for pair in self.lines]
        data["load_scale_range"] = list(self.load_scale_range)
        data["duration_range"] = list(self.duration_range)
        data["fault_buses"] = list(self.fault_buses)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DatasetSpec":
        data = dict(data)
        data["lines"] = tuple(normalize_line(pair) for pair in data.get("lines", ()))
        data["load_scale_range"] = tuple(data.get("load_scale_range", DATASET_CONFIG["load_scale_range"]))
        data["duration_range"] = tuple(data.get("duration_range", DATASET_CONFIG["duration_range"]))
        data["fault_buses"] = tuple(data.get("fault_buses", ()))
        return cls(**data)


@dataclass(eq=False)
class LabeledDataset:
    """
    Stored voltage windows with labels.

    vm and va are (N, m, n) float32 blocks over the load buses `bus_ids`,
    starting at spec.window_start (fault inception plus the offset).
    Samples are ordered by draw index.
    """
    spec: DatasetSpec
    topology_id: str
    bus_ids: Tuple[int, ...]
    vm: np.ndarray
    va: np.ndarray
    labels: np.ndarray
    indices: np.ndarray
    load_scale: np.ndarray
    duration: np.ndarray
    fault_bus: np.ndarray
    collapsed: np.ndarray
    worst_bus: np.ndarray
    dwell: np.ndarray
    info: Dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def dt(self) -> float:
        return self.spec.dt

    @property
    def sample_ids(self) -> List[str]:
        return [f"{self.topology_id}/{self.spec.seed}/{int(i)}" for i in self.indices]

    @property
    def class_mix(self) -> Dict[str, int]:
        stable, unstable = class_counts(self.labels)
        return {"stable": stable, "unstable": unstable, "collapsed": int(np.sum(self.collapsed))}

    @property
    def content_hash(self) -> str:
        return hash_arrays(self.vm, self.va, self.labels, self.indices, self.load_scale,
                           self.duration, self.fault_bus)

    @property
    def metadata(self) -> pd.DataFrame:
        """One row per sample."""
        return pd.DataFrame({
            "index": self.indices,
            "sample_id": self.sample_ids,
            "load_scale": self.load_scale,
            "duration": self.duration,
            "fault_bus": self.fault_bus,
            "label": [LABEL_NAMES[int(code)] for code in self.labels],
            "collapsed": self.collapsed,
            "worst_bus": self.worst_bus,
            "dwell": self.dwell,
        })

    def subset(self, positions: Sequence[int]) -> "LabeledDataset":
        positions = np.asarray(positions, dtype=int)
        return replace(
            self,
            vm=self.vm[positions],
            va=self.va[positions],
            labels=self.labels[positions],
            indices=self.indices[positions],
            load_scale=self.load_scale[positions],
            duration=self.duration[positions],
            fault_bus=self.fault_bus[positions],
            collapsed=self.collapsed[positions],
            worst_bus=self.worst_bus[positions],
            dwell=self.dwell[positions],
            info=dict(self.info),
        )

    def context(self, grid: Optional[GridModel] = None) -> FeatureContext:
        """Feature context of the dataset's topology."""
        return FeatureContext.for_grid(grid if grid is not None else self.spec.build_grid())

    def _check_context(self, ctx: FeatureContext) -> None:
        if ctx.topology_id != self.topology_id:
            raise DatasetError(f"dataset holds {self.topology_id}, context is for {ctx.topology_id}")
        if tuple(ctx.load_buses) != tuple(self.bus_ids):
            raise DatasetError("dataset rows do not match the load buses of the context")

    def noisy_magnitudes(self, sigma_mag: float, sigma_ang_deg: float, seed: int) -> np.ndarray:
        """Magnitude windows with PMU noise; each sample gets its own stream."""
        out = np.empty_like(self.vm)
        horizon = self.vm.shape[2] * self.dt
        for k in range(len(self)):
            traj = VoltageTrajectory(bus_ids=self.bus_ids, dt=self.dt, horizon=horizon,
                                     vm=self.vm[k].astype(np.float64), va=self.va[k].astype(np.float64))
            stream = int(np.random.SeedSequence([seed, int(self.indices[k])]).generate_state(1)[0])
            out[k] = inject_pmu_noise(traj, sigma_mag, sigma_ang_deg, seed=stream).vm
        return out

    def features(self, ctx: FeatureContext, T_w: Optional[float] = None, sigma_mag: float = 0.0,
                 sigma_ang_deg: float = 0.0, noise_seed: int = 0) -> np.ndarray:
        """
        Feature windows for every sample.

        Args:
            ctx: Feature context of the dataset's topology
            T_w: Window length (default: the stored length); shorter windows are prefixes
            sigma_mag: PMU magnitude noise in p.u.
            sigma_ang_deg: PMU angle noise in degrees
            noise_seed: Seed of the noise streams

        Returns:
            float32 array (N, m, n_w)
        """
        self._check_context(ctx)
        stored = self.vm.shape[2]
        steps = stored if T_w is None else seconds_to_steps(T_w, self.dt)
        if steps < 1 or steps > stored:
            raise WindowError(f"window of {steps} steps does not fit the stored {stored} steps")
        vm = self.vm
        if sigma_mag > 0 or sigma_ang_deg > 0:
            vm = self.noisy_magnitudes(sigma_mag, sigma_ang_deg, noise_seed)
        vm = vm[:, :, :steps].astype(np.float64)
        count, m, _ = vm.shape
        block = vm.transpose(1, 0, 2).reshape(m, count * steps)
        feats = ctx.features(block).reshape(m, count, steps).transpose(1, 0, 2)
        return np.ascontiguousarray(feats, dtype=np.float32)

    def window(self, position: int, ctx: FeatureContext, T_w: Optional[float] = None) -> FeatureWindow:
        """FeatureWindow of one sample."""
        self._check_context(ctx)
        T_w = self.spec.window if T_w is None else T_w
        feats = ctx.features(self.vm[position].astype(np.float64))
        return extract_window(feats, 0.0, T_w, self.dt, label=int(self.labels[position]),
                              provenance={"sample_id": self.sample_ids[position], "t_on": self.spec.t_on,
                                          "window_start": self.spec.window_start,
                                          "topology_id": self.topology_id})


def window_block(traj: VoltageTrajectory, rows: List[int], start: int, steps: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Voltage window of the given rows; frames missing after a collapse repeat the last one.
    """
    available = traj.n_samples
    if available == 0:
        raise DatasetError("trajectory has no samples")
    cols = np.minimum(np.arange(start, start + steps), available - 1)
    return (traj.vm[np.ix_(rows, cols)].astype(np.float32),
            traj.va[np.ix_(rows, cols)].astype(np.float32))


def draw_sample(grid: GridModel, spec: DatasetSpec, index: int) -> Dict[str, Any]:
    """
    Generate sample `index` from its own seed stream.

    A draw without a power-flow solution or a dynamic equilibrium is redrawn up to
    spec.max_redraws times.

    Raises:
        DatasetError: When every draw fails
    """
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, index]))
    candidates = spec.fault_candidates(grid)
    start = seconds_to_steps(spec.window_start, spec.dt)
    last_error = None
    for attempt in range(spec.max_redraws + 1):
        load_scale = float(rng.uniform(*spec.load_scale_range))
        duration = float(rng.uniform(*spec.duration_range))
        fault_bus = int(candidates[rng.integers(len(candidates))])
        try:
            op = solve_power_flow(grid, load_scale)
            fault = FaultSpec(fault_bus, spec.t_on, duration, spec.fault_admittance)
            traj = simulate(grid, op, fault, spec.horizon, spec.dt)
        except (PowerFlowError, MotorInitError, EquilibriumError) as e:
            last_error = e
            logger.warning(f"Sample {index}: redrawing after failure at load scale {load_scale:.3f} ({e})")
            continue
        label = label_trajectory(traj, spec.v_thresh, spec.dwell_thresh)
        vm, va = window_block(traj, traj.rows(grid.load_buses), start, spec.window_steps)
        return {
            "index": index,
            "vm": vm,
            "va": va,
            "label": label.code,
            "load_scale": load_scale,
            "duration": duration,
            "fault_bus": fault_bus,
            "collapsed": traj.collapsed,
            "worst_bus": -1 if label.worst_bus is None else label.worst_bus,
            "dwell": label.dwell,
            "redraws": attempt,
        }
    raise DatasetError(f"sample {index}: no solvable operating point after "
                       f"{spec.max_redraws + 1} draws ({last_error})")


def _run_samples(worker: Callable[[int], Dict[str, Any]], indices: Sequence[int], jobs: int,
                 progress: bool, desc: str) -> List[Dict[str, Any]]:
    """Run worker over indices; results come back in index order."""
    indices = list(indices)
    if jobs <= 1 or len(indices) < 2:
        return [worker(i) for i in tqdm(indices, desc=desc, unit="sample", disable=not progress)]
    chunksize = max(1, len(indices) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as executor:
        results = executor.map(worker, indices, chunksize=chunksize)
        return list(tqdm(results, total=len(indices), desc=desc, unit="sample", disable=not progress))


def _rebalance(results: List[Dict[str, Any]], worker: Callable[[int], Dict[str, Any]], spec: DatasetSpec,
               jobs: int, progress: bool) -> List[Dict[str, Any]]:
    """
    Swap majority samples for extra minority draws until the minority share
    reaches spec.min_class_fraction or the draw budget is spent.
    """
    codes = np.array([r["label"] for r in results])
    stable, unstable = class_counts(codes)
    minority = STABLE if stable < unstable else UNSTABLE
    target = math.ceil(spec.min_class_fraction * spec.count)
    need = target - min(stable, unstable)
    if need <= 0:
        return results

    budget = int(spec.balance_budget * spec.count)
    next_index = spec.count
    extras: List[Dict[str, Any]] = []
    logger.info(f"Class mix {stable}/{unstable} (stable/unstable); drawing up to "
                f"{budget - next_index} extra samples for {need} more {LABEL_NAMES[minority]}")
    while len(extras) < need and next_index < budget:
        stop = min(next_index + max(4 * (need - len(extras)), jobs), budget)
        for result in _run_samples(worker, range(next_index, stop), jobs, progress, "Balancing"):
            if result["label"] == minority and len(extras) < need:
                extras.append(result)
        next_index = stop

    if extras:
        majority = [k for k, r in enumerate(results) if r["label"] != minority]
        dropped = set(majority[-len(extras):])
        results = [r for k, r in enumerate(results) if k not in dropped] + extras
        results.sort(key=lambda r: r["index"])
    if len(extras) < need:
        logger.warning(f"Draw budget exhausted: {LABEL_NAMES[minority]} class still below "
                       f"{spec.min_class_fraction:.0%} ({min(stable, unstable) + len(extras)} of {spec.count})")
    return results


def generate_dataset(spec: DatasetSpec, jobs: int = 1, progress: bool = False,
                     grid: Optional[GridModel] = None) -> LabeledDataset:
    """
    Generate a labeled dataset.

    Content depends only on the spec: every sample has its own seed stream and
    results are assembled in index order whatever the worker count.

    Args:
        spec: Dataset specification
        jobs: Worker processes
        progress: Show a progress bar
        grid: Pre-built grid (default: spec.build_grid())

    Returns:
        LabeledDataset of spec.count samples
    """
    grid = spec.build_grid() if grid is None else grid
    worker = partial(draw_sample, grid, spec)
    logger.info(f"Generating {spec.count} samples on {grid.topology_id} (seed {spec.seed}, {jobs} workers)")
    results = _run_samples(worker, range(spec.count), jobs, progress, "Simulating")
    if spec.balance:
        results = _rebalance(results, worker, spec, jobs, progress)

    def column(key: str, dtype) -> np.ndarray:
        return np.array([r[key] for r in results], dtype=dtype)

    dataset = LabeledDataset(
        spec=spec,
        topology_id=grid.topology_id,
        bus_ids=tuple(grid.load_buses),
        vm=np.stack([r["vm"] for r in results]),
        va=np.stack([r["va"] for r in results]),
        labels=column("label", np.int64),
        indices=column("index", np.int64),
        load_scale=column("load_scale", np.float64),
        duration=column("duration", np.float64),
        fault_bus=column("fault_bus", np.int64),
        collapsed=column("collapsed", bool),
        worst_bus=column("worst_bus", np.int64),
        dwell=column("dwell", np.float64),
        info={"redraws": int(sum(r["redraws"] for r in results))},
    )
    mix = dataset.class_mix
    logger.info(f"Generated {len(dataset)} samples: {mix['stable']} stable, {mix['unstable']} unstable, "
                f"{mix['collapsed']} collapsed")
    return dataset


def save_dataset(dataset: LabeledDataset, out_dir: str) -> Dict[str, Any]:
    """
    Write samples.npz, metadata.csv and manifest.json into out_dir.

    Returns:
        The manifest
    """
    os.makedirs(out_dir, exist_ok=True)
    with atomic_write(os.path.join(out_dir, SAMPLES_FILE), "wb") as handle:
        np.savez_compressed(
            handle, vm=dataset.vm, va=dataset.va, labels=dataset.labels, indices=dataset.indices,
            load_scale=dataset.load_scale, duration=dataset.duration, fault_bus=dataset.fault_bus,
            collapsed=dataset.collapsed, worst_bus=dataset.worst_bus, dwell=dataset.dwell,
        )
    with atomic_write(os.path.join(out_dir, METADATA_FILE), "w") as handle:
        dataset.metadata.to_csv(handle, index=False)

    manifest = {
        "spec": dataset.spec.to_dict(),
        "topology_id": dataset.topology_id,
        "bus_ids": list(dataset.bus_ids),
        "count": len(dataset),
        "window_steps": int(dataset.vm.shape[2]),
        "class_mix": dataset.class_mix,
        "content_hash": dataset.content_hash,
        "version": version_string(),
        "created_at": datetime.now().isoformat(timespec="seconds"),
        "info": dataset.info,
    }
    write_json(os.path.join(out_dir, MANIFEST_FILE), manifest)
    logger.info(f"Saved dataset {manifest['content_hash'][:12]} ({len(dataset)} samples) to {out_dir}")
    return manifest


def load_dataset(path: str) -> LabeledDataset:
    """
    Read a dataset directory and verify its content hash.

    Raises:
        DatasetError: If files are missing or the hash does not match
    """
    manifest_path = os.path.join(path, MANIFEST_FILE)
    samples_path = os.path.join(path, SAMPLES_FILE)
    if not os.path.exists(manifest_path) or not os.path.exists(samples_path):
        raise DatasetError(f"{path} is not a dataset directory")
    manifest = read_json(manifest_path)
    with np.load(samples_path) as data:
        arrays = {key: data[key] for key in data.files}
    try:
        dataset = LabeledDataset(
            spec=DatasetSpec.from_dict(manifest["spec"]),
            topology_id=manifest["topology_id"],
            bus_ids=tuple(manifest["bus_ids"]),
            info=manifest.get("info", {}),
            **arrays,
        )
    except (KeyError, TypeError) as e:
        raise DatasetError(f"{path}: malformed dataset ({e})") from e
    if dataset.content_hash != manifest.get("content_hash"):
        raise DatasetError(f"{path}: content hash does not match the manifest")
    return dataset


def stratified_split(labels: np.ndarray, fractions: Iterable[float], seed: int) -> List[np.ndarray]:
    """
    Split positions into parts with per-class proportions preserved.

    Args:
        labels: Class labels
        fractions: Part fractions summing to 1
        seed: Shuffle seed

    Returns:
        Sorted position arrays, one per fraction
    """
    fractions = np.asarray(list(fractions), dtype=float)
    if np.any(fractions < 0) or not np.isclose(fractions.sum(), 1.0):
        raise ValueError(f"split fractions must be non-negative and sum to 1, got {fractions.tolist()}")
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    parts: List[List[np.ndarray]] = [[] for _ in fractions]
    for cls in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == cls))
        bounds = np.round(np.cumsum(fractions) * len(members)).astype(int)
        for k, piece in enumerate(np.split(members, bounds[:-1])):
            parts[k].append(piece)
    return [np.sort(np.concatenate(chunks)) if chunks else np.zeros(0, dtype=int) for chunks in parts]


def stratified_take(labels: np.ndarray, count: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Draw exactly `count` positions whose class mix matches the whole set.

    Per-class quotas use largest remainders, so each class share in the drawn
    part is within one sample of its share in the rest.

    Args:
        labels: Class labels
        count: Number of positions to draw
        seed: Shuffle seed

    Returns:
        (drawn, rest) sorted position arrays

    Raises:
        ValueError: If count is negative or exceeds the number of labels
    """
    labels = np.asarray(labels)
    if not 0 <= count <= len(labels):
        raise ValueError(f"cannot draw {count} of {len(labels)} samples")
    if count == 0:
        return np.zeros(0, dtype=int), np.arange(len(labels))
    rng = np.random.default_rng(seed)
    classes, sizes = np.unique(labels, return_counts=True)
    quota = count * sizes / len(labels)
    take = np.floor(quota).astype(int)
    order = np.argsort(-(quota - take), kind="stable")
    take[order[:count - int(take.sum())]] += 1
    drawn = np.sort(np.concatenate([
        rng.permutation(np.flatnonzero(labels == cls))[:n] for cls, n in zip(classes, take)
    ]))
    return drawn, np.setdiff1d(np.arange(len(labels)), drawn)
