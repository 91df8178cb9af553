"""
Trajectory files: columnar binary record, JSON sidecar and CSV export.

Binary layout (little-endian):
    magic b"STVT", uint16 version, uint32 bus count, uint32 samples, float64 dt,
    int32 bus ids, then float32 magnitude columns (one per bus) followed by
    float32 angle columns.
"""
import os
import struct
import logging
from typing import Optional

import numpy as np
import pandas as pd

from stvs_lab.exceptions import TrajectoryError
from stvs_lab.simulation.models import VoltageTrajectory
from stvs_lab.utils.io import atomic_write, read_json, write_json, version_string

logger = logging.getLogger(__name__)

MAGIC = b"STVT"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHIId")


def sidecar_path(path: str) -> str:
    return f"{os.path.splitext(path)[0]}.json"


def write_trajectory(traj: VoltageTrajectory, path: str, csv_path: Optional[str] = None) -> None:
    """
    Write a trajectory as binary record plus JSON sidecar (and optionally CSV).

    Args:
        traj: Trajectory to write
        path: Binary file path; the sidecar shares its stem with a .json suffix
        csv_path: Optional CSV export path
    """
    n_bus, n_samples = traj.vm.shape
    with atomic_write(path, "wb") as handle:
        handle.write(_HEADER.pack(MAGIC, FORMAT_VERSION, n_bus, n_samples, traj.dt))
        handle.write(np.asarray(traj.bus_ids, dtype="<i4").tobytes())
        handle.write(np.ascontiguousarray(traj.vm, dtype="<f4").tobytes())
        handle.write(np.ascontiguousarray(traj.va, dtype="<f4").tobytes())

    write_json(sidecar_path(path), {
        "format_version": FORMAT_VERSION,
        "horizon": traj.horizon,
        "collapsed": traj.collapsed,
        "collapse_time": traj.collapse_time,
        "metadata": traj.metadata,
        "version": version_string(),
    })
    logger.info(f"Wrote trajectory ({n_bus} buses x {n_samples} samples) to {path}")

    if csv_path:
        with atomic_write(csv_path, "w") as handle:
            trajectory_frame(traj).to_csv(handle, index=False)
        logger.info(f"Wrote trajectory CSV to {csv_path}")


def read_trajectory(path: str) -> VoltageTrajectory:
    """
    Read a trajectory written by write_trajectory.

    Raises:
        TrajectoryError: If the file is truncated or has the wrong magic/version
    """
    with open(path, "rb") as handle:
        raw = handle.read()
    if len(raw) < _HEADER.size:
        raise TrajectoryError(f"{path}: truncated header")
    magic, version, n_bus, n_samples, dt = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise TrajectoryError(f"{path}: not a trajectory file")
    if version != FORMAT_VERSION:
        raise TrajectoryError(f"{path}: unsupported format version {version}")

    expected = _HEADER.size + 4 * n_bus + 2 * 4 * n_bus * n_samples
    if len(raw) != expected:
        raise TrajectoryError(f"{path}: expected {expected} bytes, found {len(raw)}")
    offset = _HEADER.size
    bus_ids = np.frombuffer(raw, dtype="<i4", count=n_bus, offset=offset)
    offset += 4 * n_bus
    block = n_bus * n_samples
    vm = np.frombuffer(raw, dtype="<f4", count=block, offset=offset).reshape(n_bus, n_samples)
    va = np.frombuffer(raw, dtype="<f4", count=block, offset=offset + 4 * block).reshape(n_bus, n_samples)

    side = read_json(sidecar_path(path)) if os.path.exists(sidecar_path(path)) else {}
    return VoltageTrajectory(
        bus_ids=tuple(int(b) for b in bus_ids),
        dt=float(dt),
        horizon=float(side.get("horizon", n_samples * dt)),
        vm=vm.astype(float),
        va=va.astype(float),
        metadata=side.get("metadata", {}),
        collapsed=bool(side.get("collapsed", False)),
        collapse_time=side.get("collapse_time"),
    )


def trajectory_frame(traj: VoltageTrajectory) -> pd.DataFrame:
    """Tabular view: one row per sample, vm_<bus> and va_<bus> columns."""
    data = {"time": traj.times}
    for k, bus_id in enumerate(traj.bus_ids):
        data[f"vm_{bus_id}"] = traj.vm[k]
    for k, bus_id in enumerate(traj.bus_ids):
        data[f"va_{bus_id}"] = traj.va[k]
    return pd.DataFrame(data)
