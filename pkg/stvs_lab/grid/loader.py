"""
Grid loading, validation, topology changes and susceptance partitioning.
"""
import os
import json
import logging
from dataclasses import replace
from typing import Any, Callable, Dict, Iterable, List, Optional, Union

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from stvs_lab.config import DEFAULT_MOTOR_FRACTION, GRID_CONFIG
from stvs_lab.exceptions import (
    GridFormatError, GridValidationError, UnknownLineError, IslandingError
)
from stvs_lab.grid.models import (
    BUS_KINDS, BRANCH_STATUSES, Bus, Branch, Generator, Load, MotorParams,
    GridModel, SusceptancePartition
)
from stvs_lab.grid.cases import BUILTIN_GRIDS
from stvs_lab.utils.converters import LinePair, format_line, normalize_line

logger = logging.getLogger(__name__)

_REQUIRED = object()


def load_grid(source: Union[str, os.PathLike]) -> GridModel:
    """
    Load and validate a grid description.

    Args:
        source: Path to a grid JSON file, or "builtin:<name>" for an embedded case

    Returns:
        Validated GridModel

    Raises:
        GridFormatError: If the document cannot be parsed
        GridValidationError: If a grid invariant is violated
        FileNotFoundError: If the path does not exist
    """
    source = str(source)
    prefix = GRID_CONFIG["builtin_prefix"]
    if source.startswith(prefix):
        name = source[len(prefix):]
        if name not in BUILTIN_GRIDS:
            raise GridFormatError(f"unknown builtin grid '{name}' (available: {', '.join(sorted(BUILTIN_GRIDS))})")
        logger.debug(f"Loading builtin grid {name}")
        source = BUILTIN_GRIDS[name]
    else:
        logger.debug(f"Loading grid from {source}")
    with open(source, "r") as handle:
        text = handle.read()
    return parse_grid_text(text)


def parse_grid_text(text: str) -> GridModel:
    """
    Parse grid JSON text.

    Raises:
        GridFormatError: With line and column for malformed JSON
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise GridFormatError(e.msg, line=e.lineno, column=e.colno) from e
    return grid_from_dict(data)


def _field(record: Dict[str, Any], key: str, path: str, cast: Callable = float,
           default: Any = _REQUIRED) -> Any:
    if key not in record or record[key] is None:
        if default is _REQUIRED:
            raise GridFormatError("missing required field", field=f"{path}.{key}")
        return default
    try:
        return cast(record[key])
    except (TypeError, ValueError) as e:
        raise GridFormatError(f"invalid value {record[key]!r}: {e}", field=f"{path}.{key}") from e


def _records(data: Dict[str, Any], key: str) -> List[Dict[str, Any]]:
    if key not in data:
        raise GridFormatError("missing required section", field=key)
    records = data[key]
    if not isinstance(records, list):
        raise GridFormatError("expected a list", field=key)
    for i, record in enumerate(records):
        if not isinstance(record, dict):
            raise GridFormatError("expected an object", field=f"{key}[{i}]")
    return records


def grid_from_dict(data: Dict[str, Any]) -> GridModel:
    """
    Build a GridModel from the decoded grid document and validate it.

    Args:
        data: Decoded JSON document

    Returns:
        Validated GridModel
    """
    if not isinstance(data, dict):
        raise GridFormatError("top level must be an object")

    buses = tuple(
        Bus(
            id=_field(rec, "id", f"buses[{i}]", int),
            kind=_field(rec, "kind", f"buses[{i}]", str),
            vm=_field(rec, "vm", f"buses[{i}]", float, 1.0),
            base_kv=_field(rec, "base_kv", f"buses[{i}]", float, None),
        )
        for i, rec in enumerate(_records(data, "buses"))
    )
    branches = tuple(
        Branch(
            from_bus=_field(rec, "from", f"branches[{i}]", int),
            to_bus=_field(rec, "to", f"branches[{i}]", int),
            x=_field(rec, "x", f"branches[{i}]"),
            r=_field(rec, "r", f"branches[{i}]", float, 0.0),
            b=_field(rec, "b", f"branches[{i}]", float, 0.0),
            tap=_field(rec, "tap", f"branches[{i}]", float, 1.0),
            status=_field(rec, "status", f"branches[{i}]", str, "connected"),
        )
        for i, rec in enumerate(_records(data, "branches"))
    )
    generators = tuple(
        Generator(
            bus=_field(rec, "bus", f"generators[{i}]", int),
            p=_field(rec, "p", f"generators[{i}]"),
            h=_field(rec, "h", f"generators[{i}]"),
            d=_field(rec, "d", f"generators[{i}]", float, 0.0),
            xd_prime=_field(rec, "xd_prime", f"generators[{i}]"),
        )
        for i, rec in enumerate(_records(data, "generators"))
    )
    loads = tuple(
        Load(
            bus=_field(rec, "bus", f"loads[{i}]", int),
            p=_field(rec, "p", f"loads[{i}]"),
            q=_field(rec, "q", f"loads[{i}]"),
            motor_fraction=_field(rec, "motor_fraction", f"loads[{i}]", float, DEFAULT_MOTOR_FRACTION),
            motor_params=_field(rec, "motor_params", f"loads[{i}]", str, "default"),
        )
        for i, rec in enumerate(_records(data, "loads"))
    )

    raw_params = data.get("motor_params", {}) or {}
    if not isinstance(raw_params, dict):
        raise GridFormatError("expected an object", field="motor_params")
    motor_params = []
    for name in sorted(raw_params):
        rec = raw_params[name]
        if not isinstance(rec, dict):
            raise GridFormatError("expected an object", field=f"motor_params.{name}")
        defaults = MotorParams()
        motor_params.append((name, MotorParams(**{
            key: _field(rec, key, f"motor_params.{name}", float, getattr(defaults, key))
            for key in defaults.to_dict()
        })))

    if "base_mva" not in data:
        raise GridFormatError("missing required field", field="base_mva")
    grid = GridModel(
        name=_field(data, "name", "", str, "grid").strip() or "grid",
        base_mva=_field(data, "base_mva", "", float),
        buses=buses,
        branches=branches,
        generators=generators,
        loads=loads,
        motor_params=tuple(motor_params),
        frequency=_field(data, "frequency", "", float, 60.0),
    )
    validate_grid(grid)
    logger.info(f"Loaded grid {grid.name}: {len(buses)} buses, {len(branches)} branches, "
                f"{len(generators)} generators, {len(loads)} loads")
    return grid


def validate_grid(grid: GridModel) -> None:
    """
    Check every GridModel invariant.

    Raises:
        GridValidationError: Naming the first violated invariant
        IslandingError: If the connected branches do not span all buses
    """
    if grid.base_mva <= 0:
        raise GridValidationError(f"base_mva must be positive, got {grid.base_mva}")
    if not grid.buses:
        raise GridValidationError("grid has no buses")

    ids = [bus.id for bus in grid.buses]
    duplicates = sorted({bus_id for bus_id in ids if ids.count(bus_id) > 1})
    if duplicates:
        raise GridValidationError(f"duplicate bus ids: {duplicates}")
    known = set(ids)
    for bus in grid.buses:
        if bus.kind not in BUS_KINDS:
            raise GridValidationError(f"bus {bus.id}: kind must be one of {BUS_KINDS}, got '{bus.kind}'")
        if bus.vm <= 0:
            raise GridValidationError(f"bus {bus.id}: voltage must be positive")

    seen_pairs = set()
    for branch in grid.branches:
        for end in (branch.from_bus, branch.to_bus):
            if end not in known:
                raise GridValidationError(f"branch {branch.from_bus}-{branch.to_bus} references unknown bus {end}")
        if branch.from_bus == branch.to_bus:
            raise GridValidationError(f"branch {branch.from_bus}-{branch.to_bus} is a self loop")
        if branch.x <= 0:
            raise GridValidationError(f"branch {format_line(branch.pair)}: reactance must be strictly positive")
        if branch.r < 0 or branch.tap <= 0:
            raise GridValidationError(f"branch {format_line(branch.pair)}: negative resistance or non-positive tap")
        if branch.status not in BRANCH_STATUSES:
            raise GridValidationError(f"branch {format_line(branch.pair)}: status must be one of {BRANCH_STATUSES}")
        if branch.pair in seen_pairs:
            raise GridValidationError(f"parallel circuits are not supported: {format_line(branch.pair)}")
        seen_pairs.add(branch.pair)

    if not grid.generators:
        raise GridValidationError("grid has no generators")
    gen_buses = set()
    for gen in grid.generators:
        if gen.bus not in known:
            raise GridValidationError(f"generator references unknown bus {gen.bus}")
        if gen.bus in gen_buses:
            raise GridValidationError(f"more than one generator at bus {gen.bus}")
        gen_buses.add(gen.bus)
        if grid.bus(gen.bus).kind != "generator":
            raise GridValidationError(f"generator at bus {gen.bus} which is not of kind 'generator'")
        if gen.h <= 0:
            raise GridValidationError(f"generator at bus {gen.bus}: inertia constant must be strictly positive")
        if gen.xd_prime <= 0:
            raise GridValidationError(f"generator at bus {gen.bus}: transient reactance must be strictly positive")
        if gen.d < 0:
            raise GridValidationError(f"generator at bus {gen.bus}: damping must be non-negative")
    for bus in grid.buses:
        if bus.kind == "generator" and bus.id not in gen_buses:
            raise GridValidationError(f"bus {bus.id} is of kind 'generator' but has no generator")

    load_buses = set()
    param_sets = {name for name, _ in grid.motor_params} | {"default"}
    for load in grid.loads:
        if load.bus not in known:
            raise GridValidationError(f"load references unknown bus {load.bus}")
        if load.bus in gen_buses:
            raise GridValidationError(f"load at generator bus {load.bus}; generator and load buses must be disjoint")
        if load.bus in load_buses:
            raise GridValidationError(f"more than one load record at bus {load.bus}")
        load_buses.add(load.bus)
        if not 0.0 <= load.motor_fraction <= 1.0:
            raise GridValidationError(f"load at bus {load.bus}: motor fraction must be in [0, 1]")
        if load.motor_params not in param_sets:
            raise GridValidationError(f"load at bus {load.bus}: unknown motor parameter set '{load.motor_params}'")
    for name, params in grid.motor_params:
        if any(value <= 0 for value in params.to_dict().values()):
            raise GridValidationError(f"motor parameter set '{name}': all values must be positive")

    components = count_components(grid)
    if components != 1:
        raise IslandingError(f"{components} connected components")


def count_components(grid: GridModel, branches: Optional[Iterable[Branch]] = None) -> int:
    """
    Number of connected components of the bus graph over connected branches.

    Args:
        grid: Grid whose buses form the vertex set
        branches: Branch set to use (defaults to the grid's connected branches)
    """
    index = {bus_id: k for k, bus_id in enumerate(grid.bus_ids)}
    if branches is None:
        branches = grid.connected_branches
    rows, cols = [], []
    for branch in branches:
        if branch.connected:
            rows.append(index[branch.from_bus])
            cols.append(index[branch.to_bus])
    size = len(index)
    adjacency = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(size, size))
    components, _ = connected_components(adjacency, directed=False)
    return int(components)


def disconnect_lines(grid: GridModel, lines: Iterable[Iterable[int]]) -> GridModel:
    """
    Return a copy of the grid with the named lines disconnected.

    Args:
        grid: Source grid (left untouched)
        lines: Bus pairs in any order

    Returns:
        New GridModel with the branches marked disconnected

    Raises:
        UnknownLineError: If a line does not exist or is already disconnected
        IslandingError: If the remaining network is not connected
    """
    targets: List[LinePair] = [normalize_line(line) for line in lines]
    connected = {branch.pair for branch in grid.connected_branches}
    for pair in targets:
        if pair not in connected:
            raise UnknownLineError(pair)

    drop = set(targets)
    branches = tuple(
        replace(branch, status="disconnected") if branch.pair in drop else branch
        for branch in grid.branches
    )
    result = replace(grid, branches=branches)
    components = count_components(result)
    if components != 1:
        raise IslandingError(f"removing {', '.join(format_line(p) for p in targets)} leaves {components} components")
    if targets:
        logger.info(f"Disconnected {', '.join(format_line(p) for p in targets)} -> topology {result.topology_id}")
    return result


def susceptance_matrix(grid: GridModel) -> np.ndarray:
    """
    Series susceptance matrix in ascending bus order over connected branches.

    Resistance, line charging and taps are ignored.
    """
    index = {bus_id: k for k, bus_id in enumerate(grid.bus_ids)}
    size = len(index)
    matrix = np.zeros((size, size))
    for branch in grid.connected_branches:
        i, j = index[branch.from_bus], index[branch.to_bus]
        b = branch.susceptance
        matrix[i, j] += b
        matrix[j, i] += b
        matrix[i, i] -= b
        matrix[j, j] -= b
    return matrix


def susceptance_partition(grid: GridModel) -> SusceptancePartition:
    """
    Split the series susceptance matrix into load and generator blocks.

    Rows and columns follow ascending bus id within each block.

    Args:
        grid: Validated grid

    Returns:
        SusceptancePartition with read-only blocks
    """
    matrix = susceptance_matrix(grid)
    index = {bus_id: k for k, bus_id in enumerate(grid.bus_ids)}
    load_buses = grid.load_buses
    gen_buses = grid.generator_buses
    li = [index[bus_id] for bus_id in load_buses]
    gi = [index[bus_id] for bus_id in gen_buses]

    blocks = {
        "B_LL": matrix[np.ix_(li, li)],
        "B_LG": matrix[np.ix_(li, gi)],
        "B_GG": matrix[np.ix_(gi, gi)],
        "B_GL": matrix[np.ix_(gi, li)],
    }
    for block in blocks.values():
        block.flags.writeable = False

    return SusceptancePartition(
        **blocks,
        load_buses=tuple(load_buses),
        gen_buses=tuple(gen_buses),
        topology_id=grid.topology_id,
        load_index_map={bus_id: k for k, bus_id in enumerate(load_buses)},
        gen_index_map={bus_id: k for k, bus_id in enumerate(gen_buses)},
    )
