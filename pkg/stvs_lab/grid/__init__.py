"""
Grid model: buses, branches, composite loads and susceptance partitions.
"""
from stvs_lab.grid.models import (
    Bus, Branch, Generator, Load, MotorParams, GridModel, SusceptancePartition
)
from stvs_lab.grid.loader import (
    load_grid, parse_grid_text, grid_from_dict, validate_grid, count_components,
    disconnect_lines, susceptance_matrix, susceptance_partition
)
from stvs_lab.grid.cases import BUILTIN_GRIDS

__all__ = [
    'Bus',
    'Branch',
    'Generator',
    'Load',
    'MotorParams',
    'GridModel',
    'SusceptancePartition',
    'load_grid',
    'parse_grid_text',
    'grid_from_dict',
    'validate_grid',
    'count_components',
    'disconnect_lines',
    'susceptance_matrix',
    'susceptance_partition',
    'BUILTIN_GRIDS'
]
