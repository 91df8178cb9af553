"""
Utility functions for STVS Lab.
"""

from stvs_lab.utils.converters import (
    normalize_line,
    parse_line_pair,
    parse_line_list,
    format_line,
    seconds_to_steps
)
from stvs_lab.utils.io import atomic_write, write_json, read_json, hash_arrays, version_string

__all__ = [
    'normalize_line',
    'parse_line_pair',
    'parse_line_list',
    'format_line',
    'seconds_to_steps',
    'atomic_write',
    'write_json',
    'read_json',
    'hash_arrays',
    'version_string'
]
