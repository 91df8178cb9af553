"""
File helpers: atomic writes, content hashing and version stamping.
"""
import os
import json
import hashlib
import logging
import subprocess
import tempfile
from contextlib import contextmanager
from typing import Any, Dict, Iterator, IO

import numpy as np

from stvs_lab import __version__

logger = logging.getLogger(__name__)


@contextmanager
def atomic_write(path: str, mode: str = "w") -> Iterator[IO]:
    """
    Write a file through a temporary sibling and rename it into place.

    Interrupted writers leave the previous file (or nothing) behind, never a
    truncated one.

    Args:
        path: Destination path
        mode: "w" for text or "wb" for binary
    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode) as handle:
            yield handle
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def write_json(path: str, data: Dict[str, Any]) -> None:
    """Atomically write a JSON document."""
    with atomic_write(path, "w") as handle:
        json.dump(data, handle, indent=2, sort_keys=True, default=_json_default)


def read_json(path: str) -> Dict[str, Any]:
    """Read a JSON document."""
    with open(path, "r") as handle:
        return json.load(handle)


def _json_default(value: Any) -> Any:
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, tuple):
        return list(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def hash_arrays(*arrays: np.ndarray) -> str:
    """
    SHA-256 over the dtype, shape and bytes of each array.

    Args:
        arrays: Arrays to hash, in order

    Returns:
        Hex digest
    """
    digest = hashlib.sha256()
    for array in arrays:
        array = np.ascontiguousarray(array)
        digest.update(str(array.dtype).encode())
        digest.update(str(array.shape).encode())
        digest.update(array.tobytes())
    return digest.hexdigest()


def version_string() -> str:
    """
    Package version, suffixed with `git describe` output when available.

    Returns:
        Version string such as "0.1.0+g1a2b3c4-dirty"
    """
    try:
        result = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=os.path.dirname(os.path.abspath(__file__)),
            capture_output=True, text=True, timeout=5,
        )
        if result.returncode == 0 and result.stdout.strip():
            return f"{__version__}+g{result.stdout.strip()}"
    except (OSError, subprocess.SubprocessError) as e:
        logger.debug(f"git describe unavailable: {e}")
    return __version__
