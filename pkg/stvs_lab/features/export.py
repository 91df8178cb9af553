"""
Heatmap export of feature windows: binary PGM plus CSV.
"""
import logging
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from stvs_lab.utils.io import atomic_write

logger = logging.getLogger(__name__)


def to_grayscale(matrix: np.ndarray) -> np.ndarray:
    """Min-max scale to 8-bit; a constant matrix maps to zeros."""
    matrix = np.asarray(matrix, dtype=float)
    low, high = float(np.min(matrix)), float(np.max(matrix))
    if high - low <= 0:
        return np.zeros(matrix.shape, dtype=np.uint8)
    return np.round(255.0 * (matrix - low) / (high - low)).astype(np.uint8)


def write_pgm(matrix: np.ndarray, path: str) -> None:
    """Write a binary (P5) portable graymap, one pixel per entry."""
    pixels = to_grayscale(matrix)
    rows, cols = pixels.shape
    with atomic_write(path, "wb") as handle:
        handle.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        handle.write(pixels.tobytes())


def read_pgm(path: str) -> np.ndarray:
    """Read a P5 graymap written by write_pgm."""
    with open(path, "rb") as handle:
        raw = handle.read()
    header = raw.split(b"\n", 3)
    if header[0] != b"P5" or len(header) < 4:
        raise ValueError(f"{path}: not a binary PGM")
    cols, rows = (int(v) for v in header[1].split())
    return np.frombuffer(header[3], dtype=np.uint8, count=rows * cols).reshape(rows, cols)


def write_heatmap(matrix: np.ndarray, pgm_path: str, csv_path: Optional[str] = None,
                  row_labels: Optional[Sequence[int]] = None, dt: Optional[float] = None) -> None:
    """
    Export a feature window as PGM image and CSV table.

    Args:
        matrix: m x n window
        pgm_path: Image path
        csv_path: CSV path (defaults to the image path with .csv)
        row_labels: Load bus ids for the CSV index
        dt: Step size, used to label the CSV columns in seconds
    """
    write_pgm(matrix, pgm_path)
    if csv_path is None:
        csv_path = pgm_path.rsplit(".", 1)[0] + ".csv"
    columns = [f"{k * dt:.3f}" for k in range(matrix.shape[1])] if dt else None
    frame = pd.DataFrame(matrix, index=list(row_labels) if row_labels is not None else None, columns=columns)
    frame.index.name = "bus"
    with atomic_write(csv_path, "w") as handle:
        frame.to_csv(handle)
    logger.info(f"Wrote {matrix.shape[0]}x{matrix.shape[1]} heatmap to {pgm_path} and {csv_path}")
