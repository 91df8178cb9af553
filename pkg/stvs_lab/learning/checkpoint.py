"""
Checkpoint files: JSON header plus a little-endian float32 weight blob.

Layout: magic b"STVSCKPT", uint32 header length, UTF-8 JSON header, then for
every tensor in layer order: uint32 ndim, ndim x uint32 dims, float32 data.
"""
import json
import struct
import logging
from typing import Any, Dict, Optional, Tuple

import numpy as np

from stvs_lab.exceptions import CheckpointError, ShapeError
from stvs_lab.learning.model import Architecture, CnnClassifier
from stvs_lab.utils.io import atomic_write, version_string

logger = logging.getLogger(__name__)

MAGIC = b"STVSCKPT"
CHECKPOINT_VERSION = 1


def save_checkpoint(model: CnnClassifier, path: str, train_config: Optional[Dict[str, Any]] = None,
                    dataset_hash: Optional[str] = None, metrics: Optional[Dict[str, Any]] = None,
                    extra: Optional[Dict[str, Any]] = None) -> None:
    """
    Write a model checkpoint.

    Args:
        model: Classifier to save
        path: Destination file
        train_config: Training configuration used
        dataset_hash: Content hash of the training dataset
        metrics: Metric summary
        extra: Additional header fields
    """
    state = model.state_dict()
    header = {
        "version": CHECKPOINT_VERSION,
        "architecture": model.arch.to_dict(),
        "tensors": list(state),
        "train_config": train_config or {},
        "dataset_hash": dataset_hash,
        "metrics": metrics or {},
        "software": version_string(),
    }
    if extra:
        header.update(extra)
    header_bytes = json.dumps(header, sort_keys=True, default=float).encode("utf-8")

    with atomic_write(path, "wb") as handle:
        handle.write(MAGIC)
        handle.write(struct.pack("<I", len(header_bytes)))
        handle.write(header_bytes)
        for value in state.values():
            handle.write(struct.pack("<I", value.ndim))
            handle.write(struct.pack(f"<{value.ndim}I", *value.shape))
            handle.write(np.ascontiguousarray(value, dtype="<f4").tobytes())
    logger.info(f"Saved checkpoint with {len(state)} tensors to {path}")


def load_checkpoint(path: str) -> Tuple[CnnClassifier, Dict[str, Any]]:
    """
    Read a checkpoint.

    Returns:
        Tuple of (model in eval mode, header)

    Raises:
        CheckpointError: If the file is malformed or of another version
    """
    with open(path, "rb") as handle:
        raw = handle.read()
    if raw[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    try:
        offset = len(MAGIC)
        (header_len,) = struct.unpack_from("<I", raw, offset)
        offset += 4
        header = json.loads(raw[offset:offset + header_len].decode("utf-8"))
        offset += header_len
        if header.get("version") != CHECKPOINT_VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {header.get('version')}")

        state = {}
        for key in header["tensors"]:
            (ndim,) = struct.unpack_from("<I", raw, offset)
            offset += 4
            shape = struct.unpack_from(f"<{ndim}I", raw, offset)
            offset += 4 * ndim
            count = int(np.prod(shape)) if ndim else 1
            state[key] = np.frombuffer(raw, dtype="<f4", count=count, offset=offset).reshape(shape)
            offset += 4 * count
        if offset != len(raw):
            raise CheckpointError(f"{path}: {len(raw) - offset} trailing bytes")

        model = CnnClassifier(Architecture.from_dict(header["architecture"]))
        model.load_state_dict(state)
    except (struct.error, ValueError, KeyError, ShapeError) as e:
        if isinstance(e, CheckpointError):
            raise
        raise CheckpointError(f"{path}: malformed checkpoint ({e})") from e
    model.eval()
    return model, header
