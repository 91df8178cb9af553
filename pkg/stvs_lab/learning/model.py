"""
CNN stability classifier.

Four blocks of convolution, batch normalization and ReLU, max-pooling along
time after the configured blocks, then a dense layer and a two-way softmax.
"""
import copy
import logging
from dataclasses import dataclass, asdict
from typing import Dict, Iterator, List, Tuple

import numpy as np

from stvs_lab.config import TRAIN_CONFIG
from stvs_lab.exceptions import ShapeError
from stvs_lab.learning.layers import (
    Layer, Conv2D, BatchNorm2D, ReLU, MaxPoolTime, Flatten, Dense, softmax
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Architecture:
    """Architecture descriptor; fully determines the layer stack."""
    input_shape: Tuple[int, int]
    channels: Tuple[int, ...] = TRAIN_CONFIG["channels"]
    kernel: int = TRAIN_CONFIG["kernel"]
    pool_after: Tuple[int, ...] = TRAIN_CONFIG["pool_after"]
    n_classes: int = 2
    dtype: str = "float32"
    zero_head: bool = False
    seed: int = 0

    @property
    def flat_features(self) -> int:
        rows, steps = self.input_shape
        for block in range(len(self.channels)):
            if block in self.pool_after:
                steps //= 2
        return self.channels[-1] * rows * steps

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["input_shape"] = list(self.input_shape)
        data["channels"] = list(self.channels)
        data["pool_after"] = list(self.pool_after)
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> "Architecture":
        data = dict(data)
        data["input_shape"] = tuple(data["input_shape"])
        data["channels"] = tuple(data["channels"])
        data["pool_after"] = tuple(data["pool_after"])
        return cls(**data)


class CnnClassifier:
    """
    Layer stack with train/eval modes.

    Args:
        arch: Architecture descriptor (input rows x window steps)
    """

    def __init__(self, arch: Architecture):
        rows, steps = arch.input_shape
        if rows < 1 or steps < 1:
            raise ShapeError(f"invalid input shape {arch.input_shape}")
        pooled = steps
        for block in range(len(arch.channels)):
            if block in arch.pool_after:
                pooled //= 2
                if pooled < 1:
                    raise ShapeError(f"window of {steps} steps is too short for {len(arch.pool_after)} pooling stages")

        self.arch = arch
        self.mode = "eval"
        dtype = np.dtype(arch.dtype)
        rng = np.random.default_rng(arch.seed)
        layers: List[Layer] = []
        in_channels = 1
        for block, out_channels in enumerate(arch.channels):
            layers.append(Conv2D(in_channels, out_channels, arch.kernel, arch.kernel // 2, rng, dtype))
            layers.append(BatchNorm2D(out_channels, dtype=dtype))
            layers.append(ReLU())
            if block in arch.pool_after:
                layers.append(MaxPoolTime())
            in_channels = out_channels
        layers.append(Flatten())
        layers.append(Dense(arch.flat_features, arch.n_classes, rng, arch.zero_head, dtype))
        self.layers = layers

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(self.arch.dtype)

    def train(self) -> "CnnClassifier":
        self.mode = "train"
        return self

    def eval(self) -> "CnnClassifier":
        self.mode = "eval"
        return self

    def layer_counts(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for layer in self.layers:
            counts[layer.kind] = counts.get(layer.kind, 0) + 1
        return counts

    def _prepare(self, windows: np.ndarray) -> np.ndarray:
        windows = np.asarray(windows)
        if windows.ndim == 2:
            windows = windows[None]
        if windows.ndim == 3:
            windows = windows[:, None]
        if windows.ndim != 4 or windows.shape[1] != 1 or tuple(windows.shape[2:]) != tuple(self.arch.input_shape):
            raise ShapeError(f"expected windows of shape {self.arch.input_shape}, got {windows.shape}")
        return windows.astype(self.dtype, copy=False)

    def forward(self, windows: np.ndarray) -> np.ndarray:
        """Logits for a batch (N, m, n) in the current mode."""
        out = self._prepare(windows)
        train = self.mode == "train"
        for layer in self.layers:
            out = layer.forward(out, train)
        return out

    def backward(self, dlogits: np.ndarray) -> np.ndarray:
        grad = dlogits
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def predict_proba(self, windows: np.ndarray, batch_size: int = 256) -> np.ndarray:
        """Class probabilities in eval mode; the model's mode is restored afterwards."""
        previous = self.mode
        self.eval()
        try:
            windows = np.asarray(windows)
            single = windows.ndim == 2
            if single:
                windows = windows[None]
            chunks = [softmax(self.forward(windows[i:i + batch_size]).astype(np.float64))
                      for i in range(0, len(windows), batch_size)]
            probs = np.concatenate(chunks) if chunks else np.zeros((0, self.arch.n_classes))
            return probs[0] if single else probs
        finally:
            self.mode = previous

    def predict(self, windows: np.ndarray, batch_size: int = 256) -> np.ndarray:
        return np.argmax(self.predict_proba(windows, batch_size), axis=-1)

    def named_parameters(self) -> Iterator[Tuple[str, Layer, str]]:
        """(key, layer, parameter name) for every trainable tensor in layer order."""
        for index, layer in enumerate(self.layers):
            for name in layer.params:
                yield f"{index}.{layer.kind}.{name}", layer, name

    def state_dict(self) -> Dict[str, np.ndarray]:
        """Parameters and batch-norm buffers in layer order."""
        state: Dict[str, np.ndarray] = {}
        for index, layer in enumerate(self.layers):
            for name, value in layer.params.items():
                state[f"{index}.{layer.kind}.{name}"] = value
            for name, value in layer.buffers().items():
                state[f"{index}.{layer.kind}.{name}"] = value
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        expected = self.state_dict()
        missing = sorted(set(expected) - set(state))
        if missing:
            raise ShapeError(f"state is missing tensors {missing}")
        for key, value in state.items():
            if key not in expected:
                raise ShapeError(f"unexpected tensor {key}")
            if tuple(expected[key].shape) != tuple(np.shape(value)):
                raise ShapeError(f"tensor {key}: expected {expected[key].shape}, got {np.shape(value)}")
            index, _, name = key.split(".", 2)
            layer = self.layers[int(index)]
            array = np.array(value, dtype=self.dtype)
            if name in layer.params:
                layer.params[name] = array
            else:
                setattr(layer, name, array)

    def copy(self) -> "CnnClassifier":
        return copy.deepcopy(self)

    def freeze_features(self, frozen: bool = True) -> None:
        """Freeze (or unfreeze) every layer before the dense head."""
        for layer in self.layers[:-1]:
            layer.frozen = frozen


def forward(model: CnnClassifier, window) -> np.ndarray:
    """
    Class probabilities (stable, unstable) for one feature window.

    Args:
        model: Classifier
        window: FeatureWindow or m x n array

    Returns:
        2-vector summing to 1
    """
    matrix = getattr(window, "matrix", window)
    return model.predict_proba(np.asarray(matrix))
