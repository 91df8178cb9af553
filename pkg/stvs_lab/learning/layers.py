"""
Neural-network layers on NCHW numpy arrays.

Each layer keeps what its forward pass needs for the backward pass, exposes
its parameters in `params` and the matching gradients in `grads`.
"""
import logging
from typing import Dict, Optional, Tuple

import numpy as np

from stvs_lab.config import TRAIN_CONFIG
from stvs_lab.exceptions import ShapeError

logger = logging.getLogger(__name__)


def conv2d_forward(x: np.ndarray, W: np.ndarray, b: np.ndarray, pad: int = 0) -> np.ndarray:
    """
    Cross-correlation of a batch with a filter bank.

    Args:
        x: Input (N, C, H, W)
        W: Filters (O, C, KH, KW)
        b: Biases (O,)
        pad: Zero padding on both spatial axes

    Returns:
        Output (N, O, H + 2 pad - KH + 1, W + 2 pad - KW + 1); no activation applied
    """
    if x.ndim != 4 or W.ndim != 4 or x.shape[1] != W.shape[1] or b.shape != (W.shape[0],):
        raise ShapeError(f"conv shapes do not match: x {x.shape}, W {W.shape}, b {b.shape}")
    _, _, kh, kw = W.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    ho, wo = xp.shape[2] - kh + 1, xp.shape[3] - kw + 1
    if ho < 1 or wo < 1:
        raise ShapeError(f"input {x.shape[2:]} (pad {pad}) is smaller than kernel {(kh, kw)}")
    out = np.zeros((x.shape[0], ho, wo, W.shape[0]), dtype=np.result_type(x, W))
    for i in range(kh):
        for j in range(kw):
            out += np.tensordot(xp[:, :, i:i + ho, j:j + wo], W[:, :, i, j], axes=([1], [1]))
    return out.transpose(0, 3, 1, 2) + b[None, :, None, None]


def conv2d_backward(dout: np.ndarray, x: np.ndarray, W: np.ndarray,
                    pad: int = 0) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Gradients of conv2d_forward.

    Returns:
        Tuple (dx, dW, db)
    """
    _, _, kh, kw = W.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    ho, wo = dout.shape[2], dout.shape[3]
    dxp = np.zeros_like(xp)
    dW = np.zeros_like(W)
    for i in range(kh):
        for j in range(kw):
            window = xp[:, :, i:i + ho, j:j + wo]
            dW[:, :, i, j] = np.tensordot(dout, window, axes=([0, 2, 3], [0, 2, 3]))
            dxp[:, :, i:i + ho, j:j + wo] += np.tensordot(dout, W[:, :, i, j], axes=([1], [0])).transpose(0, 3, 1, 2)
    db = dout.sum(axis=(0, 2, 3))
    dx = dxp[:, :, pad:pad + x.shape[2], pad:pad + x.shape[3]] if pad else dxp
    return dx, dW, db


class Layer:
    """Base layer: parameter-free identity."""

    kind = "layer"

    def __init__(self):
        self.params: Dict[str, np.ndarray] = {}
        self.grads: Dict[str, np.ndarray] = {}
        self.frozen = False

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        return x

    def backward(self, dout: np.ndarray) -> np.ndarray:
        return dout

    def buffers(self) -> Dict[str, np.ndarray]:
        """Non-trainable state saved with the weights."""
        return {}


class Conv2D(Layer):
    kind = "conv"

    def __init__(self, in_channels: int, out_channels: int, kernel: int = 3, pad: int = 1,
                 rng: Optional[np.random.Generator] = None, dtype=np.float32):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        fan_in = in_channels * kernel * kernel
        bound = np.sqrt(6.0 / fan_in)
        self.pad = pad
        self.params["W"] = rng.uniform(-bound, bound, (out_channels, in_channels, kernel, kernel)).astype(dtype)
        self.params["b"] = np.zeros(out_channels, dtype=dtype)
        self._x = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        self._x = x
        return conv2d_forward(x, self.params["W"], self.params["b"], self.pad)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        dx, dW, db = conv2d_backward(dout, self._x, self.params["W"], self.pad)
        self.grads["W"], self.grads["b"] = dW, db
        return dx


class BatchNorm2D(Layer):
    """
    Per-channel batch normalization.

    Train mode normalizes with batch statistics and updates the running
    averages; eval mode (or a frozen layer) uses the running averages.
    """
    kind = "batchnorm"

    def __init__(self, channels: int, momentum: float = TRAIN_CONFIG["bn_momentum"],
                 eps: float = TRAIN_CONFIG["bn_eps"], dtype=np.float32):
        super().__init__()
        self.momentum = momentum
        self.eps = eps
        self.params["gamma"] = np.ones(channels, dtype=dtype)
        self.params["beta"] = np.zeros(channels, dtype=dtype)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self._cache = None

    def buffers(self) -> Dict[str, np.ndarray]:
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if x.ndim != 4 or x.shape[1] != self.params["gamma"].shape[0]:
            raise ShapeError(f"batch norm expects (N, {self.params['gamma'].shape[0]}, H, W), got {x.shape}")
        gamma = self.params["gamma"][None, :, None, None]
        beta = self.params["beta"][None, :, None, None]
        if train and not self.frozen:
            if x.shape[0] < 2:
                raise ShapeError("batch norm needs at least 2 samples per batch in train mode")
            mean = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            self.running_mean = (self.momentum * self.running_mean + (1 - self.momentum) * mean).astype(self.running_mean.dtype)
            self.running_var = (self.momentum * self.running_var + (1 - self.momentum) * var).astype(self.running_var.dtype)
            inv_std = 1.0 / np.sqrt(var + self.eps)
            x_hat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
            self._cache = ("train", x_hat, inv_std)
        else:
            inv_std = 1.0 / np.sqrt(self.running_var + self.eps)
            x_hat = (x - self.running_mean[None, :, None, None]) * inv_std[None, :, None, None]
            self._cache = ("eval", x_hat, inv_std)
        return (gamma * x_hat + beta).astype(x.dtype, copy=False)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        mode, x_hat, inv_std = self._cache
        gamma = self.params["gamma"]
        self.grads["gamma"] = np.sum(dout * x_hat, axis=(0, 2, 3))
        self.grads["beta"] = np.sum(dout, axis=(0, 2, 3))
        dx_hat = dout * gamma[None, :, None, None]
        if mode == "eval":
            return dx_hat * inv_std[None, :, None, None]
        count = dout.shape[0] * dout.shape[2] * dout.shape[3]
        sum_dx_hat = dx_hat.sum(axis=(0, 2, 3))[None, :, None, None]
        sum_dx_hat_x = (dx_hat * x_hat).sum(axis=(0, 2, 3))[None, :, None, None]
        return inv_std[None, :, None, None] / count * (count * dx_hat - sum_dx_hat - x_hat * sum_dx_hat_x)


def batchnorm_forward(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, mode: str = "train",
                      running_mean: Optional[np.ndarray] = None, running_var: Optional[np.ndarray] = None,
                      momentum: float = TRAIN_CONFIG["bn_momentum"], eps: float = TRAIN_CONFIG["bn_eps"]) -> np.ndarray:
    """
    Functional batch normalization over (N, C, H, W).

    In train mode the given running statistics are updated in place.

    Args:
        x: Input batch
        gamma: Per-channel scale
        beta: Per-channel shift
        mode: "train" or "eval"
        running_mean: Running means (zeros when omitted)
        running_var: Running variances (ones when omitted)
        momentum: Running-average momentum
        eps: Variance floor

    Returns:
        Normalized batch
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got '{mode}'")
    layer = BatchNorm2D(len(gamma), momentum, eps, dtype=x.dtype)
    layer.params["gamma"] = np.asarray(gamma, dtype=x.dtype)
    layer.params["beta"] = np.asarray(beta, dtype=x.dtype)
    if running_mean is not None:
        layer.running_mean = np.array(running_mean, dtype=x.dtype)
    if running_var is not None:
        layer.running_var = np.array(running_var, dtype=x.dtype)
    out = layer.forward(x, train=mode == "train")
    if mode == "train":
        if running_mean is not None:
            running_mean[...] = layer.running_mean
        if running_var is not None:
            running_var[...] = layer.running_var
    return out


class ReLU(Layer):
    kind = "relu"

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        self._mask = x > 0
        return x * self._mask

    def backward(self, dout: np.ndarray) -> np.ndarray:
        return dout * self._mask


class MaxPoolTime(Layer):
    """Max-pool pairs of adjacent time steps (last axis); an odd trailing step is dropped."""
    kind = "maxpool"

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        n, c, h, w = x.shape
        wo = w // 2
        if wo < 1:
            raise ShapeError(f"cannot pool a time axis of length {w}")
        pairs = x[..., :2 * wo].reshape(n, c, h, wo, 2)
        self._argmax = pairs.argmax(axis=-1)
        self._shape = x.shape
        return pairs.max(axis=-1)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        n, c, h, w = self._shape
        wo = w // 2
        pairs = np.zeros((n, c, h, wo, 2), dtype=dout.dtype)
        np.put_along_axis(pairs, self._argmax[..., None], dout[..., None], axis=-1)
        dx = np.zeros(self._shape, dtype=dout.dtype)
        dx[..., :2 * wo] = pairs.reshape(n, c, h, 2 * wo)
        return dx


class Flatten(Layer):
    kind = "flatten"

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        return dout.reshape(self._shape)


class Dense(Layer):
    kind = "dense"

    def __init__(self, in_features: int, out_features: int, rng: Optional[np.random.Generator] = None,
                 zero_init: bool = False, dtype=np.float32):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        if zero_init:
            self.params["W"] = np.zeros((in_features, out_features), dtype=dtype)
        else:
            bound = 1.0 / np.sqrt(in_features)
            self.params["W"] = rng.uniform(-bound, bound, (in_features, out_features)).astype(dtype)
        self.params["b"] = np.zeros(out_features, dtype=dtype)

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.params["W"].shape[0]:
            raise ShapeError(f"dense layer expects (N, {self.params['W'].shape[0]}), got {x.shape}")
        self._x = x
        return x @ self.params["W"] + self.params["b"]

    def backward(self, dout: np.ndarray) -> np.ndarray:
        self.grads["W"] = self._x.T @ dout
        self.grads["b"] = dout.sum(axis=0)
        return dout @ self.params["W"].T


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean negative log-likelihood of integer labels."""
    picked = probs[np.arange(len(labels)), labels]
    return float(-np.mean(np.log(np.maximum(picked, np.finfo(probs.dtype).tiny))))


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Mean softmax cross-entropy and its gradient with respect to the logits.

    The gradient is (probabilities - one_hot) / batch size.
    """
    probs = softmax(logits)
    one_hot = np.zeros_like(probs)
    one_hot[np.arange(len(labels)), labels] = 1
    return cross_entropy(probs, labels), (probs - one_hot) / len(labels)
