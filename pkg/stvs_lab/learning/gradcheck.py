"""
Finite-difference gradient checks for layers and whole models.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Union

import numpy as np

from stvs_lab.learning.layers import Layer, softmax_cross_entropy
from stvs_lab.learning.model import CnnClassifier

logger = logging.getLogger(__name__)

_NORM_FLOOR = 1e-6


@dataclass
class GradCheckReport:
    errors: Dict[str, float] = field(default_factory=dict)
    tolerance: float = 1e-4

    @property
    def max_error(self) -> float:
        return max(self.errors.values()) if self.errors else 0.0

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tolerance


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = _NORM_FLOOR) -> float:
    """
    ||a - n|| / max(||a|| + ||n||, floor).

    The floor keeps gradients that are zero up to rounding (conv biases ahead
    of batch normalization) from reading as a full mismatch.
    """
    denom = max(np.linalg.norm(analytic) + np.linalg.norm(numeric), floor)
    return float(np.linalg.norm(analytic - numeric) / denom)


def _numeric_gradient(loss: Callable[[], float], array: np.ndarray, h: float) -> np.ndarray:
    grad = np.zeros_like(array, dtype=np.float64)
    flat = array.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + h
        plus = loss()
        flat[i] = original - h
        minus = loss()
        flat[i] = original
        out[i] = (plus - minus) / (2 * h)
    return grad


def gradient_check(target: Union[Layer, CnnClassifier], x: np.ndarray, tolerance: float = 1e-4,
                   h: float = 1e-5, labels: Optional[np.ndarray] = None, seed: int = 0) -> GradCheckReport:
    """
    Compare analytic gradients with central differences.

    A layer is checked through the scalar sum(out * R) with a fixed random R;
    a model through the mean softmax cross-entropy of `labels`. Both run in
    train mode. Use float64 parameters and inputs.

    Args:
        target: Layer or classifier
        x: Input batch
        tolerance: Pass threshold on the largest per-tensor relative error
        h: Finite-difference step
        labels: Class labels for a model check (random when omitted)
        seed: Seed for R and random labels

    Returns:
        GradCheckReport with one relative error per parameter tensor and the input
    """
    rng = np.random.default_rng(seed)
    x = np.array(x, dtype=np.float64)

    if isinstance(target, CnnClassifier):
        model = target.train()
        if labels is None:
            labels = rng.integers(0, model.arch.n_classes, len(x))

        def loss() -> float:
            return softmax_cross_entropy(model.forward(x), labels)[0]

        _, dlogits = softmax_cross_entropy(model.forward(x), labels)
        dx = model.backward(dlogits)[:, 0]
        tensors = {key: (layer.params[name], layer.grads[name]) for key, layer, name in model.named_parameters()}
    else:
        layer = target
        direction = rng.standard_normal(layer.forward(x, train=True).shape)

        def loss() -> float:
            return float(np.sum(layer.forward(x, train=True) * direction))

        layer.forward(x, train=True)
        dx = layer.backward(direction)
        tensors = {name: (layer.params[name], layer.grads[name]) for name in layer.params}

    report = GradCheckReport(tolerance=tolerance)
    for key, (param, grad) in tensors.items():
        analytic = np.array(grad, dtype=np.float64)
        report.errors[key] = relative_error(analytic, _numeric_gradient(loss, param, h))
    report.errors["input"] = relative_error(np.array(dx, dtype=np.float64), _numeric_gradient(loss, x, h))
    logger.debug(f"Gradient check: max relative error {report.max_error:.2e}")
    return report
