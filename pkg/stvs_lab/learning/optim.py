"""
First-order optimizers over a CnnClassifier's trainable tensors.
"""
import logging
from typing import Dict

import numpy as np

from stvs_lab.config import TRAIN_CONFIG

logger = logging.getLogger(__name__)


class SGD:
    def __init__(self, learning_rate: float):
        if not learning_rate > 0:
            raise ValueError("learning rate must be positive")
        self.learning_rate = learning_rate

    def step(self, model) -> None:
        for _, layer, name in model.named_parameters():
            if layer.frozen or name not in layer.grads:
                continue
            layer.params[name] -= (self.learning_rate * layer.grads[name]).astype(layer.params[name].dtype)


class Adam:
    """Adam with bias-corrected first and second moment estimates."""

    def __init__(self, learning_rate: float = TRAIN_CONFIG["learning_rate"], beta1: float = TRAIN_CONFIG["beta1"],
                 beta2: float = TRAIN_CONFIG["beta2"], eps: float = TRAIN_CONFIG["eps"]):
        if not learning_rate > 0:
            raise ValueError("learning rate must be positive")
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}

    def step(self, model) -> None:
        self.t += 1
        correction1 = 1.0 - self.beta1 ** self.t
        correction2 = 1.0 - self.beta2 ** self.t
        for key, layer, name in model.named_parameters():
            if layer.frozen or name not in layer.grads:
                continue
            grad = layer.grads[name]
            if key not in self.m:
                self.m[key] = np.zeros_like(grad)
                self.v[key] = np.zeros_like(grad)
            self.m[key] = self.beta1 * self.m[key] + (1 - self.beta1) * grad
            self.v[key] = self.beta2 * self.v[key] + (1 - self.beta2) * grad * grad
            update = self.learning_rate * (self.m[key] / correction1) / (np.sqrt(self.v[key] / correction2) + self.eps)
            layer.params[name] -= update.astype(layer.params[name].dtype)


def make_optimizer(name: str, learning_rate: float, beta1: float = TRAIN_CONFIG["beta1"],
                   beta2: float = TRAIN_CONFIG["beta2"], eps: float = TRAIN_CONFIG["eps"]):
    if name == "adam":
        return Adam(learning_rate, beta1, beta2, eps)
    if name == "sgd":
        return SGD(learning_rate)
    raise ValueError(f"unknown optimizer '{name}'")
