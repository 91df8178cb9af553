"""
Mini-batch training, evaluation and fine-tuning loops.
"""
import logging
from dataclasses import dataclass, field, asdict, replace
from typing import Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from stvs_lab.config import TRAIN_CONFIG
from stvs_lab.exceptions import TrainingError
from stvs_lab.learning.layers import softmax_cross_entropy
from stvs_lab.learning.model import CnnClassifier
from stvs_lab.learning.optim import make_optimizer

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = TRAIN_CONFIG["learning_rate"]
    batch_size: int = TRAIN_CONFIG["batch_size"]
    epochs: int = TRAIN_CONFIG["epochs"]
    seed: int = 0
    beta1: float = TRAIN_CONFIG["beta1"]
    beta2: float = TRAIN_CONFIG["beta2"]
    eps: float = TRAIN_CONFIG["eps"]
    patience: int = TRAIN_CONFIG["patience"]
    optimizer: str = "adam"
    fine_tune: bool = False
    finetune_lr_scale: float = TRAIN_CONFIG["finetune_lr_scale"]
    finetune_epochs: int = TRAIN_CONFIG["finetune_epochs"]
    freeze_conv: bool = False
    progress: bool = False

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch size must be at least 1, got {self.batch_size}")
        if self.epochs < 0 or self.finetune_epochs < 0:
            raise ValueError("epoch budgets must be non-negative")

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class TrainingLog:
    epochs: List[Dict[str, float]] = field(default_factory=list)
    best_epoch: Optional[int] = None
    stopped_early: bool = False

    @property
    def losses(self) -> List[float]:
        return [entry["loss"] for entry in self.epochs]

    def to_dict(self) -> Dict:
        return {"epochs": self.epochs, "best_epoch": self.best_epoch, "stopped_early": self.stopped_early}


def batch_indices(count: int, batch_size: int, rng: np.random.Generator) -> List[np.ndarray]:
    """
    Shuffled mini-batches; a trailing single-sample batch joins the one before it.
    """
    order = rng.permutation(count)
    batches = [order[i:i + batch_size] for i in range(0, count, batch_size)]
    if len(batches) > 1 and len(batches[-1]) == 1:
        batches[-2] = np.concatenate([batches[-2], batches[-1]])
        batches.pop()
    return batches


def accuracy(model: CnnClassifier, X: np.ndarray, y: np.ndarray) -> float:
    if len(y) == 0:
        return 0.0
    return float(np.mean(model.predict(X) == y))


def _check_dataset(X: np.ndarray, y: np.ndarray) -> None:
    if len(X) == 0 or len(X) != len(y):
        raise TrainingError(f"dataset is empty or misaligned ({len(X)} windows, {len(y)} labels)")
    if len(np.unique(y)) < 2:
        raise TrainingError("dataset must contain both classes")


def train(model: CnnClassifier, X: np.ndarray, y: np.ndarray, cfg: TrainConfig,
          X_val: Optional[np.ndarray] = None, y_val: Optional[np.ndarray] = None,
          epochs: Optional[int] = None) -> Tuple[CnnClassifier, TrainingLog]:
    """
    Minimize softmax cross-entropy by seeded mini-batch updates.

    The model is trained in place. With validation data, training stops after
    `patience` epochs without a better validation accuracy and the best
    weights are restored.

    Args:
        model: Classifier to train
        X: Windows (N, m, n)
        y: Integer labels (N,)
        cfg: Training configuration
        X_val: Optional validation windows
        y_val: Optional validation labels
        epochs: Epoch budget override

    Returns:
        Tuple of (model, training log)

    Raises:
        TrainingError: For a single-class dataset or a non-finite loss
    """
    X = np.asarray(X)
    y = np.asarray(y, dtype=int)
    _check_dataset(X, y)
    budget = cfg.epochs if epochs is None else epochs
    rng = np.random.default_rng(cfg.seed)
    optimizer = make_optimizer(cfg.optimizer, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
    log = TrainingLog()
    has_val = X_val is not None and y_val is not None and len(y_val) > 0
    best_acc = -1.0
    best_state = None
    stale = 0

    epoch_iter = range(1, budget + 1)
    if cfg.progress:
        epoch_iter = tqdm(epoch_iter, desc="Training", unit="epoch")
    for epoch in epoch_iter:
        model.train()
        total, seen = 0.0, 0
        for batch in batch_indices(len(y), cfg.batch_size, rng):
            logits = model.forward(X[batch])
            loss, dlogits = softmax_cross_entropy(logits, y[batch])
            if not np.isfinite(loss):
                raise TrainingError("loss is not finite", epoch=epoch)
            model.backward(dlogits)
            optimizer.step(model)
            total += loss * len(batch)
            seen += len(batch)
        model.eval()

        entry = {"epoch": epoch, "loss": total / seen}
        if has_val:
            entry["val_accuracy"] = accuracy(model, X_val, y_val)
        log.epochs.append(entry)
        logger.debug(f"Epoch {epoch}: loss {entry['loss']:.4f}"
                     + (f", val acc {entry['val_accuracy']:.4f}" if has_val else ""))

        if has_val:
            if entry["val_accuracy"] > best_acc:
                best_acc = entry["val_accuracy"]
                best_state = {k: v.copy() for k, v in model.state_dict().items()}
                log.best_epoch = epoch
                stale = 0
            else:
                stale += 1
                if stale >= cfg.patience:
                    log.stopped_early = True
                    logger.info(f"Early stop at epoch {epoch}; best epoch {log.best_epoch} (val acc {best_acc:.4f})")
                    break

    if best_state is not None:
        model.load_state_dict(best_state)
    model.eval()
    if log.epochs:
        logger.info(f"Trained {len(log.epochs)} epochs, final loss {log.epochs[-1]['loss']:.4f}")
    return model, log


def fine_tune(model: CnnClassifier, X: np.ndarray, y: np.ndarray, cfg: TrainConfig,
              X_val: Optional[np.ndarray] = None, y_val: Optional[np.ndarray] = None) -> CnnClassifier:
    """
    Continue training a copy at a reduced learning rate for a short budget.

    With no target samples the copy is returned untouched. cfg.freeze_conv
    restricts the updates to the dense head.

    Args:
        model: Pre-trained classifier (left unmodified)
        X: Target windows
        y: Target labels
        cfg: Base training configuration

    Returns:
        Fine-tuned copy
    """
    tuned = model.copy()
    if len(X) == 0:
        return tuned
    tune_cfg = replace(cfg, learning_rate=cfg.learning_rate * cfg.finetune_lr_scale, fine_tune=True)
    if cfg.freeze_conv:
        tuned.freeze_features(True)
    try:
        train(tuned, X, y, tune_cfg, X_val, y_val, epochs=cfg.finetune_epochs)
    finally:
        tuned.freeze_features(False)
    logger.info(f"Fine-tuned on {len(y)} samples (lr {tune_cfg.learning_rate:g}, "
                f"{'head only' if cfg.freeze_conv else 'all layers'})")
    return tuned
