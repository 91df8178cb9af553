"""
Classification metrics with the unstable class as positive.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List

import numpy as np

from stvs_lab.features.labels import UNSTABLE

logger = logging.getLogger(__name__)

METRIC_NAMES = ("accuracy", "precision", "recall", "f1")


@dataclass
class MetricsReport:
    """
    Confusion counts and derived percentages.

    `folds` holds per-fold reports of a k-fold run. The counts and the metric
    properties are then pooled over all folds, while the headline is the
    mean of the per-fold metrics.
    """
    tp: int
    fp: int
    fn: int
    tn: int
    folds: List["MetricsReport"] = field(default_factory=list)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def accuracy(self) -> float:
        return 100.0 * (self.tp + self.tn) / self.total if self.total else 0.0

    @property
    def precision(self) -> float:
        denom = self.tp + self.fp
        return 100.0 * self.tp / denom if denom else 0.0

    @property
    def recall(self) -> float:
        denom = self.tp + self.fn
        return 100.0 * self.tp / denom if denom else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2.0 * p * r / (p + r) if p + r else 0.0

    @property
    def fold_mean(self) -> Dict[str, float]:
        """Metrics averaged over folds (the k-fold estimate)."""
        if not self.folds:
            return self.summary()
        return {name: float(np.mean([getattr(f, name) for f in self.folds])) for name in METRIC_NAMES}

    @property
    def headline(self) -> Dict[str, float]:
        """Reported metrics: the fold mean of a k-fold run, this report's own otherwise."""
        return self.fold_mean

    def summary(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_NAMES}

    def to_dict(self) -> Dict[str, Any]:
        """Headline metrics and counts; a k-fold run adds its pooled metrics and the folds."""
        data: Dict[str, Any] = dict(self.headline)
        data.update({"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn, "total": self.total})
        if self.folds:
            data["pooled"] = self.summary()
            data["folds"] = [f.to_dict() for f in self.folds]
        return data

    @classmethod
    def pooled(cls, folds: List["MetricsReport"]) -> "MetricsReport":
        return cls(
            tp=sum(f.tp for f in folds),
            fp=sum(f.fp for f in folds),
            fn=sum(f.fn for f in folds),
            tn=sum(f.tn for f in folds),
            folds=list(folds),
        )


def compute_metrics(predictions, labels) -> MetricsReport:
    """
    Confusion counts of binary predictions.

    Args:
        predictions: Predicted labels (0 stable, 1 unstable)
        labels: True labels

    Returns:
        MetricsReport

    Raises:
        ValueError: For empty or misaligned inputs, or labels outside {0, 1}
    """
    predictions = np.asarray(predictions).astype(int).ravel()
    labels = np.asarray(labels).astype(int).ravel()
    if len(labels) == 0:
        raise ValueError("cannot compute metrics of an empty set")
    if len(predictions) != len(labels):
        raise ValueError(f"{len(predictions)} predictions for {len(labels)} labels")
    if not np.all(np.isin(predictions, (0, 1))) or not np.all(np.isin(labels, (0, 1))):
        raise ValueError("labels must be 0 (stable) or 1 (unstable)")
    positive = labels == UNSTABLE
    predicted = predictions == UNSTABLE
    return MetricsReport(
        tp=int(np.sum(predicted & positive)),
        fp=int(np.sum(predicted & ~positive)),
        fn=int(np.sum(~predicted & positive)),
        tn=int(np.sum(~predicted & ~positive)),
    )
