"""
Evaluation workflows: k-fold cross-validation, dataset-size and window-length
ablations and PMU-noise robustness.

Training is injected as a `fit_predict(X_train, y_train, X_test, run)`
callable so the workflows can be driven by the CNN or by any stub.
"""
import logging
from dataclasses import dataclass, replace
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

from stvs_lab.experiments.dataset import LabeledDataset, stratified_split
from stvs_lab.experiments.metrics import MetricsReport, compute_metrics
from stvs_lab.features.builder import FeatureContext
from stvs_lab.learning.model import Architecture, CnnClassifier
from stvs_lab.learning.training import TrainConfig, TrainingLog, train
from stvs_lab.utils.converters import seconds_to_steps

logger = logging.getLogger(__name__)

FitPredict = Callable[[np.ndarray, np.ndarray, np.ndarray, int], np.ndarray]


def train_classifier(X: np.ndarray, y: np.ndarray, cfg: TrainConfig, seed: Optional[int] = None,
                     val_fraction: float = 0.1, **arch_options) -> Tuple[CnnClassifier, TrainingLog]:
    """
    Build a CNN for the window shape of X and train it.

    A stratified val_fraction of X is held out for early stopping when both
    classes can spare samples.

    Args:
        X: Windows (N, m, n)
        y: Labels
        cfg: Training configuration
        seed: Initialization and shuffling seed (default cfg.seed)
        val_fraction: Share held out for validation
        arch_options: Architecture overrides (channels, kernel, pool_after, dtype)

    Returns:
        Tuple of (trained model, training log)
    """
    seed = cfg.seed if seed is None else seed
    y = np.asarray(y, dtype=int)
    model = CnnClassifier(Architecture(input_shape=tuple(X.shape[1:]), seed=seed, **arch_options))
    X_val = y_val = None
    train_pos = np.arange(len(y))
    if val_fraction > 0 and np.min(np.bincount(y, minlength=2)) >= 2:
        train_pos, val_pos = stratified_split(y, (1.0 - val_fraction, val_fraction), seed)
        if len(val_pos):
            X_val, y_val = X[val_pos], y[val_pos]
    return train(model, X[train_pos], y[train_pos], replace(cfg, seed=seed), X_val, y_val)


def cnn_fit_predict(cfg: TrainConfig, val_fraction: float = 0.1, **arch_options) -> FitPredict:
    """fit_predict backed by a fresh CNN per run, seeded with cfg.seed + run."""

    def fit_predict(X_train: np.ndarray, y_train: np.ndarray, X_test: np.ndarray, run: int) -> np.ndarray:
        model, _ = train_classifier(X_train, y_train, cfg, cfg.seed + run, val_fraction, **arch_options)
        return model.predict(X_test)

    return fit_predict


def kfold_splits(labels: np.ndarray, k: int, seed: int) -> List[np.ndarray]:
    """
    Stratified k-fold test sets.

    Positions are shuffled within each class, grouped by class and dealt to
    the folds in turn, so the folds partition the data and each fold's class
    ratio follows the global one.
    """
    labels = np.asarray(labels)
    if k < 2 or k > len(labels):
        raise ValueError(f"k must be between 2 and the dataset size {len(labels)}, got {k}")
    rng = np.random.default_rng(seed)
    order = np.concatenate([rng.permutation(np.flatnonzero(labels == cls)) for cls in np.unique(labels)])
    return [np.sort(order[fold::k]) for fold in range(k)]


def kfold_evaluate(X: np.ndarray, y: np.ndarray, k: int, fit_predict: FitPredict, seed: int = 0,
                   progress: bool = False) -> MetricsReport:
    """
    Train and test k times on stratified folds.

    Returns:
        MetricsReport with pooled counts and per-fold reports; its headline is the fold mean
    """
    y = np.asarray(y, dtype=int)
    folds = kfold_splits(y, k, seed)
    reports = []
    for fold, test in enumerate(tqdm(folds, desc="Folds", unit="fold", disable=not progress)):
        mask = np.ones(len(y), dtype=bool)
        mask[test] = False
        predictions = fit_predict(X[mask], y[mask], X[test], fold)
        report = compute_metrics(predictions, y[test])
        logger.info(f"Fold {fold + 1}/{k}: accuracy {report.accuracy:.2f}%")
        reports.append(report)
    pooled = MetricsReport.pooled(reports)
    logger.info(f"{k}-fold mean accuracy {pooled.fold_mean['accuracy']:.2f}%")
    return pooled


def nested_subsets(pool: np.ndarray, sizes: Sequence[int], seed: int) -> List[np.ndarray]:
    """Prefixes of one seeded permutation of pool, so smaller subsets nest in larger ones."""
    if not sizes:
        raise ValueError("no sizes given")
    for size in sizes:
        if size < 1:
            raise ValueError(f"training-set size must be positive, got {size}")
        if size > len(pool):
            raise ValueError(f"training-set size {size} exceeds the {len(pool)} available samples")
    order = np.random.default_rng(seed).permutation(np.asarray(pool))
    return [order[:size] for size in sizes]


def run_size_ablation(X: np.ndarray, y: np.ndarray, sizes: Sequence[int], fit_predict: FitPredict,
                      seed: int = 0, test_fraction: float = 0.2) -> List[Dict[str, Any]]:
    """
    Accuracy against training-set size on a fixed held-out test set.

    Returns:
        One row per size
    """
    y = np.asarray(y, dtype=int)
    pool, test = stratified_split(y, (1.0 - test_fraction, test_fraction), seed)
    rows = []
    for run, subset in enumerate(nested_subsets(pool, sizes, seed)):
        report = compute_metrics(fit_predict(X[subset], y[subset], X[test], run), y[test])
        logger.info(f"Size {len(subset)}: accuracy {report.accuracy:.2f}%")
        rows.append({"size": len(subset), "n_test": len(test), **report.summary()})
    return rows


def run_window_ablation(dataset: LabeledDataset, ctx: FeatureContext, lengths: Sequence[float],
                        fit_predict: FitPredict, seed: int = 0, test_fraction: float = 0.2) -> List[Dict[str, Any]]:
    """
    Accuracy against window length; every length re-windows the same stored trajectories.

    Returns:
        One row per window length
    """
    if not lengths:
        raise ValueError("no window lengths given")
    train_pos, test_pos = stratified_split(dataset.labels, (1.0 - test_fraction, test_fraction), seed)
    trajectory_hash = dataset.content_hash
    rows = []
    for run, length in enumerate(lengths):
        X = dataset.features(ctx, T_w=length)
        y = dataset.labels
        report = compute_metrics(fit_predict(X[train_pos], y[train_pos], X[test_pos], run), y[test_pos])
        logger.info(f"Window {length:.2f} s: accuracy {report.accuracy:.2f}%")
        rows.append({"window": float(length), "steps": seconds_to_steps(length, dataset.dt),
                     "trajectory_hash": trajectory_hash, **report.summary()})
    return rows


@dataclass
class NoiseReport:
    clean: MetricsReport
    noisy: MetricsReport
    sigma_mag: float
    sigma_ang_deg: float
    seed: int

    @property
    def accuracy_drop(self) -> float:
        return self.clean.accuracy - self.noisy.accuracy

    def to_dict(self) -> Dict[str, Any]:
        return {
            "clean": self.clean.to_dict(),
            "noisy": self.noisy.to_dict(),
            "sigma_mag": self.sigma_mag,
            "sigma_ang_deg": self.sigma_ang_deg,
            "seed": self.seed,
            "accuracy_drop": self.accuracy_drop,
        }


def run_noise_robustness(model: Union[CnnClassifier, Callable[[np.ndarray], np.ndarray]], dataset: LabeledDataset,
                         ctx: FeatureContext, sigma_mag: float, sigma_ang_deg: float, seed: int,
                         T_w: Optional[float] = None) -> NoiseReport:
    """
    Evaluate a clean-trained model on clean and on noise-injected features.

    Args:
        model: Trained classifier or a predict callable
        dataset: Test samples
        ctx: Feature context of the dataset's topology
        sigma_mag: Magnitude noise in p.u.
        sigma_ang_deg: Angle noise in degrees
        seed: Noise seed
        T_w: Window length (default: the model's input width)

    Returns:
        NoiseReport with both metric sets
    """
    predict = model.predict if isinstance(model, CnnClassifier) else model
    if T_w is None and isinstance(model, CnnClassifier):
        T_w = model.arch.input_shape[1] * dataset.dt
    clean = compute_metrics(predict(dataset.features(ctx, T_w)), dataset.labels)
    noisy = compute_metrics(predict(dataset.features(ctx, T_w, sigma_mag, sigma_ang_deg, seed)), dataset.labels)
    report = NoiseReport(clean, noisy, sigma_mag, sigma_ang_deg, seed)
    logger.info(f"Noise (sigma {sigma_mag} p.u., {sigma_ang_deg} deg): accuracy "
                f"{clean.accuracy:.2f}% -> {noisy.accuracy:.2f}%")
    return report
