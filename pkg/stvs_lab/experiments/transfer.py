"""
Transfer of a pre-trained classifier to changed topologies.

For every target topology a fresh dataset is generated and split into a
fine-tuning part and a held-out test part. The pre-trained model is tested
directly, then fine-tuned on the first part and tested again on the second.
"""
import zlib
import logging
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from stvs_lab.config import DATASET_CONFIG, TRANSFER_SCENARIOS
from stvs_lab.exceptions import DatasetError
from stvs_lab.experiments.dataset import DatasetSpec, LabeledDataset, generate_dataset, stratified_take
from stvs_lab.experiments.metrics import MetricsReport, compute_metrics
from stvs_lab.features.labels import class_counts
from stvs_lab.grid.loader import susceptance_partition
from stvs_lab.grid.models import GridModel
from stvs_lab.learning.model import CnnClassifier
from stvs_lab.learning.training import TrainConfig, accuracy, fine_tune
from stvs_lab.steady_state.power_flow import solve_power_flow
from stvs_lab.steady_state.stability import stability_summary
from stvs_lab.utils.converters import LinePair, format_line, normalize_line

logger = logging.getLogger(__name__)


def resolve_scenarios(names: Optional[Iterable[str]] = None,
                      lines: Optional[Sequence[LinePair]] = None) -> Dict[str, Tuple[LinePair, ...]]:
    """
    Map scenario names to line outages.

    Explicit lines form one scenario, named after the matching registry entry
    when there is one. Without arguments every registered scenario is returned.

    Raises:
        ValueError: For an unknown scenario name
    """
    if lines:
        outage = tuple(sorted(normalize_line(pair) for pair in lines))
        for name, registered in TRANSFER_SCENARIOS.items():
            if tuple(sorted(normalize_line(pair) for pair in registered)) == outage:
                return {name: outage}
        return {"+".join(format_line(pair) for pair in outage): outage}
    if not names:
        names = list(TRANSFER_SCENARIOS)
    resolved = {}
    for name in names:
        if name not in TRANSFER_SCENARIOS:
            raise ValueError(f"unknown scenario '{name}'; known: {', '.join(TRANSFER_SCENARIOS)}")
        resolved[name] = tuple(normalize_line(pair) for pair in TRANSFER_SCENARIOS[name])
    return resolved


def scenario_seed(seed: int, name: str) -> int:
    """Seed of a scenario's target dataset, derived from the master seed and the name."""
    return int(np.random.SeedSequence([seed, zlib.crc32(name.encode())]).generate_state(1)[0])


def topology_summary(grid: GridModel, load_scale: float = 1.0) -> Dict[str, Any]:
    """Branch count, stability index and open-circuit voltage range at a load level."""
    op = solve_power_flow(grid, load_scale)
    return stability_summary(grid, op, susceptance_partition(grid))


@dataclass
class TransferResult:
    scenario: str
    lines: Tuple[LinePair, ...]
    topology_id: str
    direct: MetricsReport
    fine_tuned: MetricsReport
    n_finetune: int
    n_test: int
    dataset_hash: str
    source_accuracy: Optional[float] = None
    topology: Dict[str, Any] = field(default_factory=dict)
    finetune_mix: Tuple[int, int] = (0, 0)
    model: Optional[CnnClassifier] = field(default=None, repr=False, compare=False)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "scenario": self.scenario,
            "lines": [format_line(pair) for pair in self.lines],
            "topology_id": self.topology_id,
            "direct": self.direct.to_dict(),
            "fine_tuned": self.fine_tuned.to_dict(),
            "n_finetune": self.n_finetune,
            "finetune_mix": {"stable": self.finetune_mix[0], "unstable": self.finetune_mix[1]},
            "n_test": self.n_test,
            "dataset_hash": self.dataset_hash,
            "source_accuracy_after_finetune": self.source_accuracy,
            "topology": self.topology,
        }


def transfer_to(model: CnnClassifier, name: str, dataset: LabeledDataset, grid: GridModel, finetune_count: int,
                cfg: TrainConfig, source_test: Optional[Tuple[np.ndarray, np.ndarray]] = None,
                seed: int = 0) -> TransferResult:
    """
    Direct and fine-tuned evaluation on one target dataset.

    A stratified draw of finetune_count samples tunes the model; the rest are
    the test set. Rebalancing extras sit at the end of a generated dataset, so
    the parts are never cut by position.

    Raises:
        DatasetError: If the dataset cannot hold both parts or they share samples
    """
    if finetune_count < 0 or finetune_count >= len(dataset):
        raise DatasetError(f"cannot take {finetune_count} fine-tuning samples from {len(dataset)}")
    tune_pos, test_pos = stratified_take(dataset.labels, finetune_count, seed)
    ids = dataset.sample_ids
    if {ids[k] for k in tune_pos} & {ids[k] for k in test_pos}:
        raise DatasetError("fine-tuning and test samples overlap")

    ctx = dataset.context(grid)
    X = dataset.features(ctx, T_w=model.arch.input_shape[1] * dataset.dt)
    y = dataset.labels
    direct = compute_metrics(model.predict(X[test_pos]), y[test_pos])
    tuned = fine_tune(model, X[tune_pos], y[tune_pos], cfg)
    fine_tuned = compute_metrics(tuned.predict(X[test_pos]), y[test_pos])

    source_accuracy = None
    if source_test is not None:
        source_accuracy = 100.0 * accuracy(tuned, *source_test)
    logger.info(f"{name} ({dataset.topology_id}): direct {direct.accuracy:.2f}%, "
                f"fine-tuned {fine_tuned.accuracy:.2f}%"
                + (f", source after tuning {source_accuracy:.2f}%" if source_accuracy is not None else ""))
    return TransferResult(
        scenario=name,
        lines=tuple(dataset.spec.lines),
        topology_id=dataset.topology_id,
        direct=direct,
        fine_tuned=fine_tuned,
        n_finetune=finetune_count,
        n_test=len(test_pos),
        dataset_hash=dataset.content_hash,
        source_accuracy=source_accuracy,
        finetune_mix=class_counts(y[tune_pos]),
        model=tuned,
    )


def run_transfer_suite(model: CnnClassifier, scenarios: Dict[str, Sequence[LinePair]], base_spec: DatasetSpec,
                       cfg: TrainConfig, finetune_count: int = DATASET_CONFIG["target_finetune"],
                       test_count: int = DATASET_CONFIG["target_test"], jobs: int = 1, progress: bool = False,
                       source_test: Optional[Tuple[np.ndarray, np.ndarray]] = None,
                       generate: Callable[..., LabeledDataset] = generate_dataset) -> List[TransferResult]:
    """
    Evaluate direct transfer and fine-tuning on every target topology.

    Args:
        model: Pre-trained source classifier (left unmodified)
        scenarios: Scenario name -> disconnected lines
        base_spec: Source dataset spec; topology, count and seed are replaced per scenario
        cfg: Training configuration (fine-tuning settings)
        finetune_count: Target samples used for fine-tuning
        test_count: Held-out target test samples
        jobs: Worker processes for generation
        progress: Show progress bars
        source_test: Optional source test set for the forgetting diagnostic
        generate: Dataset generator

    Returns:
        One TransferResult per scenario
    """
    if test_count < 1:
        raise ValueError("test_count must be at least 1")
    results = []
    for name, lines in scenarios.items():
        spec = replace(base_spec, lines=tuple(normalize_line(pair) for pair in lines),
                       count=finetune_count + test_count, seed=scenario_seed(base_spec.seed, name))
        grid = spec.build_grid()
        dataset = generate(spec, jobs=jobs, progress=progress, grid=grid)
        result = transfer_to(model, name, dataset, grid, finetune_count, cfg, source_test, seed=spec.seed)
        result.topology = topology_summary(grid)
        results.append(result)
    return results
