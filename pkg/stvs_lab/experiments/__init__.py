"""
Experiment harness: dataset generation, evaluation workflows, transfer suite
and reports.
"""

from stvs_lab.experiments.dataset import (
    DatasetSpec,
    LabeledDataset,
    draw_sample,
    generate_dataset,
    save_dataset,
    load_dataset,
    stratified_split,
    stratified_take,
)
from stvs_lab.experiments.metrics import MetricsReport, compute_metrics
from stvs_lab.experiments.evaluation import (
    NoiseReport,
    train_classifier,
    cnn_fit_predict,
    kfold_splits,
    kfold_evaluate,
    nested_subsets,
    run_size_ablation,
    run_window_ablation,
    run_noise_robustness,
)
from stvs_lab.experiments.transfer import (
    TransferResult,
    resolve_scenarios,
    scenario_seed,
    topology_summary,
    transfer_to,
    run_transfer_suite,
)

__all__ = [
    'DatasetSpec',
    'LabeledDataset',
    'draw_sample',
    'generate_dataset',
    'save_dataset',
    'load_dataset',
    'stratified_split',
    'stratified_take',
    'MetricsReport',
    'compute_metrics',
    'NoiseReport',
    'train_classifier',
    'cnn_fit_predict',
    'kfold_splits',
    'kfold_evaluate',
    'nested_subsets',
    'run_size_ablation',
    'run_window_ablation',
    'run_noise_robustness',
    'TransferResult',
    'resolve_scenarios',
    'scenario_seed',
    'topology_summary',
    'transfer_to',
    'run_transfer_suite',
]
