"""
Voltage dynamic features, windows, measurement noise and labels.
"""
from stvs_lab.features.builder import (
    FeatureContext, FeatureWindow, delta_snapshot, build_features, extract_window, inject_pmu_noise
)
from stvs_lab.features.labels import (
    STABLE, UNSTABLE, LABEL_NAMES, StabilityLabel, longest_dwell, dwell_times,
    label_trajectory, instability_indicator, class_counts
)
from stvs_lab.features.export import to_grayscale, write_pgm, read_pgm, write_heatmap

__all__ = [
    'FeatureContext',
    'FeatureWindow',
    'delta_snapshot',
    'build_features',
    'extract_window',
    'inject_pmu_noise',
    'STABLE',
    'UNSTABLE',
    'LABEL_NAMES',
    'StabilityLabel',
    'longest_dwell',
    'dwell_times',
    'label_trajectory',
    'instability_indicator',
    'class_counts',
    'to_grayscale',
    'write_pgm',
    'read_pgm',
    'write_heatmap'
]
