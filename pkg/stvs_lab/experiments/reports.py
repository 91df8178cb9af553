"""
Aligned-column text reports and their JSON companions.
"""
import logging
from typing import Any, Dict, List, Optional, Sequence

from tabulate import tabulate

from stvs_lab.experiments.evaluation import NoiseReport
from stvs_lab.experiments.metrics import METRIC_NAMES, MetricsReport
from stvs_lab.experiments.transfer import TransferResult
from stvs_lab.utils.io import atomic_write, version_string, write_json

logger = logging.getLogger(__name__)

METRIC_HEADERS = ["ACC (%)", "Precision (%)", "Recall (%)", "F1 (%)"]


def _metric_cells(values: Dict[str, float]) -> List[float]:
    return [values[name] for name in METRIC_NAMES]


def metrics_table(report: MetricsReport) -> str:
    """Metrics of one evaluation; k-fold reports list every fold and the mean."""
    rows = []
    for fold, sub in enumerate(report.folds, start=1):
        rows.append([f"fold {fold}", *_metric_cells(sub.summary()), sub.total])
    if report.folds:
        rows.append(["mean", *_metric_cells(report.fold_mean), report.total])
    rows.append(["pooled" if report.folds else "test", *_metric_cells(report.summary()), report.total])
    confusion = tabulate([[report.tp, report.fp, report.fn, report.tn]], headers=["TP", "FP", "FN", "TN"])
    return tabulate(rows, headers=["", *METRIC_HEADERS, "samples"], floatfmt=".2f") + "\n\n" + confusion


def size_table(rows: Sequence[Dict[str, Any]]) -> str:
    """Accuracy against training-set size."""
    body = [[row["size"], *_metric_cells(row), row["n_test"]] for row in rows]
    return tabulate(body, headers=["Training samples", *METRIC_HEADERS, "Test samples"], floatfmt=".2f")


def window_table(rows: Sequence[Dict[str, Any]]) -> str:
    """Accuracy against moving-window length."""
    body = [[f"{row['window']:.2f}", row["steps"], *_metric_cells(row)] for row in rows]
    return tabulate(body, headers=["Window (s)", "Steps", *METRIC_HEADERS], floatfmt=".2f")


def noise_table(report: NoiseReport) -> str:
    body = [
        ["clean", *_metric_cells(report.clean.summary())],
        [f"noisy ({report.sigma_mag} p.u., {report.sigma_ang_deg} deg)", *_metric_cells(report.noisy.summary())],
    ]
    return tabulate(body, headers=["Test data", *METRIC_HEADERS], floatfmt=".2f")


def transfer_table(results: Sequence[TransferResult]) -> str:
    """Direct-transfer and fine-tuned blocks, one row per topology."""
    blocks = []
    for title, attr in (("Direct transfer", "direct"), ("Fine-tuned", "fine_tuned")):
        body = [[r.scenario, ", ".join(f"{a}-{b}" for a, b in r.lines),
                 *_metric_cells(getattr(r, attr).summary())] for r in results]
        blocks.append(title + "\n" + tabulate(body, headers=["Topology", "Lines out", *METRIC_HEADERS],
                                              floatfmt=".2f"))
    topology = [[r.scenario, r.topology.get("connected_branches"), r.topology.get("delta"),
                 r.topology.get("v_oc_min"), r.topology.get("v_oc_max"), r.source_accuracy] for r in results]
    blocks.append("Topology summary\n" + tabulate(
        topology, headers=["Topology", "Branches", "Delta", "v_oc min", "v_oc max", "Source ACC after tuning (%)"],
        floatfmt=".4f", missingval="-"))
    return "\n\n".join(blocks)


def write_report(text: str, data: Dict[str, Any], text_path: str, json_path: Optional[str] = None) -> None:
    """
    Write the text report and its JSON companion atomically.

    The JSON document is stamped with the software version.
    """
    with atomic_write(text_path, "w") as handle:
        handle.write(text.rstrip() + "\n")
    if json_path is not None:
        write_json(json_path, {"version": version_string(), **data})
    logger.info(f"Report written to {text_path}")
