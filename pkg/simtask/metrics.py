"""Exact ranking metrics for imbalanced binary prediction.

``auc`` is the Mann-Whitney statistic with ties counted as half a win.
``average_precision`` is the precision-recall step sum over distinct score
thresholds; samples sharing a score enter the ranking together.
"""

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import MetricError


def _as_arrays(scores: Sequence[float], labels: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1)
    if s.shape != y.shape:
        raise MetricError(f"scores and labels differ in length ({s.shape[0]} vs {y.shape[0]})")
    if not np.isin(y, (0, 1)).all():
        raise MetricError("labels must be 0 or 1")
    if not np.isfinite(s).all():
        raise MetricError("scores must be finite")
    return s, y.astype(np.int64)


def auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    s, y = _as_arrays(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricError("AUC is undefined unless both classes are present")
    ranks = rankdata(s, method="average")
    wins = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(wins / (n_pos * n_neg))


def average_precision(scores: Sequence[float], labels: Sequence[int]) -> float:
    s, y = _as_arrays(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise MetricError("average precision is undefined without positives")

    # Group by distinct score, highest first.
    distinct, inverse = np.unique(-s, return_inverse=True)
    tp = np.cumsum(np.bincount(inverse, weights=y, minlength=distinct.shape[0]))
    seen = np.cumsum(np.bincount(inverse, minlength=distinct.shape[0]))
    precision = tp / seen
    recall = tp / n_pos
    steps = np.diff(np.concatenate([[0.0], recall]))
    return float(np.sum(steps * precision))


@dataclass(frozen=True)
class TaskMetrics:
    """One task's metrics; auc and ap are None when its split holds a single class."""

    n: int
    n_pos: int
    auc: Optional[float] = None
    ap: Optional[float] = None

    @property
    def defined(self) -> bool:
        return self.auc is not None


@dataclass(frozen=True)
class MetricsReport:
    micro_auc: float
    micro_ap: float
    macro_auc: Optional[float]
    macro_ap: Optional[float]
    per_task: Mapping[str, TaskMetrics] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "micro_auc": self.micro_auc,
            "micro_ap": self.micro_ap,
            "macro_auc": self.macro_auc,
            "macro_ap": self.macro_ap,
            "per_task": {
                task_id: {"auc": m.auc, "ap": m.ap, "n": m.n, "n_pos": m.n_pos}
                for task_id, m in sorted(self.per_task.items())
            },
        }


def task_metrics(scores: Sequence[float], labels: Sequence[int]) -> TaskMetrics:
    s, y = _as_arrays(scores, labels)
    n, n_pos = int(y.shape[0]), int(y.sum())
    if n_pos in (0, n):
        return TaskMetrics(n=n, n_pos=n_pos)
    return TaskMetrics(n=n, n_pos=n_pos, auc=auc(s, y), ap=average_precision(s, y))


def build_report(predictions: Mapping[str, tuple[Sequence[float], Sequence[int]]]) -> MetricsReport:
    """Micro metrics over all pooled (score, label) pairs plus per-task and macro metrics.

    ``predictions`` maps each task id to its (scores, labels).
    """
    if not predictions:
        raise MetricError("no predictions to score")
    per_task = {task_id: task_metrics(scores, labels) for task_id, (scores, labels) in predictions.items()}
    all_scores = np.concatenate([np.asarray(s, dtype=np.float64).reshape(-1) for s, _ in predictions.values()])
    all_labels = np.concatenate([np.asarray(y).reshape(-1) for _, y in predictions.values()])
    if all_labels.size == 0 or all_labels.min() == all_labels.max():
        raise MetricError("pooled predictions hold a single class")

    defined = [m for m in per_task.values() if m.defined]
    return MetricsReport(
        micro_auc=auc(all_scores, all_labels),
        micro_ap=average_precision(all_scores, all_labels),
        macro_auc=float(np.mean([m.auc for m in defined])) if defined else None,
        macro_ap=float(np.mean([m.ap for m in defined])) if defined else None,
        per_task=per_task,
    )
