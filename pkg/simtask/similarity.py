"""Task similarity in model space and per-task neighborhoods.

A task's direction in model space is its adaptation delta ``θᵢ − θ``. Two tasks
are compared by the cosine of the angle between their deltas. A task whose delta
is exactly zero has no direction: every cosine involving it is 0, its
neighborhood is itself alone and it never joins another task's neighborhood.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .data import TaskCorpus, regime_of
from .errors import SimtaskError
from .model import ParamVector
from .schema import SimilarityConfig

PARAMETER_STRATEGIES = ("cosine", "knn")


@dataclass(frozen=True)
class NeighborhoodAssignment:
    """Which tasks pool their training samples with which, for one epoch."""

    epoch: int
    strategy: str
    neighbors: Mapping[str, frozenset[str]]

    def __post_init__(self):
        ids = set(self.neighbors)
        for task_id, members in self.neighbors.items():
            if task_id not in members:
                raise SimtaskError(f"neighborhood of '{task_id}' does not contain the task itself")
            unknown = members - ids
            if unknown:
                raise SimtaskError(f"neighborhood of '{task_id}' names unknown tasks: {sorted(unknown)}")

    def of(self, task_id: str) -> frozenset[str]:
        return self.neighbors[task_id]

    @property
    def mean_size(self) -> float:
        if not self.neighbors:
            return 0.0
        return sum(len(m) for m in self.neighbors.values()) / len(self.neighbors)


def _check_layouts(theta: ParamVector, vectors: Sequence[ParamVector]):
    for v in vectors:
        if not v.same_layout(theta):
            raise SimtaskError("parameter vectors have different layouts")


def cos_delta(theta_i: ParamVector, theta_j: ParamVector, theta: ParamVector) -> float:
    """cos(θᵢ − θ, θⱼ − θ); 0 when either delta is zero."""
    _check_layouts(theta, [theta_i, theta_j])
    a = theta_i.values - theta.values
    b = theta_j.values - theta.values
    norm_a = float(np.sqrt(np.sum(a * a)))
    norm_b = float(np.sqrt(np.sum(b * b)))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return float(np.clip(np.sum(a * b) / (norm_a * norm_b), -1.0, 1.0))


def _cosine_matrix(thetas: Mapping[str, ParamVector], theta: ParamVector) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Task ids in sorted order, their pairwise delta cosines (exactly symmetric) and a zero-delta mask."""
    ids = sorted(thetas)
    _check_layouts(theta, [thetas[t] for t in ids])
    deltas = np.stack([thetas[t].values - theta.values for t in ids]) if ids else np.zeros((0, len(theta)))
    norms = np.sqrt(np.sum(deltas * deltas, axis=1))
    zero = norms == 0.0

    unit = np.zeros_like(deltas)
    unit[~zero] = deltas[~zero] / norms[~zero, None]
    gram = unit @ unit.T
    upper = np.triu(gram)
    cos = np.clip(upper + np.triu(upper, 1).T, -1.0, 1.0)
    cos[zero, :] = 0.0
    cos[:, zero] = 0.0
    return ids, cos, zero


def neighborhood_cosine(
    thetas: Mapping[str, ParamVector], theta: ParamVector, eta: float, *, epoch: int = 0
) -> NeighborhoodAssignment:
    """j joins i's neighborhood iff cos(δᵢ, δⱼ) > η. Symmetric."""
    if not -1.0 < eta <= 1.0:
        raise SimtaskError(f"eta must lie in (-1, 1], got {eta}")
    if not thetas:
        raise SimtaskError("no tasks to compare")
    ids, cos, zero = _cosine_matrix(thetas, theta)

    neighbors = {}
    for i, task_id in enumerate(ids):
        members = {task_id}
        if not zero[i]:
            members.update(ids[j] for j in np.flatnonzero((cos[i] > eta) & ~zero))
        neighbors[task_id] = frozenset(members)
    return NeighborhoodAssignment(epoch=epoch, strategy="cosine", neighbors=neighbors)


def neighborhood_knn(
    thetas: Mapping[str, ParamVector], theta: ParamVector, k: int, *, epoch: int = 0
) -> NeighborhoodAssignment:
    """Each task plus the k other tasks with the largest delta cosine; ties go to the lower task id.

    Not symmetrized. Tasks with a zero delta are neither anchors nor candidates.
    """
    if not thetas:
        raise SimtaskError("no tasks to compare")
    if not 1 <= k <= len(thetas):
        raise SimtaskError(f"k must lie in [1, {len(thetas)}], got {k}")
    ids, cos, zero = _cosine_matrix(thetas, theta)

    neighbors = {}
    for i, task_id in enumerate(ids):
        members = {task_id}
        if not zero[i]:
            candidates = [j for j in range(len(ids)) if j != i and not zero[j]]
            candidates.sort(key=lambda j: (-cos[i, j], ids[j]))
            members.update(ids[j] for j in candidates[:k])
        neighbors[task_id] = frozenset(members)
    return NeighborhoodAssignment(epoch=epoch, strategy="knn", neighbors=neighbors)


def neighborhood_static(tasks: Sequence[TaskCorpus], tolerance: float, *, epoch: int = 0) -> NeighborhoodAssignment:
    """Group tasks whose positive rates differ by at most ``tolerance``."""
    if tolerance < 0:
        raise SimtaskError(f"static tolerance must be non-negative, got {tolerance}")
    neighbors = {
        a.task_id: frozenset(b.task_id for b in tasks if abs(a.positive_rate - b.positive_rate) <= tolerance)
        for a in tasks
    }
    return NeighborhoodAssignment(epoch=epoch, strategy="static", neighbors=neighbors)


def neighborhood_identity(task_ids: Sequence[str], *, epoch: int = 0) -> NeighborhoodAssignment:
    return NeighborhoodAssignment(epoch=epoch, strategy="identity", neighbors={t: frozenset([t]) for t in task_ids})


def measure_neighborhoods(
    config: SimilarityConfig,
    tasks: Sequence[TaskCorpus],
    theta: ParamVector,
    task_params: Optional[Mapping[str, ParamVector]],
    epoch: int,
) -> NeighborhoodAssignment:
    """Neighborhoods for one epoch under the configured strategy.

    Parameter-based strategies have no task parameters before the first epoch
    finishes and use identity neighborhoods at epoch 0.
    """
    task_ids = [t.task_id for t in tasks]
    if config.strategy == "identity":
        return neighborhood_identity(task_ids, epoch=epoch)
    if config.strategy == "static":
        return neighborhood_static(tasks, config.static_tolerance, epoch=epoch)
    if epoch == 0 or not task_params:
        return neighborhood_identity(task_ids, epoch=epoch)

    thetas = {t: task_params.get(t, theta) for t in task_ids}
    if config.strategy == "cosine":
        return neighborhood_cosine(thetas, theta, config.eta, epoch=epoch)
    return neighborhood_knn(thetas, theta, config.k, epoch=epoch)


# ── Export ──


def model_space_records(
    theta: ParamVector,
    task_params: Mapping[str, ParamVector],
    tasks: Sequence[TaskCorpus],
    assignment: NeighborhoodAssignment,
) -> list[dict]:
    records = []
    for task in tasks:
        params = task_params.get(task.task_id, theta)
        _check_layouts(theta, [params])
        delta = params.values - theta.values
        neighbors = sorted(assignment.of(task.task_id))
        records.append(
            {
                "epoch": assignment.epoch,
                "task_id": task.task_id,
                "regime": regime_of(task.task_id),
                "positive_rate": task.positive_rate,
                "delta": [float(x) for x in delta],
                "neighbors": neighbors,
                "isolated": bool(not np.any(delta) or neighbors == [task.task_id]),
            }
        )
    return records


def export_model_space(
    path: Path,
    theta: ParamVector,
    task_params: Mapping[str, ParamVector],
    tasks: Sequence[TaskCorpus],
    assignment: NeighborhoodAssignment,
    append: bool = False,
) -> int:
    """Write one JSON line per task (delta, positive rate, neighbors). Returns the record count."""
    records = model_space_records(theta, task_params, tasks, assignment)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a" if append else "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record, separators=(",", ":")) + "\n")
    return len(records)
