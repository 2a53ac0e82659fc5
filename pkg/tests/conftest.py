"""Shared test fixtures."""

import numpy as np
import pytest

from simtask.data import EpisodeSample, EventRecord, TaskCorpus
from simtask.model import ParamLayout, ParamVector
from simtask.schema import ModelConfig, SyntheticConfig
from simtask.synthetic import generate_synthetic_tasks

TINY_SYNTHETIC = {
    "name": "tiny",
    "n_event_types": 3,
    "n_categorical": 2,
    "n_numeric": 1,
    "max_categorical_per_event": 1,
    "samples_min": 20,
    "samples_max": 20,
    "regimes": [
        {"name": "low", "positive_rate": 0.1, "task_count": 3, "mean_events": 4, "type_weights": [3, 1, 1]},
        {"name": "high", "positive_rate": 0.5, "task_count": 3, "mean_events": 4, "type_weights": [1, 1, 3]},
    ],
}


def make_sample(label: int, types=(0,), n_numeric: int = 1, cats=()) -> EpisodeSample:
    """Episode with one event per type index, evenly spaced in time."""
    events = tuple(
        EventRecord(event_type=t, value_c=tuple(cats), value_n=(0.1 * (i + 1),) * n_numeric, time=float(i))
        for i, t in enumerate(types)
    )
    return EpisodeSample(events=events, label=label)


def make_task(task_id: str, n: int = 10, positives: int = 3, seed: int = 0) -> TaskCorpus:
    samples = [make_sample(1 if i < positives else 0, types=(i % 2, (i + 1) % 2)) for i in range(n)]
    return TaskCorpus.build(task_id, samples, split_seed=seed)


def vector(*values: float) -> ParamVector:
    layout = ParamLayout.from_shapes([("w", (len(values),))])
    return ParamVector(values=np.array(values, dtype=np.float64), layout=layout)


class QuadraticObjective:
    """L(θ) = c·‖θ‖², with the scale c keyed by the batch's first sample."""

    def __init__(self, scales=None):
        self.scales = scales or {}

    def _scale(self, batch) -> float:
        return self.scales.get(batch[0], 1.0)

    def loss(self, params, batch) -> float:
        return float(self._scale(batch) * np.sum(params.values**2))

    def loss_grad(self, params, batch) -> ParamVector:
        return params.with_values(2.0 * self._scale(batch) * params.values)

    def predict(self, params, samples) -> list[float]:
        return [0.25 + 0.5 * s.label for s in samples]


@pytest.fixture
def tiny_model():
    return ModelConfig(n_event_types=2, n_categorical=2, n_numeric=1, embed_dim=2, hidden_dim=4)


@pytest.fixture
def tiny_synthetic():
    return SyntheticConfig(**TINY_SYNTHETIC)


@pytest.fixture
def tiny_manifest(tiny_synthetic):
    return generate_synthetic_tasks(tiny_synthetic, seed=0)


@pytest.fixture
def tiny_experiment(tmp_path):
    """Experiment config file using the tiny inline synthetic dataset."""
    import yaml

    data = {
        "name": "tiny-run",
        "dataset": {"synthetic": TINY_SYNTHETIC, "seed": 0},
        "model": {"embed_dim": 4, "hidden_dim": 4},
        "train": {"max_epochs": 2, "alpha": 0.01, "beta": 0.01, "dtr_size": 8, "dval_size": 8},
        "max_seq_len": 8,
        "seeds": [0],
    }
    path = tmp_path / "experiment.yaml"
    path.write_text(yaml.safe_dump(data, sort_keys=False))
    return path
