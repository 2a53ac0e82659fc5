"""Event-sequence data model, dataset files, deterministic splits and preprocessing.

Dataset format
--------------
A dataset is a YAML manifest plus one records file per task::

    name: two-regime
    split_seed: 0
    split_ratios: [0.7, 0.1, 0.2]
    vocab:
      event_types: [lab, medication, chart]
      categorical_values: [abnormal, iv, oral]
      numeric_dims: 2
    tasks:
      - id: "4019"
        records: records/4019.jsonl
    stats:                      # optional; verified against the tasks when present
      task_count: 1
      sample_count: 3
      positive_rate: 0.3333333333333333

Each records file holds one episode per line as a JSON array: the label first,
then one ``[type_index, [categorical_indices], [numeric_values], time]`` group
per event, sorted by time::

    [1, [0, [0], [1.5, -0.2], 0.0], [2, [], [0.3, 0.1], 4.5]]

Every numeric list has exactly ``numeric_dims`` entries. Unknown manifest keys
and event groups with extra elements are rejected.
"""

import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
import yaml
from pydantic import ValidationError

from .errors import DatasetError, SimtaskError
from .schema import ManifestFile

MANIFEST_FILENAME = "manifest.yaml"
DEFAULT_RATIOS = (0.7, 0.1, 0.2)
SPLIT_NAMES = ("train", "valid", "test")


# ── Domain types ──


@dataclass(frozen=True)
class EventRecord:
    """One timestamped clinical event: type, categorical and numerical attributes."""

    event_type: int
    value_c: tuple[int, ...] = ()
    value_n: tuple[float, ...] = ()
    time: float = 0.0

    def __post_init__(self):
        if self.event_type < 0:
            raise DatasetError("event type index must be non-negative", field="type")
        if not all(math.isfinite(v) for v in self.value_n):
            raise DatasetError("numeric attributes must be finite", field="value_n")
        if not (math.isfinite(self.time) and self.time >= 0):
            raise DatasetError("event time must be finite and non-negative", field="time")


@dataclass(frozen=True)
class EpisodeArrays:
    """Dense encoding of one episode, cached on the sample for batched model evaluation."""

    types: np.ndarray  # (T,)
    cat_event: np.ndarray  # (K,) event position of each categorical attribute
    cat_index: np.ndarray  # (K,) vocabulary index of each categorical attribute
    numeric: np.ndarray  # (T, n_numeric)


@dataclass(frozen=True)
class EpisodeSample:
    """A labeled event sequence (one patient episode)."""

    events: tuple[EventRecord, ...]
    label: int

    def __post_init__(self):
        if len(self.events) == 0:
            raise DatasetError("episode has no events", field="events")
        if self.label not in (0, 1):
            raise DatasetError(f"label must be 0 or 1, got {self.label!r}", field="label")
        times = [e.time for e in self.events]
        if any(b < a for a, b in zip(times, times[1:])):
            raise DatasetError("events not sorted", field="time")

    @cached_property
    def arrays(self) -> EpisodeArrays:
        events = self.events
        n_numeric = len(events[0].value_n)
        cat_event = [t for t, e in enumerate(events) for _ in e.value_c]
        cat_index = [c for e in events for c in e.value_c]
        return EpisodeArrays(
            types=np.array([e.event_type for e in events], dtype=np.int64),
            cat_event=np.array(cat_event, dtype=np.int64),
            cat_index=np.array(cat_index, dtype=np.int64),
            numeric=np.array([e.value_n for e in events], dtype=np.float64).reshape(len(events), n_numeric),
        )


@dataclass(frozen=True)
class SplitIndex:
    train: tuple[int, ...]
    valid: tuple[int, ...]
    test: tuple[int, ...]

    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.valid), len(self.test)

    def check(self, n_samples: int):
        parts = [set(self.train), set(self.valid), set(self.test)]
        if sum(len(p) for p in parts) != len(self.train) + len(self.valid) + len(self.test):
            raise SimtaskError("split contains duplicate indices")
        union = parts[0] | parts[1] | parts[2]
        if len(union) != sum(len(p) for p in parts) or union != set(range(n_samples)):
            raise SimtaskError(f"split is not a partition of 0..{n_samples - 1}")


@dataclass(frozen=True)
class TaskCorpus:
    """One task's labeled samples, its split and its cached positive rate."""

    task_id: str
    samples: tuple[EpisodeSample, ...]
    split: SplitIndex
    positive_rate: float

    def __post_init__(self):
        if len(self.samples) == 0:
            raise DatasetError(f"task '{self.task_id}' has no samples")
        self.split.check(len(self.samples))
        if self.positive_rate != sum(s.label for s in self.samples) / len(self.samples):
            raise SimtaskError(f"task '{self.task_id}': positive_rate does not match its labels")

    @classmethod
    def build(
        cls,
        task_id: str,
        samples: Sequence[EpisodeSample],
        split_seed: int = 0,
        ratios: Sequence[float] = DEFAULT_RATIOS,
    ) -> "TaskCorpus":
        samples = tuple(samples)
        split = split_task(len(samples), ratios, task_seed(split_seed, task_id))
        rate = sum(s.label for s in samples) / len(samples) if samples else 0.0
        return cls(task_id=task_id, samples=samples, split=split, positive_rate=rate)

    @property
    def n_samples(self) -> int:
        return len(self.samples)

    def split_samples(self, name: str) -> list[EpisodeSample]:
        if name not in SPLIT_NAMES:
            raise ValueError(f"unknown split '{name}'")
        return [self.samples[i] for i in getattr(self.split, name)]

    def train_samples(self) -> list[EpisodeSample]:
        return self.split_samples("train")

    def valid_samples(self) -> list[EpisodeSample]:
        return self.split_samples("valid")

    def test_samples(self) -> list[EpisodeSample]:
        return self.split_samples("test")


@dataclass(frozen=True)
class Vocabulary:
    event_types: tuple[str, ...]
    categorical_values: tuple[str, ...] = ()
    numeric_dims: int = 0

    def __post_init__(self):
        for label, names in (("event_types", self.event_types), ("categorical_values", self.categorical_values)):
            if len(set(names)) != len(names):
                raise DatasetError("names must be unique", field=f"vocab.{label}")
        if not self.event_types:
            raise DatasetError("at least one event type is required", field="vocab.event_types")
        if self.numeric_dims < 0:
            raise DatasetError("numeric_dims must be non-negative", field="vocab.numeric_dims")


@dataclass(frozen=True)
class DatasetStats:
    task_count: int
    sample_count: int
    positive_rate: float


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    tasks: tuple[TaskCorpus, ...]
    vocab: Vocabulary
    stats: DatasetStats
    split_seed: int = 0
    split_ratios: tuple[float, float, float] = DEFAULT_RATIOS
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        ids = [t.task_id for t in self.tasks]
        if len(set(ids)) != len(ids):
            raise DatasetError("task ids must be unique", field="tasks")
        if compute_stats(self.tasks) != self.stats:
            raise DatasetError("stats do not match the tasks", field="stats")
        object.__setattr__(self, "_index", {t.task_id: t for t in self.tasks})

    @classmethod
    def build(
        cls,
        name: str,
        tasks: Iterable[TaskCorpus],
        vocab: Vocabulary,
        split_seed: int = 0,
        split_ratios: Sequence[float] = DEFAULT_RATIOS,
    ) -> "DatasetManifest":
        tasks = tuple(tasks)
        return cls(
            name=name,
            tasks=tasks,
            vocab=vocab,
            stats=compute_stats(tasks),
            split_seed=split_seed,
            split_ratios=tuple(split_ratios),
        )

    @property
    def task_ids(self) -> list[str]:
        return [t.task_id for t in self.tasks]

    def task(self, task_id: str) -> TaskCorpus:
        return self._index[task_id]


def regime_of(task_id: str) -> Optional[int]:
    """Regime index encoded as a ``-r<id>`` task id suffix, or None for other ids."""
    _, sep, tail = task_id.rpartition("-r")
    if not sep or not tail.isdigit():
        return None
    return int(tail)


def compute_stats(tasks: Sequence[TaskCorpus]) -> DatasetStats:
    n = sum(t.n_samples for t in tasks)
    positives = sum(s.label for t in tasks for s in t.samples)
    return DatasetStats(task_count=len(tasks), sample_count=n, positive_rate=positives / n if n else 0.0)


def summary_stats(manifest: DatasetManifest) -> dict:
    """Dataset-level statistics: task and sample counts, positive rate, samples per task."""
    sizes = [t.n_samples for t in manifest.tasks]
    return {
        "tasks": manifest.stats.task_count,
        "samples": manifest.stats.sample_count,
        "positive_rate": manifest.stats.positive_rate,
        "max_samples_per_task": max(sizes),
        "min_samples_per_task": min(sizes),
        "mean_samples_per_task": sum(sizes) / len(sizes),
    }


# ── Splits ──


def task_seed(global_seed: int, task_id: str) -> int:
    """Per-task split seed, independent of task ordering."""
    digest = hashlib.sha256(f"{global_seed}:{task_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def split_task(n_samples: int, ratios: Sequence[float] = DEFAULT_RATIOS, seed: int = 0) -> SplitIndex:
    """Shuffle 0..n-1 and cut into train / valid / test.

    Sizes are floor(r_train·n), max(1, floor(r_valid·n)) and the remainder; train
    gives up samples when needed so that test keeps at least one.
    """
    if n_samples < 3:
        raise SimtaskError(f"cannot populate all three splits with {n_samples} samples (need at least 3)")
    if len(ratios) != 3 or min(ratios) <= 0 or not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
        raise SimtaskError(f"split ratios must be three positive numbers summing to 1, got {tuple(ratios)}")

    n_train = math.floor(ratios[0] * n_samples + 1e-9)
    n_valid = max(1, math.floor(ratios[1] * n_samples + 1e-9))
    n_train = max(1, min(n_train, n_samples - n_valid - 1))

    perm = np.random.default_rng(seed).permutation(n_samples)
    return SplitIndex(
        train=tuple(sorted(int(i) for i in perm[:n_train])),
        valid=tuple(sorted(int(i) for i in perm[n_train : n_train + n_valid])),
        test=tuple(sorted(int(i) for i in perm[n_train + n_valid :])),
    )


# ── Loading ──


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _parse_event(raw, vocab: Vocabulary, path: Path, lineno: int, pos: int) -> EventRecord:
    where = f"events[{pos}]"
    if not isinstance(raw, list) or len(raw) != 4:
        raise DatasetError("event must be [type, [categorical], [numeric], time]", path, lineno, where)
    etype, cats, nums, time = raw
    if not _is_int(etype) or not 0 <= etype < len(vocab.event_types):
        raise DatasetError(f"event type {etype!r} outside vocabulary", path, lineno, f"{where}.type")
    if not isinstance(cats, list) or not all(_is_int(c) and 0 <= c < len(vocab.categorical_values) for c in cats):
        raise DatasetError(f"categorical values {cats!r} outside vocabulary", path, lineno, f"{where}.value_c")
    if not isinstance(nums, list) or len(nums) != vocab.numeric_dims or not all(_is_number(v) for v in nums):
        raise DatasetError(
            f"expected {vocab.numeric_dims} numeric values, got {nums!r}", path, lineno, f"{where}.value_n"
        )
    if not all(math.isfinite(v) for v in nums):
        raise DatasetError("numeric values must be finite", path, lineno, f"{where}.value_n")
    if not _is_number(time) or not math.isfinite(time) or time < 0:
        raise DatasetError(f"time must be a non-negative number, got {time!r}", path, lineno, f"{where}.time")
    return EventRecord(event_type=etype, value_c=tuple(cats), value_n=tuple(float(v) for v in nums), time=float(time))


def _parse_episode(line: str, vocab: Vocabulary, path: Path, lineno: int) -> EpisodeSample:
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as e:
        raise DatasetError(f"invalid JSON: {e.msg}", path, lineno) from None
    if not isinstance(raw, list) or len(raw) < 2:
        raise DatasetError("episode must be [label, event, ...] with at least one event", path, lineno)
    label = raw[0]
    if not _is_int(label) or label not in (0, 1):
        raise DatasetError(f"label must be 0 or 1, got {label!r}", path, lineno, "label")
    events = tuple(_parse_event(e, vocab, path, lineno, i) for i, e in enumerate(raw[1:]))
    if any(b.time < a.time for a, b in zip(events, events[1:])):
        raise DatasetError("events not sorted", path, lineno, "time")
    return EpisodeSample(events=events, label=label)


def _read_records(path: Path, vocab: Vocabulary) -> list[EpisodeSample]:
    if not path.exists():
        raise DatasetError("records file not found", path)
    samples = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if line.strip():
                samples.append(_parse_episode(line, vocab, path, lineno))
    return samples


def load_dataset(path: Path) -> DatasetManifest:
    """Load and validate a dataset from a manifest file (or a directory holding manifest.yaml)."""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_FILENAME
    if not path.exists():
        raise DatasetError("manifest file not found", path)

    with open(path, encoding="utf-8") as f:
        try:
            data = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise DatasetError(f"invalid YAML: {e}", path) from None
    if not isinstance(data, dict):
        raise DatasetError("manifest must be a mapping", path)
    try:
        parsed = ManifestFile(**data)
    except ValidationError as e:
        err = e.errors()[0]
        loc = ".".join(str(x) for x in err["loc"])
        raise DatasetError(err["msg"], path, field=loc) from None

    vocab = Vocabulary(
        event_types=tuple(parsed.vocab.event_types),
        categorical_values=tuple(parsed.vocab.categorical_values),
        numeric_dims=parsed.vocab.numeric_dims,
    )
    tasks = []
    for entry in parsed.tasks:
        samples = _read_records(path.parent / entry.records, vocab)
        if not samples:
            raise DatasetError(f"task '{entry.id}' has no samples", path.parent / entry.records)
        try:
            tasks.append(TaskCorpus.build(entry.id, samples, parsed.split_seed, parsed.split_ratios))
        except SimtaskError as e:
            raise DatasetError(str(e), path.parent / entry.records, field="split") from None

    stats = compute_stats(tasks)
    if parsed.stats is not None:
        for key in ("task_count", "sample_count"):
            if getattr(parsed.stats, key) != getattr(stats, key):
                raise DatasetError(
                    f"stored {key}={getattr(parsed.stats, key)} but tasks give {getattr(stats, key)}",
                    path,
                    field=f"stats.{key}",
                )
        if not math.isclose(parsed.stats.positive_rate, stats.positive_rate, abs_tol=1e-12):
            raise DatasetError(
                f"stored positive_rate={parsed.stats.positive_rate} but tasks give {stats.positive_rate}",
                path,
                field="stats.positive_rate",
            )
    return DatasetManifest.build(parsed.name, tasks, vocab, parsed.split_seed, parsed.split_ratios)


# ── Saving ──


def _episode_line(sample: EpisodeSample) -> str:
    groups = [[e.event_type, list(e.value_c), list(e.value_n), e.time] for e in sample.events]
    return json.dumps([sample.label, *groups], separators=(",", ":"))


def _records_name(task_id: str) -> str:
    return re.sub(r"[^\w.-]", "_", task_id) + ".jsonl"


def save_dataset(manifest: DatasetManifest, directory: Path) -> Path:
    """Write a dataset in the documented format; returns the manifest path."""
    directory = Path(directory)
    records_dir = directory / "records"
    records_dir.mkdir(parents=True, exist_ok=True)

    entries = []
    for task in manifest.tasks:
        rel = f"records/{_records_name(task.task_id)}"
        with open(directory / rel, "w", encoding="utf-8") as f:
            for sample in task.samples:
                f.write(_episode_line(sample) + "\n")
        entries.append({"id": task.task_id, "records": rel})

    data = {
        "name": manifest.name,
        "split_seed": manifest.split_seed,
        "split_ratios": list(manifest.split_ratios),
        "vocab": {
            "event_types": list(manifest.vocab.event_types),
            "categorical_values": list(manifest.vocab.categorical_values),
            "numeric_dims": manifest.vocab.numeric_dims,
        },
        "tasks": entries,
        "stats": {
            "task_count": manifest.stats.task_count,
            "sample_count": manifest.stats.sample_count,
            "positive_rate": manifest.stats.positive_rate,
        },
    }
    manifest_path = directory / MANIFEST_FILENAME
    with open(manifest_path, "w", encoding="utf-8") as f:
        yaml.safe_dump(data, f, sort_keys=False, allow_unicode=True)
    return manifest_path


# ── Preprocessing ──


@dataclass(frozen=True)
class NormStats:
    """Per-dimension z-score statistics for numeric attributes."""

    mean: tuple[float, ...]
    scale: tuple[float, ...]

    def apply(self, values: tuple[float, ...]) -> tuple[float, ...]:
        return tuple((v - m) / s for v, m, s in zip(values, self.mean, self.scale))


def truncate_episode(sample: EpisodeSample, max_len: int) -> EpisodeSample:
    """Keep the most recent ``max_len`` events."""
    if len(sample.events) <= max_len:
        return sample
    return EpisodeSample(events=sample.events[-max_len:], label=sample.label)


def fit_norm_stats(tasks: Sequence[TaskCorpus], numeric_dims: int) -> NormStats:
    """Z-score statistics over the numeric attributes of every training-split event."""
    rows = [e.value_n for t in tasks for s in t.train_samples() for e in s.events]
    if numeric_dims == 0 or not rows:
        return NormStats(mean=(0.0,) * numeric_dims, scale=(1.0,) * numeric_dims)
    values = np.array(rows, dtype=np.float64)
    mean = values.mean(axis=0)
    std = values.std(axis=0)
    std[std == 0] = 1.0
    return NormStats(mean=tuple(float(x) for x in mean), scale=tuple(float(x) for x in std))


def prepare_manifest(manifest: DatasetManifest, max_seq_len: int = 64) -> tuple[DatasetManifest, NormStats]:
    """Truncate episodes to their most recent events, then z-score numeric attributes.

    Statistics come from the training splits only and are applied to every split.
    """
    if max_seq_len < 1:
        raise SimtaskError("max_seq_len must be at least 1")
    truncated = [
        TaskCorpus(
            task_id=t.task_id,
            samples=tuple(truncate_episode(s, max_seq_len) for s in t.samples),
            split=t.split,
            positive_rate=t.positive_rate,
        )
        for t in manifest.tasks
    ]
    norm = fit_norm_stats(truncated, manifest.vocab.numeric_dims)
    tasks = []
    for t in truncated:
        samples = tuple(
            EpisodeSample(
                events=tuple(
                    EventRecord(e.event_type, e.value_c, norm.apply(e.value_n), e.time) for e in s.events
                ),
                label=s.label,
            )
            for s in t.samples
        )
        tasks.append(TaskCorpus(task_id=t.task_id, samples=samples, split=t.split, positive_rate=t.positive_rate))
    prepared = DatasetManifest(
        name=manifest.name,
        tasks=tuple(tasks),
        vocab=manifest.vocab,
        stats=manifest.stats,
        split_seed=manifest.split_seed,
        split_ratios=manifest.split_ratios,
    )
    return prepared, norm
