"""Synthetic multi-regime task collections for desk-scale experiments.

Each regime owns an event-generating process (event-type frequencies, episode
length, per-type numeric means) and a label process: the death probability is
``expit(intercept + w · features)`` where the features are the per-type event
fractions followed by the per-dimension mean numeric value of the episode. The
intercept is calibrated by root finding so the regime's expected positive rate
matches its configured rate. Task ids carry the regime index as a ``-r<id>``
suffix.
"""

from pathlib import Path
from typing import Sequence

import numpy as np
import yaml
from scipy.optimize import brentq
from scipy.special import expit

from .data import DEFAULT_RATIOS, DatasetManifest, EpisodeSample, EventRecord, TaskCorpus, Vocabulary
from .errors import SimtaskError
from .schema import RegimeConfig, SyntheticConfig

PACKAGE_DIR = Path(__file__).resolve().parent
BUILTIN_PRESETS_DIR = PACKAGE_DIR / "presets"


def _episode(
    rng: np.random.Generator, cfg: SyntheticConfig, regime: RegimeConfig, type_probs: np.ndarray, type_means: np.ndarray
) -> tuple[tuple[EventRecord, ...], np.ndarray]:
    """Draw one event sequence and return it with its label features."""
    length = max(1, int(rng.poisson(regime.mean_events)))
    types = rng.choice(cfg.n_event_types, size=length, p=type_probs)
    times = np.round(np.sort(rng.uniform(0.0, cfg.horizon_hours, size=length)), 3)
    numeric = np.round(rng.normal(type_means[types], 1.0), 4).reshape(length, cfg.n_numeric)

    events = []
    for t in range(length):
        cats: tuple[int, ...] = ()
        if cfg.n_categorical > 0 and cfg.max_categorical_per_event > 0:
            k = int(rng.integers(0, min(cfg.max_categorical_per_event, cfg.n_categorical) + 1))
            cats = tuple(sorted(int(c) for c in rng.choice(cfg.n_categorical, size=k, replace=False)))
        events.append(
            EventRecord(
                event_type=int(types[t]),
                value_c=cats,
                value_n=tuple(float(v) for v in numeric[t]),
                time=float(times[t]),
            )
        )

    fractions = np.bincount(types, minlength=cfg.n_event_types) / length
    features = np.concatenate([fractions, numeric.mean(axis=0) if cfg.n_numeric else np.zeros(0)])
    return tuple(events), features


def _calibrate_intercept(logits: np.ndarray, rate: float) -> float:
    """Intercept b with mean(expit(b + logits)) == rate."""
    return brentq(lambda b: float(np.mean(expit(b + logits))) - rate, -60.0, 60.0, xtol=1e-12)


def generate_synthetic_tasks(
    config: SyntheticConfig, seed: int = 0, split_ratios: Sequence[float] = DEFAULT_RATIOS
) -> DatasetManifest:
    """Generate tasks from every configured regime. Equal seeds give identical manifests."""
    n_features = config.n_event_types + config.n_numeric
    vocab = Vocabulary(
        event_types=tuple(f"event{i}" for i in range(config.n_event_types)),
        categorical_values=tuple(f"attr{i}" for i in range(config.n_categorical)),
        numeric_dims=config.n_numeric,
    )

    tasks: list[TaskCorpus] = []
    task_index = 0
    for r, regime in enumerate(config.regimes):
        rng = np.random.default_rng([seed, r])

        if regime.type_weights is not None:
            type_probs = np.asarray(regime.type_weights, dtype=np.float64)
            type_probs = type_probs / type_probs.sum()
        else:
            type_probs = rng.dirichlet(np.full(config.n_event_types, 2.0))
        type_means = rng.normal(0.0, 1.0, size=(config.n_event_types, config.n_numeric)) + regime.numeric_shift
        if regime.label_weights is not None:
            weights = np.asarray(regime.label_weights, dtype=np.float64)
        else:
            weights = rng.normal(0.0, regime.signal, size=n_features)

        drafts = []
        for _ in range(regime.task_count):
            n = int(rng.integers(config.samples_min, config.samples_max + 1))
            task_weights = weights + rng.normal(0.0, regime.task_jitter, size=n_features)
            episodes = [_episode(rng, config, regime, type_probs, type_means) for _ in range(n)]
            logits = np.array([task_weights @ feats for _, feats in episodes])
            drafts.append(([events for events, _ in episodes], logits))

        if regime.positive_rate in (0.0, 1.0):
            probs = [np.full(len(logits), regime.positive_rate) for _, logits in drafts]
        else:
            intercept = _calibrate_intercept(np.concatenate([lg for _, lg in drafts]), regime.positive_rate)
            probs = [expit(intercept + logits) for _, logits in drafts]

        for (episodes, _), p in zip(drafts, probs):
            labels = (rng.random(len(p)) < p).astype(int)
            samples = [EpisodeSample(events=ev, label=int(y)) for ev, y in zip(episodes, labels)]
            tasks.append(TaskCorpus.build(f"task{task_index:04d}-r{r}", samples, seed, split_ratios))
            task_index += 1

    return DatasetManifest.build(config.name, tasks, vocab, seed, split_ratios)


# ── Presets ──


def load_preset(name_or_path: str) -> SyntheticConfig:
    """Load a synthetic config by built-in preset name or by YAML file path."""
    path = Path(name_or_path)
    if path.suffix in (".yaml", ".yml") and path.exists():
        with open(path, "r", encoding="utf-8") as f:
            return SyntheticConfig(**yaml.safe_load(f))

    builtin = BUILTIN_PRESETS_DIR / f"{name_or_path}.yaml"
    if builtin.exists():
        with open(builtin, "r", encoding="utf-8") as f:
            return SyntheticConfig(**yaml.safe_load(f))

    raise SimtaskError(f"Preset not found: '{name_or_path}'. Available built-in presets: {list_presets()}")


def list_presets() -> list[str]:
    """List available built-in preset names."""
    if not BUILTIN_PRESETS_DIR.exists():
        return []
    return sorted(p.stem for p in BUILTIN_PRESETS_DIR.glob("*.yaml"))
