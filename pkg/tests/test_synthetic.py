"""Tests for synthetic task generation and presets."""

import pytest
from pydantic import ValidationError

from simtask.data import regime_of, summary_stats
from simtask.schema import SyntheticConfig
from simtask.synthetic import generate_synthetic_tasks, list_presets, load_preset
from tests.conftest import TINY_SYNTHETIC


def _regime_rate(manifest, regime: int) -> float:
    labels = [s.label for t in manifest.tasks if regime_of(t.task_id) == regime for s in t.samples]
    return sum(labels) / len(labels)


def test_generation_is_deterministic(tiny_synthetic):
    a = generate_synthetic_tasks(tiny_synthetic, seed=4)
    b = generate_synthetic_tasks(tiny_synthetic, seed=4)
    assert a.task_ids == b.task_ids
    assert all(x.samples == y.samples and x.split == y.split for x, y in zip(a.tasks, b.tasks))


def test_generation_depends_on_seed(tiny_synthetic):
    a = generate_synthetic_tasks(tiny_synthetic, seed=0)
    b = generate_synthetic_tasks(tiny_synthetic, seed=1)
    assert any(x.samples != y.samples for x, y in zip(a.tasks, b.tasks))


def test_task_ids_carry_regime(tiny_manifest):
    assert tiny_manifest.task_ids == [
        "task0000-r0",
        "task0001-r0",
        "task0002-r0",
        "task0003-r1",
        "task0004-r1",
        "task0005-r1",
    ]


def test_generated_vocabulary_matches_config(tiny_manifest):
    vocab = tiny_manifest.vocab
    assert len(vocab.event_types) == 3
    assert len(vocab.categorical_values) == 2
    assert vocab.numeric_dims == 1
    for task in tiny_manifest.tasks:
        for sample in task.samples:
            for e in sample.events:
                assert 0 <= e.event_type < 3
                assert len(e.value_c) <= 1
                assert len(e.value_n) == 1


def test_two_regime_rates_are_calibrated():
    manifest = generate_synthetic_tasks(load_preset("two-regime"), seed=0)
    stats = summary_stats(manifest)
    assert stats["tasks"] == 30
    assert stats["samples"] == 1200
    low, high = _regime_rate(manifest, 0), _regime_rate(manifest, 1)
    assert low == pytest.approx(0.05, abs=0.03)
    assert high == pytest.approx(0.35, abs=0.06)
    assert low < stats["positive_rate"] < high


def test_seventy_tasks_preset_statistics():
    stats = summary_stats(generate_synthetic_tasks(load_preset("seventy-tasks"), seed=0))
    assert stats["tasks"] == 70
    assert stats["samples"] == 7000
    assert stats["positive_rate"] == pytest.approx(0.13, abs=0.03)


def test_zero_rate_regime_has_no_positives():
    data = {**TINY_SYNTHETIC, "regimes": [{"name": "none", "positive_rate": 0.0, "task_count": 2}]}
    manifest = generate_synthetic_tasks(SyntheticConfig(**data), seed=0)
    assert manifest.stats.positive_rate == 0.0


def test_split_ratios_are_applied(tiny_synthetic):
    manifest = generate_synthetic_tasks(tiny_synthetic, seed=0, split_ratios=(0.5, 0.25, 0.25))
    assert manifest.split_ratios == (0.5, 0.25, 0.25)
    assert manifest.tasks[0].split.sizes() == (10, 5, 5)


# ── Config validation ──


def test_empty_regime_list_rejected():
    with pytest.raises(ValidationError, match="regime list is empty"):
        SyntheticConfig(**{**TINY_SYNTHETIC, "regimes": []})


def test_positive_rate_out_of_range_rejected():
    bad = {**TINY_SYNTHETIC, "regimes": [{"name": "x", "positive_rate": 1.5, "task_count": 1}]}
    with pytest.raises(ValidationError, match="positive rate"):
        SyntheticConfig(**bad)


def test_type_weights_length_checked():
    bad = {**TINY_SYNTHETIC, "regimes": [{"name": "x", "positive_rate": 0.1, "task_count": 1, "type_weights": [1]}]}
    with pytest.raises(ValidationError, match="type_weights"):
        SyntheticConfig(**bad)


# ── Presets ──


def test_list_presets():
    assert {"two-regime", "seventy-tasks", "mimic-shaped"} <= set(list_presets())


def test_every_preset_loads():
    for name in list_presets():
        cfg = load_preset(name)
        assert cfg.name == name
        assert cfg.regimes


def test_mimic_shaped_task_count():
    cfg = load_preset("mimic-shaped")
    assert sum(r.task_count for r in cfg.regimes) == 858
    assert (cfg.samples_min, cfg.samples_max) == (10, 40)


def test_load_preset_from_path(tmp_path):
    import yaml

    path = tmp_path / "mine.yaml"
    path.write_text(yaml.safe_dump(TINY_SYNTHETIC))
    assert load_preset(str(path)).name == "tiny"


def test_load_preset_unknown():
    with pytest.raises(ValueError, match="Preset not found"):
        load_preset("no-such-preset")
