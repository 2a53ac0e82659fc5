"""Tests for model-space similarity and neighborhoods."""

import json
import math

import numpy as np
import pytest

from simtask.errors import SimtaskError
from simtask.schema import SimilarityConfig
from simtask.similarity import (
    NeighborhoodAssignment,
    cos_delta,
    export_model_space,
    measure_neighborhoods,
    neighborhood_cosine,
    neighborhood_identity,
    neighborhood_knn,
    neighborhood_static,
)
from tests.conftest import make_task, vector

ORIGIN = vector(0.0, 0.0)


def _thetas(**deltas):
    return {name: vector(*d) for name, d in deltas.items()}


# ── cos_delta ──


def test_cos_delta_identical_directions():
    assert cos_delta(vector(1, 0), vector(1, 0), ORIGIN) == 1.0


def test_cos_delta_orthogonal():
    assert cos_delta(vector(1, 0), vector(0, 1), ORIGIN) == 0.0


def test_cos_delta_closed_form_angle():
    assert cos_delta(vector(1, 0), vector(1, 1), ORIGIN) == pytest.approx(math.sqrt(2) / 2, abs=1e-12)


def test_cos_delta_measures_deltas_from_theta():
    theta = vector(2, 3)
    assert cos_delta(vector(3, 3), vector(2, 5), theta) == 0.0


def test_cos_delta_zero_delta_is_zero():
    assert cos_delta(vector(0, 0), vector(1, 0), ORIGIN) == 0.0


def test_cos_delta_layout_mismatch():
    with pytest.raises(SimtaskError, match="layouts"):
        cos_delta(vector(1, 0, 0), vector(1, 0), ORIGIN)


# ── Strategies ──


def test_cosine_worked_example():
    a = neighborhood_cosine(_thetas(A=(1, 0), B=(1, 0.5), C=(0, 1)), ORIGIN, 0.7)
    assert a.of("A") == {"A", "B"}
    assert a.of("B") == {"A", "B"}
    assert a.of("C") == {"C"}


def test_cosine_eta_one_gives_singletons():
    a = neighborhood_cosine(_thetas(A=(1, 0), B=(1, 0), C=(2, 0)), ORIGIN, 1.0)
    assert all(a.of(t) == {t} for t in "ABC")


def test_cosine_identical_deltas_give_full_sets():
    a = neighborhood_cosine(_thetas(A=(1, 2), B=(1, 2), C=(1, 2)), ORIGIN, 0.7)
    assert all(a.of(t) == {"A", "B", "C"} for t in "ABC")


def test_cosine_zero_delta_task_is_isolated():
    a = neighborhood_cosine(_thetas(A=(0, 0), B=(1, 0), C=(1, 0)), ORIGIN, -0.5)
    assert a.of("A") == {"A"}
    assert a.of("B") == {"B", "C"}


def test_knn_k_equal_to_task_count_gives_all():
    a = neighborhood_knn(_thetas(A=(1, 0), B=(0, 1), C=(-1, 0)), ORIGIN, 3)
    assert all(a.of(t) == {"A", "B", "C"} for t in "ABC")


def test_knn_worked_example():
    a = neighborhood_knn(_thetas(A=(1, 0), B=(0.9, 0.1), C=(-1, 0)), ORIGIN, 1)
    assert a.of("A") == {"A", "B"}


def test_knn_tie_goes_to_lower_id():
    a = neighborhood_knn(_thetas(A=(1, 0), C=(0, 1), B=(0, -1)), ORIGIN, 1)
    assert a.of("A") == {"A", "B"}


def test_knn_may_be_asymmetric():
    a = neighborhood_knn(_thetas(A=(1, 0), B=(1, 0.2), C=(1, 0.5)), ORIGIN, 1)
    assert "B" in a.of("C")
    assert "C" not in a.of("B")


def test_knn_k_out_of_range():
    with pytest.raises(SimtaskError, match="k must lie"):
        neighborhood_knn(_thetas(A=(1, 0), B=(0, 1)), ORIGIN, 3)


def _rate_tasks(*rates):
    # 10 samples each, positives = rate·10
    return [make_task(f"t{i}", n=10, positives=round(r * 10)) for i, r in enumerate(rates)]


def test_static_groups_close_rates():
    tasks = _rate_tasks(0.1, 0.2, 0.5)
    a = neighborhood_static(tasks, 0.1 + 1e-9)
    assert a.of("t0") == {"t0", "t1"}
    assert a.of("t2") == {"t2"}


def test_static_zero_tolerance_groups_equal_rates():
    a = neighborhood_static(_rate_tasks(0.3, 0.3, 0.4), 0.0)
    assert a.of("t0") == {"t0", "t1"}
    assert a.of("t2") == {"t2"}


def test_static_tolerance_one_groups_everything():
    a = neighborhood_static(_rate_tasks(0.1, 0.3, 0.9), 1.0)
    assert all(len(m) == 3 for m in a.neighbors.values())


def test_identity_is_singletons():
    a = neighborhood_identity(["x", "y", "z"])
    assert a.neighbors == {"x": {"x"}, "y": {"y"}, "z": {"z"}}
    assert a.mean_size == 1.0


def test_assignment_requires_self_inclusion():
    with pytest.raises(SimtaskError, match="itself"):
        NeighborhoodAssignment(epoch=0, strategy="cosine", neighbors={"a": frozenset(["b"]), "b": frozenset(["b"])})


# ── Randomized properties ──


def test_similarity_properties_randomized():
    rng = np.random.default_rng(0)
    for _ in range(100):
        m = int(rng.integers(2, 7))
        theta = vector(*rng.normal(size=5))
        thetas = {f"t{i}": vector(*(theta.values + rng.normal(size=5))) for i in range(m)}
        ids = sorted(thetas)

        for i in ids:
            for j in ids:
                assert cos_delta(thetas[i], thetas[j], theta) == cos_delta(thetas[j], thetas[i], theta)

        eta_low, eta_high = sorted(rng.uniform(-0.9, 1.0, size=2))
        low = neighborhood_cosine(thetas, theta, eta_low)
        high = neighborhood_cosine(thetas, theta, eta_high)
        for t in ids:
            assert t in low.of(t) and t in high.of(t)
            assert high.of(t) <= low.of(t)
            assert all(t in low.of(u) for u in low.of(t))

        scaled = dict(thetas)
        pick = ids[int(rng.integers(m))]
        c = float(rng.uniform(0.1, 10.0))
        scaled[pick] = theta.with_values(theta.values + c * (thetas[pick].values - theta.values))
        for t in ids:
            if t != pick:
                assert cos_delta(scaled[pick], scaled[t], theta) == pytest.approx(
                    cos_delta(thetas[pick], thetas[t], theta), abs=1e-12
                )
        assert neighborhood_cosine(scaled, theta, eta_low).neighbors == low.neighbors

        knn = neighborhood_knn(thetas, theta, int(rng.integers(1, m + 1)))
        assert all(t in knn.of(t) for t in ids)


# ── measure_neighborhoods / export ──


def test_measure_falls_back_to_identity_at_epoch_zero():
    tasks = [make_task("a"), make_task("b")]
    theta = vector(0.0, 0.0)
    params = {"a": vector(1.0, 0.0), "b": vector(1.0, 0.0)}
    cfg = SimilarityConfig(strategy="cosine", eta=0.5)
    assert measure_neighborhoods(cfg, tasks, theta, params, epoch=0).of("a") == {"a"}
    assert measure_neighborhoods(cfg, tasks, theta, params, epoch=1).of("a") == {"a", "b"}


def test_measure_static_ignores_parameters():
    tasks = [make_task("a", positives=3), make_task("b", positives=3)]
    cfg = SimilarityConfig(strategy="static", static_tolerance=0.0)
    a = measure_neighborhoods(cfg, tasks, vector(0.0, 0.0), None, epoch=0)
    assert a.strategy == "static"
    assert a.of("a") == {"a", "b"}


def test_export_model_space_records(tmp_path):
    tasks = [make_task("task0000-r0"), make_task("task0001-r1"), make_task("plain")]
    theta = vector(0.0, 0.0)
    params = {"task0000-r0": vector(1.0, 0.0), "task0001-r1": vector(0.9, 0.1), "plain": vector(0.0, 0.0)}
    assignment = neighborhood_cosine(params, theta, 0.7, epoch=3)
    out = tmp_path / "space.jsonl"

    assert export_model_space(out, theta, params, tasks, assignment) == 3
    records = [json.loads(line) for line in out.read_text().splitlines()]
    assert [r["task_id"] for r in records] == ["task0000-r0", "task0001-r1", "plain"]
    assert records[0]["regime"] == 0 and records[1]["regime"] == 1 and records[2]["regime"] is None
    assert records[0]["neighbors"] == ["task0000-r0", "task0001-r1"]
    assert records[0]["delta"] == [1.0, 0.0]
    assert records[2]["isolated"] is True and records[0]["isolated"] is False
    assert all(r["epoch"] == 3 for r in records)

    export_model_space(out, theta, params, tasks, assignment, append=True)
    assert len(out.read_text().splitlines()) == 6
