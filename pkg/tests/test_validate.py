"""Tests for validate command."""

import pytest
import typer
import yaml

from simtask.data import save_dataset
from simtask.validate_cmd import validate


def test_validate_dataset(tmp_path, tiny_manifest, capsys):
    save_dataset(tiny_manifest, tmp_path / "ds")
    validate(tmp_path / "ds")
    out = capsys.readouterr().out
    assert "Valid" in out
    assert "# of tasks" in out


def test_validate_experiment_config(tiny_experiment, capsys):
    validate(tiny_experiment)
    assert "Valid experiment config" in capsys.readouterr().out


def test_validate_missing_source(tmp_path):
    with pytest.raises(typer.Exit) as exc:
        validate(tmp_path / "missing")
    assert exc.value.exit_code == 1


def test_validate_bad_experiment_exits(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump({"dataset": {"preset": "two-regime"}, "train": {"alpha": -1}}))
    with pytest.raises(typer.Exit) as exc:
        validate(path)
    assert exc.value.exit_code == 1


def test_validate_broken_dataset_exits(tmp_path, tiny_manifest):
    manifest_path = save_dataset(tiny_manifest, tmp_path / "ds")
    record = next((tmp_path / "ds").rglob("*.jsonl"))
    record.write_text("not json\n")
    with pytest.raises(typer.Exit):
        validate(manifest_path)
