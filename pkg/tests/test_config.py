"""Tests for user defaults files and experiment config loading."""

from pathlib import Path

import pytest
import yaml
from pydantic import ValidationError

from simtask.config import SimtaskConfig, _load_yaml_config, load_config, resolve
from simtask.errors import SimtaskError
from simtask.schema import ExperimentConfig, TrainConfig, dump_experiment, load_experiment


def test_resolve_cli_overrides_config():
    assert resolve(3, 1, 0) == 3


def test_resolve_config_overrides_default():
    assert resolve(None, "runs-a", "runs") == "runs-a"


def test_resolve_falls_back_to_default():
    assert resolve(None, None, 4) == 4


def test_resolve_cli_zero_overrides_config():
    """Explicit 0 from CLI should override the config value."""
    assert resolve(0, 7, 1) == 0


def test_load_yaml_config_missing_file(tmp_path):
    assert _load_yaml_config(tmp_path / "nonexistent.yaml") == {}


def test_load_yaml_config_ignores_unknown_keys(tmp_path):
    config_file = tmp_path / ".simtaskrc.yaml"
    config_file.write_text("jobs: 4\nunknown_key: value\n")
    assert _load_yaml_config(config_file) == {"jobs": 4}


def test_load_yaml_config_handles_invalid_yaml(tmp_path):
    config_file = tmp_path / ".simtaskrc.yaml"
    config_file.write_text(": invalid: yaml: [[[")
    assert _load_yaml_config(config_file) == {}


def test_load_yaml_config_handles_non_dict(tmp_path):
    config_file = tmp_path / ".simtaskrc.yaml"
    config_file.write_text("- list\n- not\n- dict\n")
    assert _load_yaml_config(config_file) == {}


def test_load_config_project_overrides_home(monkeypatch, tmp_path):
    home_dir = tmp_path / "home"
    home_dir.mkdir()
    (home_dir / ".simtaskrc.yaml").write_text("jobs: 2\nseed: 1\n")

    project_dir = tmp_path / "project"
    project_dir.mkdir()
    (project_dir / ".simtaskrc.yaml").write_text("seed: 5\n")

    monkeypatch.setattr(Path, "home", staticmethod(lambda: home_dir))
    monkeypatch.chdir(project_dir)
    monkeypatch.delenv("SIMTASK_OUTPUT_DIR", raising=False)

    cfg = load_config()
    assert cfg.jobs == 2  # from home
    assert cfg.seed == 5  # project overrides home
    assert cfg.output_dir is None


def test_load_config_env_sets_output_dir(monkeypatch, tmp_path):
    monkeypatch.setattr(Path, "home", staticmethod(lambda: tmp_path))
    monkeypatch.chdir(tmp_path)
    (tmp_path / ".simtaskrc.yaml").write_text("output_dir: from-file\n")
    monkeypatch.setenv("SIMTASK_OUTPUT_DIR", "/tmp/from-env")
    assert load_config().output_dir == "/tmp/from-env"


def test_simtask_config_defaults():
    cfg = SimtaskConfig()
    assert cfg.output_dir is None
    assert cfg.jobs is None


# ── Experiment configs ──


def test_train_config_defaults():
    cfg = TrainConfig()
    assert (cfg.alpha, cfg.beta) == (0.0005, 0.001)
    assert cfg.similarity.strategy == "cosine"
    assert cfg.similarity.eta == 0.7
    assert cfg.early_stop_patience == 10


def test_eta_out_of_range_rejected():
    with pytest.raises(ValidationError, match="eta"):
        TrainConfig(similarity={"eta": -1.0})


def test_experiment_rejects_unknown_keys():
    with pytest.raises(ValidationError, match="Extra inputs"):
        ExperimentConfig(dataset={"preset": "two-regime"}, learning_rate=0.1)


def test_dataset_source_needs_exactly_one():
    with pytest.raises(ValidationError, match="exactly one"):
        ExperimentConfig(dataset={"preset": "two-regime", "path": "data"})


def test_seed_list_must_not_be_empty():
    with pytest.raises(ValidationError):
        ExperimentConfig(dataset={"preset": "two-regime"}, seeds=[])


def test_load_experiment_resolves_dataset_path(tmp_path):
    (tmp_path / "data").mkdir()
    path = tmp_path / "exp.yaml"
    path.write_text(yaml.safe_dump({"dataset": {"path": "data"}}))
    cfg = load_experiment(path)
    assert Path(cfg.dataset.path) == (tmp_path / "data").resolve()


def test_load_experiment_missing_dataset_path(tmp_path):
    path = tmp_path / "exp.yaml"
    path.write_text(yaml.safe_dump({"dataset": {"path": "nowhere"}}))
    with pytest.raises(SimtaskError, match="does not exist"):
        load_experiment(path)


def test_dump_experiment_fills_every_default(tmp_path):
    cfg = ExperimentConfig(dataset={"preset": "two-regime"})
    data = yaml.safe_load(dump_experiment(cfg))
    assert data["train"]["similarity"]["eta"] == 0.7
    assert data["max_seq_len"] == 64
    assert ExperimentConfig(**data) == cfg
