"""Tests for init command."""

import yaml

from simtask.init_cmd import init
from simtask.schema import ExperimentConfig
from simtask.utils import TEMPLATES_DIR


def test_templates_dir_exists():
    assert TEMPLATES_DIR.exists()
    assert (TEMPLATES_DIR / "experiment.example.yaml").exists()


def test_example_template_is_a_valid_experiment():
    with open(TEMPLATES_DIR / "experiment.example.yaml", encoding="utf-8") as f:
        cfg = ExperimentConfig(**yaml.safe_load(f))
    assert cfg.train.similarity.strategy in ("cosine", "knn", "static", "identity")


def test_init_creates_experiment(tmp_path):
    """init scaffolds experiment.yaml and .gitignore."""
    target = tmp_path / "exp"
    init(directory=target)

    assert (target / "experiment.yaml").exists()
    gitignore = (target / ".gitignore").read_text()
    assert "runs/" in gitignore


def test_init_does_not_overwrite_existing(tmp_path):
    """init skips experiment.yaml if it already exists."""
    target = tmp_path / "exp"
    target.mkdir()
    existing = target / "experiment.yaml"
    existing.write_text("name: mine\n")

    init(directory=target)

    assert existing.read_text() == "name: mine\n"
