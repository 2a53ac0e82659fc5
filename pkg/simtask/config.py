"""User defaults file support for simtask (.simtaskrc.yaml)."""

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import yaml

CONFIG_FILENAME = ".simtaskrc.yaml"
OUTPUT_DIR_ENV = "SIMTASK_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = Path("runs")

VALID_KEYS = {"output_dir", "jobs", "seed"}


@dataclass
class SimtaskConfig:
    """Resolved defaults from .simtaskrc.yaml files and the environment."""

    output_dir: Optional[str] = None
    jobs: Optional[int] = None
    seed: Optional[int] = None


def _load_yaml_config(path: Path) -> dict:
    """Load a single .simtaskrc.yaml file, returning an empty dict if missing or invalid."""
    if not path.exists():
        return {}
    try:
        with open(path, encoding="utf-8") as f:
            data = yaml.safe_load(f)
        if not isinstance(data, dict):
            return {}
        return {k: v for k, v in data.items() if k in VALID_KEYS}
    except Exception:
        return {}


def load_config() -> SimtaskConfig:
    """Load and merge user defaults.

    Resolution order (later overrides earlier):
    1. ~/.simtaskrc.yaml  (user-level defaults)
    2. ./.simtaskrc.yaml  (project-level overrides)
    3. SIMTASK_OUTPUT_DIR  (output root only)
    """
    merged = {}
    merged.update(_load_yaml_config(Path.home() / CONFIG_FILENAME))
    merged.update(_load_yaml_config(Path.cwd() / CONFIG_FILENAME))

    env_output = os.environ.get(OUTPUT_DIR_ENV)
    if env_output:
        merged["output_dir"] = env_output

    return SimtaskConfig(**merged)


def resolve(cli_value, config_value, default):
    """Three-way merge: CLI (if not None) > config > hardcoded default."""
    if cli_value is not None:
        return cli_value
    if config_value is not None:
        return config_value
    return default
