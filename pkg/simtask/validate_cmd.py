"""Validate command — check a dataset or an experiment config."""

from pathlib import Path
from typing import Annotated

import typer
import yaml

from .console import console, err_console
from .data import load_dataset
from .schema import load_experiment
from .utils import exit_on_error, print_stats


def _is_experiment(path: Path) -> bool:
    if not path.is_file() or path.suffix not in (".yaml", ".yml"):
        return False
    try:
        with open(path, encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError:
        return False
    return isinstance(data, dict) and "dataset" in data


def validate(
    source: Annotated[Path, typer.Argument(help="Dataset directory, manifest file, or experiment config YAML.")],
):
    """Validate a dataset (or experiment config) and print its statistics."""
    if not source.exists():
        err_console.print(f"[red]Error:[/] File not found: {source}")
        raise typer.Exit(1)

    if _is_experiment(source):
        with exit_on_error(source):
            cfg = load_experiment(source)
        console.print(f"[green]Valid experiment config:[/] {source} ({cfg.name}, mode {cfg.mode})")
        return

    with exit_on_error(source):
        manifest = load_dataset(source)
    console.print(f"[green]Valid:[/] {source}")
    print_stats(manifest)
