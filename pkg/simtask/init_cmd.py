"""Init command — scaffold a new experiment directory."""

import shutil
from pathlib import Path
from typing import Annotated, Optional

import typer

from .console import console
from .utils import TEMPLATES_DIR


def init(
    directory: Annotated[
        Optional[Path],
        typer.Argument(help="Directory to initialize. Defaults to current directory."),
    ] = None,
):
    """Scaffold an experiment directory with an example config."""
    target = (directory or Path.cwd()).resolve()
    target.mkdir(parents=True, exist_ok=True)

    example_src = TEMPLATES_DIR / "experiment.example.yaml"
    dest = target / "experiment.yaml"
    if dest.exists():
        console.print(f"[yellow]Skipping:[/] {dest} already exists.")
    else:
        shutil.copy2(str(example_src), str(dest))
        console.print(f"[green]Created:[/] {dest}")

    gitignore = target / ".gitignore"
    if not gitignore.exists():
        gitignore.write_text("runs/\ndata/\n.venv/\n__pycache__/\n*.pyc\n")
        console.print(f"[green]Created:[/] {gitignore}")

    console.print(f"\n[bold]Experiment ready at {target}[/]")
    console.print("Next steps:")
    console.print("  1. Edit [cyan]experiment.yaml[/] (dataset, strategy, seeds)")
    console.print("  2. Run: [bold]simtask train experiment.yaml[/]")
    console.print("  3. Compare strategies: [bold]simtask ablate experiment.yaml[/]")
