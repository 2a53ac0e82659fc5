"""Eval command — re-score a finished run on one split."""

from pathlib import Path
from typing import Annotated, Optional

import typer

from .console import console
from .metatrain import evaluate
from .utils import exit_on_error, load_run, print_report, run_params, write_report


def eval_(
    run_dir: Annotated[Path, typer.Argument(help="Run directory written by 'simtask train'.")],
    split: Annotated[str, typer.Option(help="Split to score: valid or test.")] = "test",
    out: Annotated[Optional[Path], typer.Option("--out", "-o", help="Also write the report as YAML.")] = None,
):
    """Score a trained run's models on the validation or test split."""
    with exit_on_error(run_dir):
        _, manifest, model = load_run(run_dir)
        report = evaluate(run_params(run_dir, model), manifest.tasks, split)
        if out is not None:
            write_report(report, out)

    print_report(report, f"{split.capitalize()} metrics — {run_dir}")
    if out is not None:
        console.print(f"[green]Wrote:[/] {out}")
