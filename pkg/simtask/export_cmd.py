"""Export-model-space command — dump per-task deltas for external projection."""

from pathlib import Path
from typing import Annotated, Optional

import typer

from .checkpoint import load_checkpoint
from .console import console
from .similarity import export_model_space, measure_neighborhoods
from .utils import CHECKPOINT_FILE, MODEL_SPACE_FILE, exit_on_error, load_run


def export(
    run_dir: Annotated[Path, typer.Argument(help="Run directory holding a meta-training checkpoint.")],
    out: Annotated[
        Optional[Path], typer.Option("--out", "-o", help="Output JSON-lines file. Defaults to <run>/model_space.jsonl.")
    ] = None,
):
    """Write each task's delta, positive rate and neighbors as JSON lines."""
    out = out or run_dir / MODEL_SPACE_FILE
    with exit_on_error(run_dir):
        cfg, manifest, model = load_run(run_dir)
        state = load_checkpoint(run_dir / CHECKPOINT_FILE, model)
        assignment = measure_neighborhoods(
            cfg.train.similarity, manifest.tasks, state.theta, state.task_params, state.epoch
        )
        count = export_model_space(out, state.theta, state.task_params, manifest.tasks, assignment)

    isolated = sum(1 for task_id in manifest.task_ids if assignment.of(task_id) == frozenset([task_id]))
    console.print(f"[green]Wrote {count} task records to:[/] {out}")
    console.print(f"[dim]{isolated} tasks have no neighbors besides themselves (strategy {assignment.strategy}).[/]")
