"""Gen-data command — write a synthetic multi-task dataset."""

from pathlib import Path
from typing import Annotated, Optional

import typer

from .config import load_config, resolve
from .console import console
from .data import save_dataset
from .synthetic import generate_synthetic_tasks, load_preset
from .utils import exit_on_error, print_stats


def gen_data(
    preset: Annotated[
        str, typer.Argument(help="Built-in preset name (see 'simtask presets') or path to a synthetic config YAML.")
    ] = "two-regime",
    out: Annotated[
        Optional[Path], typer.Option("--out", "-o", help="Output directory. Defaults to data/<preset name>.")
    ] = None,
    seed: Annotated[Optional[int], typer.Option(help="Generation and split seed.")] = None,
):
    """Generate a synthetic dataset and print its statistics."""
    cfg = load_config()
    seed = resolve(seed, cfg.seed, 0)

    with exit_on_error():
        synthetic = load_preset(preset)
        manifest = generate_synthetic_tasks(synthetic, seed)
        out = out or Path("data") / synthetic.name
        manifest_path = save_dataset(manifest, out)

    print_stats(manifest)
    console.print(f"[green]Wrote:[/] {manifest_path}")
