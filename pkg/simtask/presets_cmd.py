"""Presets command — list the built-in synthetic dataset presets."""

from rich.table import Table

from .console import console
from .synthetic import list_presets, load_preset


def presets():
    """List built-in synthetic presets."""
    names = list_presets()
    if not names:
        console.print("[yellow]No built-in presets found.[/]")
        return

    table = Table(title="Built-in Presets", show_lines=True)
    table.add_column("Preset", style="bold")
    table.add_column("Tasks", justify="right")
    table.add_column("Samples per task", justify="right")
    table.add_column("Regimes (positive rate × tasks)")

    for name in names:
        p = load_preset(name)
        tasks = sum(r.task_count for r in p.regimes)
        sizes = str(p.samples_min) if p.samples_min == p.samples_max else f"{p.samples_min}–{p.samples_max}"
        regimes = ", ".join(f"{r.name} {r.positive_rate:.1%} × {r.task_count}" for r in p.regimes)
        table.add_row(name, str(tasks), sizes, regimes)

    console.print(table)
    console.print("\nUsage: [bold]simtask gen-data <preset>[/]")
