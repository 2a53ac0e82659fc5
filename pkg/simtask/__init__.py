"""simtask — meta-learning across similar prediction tasks on clinical event sequences."""

from importlib.metadata import version as _get_version
from typing import Annotated, Optional

import typer


def _version_callback(value: bool):
    if value:
        print(f"simtask {_get_version('simtask')}")
        raise typer.Exit()


app = typer.Typer(
    name="simtask",
    help="Meta-learn shared initializations across similar tasks and adapt them per task.",
    no_args_is_help=True,
)


@app.callback()
def default(
    version: Annotated[
        Optional[bool],
        typer.Option("--version", "-V", help="Show version and exit.", callback=_version_callback, is_eager=True),
    ] = None,
):
    """Meta-learn shared initializations across similar tasks and adapt them per task."""


# Register commands
from .gen_data_cmd import gen_data

app.command(name="gen-data")(gen_data)

from .train_cmd import train

app.command()(train)

from .eval_cmd import eval_

app.command(name="eval")(eval_)

from .ablate_cmd import ablate

app.command()(ablate)

from .export_cmd import export

app.command(name="export-model-space")(export)

from .validate_cmd import validate

app.command()(validate)

from .init_cmd import init

app.command()(init)

from .presets_cmd import presets

app.command()(presets)
