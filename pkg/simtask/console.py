"""Shared Rich console for consistent styled output."""

from rich.console import Console

console = Console()
err_console = Console(stderr=True)


def warn(message: str):
    """Print a warning line to stderr."""
    err_console.print(f"[yellow]Warning:[/] {message}")
