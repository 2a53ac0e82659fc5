"""Exception hierarchy. Library code raises these; CLI commands turn them into exit codes."""

from pathlib import Path
from typing import Optional


class SimtaskError(ValueError):
    """Base class for all simtask errors."""


class DatasetError(SimtaskError):
    """A dataset file is missing, malformed, or violates an invariant."""

    def __init__(self, message: str, path: Optional[Path] = None, line: Optional[int] = None, field: str = ""):
        self.path = path
        self.line = line
        self.field = field
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        if field:
            where += f"[{field}] "
        super().__init__(f"{where}{message}")


class NonFiniteError(SimtaskError):
    """A loss, gradient, or parameter block became NaN or infinite."""

    def __init__(self, block: str, epoch: Optional[int] = None):
        self.block = block
        self.epoch = epoch
        msg = f"non-finite values in '{block}'"
        if epoch is not None:
            msg += f" at epoch {epoch}"
        super().__init__(msg)


class CheckpointError(SimtaskError):
    """A checkpoint or parameter file is missing or does not match the model config."""


class MetricError(SimtaskError):
    """A metric is undefined for its input (single class, no positives, length mismatch)."""
