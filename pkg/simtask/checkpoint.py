"""Checkpoint files and the per-epoch training log.

A checkpoint is a JSON document holding the shared parameters with their
layout, every task's parameters, the best validation parameters, the optimizer
state and the epoch history. Parameter values are base64-encoded float64, so
equal states give byte-identical files.
"""

import json
from pathlib import Path
from typing import Optional

from .errors import CheckpointError
from .metatrain import EpochRecord, MetaState
from .model import ParamVector, decode_values, encode_values, params_from_dict, params_to_dict
from .schema import ModelConfig

CHECKPOINT_FORMAT = "simtask-checkpoint/1"


def state_to_dict(state: MetaState) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "config_hash": state.theta.layout.config_hash,
        "epoch": state.epoch,
        "finished": state.finished,
        "best_score": state.best_score,
        "stale_epochs": state.stale_epochs,
        "theta": params_to_dict(state.theta),
        "best_theta": encode_values(state.best_theta.values) if state.best_theta is not None else None,
        "task_params": {task_id: encode_values(p.values) for task_id, p in sorted(state.task_params.items())},
        "optimizer_state": dict(state.optimizer_state),
        "meta_losses": list(state.meta_losses),
        "history": [r.to_dict() for r in state.history],
    }


def state_from_dict(data: dict, config: Optional[ModelConfig] = None) -> MetaState:
    if data.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"unsupported checkpoint format: {data.get('format')!r}")
    try:
        theta = params_from_dict(data["theta"], config)

        def restore(text: str) -> ParamVector:
            return theta.with_values(decode_values(text))

        return MetaState(
            theta=theta,
            task_params={task_id: restore(v) for task_id, v in data["task_params"].items()},
            epoch=int(data["epoch"]),
            best_theta=restore(data["best_theta"]) if data.get("best_theta") else None,
            best_score=data.get("best_score"),
            stale_epochs=int(data.get("stale_epochs", 0)),
            history=tuple(EpochRecord(**r) for r in data.get("history", [])),
            meta_losses=tuple(float(x) for x in data.get("meta_losses", [])),
            optimizer_state=data.get("optimizer_state") or {},
            finished=bool(data.get("finished", False)),
        )
    except (KeyError, TypeError) as e:
        raise CheckpointError(f"checkpoint is missing or has a malformed entry: {e}") from None


def save_checkpoint(state: MetaState, path: Path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as f:
        json.dump(state_to_dict(state), f, indent=1)
        f.write("\n")
    tmp.replace(path)


def load_checkpoint(path: Path, config: Optional[ModelConfig] = None) -> MetaState:
    """Load a checkpoint; with a config, its hash must match the one the checkpoint was written for."""
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    with open(path, encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise CheckpointError(f"{path}: invalid JSON: {e.msg}") from None
    return state_from_dict(data, config)


class TrainingLog:
    """Append-only JSON-lines log, one record per epoch."""

    def __init__(self, path: Path, append: bool = False):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if not append:
            self.path.write_text("", encoding="utf-8")

    def write(self, record: EpochRecord):
        with open(self.path, "a", encoding="utf-8") as f:
            f.write(json.dumps(record.to_dict(), separators=(",", ":")) + "\n")


def read_log(path: Path) -> list[EpochRecord]:
    with open(path, encoding="utf-8") as f:
        return [EpochRecord(**json.loads(line)) for line in f if line.strip()]
