"""Shared paths and helpers for the commands: loading experiments, run directories, single runs."""

from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import typer
import yaml
from pydantic import ValidationError
from rich.progress import BarColumn, MofNCompleteColumn, Progress, TextColumn, TimeElapsedColumn
from rich.table import Table

from .checkpoint import TrainingLog, load_checkpoint, save_checkpoint
from .console import console, err_console
from .data import DatasetManifest, load_dataset, prepare_manifest, summary_stats
from .errors import SimtaskError
from .metatrain import EpochRecord, MetaState, evaluate, train, train_pooled
from .metrics import MetricsReport
from .model import ParamVector, load_params, save_params
from .schema import ExperimentConfig, ModelConfig, dump_experiment, load_experiment
from .similarity import NeighborhoodAssignment, export_model_space
from .synthetic import generate_synthetic_tasks, load_preset

# ── Paths ──
PACKAGE_DIR = Path(__file__).resolve().parent
TEMPLATES_DIR = PACKAGE_DIR / "templates"

CONFIG_FILE = "config.yaml"
CHECKPOINT_FILE = "checkpoint.json"
PARAMS_FILE = "params.json"
LOG_FILE = "train_log.jsonl"
REPORT_FILE = "report.yaml"
MODEL_SPACE_FILE = "model_space.jsonl"


# ── Errors ──


def print_validation_error(e: ValidationError, source: Optional[Path] = None):
    where = f" in {source}" if source is not None else ""
    err_console.print(f"[red]Validation errors{where}:[/]\n")
    for err in e.errors():
        loc = " -> ".join(str(x) for x in err["loc"])
        err_console.print(f"  [yellow]{loc}[/]: {err['msg']}")


@contextmanager
def exit_on_error(source: Optional[Path] = None):
    """Turn library errors into a printed message and exit status 1."""
    try:
        yield
    except ValidationError as e:
        print_validation_error(e, source)
        raise typer.Exit(1)
    except SimtaskError as e:
        err_console.print(f"[red]Error:[/] {e}")
        raise typer.Exit(1)
    except OSError as e:
        err_console.print(f"[red]Error:[/] {e.strerror or e}: {e.filename or ''}")
        raise typer.Exit(1)


# ── Datasets ──


def manifest_for(cfg: ExperimentConfig) -> DatasetManifest:
    """Load or generate the experiment's dataset (before preprocessing).

    Generated datasets are split with the experiment's ratios; dataset files
    keep the ratios recorded in their manifest.
    """
    source = cfg.dataset
    if source.path is not None:
        return load_dataset(Path(source.path))
    synthetic = source.synthetic if source.synthetic is not None else load_preset(source.preset)
    return generate_synthetic_tasks(synthetic, source.seed, cfg.split_ratios)


def model_config_for(cfg: ExperimentConfig, manifest: DatasetManifest) -> ModelConfig:
    vocab = manifest.vocab
    return cfg.model.for_vocabulary(len(vocab.event_types), len(vocab.categorical_values), vocab.numeric_dims)


def print_stats(manifest: DatasetManifest, title: Optional[str] = None):
    stats = summary_stats(manifest)
    table = Table(title=title or f"Dataset: {manifest.name}", show_header=False)
    table.add_column("Statistic", style="cyan")
    table.add_column("Value", justify="right", style="green")
    table.add_row("# of tasks", str(stats["tasks"]))
    table.add_row("# of samples", str(stats["samples"]))
    table.add_row("Positive rate", f"{stats['positive_rate']:.2%}")
    table.add_row("Max # of samples per task", str(stats["max_samples_per_task"]))
    table.add_row("Min # of samples per task", str(stats["min_samples_per_task"]))
    table.add_row("Mean # of samples per task", f"{stats['mean_samples_per_task']:.2f}")
    console.print(table)


# ── Runs ──


def run_label(cfg: ExperimentConfig) -> str:
    return "pooled" if cfg.mode == "pooled" else cfg.train.similarity.strategy


def run_dir_for(root: Path, cfg: ExperimentConfig, seed: int) -> Path:
    return Path(root) / cfg.name / run_label(cfg) / f"seed{seed}"


def for_seed(cfg: ExperimentConfig, seed: int) -> ExperimentConfig:
    """Single-seed copy of an experiment config."""
    data = cfg.model_dump()
    data["seeds"] = [seed]
    data["train"]["seed"] = seed
    return ExperimentConfig(**data)


def final_params(state: MetaState):
    return dict(state.task_params) if state.task_params else state.theta


def write_report(report: MetricsReport, path: Path):
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(report.to_dict(), f, sort_keys=False)


def print_report(report: MetricsReport, title: str):
    table = Table(title=title)
    table.add_column("Metric", style="cyan")
    table.add_column("Micro", justify="right", style="green")
    table.add_column("Macro", justify="right")
    table.add_row("AUC", f"{report.micro_auc:.4f}", _fmt(report.macro_auc))
    table.add_row("AP", f"{report.micro_ap:.4f}", _fmt(report.macro_ap))
    console.print(table)
    defined = sum(1 for m in report.per_task.values() if m.defined)
    console.print(f"[dim]{defined} of {len(report.per_task)} tasks have both classes in this split.[/]")


def _fmt(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.4f}"


def mean_std(values: list[float]) -> str:
    """``mean (std)`` with the sample standard deviation across seeds."""
    arr = np.asarray(values, dtype=np.float64)
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return f"{arr.mean():.4f} ({std:.4f})"


@dataclass
class _EpochProgress:
    progress: Progress
    task_id: int

    def update(self, record: EpochRecord):
        auc = "-" if record.val_auc is None else f"{record.val_auc:.4f}"
        status = f"loss {record.meta_loss:.4f}  val AUC {auc}"
        self.progress.update(self.task_id, completed=record.epoch + 1, status=status)


def _progress(show: bool) -> Progress:
    return Progress(
        TextColumn("[bold]{task.description}"),
        BarColumn(),
        MofNCompleteColumn(),
        TextColumn("{task.fields[status]}"),
        TimeElapsedColumn(),
        console=console,
        disable=not show,
    )


def run_experiment(
    cfg: ExperimentConfig,
    run_dir: Path,
    *,
    resume: bool = False,
    trace_model_space: bool = False,
    show_progress: bool = True,
) -> MetricsReport:
    """Train one single-seed experiment into ``run_dir`` and score the test split.

    Writes the resolved config, the checkpoint (or parameter file for the pooled
    baseline), the JSON-lines training log and the test report.
    """
    manifest, _ = prepare_manifest(manifest_for(cfg), cfg.max_seq_len)
    model = model_config_for(cfg, manifest)
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / CONFIG_FILE).write_text(dump_experiment(cfg), encoding="utf-8")

    ckpt_path = run_dir / CHECKPOINT_FILE
    state = load_checkpoint(ckpt_path, model) if resume and cfg.mode == "meta" else None
    log = TrainingLog(run_dir / LOG_FILE, append=resume)
    trace_path = run_dir / MODEL_SPACE_FILE
    if trace_model_space and not resume and trace_path.exists():
        trace_path.unlink()

    with _progress(show_progress) as progress:
        task_id = progress.add_task(
            f"{cfg.name} {run_label(cfg)} seed {cfg.train.seed}",
            total=cfg.train.max_epochs,
            completed=state.epoch if state is not None else 0,
            status="",
        )
        bar = _EpochProgress(progress, task_id)

        if cfg.mode == "pooled":

            def on_pooled_epoch(record: EpochRecord, theta: ParamVector):
                log.write(record)
                bar.update(record)

            theta = train_pooled(manifest, cfg.train, model, callback=on_pooled_epoch)
            save_params(theta, run_dir / PARAMS_FILE)
            report = evaluate(theta, manifest.tasks, "test")
        else:

            def on_epoch(live: MetaState, assignment: NeighborhoodAssignment):
                save_checkpoint(live, ckpt_path)
                log.write(live.history[-1])
                if trace_model_space:
                    export_model_space(
                        trace_path, live.theta, live.task_params, manifest.tasks, assignment, append=True
                    )
                bar.update(live.history[-1])

            state = train(manifest, cfg.train, model, state=state, callback=on_epoch)
            save_checkpoint(state, ckpt_path)
            report = evaluate(final_params(state), manifest.tasks, "test")

    write_report(report, run_dir / REPORT_FILE)
    return report


def load_run(run_dir: Path) -> tuple[ExperimentConfig, DatasetManifest, ModelConfig]:
    """Config, preprocessed dataset and model config of an existing run directory."""
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise SimtaskError(f"run directory not found: {run_dir}")
    cfg = load_experiment(run_dir / CONFIG_FILE)
    manifest, _ = prepare_manifest(manifest_for(cfg), cfg.max_seq_len)
    return cfg, manifest, model_config_for(cfg, manifest)


def run_params(run_dir: Path, model: ModelConfig):
    """The parameters a run is scored with: per-task vectors from a checkpoint, or the pooled vector."""
    run_dir = Path(run_dir)
    if (run_dir / CHECKPOINT_FILE).exists():
        return final_params(load_checkpoint(run_dir / CHECKPOINT_FILE, model))
    if (run_dir / PARAMS_FILE).exists():
        return load_params(run_dir / PARAMS_FILE, model)
    raise SimtaskError(f"no {CHECKPOINT_FILE} or {PARAMS_FILE} in {run_dir}")
