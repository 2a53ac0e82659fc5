"""Train command — run one experiment for every configured seed."""

from pathlib import Path
from typing import Annotated, Optional

import typer

from .config import DEFAULT_OUTPUT_DIR, load_config, resolve
from .console import console, err_console
from .schema import ExperimentConfig, load_experiment
from .utils import exit_on_error, for_seed, mean_std, print_report, run_dir_for, run_experiment


def apply_overrides(cfg: ExperimentConfig, **overrides) -> ExperimentConfig:
    """Re-validate an experiment config with command-line values (None = keep)."""
    data = cfg.model_dump()
    train = data["train"]
    similarity = train["similarity"]
    for key, value in overrides.items():
        if value is None:
            continue
        if key in ("strategy", "eta", "k"):
            similarity[key] = value
        elif key in ("alpha", "beta", "max_epochs", "meta_optimizer"):
            train[key] = value
        else:
            data[key] = value
    return ExperimentConfig(**data)


def train(
    config: Annotated[Path, typer.Argument(help="Experiment config YAML.")],
    output_dir: Annotated[
        Optional[Path], typer.Option("--output-dir", "-o", help="Root directory for run outputs.")
    ] = None,
    seed: Annotated[Optional[int], typer.Option(help="Run this seed only (overrides the config's seed list).")] = None,
    mode: Annotated[Optional[str], typer.Option(help="meta or pooled.")] = None,
    strategy: Annotated[Optional[str], typer.Option(help="Similarity strategy: cosine, knn, static, identity.")] = None,
    eta: Annotated[Optional[float], typer.Option(help="Cosine similarity threshold.")] = None,
    k: Annotated[Optional[int], typer.Option(help="Neighbors per task for the knn strategy.")] = None,
    alpha: Annotated[Optional[float], typer.Option(help="Inner learning rate.")] = None,
    beta: Annotated[Optional[float], typer.Option(help="Meta learning rate.")] = None,
    max_epochs: Annotated[Optional[int], typer.Option("--max-epochs", help="Maximum training epochs.")] = None,
    resume: Annotated[bool, typer.Option("--resume", help="Continue from the run's checkpoint.")] = False,
    trace_model_space: Annotated[
        bool, typer.Option("--trace-model-space", help="Append every epoch's task deltas to model_space.jsonl.")
    ] = False,
):
    """Train on an experiment config and report test metrics."""
    rc = load_config()
    with exit_on_error(config):
        cfg = load_experiment(config)
        cfg = apply_overrides(
            cfg,
            mode=mode,
            strategy=strategy,
            eta=eta,
            k=k,
            alpha=alpha,
            beta=beta,
            max_epochs=max_epochs,
        )

    if resume and cfg.mode == "pooled":
        err_console.print("[red]Error:[/] --resume applies to meta-training runs only.")
        raise typer.Exit(1)

    root = Path(resolve(output_dir, cfg.output_dir or rc.output_dir, DEFAULT_OUTPUT_DIR))
    if seed is not None:
        seeds = [seed]
    elif "seeds" not in cfg.model_fields_set and rc.seed is not None:
        seeds = [rc.seed]
    else:
        seeds = cfg.seeds

    aucs, aps = [], []
    for s in seeds:
        run_cfg = for_seed(cfg, s)
        run_dir = run_dir_for(root, run_cfg, s)
        with exit_on_error():
            report = run_experiment(run_cfg, run_dir, resume=resume, trace_model_space=trace_model_space)
        print_report(report, f"Test metrics — seed {s}")
        console.print(f"[green]Run written to:[/] {run_dir}\n")
        aucs.append(report.micro_auc)
        aps.append(report.micro_ap)

    if len(seeds) > 1:
        console.print(f"[bold]Across {len(seeds)} seeds:[/] AUC {mean_std(aucs)}  AP {mean_std(aps)}")
