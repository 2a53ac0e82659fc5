"""Ablate command — compare similarity strategies across seeds."""

from concurrent.futures import Future, ProcessPoolExecutor
from pathlib import Path
from typing import Annotated, Optional

import typer
import yaml
from pydantic import ValidationError
from rich.table import Table

from .config import DEFAULT_OUTPUT_DIR, load_config, resolve
from .console import console, err_console
from .errors import SimtaskError
from .schema import STRATEGIES, ExperimentConfig, load_experiment
from .train_cmd import apply_overrides
from .utils import exit_on_error, for_seed, mean_std, run_dir_for, run_experiment

SUMMARY_FILE = "ablation.yaml"


def _validation_message(e: ValidationError) -> str:
    return "; ".join(f"{' -> '.join(str(x) for x in err['loc'])}: {err['msg']}" for err in e.errors())


def _run_job(cfg_data: dict, run_dir: str, show_progress: bool) -> dict:
    """One (strategy, seed) run; errors come back as text so they survive the process boundary."""
    try:
        report = run_experiment(ExperimentConfig(**cfg_data), Path(run_dir), show_progress=show_progress)
    except ValidationError as e:
        return {"error": _validation_message(e)}
    except (SimtaskError, OSError) as e:
        return {"error": str(e)}
    except Exception as e:  # reported per run; the sweep continues
        return {"error": f"{type(e).__name__}: {e}"}
    return {"auc": report.micro_auc, "ap": report.micro_ap}


def _job_result(future: Future) -> dict:
    try:
        return future.result()
    except Exception as e:  # worker process died or the result did not unpickle
        return {"error": f"{type(e).__name__}: {e}"}


def ablation_jobs(cfg: ExperimentConfig, root: Path, seeds: list[int], with_pooled: bool) -> list[tuple]:
    """(label, seed, config, run dir) for every strategy × seed, plus the pooled baseline if asked."""
    variants = [apply_overrides(cfg, mode="meta", strategy=s) for s in STRATEGIES]
    if with_pooled:
        variants.append(apply_overrides(cfg, mode="pooled"))
    jobs = []
    for variant in variants:
        label = "pooled" if variant.mode == "pooled" else variant.train.similarity.strategy
        for seed in seeds:
            run_cfg = for_seed(variant, seed)
            jobs.append((label, seed, run_cfg, run_dir_for(root, run_cfg, seed)))
    return jobs


def ablate(
    config: Annotated[Path, typer.Argument(help="Experiment config YAML (its seed list is used).")],
    output_dir: Annotated[
        Optional[Path], typer.Option("--output-dir", "-o", help="Root directory for run outputs.")
    ] = None,
    jobs: Annotated[Optional[int], typer.Option("--jobs", "-j", help="Runs to execute in parallel.")] = None,
    with_pooled: Annotated[
        bool, typer.Option("--with-pooled", help="Add the pooled single-model baseline row.")
    ] = False,
):
    """Train every similarity strategy on every seed and summarize test AUC / AP."""
    rc = load_config()
    with exit_on_error(config):
        cfg = load_experiment(config)
        plan = ablation_jobs(
            cfg,
            Path(resolve(output_dir, cfg.output_dir or rc.output_dir, DEFAULT_OUTPUT_DIR)),
            cfg.seeds,
            with_pooled,
        )
    jobs = max(1, resolve(jobs, rc.jobs, 1))
    console.print(f"Running {len(plan)} training runs ({jobs} at a time).")

    if jobs == 1:
        results = [_run_job(c.model_dump(), str(d), True) for _, _, c, d in plan]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_job, c.model_dump(), str(d), False) for _, _, c, d in plan]
            results = [_job_result(f) for f in futures]

    failed = [(label, seed, r["error"]) for (label, seed, _, _), r in zip(plan, results) if "error" in r]
    for label, seed, message in failed:
        err_console.print(f"[red]Error:[/] {label} seed {seed}: {message}")
    if failed:
        raise typer.Exit(1)

    labels = list(dict.fromkeys(label for label, _, _, _ in plan))
    summary = {}
    for label in labels:
        rows = [r for (lbl, _, _, _), r in zip(plan, results) if lbl == label]
        summary[label] = {
            "auc": mean_std([r["auc"] for r in rows]),
            "ap": mean_std([r["ap"] for r in rows]),
            "runs": {f"seed{seed}": r for (lbl, seed, _, _), r in zip(plan, results) if lbl == label},
        }

    table = Table(title=f"Ablation of task similarity — {cfg.name} ({len(cfg.seeds)} seeds)")
    table.add_column("Strategy", style="bold")
    table.add_column("AUC", justify="right", style="green")
    table.add_column("AP", justify="right", style="green")
    for label in labels:
        table.add_row(label, summary[label]["auc"], summary[label]["ap"])
    console.print(table)

    summary_path = plan[0][3].parents[1] / SUMMARY_FILE
    with open(summary_path, "w", encoding="utf-8") as f:
        yaml.safe_dump(summary, f, sort_keys=False)
    console.print(f"[green]Summary written to:[/] {summary_path}")
