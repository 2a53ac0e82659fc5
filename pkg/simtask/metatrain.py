"""Meta-training over related tasks with first-order meta-gradients.

One epoch:

1. measure neighborhoods from last epoch's task parameters,
2. for each batch of tasks, adapt θ one step on samples pooled from each task's
   neighborhood, take the gradient of a second pooled draw at the adapted point
   and move θ against the summed gradients,
3. re-adapt every task from the new θ on its own training split; these task
   parameters drive the next epoch's similarity measurement.

After each epoch the per-task models are scored on the validation splits and
training stops early once the pooled validation AUC stops improving. Only
training and validation samples are read during training.
"""

from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Mapping, Optional, Protocol, Sequence, Union

import numpy as np

from .console import warn
from .data import DatasetManifest, EpisodeSample, TaskCorpus
from .errors import MetricError, NonFiniteError, SimtaskError
from .metrics import MetricsReport, build_report
from .model import LSTMObjective, ParamVector, init_params
from .optim import make_optimizer
from .schema import ModelConfig, ModelSettings, TrainConfig
from .similarity import NeighborhoodAssignment, measure_neighborhoods


class Objective(Protocol):
    """Loss interface the training loop differentiates."""

    def loss(self, params: ParamVector, batch: Sequence[EpisodeSample]) -> float: ...

    def loss_grad(self, params: ParamVector, batch: Sequence[EpisodeSample]) -> ParamVector: ...

    def predict(self, params: ParamVector, samples: Sequence[EpisodeSample]) -> list[float]: ...


def _loss_and_grad(objective: Objective, params: ParamVector, batch: Sequence[EpisodeSample]):
    fused = getattr(objective, "loss_and_grad", None)
    if fused is not None:
        return fused(params, batch)
    return objective.loss(params, batch), objective.loss_grad(params, batch)


def _default_objective(objective: Optional[Objective]) -> Objective:
    return objective if objective is not None else LSTMObjective()


# ── Sample pools ──


@dataclass(frozen=True)
class ExtendedSampleSet:
    """Training-split samples pooled from every task in one task's neighborhood."""

    task_id: str
    samples: tuple[EpisodeSample, ...]

    def __len__(self) -> int:
        return len(self.samples)


def build_extended_set(
    task_id: str, assignment: NeighborhoodAssignment, tasks: Mapping[str, TaskCorpus]
) -> ExtendedSampleSet:
    """Uniform union of the neighbors' training samples, in task id order."""
    members = assignment.of(task_id)
    samples = [s for member in sorted(members) for s in tasks[member].train_samples()]
    return ExtendedSampleSet(task_id=task_id, samples=tuple(samples))


def sample_tr_val(
    ext: ExtendedSampleSet, dtr_size: int, dval_size: int, rng: np.random.Generator
) -> tuple[list[EpisodeSample], list[EpisodeSample]]:
    """Draw D_tr and D_val from one shuffle of the pool.

    When the pool is too small for both, D_tr is filled first and D_val keeps at
    least one sample. A pool of one sample serves as both.
    """
    n = len(ext)
    if n == 0:
        raise SimtaskError(f"task '{ext.task_id}': extended sample set is empty")
    if n == 1:
        return [ext.samples[0]], [ext.samples[0]]
    n_tr = min(dtr_size, n - 1)
    n_val = min(dval_size, n - n_tr)
    order = rng.permutation(n)
    d_tr = [ext.samples[i] for i in order[:n_tr]]
    d_val = [ext.samples[i] for i in order[n_tr : n_tr + n_val]]
    return d_tr, d_val


def inner_adapt(
    theta: ParamVector,
    d_tr: Sequence[EpisodeSample],
    alpha: float,
    steps: int = 1,
    objective: Optional[Objective] = None,
) -> ParamVector:
    """``steps`` plain gradient steps of size alpha on the loss over d_tr."""
    if len(d_tr) == 0:
        raise SimtaskError("cannot adapt on an empty batch")
    objective = _default_objective(objective)
    params = theta
    for _ in range(steps):
        grad = objective.loss_grad(params, d_tr)
        params = params.with_values(params.values - alpha * grad.values)
    return params


# ── State ──


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    meta_loss: float
    val_auc: Optional[float]
    val_ap: Optional[float]
    mean_neighborhood: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class MetaState:
    """Shared initialization, per-task parameters and early-stopping bookkeeping."""

    theta: ParamVector
    task_params: Mapping[str, ParamVector] = field(default_factory=dict)
    epoch: int = 0
    best_theta: Optional[ParamVector] = None
    best_score: Optional[float] = None
    stale_epochs: int = 0
    history: tuple[EpochRecord, ...] = ()
    meta_losses: tuple[float, ...] = ()
    optimizer_state: Mapping = field(default_factory=dict)
    finished: bool = False

    def __post_init__(self):
        for task_id, params in self.task_params.items():
            if not params.same_layout(self.theta):
                raise SimtaskError(f"parameters of task '{task_id}' do not match the shared layout")


def init_state(theta: ParamVector) -> MetaState:
    return MetaState(theta=theta)


# ── Training steps ──


def meta_step(
    state: MetaState,
    tasks: Sequence[TaskCorpus],
    assignment: NeighborhoodAssignment,
    config: TrainConfig,
    rng: np.random.Generator,
    batch: Optional[Sequence[str]] = None,
    objective: Optional[Objective] = None,
) -> MetaState:
    """One first-order meta-update of θ over a batch of tasks.

    For every task in the batch: θ'ᵢ = θ − α∇L(D_tr; θ), gᵢ = ∇L(D_val; θ'ᵢ).
    Then θ moves against Σ gᵢ through the configured update rule. The summed
    validation losses are appended to ``meta_losses``.
    """
    objective = _default_objective(objective)
    by_id = {t.task_id: t for t in tasks}
    batch = [t.task_id for t in tasks] if batch is None else list(batch)
    missing = [t for t in batch if t not in assignment.neighbors]
    if missing:
        raise SimtaskError(f"neighborhood assignment does not cover tasks: {missing}")

    theta = state.theta
    total_grad = np.zeros(len(theta))
    meta_loss = 0.0
    for task_id in batch:
        ext = build_extended_set(task_id, assignment, by_id)
        d_tr, d_val = sample_tr_val(ext, config.dtr_size, config.dval_size, rng)
        adapted = inner_adapt(theta, d_tr, config.alpha, 1, objective)
        val_loss, grad = _loss_and_grad(objective, adapted, d_val)
        total_grad += grad.values
        meta_loss += val_loss

    if not (np.isfinite(total_grad).all() and np.isfinite(meta_loss)):
        raise NonFiniteError("meta_gradient", state.epoch)
    optimizer = make_optimizer(config.meta_optimizer, config.beta, dict(state.optimizer_state))
    return replace(
        state,
        theta=optimizer.step(theta, total_grad),
        optimizer_state=optimizer.state_dict(),
        meta_losses=state.meta_losses + (meta_loss,),
    )


def adapt_all_tasks(
    theta: ParamVector,
    tasks: Sequence[TaskCorpus],
    alpha: float,
    steps: int,
    objective: Optional[Objective] = None,
) -> dict[str, ParamVector]:
    """θᵢ adapted from θ on task i's own training split only."""
    out = {}
    for task in tasks:
        train = task.train_samples()
        if not train:
            warn(f"task '{task.task_id}' has an empty training split; keeping the shared parameters")
            out[task.task_id] = theta
            continue
        out[task.task_id] = inner_adapt(theta, train, alpha, steps, objective)
    return out


def evaluate(
    params: Union[Mapping[str, ParamVector], ParamVector],
    tasks: Sequence[TaskCorpus],
    split: str = "test",
    objective: Optional[Objective] = None,
) -> MetricsReport:
    """Score every sample of one split with its task's model (or one shared model)."""
    if split not in ("valid", "test"):
        raise SimtaskError(f"can only evaluate the valid or test split, got '{split}'")
    objective = _default_objective(objective)
    predictions = {}
    for task in tasks:
        samples = task.split_samples(split)
        if not samples:
            raise SimtaskError(f"task '{task.task_id}' has an empty {split} split")
        if isinstance(params, ParamVector):
            task_theta = params
        elif task.task_id in params:
            task_theta = params[task.task_id]
        else:
            raise SimtaskError(f"no parameters for task '{task.task_id}'")
        scores = objective.predict(task_theta, samples)
        predictions[task.task_id] = (scores, [s.label for s in samples])
    return build_report(predictions)


def _validation_scores(
    params, tasks: Sequence[TaskCorpus], objective: Objective
) -> tuple[Optional[float], Optional[float]]:
    try:
        report = evaluate(params, tasks, "valid", objective)
    except MetricError:
        return None, None
    return report.micro_auc, report.micro_ap


def _resolve_model(manifest: DatasetManifest, model: Union[ModelConfig, ModelSettings, None]) -> ModelConfig:
    if isinstance(model, ModelConfig):
        return model
    settings = model if model is not None else ModelSettings()
    vocab = manifest.vocab
    return settings.for_vocabulary(len(vocab.event_types), len(vocab.categorical_values), vocab.numeric_dims)


def _task_batches(n_tasks: int, batch_size: Optional[int], rng: np.random.Generator) -> list[np.ndarray]:
    order = rng.permutation(n_tasks)
    size = batch_size or n_tasks
    return [order[i : i + size] for i in range(0, n_tasks, size)]


def _selected_theta(best: Optional[ParamVector], best_score: Optional[float], last: ParamVector) -> ParamVector:
    """The best-scoring θ, or the last trained θ when no epoch had a defined validation AUC."""
    if best is None or best_score is None:
        return last
    return best


EpochCallback = Callable[[MetaState, NeighborhoodAssignment], None]


def train(
    manifest: DatasetManifest,
    config: TrainConfig,
    model: Union[ModelConfig, ModelSettings, None] = None,
    *,
    state: Optional[MetaState] = None,
    objective: Optional[Objective] = None,
    callback: Optional[EpochCallback] = None,
) -> MetaState:
    """Run meta-training and return the final state.

    The returned state carries the best validation θ as ``theta`` and task
    parameters adapted from it. ``state`` resumes an unfinished run; epoch
    randomness depends only on (seed, epoch), so a resumed run matches an
    uninterrupted one. ``callback`` sees the live state after every epoch.
    """
    tasks = list(manifest.tasks)
    if not tasks:
        raise SimtaskError("dataset has no tasks")
    objective = _default_objective(objective)
    if state is None:
        state = init_state(init_params(_resolve_model(manifest, model), config.seed))
    if state.finished:
        return state

    for epoch in range(state.epoch, config.max_epochs):
        if state.stale_epochs >= config.early_stop_patience:
            break
        rng = np.random.default_rng([config.seed, epoch])
        assignment = measure_neighborhoods(config.similarity, tasks, state.theta, state.task_params, epoch)

        steps_before = len(state.meta_losses)
        for batch in _task_batches(len(tasks), config.task_batch, rng):
            try:
                state = meta_step(
                    state, tasks, assignment, config, rng, [tasks[i].task_id for i in batch], objective
                )
            except NonFiniteError as e:
                raise NonFiniteError(e.block, epoch) from None

        task_params = adapt_all_tasks(state.theta, tasks, config.alpha, config.inner_steps, objective)
        val_auc, val_ap = _validation_scores(task_params, tasks, objective)
        improved = val_auc is not None and (state.best_score is None or val_auc > state.best_score)
        record = EpochRecord(
            epoch=epoch,
            meta_loss=float(sum(state.meta_losses[steps_before:])),
            val_auc=val_auc,
            val_ap=val_ap,
            mean_neighborhood=assignment.mean_size,
        )
        state = replace(
            state,
            task_params=task_params,
            epoch=epoch + 1,
            best_theta=state.theta if improved or state.best_theta is None else state.best_theta,
            best_score=val_auc if improved else state.best_score,
            stale_epochs=0 if improved else state.stale_epochs + 1,
            history=state.history + (record,),
        )
        if callback is not None:
            callback(state, assignment)

    if not state.history:
        return replace(state, finished=True)
    best = _selected_theta(state.best_theta, state.best_score, state.theta)
    return replace(
        state,
        theta=best,
        task_params=adapt_all_tasks(best, tasks, config.alpha, config.inner_steps, objective),
        finished=True,
    )


PooledCallback = Callable[[EpochRecord, ParamVector], None]


def train_pooled(
    manifest: DatasetManifest,
    config: TrainConfig,
    model: Union[ModelConfig, ModelSettings, None] = None,
    *,
    theta: Optional[ParamVector] = None,
    objective: Optional[Objective] = None,
    callback: Optional[PooledCallback] = None,
) -> ParamVector:
    """Global baseline: mini-batch training of one model on every task's training split.

    Uses ``pooled_lr`` and ``pooled_batch_size`` with the configured update
    rule; early stopping and the returned vector follow the pooled validation AUC.
    """
    tasks = list(manifest.tasks)
    if not tasks:
        raise SimtaskError("dataset has no tasks")
    objective = _default_objective(objective)
    if theta is None:
        theta = init_params(_resolve_model(manifest, model), config.seed)
    pool = [s for t in tasks for s in t.train_samples()]
    optimizer = make_optimizer(config.meta_optimizer, config.pooled_lr)

    best_theta, best_score, stale = theta, None, 0
    for epoch in range(config.max_epochs):
        rng = np.random.default_rng([config.seed, epoch])
        order = rng.permutation(len(pool))
        epoch_loss = 0.0
        for start in range(0, len(pool), config.pooled_batch_size):
            batch = [pool[i] for i in order[start : start + config.pooled_batch_size]]
            batch_loss, grad = _loss_and_grad(objective, theta, batch)
            if not np.isfinite(batch_loss):
                raise NonFiniteError("loss", epoch)
            theta = optimizer.step(theta, grad.values)
            epoch_loss += batch_loss

        val_auc, val_ap = _validation_scores(theta, tasks, objective)
        if val_auc is not None and (best_score is None or val_auc > best_score):
            best_theta, best_score, stale = theta, val_auc, 0
        else:
            stale += 1
        if callback is not None:
            callback(EpochRecord(epoch=epoch, meta_loss=epoch_loss, val_auc=val_auc, val_ap=val_ap), theta)
        if stale >= config.early_stop_patience:
            break
    return _selected_theta(best_theta, best_score, theta)
