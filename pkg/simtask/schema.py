"""Pydantic schemas for experiment configs, synthetic presets and dataset manifests."""

import hashlib
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .errors import SimtaskError

# ── Model ──


class ModelConfig(BaseModel):
    """Full backbone configuration: vocabulary sizes plus network dimensions."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    n_event_types: int = Field(ge=1)
    n_categorical: int = Field(default=0, ge=0)
    n_numeric: int = Field(default=0, ge=0)
    embed_dim: int = Field(default=16, ge=1)
    hidden_dim: int = Field(default=32, ge=1)
    init_scale: float = 0.1
    forget_bias: float = 1.0

    @field_validator("init_scale")
    @classmethod
    def _positive_scale(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("init scale must be positive")
        return v

    def config_hash(self) -> str:
        """Stable short hash identifying the parameter layout this config produces."""
        return hashlib.sha256(self.model_dump_json().encode("utf-8")).hexdigest()[:16]


class ModelSettings(BaseModel):
    """Network dimensions as written in an experiment config; vocab sizes come from the dataset."""

    model_config = ConfigDict(extra="forbid")

    embed_dim: int = Field(default=16, ge=1)
    hidden_dim: int = Field(default=32, ge=1)
    init_scale: float = 0.1
    forget_bias: float = 1.0

    def for_vocabulary(self, n_event_types: int, n_categorical: int, n_numeric: int) -> ModelConfig:
        return ModelConfig(
            n_event_types=n_event_types,
            n_categorical=n_categorical,
            n_numeric=n_numeric,
            **self.model_dump(),
        )


# ── Similarity / training ──

Strategy = Literal["cosine", "knn", "static", "identity"]
STRATEGIES: tuple[str, ...] = ("identity", "static", "knn", "cosine")


class SimilarityConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    strategy: Strategy = "cosine"
    eta: float = 0.7
    k: int = Field(default=5, ge=1)
    static_tolerance: float = Field(default=0.02, ge=0.0)

    @field_validator("eta")
    @classmethod
    def _eta_range(cls, v: float) -> float:
        if not -1.0 < v <= 1.0:
            raise ValueError("eta must lie in (-1, 1]")
        return v


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    alpha: float = Field(default=0.0005, ge=0.0)
    beta: float = Field(default=0.001, ge=0.0)
    inner_steps: int = Field(default=1, ge=0)
    dtr_size: int = Field(default=16, ge=1)
    dval_size: int = Field(default=16, ge=1)
    task_batch: Optional[int] = Field(default=None, ge=1)
    max_epochs: int = Field(default=100, ge=0)
    early_stop_patience: int = Field(default=10, ge=1)
    seed: int = 0
    similarity: SimilarityConfig = Field(default_factory=SimilarityConfig)
    meta_optimizer: Literal["sgd", "adam"] = "sgd"
    pooled_lr: float = Field(default=0.001, ge=0.0)
    pooled_batch_size: int = Field(default=32, ge=1)


# ── Synthetic generation ──


class RegimeConfig(BaseModel):
    """One family of related tasks sharing a label process and a target positive rate."""

    model_config = ConfigDict(extra="forbid")

    name: str
    positive_rate: float
    task_count: int = Field(ge=1)
    mean_events: float = Field(default=12.0, gt=0.0)
    type_weights: Optional[list[float]] = None
    numeric_shift: float = 0.0
    label_weights: Optional[list[float]] = None
    signal: float = Field(default=3.0, ge=0.0)
    task_jitter: float = Field(default=0.2, ge=0.0)

    @field_validator("positive_rate")
    @classmethod
    def _rate_range(cls, v: float) -> float:
        if not 0.0 <= v <= 1.0:
            raise ValueError("positive rate must lie in [0, 1]")
        return v


class SyntheticConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = "synthetic"
    n_event_types: int = Field(default=6, ge=1)
    n_categorical: int = Field(default=4, ge=0)
    n_numeric: int = Field(default=2, ge=0)
    max_categorical_per_event: int = Field(default=2, ge=0)
    samples_min: int = Field(default=40, ge=3)
    samples_max: int = Field(default=40, ge=3)
    horizon_hours: float = Field(default=48.0, gt=0.0)
    regimes: list[RegimeConfig]

    @model_validator(mode="after")
    def _check(self) -> "SyntheticConfig":
        if not self.regimes:
            raise ValueError("regime list is empty")
        if self.samples_min > self.samples_max:
            raise ValueError("samples_min must not exceed samples_max")
        n_features = self.n_event_types + self.n_numeric
        for regime in self.regimes:
            if regime.type_weights is not None:
                if len(regime.type_weights) != self.n_event_types:
                    raise ValueError(f"regime '{regime.name}': type_weights needs {self.n_event_types} entries")
                if min(regime.type_weights) < 0 or sum(regime.type_weights) <= 0:
                    raise ValueError(f"regime '{regime.name}': type_weights must be non-negative, not all zero")
            if regime.label_weights is not None and len(regime.label_weights) != n_features:
                raise ValueError(f"regime '{regime.name}': label_weights needs {n_features} entries")
        return self


# ── Experiment ──


class DatasetSource(BaseModel):
    """Where an experiment's tasks come from: a manifest file, a built-in preset, or an inline config."""

    model_config = ConfigDict(extra="forbid")

    path: Optional[str] = None
    preset: Optional[str] = None
    synthetic: Optional[SyntheticConfig] = None
    seed: int = 0

    @model_validator(mode="after")
    def _exactly_one(self) -> "DatasetSource":
        given = [x for x in (self.path, self.preset, self.synthetic) if x is not None]
        if len(given) != 1:
            raise ValueError("dataset needs exactly one of: path, preset, synthetic")
        return self


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = "experiment"
    dataset: DatasetSource
    model: ModelSettings = Field(default_factory=ModelSettings)
    train: TrainConfig = Field(default_factory=TrainConfig)
    mode: Literal["meta", "pooled"] = "meta"
    max_seq_len: int = Field(default=64, ge=1)
    split_ratios: tuple[float, float, float] = (0.7, 0.1, 0.2)
    output_dir: Optional[str] = None
    seeds: list[int] = Field(default_factory=lambda: [0], min_length=1)


def load_experiment(path: Path) -> ExperimentConfig:
    """Load an experiment YAML. Relative dataset paths are resolved against the config's directory."""
    if not path.exists():
        raise SimtaskError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise SimtaskError(f"{path}: expected a mapping at the top level")
    cfg = ExperimentConfig(**data)
    if cfg.dataset.path is not None:
        dataset_path = Path(cfg.dataset.path)
        if not dataset_path.is_absolute():
            dataset_path = (path.parent / dataset_path).resolve()
        if not dataset_path.exists():
            raise SimtaskError(f"{path}: dataset.path does not exist: {dataset_path}")
        cfg = cfg.model_copy(update={"dataset": cfg.dataset.model_copy(update={"path": str(dataset_path)})})
    return cfg


def dump_experiment(cfg: ExperimentConfig) -> str:
    """Serialize an experiment config with every default filled in."""
    return yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=False, allow_unicode=True)


# ── Dataset manifest file ──


class VocabFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    event_types: list[str] = Field(min_length=1)
    categorical_values: list[str] = Field(default_factory=list)
    numeric_dims: int = Field(default=0, ge=0)


class TaskEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str
    records: str


class StatsFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    task_count: int
    sample_count: int
    positive_rate: float


class ManifestFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    split_seed: int = 0
    split_ratios: tuple[float, float, float] = (0.7, 0.1, 0.2)
    vocab: VocabFile
    tasks: list[TaskEntry] = Field(min_length=1)
    stats: Optional[StatsFile] = None
