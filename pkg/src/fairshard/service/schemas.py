"""Pydantic request/response models for the HTTP service.

File-system paths in requests are interpreted on the machine running the
service; the CLI runs the service in-process by default, so paths then refer
to the local filesystem.
"""

from __future__ import annotations

from pydantic import BaseModel, Field

from ..fairness import ExpectedMetrics
from ..harness import ExperimentConfig, GeneratorConfig
from ..learner import Hyperparams
from ..postprocess import STRATEGY_NAMES


class HyperparamsModel(BaseModel):
    learning_rate: float = 0.5
    epochs_per_slice: int = 300
    l2_penalty: float = 1e-3

    def to_domain(self) -> Hyperparams:
        return Hyperparams(
            learning_rate=self.learning_rate,
            epochs_per_slice=self.epochs_per_slice,
            l2_penalty=self.l2_penalty,
        )


class GeneratorConfigModel(BaseModel):
    n_samples: int = 10_000
    feature_dim: int = 5
    attr_prevalence: float = 0.5
    positive_rate: tuple[float, float] = (0.5, 0.5)
    label_noise: tuple[float, float] = (0.0, 0.0)
    class_sep: float = 2.0
    group_shift: float = 0.0
    seed: int = 0

    def to_domain(self) -> GeneratorConfig:
        return GeneratorConfig(**self.model_dump())

    @classmethod
    def from_domain(cls, config: GeneratorConfig) -> "GeneratorConfigModel":
        return cls(
            n_samples=config.n_samples,
            feature_dim=config.feature_dim,
            attr_prevalence=config.attr_prevalence,
            positive_rate=config.positive_rate,
            label_noise=config.label_noise,
            class_sep=config.class_sep,
            group_shift=config.group_shift,
            seed=config.seed,
        )


class ExperimentConfigModel(BaseModel):
    shard_counts: tuple[int, ...] = (1, 3, 5, 7)
    num_slices: int = 1
    partition: str = "uniform"
    strategies: tuple[str, ...] = STRATEGY_NAMES
    split_fractions: tuple[float, float, float] = (0.70, 0.15, 0.15)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    eo_mode: str = "mean"

    def to_domain(self) -> ExperimentConfig:
        return ExperimentConfig(**self.model_dump())


class MetricsModel(BaseModel):
    accuracy: float
    eo_gap: float
    expected_loss: float
    tpr: dict[int, float]
    fpr: dict[int, float]

    @classmethod
    def from_metrics(cls, metrics: ExpectedMetrics) -> "MetricsModel":
        return cls(
            accuracy=metrics.expected_accuracy,
            eo_gap=metrics.eo_gap,
            expected_loss=metrics.expected_loss,
            tpr=metrics.tpr,
            fpr=metrics.fpr,
        )


class HealthResponse(BaseModel):
    status: str
    version: str


class GenerateDataRequest(BaseModel):
    out_csv: str
    preset: str | None = None
    config: GeneratorConfigModel | None = None
    seed: int | None = Field(default=None, description="Overrides the config/preset seed.")


class GenerateDataResponse(BaseModel):
    path: str
    n_samples: int
    feature_dim: int
    positive_fraction: float
    group1_fraction: float


class TrainRequest(BaseModel):
    data_csv: str
    out_dir: str
    shards: int = 1
    slices: int = 1
    partition: str = "uniform"
    seed: int = 0
    hyperparams: HyperparamsModel = Field(default_factory=HyperparamsModel)


class TrainResponse(BaseModel):
    model_dir: str
    shards: int
    slices: int
    shard_sizes: list[int]
    checkpoints: int
    train_accuracy: float


class UnlearnServiceRequest(BaseModel):
    model_dir: str
    data_csv: str
    sample_ids: list[int]
    out_dir: str | None = Field(default=None, description="Defaults to updating model_dir in place.")
    retain_csv: str | None = Field(default=None, description="Optional path for the retained dataset.")
    hyperparams: HyperparamsModel = Field(default_factory=HyperparamsModel)


class UnlearnResponse(BaseModel):
    model_dir: str
    removed: int
    affected_shards: dict[int, int]
    retrained_samples: int
    full_retrain_samples: int
    retain_csv: str | None


class TableModel(BaseModel):
    S: int
    entries: list[dict]


class PostprocessRequest(BaseModel):
    predictions_csv: str
    shards: int
    strategies: tuple[str, ...] = STRATEGY_NAMES
    eo_mode: str = "mean"
    loss: tuple[tuple[float, float], tuple[float, float]] | None = None
    out_dir: str | None = None


class StrategyReportModel(BaseModel):
    strategy: str
    objective: float
    in_sample: MetricsModel
    tables: list[TableModel]
    ensemble_table: TableModel
    files: list[str]


class PostprocessResponse(BaseModel):
    shards: int
    results: list[StrategyReportModel]


class EvaluateRequest(BaseModel):
    predictions_csv: str
    shards: int
    eo_mode: str = "mean"
    table_json: str | None = Field(default=None, description="Path to a derived-predictor table.")
    loss: tuple[tuple[float, float], tuple[float, float]] | None = None


class EvaluateResponse(BaseModel):
    raw: MetricsModel
    derived: MetricsModel | None


class SweepRequest(BaseModel):
    data_csv: str
    out_dir: str
    config: ExperimentConfigModel = Field(default_factory=ExperimentConfigModel)
    formats: tuple[str, ...] = ("csv", "json")
    deletion_fraction: float | None = Field(
        default=None, description="When set, run the unlearning benchmark instead of the plain sweep."
    )
    hyperparams: HyperparamsModel = Field(default_factory=HyperparamsModel)


class SweepResponse(BaseModel):
    files: list[str]
    rows: int
    means: list[dict]


class EmitRequest(BaseModel):
    report_json: str
    out_dir: str
    formats: tuple[str, ...] = ("csv",)


class EmitResponse(BaseModel):
    files: list[str]


class OracleCheckRequest(BaseModel):
    predictions_csv: str
    shards: int
    loss: tuple[tuple[float, float], tuple[float, float]] | None = None


class OracleCheckResponse(BaseModel):
    lp_objective: float
    oracle_objective: float
    difference: float
    vertices: int
