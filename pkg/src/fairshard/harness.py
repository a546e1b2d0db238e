"""Synthetic data, CSV interchange, experiment orchestration and result emission.

Experiments reproduce the evaluation shape at desk scale: split a dataset into
train/calibration/test, train a sharded ensemble per shard count and seed,
fit the post-processing strategies on the calibration split, and report
accuracy / equalized-odds / expected loss on the test split, optionally
before and after an unlearning request.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import fairness, postprocess, sisa
from .errors import DataFormatError, FairshardError, PartitionError, UnsupportedCellError
from .fairness import ExpectedMetrics
from .learner import Dataset, Hyperparams, Sample
from .postprocess import STRATEGY_NAMES, LossMatrix
from .seeding import derive_seed, rng_for

RAW_ENSEMBLE = "raw_ensemble"
PHASE_FIT = "fit"
PHASE_POST_UNLEARN = "post_unlearn"

REPORT_SCHEMA_VERSION = 1
REPORT_COLUMNS = (
    "partition",
    "shards",
    "seed",
    "strategy",
    "phase",
    "accuracy",
    "eo_gap",
    "expected_loss",
    "eo_gap_fit",
    "retrained_samples",
    "full_retrain_samples",
)
_FLOAT_COLUMNS = ("accuracy", "eo_gap", "expected_loss", "eo_gap_fit")
_STRATEGY_ORDER = {name: i for i, name in enumerate((RAW_ENSEMBLE, *STRATEGY_NAMES))}


@dataclass(frozen=True)
class GeneratorConfig:
    """Seeded synthetic-data recipe with explicit bias injectors.

    ``positive_rate`` couples the label to the sensitive attribute,
    ``group_shift`` plants the attribute on feature axis 1 (a proxy a model can
    pick up), and ``label_noise`` flips observed labels per group. With all
    three neutral the optimal rule treats the groups identically.
    """

    n_samples: int = 10_000
    feature_dim: int = 5
    attr_prevalence: float = 0.5
    positive_rate: tuple[float, float] = (0.5, 0.5)
    label_noise: tuple[float, float] = (0.0, 0.0)
    class_sep: float = 2.0
    group_shift: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be at least 1")
        probs = (self.attr_prevalence, *self.positive_rate, *self.label_noise)
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise ValueError("probabilities must lie in [0, 1]")
        if self.group_shift != 0.0 and self.feature_dim < 2:
            raise ValueError("group_shift needs feature_dim >= 2 (it lives on axis 1)")


#: Named presets; "biased-v1" is the documented configuration used by the
#: golden-value tests (attribute-correlated labels plus a group-proxy axis).
PRESETS: dict[str, GeneratorConfig] = {
    "biased-v1": GeneratorConfig(
        n_samples=10_000,
        feature_dim=5,
        attr_prevalence=0.4,
        positive_rate=(0.25, 0.75),
        label_noise=(0.02, 0.10),
        class_sep=2.0,
        group_shift=1.5,
        seed=42,
    ),
}


def replace_seed(config: GeneratorConfig, seed: int) -> GeneratorConfig:
    return replace(config, seed=int(seed))


def gen_synthetic(config: GeneratorConfig) -> Dataset:
    """Draw a dataset from the configured generative process; ids are 0..n-1."""
    rng = np.random.default_rng(config.seed)
    n, d = config.n_samples, config.feature_dim
    attrs = (rng.random(n) < config.attr_prevalence).astype(np.int64)
    rate = np.asarray(config.positive_rate)[attrs]
    y_true = (rng.random(n) < rate).astype(np.int64)
    X = rng.standard_normal((n, d))
    X[:, 0] += config.class_sep * y_true
    if config.group_shift != 0.0:
        X[:, 1] += config.group_shift * attrs
    noise = np.asarray(config.label_noise)[attrs]
    flips = (rng.random(n) < noise).astype(np.int64)
    labels = y_true ^ flips
    return Dataset(
        Sample(i, X[i], int(attrs[i]), int(labels[i])) for i in range(n)
    )


def split_dataset(
    dataset: Dataset, fractions: Sequence[float], seed: int
) -> tuple[Dataset, Dataset, Dataset]:
    """Disjoint train/calibration/test split covering the dataset."""
    if len(fractions) != 3 or any(f <= 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"split fractions must be three positives summing to 1, got {fractions}")
    ids = np.array(dataset.ids, dtype=np.int64)
    perm = rng_for(seed, "split").permutation(ids)
    n = len(ids)
    cut1 = int(round(fractions[0] * n))
    cut2 = int(round((fractions[0] + fractions[1]) * n))
    cut1 = min(max(cut1, 1), n - 2)
    cut2 = min(max(cut2, cut1 + 1), n - 1)
    return (
        dataset.subset(int(i) for i in perm[:cut1]),
        dataset.subset(int(i) for i in perm[cut1:cut2]),
        dataset.subset(int(i) for i in perm[cut2:]),
    )


# ---------------------------------------------------------------------------
# CSV interchange


def _dataset_header(dim: int) -> list[str]:
    return [f"f{j}" for j in range(dim)] + ["a", "y"]


def export_dataset_csv(dataset: Dataset, path: Path | str) -> Path:
    """Write features/attribute/label rows in ascending-id order.

    Floats are written with repr so a round-trip through ingest_dataset_csv
    reproduces them exactly (ids are renumbered to row order on ingest).
    """
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_dataset_header(dataset.dim))
        for sample in dataset:
            writer.writerow([repr(float(v)) for v in sample.features] + [sample.attribute, sample.label])
    return path


def _parse_binary(text: str, what: str, line: int) -> int:
    if text not in ("0", "1"):
        raise DataFormatError(f"line {line}: {what} must be 0 or 1, got {text!r}")
    return int(text)


def ingest_dataset_csv(path: Path | str) -> Dataset:
    """Parse a dataset CSV with header f0..f{d-1},a,y; ids are row order."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        if len(header) < 3 or header[-2:] != ["a", "y"]:
            raise DataFormatError(f"{path}: header must end with columns a,y")
        dim = len(header) - 2
        if header[:dim] != [f"f{j}" for j in range(dim)]:
            raise DataFormatError(f"{path}: feature columns must be named f0..f{dim - 1} in order")
        samples = []
        for line, row in enumerate(reader, start=2):
            if len(row) != dim + 2:
                raise DataFormatError(f"line {line}: expected {dim + 2} columns, got {len(row)}")
            try:
                features = [float(v) for v in row[:dim]]
            except ValueError as exc:
                raise DataFormatError(f"line {line}: bad feature value ({exc})") from exc
            attr = _parse_binary(row[dim], "a", line)
            label = _parse_binary(row[dim + 1], "y", line)
            samples.append(Sample(len(samples), np.array(features), attr, label))
    if not samples:
        raise DataFormatError(f"{path}: no data rows")
    return Dataset(samples)


def export_predictions_csv(
    path: Path | str, pred_matrix: np.ndarray, attrs: np.ndarray, labels: np.ndarray
) -> Path:
    path = Path(path)
    P = np.asarray(pred_matrix)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"yhat_{k + 1}" for k in range(P.shape[1])] + ["a", "y"])
        for i in range(P.shape[0]):
            writer.writerow([int(v) for v in P[i]] + [int(attrs[i]), int(labels[i])])
    return path


def ingest_predictions_csv(
    path: Path | str, num_constituents: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Parse yhat_1..yhat_S,a,y rows into the matrices estimate_joint expects.

    Column yhat_{k+1} is constituent k. Lets externally produced ensemble
    predictions be post-processed without retraining anything here.
    """
    path = Path(path)
    s = int(num_constituents)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        expected = [f"yhat_{k + 1}" for k in range(s)] + ["a", "y"]
        if header != expected:
            raise DataFormatError(
                f"{path}: header {header} does not match the {s}-constituent layout {expected}"
            )
        preds, attrs, labels = [], [], []
        for line, row in enumerate(reader, start=2):
            if len(row) != s + 2:
                raise DataFormatError(f"line {line}: expected {s + 2} columns, got {len(row)}")
            preds.append([_parse_binary(v, f"yhat_{k + 1}", line) for k, v in enumerate(row[:s])])
            attrs.append(_parse_binary(row[s], "a", line))
            labels.append(_parse_binary(row[s + 1], "y", line))
    if not preds:
        raise DataFormatError(f"{path}: no data rows")
    return (
        np.array(preds, dtype=np.int8),
        np.array(attrs, dtype=np.int64),
        np.array(labels, dtype=np.int64),
    )


# ---------------------------------------------------------------------------
# Experiment configuration and report


@dataclass(frozen=True)
class ExperimentConfig:
    shard_counts: tuple[int, ...] = (1, 3, 5, 7)
    num_slices: int = 1
    partition: str = "uniform"
    strategies: tuple[str, ...] = STRATEGY_NAMES
    split_fractions: tuple[float, float, float] = (0.70, 0.15, 0.15)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    eo_mode: str = "mean"

    def __post_init__(self) -> None:
        object.__setattr__(self, "shard_counts", tuple(int(s) for s in self.shard_counts))
        object.__setattr__(self, "strategies", tuple(self.strategies))
        object.__setattr__(self, "split_fractions", tuple(float(f) for f in self.split_fractions))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.shard_counts or any(s < 1 for s in self.shard_counts):
            raise ValueError("shard_counts must be non-empty positive integers")
        if self.num_slices < 1:
            raise ValueError("num_slices must be at least 1")
        if self.partition not in ("uniform", "one_fair_shard"):
            raise ValueError(f"unknown partition mode {self.partition!r}")
        if self.partition == "one_fair_shard" and min(self.shard_counts) < 2:
            raise ValueError("one_fair_shard needs every shard count >= 2")
        unknown = set(self.strategies) - set(STRATEGY_NAMES)
        if unknown:
            raise ValueError(f"unknown strategies {sorted(unknown)}; expected {STRATEGY_NAMES}")
        if len(self.split_fractions) != 3 or any(f <= 0 for f in self.split_fractions):
            raise ValueError("split_fractions must be three positive numbers")
        if abs(sum(self.split_fractions) - 1.0) > 1e-9:
            raise ValueError("split_fractions must sum to 1")
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        if self.eo_mode not in ("mean", "max"):
            raise ValueError("eo_mode must be 'mean' or 'max'")


_LIST_FIELDS = {"shard_counts", "seeds", "strategies", "split_fractions"}
_INT_FIELDS = {"num_slices"}


def parse_experiment_config(text: str) -> ExperimentConfig:
    """Parse the flat key=value config format (comments with #, lists with commas)."""
    values: dict[str, object] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataFormatError(f"line {line_no}: expected key = value, got {raw!r}")
        key, _, value = (part.strip() for part in line.partition("="))
        if key in ("partition", "eo_mode"):
            values[key] = value
        elif key in _INT_FIELDS:
            values[key] = int(value)
        elif key in _LIST_FIELDS:
            items = [item.strip() for item in value.split(",") if item.strip()]
            if key == "strategies":
                values[key] = tuple(items)
            elif key == "split_fractions":
                values[key] = tuple(float(item) for item in items)
            else:
                values[key] = tuple(int(item) for item in items)
        else:
            raise DataFormatError(f"line {line_no}: unknown config key {key!r}")
    try:
        return ExperimentConfig(**values)
    except ValueError as exc:
        raise DataFormatError(str(exc)) from exc


def format_experiment_config(config: ExperimentConfig) -> str:
    lines = [
        "shard_counts = " + ",".join(str(s) for s in config.shard_counts),
        f"num_slices = {config.num_slices}",
        f"partition = {config.partition}",
        "strategies = " + ",".join(config.strategies),
        "split_fractions = " + ",".join(repr(f) for f in config.split_fractions),
        "seeds = " + ",".join(str(s) for s in config.seeds),
        f"eo_mode = {config.eo_mode}",
    ]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ReportRow:
    partition: str
    shards: int
    seed: int
    strategy: str
    phase: str
    accuracy: float
    eo_gap: float
    expected_loss: float
    eo_gap_fit: float
    retrained_samples: int = 0
    full_retrain_samples: int = 0


def _row_sort_key(row: ReportRow) -> tuple:
    return (
        row.phase,
        row.partition,
        row.shards,
        _STRATEGY_ORDER.get(row.strategy, 99),
        row.seed,
    )


def _format_float(value: float) -> str:
    return format(float(value), ".6g")


@dataclass
class ResultsReport:
    rows: list[ReportRow] = field(default_factory=list)

    def sorted_rows(self) -> list[ReportRow]:
        return sorted(self.rows, key=_row_sort_key)

    def mean_rows(self) -> list[dict]:
        """Seed-averaged metrics per (partition, shards, strategy, phase) cell."""
        groups: dict[tuple, list[ReportRow]] = {}
        for row in self.sorted_rows():
            groups.setdefault((row.phase, row.partition, row.shards, row.strategy), []).append(row)
        means = []
        for (phase, partition, shards, strategy), rows in groups.items():
            entry = {
                "partition": partition,
                "shards": shards,
                "seed": "mean",
                "strategy": strategy,
                "phase": phase,
                "num_seeds": len(rows),
            }
            for column in _FLOAT_COLUMNS:
                entry[column] = float(np.mean([getattr(r, column) for r in rows]))
            entry["retrained_samples"] = float(np.mean([r.retrained_samples for r in rows]))
            entry["full_retrain_samples"] = float(np.mean([r.full_retrain_samples for r in rows]))
            means.append(entry)
        return means

    def to_json_dict(self) -> dict:
        def round6(value: float) -> float:
            return float(_format_float(value))

        rows = []
        for row in self.sorted_rows():
            record = {
                "partition": row.partition,
                "shards": row.shards,
                "seed": row.seed,
                "strategy": row.strategy,
                "phase": row.phase,
                "retrained_samples": row.retrained_samples,
                "full_retrain_samples": row.full_retrain_samples,
            }
            for column in _FLOAT_COLUMNS:
                record[column] = round6(getattr(row, column))
            rows.append(record)
        means = []
        for entry in self.mean_rows():
            means.append(
                {
                    key: (round6(value) if isinstance(value, float) else value)
                    for key, value in entry.items()
                }
            )
        return {"schema_version": REPORT_SCHEMA_VERSION, "rows": rows, "means": means}

    @classmethod
    def from_json_dict(cls, record: Mapping) -> "ResultsReport":
        try:
            rows = [
                ReportRow(
                    partition=str(r["partition"]),
                    shards=int(r["shards"]),
                    seed=int(r["seed"]),
                    strategy=str(r["strategy"]),
                    phase=str(r["phase"]),
                    accuracy=float(r["accuracy"]),
                    eo_gap=float(r["eo_gap"]),
                    expected_loss=float(r["expected_loss"]),
                    eo_gap_fit=float(r["eo_gap_fit"]),
                    retrained_samples=int(r["retrained_samples"]),
                    full_retrain_samples=int(r["full_retrain_samples"]),
                )
                for r in record["rows"]
            ]
        except (KeyError, TypeError) as exc:
            raise DataFormatError(f"malformed report record: {exc}") from exc
        return cls(rows)


def raw_vote_metrics(
    pred_matrix: np.ndarray,
    attrs: np.ndarray,
    labels: np.ndarray,
    loss: LossMatrix | None = None,
    eo_mode: str = "mean",
) -> ExpectedMetrics:
    """Metrics of the plain majority-vote predictor, by direct counting."""
    loss = loss or LossMatrix.zero_one()
    votes = sisa.majority_vote_matrix(pred_matrix)
    group_rates = fairness.rates(votes, attrs, labels)
    gap = fairness.eo_gap(group_rates, eo_mode)
    L = loss.as_array()
    labels = np.asarray(labels, dtype=np.int64)
    expected_loss = float(L[votes.astype(np.int64), labels].mean())
    accuracy = float((votes == labels).mean())
    return ExpectedMetrics(
        expected_loss=expected_loss,
        expected_accuracy=accuracy,
        eo_gap=gap,
        tpr={a: group_rates.tpr[a] for a in (0, 1)},
        fpr={a: group_rates.fpr[a] for a in (0, 1)},
    )


def _partition_for(train: Dataset, config: ExperimentConfig, shards: int, seed: int):
    partition_seed = derive_seed(seed, "partition", shards, config.partition)
    if config.partition == "uniform":
        return sisa.partition_uniform(train, shards, config.num_slices, partition_seed)
    return sisa.partition_one_fair_shard(train, shards, config.num_slices, partition_seed)


def _evaluate_ensemble(
    ensemble: sisa.Ensemble,
    cal: Dataset,
    test: Dataset,
    config: ExperimentConfig,
    loss: LossMatrix,
    *,
    partition: str,
    shards: int,
    seed: int,
    phase: str,
    retrained: int = 0,
    full_retrain: int = 0,
) -> list[ReportRow]:
    preds_cal = sisa.predict_matrix(ensemble, cal)
    preds_test = sisa.predict_matrix(ensemble, test)
    context = f"configuration partition={partition} shards={shards} seed={seed}"
    try:
        raw_test = raw_vote_metrics(preds_test, test.attributes(), test.labels(), loss, config.eo_mode)
        raw_cal = raw_vote_metrics(preds_cal, cal.attributes(), cal.labels(), loss, config.eo_mode)
        joint_cal = fairness.estimate_joint(preds_cal, cal.attributes(), cal.labels())
        joint_test = fairness.estimate_joint(preds_test, test.attributes(), test.labels())
    except UnsupportedCellError as exc:
        raise UnsupportedCellError(f"{context}: {exc}") from exc

    def row(strategy: str, metrics: ExpectedMetrics, fit_gap: float) -> ReportRow:
        return ReportRow(
            partition=partition,
            shards=shards,
            seed=seed,
            strategy=strategy,
            phase=phase,
            accuracy=metrics.expected_accuracy,
            eo_gap=metrics.eo_gap,
            expected_loss=metrics.expected_loss,
            eo_gap_fit=fit_gap,
            retrained_samples=retrained,
            full_retrain_samples=full_retrain,
        )

    rows = [row(RAW_ENSEMBLE, raw_test, raw_cal.eo_gap)]
    for name in config.strategies:
        try:
            result = postprocess.fit_strategy(name, joint_cal, loss, config.eo_mode)
            test_metrics = fairness.expected_metrics(
                result.ensemble_table, joint_test, loss, config.eo_mode
            )
        except FairshardError as exc:
            raise type(exc)(f"{context} strategy={name}: {exc}") from exc
        rows.append(row(name, test_metrics, result.metrics.eo_gap))
    return rows


def run_experiment(
    dataset: Dataset,
    config: ExperimentConfig,
    hp: Hyperparams | None = None,
    loss: LossMatrix | None = None,
) -> ResultsReport:
    """Train, post-process and evaluate every (seed, shard count) cell."""
    hp = hp or Hyperparams()
    loss = loss or LossMatrix.zero_one()
    largest = max(config.shard_counts) * config.num_slices
    train_size = int(round(config.split_fractions[0] * len(dataset)))
    if train_size < largest:
        raise PartitionError(
            f"train split of ~{train_size} samples cannot fill {largest} shard-slices"
        )
    rows: list[ReportRow] = []
    for seed in config.seeds:
        train, cal, test = split_dataset(dataset, config.split_fractions, seed)
        for shards in config.shard_counts:
            assignment = _partition_for(train, config, shards, seed)
            ensemble = sisa.train_ensemble(train, assignment, hp)
            rows.extend(
                _evaluate_ensemble(
                    ensemble,
                    cal,
                    test,
                    config,
                    loss,
                    partition=config.partition,
                    shards=shards,
                    seed=seed,
                    phase=PHASE_FIT,
                )
            )
    return ResultsReport(rows)


def run_unlearning_benchmark(
    dataset: Dataset,
    config: ExperimentConfig,
    deletion_fraction: float,
    hp: Hyperparams | None = None,
    loss: LossMatrix | None = None,
) -> ResultsReport:
    """Experiment rows plus post-unlearning rows with retraining-cost counters.

    Issues one seeded random deletion request per (seed, shard count) cell,
    records how many samples checkpoint-resumed retraining touches versus a
    scratch retrain, and re-evaluates all predictors on the untouched splits.
    """
    if not 0.0 < deletion_fraction < 1.0:
        raise ValueError("deletion_fraction must lie strictly between 0 and 1")
    hp = hp or Hyperparams()
    loss = loss or LossMatrix.zero_one()
    rows: list[ReportRow] = []
    for seed in config.seeds:
        train, cal, test = split_dataset(dataset, config.split_fractions, seed)
        removal_count = max(1, math.ceil(deletion_fraction * len(train)))
        for shards in config.shard_counts:
            assignment = _partition_for(train, config, shards, seed)
            ensemble = sisa.train_ensemble(train, assignment, hp)
            rows.extend(
                _evaluate_ensemble(
                    ensemble, cal, test, config, loss,
                    partition=config.partition, shards=shards, seed=seed, phase=PHASE_FIT,
                )
            )
            rng = rng_for(seed, "unlearn-request", shards)
            removed = rng.choice(np.array(train.ids, dtype=np.int64), size=removal_count, replace=False)
            request = sisa.UnlearnRequest(frozenset(int(i) for i in removed))
            cost = sisa.retraining_cost(assignment, request.sample_ids)
            _, unlearned = sisa.unlearn(train, ensemble, request, hp)
            rows.extend(
                _evaluate_ensemble(
                    unlearned, cal, test, config, loss,
                    partition=config.partition, shards=shards, seed=seed,
                    phase=PHASE_POST_UNLEARN,
                    retrained=cost.retrained_samples,
                    full_retrain=cost.full_retrain_samples,
                )
            )
    return ResultsReport(rows)


# ---------------------------------------------------------------------------
# Emission


def emit_results(
    report: ResultsReport,
    out_dir: Path | str,
    formats: Sequence[str] = ("csv", "json"),
    stem: str = "results",
) -> list[Path]:
    """Write the report with a stable column order and 6-significant-digit floats.

    Output bytes are deterministic for identical reports.
    """
    if not report.rows:
        raise ValueError("cannot emit an empty report")
    unknown = set(formats) - {"csv", "json"}
    if unknown:
        raise ValueError(f"unknown output formats {sorted(unknown)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    if "csv" in formats:
        path = out / f"{stem}.csv"
        lines = [",".join(REPORT_COLUMNS + ("num_seeds",))]
        for row in report.sorted_rows():
            cells = []
            for column in REPORT_COLUMNS:
                value = getattr(row, column)
                cells.append(_format_float(value) if column in _FLOAT_COLUMNS else str(value))
            lines.append(",".join(cells + [""]))
        for entry in report.mean_rows():
            cells = [
                _format_float(entry[column]) if isinstance(entry[column], float) else str(entry[column])
                for column in REPORT_COLUMNS
            ]
            lines.append(",".join(cells + [str(entry["num_seeds"])]))
        path.write_text("\n".join(lines) + "\n")
        written.append(path)
    if "json" in formats:
        path = out / f"{stem}.json"
        path.write_text(json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n")
        written.append(path)
    return written


def load_report_csv(path: Path | str) -> ResultsReport:
    """Rebuild per-seed rows from an emitted CSV (mean rows are recomputed)."""
    path = Path(path)
    rows: list[ReportRow] = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames[: len(REPORT_COLUMNS)]) != REPORT_COLUMNS:
            raise DataFormatError(f"{path}: unexpected report header {reader.fieldnames}")
        for record in reader:
            if record["seed"] == "mean":
                continue
            rows.append(
                ReportRow(
                    partition=record["partition"],
                    shards=int(record["shards"]),
                    seed=int(record["seed"]),
                    strategy=record["strategy"],
                    phase=record["phase"],
                    accuracy=float(record["accuracy"]),
                    eo_gap=float(record["eo_gap"]),
                    expected_loss=float(record["expected_loss"]),
                    eo_gap_fit=float(record["eo_gap_fit"]),
                    retrained_samples=int(record["retrained_samples"]),
                    full_retrain_samples=int(record["full_retrain_samples"]),
                )
            )
    if not rows:
        raise DataFormatError(f"{path}: no report rows")
    return ResultsReport(rows)


def load_report_json(path: Path | str) -> ResultsReport:
    try:
        record = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid JSON: {exc}") from exc
    return ResultsReport.from_json_dict(record)
