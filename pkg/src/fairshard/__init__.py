"""Sharded ensemble training with exact unlearning and equalized-odds post-processing."""

__version__ = "0.1.0"

from .errors import FairshardError
from .learner import Dataset, Hyperparams, ModelParams, Sample
from .sisa import (
    CheckpointStore,
    Ensemble,
    ShardAssignment,
    UnlearnRequest,
    majority_vote,
    partition_one_fair_shard,
    partition_uniform,
    train_ensemble,
    unlearn,
)
from .fairness import GroupRates, JointDistribution, eo_gap, estimate_joint, expected_metrics, rates
from .postprocess import (
    DerivedPredictorTable,
    LossMatrix,
    LPProblem,
    StrategyResult,
    apply_derived,
    build_ensemble_lp,
    build_hps_lp,
    solve_lp,
    strategy_agg_then_pp,
    strategy_ensemble_pp,
    strategy_pp_then_agg,
)
from .oracle import oracle_expected_loss, oracle_optimal
from .harness import (
    ExperimentConfig,
    GeneratorConfig,
    ResultsReport,
    emit_results,
    gen_synthetic,
    ingest_dataset_csv,
    ingest_predictions_csv,
    run_experiment,
    run_unlearning_benchmark,
)

__all__ = [
    "__version__",
    "FairshardError",
    "Dataset",
    "Hyperparams",
    "ModelParams",
    "Sample",
    "CheckpointStore",
    "Ensemble",
    "ShardAssignment",
    "UnlearnRequest",
    "majority_vote",
    "partition_one_fair_shard",
    "partition_uniform",
    "train_ensemble",
    "unlearn",
    "GroupRates",
    "JointDistribution",
    "eo_gap",
    "estimate_joint",
    "expected_metrics",
    "rates",
    "DerivedPredictorTable",
    "LossMatrix",
    "LPProblem",
    "StrategyResult",
    "apply_derived",
    "build_ensemble_lp",
    "build_hps_lp",
    "solve_lp",
    "strategy_agg_then_pp",
    "strategy_ensemble_pp",
    "strategy_pp_then_agg",
    "oracle_expected_loss",
    "oracle_optimal",
    "ExperimentConfig",
    "GeneratorConfig",
    "ResultsReport",
    "emit_results",
    "gen_synthetic",
    "ingest_dataset_csv",
    "ingest_predictions_csv",
    "run_experiment",
    "run_unlearning_benchmark",
]
