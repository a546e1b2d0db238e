"""Shared test utilities: random instances and Monte-Carlo oracles."""

from __future__ import annotations

import numpy as np

from fairshard import fairness, harness
from fairshard.fairness import JointDistribution
from fairshard.learner import Dataset, Hyperparams, Sample
from fairshard.postprocess import DerivedPredictorTable, LossMatrix

FAST_HP = Hyperparams(learning_rate=0.5, epochs_per_slice=40, l2_penalty=1e-3)


def random_joint(rng: np.random.Generator, num_constituents: int) -> JointDistribution:
    """Full-support random joint (Dirichlet mass over every cell)."""
    cells = 2**num_constituents * 4
    mass = rng.dirichlet(np.ones(cells)).reshape(2**num_constituents, 2, 2)
    return JointDistribution(num_constituents, mass / mass.sum())


def random_table(rng: np.random.Generator, num_constituents: int) -> DerivedPredictorTable:
    return DerivedPredictorTable(num_constituents, rng.random((2**num_constituents, 2)))


def random_dataset(rng: np.random.Generator, n: int, dim: int) -> Dataset:
    X = rng.standard_normal((n, dim))
    attrs = rng.integers(0, 2, size=n)
    labels = rng.integers(0, 2, size=n)
    return Dataset(Sample(i, X[i], int(attrs[i]), int(labels[i])) for i in range(n))


def biased_dataset(seed: int, n: int = 400, dim: int = 3) -> Dataset:
    """Small dataset where the groups genuinely differ (all EO cells populated)."""
    return harness.gen_synthetic(
        harness.GeneratorConfig(
            n_samples=n,
            feature_dim=dim,
            attr_prevalence=0.45,
            positive_rate=(0.35, 0.65),
            label_noise=(0.02, 0.08),
            class_sep=2.0,
            group_shift=1.0,
            seed=seed,
        )
    )


def sample_joint_cells(
    rng: np.random.Generator, joint: JointDistribution, draws: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sample (code, attribute, label) tuples from a joint distribution."""
    flat = joint.mass.reshape(-1)
    picks = rng.choice(flat.size, size=draws, p=flat)
    codes = picks // 4
    attrs = (picks % 4) // 2
    labels = picks % 2
    return codes, attrs, labels


def mc_metrics_for_table(
    rng: np.random.Generator,
    table: DerivedPredictorTable,
    joint: JointDistribution,
    loss: LossMatrix,
    draws: int,
) -> dict:
    """Monte-Carlo estimates (with standard errors) of a derived predictor's metrics."""
    codes, attrs, labels = sample_joint_cells(rng, joint, draws)
    p = table.probs[codes, attrs]
    emitted = (rng.random(draws) < p).astype(np.int64)
    return _mc_summarize(emitted, attrs, labels, loss)


def mc_metrics_for_vote_tables(
    rng: np.random.Generator,
    tables: list[DerivedPredictorTable],
    joint: JointDistribution,
    loss: LossMatrix,
    draws: int,
) -> dict:
    """Monte-Carlo metrics of majority-voted independently post-processed votes."""
    s = joint.num_constituents
    codes, attrs, labels = sample_joint_cells(rng, joint, draws)
    votes = np.zeros(draws, dtype=np.int64)
    for k in range(s):
        bit = (codes >> k) & 1
        q = tables[k].probs[bit, attrs]
        votes += (rng.random(draws) < q).astype(np.int64)
    emitted = (2 * votes > s).astype(np.int64)
    return _mc_summarize(emitted, attrs, labels, loss)


def _mc_summarize(emitted: np.ndarray, attrs: np.ndarray, labels: np.ndarray, loss: LossMatrix) -> dict:
    n = emitted.shape[0]
    L = loss.as_array()
    losses = L[emitted, labels]
    out = {
        "expected_loss": (float(losses.mean()), float(losses.std(ddof=1) / np.sqrt(n))),
        "expected_accuracy": _rate_and_se(emitted == labels),
    }
    for a in (0, 1):
        for y, name in ((1, "tpr"), (0, "fpr")):
            cell = (attrs == a) & (labels == y)
            out[f"{name}{a}"] = _rate_and_se(emitted[cell] == 1)
    return out


def _rate_and_se(hits: np.ndarray) -> tuple[float, float]:
    n = hits.shape[0]
    rate = float(hits.mean())
    se = float(np.sqrt(max(rate * (1.0 - rate), 1e-12) / n))
    return rate, se


def assert_within_se(mc_value: tuple[float, float], exact: float, sigmas: float = 3.0) -> None:
    value, se = mc_value
    assert abs(value - exact) <= sigmas * se + 1e-12, (
        f"Monte-Carlo {value} vs exact {exact} differs by more than {sigmas} standard errors ({se})"
    )
