"""Equalized-odds post-processing for single predictors and ensembles.

All three strategies produce a randomized derived predictor: a table of
probabilities of emitting 1 given the constituent prediction vector and the
sensitive attribute. The optimal table is found by a linear program whose
objective is the expected loss and whose two equality rows force equal true-
and false-positive rates across the attribute groups; the table is fit on one
(calibration) joint distribution and can be evaluated in closed form on any
other.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import fairness
from .errors import (
    DataFormatError,
    DegenerateJointError,
    DimensionMismatch,
    MissingEntryError,
)
from .fairness import ExpectedMetrics, JointDistribution, bits_of, bitstring_of, code_of, code_of_bitstring
from .simplex import minimize_box
from .sisa import majority_vote

STRATEGY_AGG_THEN_PP = "agg_then_pp"
STRATEGY_PP_THEN_AGG = "pp_then_agg"
STRATEGY_ENSEMBLE_PP = "ensemble_pp"
STRATEGY_NAMES = (STRATEGY_AGG_THEN_PP, STRATEGY_PP_THEN_AGG, STRATEGY_ENSEMBLE_PP)

_SNAP = 1e-10


@dataclass(frozen=True)
class LossMatrix:
    """Loss for (emitted label, true label) pairs; entries finite, non-negative."""

    values: tuple[tuple[float, float], tuple[float, float]]

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.shape != (2, 2):
            raise DimensionMismatch(f"loss matrix must be 2x2, got {arr.shape}")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValueError("loss entries must be finite and non-negative")
        object.__setattr__(
            self, "values", tuple(tuple(float(v) for v in row) for row in arr)
        )

    @classmethod
    def zero_one(cls) -> "LossMatrix":
        return cls(((0.0, 1.0), (1.0, 0.0)))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)

    def __call__(self, emitted: int, true: int) -> float:
        return self.values[emitted][true]


@dataclass
class DerivedPredictorTable:
    """Pr(emit 1 | prediction vector, attribute), for every cell of the domain.

    ``probs`` is indexed ``[code, attribute]`` with the usual bit-k encoding.
    NaN marks an unset cell; a table must be complete before it is serialized
    or applied.
    """

    num_constituents: int
    probs: np.ndarray

    def __post_init__(self) -> None:
        p = np.array(self.probs, dtype=np.float64, copy=True)
        expected = (2**self.num_constituents, 2)
        if p.shape != expected:
            raise DimensionMismatch(f"probs has shape {p.shape}, expected {expected}")
        valid = np.isnan(p) | ((p >= 0.0) & (p <= 1.0))
        if not valid.all():
            raise ValueError("table probabilities must lie in [0, 1]")
        self.probs = p

    @property
    def complete(self) -> bool:
        return not np.isnan(self.probs).any()

    def prob(self, yhat: Sequence[int] | int, a: int) -> float:
        code = yhat if isinstance(yhat, (int, np.integer)) else code_of(yhat)
        if not 0 <= code < self.probs.shape[0]:
            raise MissingEntryError(f"prediction code {code} out of range")
        if a not in (0, 1):
            raise MissingEntryError(f"attribute must be 0 or 1, got {a}")
        value = float(self.probs[code, a])
        if np.isnan(value):
            raise MissingEntryError(
                f"table has no entry for (yhat={bitstring_of(int(code), self.num_constituents)}, a={a})"
            )
        return value

    def to_json_dict(self) -> dict:
        if not self.complete:
            raise MissingEntryError("cannot serialize a table with unset cells")
        entries = [
            {"yhat": bitstring_of(code, self.num_constituents), "a": a, "p": float(self.probs[code, a])}
            for code in range(2**self.num_constituents)
            for a in (0, 1)
        ]
        return {"S": self.num_constituents, "entries": entries}

    @classmethod
    def from_json_dict(cls, record: Mapping) -> "DerivedPredictorTable":
        try:
            s = int(record["S"])
            probs = np.full((2**s, 2), np.nan)
            for entry in record["entries"]:
                if len(entry["yhat"]) != s:
                    raise DataFormatError(f"bitstring {entry['yhat']!r} does not have length {s}")
                probs[code_of_bitstring(entry["yhat"]), int(entry["a"])] = float(entry["p"])
        except (KeyError, TypeError) as exc:
            raise DataFormatError(f"malformed table record: {exc}") from exc
        if np.isnan(probs).any():
            raise DataFormatError("table record does not cover its full (yhat, a) domain")
        return cls(s, probs)

    def save(self, path: Path | str) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: Path | str) -> "DerivedPredictorTable":
        try:
            return cls.from_json_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{path}: invalid JSON: {exc}") from exc


def apply_derived(table: DerivedPredictorTable, yhat: Sequence[int] | int, a: int, uniform_draw: float) -> int:
    """Realize the randomized predictor: emit 1 iff the caller's draw falls below p.

    The caller supplies the uniform draw so that evaluation stays reproducible;
    the comparison is strict, so p=0 never emits 1 and p=1 always does.
    """
    if not 0.0 <= uniform_draw < 1.0:
        raise ValueError("uniform_draw must lie in [0, 1)")
    return 1 if uniform_draw < table.prob(yhat, a) else 0


@dataclass
class LPProblem:
    """Box-constrained LP with one variable per (prediction vector, attribute) cell.

    Variable ``2*code + a`` is the probability of emitting 1 in that cell; the
    two equality rows are the true- and false-positive-rate parity constraints
    and the objective (plus constant) expands the expected loss.
    """

    num_constituents: int
    objective: np.ndarray
    objective_constant: float
    eq_rows: np.ndarray
    eq_rhs: np.ndarray
    cell_mass: np.ndarray  # conditioning mass of each variable's cell

    @property
    def num_vars(self) -> int:
        return int(self.objective.shape[0])

    def variable_cell(self, index: int) -> tuple[int, int]:
        return index // 2, index % 2

    def evaluate(self, values: np.ndarray) -> float:
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (self.num_vars,):
            raise DimensionMismatch(f"expected {self.num_vars} values, got shape {values.shape}")
        return float(self.objective @ values) + self.objective_constant


def _check_supported(joint: JointDistribution) -> None:
    margins = joint.attr_label_mass()
    for a in (0, 1):
        for y in (0, 1):
            if margins[a, y] == 0.0:
                raise DegenerateJointError(
                    f"joint has no mass on (A={a}, Y={y}); the parity constraint for that "
                    f"group is undefined"
                )


def build_ensemble_lp(joint: JointDistribution, loss: LossMatrix | None = None) -> LPProblem:
    """LP over all 2^(S+1) derived-predictor probabilities for an S-ensemble."""
    loss = loss or LossMatrix.zero_one()
    _check_supported(joint)
    L = loss.as_array()
    s = joint.num_constituents
    num_vars = 2 ** (s + 1)
    # objective: sum over cells of mass * (p * loss(1, y) + (1 - p) * loss(0, y))
    delta = joint.mass[:, :, 0] * (L[1, 0] - L[0, 0]) + joint.mass[:, :, 1] * (L[1, 1] - L[0, 1])
    constant = float(joint.mass[:, :, 0].sum() * L[0, 0] + joint.mass[:, :, 1].sum() * L[0, 1])
    objective = delta.reshape(num_vars)
    # parity rows: E[emit 1 | A=0, Y=y] - E[emit 1 | A=1, Y=y] = 0 for y in {1, 0}
    rows = np.zeros((2, num_vars))
    margins = joint.attr_label_mass()
    for row_index, y in enumerate((1, 0)):
        coeff = np.zeros((2**s, 2))
        coeff[:, 0] = joint.mass[:, 0, y] / margins[0, y]
        coeff[:, 1] = -joint.mass[:, 1, y] / margins[1, y]
        rows[row_index] = coeff.reshape(num_vars)
    return LPProblem(
        num_constituents=s,
        objective=objective,
        objective_constant=constant,
        eq_rows=rows,
        eq_rhs=np.zeros(2),
        cell_mass=joint.conditioning_mass().reshape(num_vars),
    )


def build_hps_lp(joint: JointDistribution, loss: LossMatrix | None = None) -> LPProblem:
    """The classic four-variable single-predictor program (Hardt-Price-Srebro)."""
    if joint.num_constituents != 1:
        raise DimensionMismatch(
            f"single-predictor program needs a joint over one predictor, got {joint.num_constituents}"
        )
    return build_ensemble_lp(joint, loss)


def _snap_unit(value: float) -> float:
    if abs(value) < _SNAP:
        return 0.0
    if abs(value - 1.0) < _SNAP:
        return 1.0
    return min(max(value, 0.0), 1.0)


def solve_lp(problem: LPProblem) -> tuple[np.ndarray, float]:
    """Optimal table values and objective (expected loss, constant included).

    Among optimal vertices the lexicographically smallest variable vector is
    returned, found by minimizing each coordinate in turn over the optimal
    face; this makes the solution deterministic even when the optimum is not
    unique. Variables whose columns are entirely zero (cells the joint never
    visits) are fixed to 0 here and given meaningful values by the strategy
    layer.
    """
    c = problem.objective
    A = problem.eq_rows
    b = problem.eq_rhs.astype(np.float64).copy()
    values = np.zeros(problem.num_vars)
    active = np.flatnonzero((c != 0.0) | np.any(A != 0.0, axis=0))
    if active.size == 0:
        return values, problem.objective_constant
    best = minimize_box(c[active], A[:, active], b)
    z_star = best.objective
    # Lexicographic refinement: pin coordinates one at a time over the
    # optimal face, substituting fixed values into the right-hand sides.
    rhs = b.copy()
    z_rhs = z_star
    for position, index in enumerate(active):
        remaining = active[position:]
        face_rows = np.vstack([A[:, remaining], c[remaining]])
        face_rhs = np.append(rhs, z_rhs)
        unit = np.zeros(remaining.size)
        unit[0] = 1.0
        stage = minimize_box(unit, face_rows, face_rhs)
        value = _snap_unit(float(stage.x[0]))
        values[index] = value
        rhs -= A[:, index] * value
        z_rhs -= c[index] * value
    objective = problem.evaluate(values)
    residual = float(np.abs(A @ values - b).max())
    if residual > 1e-9:
        raise RuntimeError(f"solved table violates parity rows (residual {residual:.3e})")
    return values, objective


def _vote_of_code(code: int, num_constituents: int) -> int:
    return majority_vote(bits_of(code, num_constituents))


def _votes_by_code(num_constituents: int) -> np.ndarray:
    return np.array(
        [_vote_of_code(code, num_constituents) for code in range(2**num_constituents)],
        dtype=np.int64,
    )


def _table_from_solution(
    problem: LPProblem, values: np.ndarray, joint: JointDistribution
) -> DerivedPredictorTable:
    # Cells with zero conditioning mass are unconstrained by the program; give
    # them the majority vote of their prediction vector so the table behaves
    # sensibly on inputs the calibration joint never produced.
    s = problem.num_constituents
    p = values.reshape(2**s, 2).copy()
    votes = _votes_by_code(s).astype(np.float64)
    mass = joint.conditioning_mass()
    p = np.where(mass > 0.0, p, votes[:, None])
    return DerivedPredictorTable(s, p)


@dataclass
class StrategyResult:
    """A fitted post-processing strategy.

    ``tables`` holds what was actually fit (one table, or one per constituent
    for post-process-then-aggregate); ``ensemble_table`` is the equivalent
    predictor over the full (prediction vector, attribute) domain, which makes
    every strategy directly comparable and evaluable on any joint.
    """

    strategy: str
    tables: list[DerivedPredictorTable]
    ensemble_table: DerivedPredictorTable
    objective: float
    metrics: ExpectedMetrics


def collapse_by_vote(joint: JointDistribution) -> JointDistribution:
    """Collapse an ensemble joint through the majority vote to a single predictor."""
    s = joint.num_constituents
    votes = _votes_by_code(s)
    mass = np.zeros((2, 2, 2))
    for value in (0, 1):
        mass[value] = joint.mass[votes == value].sum(axis=0)
    return JointDistribution(1, mass, sample_count=joint.sample_count)


def strategy_agg_then_pp(
    joint: JointDistribution, loss: LossMatrix | None = None, eo_mode: str = "mean"
) -> StrategyResult:
    """Majority-vote first, then post-process the single aggregated predictor."""
    loss = loss or LossMatrix.zero_one()
    collapsed = collapse_by_vote(joint)
    problem = build_hps_lp(collapsed, loss)
    values, objective = solve_lp(problem)
    base = _table_from_solution(problem, values, collapsed)
    votes = _votes_by_code(joint.num_constituents)
    ensemble_table = DerivedPredictorTable(joint.num_constituents, base.probs[votes, :])
    metrics = fairness.expected_metrics(ensemble_table, joint, loss, eo_mode)
    return StrategyResult(STRATEGY_AGG_THEN_PP, [base], ensemble_table, objective, metrics)


def _majority_prob(vote_probs: Sequence[float]) -> float:
    # Distribution of the number of 1-votes among independent Bernoulli votes,
    # by direct convolution; ties (even counts) resolve to 0 like the vote.
    dist = np.array([1.0])
    for q in vote_probs:
        dist = np.convolve(dist, np.array([1.0 - q, q]))
    threshold = len(vote_probs) // 2 + 1
    # rounding in the convolution can leave the tail a few ulp outside [0, 1]
    return float(min(max(dist[threshold:].sum(), 0.0), 1.0))


def strategy_pp_then_agg(
    joint: JointDistribution, loss: LossMatrix | None = None, eo_mode: str = "mean"
) -> StrategyResult:
    """Post-process each constituent on its own marginal, then majority-vote.

    The composite predictor draws each post-processed vote independently; its
    metrics are computed in closed form by convolving the per-constituent vote
    probabilities within every (prediction vector, attribute) cell.
    """
    loss = loss or LossMatrix.zero_one()
    s = joint.num_constituents
    tables: list[DerivedPredictorTable] = []
    for k in range(s):
        marginal = joint.marginal_constituent(k)
        problem = build_hps_lp(marginal, loss)
        values, _ = solve_lp(problem)
        tables.append(_table_from_solution(problem, values, marginal))
    probs = np.empty((2**s, 2))
    for code in range(2**s):
        bits = bits_of(code, s)
        for a in (0, 1):
            probs[code, a] = _majority_prob([tables[k].probs[bits[k], a] for k in range(s)])
    ensemble_table = DerivedPredictorTable(s, probs)
    metrics = fairness.expected_metrics(ensemble_table, joint, loss, eo_mode)
    return StrategyResult(
        STRATEGY_PP_THEN_AGG, tables, ensemble_table, metrics.expected_loss, metrics
    )


def strategy_ensemble_pp(
    joint: JointDistribution, loss: LossMatrix | None = None, eo_mode: str = "mean"
) -> StrategyResult:
    """Post-process the full prediction vector at once (the optimal strategy)."""
    loss = loss or LossMatrix.zero_one()
    problem = build_ensemble_lp(joint, loss)
    values, objective = solve_lp(problem)
    table = _table_from_solution(problem, values, joint)
    metrics = fairness.expected_metrics(table, joint, loss, eo_mode)
    return StrategyResult(STRATEGY_ENSEMBLE_PP, [table], table, objective, metrics)


_STRATEGY_FUNCTIONS = {
    STRATEGY_AGG_THEN_PP: strategy_agg_then_pp,
    STRATEGY_PP_THEN_AGG: strategy_pp_then_agg,
    STRATEGY_ENSEMBLE_PP: strategy_ensemble_pp,
}


def fit_strategy(
    name: str, joint: JointDistribution, loss: LossMatrix | None = None, eo_mode: str = "mean"
) -> StrategyResult:
    try:
        fn = _STRATEGY_FUNCTIONS[name]
    except KeyError:
        raise ValueError(f"unknown strategy {name!r}; expected one of {STRATEGY_NAMES}") from None
    return fn(joint, loss, eo_mode)
