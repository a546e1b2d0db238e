"""Brute-force certification of the post-processing linear program.

Independent of the simplex path: the feasible polytope's basic solutions are
enumerated directly (every choice of at most two coordinates off their bounds,
all bound patterns for the rest), and expected losses are recomputed by
exhaustive summation. Capped at three constituents; this module exists to
certify the general machinery, not to run experiments.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import DegenerateJointError, InfeasibleError, MissingEntryError
from .fairness import JointDistribution
from .postprocess import DerivedPredictorTable, LossMatrix

ORACLE_MAX_CONSTITUENTS = 3
_FEAS_TOL = 1e-9
_SINGULAR_TOL = 1e-12


@dataclass
class VertexSet:
    """Feasible basic solutions of the parity polytope, with their objectives."""

    vertices: np.ndarray  # (K, V)
    objectives: np.ndarray  # (K,)
    bases_examined: int


def _parity_rows(joint: JointDistribution) -> np.ndarray:
    """The two rate-parity rows, built cell by cell."""
    s = joint.num_constituents
    num_vars = 2 ** (s + 1)
    rows = np.zeros((2, num_vars))
    for row_index, y in enumerate((1, 0)):
        for a in (0, 1):
            denom = 0.0
            for code in range(2**s):
                denom += float(joint.mass[code, a, y])
            if denom == 0.0:
                raise DegenerateJointError(f"joint has no mass on (A={a}, Y={y})")
            sign = 1.0 if a == 0 else -1.0
            for code in range(2**s):
                rows[row_index, 2 * code + a] = sign * float(joint.mass[code, a, y]) / denom
    return rows


def _objective_terms(joint: JointDistribution, loss: LossMatrix) -> tuple[np.ndarray, float]:
    s = joint.num_constituents
    num_vars = 2 ** (s + 1)
    coeff = np.zeros(num_vars)
    constant = 0.0
    for code in range(2**s):
        for a in (0, 1):
            for y in (0, 1):
                mass = float(joint.mass[code, a, y])
                constant += mass * loss(0, y)
                coeff[2 * code + a] += mass * (loss(1, y) - loss(0, y))
    return coeff, constant


def _bit_patterns(width: int) -> np.ndarray:
    if width == 0:
        return np.zeros((1, 0))
    values = np.arange(2**width, dtype=np.int64)
    return ((values[:, None] >> np.arange(width)) & 1).astype(np.float64)


def _check_scale(joint: JointDistribution) -> None:
    if joint.num_constituents > ORACLE_MAX_CONSTITUENTS:
        raise ValueError(
            f"oracle enumerates at most {ORACLE_MAX_CONSTITUENTS} constituents, "
            f"got {joint.num_constituents}"
        )


def enumerate_vertices(joint: JointDistribution, loss: LossMatrix | None = None) -> VertexSet:
    """All basic feasible solutions of {0 <= p <= 1, both parity rows hold}."""
    _check_scale(joint)
    loss = loss or LossMatrix.zero_one()
    A = _parity_rows(joint)
    num_vars = A.shape[1]
    coeff, constant = _objective_terms(joint, loss)
    found: list[np.ndarray] = []
    bases = 0

    # Every coordinate on a bound.
    patterns = _bit_patterns(num_vars)
    bases += patterns.shape[0]
    residual = patterns @ A.T
    ok = np.abs(residual).max(axis=1) <= _FEAS_TOL
    if ok.any():
        found.append(patterns[ok])

    # One coordinate free, solved from one row and checked against the other.
    rest_patterns = _bit_patterns(num_vars - 1)
    for i in range(num_vars):
        bases += rest_patterns.shape[0]
        rest = [j for j in range(num_vars) if j != i]
        rhs = -(rest_patterns @ A[:, rest].T)  # (K, 2)
        pivot_row = int(np.argmax(np.abs(A[:, i])))
        if abs(A[pivot_row, i]) <= _SINGULAR_TOL:
            continue
        other = 1 - pivot_row
        value = rhs[:, pivot_row] / A[pivot_row, i]
        ok = (
            (np.abs(value * A[other, i] - rhs[:, other]) <= _FEAS_TOL)
            & (value >= -_FEAS_TOL)
            & (value <= 1.0 + _FEAS_TOL)
        )
        if ok.any():
            block = np.empty((int(ok.sum()), num_vars))
            block[:, rest] = rest_patterns[ok]
            block[:, i] = np.clip(value[ok], 0.0, 1.0)
            found.append(block)

    # Two coordinates free, solved from the 2x2 system.
    rest_patterns = _bit_patterns(num_vars - 2)
    for i, j in combinations(range(num_vars), 2):
        bases += rest_patterns.shape[0]
        M = A[:, [i, j]]
        det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
        if abs(det) <= _SINGULAR_TOL:
            continue
        rest = [k for k in range(num_vars) if k != i and k != j]
        rhs = -(rest_patterns @ A[:, rest].T)
        vi = (M[1, 1] * rhs[:, 0] - M[0, 1] * rhs[:, 1]) / det
        vj = (M[0, 0] * rhs[:, 1] - M[1, 0] * rhs[:, 0]) / det
        ok = (
            (vi >= -_FEAS_TOL)
            & (vi <= 1.0 + _FEAS_TOL)
            & (vj >= -_FEAS_TOL)
            & (vj <= 1.0 + _FEAS_TOL)
        )
        if ok.any():
            block = np.empty((int(ok.sum()), num_vars))
            block[:, rest] = rest_patterns[ok]
            block[:, i] = np.clip(vi[ok], 0.0, 1.0)
            block[:, j] = np.clip(vj[ok], 0.0, 1.0)
            found.append(block)

    if not found:
        raise InfeasibleError("no basic feasible solution within tolerance")
    stacked = np.vstack(found)
    unique = np.unique(np.round(stacked, 10), axis=0)
    objectives = unique @ coeff + constant
    return VertexSet(vertices=unique, objectives=objectives, bases_examined=bases)


def oracle_optimal(
    joint: JointDistribution, loss: LossMatrix | None = None
) -> tuple[DerivedPredictorTable, float]:
    """Minimum-loss parity-feasible vertex by exhaustive enumeration."""
    vertex_set = enumerate_vertices(joint, loss)
    index = int(np.argmin(vertex_set.objectives))
    best = vertex_set.vertices[index]
    table = DerivedPredictorTable(
        joint.num_constituents, best.reshape(2**joint.num_constituents, 2)
    )
    return table, float(vertex_set.objectives[index])


def oracle_expected_loss(
    table: DerivedPredictorTable, joint: JointDistribution, loss: LossMatrix | None = None
) -> float:
    """Expected loss by exhaustive summation over every (yhat, a, y, emitted) tuple."""
    loss = loss or LossMatrix.zero_one()
    if not table.complete:
        raise MissingEntryError("oracle needs a complete table")
    if table.num_constituents != joint.num_constituents:
        raise MissingEntryError(
            f"table is over {table.num_constituents} constituents, joint over {joint.num_constituents}"
        )
    total = 0.0
    for code in range(2**joint.num_constituents):
        for a in (0, 1):
            for y in (0, 1):
                mass = float(joint.mass[code, a, y])
                p = float(table.probs[code, a])
                for emitted in (0, 1):
                    chance = p if emitted == 1 else 1.0 - p
                    total += mass * chance * loss(emitted, y)
    return total
