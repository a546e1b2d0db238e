"""Equalized-odds measurement and empirical joint distributions.

A joint distribution here is the empirical probability mass over
(prediction vector, sensitive attribute, true label). Prediction vectors are
encoded as integers with constituent k on bit k; the bitstring form used in
JSON puts constituent 0 first, so code 0b101 with S=3 serialises as "101".
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Protocol, Sequence

import numpy as np

from .errors import (
    DataFormatError,
    DimensionMismatch,
    MissingEntryError,
    UnsupportedCellError,
)

MASS_TOLERANCE = 1e-12


def code_of(bits: Sequence[int]) -> int:
    """Integer code of a prediction vector; constituent k occupies bit k."""
    code = 0
    for k, b in enumerate(bits):
        if b not in (0, 1):
            raise ValueError("prediction vector entries must be 0 or 1")
        code |= int(b) << k
    return code


def bits_of(code: int, num_constituents: int) -> tuple[int, ...]:
    return tuple((code >> k) & 1 for k in range(num_constituents))


def bitstring_of(code: int, num_constituents: int) -> str:
    return "".join(str((code >> k) & 1) for k in range(num_constituents))


def code_of_bitstring(text: str) -> int:
    if not text or any(ch not in "01" for ch in text):
        raise DataFormatError(f"invalid prediction bitstring {text!r}")
    return code_of([int(ch) for ch in text])


@dataclass
class GroupRates:
    """Per-attribute true/false positive rates with their supporting counts.

    A rate whose conditioning cell has zero support is stored as None rather
    than silently imputed; downstream code must treat that explicitly.
    """

    tpr: dict[int, float | None]
    fpr: dict[int, float | None]
    support: dict[tuple[int, int], int]  # (attribute, label) -> count


def rates(pred: np.ndarray, attrs: np.ndarray, labels: np.ndarray) -> GroupRates:
    """Empirical per-group rates of a single binary predictor."""
    pred = np.asarray(pred)
    attrs = np.asarray(attrs)
    labels = np.asarray(labels)
    if not (pred.shape == attrs.shape == labels.shape) or pred.ndim != 1:
        raise DimensionMismatch(
            f"pred/attrs/labels must be equal-length vectors, got {pred.shape}, {attrs.shape}, {labels.shape}"
        )
    for name, arr in (("pred", pred), ("attrs", attrs), ("labels", labels)):
        if not np.isin(arr, (0, 1)).all():
            raise ValueError(f"{name} must be binary")
    tpr: dict[int, float | None] = {}
    fpr: dict[int, float | None] = {}
    support: dict[tuple[int, int], int] = {}
    for a in (0, 1):
        for y in (0, 1):
            cell = (attrs == a) & (labels == y)
            count = int(cell.sum())
            support[(a, y)] = count
            rate = float(pred[cell].mean()) if count else None
            if y == 1:
                tpr[a] = rate
            else:
                fpr[a] = rate
    return GroupRates(tpr=tpr, fpr=fpr, support=support)


def _gap(tpr: Mapping[int, float], fpr: Mapping[int, float], mode: str) -> float:
    dt = abs(tpr[0] - tpr[1])
    df = abs(fpr[0] - fpr[1])
    if mode == "mean":
        return 0.5 * (dt + df)
    if mode == "max":
        return max(dt, df)
    raise ValueError(f"unknown eo mode {mode!r}; use 'mean' or 'max'")


def eo_gap(group_rates: GroupRates, mode: str = "mean") -> float:
    """Scalar equalized-odds violation: mean (default) or max of the two rate gaps."""
    for a in (0, 1):
        if group_rates.tpr[a] is None:
            raise UnsupportedCellError(f"no samples with (A={a}, Y=1); eo_gap undefined")
        if group_rates.fpr[a] is None:
            raise UnsupportedCellError(f"no samples with (A={a}, Y=0); eo_gap undefined")
    return _gap(group_rates.tpr, group_rates.fpr, mode)


@dataclass
class JointDistribution:
    """Probability mass over (prediction vector, attribute, label) cells."""

    num_constituents: int
    mass: np.ndarray  # shape (2**S, 2, 2), indexed [code, attribute, label]
    sample_count: int | None = None

    def __post_init__(self) -> None:
        m = np.asarray(self.mass, dtype=np.float64)
        expected = (2**self.num_constituents, 2, 2)
        if m.shape != expected:
            raise DimensionMismatch(f"mass has shape {m.shape}, expected {expected}")
        if np.any(m < 0):
            raise ValueError("probability masses must be non-negative")
        total = float(m.sum())
        if abs(total - 1.0) > MASS_TOLERANCE:
            raise ValueError(f"masses sum to {total!r}, expected 1 within {MASS_TOLERANCE}")
        self.mass = m

    def cell(self, yhat: Sequence[int] | int, a: int, y: int) -> float:
        code = yhat if isinstance(yhat, (int, np.integer)) else code_of(yhat)
        return float(self.mass[code, a, y])

    def attr_label_mass(self) -> np.ndarray:
        """(2, 2) marginal over (attribute, label)."""
        return self.mass.sum(axis=0)

    def conditioning_mass(self) -> np.ndarray:
        """(2**S, 2) marginal over (prediction vector, attribute)."""
        return self.mass.sum(axis=2)

    def marginal_constituent(self, k: int) -> "JointDistribution":
        """Collapse to the single constituent k."""
        if not 0 <= k < self.num_constituents:
            raise DimensionMismatch(f"constituent {k} out of range")
        codes = np.arange(2**self.num_constituents)
        bit = (codes >> k) & 1
        m = np.zeros((2, 2, 2))
        for v in (0, 1):
            m[v] = self.mass[bit == v].sum(axis=0)
        return JointDistribution(1, m, sample_count=self.sample_count)

    def to_json_dict(self) -> dict:
        cells = []
        for code in range(2**self.num_constituents):
            for a in (0, 1):
                for y in (0, 1):
                    value = float(self.mass[code, a, y])
                    if value != 0.0:
                        cells.append(
                            {
                                "yhat": bitstring_of(code, self.num_constituents),
                                "a": a,
                                "y": y,
                                "mass": value,
                            }
                        )
        return {"S": self.num_constituents, "cells": cells, "sample_count": self.sample_count}

    @classmethod
    def from_json_dict(cls, record: Mapping) -> "JointDistribution":
        try:
            s = int(record["S"])
            mass = np.zeros((2**s, 2, 2))
            for cell in record["cells"]:
                code = code_of_bitstring(cell["yhat"])
                if len(cell["yhat"]) != s:
                    raise DataFormatError(f"bitstring {cell['yhat']!r} does not have length {s}")
                mass[code, int(cell["a"]), int(cell["y"])] = float(cell["mass"])
        except (KeyError, TypeError) as exc:
            raise DataFormatError(f"malformed joint distribution record: {exc}") from exc
        count = record.get("sample_count")
        return cls(s, mass, sample_count=None if count is None else int(count))

    def save(self, path: Path | str) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: Path | str) -> "JointDistribution":
        try:
            return cls.from_json_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{path}: invalid JSON: {exc}") from exc


def estimate_joint(pred_matrix: np.ndarray, attrs: np.ndarray, labels: np.ndarray) -> JointDistribution:
    """Empirical joint frequencies of (prediction vector, attribute, label)."""
    P = np.asarray(pred_matrix)
    attrs = np.asarray(attrs)
    labels = np.asarray(labels)
    if P.ndim != 2:
        raise DimensionMismatch(f"prediction matrix must be 2-D (N, S), got shape {P.shape}")
    n, s = P.shape
    if n == 0 or s == 0:
        raise DimensionMismatch("prediction matrix must be non-empty")
    if attrs.shape != (n,) or labels.shape != (n,):
        raise DimensionMismatch(
            f"attrs/labels must have length {n}, got {attrs.shape} and {labels.shape}"
        )
    for name, arr in (("predictions", P), ("attrs", attrs), ("labels", labels)):
        if not np.isin(arr, (0, 1)).all():
            raise ValueError(f"{name} must be binary")
    codes = P.astype(np.int64) @ (1 << np.arange(s, dtype=np.int64))
    mass = np.zeros((2**s, 2, 2))
    np.add.at(mass, (codes, attrs.astype(np.int64), labels.astype(np.int64)), 1.0)
    return JointDistribution(s, mass / n, sample_count=n)


class PredictorTable(Protocol):
    """Anything exposing a derived predictor's probability grid."""

    num_constituents: int
    probs: np.ndarray  # (2**S, 2) of Pr(output=1 | prediction vector, attribute)


@dataclass(frozen=True)
class ExpectedMetrics:
    """Closed-form expectations of a randomized derived predictor."""

    expected_loss: float
    expected_accuracy: float
    eo_gap: float
    tpr: dict[int, float]
    fpr: dict[int, float]


def _loss_array(loss) -> np.ndarray:
    arr = np.asarray(loss.as_array() if hasattr(loss, "as_array") else loss, dtype=np.float64)
    if arr.shape != (2, 2):
        raise DimensionMismatch(f"loss must be a 2x2 matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ValueError("loss entries must be finite and non-negative")
    return arr


def expected_metrics(
    table: PredictorTable, joint: JointDistribution, loss, eo_mode: str = "mean"
) -> ExpectedMetrics:
    """Exact expected loss, accuracy and equalized-odds gap of a derived predictor.

    Everything is computed by summing the table's probabilities against the
    joint masses; no sampling is involved. Raises MissingEntryError when the
    table lacks an entry for a cell the joint puts mass on, and
    UnsupportedCellError when some (attribute, label) cell has no mass.
    """
    if table.num_constituents != joint.num_constituents:
        raise DimensionMismatch(
            f"table is over {table.num_constituents} constituents, joint over {joint.num_constituents}"
        )
    L = _loss_array(loss)
    p = np.asarray(table.probs, dtype=np.float64)
    cond = joint.conditioning_mass()
    missing = np.isnan(p) & (cond > 0)
    if missing.any():
        code, a = np.argwhere(missing)[0]
        raise MissingEntryError(
            f"table has no entry for (yhat={bitstring_of(int(code), joint.num_constituents)}, a={int(a)})"
        )
    p = np.nan_to_num(p)
    m0 = joint.mass[:, :, 0]
    m1 = joint.mass[:, :, 1]
    expected_loss = float(
        (m0 * (p * L[1, 0] + (1 - p) * L[0, 0])).sum()
        + (m1 * (p * L[1, 1] + (1 - p) * L[0, 1])).sum()
    )
    expected_accuracy = float((m1 * p).sum() + (m0 * (1 - p)).sum())
    tpr: dict[int, float] = {}
    fpr: dict[int, float] = {}
    for a in (0, 1):
        for y, out in ((1, tpr), (0, fpr)):
            denom = float(joint.mass[:, a, y].sum())
            if denom == 0.0:
                raise UnsupportedCellError(f"joint has no mass on (A={a}, Y={y})")
            out[a] = float((joint.mass[:, a, y] * p[:, a]).sum() / denom)
    return ExpectedMetrics(
        expected_loss=expected_loss,
        expected_accuracy=expected_accuracy,
        eo_gap=_gap(tpr, fpr, eo_mode),
        tpr=tpr,
        fpr=fpr,
    )
