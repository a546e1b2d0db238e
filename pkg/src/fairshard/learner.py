"""Deterministic logistic-regression constituents.

Training is full-batch gradient descent, so identical inputs produce
bit-identical parameters. Callers are responsible for passing samples in a
canonical order (ascending id); the functions here never reorder them.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import DataFormatError, DimensionMismatch, EmptyTrainingSetError

MODEL_FORMAT_VERSION = 1
_MODEL_MAGIC = b"FSM1"


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # Split by sign to avoid overflow in exp.
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(frozen=True)
class Hyperparams:
    """Gradient-descent settings for one training call."""

    learning_rate: float = 0.5
    epochs_per_slice: int = 300
    l2_penalty: float = 1e-3

    def __post_init__(self) -> None:
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if int(self.epochs_per_slice) != self.epochs_per_slice or self.epochs_per_slice < 1:
            raise ValueError("epochs_per_slice must be a positive integer")
        if self.l2_penalty < 0:
            raise ValueError("l2_penalty must be non-negative")


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Weights and bias of one linear classifier; immutable once constructed."""

    weights: np.ndarray
    bias: float

    def __post_init__(self) -> None:
        w = np.array(self.weights, dtype=np.float64, copy=True)
        if w.ndim != 1:
            raise DimensionMismatch(f"weights must be a vector, got shape {w.shape}")
        b = float(self.bias)
        if not (np.all(np.isfinite(w)) and np.isfinite(b)):
            raise ValueError("model parameters must be finite")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def dim(self) -> int:
        return int(self.weights.shape[0])

    def __eq__(self, other: object) -> bool:
        # Bit-exact comparison; distinguishes e.g. -0.0 from 0.0 on purpose.
        if not isinstance(other, ModelParams):
            return NotImplemented
        return (
            self.weights.tobytes() == other.weights.tobytes()
            and struct.pack("<d", self.bias) == struct.pack("<d", other.bias)
        )

    def __hash__(self) -> int:
        return hash((self.weights.tobytes(), struct.pack("<d", self.bias)))

    @classmethod
    def zeros(cls, dim: int) -> "ModelParams":
        return cls(np.zeros(int(dim)), 0.0)

    def to_bytes(self) -> bytes:
        """Versioned little-endian record; round-trips bit-exactly."""
        head = _MODEL_MAGIC + struct.pack("<HI", MODEL_FORMAT_VERSION, self.dim)
        return head + self.weights.astype("<f8").tobytes() + struct.pack("<d", self.bias)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "ModelParams":
        if len(blob) < 10 or blob[:4] != _MODEL_MAGIC:
            raise DataFormatError("not a model parameter record")
        version, dim = struct.unpack_from("<HI", blob, 4)
        if version != MODEL_FORMAT_VERSION:
            raise DataFormatError(f"unsupported model record version {version}")
        expected = 10 + 8 * dim + 8
        if len(blob) != expected:
            raise DataFormatError(f"model record has {len(blob)} bytes, expected {expected}")
        weights = np.frombuffer(blob, dtype="<f8", count=dim, offset=10)
        (bias,) = struct.unpack_from("<d", blob, 10 + 8 * dim)
        return cls(weights, bias)

    def to_json_dict(self) -> dict:
        return {
            "version": MODEL_FORMAT_VERSION,
            "d": self.dim,
            "weights": [float(w) for w in self.weights],
            "bias": self.bias,
        }

    @classmethod
    def from_json_dict(cls, record: Mapping) -> "ModelParams":
        try:
            if int(record["version"]) != MODEL_FORMAT_VERSION:
                raise DataFormatError(f"unsupported model record version {record['version']}")
            weights = np.asarray(record["weights"], dtype=np.float64)
            if len(weights) != int(record["d"]):
                raise DataFormatError("weight count disagrees with d")
            return cls(weights, float(record["bias"]))
        except (KeyError, TypeError) as exc:
            raise DataFormatError(f"malformed model record: {exc}") from exc


@dataclass(frozen=True, eq=False)
class Sample:
    """One labelled example: features, binary sensitive attribute, binary label."""

    id: int
    features: np.ndarray
    attribute: int
    label: int

    def __post_init__(self) -> None:
        x = np.array(self.features, dtype=np.float64, copy=True)
        if x.ndim != 1:
            raise DimensionMismatch(f"features must be a vector, got shape {x.shape}")
        if self.attribute not in (0, 1) or self.label not in (0, 1):
            raise ValueError("attribute and label must be 0 or 1")
        x.flags.writeable = False
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "id", int(self.id))
        object.__setattr__(self, "attribute", int(self.attribute))
        object.__setattr__(self, "label", int(self.label))


class Dataset:
    """Immutable sample collection with unique ids, kept in ascending-id order."""

    def __init__(self, samples: Iterable[Sample]):
        ordered = sorted(samples, key=lambda s: s.id)
        if not ordered:
            raise EmptyTrainingSetError("dataset must contain at least one sample")
        dims = {s.features.shape[0] for s in ordered}
        if len(dims) > 1:
            raise DimensionMismatch(f"mixed feature dimensions in dataset: {sorted(dims)}")
        ids = [s.id for s in ordered]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate sample ids in dataset")
        self._samples = tuple(ordered)
        self._by_id = {s.id: s for s in ordered}

    def __len__(self) -> int:
        return len(self._samples)

    def __iter__(self) -> Iterator[Sample]:
        return iter(self._samples)

    @property
    def dim(self) -> int:
        return int(self._samples[0].features.shape[0])

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(s.id for s in self._samples)

    def get(self, sample_id: int) -> Sample:
        from .errors import UnknownSampleError

        try:
            return self._by_id[sample_id]
        except KeyError:
            raise UnknownSampleError(f"sample id {sample_id} not in dataset") from None

    def samples_for(self, ids: Sequence[int]) -> list[Sample]:
        return [self.get(i) for i in ids]

    def features_matrix(self) -> np.ndarray:
        return np.stack([s.features for s in self._samples])

    def attributes(self) -> np.ndarray:
        return np.array([s.attribute for s in self._samples], dtype=np.int64)

    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self._samples], dtype=np.int64)

    def subset(self, ids: Iterable[int]) -> "Dataset":
        return Dataset(self.get(i) for i in ids)

    def remove(self, ids: Iterable[int]) -> "Dataset":
        gone = {int(i) for i in ids}
        for i in gone:
            self.get(i)  # raises UnknownSampleError for stray ids
        return Dataset(s for s in self._samples if s.id not in gone)


def train(samples: Sequence[Sample], hp: Hyperparams, init: ModelParams) -> ModelParams:
    """Full-batch gradient descent on L2-regularised logistic loss.

    The sample order is taken as given and every reduction is a deterministic
    function of the stacked arrays, so repeated calls with identical inputs
    return bit-identical parameters.
    """
    if len(samples) == 0:
        raise EmptyTrainingSetError("cannot train on an empty sample list")
    try:
        X = np.stack([s.features for s in samples])
    except ValueError as exc:
        raise DimensionMismatch(f"samples have inconsistent feature dimensions: {exc}") from exc
    if X.shape[1] != init.dim:
        raise DimensionMismatch(f"feature dim {X.shape[1]} does not match model dim {init.dim}")
    y = np.array([s.label for s in samples], dtype=np.float64)
    w = init.weights.copy()
    b = init.bias
    n = float(len(samples))
    lr = hp.learning_rate
    for _ in range(hp.epochs_per_slice):
        residual = _sigmoid(X @ w + b) - y
        w = w - lr * (X.T @ residual / n + hp.l2_penalty * w)
        b = b - lr * float(residual.sum() / n)
    return ModelParams(w, b)


def loss_and_gradient(
    params: ModelParams, X: np.ndarray, y: np.ndarray, l2_penalty: float = 0.0
) -> tuple[float, np.ndarray, float]:
    """Mean logistic loss with L2 weight penalty, plus its analytic gradient."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"X has shape {X.shape} but y has length {y.shape}")
    if X.shape[1] != params.dim:
        raise DimensionMismatch(f"feature dim {X.shape[1]} does not match model dim {params.dim}")
    z = X @ params.weights + params.bias
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    loss += 0.5 * l2_penalty * float(params.weights @ params.weights)
    residual = _sigmoid(z) - y
    grad_w = X.T @ residual / len(y) + l2_penalty * params.weights
    grad_b = float(residual.mean())
    return loss, grad_w, grad_b


def decision_scores(params: ModelParams, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != params.dim:
        raise DimensionMismatch(f"feature dim {X.shape[-1]} does not match model dim {params.dim}")
    return X @ params.weights + params.bias


def predict(params: ModelParams, features: np.ndarray) -> int:
    """Predicted label; scores exactly on the boundary map to 1."""
    x = np.asarray(features, dtype=np.float64)
    if x.shape != (params.dim,):
        raise DimensionMismatch(f"features have shape {x.shape}, expected ({params.dim},)")
    return 1 if float(x @ params.weights + params.bias) >= 0.0 else 0
