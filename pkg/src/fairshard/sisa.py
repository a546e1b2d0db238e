"""Sharded, sliced ensemble training with checkpointed exact unlearning.

A dataset is split into disjoint shards, one constituent model per shard.
Each shard is further split into ordered slices; the model is trained
incrementally slice by slice and a parameter snapshot is stored after each
slice. Deleting samples then only requires retraining the affected shards
from the last snapshot taken before the first affected slice, which is
bit-identical to retraining those shards from scratch on the retained data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import learner
from .errors import DataFormatError, DimensionMismatch, PartitionError, UnknownSampleError
from .learner import Dataset, Hyperparams, ModelParams
from .seeding import derive_seed, rng_for

ASSIGNMENT_FILENAME = "assignment.json"
ASSIGNMENT_FORMAT_VERSION = 1


def shard_seed(base_seed: int | None, shard: int) -> int:
    """Per-shard seed, derived so retraining one shard never perturbs another."""
    return derive_seed(base_seed, "shard", shard)


@dataclass
class ShardAssignment:
    """Disjoint shard/slice membership for a set of sample ids.

    Within every (shard, slice) pair the canonical training order is
    ascending id; all training and retraining paths rely on that order, which
    is what makes checkpoint-resumed retraining equal retraining from scratch.
    """

    num_shards: int
    num_slices: int
    shard_of: dict[int, int]
    slice_of: dict[int, int]
    seed: int | None = None
    _order: dict[tuple[int, int], tuple[int, ...]] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.num_shards < 1 or self.num_slices < 1:
            raise PartitionError("shard and slice counts must be at least 1")
        if set(self.shard_of) != set(self.slice_of):
            raise PartitionError("shard_of and slice_of must cover the same ids")
        buckets: dict[tuple[int, int], list[int]] = {}
        for i, k in self.shard_of.items():
            r = self.slice_of[i]
            if not 0 <= k < self.num_shards:
                raise PartitionError(f"shard index {k} out of range for id {i}")
            if not 0 <= r < self.num_slices:
                raise PartitionError(f"slice index {r} out of range for id {i}")
            buckets.setdefault((k, r), []).append(i)
        self._order = {key: tuple(sorted(ids)) for key, ids in buckets.items()}

    @property
    def ids(self) -> frozenset[int]:
        return frozenset(self.shard_of)

    @property
    def canonical_order(self) -> dict[tuple[int, int], tuple[int, ...]]:
        return dict(self._order)

    def slice_ids(self, shard: int, sl: int) -> tuple[int, ...]:
        return self._order.get((shard, sl), ())

    def shard_ids(self, shard: int) -> tuple[int, ...]:
        merged: list[int] = []
        for r in range(self.num_slices):
            merged.extend(self.slice_ids(shard, r))
        return tuple(sorted(merged))

    def shard_sizes(self) -> list[int]:
        return [len(self.shard_ids(k)) for k in range(self.num_shards)]

    def shards_touching(self, ids: Iterable[int]) -> dict[int, int]:
        """Map each affected shard to the first slice containing a given id."""
        first: dict[int, int] = {}
        for i in ids:
            if i not in self.shard_of:
                raise UnknownSampleError(f"sample id {i} not in assignment")
            k, r = self.shard_of[i], self.slice_of[i]
            first[k] = min(first.get(k, r), r)
        return first

    def remove_ids(self, ids: Iterable[int]) -> "ShardAssignment":
        gone = set(ids)
        missing = gone - set(self.shard_of)
        if missing:
            raise UnknownSampleError(f"sample ids not in assignment: {sorted(missing)[:5]}")
        shard_of = {i: k for i, k in self.shard_of.items() if i not in gone}
        slice_of = {i: r for i, r in self.slice_of.items() if i not in gone}
        return ShardAssignment(self.num_shards, self.num_slices, shard_of, slice_of, seed=self.seed)

    def to_json_dict(self) -> dict:
        return {
            "S": self.num_shards,
            "R": self.num_slices,
            "shard_of": {str(i): k for i, k in sorted(self.shard_of.items())},
            "slice_of": {str(i): r for i, r in sorted(self.slice_of.items())},
        }

    @classmethod
    def from_json_dict(cls, record: Mapping) -> "ShardAssignment":
        try:
            return cls(
                int(record["S"]),
                int(record["R"]),
                {int(i): int(k) for i, k in record["shard_of"].items()},
                {int(i): int(r) for i, r in record["slice_of"].items()},
            )
        except (KeyError, TypeError, AttributeError, ValueError) as exc:
            raise DataFormatError(f"malformed assignment record: {exc}") from exc

    def save(self, path: Path | str) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: Path | str) -> "ShardAssignment":
        try:
            record = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{path}: invalid JSON: {exc}") from exc
        return cls.from_json_dict(record)


def _assign_chunks(chunks: Sequence[np.ndarray], num_slices: int) -> tuple[dict, dict]:
    shard_of: dict[int, int] = {}
    slice_of: dict[int, int] = {}
    for k, chunk in enumerate(chunks):
        for r, sl in enumerate(np.array_split(chunk, num_slices)):
            for i in sl:
                shard_of[int(i)] = k
                slice_of[int(i)] = r
    return shard_of, slice_of


def partition_uniform(dataset: Dataset, num_shards: int, num_slices: int, seed: int) -> ShardAssignment:
    """Seeded uniform partition into near-equal shards, each cut into slices."""
    if num_shards < 1 or num_slices < 1:
        raise PartitionError("shard and slice counts must be at least 1")
    if len(dataset) < num_shards * num_slices:
        raise PartitionError(
            f"dataset of {len(dataset)} samples cannot fill {num_shards} shards x {num_slices} slices"
        )
    rng = rng_for(seed, "partition-uniform")
    perm = rng.permutation(np.array(dataset.ids, dtype=np.int64))
    shard_of, slice_of = _assign_chunks(np.array_split(perm, num_shards), num_slices)
    return ShardAssignment(num_shards, num_slices, shard_of, slice_of, seed=seed)


def partition_one_fair_shard(
    dataset: Dataset, num_shards: int, num_slices: int, seed: int
) -> ShardAssignment:
    """Partition where shard 0 is balanced across the four (attribute, label) cells.

    Shard 0 receives floor(N / 4S) samples from every cell; the remaining
    samples are split randomly between the other shards, which therefore
    inherit whatever attribute/label skew the dataset carries.
    """
    if num_shards < 2:
        raise PartitionError("one_fair_shard needs at least 2 shards")
    if num_slices < 1:
        raise PartitionError("slice count must be at least 1")
    per_cell = len(dataset) // (4 * num_shards)
    if per_cell < 1:
        raise PartitionError(
            f"dataset of {len(dataset)} samples is too small for a balanced shard with {num_shards} shards"
        )
    cells: dict[tuple[int, int], list[int]] = {(a, y): [] for a in (0, 1) for y in (0, 1)}
    for s in dataset:
        cells[(s.attribute, s.label)].append(s.id)
    for key in ((0, 0), (0, 1), (1, 0), (1, 1)):
        if len(cells[key]) < per_cell:
            raise PartitionError(
                f"cell (A={key[0]}, Y={key[1]}) has {len(cells[key])} samples; "
                f"{per_cell} needed for the balanced shard"
            )
    rng = rng_for(seed, "partition-one-fair-shard")
    fair: list[int] = []
    for key in ((0, 0), (0, 1), (1, 0), (1, 1)):
        picked = rng.permutation(np.array(cells[key], dtype=np.int64))[:per_cell]
        fair.extend(int(i) for i in picked)
    fair_ids = rng.permutation(np.array(sorted(fair), dtype=np.int64))
    rest = sorted(set(dataset.ids) - set(fair))
    rest_perm = rng.permutation(np.array(rest, dtype=np.int64))
    chunks = [fair_ids] + list(np.array_split(rest_perm, num_shards - 1))
    shard_of, slice_of = _assign_chunks(chunks, num_slices)
    return ShardAssignment(num_shards, num_slices, shard_of, slice_of, seed=seed)


@dataclass
class CheckpointStore:
    """Immutable parameter snapshots keyed by (shard, slice)."""

    snapshots: dict[tuple[int, int], ModelParams] = field(default_factory=dict)

    def put(self, shard: int, sl: int, params: ModelParams) -> None:
        self.snapshots[(shard, sl)] = params

    def get(self, shard: int, sl: int) -> ModelParams:
        try:
            return self.snapshots[(shard, sl)]
        except KeyError:
            raise KeyError(f"no checkpoint for shard {shard}, slice {sl}") from None

    def copy(self) -> "CheckpointStore":
        return CheckpointStore(dict(self.snapshots))

    def __len__(self) -> int:
        return len(self.snapshots)


@dataclass
class Ensemble:
    """Constituent models plus the assignment and snapshots that produced them."""

    models: list[ModelParams]
    assignment: ShardAssignment
    store: CheckpointStore
    shard_seeds: list[int]

    @property
    def num_shards(self) -> int:
        return self.assignment.num_shards

    @property
    def dim(self) -> int:
        return self.models[0].dim


@dataclass(frozen=True)
class UnlearnRequest:
    """Ids to remove from the training set and forget from the ensemble."""

    sample_ids: frozenset[int]

    def __post_init__(self) -> None:
        ids = frozenset(int(i) for i in self.sample_ids)
        if not ids:
            raise ValueError("unlearn request must name at least one sample id")
        object.__setattr__(self, "sample_ids", ids)


def _check_assignment_covers(dataset: Dataset, assignment: ShardAssignment) -> None:
    if assignment.ids != frozenset(dataset.ids):
        raise PartitionError("assignment does not cover exactly the dataset ids")


def _train_slice(
    dataset: Dataset,
    assignment: ShardAssignment,
    hp: Hyperparams,
    shard: int,
    sl: int,
    params: ModelParams,
    store: CheckpointStore,
) -> ModelParams:
    # Empty slices (holes left by deletions) pass parameters through unchanged
    # but still record a snapshot so every (shard, slice) key stays present.
    ids = assignment.slice_ids(shard, sl)
    if ids:
        params = learner.train(dataset.samples_for(ids), hp, params)
    store.put(shard, sl, params)
    return params


def train_ensemble(dataset: Dataset, assignment: ShardAssignment, hp: Hyperparams) -> Ensemble:
    """Train every shard incrementally over its slices, snapshotting each slice."""
    _check_assignment_covers(dataset, assignment)
    store = CheckpointStore()
    models: list[ModelParams] = []
    for k in range(assignment.num_shards):
        params = ModelParams.zeros(dataset.dim)
        for r in range(assignment.num_slices):
            params = _train_slice(dataset, assignment, hp, k, r, params, store)
        models.append(params)
    seeds = [shard_seed(assignment.seed, k) for k in range(assignment.num_shards)]
    return Ensemble(models, assignment, store, seeds)


def predict_ensemble(ensemble: Ensemble, features: np.ndarray) -> np.ndarray:
    """Vector of the constituents' individual predictions."""
    return np.array([learner.predict(m, features) for m in ensemble.models], dtype=np.int8)


def predict_matrix(ensemble: Ensemble, dataset: Dataset) -> np.ndarray:
    """(N, S) prediction matrix over a whole dataset."""
    X = dataset.features_matrix()
    W = np.stack([m.weights for m in ensemble.models])
    b = np.array([m.bias for m in ensemble.models])
    return (X @ W.T + b >= 0.0).astype(np.int8)


def majority_vote(votes: Sequence[int] | np.ndarray) -> int:
    """Majority label of a binary vote vector; exact ties resolve to 0."""
    v = np.asarray(votes)
    if v.size == 0:
        raise ValueError("majority_vote needs a non-empty vote vector")
    if not np.isin(v, (0, 1)).all():
        raise ValueError("votes must be binary")
    return 1 if 2 * int(v.sum()) > v.size else 0


def majority_vote_matrix(pred_matrix: np.ndarray) -> np.ndarray:
    """Row-wise majority votes of an (N, S) prediction matrix; ties resolve to 0."""
    p = np.asarray(pred_matrix)
    if p.ndim != 2 or p.shape[1] == 0:
        raise DimensionMismatch(f"prediction matrix must be (N, S), got {p.shape}")
    return (2 * p.sum(axis=1) > p.shape[1]).astype(np.int8)


def unlearn(
    dataset: Dataset, ensemble: Ensemble, request: UnlearnRequest, hp: Hyperparams
) -> tuple[Dataset, Ensemble]:
    """Remove the requested samples and retrain only the affected shard tails.

    For each affected shard the retrain starts from the snapshot preceding the
    first affected slice (or from zero parameters when slice 0 is affected).
    The result is bit-identical to training from scratch on the retained
    dataset under the same pruned assignment; untouched shards keep their
    exact model and snapshot objects.
    """
    _check_assignment_covers(dataset, ensemble.assignment)
    missing = request.sample_ids - set(dataset.ids)
    if missing:
        raise UnknownSampleError(f"sample ids not in dataset: {sorted(missing)[:5]}")
    assignment = ensemble.assignment
    new_dataset = dataset.remove(request.sample_ids)
    new_assignment = assignment.remove_ids(request.sample_ids)
    affected = assignment.shards_touching(request.sample_ids)
    store = ensemble.store.copy()
    models = list(ensemble.models)
    for k in sorted(affected):
        first = affected[k]
        for r in range(first, assignment.num_slices):
            store.snapshots.pop((k, r), None)
        params = store.get(k, first - 1) if first > 0 else ModelParams.zeros(dataset.dim)
        for r in range(first, assignment.num_slices):
            params = _train_slice(new_dataset, new_assignment, hp, k, r, params, store)
        models[k] = params
    return new_dataset, Ensemble(models, new_assignment, store, list(ensemble.shard_seeds))


@dataclass(frozen=True)
class UnlearnCost:
    """Retraining work implied by a deletion request."""

    retrained_samples: int
    full_retrain_samples: int
    affected_shards: dict[int, int]  # shard -> first retrained slice


def retraining_cost(assignment: ShardAssignment, removed_ids: Iterable[int]) -> UnlearnCost:
    """Samples revisited by checkpoint-resumed retraining vs a scratch retrain."""
    removed = {int(i) for i in removed_ids}
    affected = assignment.shards_touching(removed)
    retrained = 0
    for k, first in affected.items():
        for r in range(first, assignment.num_slices):
            retrained += sum(1 for i in assignment.slice_ids(k, r) if i not in removed)
    full = len(assignment.ids) - len(removed)
    return UnlearnCost(retrained, full, affected)


def checkpoint_filename(shard: int, sl: int) -> str:
    return f"shard{shard}_slice{sl}"


def save_ensemble(ensemble: Ensemble, out_dir: Path | str) -> list[Path]:
    """Persist the assignment plus every snapshot as versioned binary files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / ASSIGNMENT_FILENAME]
    ensemble.assignment.save(paths[0])
    for (k, r), params in sorted(ensemble.store.snapshots.items()):
        path = out / checkpoint_filename(k, r)
        path.write_bytes(params.to_bytes())
        paths.append(path)
    return paths


def load_ensemble(model_dir: Path | str) -> Ensemble:
    model_dir = Path(model_dir)
    assignment = ShardAssignment.load(model_dir / ASSIGNMENT_FILENAME)
    store = CheckpointStore()
    for k in range(assignment.num_shards):
        for r in range(assignment.num_slices):
            path = model_dir / checkpoint_filename(k, r)
            if not path.exists():
                raise DataFormatError(f"missing checkpoint file {path}")
            store.put(k, r, ModelParams.from_bytes(path.read_bytes()))
    models = [store.get(k, assignment.num_slices - 1) for k in range(assignment.num_shards)]
    seeds = [shard_seed(assignment.seed, k) for k in range(assignment.num_shards)]
    return Ensemble(models, assignment, store, seeds)
