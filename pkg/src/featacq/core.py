"""Shared domain types: index sets, partial instances, tasks, costs, traces.

Feature indices are 0-based throughout. A :class:`PartialInstance` stores a
full-length value vector whose unobserved entries are held at a canonical
zero so that it can be fed to networks directly (zero imputation + mask).
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

TERMINATE = -1

CLASSIFICATION = "classification"
REGRESSION = "regression"
UNSUPERVISED = "unsupervised"
TASK_KINDS = (CLASSIFICATION, REGRESSION, UNSUPERVISED)


class DataError(ValueError):
    """Raised for malformed or unusable input data."""


class ConstantFeatureError(DataError):
    def __init__(self, column: int, name: str | None = None):
        label = name if name is not None else f"column {column}"
        super().__init__(f"constant feature: {label} has zero variance")
        self.column = column


class InvalidActionError(ValueError):
    """Raised when an action is not allowed in the current state."""


class FeatureIndexSet:
    """Immutable, sorted, duplicate-free set of feature indices in ``[0, d)``."""

    __slots__ = ("_idx", "_d")

    def __init__(self, indices: Iterable[int], d: int):
        d = int(d)
        if d < 1:
            raise ValueError("d must be >= 1")
        idx = [int(i) for i in indices]
        if len(set(idx)) != len(idx):
            raise ValueError(f"duplicate indices in {idx}")
        for i in idx:
            if not 0 <= i < d:
                raise ValueError(f"index {i} out of range for d={d}")
        self._idx = tuple(sorted(idx))
        self._d = d

    @classmethod
    def empty(cls, d: int) -> "FeatureIndexSet":
        return cls((), d)

    @classmethod
    def full(cls, d: int) -> "FeatureIndexSet":
        return cls(range(d), d)

    @classmethod
    def from_mask(cls, mask: Sequence[bool]) -> "FeatureIndexSet":
        mask = np.asarray(mask, dtype=bool)
        return cls(np.flatnonzero(mask), mask.size)

    @property
    def d(self) -> int:
        return self._d

    @property
    def indices(self) -> tuple[int, ...]:
        return self._idx

    def complement(self) -> "FeatureIndexSet":
        taken = set(self._idx)
        return FeatureIndexSet((i for i in range(self._d) if i not in taken), self._d)

    def add(self, i: int) -> "FeatureIndexSet":
        if i in self:
            raise ValueError(f"index {i} already in set")
        return FeatureIndexSet(self._idx + (int(i),), self._d)

    def union(self, other: "FeatureIndexSet") -> "FeatureIndexSet":
        if other.d != self._d:
            raise ValueError("dimension mismatch")
        return FeatureIndexSet(set(self._idx) | set(other._idx), self._d)

    def mask(self) -> np.ndarray:
        m = np.zeros(self._d, dtype=bool)
        m[list(self._idx)] = True
        return m

    def as_array(self) -> np.ndarray:
        return np.asarray(self._idx, dtype=int)

    def __contains__(self, i: object) -> bool:
        return i in self._idx

    def __iter__(self):
        return iter(self._idx)

    def __len__(self) -> int:
        return len(self._idx)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, FeatureIndexSet) and self._idx == other._idx and self._d == other._d

    def __hash__(self) -> int:
        return hash((self._idx, self._d))

    def __repr__(self) -> str:
        return f"FeatureIndexSet({list(self._idx)}, d={self._d})"


class PartialInstance:
    """Feature vector with an observation mask.

    Unobserved entries are stored as 0.0 and must not be read by consumers.
    """

    __slots__ = ("_values", "_observed")

    def __init__(self, values: Sequence[float], observed: FeatureIndexSet | Iterable[int]):
        values = np.array(values, dtype=float).reshape(-1)
        if not isinstance(observed, FeatureIndexSet):
            observed = FeatureIndexSet(observed, values.size)
        if observed.d != values.size:
            raise ValueError("observed set dimension does not match values")
        canon = np.zeros_like(values)
        idx = observed.as_array()
        canon[idx] = values[idx]
        if not np.all(np.isfinite(canon)):
            raise DataError("observed values must be finite")
        canon.setflags(write=False)
        self._values = canon
        self._observed = observed

    @classmethod
    def empty(cls, d: int) -> "PartialInstance":
        return cls(np.zeros(d), FeatureIndexSet.empty(d))

    @classmethod
    def from_full(cls, x: Sequence[float], observed: Iterable[int] = ()) -> "PartialInstance":
        x = np.asarray(x, dtype=float)
        return cls(x, FeatureIndexSet(observed, x.size))

    @property
    def d(self) -> int:
        return self._values.size

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def observed(self) -> FeatureIndexSet:
        return self._observed

    @property
    def obs_idx(self) -> np.ndarray:
        return self._observed.as_array()

    @property
    def unobs_idx(self) -> np.ndarray:
        return self._observed.complement().as_array()

    @property
    def x_o(self) -> np.ndarray:
        return self._values[self.obs_idx]

    def mask(self) -> np.ndarray:
        return self._observed.mask()

    def reveal(self, i: int, value: float) -> "PartialInstance":
        vals = self._values.copy()
        vals[i] = value
        return PartialInstance(vals, self._observed.add(i))

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "observed": list(self._observed.indices),
            "values": [float(self._values[i]) for i in self._observed],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PartialInstance":
        d = int(data["d"])
        vals = np.zeros(d)
        obs = [int(i) for i in data["observed"]]
        vals[obs] = np.asarray(data["values"], dtype=float)
        return cls(vals, FeatureIndexSet(obs, d))

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, PartialInstance)
            and self._observed == other._observed
            and np.array_equal(self._values, other._values)
        )

    def __repr__(self) -> str:
        return f"PartialInstance(d={self.d}, observed={list(self._observed)})"


@dataclass(frozen=True)
class TaskSpec:
    kind: str
    d: int
    num_classes: int = 0
    ordering_constraint: str = "none"

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ValueError(f"unknown task kind {self.kind!r}")
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.kind == CLASSIFICATION and self.num_classes < 2:
            raise ValueError("classification needs num_classes >= 2")
        if self.ordering_constraint not in ("none", "chronological"):
            raise ValueError(f"unknown ordering constraint {self.ordering_constraint!r}")

    @property
    def supervised(self) -> bool:
        return self.kind != UNSUPERVISED

    @property
    def chronological(self) -> bool:
        return self.ordering_constraint == "chronological"


@dataclass(frozen=True)
class CostModel:
    per_feature_cost: np.ndarray
    alpha: float = 0.01

    def __post_init__(self):
        cost = np.asarray(self.per_feature_cost, dtype=float)
        if np.any(cost < 0) or not np.all(np.isfinite(cost)):
            raise ValueError("feature costs must be finite and >= 0")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        cost.setflags(write=False)
        object.__setattr__(self, "per_feature_cost", cost)

    @classmethod
    def uniform(cls, d: int, alpha: float = 0.01) -> "CostModel":
        return cls(np.ones(d), alpha)

    def total(self, observed: Iterable[int]) -> float:
        return float(sum(self.per_feature_cost[i] for i in observed))


@dataclass(frozen=True)
class StandardizationParams:
    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.scale) <= 0):
            raise ValueError("scale must be > 0")

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.mean) / self.scale

    def inverse(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=float) * self.scale + self.mean

    def to_dict(self) -> dict:
        return {"mean": [float(v) for v in self.mean], "scale": [float(v) for v in self.scale]}

    @classmethod
    def from_dict(cls, data: dict) -> "StandardizationParams":
        return cls(np.asarray(data["mean"], dtype=float), np.asarray(data["scale"], dtype=float))


@dataclass
class Dataset:
    """Standardized features paired with targets (``y`` is None when unsupervised)."""

    x: np.ndarray
    y: np.ndarray | None
    task: TaskSpec
    feature_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        if self.x.ndim != 2:
            raise DataError("features must be a 2-D matrix")
        if self.y is not None:
            self.y = np.asarray(self.y)
            if self.task.kind == CLASSIFICATION:
                self.y = self.y.astype(int)
            else:
                self.y = self.y.astype(float)
            if self.y.shape[0] != self.x.shape[0]:
                raise DataError("feature rows and targets differ in length")
        if not self.feature_names:
            self.feature_names = [f"x{i}" for i in range(self.x.shape[1])]

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def subset(self, rows) -> "Dataset":
        y = None if self.y is None else self.y[rows]
        return Dataset(self.x[rows], y, self.task, list(self.feature_names))

    def split(self, frac: float, rng: np.random.Generator) -> tuple["Dataset", "Dataset"]:
        perm = rng.permutation(self.n)
        cut = int(round(frac * self.n))
        return self.subset(perm[:cut]), self.subset(perm[cut:])


def standardize_dataset(raw, targets=None, task: TaskSpec | None = None, feature_names=None):
    """Standardize each column to mean 0 and population variance 1.

    Returns ``(Dataset, StandardizationParams)``. For regression the target is
    standardized too and its parameters are appended as the last entry of the
    returned params.
    """
    x = np.asarray(raw, dtype=float)
    if x.ndim != 2:
        raise DataError("raw features must be a 2-D matrix")
    if x.shape[0] < 2:
        raise DataError("need at least 2 rows to standardize")
    if not np.all(np.isfinite(x)):
        raise DataError("features contain non-finite values")
    if task is None:
        if targets is None:
            task = TaskSpec(UNSUPERVISED, x.shape[1])
        else:
            t = np.asarray(targets)
            task = TaskSpec(CLASSIFICATION, x.shape[1], int(t.max()) + 1)
    cols = x
    if task.kind == REGRESSION:
        cols = np.column_stack([x, np.asarray(targets, dtype=float)])
    mean = cols.mean(axis=0)
    scale = cols.std(axis=0)
    for j, s in enumerate(scale):
        if not s > 0 or s < 1e-12 * max(1.0, abs(mean[j])):
            name = None
            if feature_names is not None and j < len(feature_names):
                name = feature_names[j]
            raise ConstantFeatureError(j, name)
    z = (cols - mean) / scale
    params = StandardizationParams(mean, scale)
    if task.kind == REGRESSION:
        return Dataset(z[:, :-1], z[:, -1], task, list(feature_names or [])), params
    return Dataset(z, targets, task, list(feature_names or [])), params


def sample_mask(d: int, rng: np.random.Generator) -> FeatureIndexSet:
    """Cardinality uniform on ``{0..d-1}``, then a uniform subset of that size."""
    k = int(rng.integers(0, d))
    return FeatureIndexSet(rng.choice(d, size=k, replace=False), d)


def sample_nonempty_mask(d: int, rng: np.random.Generator) -> FeatureIndexSet:
    """Cardinality uniform on ``{1..d}``; used where statistics need |o| >= 1."""
    k = int(rng.integers(1, d + 1))
    return FeatureIndexSet(rng.choice(d, size=k, replace=False), d)


def load_csv(path, kind: str = CLASSIFICATION, ordering_constraint: str = "none"):
    """Read a headered CSV: one row per instance, last column the target.

    For ``kind="unsupervised"`` every column is a feature. Returns the raw
    feature matrix, raw targets (or None), the task and feature names.
    Raises :class:`DataError` naming the offending line.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
            vals = []
            for cell in row:
                cell = cell.strip()
                if cell == "":
                    raise DataError(f"{path}:{lineno}: missing cell")
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(f"{path}:{lineno}: non-numeric cell {cell!r}") from None
                if not math.isfinite(v):
                    raise DataError(f"{path}:{lineno}: non-finite cell {cell!r}")
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    data = np.asarray(rows, dtype=float)
    if kind == UNSUPERVISED:
        x, y, names = data, None, header
    else:
        x, y, names = data[:, :-1], data[:, -1], header[:-1]
    if x.shape[1] < 1:
        raise DataError(f"{path}: no feature columns")
    if kind == CLASSIFICATION:
        if np.any(y != np.round(y)) or np.any(y < 0):
            raise DataError(f"{path}: classification targets must be non-negative integers")
        y = y.astype(int)
        task = TaskSpec(kind, x.shape[1], max(2, int(y.max()) + 1), ordering_constraint)
    else:
        task = TaskSpec(kind, x.shape[1], 0, ordering_constraint)
    return x, y, task, list(names)


def write_csv(path, x: np.ndarray, y=None, feature_names=None, target_name: str = "y") -> None:
    x = np.asarray(x)
    names = list(feature_names) if feature_names else [f"x{i}" for i in range(x.shape[1])]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + ([target_name] if y is not None else []))
        for i, row in enumerate(x):
            cells = [repr(float(v)) for v in row]
            if y is not None:
                yi = y[i]
                cells.append(str(int(yi)) if np.issubdtype(np.asarray(y).dtype, np.integer) else repr(float(yi)))
            w.writerow(cells)


@dataclass
class TraceStep:
    action: int
    rewards: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)


@dataclass
class AcquisitionTrace:
    """Ordered record of one acquisition episode."""

    d: int
    steps: list[TraceStep] = field(default_factory=list)
    prediction: object = None
    observed: FeatureIndexSet | None = None
    meta: dict = field(default_factory=dict)

    @property
    def acquired(self) -> list[int]:
        return [s.action for s in self.steps if s.action != TERMINATE]

    @property
    def terminated(self) -> bool:
        return bool(self.steps) and self.steps[-1].action == TERMINATE

    def append(self, action: int, rewards: dict | None = None, **info) -> None:
        if self.terminated:
            raise ValueError("trace already terminated")
        if action != TERMINATE and action in self.acquired:
            raise ValueError(f"feature {action} acquired twice")
        self.steps.append(TraceStep(int(action), dict(rewards or {}), info))

    def total_reward(self, gamma: float = 1.0) -> float:
        return float(sum(gamma**t * sum(s.rewards.values()) for t, s in enumerate(self.steps)))

    def reward_component(self, name: str) -> float:
        return float(sum(s.rewards.get(name, 0.0) for s in self.steps))

    def validate(self, chronological: bool = False, initially_observed=()) -> None:
        seen = set(initially_observed)
        last = -1
        for t, s in enumerate(self.steps):
            if s.action == TERMINATE:
                if t != len(self.steps) - 1:
                    raise ValueError("terminate must be the last step")
                continue
            if s.action in seen:
                raise ValueError(f"feature {s.action} was already observed at step {t}")
            if chronological and s.action <= last:
                raise ValueError(f"feature {s.action} violates chronological order")
            seen.add(s.action)
            last = max(last, s.action)

    def to_records(self, instance_id=None) -> list[dict]:
        recs = []
        for t, s in enumerate(self.steps):
            rec = {"step": t, "action": "terminate" if s.action == TERMINATE else s.action}
            if instance_id is not None:
                rec = {"instance": instance_id, **rec}
            rec["rewards"] = {k: float(v) for k, v in s.rewards.items()}
            rec.update(_jsonable(s.info))
            recs.append(rec)
        return recs

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "steps": [
                {"action": s.action, "rewards": _jsonable(s.rewards), "info": _jsonable(s.info)}
                for s in self.steps
            ],
            "prediction": _jsonable(self.prediction),
            "observed": None if self.observed is None else list(self.observed.indices),
            "meta": _jsonable(self.meta),
        }

    @classmethod
    def from_json(cls, data: dict) -> "AcquisitionTrace":
        tr = cls(int(data["d"]))
        for s in data["steps"]:
            tr.steps.append(TraceStep(int(s["action"]), dict(s["rewards"]), dict(s["info"])))
        tr.prediction = data.get("prediction")
        obs = data.get("observed")
        tr.observed = None if obs is None else FeatureIndexSet(obs, tr.d)
        tr.meta = dict(data.get("meta", {}))
        return tr


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, FeatureIndexSet):
        return list(obj.indices)
    return obj


def dump_jsonl(path, records: Iterable[dict]) -> None:
    with Path(path).open("w") as fh:
        for rec in records:
            fh.write(json.dumps(_jsonable(rec), sort_keys=True) + "\n")


def read_jsonl(path) -> list[dict]:
    with Path(path).open() as fh:
        return [json.loads(line) for line in fh if line.strip()]


def candidate_features(inst: PartialInstance, chronological: bool = False) -> np.ndarray:
    """Unobserved indices that may still be acquired.

    Under the chronological rule every index at or below the largest observed
    index is removed.
    """
    cand = inst.unobs_idx
    if chronological and len(inst.observed):
        cand = cand[cand > max(inst.observed)]
    return cand
