"""Dataset ingestion, normalization, discretization and fold planning."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    DatasetTooSmall,
    EmptyDataset,
    MalformedCsv,
    NonPositiveEffort,
)

# Smallest dataset loaded from disk (kemerer has 15 rows; the floor keeps 3-fold CV meaningful).
MIN_DATASET_ROWS = 6
SMALL_DATASET_LIMIT = 40
DEFAULT_REPEATS = 20
TUNE_FRACTION_DENOMINATOR = 3

BUNDLED_DATASETS = (
    "kemerer",
    "albrecht",
    "isbsg10",
    "finnish",
    "miyazaki",
    "maxwell",
    "desharnais",
    "kitchenham",
    "china",
)


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ProjectTable:
    """Past projects: numeric feature rows plus one positive effort column."""

    name: str
    feature_names: tuple[str, ...]
    rows: np.ndarray
    effort: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        rows = _frozen(self.rows)
        if rows.ndim == 1 and len(self.feature_names) == 1:
            rows = _frozen(rows.reshape(-1, 1))
        effort = _frozen(self.effort).reshape(-1)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "effort", effort)
        if len(self.feature_names) < 1:
            raise MalformedCsv(f"{self.name}: at least one feature column is required")
        if effort.size == 0:
            raise EmptyDataset(f"{self.name}: no rows")
        if rows.ndim != 2 or rows.shape[1] != len(self.feature_names):
            raise MalformedCsv(
                f"{self.name}: rows must have exactly {len(self.feature_names)} values"
            )
        if rows.shape[0] != effort.size:
            raise MalformedCsv(f"{self.name}: {rows.shape[0]} rows but {effort.size} efforts")
        if not np.all(np.isfinite(rows)) or not np.all(np.isfinite(effort)):
            raise MalformedCsv(f"{self.name}: non-finite values")
        if np.any(effort <= 0):
            raise NonPositiveEffort(f"{self.name}: effort values must be > 0")

    @property
    def n_rows(self) -> int:
        return int(self.effort.size)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def __len__(self) -> int:
        return self.n_rows

    def take(self, indices, name: str | None = None) -> "ProjectTable":
        idx = np.asarray(indices, dtype=int)
        return ProjectTable(name or self.name, self.feature_names, self.rows[idx], self.effort[idx])

    def with_rows(self, rows: np.ndarray) -> "ProjectTable":
        return ProjectTable(self.name, self.feature_names, rows, self.effort)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ProjectTable):
            return NotImplemented
        return (
            self.name == other.name
            and self.feature_names == other.feature_names
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.effort, other.effort)
        )

    __hash__ = None


# --------------------------------------------------------------------- CSV I/O


def _parse_cell(text: str, lineno: int, col: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise MalformedCsv(f"line {lineno}, column {col}: non-numeric cell {text!r}") from None
    if not math.isfinite(value):
        raise MalformedCsv(f"line {lineno}, column {col}: non-finite cell {text!r}")
    return value


def load_csv(path, name: str | None = None) -> ProjectTable:
    """Read a dataset CSV.

    The effort column is the one whose header is ``effort`` (any case),
    otherwise the last column. Every other column must be numeric.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyDataset(f"{path}: file is empty") from None
        body = [(reader.line_num, r) for r in reader if any(c.strip() for c in r)]
    if len(header) < 2:
        raise MalformedCsv(f"{path}: need at least one feature column and an effort column")
    lowered = [h.lower() for h in header]
    effort_col = lowered.index("effort") if "effort" in lowered else len(header) - 1
    feature_cols = [i for i in range(len(header)) if i != effort_col]
    if not body:
        raise EmptyDataset(f"{path}: header only, no rows")
    rows, effort = [], []
    for lineno, raw in body:
        if len(raw) != len(header):
            raise MalformedCsv(f"line {lineno}: expected {len(header)} cells, got {len(raw)}")
        values = [_parse_cell(c.strip(), lineno, i + 1) for i, c in enumerate(raw)]
        rows.append([values[i] for i in feature_cols])
        effort.append(values[effort_col])
    if any(e <= 0 for e in effort):
        raise NonPositiveEffort(f"{path}: effort column contains values <= 0")
    if len(rows) < MIN_DATASET_ROWS:
        raise DatasetTooSmall(f"{path}: {len(rows)} rows, need at least {MIN_DATASET_ROWS}")
    return ProjectTable(
        name or path.stem,
        tuple(header[i] for i in feature_cols),
        np.array(rows, dtype=float),
        np.array(effort, dtype=float),
    )


def write_csv(table: ProjectTable, path) -> None:
    """Write ``table`` so that :func:`load_csv` reproduces it bit for bit."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*table.feature_names, "effort"])
        for row, e in zip(table.rows, table.effort):
            w.writerow([repr(float(v)) for v in row] + [repr(float(e))])


def bundled_path(name: str) -> Path:
    if name not in BUNDLED_DATASETS:
        raise KeyError(f"no bundled dataset named {name!r}")
    return Path(str(resources.files("abetune") / "datasets" / f"{name}.csv"))


def load_bundled(name: str) -> ProjectTable:
    return load_csv(bundled_path(name), name=name)


# ---------------------------------------------------------------- normalization


@dataclass(frozen=True, eq=False)
class NormalizationSpec:
    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mins", _frozen(self.mins))
        object.__setattr__(self, "maxs", _frozen(self.maxs))
        if np.any(self.mins > self.maxs):
            raise ValueError("normalization min must not exceed max")

    def apply(self, rows, clip: bool = False) -> np.ndarray:
        rows = np.asarray(rows, dtype=float)
        span = self.maxs - self.mins
        safe = np.where(span > 0, span, 1.0)
        out = np.where(span > 0, (rows - self.mins) / safe, 0.0)
        if clip:
            out = np.clip(out, 0.0, 1.0)
        return out

    def to_dict(self) -> dict:
        return {"min": self.mins.tolist(), "max": self.maxs.tolist()}


def normalize(table: ProjectTable) -> tuple[ProjectTable, NormalizationSpec]:
    """Min-max scale every feature column to 0..1; constant columns become 0.0."""
    spec = NormalizationSpec(table.rows.min(axis=0), table.rows.max(axis=0))
    return table.with_rows(spec.apply(table.rows)), spec


# --------------------------------------------------------------- discretization


class Discretization(enum.Enum):
    NONE = "NoDiscretization"
    EQUAL_FREQUENCY = "EqualFrequency"
    EQUAL_WIDTH = "EqualWidth"


@dataclass(frozen=True, eq=False)
class DiscretizedColumn:
    source_column: int
    policy: Discretization
    bin_count: int
    bin_labels: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.policy is Discretization.NONE:
            if self.bin_labels is not None:
                raise ValueError("policy None carries no labels")
            return
        labels = np.asarray(self.bin_labels, dtype=int)
        labels.setflags(write=False)
        object.__setattr__(self, "bin_labels", labels)
        if labels.size and (labels.min() < 0 or labels.max() >= self.bin_count):
            raise ValueError("bin label out of range")

    @property
    def n_classes(self) -> int:
        return 0 if self.bin_labels is None else int(np.unique(self.bin_labels).size)


def _equal_width(column: np.ndarray, bins: int) -> np.ndarray:
    lo, hi = column.min(), column.max()
    if hi <= lo:
        return np.zeros(column.size, dtype=int)
    labels = np.floor((column - lo) * bins / (hi - lo)).astype(int)
    return np.clip(labels, 0, bins - 1)


def _equal_frequency(column: np.ndarray, bins: int) -> np.ndarray:
    run = math.ceil(column.size / bins)
    order = np.argsort(column, kind="stable")
    labels = np.empty(column.size, dtype=int)
    labels[order] = np.arange(column.size) // run
    return labels


def discretize(column, policy: Discretization, bins: int = 10, source_column: int = 0) -> DiscretizedColumn:
    column = np.asarray(column, dtype=float).reshape(-1)
    if bins < 2:
        raise ValueError("bins must be >= 2")
    if column.size == 0:
        raise ValueError("column must be non-empty")
    policy = Discretization(policy)
    if policy is Discretization.NONE:
        return DiscretizedColumn(source_column, policy, bins, None)
    if policy is Discretization.EQUAL_WIDTH:
        labels = _equal_width(column, bins)
    else:
        labels = _equal_frequency(column, bins)
    return DiscretizedColumn(source_column, policy, bins, labels)


def effort_to_classes(table: ProjectTable, bins: int = 10) -> DiscretizedColumn:
    """Effort classes for the symbolic weighting schemes: equal-width bins of (max-min)/10."""
    return discretize(table.effort, Discretization.EQUAL_WIDTH, bins, source_column=-1)


# ------------------------------------------------------------------------ folds


def fold_count_for(n_rows: int) -> int:
    return 3 if n_rows < SMALL_DATASET_LIMIT else 10


@dataclass(frozen=True)
class FoldPlan:
    dataset_size: int
    fold_count: int
    repeats: int
    seed: int
    assignments: tuple[tuple[tuple[int, ...], ...], ...]

    def test_rows(self, repeat: int, fold: int) -> np.ndarray:
        return np.array(self.assignments[repeat][fold], dtype=int)

    def train_rows(self, repeat: int, fold: int) -> np.ndarray:
        mask = np.ones(self.dataset_size, dtype=bool)
        mask[self.test_rows(repeat, fold)] = False
        return np.flatnonzero(mask)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["repeat", "fold", "row_index"])
            for r, folds in enumerate(self.assignments):
                for f, rows in enumerate(folds):
                    for i in rows:
                        w.writerow([r, f, i])


def make_folds(table: ProjectTable, repeats: int = DEFAULT_REPEATS, seed: int = 0) -> FoldPlan:
    """Independent uniform shuffles, one per repeat, cut into 3 or 10 near-equal folds."""
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    n = table.n_rows
    k = fold_count_for(n)
    if n < k:
        raise DatasetTooSmall(f"{table.name}: {n} rows cannot fill {k} folds")
    assignments = []
    for r in range(repeats):
        rng = np.random.default_rng([seed, r])
        perm = rng.permutation(n)
        assignments.append(tuple(tuple(sorted(int(i) for i in part)) for part in np.array_split(perm, k)))
    return FoldPlan(n, k, repeats, seed, tuple(assignments))


def split_train_tune(train_rows: ProjectTable, seed: int = 0) -> tuple[ProjectTable, ProjectTable]:
    """Hold out a third of the training partition as the tuner's scoring set."""
    n = train_rows.n_rows
    if n < 4:
        raise DatasetTooSmall(f"{train_rows.name}: {n} rows is too few to split train/tune")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_tune = n // TUNE_FRACTION_DENOMINATOR
    tune_idx = np.sort(perm[:n_tune])
    train_idx = np.sort(perm[n_tune:])
    return train_rows.take(train_idx), train_rows.take(tune_idx)


def table_from_arrays(
    rows: Sequence[Sequence[float]] | np.ndarray,
    effort: Sequence[float],
    name: str = "table",
    feature_names: Sequence[str] | None = None,
) -> ProjectTable:
    """Convenience constructor used by tests and notebooks."""
    rows = np.asarray(rows, dtype=float)
    if rows.ndim == 1:
        rows = rows.reshape(-1, 1)
    names = tuple(feature_names) if feature_names else tuple(f"x{i}" for i in range(rows.shape[1]))
    return ProjectTable(name, names, rows, np.asarray(effort, dtype=float))
