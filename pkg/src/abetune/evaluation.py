"""Error measures, nonparametric comparisons and rank clustering."""

from __future__ import annotations

import csv
import enum
import io
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .config_space import AXES, Configuration
from .errors import EmptyInput, NonPositiveActual, SampleTooSmall

DEFAULT_GUESS_RUNS = 1000
DEFAULT_RESAMPLES = 1000
DEFAULT_CONFIDENCE = 0.95
# |A12 - 0.5| below this is a small effect (A12 inside (0.4, 0.6)).
SMALL_EFFECT = 0.1


class Metric(enum.Enum):
    MRE = "MRE"
    SA = "SA"

    @property
    def higher_is_better(self) -> bool:
        return self is Metric.SA


# ---------------------------------------------------------------------- errors


def absolute_residual(actual: float, predicted: float) -> float:
    return abs(actual - predicted)


def mre(actual: float, predicted: float) -> float:
    """|actual - predicted| / actual."""
    if not actual > 0:
        raise NonPositiveActual(f"actual effort must be > 0, got {actual}")
    return absolute_residual(actual, predicted) / actual


def _split_pairs(pairs) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(pairs, dtype=float)
    if arr.size == 0:
        raise EmptyInput("no (actual, predicted) pairs")
    arr = arr.reshape(-1, 2)
    return arr[:, 0], arr[:, 1]


def mre_values(actual, predicted) -> np.ndarray:
    actual = np.asarray(actual, dtype=float)
    if np.any(actual <= 0):
        raise NonPositiveActual("actual effort must be > 0")
    return np.abs(actual - np.asarray(predicted, dtype=float)) / actual


def mae(pairs) -> float:
    """Mean absolute residual over (actual, predicted) pairs."""
    actual, predicted = _split_pairs(pairs)
    return float(np.mean(np.abs(actual - predicted)))


def random_guess_mae(actual, guess_runs: int = DEFAULT_GUESS_RUNS, seed=0) -> float:
    """MAE of random guessing over the pool of actuals.

    Each run guesses every target with a uniformly drawn *other* actual; a
    target's guesses are averaged over the runs before the MAE is taken.
    """
    actual = np.asarray(actual, dtype=float)
    n = actual.size
    if n == 0:
        raise EmptyInput("no actual values")
    if guess_runs < 1:
        raise ValueError("guess_runs must be >= 1")
    if n == 1:
        return 0.0
    rng = np.random.default_rng(seed)
    draws = rng.integers(0, n - 1, size=(guess_runs, n))
    draws += draws >= np.arange(n)
    guesses = actual[draws].mean(axis=0)
    return float(np.mean(np.abs(actual - guesses)))


def mean_guess_mae(actual) -> float:
    """Closed form the random-guess MAE converges to: predict each target by the mean of the others."""
    actual = np.asarray(actual, dtype=float)
    n = actual.size
    if n < 2:
        return 0.0
    others = (actual.sum() - actual) / (n - 1)
    return float(np.mean(np.abs(actual - others)))


def sa(pairs, guess_runs: int = DEFAULT_GUESS_RUNS, seed=0) -> float:
    """Standardized accuracy, (1 - MAE / MAE_random_guess) * 100."""
    actual, predicted = _split_pairs(pairs)
    err = float(np.mean(np.abs(actual - predicted)))
    baseline = random_guess_mae(actual, guess_runs, seed)
    if baseline == 0:
        return 100.0 if err == 0 else -math.inf
    return (1.0 - err / baseline) * 100.0


@dataclass(frozen=True, eq=False)
class EvalResult:
    method: str
    dataset: str
    repeat: int
    fold: int
    actual: np.ndarray
    predicted: np.ndarray
    sa_value: float

    def __post_init__(self):
        a = np.asarray(self.actual, dtype=float)
        p = np.asarray(self.predicted, dtype=float)
        if a.size == 0 or a.shape != p.shape:
            raise EmptyInput("EvalResult needs matching, non-empty actual/predicted vectors")
        if np.any(a <= 0):
            raise NonPositiveActual("actual effort must be > 0")
        object.__setattr__(self, "actual", a)
        object.__setattr__(self, "predicted", p)

    @classmethod
    def from_predictions(cls, method, dataset, repeat, fold, actual, predicted, seed=0):
        pairs = np.column_stack([actual, predicted])
        return cls(method, dataset, repeat, fold, actual, predicted, sa(pairs, seed=seed))

    @property
    def pairs(self) -> list[tuple[float, float]]:
        return list(zip(self.actual.tolist(), self.predicted.tolist()))

    @property
    def mre_values(self) -> np.ndarray:
        return mre_values(self.actual, self.predicted)

    @property
    def median_mre(self) -> float:
        return float(np.median(self.mre_values))

    @property
    def mae(self) -> float:
        return float(np.mean(np.abs(self.actual - self.predicted)))


# ----------------------------------------------------------------- statistics


def a12(a, b) -> float:
    """Vargha-Delaney A12: P(a > b) + 0.5 * P(a == b) over all pairs."""
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.size == 0 or b.size == 0:
        raise EmptyInput("A12 needs two non-empty samples")
    gt = np.count_nonzero(a[:, None] > b[None, :])
    eq = np.count_nonzero(a[:, None] == b[None, :])
    return (gt + 0.5 * eq) / (a.size * b.size)


def bootstrap_different(
    a,
    b,
    confidence: float = DEFAULT_CONFIDENCE,
    resamples: int = DEFAULT_RESAMPLES,
    seed=0,
) -> bool:
    """Two-sided bootstrap test on the difference in means.

    Both samples are shifted onto the pooled mean (the null hypothesis),
    resampled with replacement, and the observed gap is compared with the
    resampled gaps.
    """
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.size < 3 or b.size < 3:
        raise SampleTooSmall("bootstrap needs at least 3 values per sample")
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    observed = abs(a.mean() - b.mean())
    if observed == 0:
        return False
    pooled = np.concatenate([a, b]).mean()
    a0 = a - a.mean() + pooled
    b0 = b - b.mean() + pooled
    rng = np.random.default_rng(seed)
    ma = a0[rng.integers(0, a.size, size=(resamples, a.size))].mean(axis=1)
    mb = b0[rng.integers(0, b.size, size=(resamples, b.size))].mean(axis=1)
    p_value = np.count_nonzero(np.abs(ma - mb) >= observed) / resamples
    return p_value < 1.0 - confidence


def iqr(values) -> float:
    q25, q75 = np.percentile(np.asarray(values, dtype=float), [25, 75])
    return float(q75 - q25)


@dataclass(frozen=True)
class RankEntry:
    method: str
    rank: int
    median: float
    iqr: float


@dataclass(frozen=True)
class RankReport:
    entries: tuple[RankEntry, ...]
    metric: Metric

    def rank_of(self, method: str) -> int:
        for e in self.entries:
            if e.method == method:
                return e.rank
        raise KeyError(method)

    def to_rows(self, scale: float = 1.0) -> list[list]:
        return [[self.metric.value, e.rank, e.method, _fmt(e.median * scale), _fmt(e.iqr * scale)] for e in self.entries]

    def to_csv(self, scale: float = 1.0) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "rank", "method", "median", "iqr"])
        w.writerows(self.to_rows(scale))
        return buf.getvalue()

    def to_markdown(self, title: str = "", scale: float = 1.0, starred: Iterable[str] = ()) -> str:
        starred = set(starred)
        better = "larger" if self.metric.higher_is_better else "smaller"
        lines = []
        if title:
            lines += [f"### {title}", ""]
        lines += [
            f"% {self.metric.value} ({better} is better)",
            "",
            "| Rank | Using | Med. | IQR |",
            "|---:|:---|---:|---:|",
        ]
        for e in self.entries:
            rank = f"{e.rank}*" if e.method in starred and e.rank == 1 else str(e.rank)
            lines.append(f"| {rank} | {e.method} | {e.median * scale:.0f} | {e.iqr * scale:.0f} |")
        return "\n".join(lines) + "\n"


def _fmt(x: float) -> str:
    return repr(float(x))


def rank_methods(
    results: Mapping[str, Sequence[float]],
    metric: Metric | str,
    confidence: float = DEFAULT_CONFIDENCE,
    resamples: int = DEFAULT_RESAMPLES,
    seed=0,
) -> RankReport:
    """Cluster methods into ranks of statistically indistinguishable results.

    Methods are sorted by median (best first). Walking down the list, the
    rank increments when a method differs from the current rank's leading
    member under both the bootstrap test and a non-small A12 effect.
    """
    metric = Metric(metric)
    if len(results) < 1:
        raise SampleTooSmall("need at least one method to rank")
    samples = {m: np.asarray(v, dtype=float).reshape(-1) for m, v in results.items()}
    for m, v in samples.items():
        if v.size < 3:
            raise SampleTooSmall(f"{m}: need at least 3 values, got {v.size}")
    sign = -1.0 if metric.higher_is_better else 1.0
    order = sorted(samples, key=lambda m: (sign * float(np.median(samples[m])), m))
    entries = []
    rank, leader = 1, order[0]
    for pos, m in enumerate(order):
        if pos:
            differs = bootstrap_different(samples[leader], samples[m], confidence, resamples, seed=[*_seed_list(seed), pos])
            if differs and abs(a12(samples[leader], samples[m]) - 0.5) >= SMALL_EFFECT:
                rank += 1
                leader = m
        v = samples[m]
        entries.append(RankEntry(m, rank, float(np.median(v)), iqr(v)))
    return RankReport(tuple(entries), metric)


def _seed_list(seed) -> list[int]:
    if isinstance(seed, (list, tuple)):
        return [int(s) for s in seed]
    return [int(seed)]


# ----------------------------------------------------------- selection counts


def _largest_remainder(counts: Sequence[int], total: int) -> list[int]:
    if total == 0:
        return [0] * len(counts)
    exact = [100.0 * c / total for c in counts]
    floors = [int(math.floor(x)) for x in exact]
    short = 100 - sum(floors)
    by_remainder = sorted(range(len(counts)), key=lambda i: (-(exact[i] - floors[i]), i))
    for i in by_remainder[:short]:
        floors[i] += 1
    return floors


@dataclass(frozen=True)
class FrequencyTable:
    """Per axis, how often each option was chosen (integer percentages summing to 100)."""

    runs: int
    percentages: dict = field(default_factory=dict)  # axis feature -> {option: percent}

    def to_csv_rows(self) -> list[list]:
        return [[axis, option, pct] for axis, opts in self.percentages.items() for option, pct in opts.items()]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["axis", "option", "percent"])
        w.writerows(self.to_csv_rows())
        return buf.getvalue()


def selection_frequency(configs: Sequence[Configuration]) -> FrequencyTable:
    if not configs:
        raise EmptyInput("no winning configurations")
    out = {}
    for axis in AXES:
        counts = Counter(getattr(c, axis.attr) for c in configs)
        options = list(axis.enum)
        pct = _largest_remainder([counts.get(o, 0) for o in options], len(configs))
        out[axis.feature] = {o.value: p for o, p in zip(options, pct)}
    return FrequencyTable(len(configs), out)
