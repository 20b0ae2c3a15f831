"""Feature weighting schemes for analogy-based estimation.

Every scheme receives a *weighting view* of the training features: the
normalized numeric columns, or their bin labels rescaled to 0..1 when a
discretization is configured. Symbolic schemes treat distinct values as
symbols and score them against the effort classes.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .config_space import Weighting
from .data import DiscretizedColumn, Discretization, ProjectTable, discretize

FLOOR_WEIGHT = 0.1
DISCRETIZATION_BINS = 10

GA_POPULATION = 20
GA_GENERATIONS = 10
GA_TOURNAMENT = 2

CLASS_SCHEMES = frozenset({Weighting.GAIN_RANK, Weighting.RELIEF, Weighting.CFS, Weighting.CNS})


@dataclass(frozen=True, eq=False)
class WeightVector:
    weights: np.ndarray
    scheme: Weighting = Weighting.UNIFORM
    fallback: str | None = None

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a non-empty vector")
        if not np.all(np.isfinite(w)) or np.any(w < 0) or not np.any(w > 0):
            raise ValueError("weights must be finite, non-negative and not all zero")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.weights.size

    def to_dict(self) -> dict:
        return {"scheme": self.scheme.value, "weights": self.weights.tolist(), "fallback": self.fallback}


def uniform_weights(n: int) -> WeightVector:
    return WeightVector(np.ones(n), Weighting.UNIFORM)


def weighting_view(rows: np.ndarray, policy: Discretization, bins: int = DISCRETIZATION_BINS) -> np.ndarray:
    """Columns fed to the weighting schemes (bin labels scaled to 0..1, or the rows untouched)."""
    policy = Discretization(policy)
    if policy is Discretization.NONE:
        return np.asarray(rows, dtype=float)
    cols = [
        discretize(rows[:, j], policy, bins, source_column=j).bin_labels / (bins - 1)
        for j in range(rows.shape[1])
    ]
    return np.column_stack(cols).astype(float)


# ------------------------------------------------------------- info theory


def _entropy(labels) -> float:
    counts = np.array(list(Counter(labels).values()), dtype=float)
    p = counts / counts.sum()
    return float(-(p * np.log2(p)).sum())


def _joint(a, b) -> list:
    return list(zip(a.tolist(), b.tolist()))


def information_gain(feature: np.ndarray, classes: np.ndarray) -> float:
    return _entropy(classes.tolist()) + _entropy(feature.tolist()) - _entropy(_joint(feature, classes))


def symmetric_uncertainty(a: np.ndarray, b: np.ndarray) -> float:
    ha, hb = _entropy(a.tolist()), _entropy(b.tolist())
    if ha + hb == 0:
        return 0.0
    return 2.0 * (ha + hb - _entropy(_joint(a, b))) / (ha + hb)


def _scaled(raw: np.ndarray, scheme: Weighting) -> WeightVector:
    raw = np.clip(np.asarray(raw, dtype=float), 0.0, None)
    top = raw.max() if raw.size else 0.0
    if not np.isfinite(top) or top <= 0:
        return WeightVector(np.ones(raw.size), scheme, fallback="all-zero weights")
    return WeightVector(raw / top, scheme)


# ------------------------------------------------------------------ schemes


def _gain_rank(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.array([information_gain(x[:, j], y) for j in range(x.shape[1])])


def _relief(x: np.ndarray, y: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n, f = x.shape
    gaps = np.abs(x[:, None, :] - x[None, :, :])
    dist = gaps.sum(axis=2)
    np.fill_diagonal(dist, np.inf)
    classes, counts = np.unique(y, return_counts=True)
    prior = dict(zip(classes.tolist(), (counts / n).tolist()))
    w = np.zeros(f)
    m = n
    for i in rng.integers(0, n, size=m):
        own = y[i]
        same = np.where(y == own, dist[i], np.inf)
        hit = int(np.argmin(same))
        if np.isfinite(same[hit]):
            w -= gaps[i, hit] / m
        for c in classes:
            if c == own:
                continue
            other = np.where(y == c, dist[i], np.inf)
            miss = int(np.argmin(other))
            w += prior[c] / (1.0 - prior[own]) * gaps[i, miss] / m
    return w


def _pca(x: np.ndarray) -> np.ndarray | None:
    centred = x - x.mean(axis=0)
    _, s, vt = np.linalg.svd(centred, full_matrices=False)
    var = s**2
    if var.sum() <= 0:
        return None
    ratio = var / var.sum()
    return (np.abs(vt) * ratio[:, None]).sum(axis=0)


def _cfs(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    f = x.shape[1]
    r_cf = np.array([symmetric_uncertainty(x[:, j], y) for j in range(f)])
    r_ff = np.zeros((f, f))
    for i in range(f):
        for j in range(i + 1, f):
            r_ff[i, j] = r_ff[j, i] = symmetric_uncertainty(x[:, i], x[:, j])
    mean_ff = r_ff.sum(axis=1) / max(f - 1, 1)
    return r_cf / (1.0 + mean_ff)


def inconsistency_rate(x: np.ndarray, y: np.ndarray, subset) -> float:
    groups: dict[tuple, Counter] = {}
    for row, label in zip(x[:, list(subset)].tolist(), y.tolist()):
        groups.setdefault(tuple(row), Counter())[label] += 1
    bad = sum(sum(c.values()) - max(c.values()) for c in groups.values())
    return bad / len(y)


def _cns(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    f = x.shape[1]
    target = inconsistency_rate(x, y, range(f))
    chosen: list[int] = []
    rate = inconsistency_rate(x, y, chosen)
    while rate > target + 1e-12:
        trials = [(inconsistency_rate(x, y, chosen + [j]), j) for j in range(f) if j not in chosen]
        rate, j = min(trials)
        chosen.append(j)
    w = np.full(f, FLOOR_WEIGHT)
    w[chosen] = 1.0
    return w


class _LooScorer:
    """Leave-one-out MRE of 1-nearest-neighbour estimation under arbitrary weights."""

    def __init__(self, x: np.ndarray, effort: np.ndarray):
        self.diff2 = (x[:, None, :] - x[None, :, :]) ** 2
        self.effort = effort
        self.n = effort.size

    def distances(self, w: np.ndarray) -> np.ndarray:
        d = self.diff2 @ w
        d[np.arange(self.n), np.arange(self.n)] = np.inf
        return d

    def mre_from(self, d: np.ndarray) -> float:
        nearest = np.argmin(d, axis=1)
        return float(np.mean(np.abs(self.effort - self.effort[nearest]) / self.effort))

    def __call__(self, w: np.ndarray) -> float:
        return self.mre_from(self.distances(w))


def _wrapper(x: np.ndarray, effort: np.ndarray) -> np.ndarray:
    f = x.shape[1]
    score = _LooScorer(x, effort)
    chosen: list[int] = []
    best = np.inf
    base = np.zeros((score.n, score.n))
    while len(chosen) < f:
        trials = []
        for j in range(f):
            if j in chosen:
                continue
            d = base + score.diff2[:, :, j]
            d[np.arange(score.n), np.arange(score.n)] = np.inf
            trials.append((score.mre_from(d), j))
        err, j = min(trials)
        if err >= best:
            break
        best = err
        chosen.append(j)
        base = base + score.diff2[:, :, j]
    w = np.full(f, FLOOR_WEIGHT)
    w[chosen] = 1.0
    return w


def _genetic(x: np.ndarray, effort: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    f = x.shape[1]
    score = _LooScorer(x, effort)
    pop = rng.random((GA_POPULATION, f))
    fit = np.array([score(ind) if ind.any() else np.inf for ind in pop])
    best_i = int(np.argmin(fit))
    best, best_fit = pop[best_i].copy(), fit[best_i]
    rate = 1.0 / f
    for _ in range(GA_GENERATIONS):
        children = [best.copy()]
        while len(children) < GA_POPULATION:
            parents = []
            for _ in range(2):
                contenders = rng.integers(0, GA_POPULATION, size=GA_TOURNAMENT)
                parents.append(pop[contenders[np.argmin(fit[contenders])]])
            if f > 1:
                cut = int(rng.integers(1, f))
                child = np.concatenate([parents[0][:cut], parents[1][cut:]])
            else:
                child = parents[0].copy()
            mutate = rng.random(f) < rate
            child[mutate] = rng.random(int(mutate.sum()))
            children.append(child)
        pop = np.array(children)
        fit = np.array([score(ind) if ind.any() else np.inf for ind in pop])
        i = int(np.argmin(fit))
        if fit[i] < best_fit:
            best, best_fit = pop[i].copy(), fit[i]
    return best


def weight_features(
    table: ProjectTable,
    scheme: Weighting,
    classes: DiscretizedColumn | None = None,
    seed=0,
) -> WeightVector:
    """Per-feature weights for ``table`` (already in weighting-view form).

    Schemes that score features against effort classes fall back to uniform
    weights, flagged in ``fallback``, when fewer than two classes exist.
    """
    scheme = Weighting(scheme)
    n_feat = table.n_features
    if scheme is Weighting.UNIFORM:
        return uniform_weights(n_feat)
    x = np.asarray(table.rows, dtype=float)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    if scheme in CLASS_SCHEMES:
        if classes is None or classes.bin_labels is None:
            raise ValueError(f"{scheme.value} weighting needs an effort-class column")
        y = np.asarray(classes.bin_labels)
        if np.unique(y).size < 2:
            return WeightVector(np.ones(n_feat), scheme, fallback="degenerate classes")
        if scheme is Weighting.GAIN_RANK:
            return _scaled(_gain_rank(x, y), scheme)
        if scheme is Weighting.RELIEF:
            return _scaled(_relief(x, y, rng), scheme)
        if scheme is Weighting.CFS:
            return _scaled(_cfs(x, y), scheme)
        return _scaled(_cns(x, y), scheme)

    if scheme is Weighting.PCA:
        raw = _pca(x)
        if raw is None:
            return WeightVector(np.ones(n_feat), scheme, fallback="zero variance")
        return _scaled(raw, scheme)
    if table.n_rows < 2:
        return WeightVector(np.ones(n_feat), scheme, fallback="too few rows")
    if scheme is Weighting.WRAPPER:
        return _scaled(_wrapper(x, table.effort), scheme)
    return _scaled(_genetic(x, table.effort, rng), scheme)
