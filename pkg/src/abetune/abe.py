"""Analogy-based estimation engine (ABE0 and the ABEN variants)."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .config_space import (
    Adaptation,
    Analogies,
    Configuration,
    Similarity,
    Subset,
    Weighting,
)
from .data import NormalizationSpec, ProjectTable, effort_to_classes, normalize
from .errors import LengthMismatch
from .weighting import WeightVector, uniform_weights, weight_features, weighting_view

log = logging.getLogger(__name__)

OUTLIER_IQR_FACTOR = 1.5
OUTLIER_CAP_FRACTION = 0.2
WEIGHTED_MEAN_EPS = 1e-8
DYNAMIC_K_CAP = 16


@dataclass(frozen=True)
class Neighbor:
    row_index: int
    distance: float
    effort: float


def prune_outliers(table: ProjectTable) -> ProjectTable:
    """Drop rows whose effort exceeds Q3 + 1.5*IQR, never more than 20% of the table."""
    e = table.effort
    q1, q3 = np.percentile(e, [25, 75])
    fence = q3 + OUTLIER_IQR_FACTOR * (q3 - q1)
    flagged = np.flatnonzero(e > fence)
    cap = int(math.floor(OUTLIER_CAP_FRACTION * table.n_rows))
    if flagged.size > cap:
        order = sorted(flagged.tolist(), key=lambda i: (-e[i], i))
        flagged = np.array(order[:cap], dtype=int)
    keep = np.setdiff1d(np.arange(table.n_rows), flagged)
    return table.take(keep)


# -------------------------------------------------------------------- distances


def pairwise_distances(
    queries,
    train,
    weights,
    measure: Similarity,
    p: float = 3.0,
    exclude_self: bool = False,
) -> np.ndarray:
    """Distance from every query row to every training row, shape (q, n).

    Squared gaps are accumulated one feature at a time, in column order, so a
    batch of queries gives bit-identical distances to one query at a time.
    ``exclude_self`` (queries are the training rows) puts +inf on the diagonal
    and, for FeatureRankMean, leaves each query out of its own rank pool.
    """
    q = np.atleast_2d(np.asarray(queries, dtype=float))
    t = np.atleast_2d(np.asarray(train, dtype=float))
    w = np.asarray(weights.weights if isinstance(weights, WeightVector) else weights, dtype=float)
    if q.shape[1] != t.shape[1] or w.size != t.shape[1]:
        raise LengthMismatch(
            f"queries have {q.shape[1]} features, training rows {t.shape[1]}, weights {w.size}"
        )
    measure = Similarity(measure)
    n_feat = t.shape[1]

    if measure is Similarity.FEATURE_RANK_MEAN:
        gaps = np.abs(q[:, None, :] - t[None, :, :])
        if exclude_self:
            idx = np.arange(q.shape[0])
            gaps[idx, idx, :] = np.inf
        ranks = rankdata(gaps, axis=1, method="min") - 1.0
        d = (ranks * w).sum(axis=2) / w.sum()
    elif measure is Similarity.MAX_MEASURE:
        d = np.zeros((q.shape[0], t.shape[0]))
        for j in range(n_feat):
            np.maximum(d, np.abs(q[:, j, None] - t[None, :, j]), out=d)
    elif measure is Similarity.MINKOWSKI:
        acc = np.zeros((q.shape[0], t.shape[0]))
        for j in range(n_feat):
            acc += w[j] * np.abs(q[:, j, None] - t[None, :, j]) ** p
        d = acc ** (1.0 / p)
    else:
        if measure is Similarity.EUCLIDEAN:
            w = np.ones(n_feat)
        acc = np.zeros((q.shape[0], t.shape[0]))
        for j in range(n_feat):
            acc += w[j] * (q[:, j, None] - t[None, :, j]) ** 2
        d = np.sqrt(acc)

    if exclude_self:
        idx = np.arange(q.shape[0])
        d[idx, idx] = np.inf
    return d


def distance(x, y, w, measure: Similarity, p: float = 3.0, pool=None) -> float:
    """Distance between two feature vectors.

    FeatureRankMean ranks gaps against a candidate pool; by default the pool
    is just ``{x, y}``.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.size != y.size:
        raise LengthMismatch(f"vectors of length {x.size} and {y.size}")
    if Similarity(measure) is Similarity.FEATURE_RANK_MEAN:
        # y's rank only counts strictly smaller gaps, so appending y to the pool is harmless.
        base = x if pool is None else np.asarray(pool, dtype=float)
        pool = np.vstack([np.atleast_2d(base), y])
        return float(pairwise_distances(x, pool, w, measure, p)[0, -1])
    return float(pairwise_distances(x, y, w, measure, p)[0, 0])


def nearest(d: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k smallest entries per row; ties go to the lower index."""
    return np.argsort(d, axis=1, kind="stable")[:, :k]


# ------------------------------------------------------------------- adaptation


def _second_learner(x_nbr: np.ndarray, e_nbr: np.ndarray, x_query: np.ndarray) -> float | None:
    k, f = x_nbr.shape
    if k < f + 1:
        return None
    design = np.column_stack([np.ones(k), x_nbr])
    beta, _, rank, _ = np.linalg.lstsq(design, e_nbr, rcond=None)
    if rank < f + 1:
        return None
    pred = float(beta[0] + x_query @ beta[1:])
    if not math.isfinite(pred) or pred <= 0:
        return None
    return pred


def adapt_batch(
    idx: np.ndarray,
    dist: np.ndarray,
    effort: np.ndarray,
    strategy: Adaptation,
    train_rows: np.ndarray | None = None,
    queries: np.ndarray | None = None,
) -> np.ndarray:
    """Combine neighbour efforts row by row. ``idx``/``dist`` have shape (q, k)."""
    strategy = Adaptation(strategy)
    e = effort[idx]
    if strategy is Adaptation.MEDIAN:
        return np.median(e, axis=1)
    if strategy is Adaptation.MEAN:
        return e.mean(axis=1)
    if strategy is Adaptation.WEIGHTED_MEAN:
        w = 1.0 / (dist + WEIGHTED_MEAN_EPS)
        return (w * e).sum(axis=1) / w.sum(axis=1)
    if train_rows is None or queries is None:
        raise ValueError("SecondLearner adaptation needs training rows and queries")
    out = e.mean(axis=1)
    for r in range(idx.shape[0]):
        pred = _second_learner(train_rows[idx[r]], e[r], queries[r])
        if pred is None:
            log.debug("second learner fell back to mean for query %d", r)
        else:
            out[r] = pred
    return out


def adapt(neighbors, strategy: Adaptation, train_context: ProjectTable | None = None, query=None) -> float:
    """Effort estimate from a non-empty neighbour list.

    SecondLearner fits least squares on the neighbours' features from
    ``train_context`` and falls back to the mean when it cannot.
    """
    if not neighbors:
        raise ValueError("at least one neighbour is required")
    idx = np.array([[n.row_index for n in neighbors]])
    dist = np.array([[n.distance for n in neighbors]])
    if train_context is not None:
        effort = np.asarray(train_context.effort, dtype=float)
        rows = np.asarray(train_context.rows, dtype=float)
    else:
        effort = np.zeros(int(idx.max()) + 1)
        effort[idx[0]] = [n.effort for n in neighbors]
        rows = None
    q = None if query is None else np.asarray(query, dtype=float).reshape(1, -1)
    return float(adapt_batch(idx, dist, effort, strategy, rows, q)[0])


# -------------------------------------------------------------------- estimator


@dataclass(frozen=True, eq=False)
class AbeEstimator:
    config: Configuration
    train: ProjectTable
    weights: WeightVector
    norm: NormalizationSpec
    chosen_k: int
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "config": str(self.config),
            "weights": self.weights.to_dict(),
            "normalization": self.norm.to_dict(),
            "chosen_k": self.chosen_k,
            "train_rows": self.train.n_rows,
            "meta": dict(self.meta),
        }


def _loo_predictions(
    rows: np.ndarray,
    effort: np.ndarray,
    d: np.ndarray,
    adaptation: Adaptation,
    ks,
) -> dict[int, np.ndarray]:
    order = np.argsort(d, axis=1, kind="stable")
    sorted_d = np.take_along_axis(d, order, axis=1)
    out = {}
    for k in ks:
        out[k] = adapt_batch(order[:, :k], sorted_d[:, :k], effort, adaptation, rows, rows)
    return out


def resolve_dynamic_k(
    train: ProjectTable,
    config: Configuration,
    weights: WeightVector | None = None,
    loo_distances: np.ndarray | None = None,
) -> int:
    """Pick k by leave-one-out mean MRE over 1..min(N-1, 16); ties go to the smaller k.

    ``train`` is the normalized, subset-selected training table.
    """
    n = train.n_rows
    if n < 3:
        return 1
    if weights is None:
        weights = uniform_weights(train.n_features)
    d = loo_distances
    if d is None:
        d = pairwise_distances(train.rows, train.rows, weights, config.similarity, config.minkowski_p, exclude_self=True)
    ks = range(1, min(n - 1, DYNAMIC_K_CAP) + 1)
    preds = _loo_predictions(train.rows, train.effort, d, config.adaptation, ks)
    best_k, best_err = 1, np.inf
    for k in ks:
        err = float(np.mean(np.abs(train.effort - preds[k]) / train.effort))
        if err < best_err:
            best_k, best_err = k, err
    return best_k


class BuildCache:
    """Memoises subset selection, weights and LOO distances for one training table.

    Only valid for a single (train, seed) pair; the tuners create one per run.
    """

    def __init__(self, train: ProjectTable, seed):
        self.train = train
        self.seed = seed
        self._subset: dict = {}
        self._weights: dict = {}
        self._loo: dict = {}

    def subset(self, policy: Subset):
        if policy not in self._subset:
            chosen = prune_outliers(self.train) if policy is Subset.OUTLIER_PRUNE else self.train
            self._subset[policy] = (chosen, *normalize(chosen))
        return self._subset[policy]

    def weights(self, config: Configuration, chosen: ProjectTable, normed: ProjectTable) -> WeightVector:
        key = (config.subset, config.weighting, config.discretization)
        if key not in self._weights:
            self._weights[key] = _compute_weights(config, chosen, normed, self.seed)
        return self._weights[key]

    def loo(self, config: Configuration, normed: ProjectTable, weights: WeightVector) -> np.ndarray:
        key = (config.subset, config.weighting, config.discretization, config.similarity, config.minkowski_p)
        if key not in self._loo:
            self._loo[key] = pairwise_distances(
                normed.rows, normed.rows, weights, config.similarity, config.minkowski_p, exclude_self=True
            )
        return self._loo[key]


def _compute_weights(config, chosen: ProjectTable, normed: ProjectTable, seed) -> WeightVector:
    if config.weighting is Weighting.UNIFORM:
        return uniform_weights(normed.n_features)
    view = normed.with_rows(weighting_view(normed.rows, config.discretization))
    return weight_features(view, config.weighting, effort_to_classes(chosen), seed)


def build_estimator(
    config: Configuration,
    train: ProjectTable,
    seed=0,
    cache: BuildCache | None = None,
) -> AbeEstimator:
    """Subset selection, normalization, weighting and k resolution for one configuration."""
    config = config.canonical()
    if cache is None:
        cache = BuildCache(train, seed)
    elif cache.train is not train:
        raise ValueError("cache belongs to a different training table")
    chosen, normed, norm = cache.subset(config.subset)
    weights = cache.weights(config, chosen, normed)
    n = normed.n_rows
    meta = {"rows_before_subset": train.n_rows, "rows_after_subset": n}
    if weights.fallback:
        meta["weighting_fallback"] = weights.fallback
    if config.analogies is Analogies.DYNAMIC:
        if n >= 3:
            k = resolve_dynamic_k(normed, config, weights, cache.loo(config, normed, weights))
        else:
            k = 1
        meta["dynamic_k_cap"] = DYNAMIC_K_CAP
    else:
        k = min(config.analogies.k, n)
    return AbeEstimator(config, normed, weights, norm, int(k), meta)


def _neighbours_batch(est: AbeEstimator, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    cfg = est.config
    d = pairwise_distances(q, est.train.rows, est.weights, cfg.similarity, cfg.minkowski_p)
    idx = nearest(d, est.chosen_k)
    return idx, np.take_along_axis(d, idx, axis=1)


def select_analogies(query, est: AbeEstimator) -> list[Neighbor]:
    """The chosen_k nearest training rows to a normalized query, ascending distance."""
    q = np.asarray(query, dtype=float).reshape(1, -1)
    idx, dist = _neighbours_batch(est, q)
    return [Neighbor(int(i), float(dd), float(est.train.effort[i])) for i, dd in zip(idx[0], dist[0])]


def predict_many(est: AbeEstimator, raw_rows) -> np.ndarray:
    raw = np.atleast_2d(np.asarray(raw_rows, dtype=float))
    if raw.shape[1] != est.train.n_features:
        raise LengthMismatch(f"query has {raw.shape[1]} features, estimator expects {est.train.n_features}")
    q = est.norm.apply(raw, clip=True)
    idx, dist = _neighbours_batch(est, q)
    return adapt_batch(idx, dist, est.train.effort, est.config.adaptation, est.train.rows, q)


def predict(est: AbeEstimator, query_row) -> float:
    """Estimate effort for one raw (unnormalized) feature vector."""
    return float(predict_many(est, query_row)[0])
