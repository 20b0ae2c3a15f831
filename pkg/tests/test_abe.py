import json
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abetune.abe import (
    Neighbor,
    adapt,
    build_estimator,
    distance,
    pairwise_distances,
    predict,
    predict_many,
    prune_outliers,
    resolve_dynamic_k,
    select_analogies,
)
from abetune.config_space import (
    ABE0_CONFIG,
    Adaptation,
    Analogies,
    Configuration,
    Similarity,
    Subset,
    default_feature_model,
    sample_valid,
)
from abetune.data import load_bundled, normalize, table_from_arrays
from abetune.errors import LengthMismatch

MODEL = default_feature_model()
MEASURES = list(Similarity)


def _quartile(sorted_vals, q):
    """Linear-interpolation quantile, written out longhand."""
    pos = (len(sorted_vals) - 1) * q
    lo = math.floor(pos)
    hi = min(lo + 1, len(sorted_vals) - 1)
    return sorted_vals[lo] + (sorted_vals[hi] - sorted_vals[lo]) * (pos - lo)


def _config(**kw):
    return replace(ABE0_CONFIG, **kw).canonical()


def _random_table(n=20, f=3, seed=0):
    rng = np.random.default_rng(seed)
    return table_from_arrays(rng.random((n, f)), rng.uniform(1, 100, n))


# ------------------------------------------------------------------ pruning


def test_prune_outliers_oracle():
    efforts = [1, 2, 3, 4, 100]
    s = sorted(efforts)
    q1, q3 = _quartile(s, 0.25), _quartile(s, 0.75)
    fence = q3 + 1.5 * (q3 - q1)
    expected = [e for e in efforts if e <= fence]
    t = table_from_arrays(np.arange(5.0), efforts)
    assert prune_outliers(t).effort.tolist() == expected == [1, 2, 3, 4]


def test_prune_outliers_flat_and_cap():
    flat = table_from_arrays(np.arange(4.0), [10, 10, 10, 10])
    assert prune_outliers(flat).n_rows == 4
    uniform = table_from_arrays(np.arange(100.0), np.arange(1, 101))
    assert prune_outliers(uniform).n_rows >= 80


def test_prune_outliers_cap_keeps_smaller_outliers():
    efforts = [1.0] * 8 + [500.0, 900.0]
    t = table_from_arrays(np.arange(10.0), efforts)
    kept = prune_outliers(t).effort
    assert kept.size == 8  # cap is floor(0.2 * 10) = 2
    # five rows exceed the fence but the cap is floor(0.2 * 20) = 4: the smallest outlier survives
    efforts = [1.0] * 14 + [1.5, 200.0, 300.0, 400.0, 500.0, 600.0]
    s = sorted(efforts)
    fence = _quartile(s, 0.75) + 1.5 * (_quartile(s, 0.75) - _quartile(s, 0.25))
    assert sum(e > fence for e in efforts) == 5
    kept = prune_outliers(table_from_arrays(np.arange(20.0), efforts)).effort
    assert kept.size == 16
    assert 200.0 in kept and not {300.0, 400.0, 500.0, 600.0} & set(kept.tolist())


# ---------------------------------------------------------------- distances


def test_distance_examples():
    assert distance([0, 0], [1, 1], [1, 1], Similarity.WEIGHTED_EUCLIDEAN) == pytest.approx(math.sqrt(2))
    assert distance([0.2, 0.9], [0.5, 0.1], [1, 1], Similarity.MAX_MEASURE) == pytest.approx(
        max(abs(0.2 - 0.5), abs(0.9 - 0.1))
    )
    assert distance([0, 0], [1, 1], [4, 0], Similarity.EUCLIDEAN) == pytest.approx(math.sqrt(2))
    assert distance([0, 0], [1, 1], [4, 0], Similarity.WEIGHTED_EUCLIDEAN) == pytest.approx(2.0)


def test_distance_length_mismatch():
    with pytest.raises(LengthMismatch):
        distance([0, 0], [1, 1, 1], [1, 1], Similarity.EUCLIDEAN)


vectors = st.lists(st.floats(0, 1), min_size=3, max_size=3)


@settings(max_examples=100, deadline=None)
@given(vectors, vectors, st.lists(st.floats(0.01, 2), min_size=3, max_size=3), st.sampled_from(MEASURES))
def test_distance_identity_and_symmetry(x, y, w, m):
    assert distance(x, x, w, m) == 0
    assert distance(x, y, w, m) == pytest.approx(distance(y, x, w, m), abs=1e-12)
    assert distance(x, y, w, m) >= 0


@settings(max_examples=100, deadline=None)
@given(vectors, vectors)
def test_minkowski_two_matches_euclidean(x, y):
    mk = distance(x, y, [1, 1, 1], Similarity.MINKOWSKI, p=2.0)
    eu = distance(x, y, [1, 1, 1], Similarity.EUCLIDEAN)
    assert abs(mk - eu) < 1e-12


def test_feature_rank_mean_ranks_against_pool():
    pool = np.array([[0.0, 0.0], [0.1, 0.9], [0.5, 0.5], [1.0, 1.0]])
    q = np.array([[0.0, 0.0]])
    d = pairwise_distances(q, pool, [1, 1], Similarity.FEATURE_RANK_MEAN)
    # gaps per feature: f0 [0, .1, .5, 1] -> ranks 0,1,2,3 ; f1 [0, .9, .5, 1] -> ranks 0,2,1,3
    assert d[0].tolist() == [0.0, 1.5, 1.5, 3.0]


def test_batch_matches_single_queries_bitwise():
    t = _random_table(30, 4, seed=5)
    for m in MEASURES:
        batch = pairwise_distances(t.rows[:7], t.rows, np.full(4, 0.7), m, 2.5)
        for i in range(7):
            one = pairwise_distances(t.rows[i], t.rows, np.full(4, 0.7), m, 2.5)
            assert np.array_equal(batch[i], one[0])


# ------------------------------------------------------------ neighbours


def test_select_analogies_fixture():
    t = table_from_arrays([[0.0], [0.4], [1.0]], [10, 20, 30])
    est = build_estimator(_config(analogies=Analogies.K2, adaptation=Adaptation.MEAN), t)
    got = select_analogies([0.1], est)
    assert [n.row_index for n in got] == [0, 1]
    assert [n.distance for n in got] == pytest.approx([0.1, 0.3])


def test_select_analogies_self_and_all_rows():
    t = table_from_arrays([[0.0], [0.4], [1.0]], [10, 20, 30])
    est = build_estimator(ABE0_CONFIG, t)
    (only,) = select_analogies([0.4], est)
    assert only.row_index == 1 and only.distance == 0
    est3 = build_estimator(_config(analogies=Analogies.K3, adaptation=Adaptation.MEAN), t)
    assert sorted(n.row_index for n in select_analogies([0.5], est3)) == [0, 1, 2]


def test_ties_go_to_lower_index():
    t = table_from_arrays([[0.0], [1.0], [0.0]], [10, 20, 30])
    est = build_estimator(ABE0_CONFIG, t)
    assert select_analogies([0.0], est)[0].row_index == 0


# ----------------------------------------------------------------- adaptation


def test_adapt_examples():
    nbrs = [Neighbor(i, d, e) for i, (d, e) in enumerate([(0.1, 10), (0.2, 20), (0.3, 90)])]
    assert adapt(nbrs, Adaptation.MEDIAN) == 20
    assert adapt(nbrs, Adaptation.MEAN) == 40
    two = [Neighbor(0, 0.0, 10), Neighbor(1, 1.0, 30)]
    w0, w1 = 1 / 1e-8, 1 / (1 + 1e-8)
    assert adapt(two, Adaptation.WEIGHTED_MEAN) == pytest.approx((10 * w0 + 30 * w1) / (w0 + w1))
    assert adapt(two, Adaptation.WEIGHTED_MEAN) == pytest.approx(10, abs=1e-6)


def test_second_learner_exact_on_linear_neighbours():
    x = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    effort = 5 + 2 * x[:, 0] + 3 * x[:, 1]
    ctx = table_from_arrays(x, effort)
    nbrs = [Neighbor(i, 0.1, float(effort[i])) for i in range(4)]
    assert adapt(nbrs, Adaptation.SECOND_LEARNER, ctx, [0.5, 0.5]) == pytest.approx(7.5)


def test_second_learner_falls_back_to_mean():
    x = np.array([[0.0, 0.0], [1.0, 1.0]])
    ctx = table_from_arrays(x, [10.0, 30.0])
    nbrs = [Neighbor(0, 0.1, 10.0), Neighbor(1, 0.2, 30.0)]
    assert adapt(nbrs, Adaptation.SECOND_LEARNER, ctx, [0.5, 0.5]) == 20


def test_adapt_needs_neighbours():
    with pytest.raises(ValueError):
        adapt([], Adaptation.MEAN)


# ----------------------------------------------------------------- dynamic k


def test_dynamic_k_duplicates_pick_one():
    t = table_from_arrays([[0.0], [0.0], [1.0], [1.0], [0.5], [0.5]], [10, 10, 50, 50, 30, 30])
    cfg = _config(analogies=Analogies.DYNAMIC, adaptation=Adaptation.MEAN)
    assert resolve_dynamic_k(normalize(t)[0], cfg) == 1


def test_dynamic_k_small_table_searches_one_and_two():
    t = table_from_arrays([[0.0], [0.1], [1.0]], [10, 100, 12])
    cfg = _config(analogies=Analogies.DYNAMIC, adaptation=Adaptation.MEAN)
    assert resolve_dynamic_k(normalize(t)[0], cfg) in (1, 2)


def _cluster_fixture():
    rng = np.random.default_rng(11)
    rows, effort = [], []
    for centre, base in ((0.0, 100.0), (0.5, 400.0), (1.0, 900.0)):
        for factor in rng.permutation([0.7, 1.3, 0.9, 1.1]):
            rows.append([centre + rng.normal(0, 0.01)])
            effort.append(base * factor)
    return table_from_arrays(rows, effort)


def _loo_best_k(rows, effort, k_max):
    """Plain-Python leave-one-out search over k with Mean adaptation."""
    n = len(effort)
    best = None
    for k in range(1, k_max + 1):
        errs = []
        for i in range(n):
            d = sorted((abs(rows[i] - rows[j]), j) for j in range(n) if j != i)
            pred = sum(effort[j] for _, j in d[:k]) / k
            errs.append(abs(effort[i] - pred) / effort[i])
        err = sum(errs) / n
        if best is None or err < best[1]:
            best = (k, err)
    return best[0]


def test_dynamic_k_cluster_fixture():
    t = _cluster_fixture()
    normed = normalize(t)[0]
    cfg = _config(analogies=Analogies.DYNAMIC, adaptation=Adaptation.MEAN, similarity=Similarity.EUCLIDEAN)
    k = resolve_dynamic_k(normed, cfg)
    oracle = _loo_best_k(normed.rows[:, 0].tolist(), normed.effort.tolist(), t.n_rows - 1)
    assert k == oracle
    assert k in (2, 3, 4)
    est = build_estimator(cfg, t)
    assert est.chosen_k == k
    pred = predict(est, [0.5])
    assert 400 * 0.7 <= pred <= 400 * 1.3


# ----------------------------------------------------------------- estimator


def test_abe0_estimator_shape():
    t = _random_table()
    est = build_estimator(ABE0_CONFIG, t)
    assert est.chosen_k == 1
    assert est.weights.weights.tolist() == [1.0] * 3
    assert est.train.n_rows == t.n_rows
    json.dumps(est.to_dict())


def test_outlier_prune_estimator_drops_row():
    t = table_from_arrays(np.arange(5.0), [1, 2, 3, 4, 100])
    est = build_estimator(_config(subset=Subset.OUTLIER_PRUNE), t)
    assert est.train.n_rows == 4


def test_build_deterministic_weights():
    t = load_bundled("albrecht")
    cfg = Configuration("RemoveNothing", "Genetic", "EqualWidth", "WeightedEuclidean", "Mean", "K2")
    a = build_estimator(cfg, t, seed=9).weights.weights
    b = build_estimator(cfg, t, seed=9).weights.weights
    assert a.tobytes() == b.tobytes()


def test_predict_examples():
    t = _random_table(12, 2, seed=1)
    est = build_estimator(ABE0_CONFIG, t)
    assert predict(est, t.rows[4]) == t.effort[4]
    two = table_from_arrays([[0.0], [1.0]], [10, 50])
    est2 = build_estimator(_config(analogies=Analogies.K2, adaptation=Adaptation.MEAN), two)
    for q in (-3.0, 0.2, 7.0):
        assert predict(est2, [q]) == 30


def test_predict_arity_check():
    est = build_estimator(ABE0_CONFIG, _random_table())
    with pytest.raises(LengthMismatch):
        predict(est, [0.1, 0.2])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 19))
def test_leave_in_exactness(seed, row):
    t = _random_table(20, 3, seed=seed % 97)
    cfg = replace(sample_valid(MODEL, seed), analogies=Analogies.K1).canonical()
    est = build_estimator(cfg, t, seed=seed)
    q = est.norm.apply(t.rows[row : row + 1])[0]
    if tuple(q) not in {tuple(r) for r in est.train.rows}:
        return  # row pruned by the subset policy
    assert predict(est, t.rows[row]) == t.effort[row]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([Adaptation.MEDIAN, Adaptation.MEAN, Adaptation.WEIGHTED_MEAN]))
def test_prediction_within_neighbour_range(seed, strategy):
    t = _random_table(25, 3, seed=seed % 89)
    cfg = replace(sample_valid(MODEL, seed), adaptation=strategy).canonical()
    est = build_estimator(cfg, t, seed=seed)
    q = np.random.default_rng(seed).random(3)
    nbrs = select_analogies(est.norm.apply(q[None, :], clip=True)[0], est)
    efforts = [n.effort for n in nbrs]
    pred = predict(est, q)
    assert min(efforts) - 1e-9 <= pred <= max(efforts) + 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(-6, 6), st.integers(0, 2))
def test_normalization_invariance(seed, exponent, col):
    t = _random_table(18, 3, seed=seed % 83)
    scale = np.ones(3)
    scale[col] = 2.0**exponent  # powers of two keep the rescaling bit-exact
    scaled = t.with_rows(t.rows * scale)
    cfg = sample_valid(MODEL, seed)
    q = np.random.default_rng(seed).random((4, 3))
    a = predict_many(build_estimator(cfg, t, seed=1), q)
    b = predict_many(build_estimator(cfg, scaled, seed=1), q * scale)
    assert np.array_equal(a, b)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(MEASURES))
def test_uniform_weight_scaling_keeps_order(seed, m):
    rng = np.random.default_rng(seed)
    train, q = rng.random((15, 3)), rng.random((3, 3))
    d1 = pairwise_distances(q, train, np.ones(3), m)
    d2 = pairwise_distances(q, train, np.full(3, 2.0), m)
    assert np.array_equal(np.argsort(d1, axis=1, kind="stable"), np.argsort(d2, axis=1, kind="stable"))
