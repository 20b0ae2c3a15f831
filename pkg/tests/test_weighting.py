import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abetune.config_space import Weighting
from abetune.data import Discretization, discretize, effort_to_classes, table_from_arrays
from abetune.weighting import (
    FLOOR_WEIGHT,
    WeightVector,
    information_gain,
    inconsistency_rate,
    symmetric_uncertainty,
    weight_features,
    weighting_view,
)

ALL_SCHEMES = list(Weighting)


def _entropy(values):
    n = len(values)
    return -sum(c / n * math.log2(c / n) for c in Counter(values).values())


def _gain_oracle(feature, classes):
    """H(C) - H(C | F) computed by grouping rows on the feature value."""
    n = len(classes)
    cond = 0.0
    for v in set(feature):
        sub = [c for f, c in zip(feature, classes) if f == v]
        cond += len(sub) / n * _entropy(sub)
    return _entropy(classes) - cond


def _classes(effort):
    return discretize(effort, Discretization.EQUAL_WIDTH, 10, source_column=-1)


def test_uniform_is_all_ones():
    t = table_from_arrays(np.random.default_rng(0).random((8, 6)), np.arange(1, 9))
    assert weight_features(t, Weighting.UNIFORM).weights.tolist() == [1.0] * 6


def test_information_gain_matches_oracle():
    rng = np.random.default_rng(3)
    f = rng.integers(0, 3, 40)
    c = rng.integers(0, 4, 40)
    assert information_gain(f, c) == pytest.approx(_gain_oracle(f.tolist(), c.tolist()), abs=1e-12)


def test_gain_rank_prefers_label_copy():
    labels = np.array([0, 0, 1, 1, 2, 2])
    rows = np.column_stack([labels / 2.0, np.full(6, 0.5)])
    t = table_from_arrays(rows, [1, 2, 3, 4, 5, 6])
    w = weight_features(t, Weighting.GAIN_RANK, _classes(labels.astype(float) + 1))
    assert _gain_oracle(labels.tolist(), labels.tolist()) == pytest.approx(math.log2(3))
    assert w.weights[0] > w.weights[1] == 0.0


def test_symmetric_uncertainty_bounds():
    a = np.array([0, 1, 0, 1, 2, 2])
    assert symmetric_uncertainty(a, a) == pytest.approx(1.0)
    assert symmetric_uncertainty(a, np.zeros(6, dtype=int)) == 0.0


def test_relief_constant_feature_is_zero():
    rng = np.random.default_rng(4)
    effort = rng.uniform(1, 100, 30)
    rows = np.column_stack([(effort - effort.min()) / np.ptp(effort), np.full(30, 0.3)])
    t = table_from_arrays(rows, effort)
    w = weight_features(t, Weighting.RELIEF, effort_to_classes(t), seed=1)
    assert w.weights[1] == 0.0
    assert w.weights[0] == 1.0


def test_inconsistency_rate_oracle():
    x = np.array([[0, 0], [0, 1], [1, 0], [1, 1], [0, 0]])
    y = np.array([0, 1, 1, 0, 1])
    # on feature 0 alone: value 0 -> classes {0,1,1}: 1 inconsistent; value 1 -> {1,0}: 1
    assert inconsistency_rate(x, y, [0]) == pytest.approx(2 / 5)
    assert inconsistency_rate(x, y, [0, 1]) == pytest.approx(1 / 5)


def test_cns_keeps_only_needed_features():
    rng = np.random.default_rng(7)
    labels = rng.integers(0, 5, 30)
    rows = np.column_stack([labels / 4.0, rng.integers(0, 3, 30) / 2.0, rng.integers(0, 3, 30) / 2.0])
    effort = labels * 10.0 + 1
    t = table_from_arrays(rows, effort)
    w = weight_features(t, Weighting.CNS, _classes(effort))
    assert w.weights.tolist()[0] == 1.0
    assert set(w.weights.tolist()[1:]) <= {1.0, FLOOR_WEIGHT}


def test_wrapper_selects_informative_feature():
    rng = np.random.default_rng(2)
    x0 = rng.random(30)
    rows = np.column_stack([x0, rng.random(30), rng.random(30)])
    effort = 10 + 100 * x0
    w = weight_features(table_from_arrays(rows, effort), Weighting.WRAPPER)
    assert w.weights[0] == 1.0
    assert set(w.weights.tolist()) <= {1.0, FLOOR_WEIGHT}


def test_pca_weights_follow_variance():
    rng = np.random.default_rng(5)
    rows = np.column_stack([rng.random(40), 0.01 * rng.random(40)])
    w = weight_features(table_from_arrays(rows, np.arange(1, 41)), Weighting.PCA)
    assert w.weights[0] == 1.0 and w.weights[1] < 0.1


def test_degenerate_classes_fall_back():
    t = table_from_arrays(np.random.default_rng(1).random((6, 2)), np.full(6, 5.0))
    w = weight_features(t, Weighting.GAIN_RANK, effort_to_classes(t))
    assert w.weights.tolist() == [1.0, 1.0]
    assert w.fallback == "degenerate classes"


def test_class_schemes_need_classes():
    t = table_from_arrays(np.random.default_rng(1).random((6, 2)), np.arange(1, 7))
    with pytest.raises(ValueError):
        weight_features(t, Weighting.CFS)


def test_weighting_view_uses_bin_labels():
    rows = np.array([[0.0], [0.15], [0.5], [1.0]])
    view = weighting_view(rows, Discretization.EQUAL_WIDTH, bins=10)
    assert view[:, 0].tolist() == pytest.approx([0.0, 1 / 9, 5 / 9, 1.0])
    assert np.array_equal(weighting_view(rows, Discretization.NONE), rows)


def test_weight_vector_validation():
    with pytest.raises(ValueError):
        WeightVector(np.zeros(3))
    with pytest.raises(ValueError):
        WeightVector(np.array([1.0, -1.0]))
    with pytest.raises(ValueError):
        WeightVector(np.array([np.nan, 1.0]))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(ALL_SCHEMES))
def test_every_scheme_returns_valid_deterministic_weights(seed, scheme):
    rng = np.random.default_rng(seed)
    rows = rng.random((15, 4))
    effort = rng.uniform(1, 100, 15)
    t = table_from_arrays(rows, effort)
    view = t.with_rows(weighting_view(rows, Discretization.EQUAL_FREQUENCY))
    a = weight_features(view, scheme, effort_to_classes(t), seed=seed)
    b = weight_features(view, scheme, effort_to_classes(t), seed=seed)
    assert a.weights.tobytes() == b.weights.tobytes()
    assert len(a) == 4
    assert np.all(a.weights >= 0) and a.weights.max() == 1.0
