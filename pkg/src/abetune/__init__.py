"""Analogy-based effort estimation with configuration tuning by differential evolution."""

from .abe import AbeEstimator, build_estimator, predict, predict_many, select_analogies
from .baselines import abe0, atlm_fit, atlm_predict
from .config_space import (
    ABE0_CONFIG,
    Configuration,
    FeatureModel,
    default_feature_model,
    enumerate_size,
    sample_valid,
)
from .data import ProjectTable, load_bundled, load_csv, make_folds, split_train_tune
from .evaluation import a12, bootstrap_different, mae, mre, rank_methods, sa
from .tuners import DeParams, Goal, de_optimize, random_search

__version__ = "0.1.0"

__all__ = [
    "ABE0_CONFIG",
    "AbeEstimator",
    "Configuration",
    "DeParams",
    "FeatureModel",
    "Goal",
    "ProjectTable",
    "a12",
    "abe0",
    "atlm_fit",
    "atlm_predict",
    "bootstrap_different",
    "build_estimator",
    "de_optimize",
    "default_feature_model",
    "enumerate_size",
    "load_bundled",
    "load_csv",
    "make_folds",
    "mae",
    "mre",
    "predict",
    "predict_many",
    "random_search",
    "rank_methods",
    "sa",
    "sample_valid",
    "select_analogies",
    "split_train_tune",
]
