"""Untuned comparison methods: ABE0 and the ATLM linear model."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .abe import AbeEstimator, build_estimator
from .config_space import ABE0_CONFIG
from .data import ProjectTable
from .errors import InsufficientRows, LengthMismatch

RIDGE_LAMBDA = 1e-8
PREDICTION_FLOOR = 1e-6
CONDITION_LIMIT = 1e12


class Transform(enum.Enum):
    IDENTITY = "Identity"
    LOG = "Log"
    SQRT = "Sqrt"


def skewness(x) -> float:
    """Population (biased) sample skewness; 0 for constant columns."""
    x = np.asarray(x, dtype=float)
    m = x.mean()
    m2 = np.mean((x - m) ** 2)
    if m2 <= 0:
        return 0.0
    return float(np.mean((x - m) ** 3) / m2**1.5)


def apply_transform(t: Transform, x: np.ndarray, floor: float | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if t is Transform.LOG:
        # non-positive queries fall back to the smallest training value
        return np.log(np.where(x > 0, x, floor) if floor is not None else x)
    if t is Transform.SQRT:
        return np.sqrt(np.maximum(x, 0.0))
    return x


def choose_transform(column) -> Transform:
    """Transform with the smallest |skewness|; ties keep the earlier of Identity, Log, Sqrt."""
    col = np.asarray(column, dtype=float)
    options = [Transform.IDENTITY]
    if np.all(col > 0):
        options.append(Transform.LOG)
    if np.all(col >= 0):
        options.append(Transform.SQRT)
    scored = [(abs(skewness(apply_transform(t, col))), i, t) for i, t in enumerate(options)]
    return min(scored)[2]


@dataclass(frozen=True, eq=False)
class AtlmModel:
    intercept: float
    coefficients: np.ndarray
    transforms: tuple[Transform, ...]
    residuals: np.ndarray
    log_floors: tuple[float, ...] = ()
    ridge: bool = False

    def to_dict(self) -> dict:
        r = self.residuals
        return {
            "intercept": self.intercept,
            "coefficients": self.coefficients.tolist(),
            "transforms": [t.value for t in self.transforms],
            "ridge": self.ridge,
            "residuals": {
                "n": int(r.size),
                "mean": float(r.mean()),
                "std": float(r.std()),
                "max_abs": float(np.abs(r).max()),
            },
        }

    def design(self, raw_rows) -> np.ndarray:
        x = np.atleast_2d(np.asarray(raw_rows, dtype=float))
        if x.shape[1] != len(self.transforms):
            raise LengthMismatch(f"expected {len(self.transforms)} features, got {x.shape[1]}")
        cols = [
            apply_transform(t, x[:, j], self.log_floors[j] if t is Transform.LOG else None)
            for j, t in enumerate(self.transforms)
        ]
        return np.column_stack(cols) if cols else np.empty((x.shape[0], 0))


def _solve_ols(z: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray, bool]:
    """Least squares with intercept via normal equations on standardized columns."""
    n, f = z.shape
    mu = z.mean(axis=0)
    sd = z.std(axis=0)
    live = sd > 0
    zs = (z[:, live] - mu[live]) / sd[live]
    y_mean = y.mean()
    yc = y - y_mean
    gram = zs.T @ zs
    rhs = zs.T @ yc
    ridge = False
    try:
        if gram.size and np.linalg.cond(gram) > CONDITION_LIMIT:
            raise np.linalg.LinAlgError("ill-conditioned")
        b = np.linalg.solve(gram, rhs) if gram.size else np.zeros(0)
    except np.linalg.LinAlgError:
        ridge = True
        b = np.linalg.solve(gram + RIDGE_LAMBDA * np.eye(gram.shape[0]), rhs)
    beta = np.zeros(f)
    beta[live] = b / sd[live]
    intercept = float(y_mean - mu @ beta)
    return intercept, beta, ridge


def atlm_fit(train: ProjectTable) -> AtlmModel:
    """Fit effort = b0 + sum b_i * T_i(x_i) by least squares.

    Each feature column gets the transform that minimizes its |skewness|.
    """
    x = train.rows
    n, f = x.shape
    if n <= f + 1:
        raise InsufficientRows(f"ATLM needs more than {f + 1} rows, got {n}")
    transforms = tuple(choose_transform(x[:, j]) for j in range(f))
    floors = tuple(float(x[:, j].min()) for j in range(f))
    model = AtlmModel(0.0, np.zeros(f), transforms, np.zeros(n), floors)
    z = model.design(x)
    intercept, beta, ridge = _solve_ols(z, train.effort)
    residuals = train.effort - (intercept + z @ beta)
    return AtlmModel(intercept, beta, transforms, residuals, floors, ridge)


def atlm_predict_raw(model: AtlmModel, raw_rows) -> np.ndarray:
    """Unfloored linear predictions."""
    return model.intercept + model.design(raw_rows) @ model.coefficients


def atlm_predict(model: AtlmModel, query_row) -> float:
    """Linear prediction, floored at 1e-6 so relative errors stay finite."""
    value = float(atlm_predict_raw(model, query_row)[0])
    if not math.isfinite(value):
        return PREDICTION_FLOOR
    return max(value, PREDICTION_FLOOR)


def atlm_predict_many(model: AtlmModel, raw_rows) -> np.ndarray:
    raw = atlm_predict_raw(model, raw_rows)
    raw = np.where(np.isfinite(raw), raw, PREDICTION_FLOOR)
    return np.maximum(raw, PREDICTION_FLOOR)


def abe0(train: ProjectTable) -> AbeEstimator:
    """The standard analogy estimator: all rows, unit weights, Euclidean, k=1."""
    return build_estimator(ABE0_CONFIG, train)
