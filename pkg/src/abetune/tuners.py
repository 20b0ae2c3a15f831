"""Configuration search: differential evolution and random search."""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass

import numpy as np

from .abe import BuildCache, build_estimator, predict_many
from .config_space import (
    LEAF_AXIS,
    SLOT_INDEX,
    SLOTS,
    Configuration,
    FeatureModel,
    decode,
    encode,
    sample_valid,
)
from .data import ProjectTable
from .evaluation import mre_values, sa

MAX_REPAIRS = 100


class Goal(enum.Enum):
    MINIMIZE_MEDIAN_MRE = "mre"
    MAXIMIZE_SA = "sa"

    def better(self, a: float, b: float) -> bool:
        """True when score ``a`` strictly beats ``b``."""
        if self is Goal.MINIMIZE_MEDIAN_MRE:
            return a < b
        return a > b

    @property
    def worst(self) -> float:
        return np.inf if self is Goal.MINIMIZE_MEDIAN_MRE else -np.inf

    def score(self, actual, predicted, seed=0) -> float:
        if self is Goal.MINIMIZE_MEDIAN_MRE:
            return float(np.median(mre_values(actual, predicted)))
        return sa(np.column_stack([actual, predicted]), seed=seed)


@dataclass(frozen=True)
class DeParams:
    np: int = 20
    gen: int = 2
    f: float = 0.8
    cr: float = 0.7

    def __post_init__(self):
        if self.np < 4:
            raise ValueError("population size must be >= 4")
        if self.gen < 1:
            raise ValueError("generation count must be >= 1")
        if not 0 < self.cr <= 1:
            raise ValueError("cr must lie in (0, 1]")
        if not self.f > 0:
            raise ValueError("f must be > 0")

    @property
    def budget(self) -> int:
        return self.np * self.gen


@dataclass(frozen=True, eq=False)
class Candidate:
    vector: np.ndarray
    config: Configuration
    score: float | None = None
    evaluated: bool = False

    def __post_init__(self):
        if self.evaluated != (self.score is not None):
            raise ValueError("score must be present exactly when the candidate is evaluated")


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


class _Scorer:
    """Scores configurations on one (train, tune) pair, memoising by configuration."""

    def __init__(self, train: ProjectTable, tune: ProjectTable, goal: Goal, seed):
        self.train, self.tune, self.goal, self.seed = train, tune, Goal(goal), seed
        self.cache = BuildCache(train, seed)
        self.memo: dict[Configuration, float] = {}

    def __call__(self, config: Configuration) -> float:
        if config not in self.memo:
            self.memo[config] = evaluate_config(config, self.train, self.tune, self.goal, self.seed, self.cache)
        return self.memo[config]

    def candidate(self, config: Configuration) -> Candidate:
        return Candidate(encode(config), config, self(config), True)


def evaluate_config(
    config: Configuration,
    train: ProjectTable,
    tune: ProjectTable,
    goal: Goal,
    seed=0,
    cache: BuildCache | None = None,
) -> float:
    """Build on ``train``, predict every ``tune`` row and return the goal statistic."""
    est = build_estimator(config, train, seed=seed, cache=cache)
    predicted = predict_many(est, tune.rows)
    return Goal(goal).score(tune.effort, predicted, seed=seed)


def de_mutate(a, b, c, params: DeParams, seed=0) -> np.ndarray:
    """Crossover-gated mutant of ``a`` built from the difference of ``b`` and ``c``.

    Continuous slots take a + f*(b - c), clamped to the slot range; categorical
    slots take b or c at random. One uniformly chosen slot always mutates.
    """
    a, b, c = (np.asarray(v, dtype=float) for v in (a, b, c))
    rng = _rng(seed)
    n = len(SLOTS)
    take = rng.random(n) < params.cr
    take[int(rng.integers(0, n))] = True
    pick_b = rng.random(n) < 0.5
    out = a.copy()
    for k, slot in enumerate(SLOTS):
        if not take[k]:
            continue
        if slot.kind == "continuous":
            lo, hi = slot.bounds
            out[k] = min(max(a[k] + params.f * (b[k] - c[k]), lo), hi)
        else:
            out[k] = b[k] if pick_b[k] else c[k]
    return out


def _slot_choices(model: FeatureModel, slot_index: int) -> list[int]:
    leaves = set(model.leaves())
    slot = SLOTS[slot_index]
    return [i for i, opt in enumerate(slot.options) if opt.value in leaves] or list(range(len(slot.options)))


def repair(vector, model: FeatureModel, rng: np.random.Generator) -> Configuration | None:
    """Canonicalize and validate a mutant, resampling an offending slot until the model admits it."""
    vec = np.asarray(vector, dtype=float).copy()
    for _ in range(MAX_REPAIRS + 1):
        config = decode(vec)
        if model.admits(config):
            return config
        broken = model.violated_constraints(config)
        if broken and broken[0].b in LEAF_AXIS:
            axis, _ = LEAF_AXIS[broken[0].b]
            k = SLOT_INDEX[axis.attr]
        else:
            categorical = [i for i, s in enumerate(SLOTS) if s.kind == "categorical"]
            k = categorical[int(rng.integers(0, len(categorical)))]
        choices = _slot_choices(model, k)
        vec[k] = choices[int(rng.integers(0, len(choices)))]
    return None


def de_optimize(
    model: FeatureModel,
    train: ProjectTable,
    tune: ProjectTable,
    goal: Goal,
    params: DeParams = DeParams(),
    seed=0,
) -> tuple[Candidate, list[Candidate]]:
    """Differential evolution over the configuration space.

    The initial population counts as the first generation, so exactly
    np * gen candidates are scored. Generations are synchronous and a mutant
    replaces its parent only on strict improvement.
    """
    goal = Goal(goal)
    score = _Scorer(train, tune, goal, seed)
    pop = [score.candidate(sample_valid(model, [*_ints(seed), 0, i])) for i in range(params.np)]
    history = list(pop)
    for g in range(1, params.gen):
        nxt = list(pop)
        for i, parent in enumerate(pop):
            rng = np.random.default_rng([*_ints(seed), g, i])
            others = [j for j in range(params.np) if j != i]
            ia, ib, ic = rng.choice(others, size=3, replace=False)
            mutant = de_mutate(pop[ia].vector, pop[ib].vector, pop[ic].vector, params, rng)
            config = repair(mutant, model, rng)
            if config is None:
                config = parent.config
            child = score.candidate(config)
            history.append(child)
            if goal.better(child.score, parent.score):
                nxt[i] = child
        pop = nxt
    return _best(history, goal), history


def random_search(
    model: FeatureModel,
    train: ProjectTable,
    tune: ProjectTable,
    goal: Goal,
    n: int,
    seed=0,
) -> tuple[Candidate, list[Candidate]]:
    """Score ``n`` independently sampled valid configurations and keep the best."""
    if n < 1:
        raise ValueError("n must be >= 1")
    goal = Goal(goal)
    score = _Scorer(train, tune, goal, seed)
    history = [score.candidate(sample_valid(model, [*_ints(seed), 0, i])) for i in range(n)]
    return _best(history, goal), history


def _ints(seed) -> list[int]:
    if isinstance(seed, (list, tuple, np.ndarray)):
        return [int(s) for s in seed]
    return [int(seed)]


def _best(history: list[Candidate], goal: Goal) -> Candidate:
    best = history[0]
    for c in history[1:]:
        if goal.better(c.score, best.score):
            best = c
    return best


def running_best(history: list[Candidate], goal: Goal) -> list[float]:
    out, best = [], Goal(goal).worst
    for c in history:
        if Goal(goal).better(c.score, best):
            best = c.score
        out.append(best)
    return out


def history_to_csv(history: list[Candidate]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iteration", "configuration", "score"])
    for i, c in enumerate(history, start=1):
        w.writerow([i, str(c.config), repr(c.score)])
    return buf.getvalue()
