"""The ABEN option space: configurations, the feature model, sampling and genome encoding."""

from __future__ import annotations

import enum
import itertools
import re
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

from .data import Discretization
from .errors import (
    DanglingConstraint,
    InvalidConfiguration,
    InvalidSlotIndex,
    MultipleParents,
    NoValidConfiguration,
    ParseError,
)


class Subset(enum.Enum):
    REMOVE_NOTHING = "RemoveNothing"
    OUTLIER_PRUNE = "OutlierPrune"


class Weighting(enum.Enum):
    UNIFORM = "Uniform"
    GENETIC = "Genetic"
    GAIN_RANK = "GainRank"
    RELIEF = "Relief"
    PCA = "PCA"
    CFS = "CFS"
    CNS = "CNS"
    WRAPPER = "Wrapper"


class Similarity(enum.Enum):
    EUCLIDEAN = "Euclidean"
    WEIGHTED_EUCLIDEAN = "WeightedEuclidean"
    MAX_MEASURE = "MaxMeasure"
    TRIANGULAR_LOCAL = "TriangularLocal"
    MINKOWSKI = "Minkowski"
    FEATURE_RANK_MEAN = "FeatureRankMean"


class Adaptation(enum.Enum):
    MEDIAN = "Median"
    MEAN = "Mean"
    SECOND_LEARNER = "SecondLearner"
    WEIGHTED_MEAN = "WeightedMean"


class Analogies(enum.Enum):
    K1 = "K1"
    K2 = "K2"
    K3 = "K3"
    K4 = "K4"
    K5 = "K5"
    DYNAMIC = "Dynamic"

    @property
    def k(self) -> int | None:
        return None if self is Analogies.DYNAMIC else int(self.value[1:])


# Weighting schemes that need symbolic (discretized) inputs.
SYMBOLIC_WEIGHTINGS = frozenset(
    {
        Weighting.GAIN_RANK,
        Weighting.RELIEF,
        Weighting.CFS,
        Weighting.CNS,
        Weighting.WRAPPER,
        Weighting.GENETIC,
    }
)

MINKOWSKI_P_RANGE = (1.0, 5.0)
DEFAULT_MINKOWSKI_P = 3.0


@dataclass(frozen=True)
class Axis:
    attr: str
    feature: str
    enum: type
    mandatory: bool


AXES = (
    Axis("subset", "SubsetSelection", Subset, True),
    Axis("weighting", "FeatureWeighting", Weighting, False),
    Axis("discretization", "DiscretizationMethod", Discretization, False),
    Axis("similarity", "SimilarityMeasure", Similarity, True),
    Axis("adaptation", "AdaptationMechanism", Adaptation, True),
    Axis("analogies", "AnalogySelection", Analogies, True),
)
AXIS_BY_FEATURE = {a.feature: a for a in AXES}
LEAF_AXIS = {m.value: (a, m) for a in AXES for m in a.enum}


@dataclass(frozen=True)
class Configuration:
    """One point in the ABEN space."""

    subset: Subset
    weighting: Weighting
    discretization: Discretization
    similarity: Similarity
    adaptation: Adaptation
    analogies: Analogies
    minkowski_p: float = DEFAULT_MINKOWSKI_P

    def __post_init__(self):
        for axis in AXES:
            object.__setattr__(self, axis.attr, axis.enum(getattr(self, axis.attr)))
        object.__setattr__(self, "minkowski_p", float(self.minkowski_p))

    def canonical(self) -> "Configuration":
        """Collapse choices that cannot change predictions."""
        c = self
        if c.weighting is Weighting.UNIFORM and c.discretization is not Discretization.NONE:
            c = replace(c, discretization=Discretization.NONE)
        if c.analogies is Analogies.K1 and c.adaptation is not Adaptation.MEDIAN:
            c = replace(c, adaptation=Adaptation.MEDIAN)
        if c.similarity is Similarity.MINKOWSKI:
            lo, hi = MINKOWSKI_P_RANGE
            p = min(max(c.minkowski_p, lo), hi)
            if p != c.minkowski_p:
                c = replace(c, minkowski_p=p)
        elif c.minkowski_p != DEFAULT_MINKOWSKI_P:
            c = replace(c, minkowski_p=DEFAULT_MINKOWSKI_P)
        return c

    def violations(self) -> list[str]:
        out = []
        if self.weighting in SYMBOLIC_WEIGHTINGS and self.discretization is Discretization.NONE:
            out.append(f"{self.weighting.value} weighting requires a discretization")
        if self != self.canonical():
            out.append("configuration is not in canonical form")
        return out

    def is_valid(self) -> bool:
        return not self.violations()

    def validate(self) -> "Configuration":
        problems = self.violations()
        if problems:
            raise InvalidConfiguration(f"{self}: " + "; ".join(problems))
        return self

    def leaves(self) -> frozenset[str]:
        return frozenset(getattr(self, a.attr).value for a in AXES)

    def __str__(self) -> str:
        parts = []
        for axis in AXES:
            value = getattr(self, axis.attr).value
            if axis.attr == "similarity" and self.similarity is Similarity.MINKOWSKI:
                value = f"Minkowski(p={self.minkowski_p!r})"
            parts.append(value)
        return "/".join(parts)

    @classmethod
    def from_string(cls, text: str) -> "Configuration":
        parts = text.strip().split("/")
        if len(parts) != len(AXES):
            raise InvalidConfiguration(f"expected {len(AXES)} '/'-separated fields in {text!r}")
        kwargs = {}
        for axis, part in zip(AXES, parts):
            m = re.fullmatch(r"Minkowski\(p=([^)]+)\)", part)
            if axis.attr == "similarity" and m:
                kwargs["minkowski_p"] = float(m.group(1))
                part = "Minkowski"
            try:
                kwargs[axis.attr] = axis.enum(part)
            except ValueError:
                raise InvalidConfiguration(f"unknown {axis.feature} option {part!r}") from None
        return cls(**kwargs)

    def to_dict(self) -> dict:
        d = {a.attr: getattr(self, a.attr).value for a in AXES}
        d["minkowski_p"] = self.minkowski_p
        return d


def canonicalize(config: Configuration) -> Configuration:
    return config.canonical()


ABE0_CONFIG = Configuration(
    Subset.REMOVE_NOTHING,
    Weighting.UNIFORM,
    Discretization.NONE,
    Similarity.WEIGHTED_EUCLIDEAN,
    Adaptation.MEDIAN,
    Analogies.K1,
)
DEFAULTS = {a.attr: getattr(ABE0_CONFIG, a.attr) for a in AXES}


# ---------------------------------------------------------------- feature model


@dataclass(frozen=True)
class Feature:
    name: str
    kind: str = "mandatory"
    group: str = "and"
    children: tuple["Feature", ...] = ()

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def walk(self) -> Iterator["Feature"]:
        yield self
        for c in self.children:
            yield from c.walk()


@dataclass(frozen=True)
class Constraint:
    kind: str  # "requires" | "excludes"
    a: str
    b: str

    def holds(self, selected: frozenset[str]) -> bool:
        if self.kind == "requires":
            return self.a not in selected or self.b in selected
        return not (self.a in selected and self.b in selected)


@dataclass(frozen=True)
class FeatureModel:
    """Single-parent and-or tree of options plus requires/excludes constraints.

    Counting semantics: an *and* node multiplies its children, a *one-of*
    node sums them, a leaf counts 1. An optional feature owning a one-of
    group counts like a mandatory one (its first alternative stands for
    "absent"); an optional bare leaf under an and node doubles the count.
    """

    root: Feature
    constraints: tuple[Constraint, ...] = field(default=())

    def __post_init__(self):
        seen: set[str] = set()
        for f in self.root.walk():
            if f.name in seen:
                raise MultipleParents(f"feature {f.name!r} appears under more than one parent")
            seen.add(f.name)
        leaves = {f.name for f in self.root.walk() if f.is_leaf}
        for c in self.constraints:
            for name in (c.a, c.b):
                if name not in leaves:
                    raise DanglingConstraint(f"{c.kind} {c.a} {c.b}: {name!r} is not a leaf")

    def features(self) -> list[Feature]:
        return list(self.root.walk())

    def leaves(self) -> list[str]:
        return [f.name for f in self.root.walk() if f.is_leaf]

    def find(self, name: str) -> Feature:
        for f in self.root.walk():
            if f.name == name:
                return f
        raise KeyError(name)

    def axes(self) -> list[Feature]:
        """Features that own an alternative group."""
        return [f for f in self.root.walk() if f.group == "xor" and f.children]

    def mandatory_axes(self) -> list[Feature]:
        return [f for f in self.axes() if f.kind == "mandatory"]

    def optional_axes(self) -> list[Feature]:
        return [f for f in self.axes() if f.kind == "optional"]

    # -- enumeration

    def _count(self, f: Feature) -> int:
        if f.is_leaf:
            return 1
        if f.group == "xor":
            return sum(self._count(c) for c in f.children)
        total = 1
        for c in f.children:
            n = self._count(c)
            if c.kind == "optional" and c.is_leaf:
                n += 1
            total *= n
        return total

    def _selections(self, f: Feature) -> Iterator[frozenset[str]]:
        if f.is_leaf:
            yield frozenset({f.name})
            return
        if f.group == "xor":
            for c in f.children:
                yield from self._selections(c)
            return
        options = []
        for c in f.children:
            opts = list(self._selections(c))
            if c.kind == "optional" and c.is_leaf:
                opts.append(frozenset())
            options.append(opts)
        for combo in itertools.product(*options):
            yield frozenset().union(*combo)

    def selections(self, respect_constraints: bool = True) -> Iterator[frozenset[str]]:
        for s in self._selections(self.root):
            if not respect_constraints or self.satisfies(s):
                yield s

    def satisfies(self, selected: frozenset[str]) -> bool:
        return all(c.holds(selected) for c in self.constraints)

    def raw_size(self) -> int:
        return self._count(self.root)

    def _random_selection(self, f: Feature, rng: np.random.Generator, out: set[str]) -> None:
        if f.is_leaf:
            out.add(f.name)
        elif f.group == "xor":
            self._random_selection(f.children[int(rng.integers(len(f.children)))], rng, out)
        else:
            for c in f.children:
                if c.kind == "optional" and c.is_leaf and rng.random() < 0.5:
                    continue
                self._random_selection(c, rng, out)

    # -- configuration bridge

    def to_configuration(self, selected: frozenset[str], minkowski_p: float = DEFAULT_MINKOWSKI_P) -> Configuration:
        kwargs = dict(DEFAULTS)
        for name in selected:
            if name in LEAF_AXIS:
                axis, member = LEAF_AXIS[name]
                kwargs[axis.attr] = member
        return Configuration(**kwargs, minkowski_p=minkowski_p).canonical()

    def admits(self, config: Configuration) -> bool:
        """True if ``config`` is canonical, uses only this model's leaves and meets its constraints."""
        if config != config.canonical():
            return False
        leaves = set(self.leaves())
        selected = set()
        for axis in AXES:
            value = getattr(config, axis.attr).value
            if value in leaves:
                selected.add(value)
            elif value != DEFAULTS[axis.attr].value:
                return False
        return self.satisfies(frozenset(selected))

    def violated_constraints(self, config: Configuration) -> list[Constraint]:
        selected = config.leaves() & set(self.leaves())
        return [c for c in self.constraints if not c.holds(selected)]

    # -- text form

    def to_text(self) -> str:
        lines: list[str] = []

        def emit(f: Feature, depth: int) -> None:
            lines.append("  " * depth + f"feature {f.name} {f.kind}")
            if not f.children:
                return
            if f.group == "xor":
                lines.append("  " * (depth + 1) + "one-of:")
                for c in f.children:
                    emit(c, depth + 2)
            else:
                for c in f.children:
                    emit(c, depth + 1)

        emit(self.root, 0)
        for c in self.constraints:
            lines.append(f"{c.kind} {c.a} {c.b}")
        return "\n".join(lines) + "\n"


def default_feature_model() -> FeatureModel:
    """The built-in ABEN model: four mandatory axes, two optional ones, and their constraints."""
    axes = []
    for axis in AXES:
        leaves = tuple(Feature(m.value) for m in axis.enum)
        axes.append(
            Feature(axis.feature, "mandatory" if axis.mandatory else "optional", "xor", leaves)
        )
    constraints = [Constraint("requires", Weighting.UNIFORM.value, Discretization.NONE.value)]
    constraints += [
        Constraint("excludes", w.value, Discretization.NONE.value)
        for w in Weighting
        if w in SYMBOLIC_WEIGHTINGS
    ]
    constraints += [
        Constraint("excludes", Analogies.K1.value, a.value)
        for a in Adaptation
        if a is not Adaptation.MEDIAN
    ]
    return FeatureModel(Feature("ABEN", "mandatory", "and", tuple(axes)), tuple(constraints))


_FEATURE_RE = re.compile(r"feature\s+([A-Za-z_][\w.-]*)(?:\s+(\S+))?\s*$")
_CONSTRAINT_RE = re.compile(r"(requires|excludes)\s+(\S+)\s+(\S+)\s*$")


class _Node:
    def __init__(self, name: str, kind: str, line: int):
        self.name, self.kind, self.line = name, kind, line
        self.group = "and"
        self.children: list[_Node] = []

    def freeze(self) -> Feature:
        return Feature(self.name, self.kind, self.group, tuple(c.freeze() for c in self.children))


def parse_feature_model(text: str) -> FeatureModel:
    """Parse the indented feature-model grammar (see ``FeatureModel.to_text``)."""
    root: _Node | None = None
    stack: list[tuple[int, _Node, bool]] = []  # (indent, node, is one-of marker)
    seen: dict[str, int] = {}
    constraints: list[Constraint] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].rstrip()
        if not body.strip():
            continue
        if "\t" in body[: len(body) - len(body.lstrip())]:
            raise ParseError("tabs are not allowed in indentation", lineno, 1)
        indent = len(body) - len(body.lstrip(" "))
        content = body.strip()
        col = indent + 1

        m = _CONSTRAINT_RE.match(content)
        if m:
            if indent:
                raise ParseError("constraints must start at column 1", lineno, col)
            constraints.append(Constraint(m.group(1), m.group(2), m.group(3)))
            continue
        if constraints:
            raise ParseError("features must precede constraints", lineno, col)

        while stack and stack[-1][0] >= indent:
            stack.pop()
        parent = stack[-1] if stack else None

        if content == "one-of:":
            if parent is None or parent[2]:
                raise ParseError("'one-of:' must be nested under a feature", lineno, col)
            node = parent[1]
            if node.children or node.group == "xor":
                raise ParseError(f"feature {node.name!r} already has children", lineno, col)
            node.group = "xor"
            stack.append((indent, node, True))
            continue

        m = _FEATURE_RE.match(content)
        if not m:
            raise ParseError(f"unrecognised line {content!r}", lineno, col)
        name, kind = m.group(1), m.group(2) or "mandatory"
        if kind not in ("mandatory", "optional"):
            raise ParseError(f"kind must be mandatory or optional, got {kind!r}", lineno, col + m.start(2))
        if name in seen:
            raise MultipleParents(f"line {lineno}: feature {name!r} already declared on line {seen[name]}")
        seen[name] = lineno
        node = _Node(name, kind, lineno)
        if parent is None:
            if root is not None:
                raise ParseError("only one root feature is allowed", lineno, col)
            root = node
        else:
            owner, is_marker = parent[1], parent[2]
            if owner.group == "xor" and not is_marker:
                raise ParseError(f"children of {owner.name!r} must sit under its 'one-of:'", lineno, col)
            owner.children.append(node)
        stack.append((indent, node, False))

    if root is None:
        raise ParseError("no features declared", 1, 1)
    return FeatureModel(root.freeze(), tuple(constraints))


def enumerate_size(model: FeatureModel, respect_constraints: bool = False) -> int:
    if not respect_constraints:
        return model.raw_size()
    return sum(1 for _ in model.selections(respect_constraints=True))


MAX_SAMPLE_TRIES = 10_000


def sample_valid(model: FeatureModel, seed) -> Configuration:
    """Rejection-sample leaf choices until the model's constraints hold.

    ``seed`` may be an int, a sequence of ints or a numpy Generator.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    for _ in range(MAX_SAMPLE_TRIES):
        selected: set[str] = set()
        model._random_selection(model.root, rng, selected)
        frozen = frozenset(selected)
        if model.satisfies(frozen):
            p = DEFAULT_MINKOWSKI_P
            if Similarity.MINKOWSKI.value in frozen:
                p = float(rng.uniform(*MINKOWSKI_P_RANGE))
            return model.to_configuration(frozen, minkowski_p=p)
    raise NoValidConfiguration(f"no valid configuration after {MAX_SAMPLE_TRIES} draws")


# ---------------------------------------------------------------- genome encoding


@dataclass(frozen=True)
class Slot:
    name: str
    kind: str  # "categorical" | "continuous"
    options: tuple = ()
    bounds: tuple[float, float] = (0.0, 0.0)


SLOTS = (
    Slot("subset", "categorical", tuple(Subset)),
    Slot("weighting", "categorical", tuple(Weighting)),
    Slot("discretization", "categorical", tuple(Discretization)),
    Slot("similarity", "categorical", tuple(Similarity)),
    Slot("minkowski_p", "continuous", bounds=MINKOWSKI_P_RANGE),
    Slot("adaptation", "categorical", tuple(Adaptation)),
    Slot("analogies", "categorical", tuple(Analogies)),
)
SLOT_INDEX = {s.name: i for i, s in enumerate(SLOTS)}


def encode(config: Configuration) -> np.ndarray:
    """Configuration -> decision vector (category indices plus the continuous Minkowski exponent)."""
    vec = np.empty(len(SLOTS))
    for i, slot in enumerate(SLOTS):
        if slot.kind == "continuous":
            vec[i] = getattr(config, slot.name)
        else:
            vec[i] = slot.options.index(getattr(config, slot.name))
    return vec


def decode(vec) -> Configuration:
    """Decision vector -> canonical configuration; continuous slots are clamped into range."""
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (len(SLOTS),):
        raise InvalidSlotIndex(f"decision vector must have {len(SLOTS)} slots")
    kwargs = {}
    for i, slot in enumerate(SLOTS):
        v = float(vec[i])
        if slot.kind == "continuous":
            if np.isnan(v):
                raise InvalidSlotIndex(f"slot {slot.name} is NaN")
            kwargs[slot.name] = min(max(v, slot.bounds[0]), slot.bounds[1])
            continue
        if not v.is_integer() or not 0 <= v < len(slot.options):
            raise InvalidSlotIndex(f"slot {slot.name}: index {v} outside 0..{len(slot.options) - 1}")
        kwargs[slot.name] = slot.options[int(v)]
    return Configuration(**kwargs).canonical()
