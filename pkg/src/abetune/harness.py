"""Repeated cross-validation over estimation methods, with timing and report files."""

from __future__ import annotations

import csv
import datetime as _dt
import functools
import hashlib
import io
import json
import logging
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .abe import build_estimator, predict_many
from .baselines import abe0, atlm_fit, atlm_predict_many
from .config_space import Configuration, default_feature_model
from .data import BUNDLED_DATASETS, ProjectTable, load_bundled, load_csv, make_folds, split_train_tune
from .errors import AbetuneError, DataError
from .evaluation import (
    EvalResult,
    Metric,
    bootstrap_different,
    rank_methods,
    selection_frequency,
)
from .tuners import DeParams, Goal, de_optimize, random_search

log = logging.getLogger(__name__)

SEARCH_METHODS = {
    "DE2": ("de", 2),
    "DE8": ("de", 8),
    "RD40": ("rd", 40),
    "RD160": ("rd", 160),
}
BASELINE_METHODS = ("ABE0", "ATLM")
ALL_METHODS = ("ABE0", "ATLM", "DE2", "DE8", "RD40", "RD160")
RECORD_FILE = "records.jsonl"


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from any sequence of printable parts."""
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def dataset_name(source: str) -> str:
    return source if source in BUNDLED_DATASETS else Path(source).stem


@functools.lru_cache(maxsize=None)
def load_source(source: str) -> ProjectTable:
    """A bundled dataset name or a CSV path."""
    if source in BUNDLED_DATASETS and not Path(source).exists():
        return load_bundled(source)
    return load_csv(source)


@dataclass(frozen=True)
class ExperimentSpec:
    datasets: tuple[str, ...]
    methods: tuple[str, ...] = ALL_METHODS
    repeats: int = 20
    seed: int = 0
    goal: Goal = Goal.MINIMIZE_MEDIAN_MRE
    output_dir: str = "results"

    def __post_init__(self):
        object.__setattr__(self, "datasets", tuple(self.datasets))
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "goal", Goal(self.goal))
        if not self.datasets:
            raise ValueError("at least one dataset is required")
        if not self.methods:
            raise ValueError("at least one method is required")
        unknown = [m for m in self.methods if m not in ALL_METHODS]
        if unknown:
            raise ValueError(f"unknown methods {unknown}; choose from {list(ALL_METHODS)}")
        if len(set(self.methods)) != len(self.methods):
            raise ValueError("methods must be distinct")
        names = [dataset_name(d) for d in self.datasets]
        if len(set(names)) != len(names):
            raise ValueError(f"dataset names must be distinct, got {names}")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")

    def to_dict(self) -> dict:
        return {
            "datasets": list(self.datasets),
            "methods": list(self.methods),
            "repeats": self.repeats,
            "seed": self.seed,
            "goal": self.goal.value,
        }

    @classmethod
    def from_dict(cls, d: dict, output_dir: str = "results") -> "ExperimentSpec":
        return cls(tuple(d["datasets"]), tuple(d["methods"]), int(d["repeats"]), int(d["seed"]), Goal(d["goal"]), output_dir)

    @property
    def spec_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class UnitResult:
    """One (dataset, method, repeat, fold) outcome."""

    dataset: str
    method: str
    repeat: int
    fold: int
    actual: tuple[float, ...]
    predicted: tuple[float, ...]
    median_mre: float
    sa: float
    duration: float
    config: str | None = None
    history: tuple[tuple[str, float], ...] = ()

    @property
    def key(self) -> tuple:
        return (self.dataset, self.method, self.repeat, self.fold)

    def to_json(self) -> str:
        d = asdict(self)
        d["history"] = [list(h) for h in self.history]
        return json.dumps(d)

    @classmethod
    def from_json(cls, line: str) -> "UnitResult":
        d = json.loads(line)
        d["actual"] = tuple(d["actual"])
        d["predicted"] = tuple(d["predicted"])
        d["history"] = tuple((str(c), float(s)) for c, s in d.get("history", ()))
        return cls(**d)

    @property
    def winning_config(self) -> Configuration | None:
        return None if self.config is None else Configuration.from_string(self.config)


@dataclass
class RunRecord:
    spec: ExperimentSpec
    units: list[UnitResult] = field(default_factory=list)
    errors: dict[str, str] = field(default_factory=dict)
    dataset_info: dict[str, dict] = field(default_factory=dict)

    @property
    def spec_hash(self) -> str:
        return self.spec.spec_hash

    def datasets(self) -> list[str]:
        seen = []
        for u in self.units:
            if u.dataset not in seen:
                seen.append(u.dataset)
        return seen

    def select(self, dataset: str, method: str | None = None) -> list[UnitResult]:
        return [u for u in self.units if u.dataset == dataset and (method is None or u.method == method)]

    def header(self) -> dict:
        return {
            "record": "header",
            "spec": self.spec.to_dict(),
            "spec_hash": self.spec_hash,
            "datasets": self.dataset_info,
            "errors": self.errors,
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(self.header(), sort_keys=True) + "\n")
            for u in self.units:
                fh.write(u.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "RunRecord":
        with open(path, encoding="utf-8") as fh:
            lines = [ln for ln in fh if ln.strip()]
        if not lines:
            raise DataError(f"{path}: empty record file")
        try:
            head = json.loads(lines[0])
            units = [UnitResult.from_json(ln) for ln in lines[1:]]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DataError(f"{path}: malformed record ({exc})") from None
        if head.get("record") != "header":
            raise DataError(f"{path}: first line is not a record header")
        spec = ExperimentSpec.from_dict(head["spec"], output_dir=str(Path(path).parent))
        units.sort(key=lambda u: u.key)
        return cls(spec, units, dict(head.get("errors", {})), dict(head.get("datasets", {})))


# --------------------------------------------------------------------- running


@dataclass(frozen=True)
class _Unit:
    source: str
    dataset: str
    method: str
    repeat: int
    fold: int
    repeats: int
    seed: int
    goal: str


def _fold_tables(u: _Unit) -> tuple[ProjectTable, ProjectTable]:
    table = load_source(u.source)
    plan = _fold_plan(u.source, u.repeats, derive_seed(u.seed, u.dataset, "folds"))
    train = table.take(plan.train_rows(u.repeat, u.fold), name=table.name)
    test = table.take(plan.test_rows(u.repeat, u.fold), name=table.name)
    return train, test


@functools.lru_cache(maxsize=None)
def _fold_plan(source: str, repeats: int, seed: int):
    return make_folds(load_source(source), repeats, seed)


def run_unit(u: _Unit) -> UnitResult:
    start = time.perf_counter()
    train, test = _fold_tables(u)
    config, history = None, ()
    if u.method == "ABE0":
        predicted = predict_many(abe0(train), test.rows)
    elif u.method == "ATLM":
        predicted = atlm_predict_many(atlm_fit(train), test.rows)
    else:
        kind, budget = SEARCH_METHODS[u.method]
        fit, tune = split_train_tune(train, seed=derive_seed(u.seed, u.dataset, u.repeat, u.fold, "tune"))
        search_seed = derive_seed(u.seed, u.dataset, u.repeat, u.fold, u.method)
        model = default_feature_model()
        if kind == "de":
            best, hist = de_optimize(model, fit, tune, Goal(u.goal), DeParams(gen=budget), seed=search_seed)
        else:
            best, hist = random_search(model, fit, tune, Goal(u.goal), budget, seed=search_seed)
        est = build_estimator(best.config, train, seed=search_seed)
        predicted = predict_many(est, test.rows)
        config = str(best.config)
        history = tuple((str(c.config), float(c.score)) for c in hist)
    result = EvalResult.from_predictions(
        u.method, u.dataset, u.repeat, u.fold, test.effort, predicted,
        seed=derive_seed(u.seed, u.dataset, u.repeat, u.fold, "sa"),
    )
    duration = time.perf_counter() - start
    return UnitResult(
        u.dataset, u.method, u.repeat, u.fold,
        tuple(result.actual.tolist()), tuple(result.predicted.tolist()),
        result.median_mre, float(result.sa_value), duration, config, history,
    )


def _units(spec: ExperimentSpec, tables: dict[str, tuple[str, ProjectTable]]) -> list[_Unit]:
    out = []
    for name, (source, table) in tables.items():
        folds = make_folds(table, spec.repeats, derive_seed(spec.seed, name, "folds")).fold_count
        for method in spec.methods:
            for r in range(spec.repeats):
                for f in range(folds):
                    out.append(_Unit(source, name, method, r, f, spec.repeats, spec.seed, spec.goal.value))
    return out


def run_experiment(spec: ExperimentSpec, jobs: int = 1, record_path=None) -> RunRecord:
    """Cross-validate every method on every dataset.

    Each unit's seed comes from (master seed, dataset, repeat, fold, method),
    so results do not depend on ``jobs`` or scheduling. Unit results are
    appended to ``record_path`` as they finish.
    """
    record = RunRecord(spec)
    tables: dict[str, tuple[str, ProjectTable]] = {}
    for source in spec.datasets:
        name = dataset_name(source)
        try:
            table = load_source(source)
            make_folds(table, 1, 0)
        except (AbetuneError, OSError) as exc:
            record.errors[name] = f"{type(exc).__name__}: {exc}"
            log.error("skipping dataset %s: %s", name, exc)
            continue
        tables[name] = (source, table)
        record.dataset_info[name] = {"rows": table.n_rows, "features": table.n_features}

    units = _units(spec, tables)
    fh = None
    if record_path is not None:
        Path(record_path).parent.mkdir(parents=True, exist_ok=True)
        fh = open(record_path, "w", encoding="utf-8")
        fh.write(json.dumps(record.header(), sort_keys=True) + "\n")
        fh.flush()
    try:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = pool.map(run_unit, units, chunksize=1)
                for res in results:
                    _keep(record, res, fh)
        else:
            for u in units:
                _keep(record, run_unit(u), fh)
    finally:
        if fh is not None:
            fh.close()
    record.units.sort(key=lambda u: u.key)
    return record


def _keep(record: RunRecord, res: UnitResult, fh) -> None:
    record.units.append(res)
    if fh is not None:
        fh.write(res.to_json() + "\n")
        fh.flush()


# --------------------------------------------------------------------- reports


def _samples(record: RunRecord, dataset: str, metric: Metric) -> dict[str, list[float]]:
    out: dict[str, list[float]] = {}
    for u in record.select(dataset):
        out.setdefault(u.method, []).append(u.median_mre if metric is Metric.MRE else u.sa)
    return out


def _repeat_durations(record: RunRecord, dataset: str) -> dict[str, list[float]]:
    """Wall-clock seconds per (method, repeat), summed over folds."""
    per: dict[str, dict[int, float]] = {}
    for u in record.select(dataset):
        per.setdefault(u.method, {}).setdefault(u.repeat, 0.0)
        per[u.method][u.repeat] += u.duration
    return {m: [d[r] for r in sorted(d)] for m, d in per.items()}


def _rank(samples: dict[str, list[float]], metric: Metric, seed: int):
    if all(len(v) >= 3 for v in samples.values()):
        return rank_methods(samples, metric, seed=seed)
    return None


def fastest_top_ranked(report, durations: dict[str, list[float]], seed: int) -> list[str]:
    """Rank-1 methods whose runtime is the smallest or not distinguishable from it."""
    top = [e.method for e in report.entries if e.rank == 1]
    fastest = min(top, key=lambda m: (float(np.mean(durations[m])), m))
    marked = [fastest]
    for m in top:
        if m == fastest:
            continue
        a, b = durations[fastest], durations[m]
        if len(a) >= 3 and len(b) >= 3 and not bootstrap_different(a, b, seed=seed):
            marked.append(m)
    return sorted(marked)


def _csv(rows: list[list], header: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def metrics_csv(record: RunRecord, dataset: str) -> str:
    rows = [
        [u.dataset, u.method, u.repeat, u.fold, repr(u.median_mre), repr(u.sa), u.config or ""]
        for u in sorted(record.select(dataset), key=lambda u: u.key)
    ]
    return _csv(rows, ["dataset", "method", "repeat", "fold", "median_mre", "sa", "config"])


def emit_reports(record: RunRecord, out_dir) -> list[Path]:
    """Write rank tables, selection frequencies, runtimes and metadata per dataset."""
    if not record.units:
        raise DataError("record has no results to report")
    out_dir = Path(out_dir)
    written: list[Path] = []
    seed = record.spec.seed
    for dataset in record.datasets():
        d = out_dir / dataset
        d.mkdir(parents=True, exist_ok=True)
        durations = _repeat_durations(record, dataset)
        rank_rows = []
        for metric, scale in ((Metric.MRE, 100.0), (Metric.SA, 1.0)):
            report = _rank(_samples(record, dataset, metric), metric, derive_seed(seed, dataset, metric.value))
            if report is None:
                continue
            starred = fastest_top_ranked(report, durations, derive_seed(seed, dataset, "runtime"))
            title = f"{dataset} {metric.value}"
            written.append(_write(d / f"{metric.value.lower()}_ranks.md", report.to_markdown(title, scale, starred)))
            rank_rows += report.to_rows()
        written.append(_write(d / "ranks.csv", _csv(rank_rows, ["metric", "rank", "method", "median", "iqr"])))
        written.append(_write(d / "metrics.csv", metrics_csv(record, dataset)))

        freq_rows = []
        for method in record.spec.methods:
            if method not in SEARCH_METHODS:
                continue
            configs = [u.winning_config for u in record.select(dataset, method)]
            if configs:
                freq_rows += [[method, *row] for row in selection_frequency(configs).to_csv_rows()]
        written.append(_write(d / "frequency.csv", _csv(freq_rows, ["method", "axis", "option", "percent"])))

        runtime_rows = [
            [m, len(v), repr(float(np.mean(v)) / 60.0), repr(float(np.mean(v)))]
            for m, v in sorted(durations.items())
        ]
        written.append(_write(d / "runtime.csv", _csv(runtime_rows, ["method", "repeats", "mean_minutes", "mean_seconds"])))

        meta = {
            "dataset": dataset,
            "spec": record.spec.to_dict(),
            "spec_hash": record.spec_hash,
            "dataset_info": record.dataset_info.get(dataset, {}),
            "units": len(record.select(dataset)),
            "generated_at": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "package_version": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
        }
        written.append(_write(d / "metadata.json", json.dumps(meta, indent=2, sort_keys=True) + "\n"))
    if record.errors:
        written.append(_write(out_dir / "errors.json", json.dumps(record.errors, indent=2, sort_keys=True) + "\n"))
    return written


def _write(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path
