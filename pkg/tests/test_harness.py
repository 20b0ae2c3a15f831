import csv
import json

import numpy as np
import pytest

from abetune.config_space import default_feature_model, sample_valid
from abetune.data import fold_count_for, load_bundled
from abetune.errors import DataError
from abetune.harness import (
    ALL_METHODS,
    ExperimentSpec,
    RunRecord,
    UnitResult,
    derive_seed,
    emit_reports,
    metrics_csv,
    run_experiment,
)

FAST = ("ABE0", "ATLM", "DE2")


@pytest.fixture(scope="module")
def kemerer_record():
    return run_experiment(ExperimentSpec(("kemerer",), FAST, repeats=3, seed=2))


def _texts(folder):
    return {p.relative_to(folder).as_posix(): p.read_bytes() for p in sorted(folder.rglob("*")) if p.is_file()}


def test_derive_seed_is_stable_and_separates_parts():
    assert derive_seed(1, "kemerer", 0, 2, "DE2") == derive_seed(1, "kemerer", 0, 2, "DE2")
    assert derive_seed(1, "kemerer", 0, 2, "DE2") != derive_seed(1, "kemerer", 0, 2, "DE8")
    assert 0 <= derive_seed("x") < 2**63


def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec(())
    with pytest.raises(ValueError):
        ExperimentSpec(("kemerer",), ("ABE0", "nope"))
    with pytest.raises(ValueError):
        ExperimentSpec(("kemerer",), ("ABE0", "ABE0"))
    with pytest.raises(ValueError):
        ExperimentSpec(("kemerer",), repeats=0)
    spec = ExperimentSpec(("kemerer",), ("ABE0",), 2, 5, "sa")
    assert ExperimentSpec.from_dict(spec.to_dict()) == ExperimentSpec(("kemerer",), ("ABE0",), 2, 5, "sa")
    assert spec.methods == ("ABE0",) and ExperimentSpec(("kemerer",)).methods == ALL_METHODS


def test_single_repeat_on_small_dataset_gives_three_folds():
    record = run_experiment(ExperimentSpec(("kemerer",), ("ABE0",), repeats=1))
    assert len(record.units) == 3
    assert sorted(len(u.actual) for u in record.units) == [5, 5, 5]


def test_unit_count_is_methods_by_repeats_by_folds(kemerer_record):
    folds = fold_count_for(load_bundled("kemerer").n_rows)
    assert len(kemerer_record.units) == len(FAST) * 3 * folds
    keys = [u.key for u in kemerer_record.units]
    assert len(set(keys)) == len(keys) and keys == sorted(keys)


def test_every_test_row_is_predicted_once_per_repeat(kemerer_record):
    table = load_bundled("kemerer")
    for r in range(3):
        actual = sorted(a for u in kemerer_record.select("kemerer", "ABE0") if u.repeat == r for a in u.actual)
        assert actual == sorted(table.effort.tolist())


def test_search_units_carry_valid_winners_and_history(kemerer_record):
    model = default_feature_model()
    for u in kemerer_record.select("kemerer", "DE2"):
        assert model.admits(u.winning_config)
        assert len(u.history) == 40
    for u in kemerer_record.select("kemerer", "ABE0"):
        assert u.config is None and u.history == ()


def test_runs_are_deterministic(kemerer_record):
    again = run_experiment(ExperimentSpec(("kemerer",), FAST, repeats=3, seed=2))
    assert metrics_csv(again, "kemerer") == metrics_csv(kemerer_record, "kemerer")


def test_parallel_run_matches_serial():
    spec = ExperimentSpec(("kemerer", "albrecht"), ("ABE0", "DE2"), repeats=1, seed=4)
    serial, parallel = run_experiment(spec, jobs=1), run_experiment(spec, jobs=2)
    for name in ("kemerer", "albrecht"):
        assert metrics_csv(serial, name) == metrics_csv(parallel, name)


def test_master_seed_changes_folds():
    a = run_experiment(ExperimentSpec(("kemerer",), ("ABE0",), repeats=1, seed=2))
    b = run_experiment(ExperimentSpec(("kemerer",), ("ABE0",), repeats=1, seed=3))
    assert [u.actual for u in a.units] != [u.actual for u in b.units]


def test_method_results_do_not_depend_on_the_method_list(kemerer_record):
    alone = run_experiment(ExperimentSpec(("kemerer",), ("DE2",), repeats=3, seed=2))
    assert [u.predicted for u in alone.units] == [u.predicted for u in kemerer_record.select("kemerer", "DE2")]


def test_record_round_trip(kemerer_record, tmp_path):
    path = tmp_path / "records.jsonl"
    kemerer_record.save(path)
    loaded = RunRecord.load(path)
    assert loaded.units == kemerer_record.units
    assert loaded.spec.to_dict() == kemerer_record.spec.to_dict()
    assert loaded.spec_hash == kemerer_record.spec_hash


def test_streamed_record_matches_result(tmp_path):
    path = tmp_path / "out" / "records.jsonl"
    record = run_experiment(ExperimentSpec(("kemerer",), ("ABE0",), repeats=2), record_path=path)
    assert RunRecord.load(path).units == record.units


def test_load_rejects_bad_records(tmp_path):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    with pytest.raises(DataError):
        RunRecord.load(empty)
    junk = tmp_path / "junk.jsonl"
    junk.write_text("{not json\n")
    with pytest.raises(DataError):
        RunRecord.load(junk)
    headless = tmp_path / "headless.jsonl"
    headless.write_text(json.dumps({"record": "unit"}) + "\n")
    with pytest.raises(DataError):
        RunRecord.load(headless)


def test_reports_are_reproducible_apart_from_metadata(kemerer_record, tmp_path):
    emit_reports(kemerer_record, tmp_path / "a")
    emit_reports(kemerer_record, tmp_path / "b")
    a, b = _texts(tmp_path / "a"), _texts(tmp_path / "b")
    assert set(a) == set(b) == {
        f"kemerer/{n}"
        for n in ("mre_ranks.md", "sa_ranks.md", "ranks.csv", "metrics.csv", "frequency.csv", "runtime.csv", "metadata.json")
    }
    for name in a:
        if not name.endswith("metadata.json"):
            assert a[name] == b[name], name
    meta = json.loads(a["kemerer/metadata.json"])
    assert meta["spec_hash"] == kemerer_record.spec_hash and "generated_at" in meta


def test_frequency_report_sums_to_100(kemerer_record, tmp_path):
    emit_reports(kemerer_record, tmp_path)
    with open(tmp_path / "kemerer" / "frequency.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert {r["method"] for r in rows} == {"DE2"}
    totals = {}
    for r in rows:
        totals[r["axis"]] = totals.get(r["axis"], 0) + int(r["percent"])
    assert len(totals) == 6 and set(totals.values()) == {100}


def test_baseline_only_run_ranks_single_method(tmp_path):
    record = run_experiment(ExperimentSpec(("kemerer",), ("ABE0",), repeats=2))
    emit_reports(record, tmp_path)
    rows = [ln for ln in (tmp_path / "kemerer" / "mre_ranks.md").read_text().splitlines() if ln.startswith("| 1")]
    assert len(rows) == 1 and "ABE0" in rows[0]


def _synthetic_record(low, high, n=20):
    spec = ExperimentSpec(("demo",), ("ABE0", "DE2"), repeats=n)
    rng = np.random.default_rng(0)
    config = str(sample_valid(default_feature_model(), 1))
    units = []
    for r in range(n):
        for method, centre in (("ABE0", high), ("DE2", low)):
            m = float(centre + rng.normal(0, 0.01))
            units.append(UnitResult("demo", method, r, 0, (10.0,), (10.0 * (1 + m),), m, 100 * (1 - m), 0.01,
                                    config if method == "DE2" else None))
    return RunRecord(spec, units)


def test_dominant_method_ranks_first(tmp_path):
    emit_reports(_synthetic_record(0.2, 0.6), tmp_path)
    lines = [ln for ln in (tmp_path / "demo" / "mre_ranks.md").read_text().splitlines() if ln.startswith("| ")]
    assert lines[1].startswith("| 1* | DE2 | 20 |")
    assert lines[2].startswith("| 2 | ABE0 | 60 |")
    with open(tmp_path / "demo" / "ranks.csv") as fh:
        ranks = {(r["metric"], r["method"]): int(r["rank"]) for r in csv.DictReader(fh)}
    assert ranks[("MRE", "DE2")] == 1 and ranks[("SA", "DE2")] == 1
    assert ranks[("MRE", "ABE0")] == 2 and ranks[("SA", "ABE0")] == 2


def test_bad_dataset_is_reported_and_skipped(tmp_path):
    tiny = tmp_path / "tiny.csv"
    tiny.write_text("a,effort\n1,2\n3,4\n")
    record = run_experiment(ExperimentSpec((str(tiny), "kemerer"), ("ABE0",), repeats=1))
    assert set(record.errors) == {"tiny"}
    assert record.datasets() == ["kemerer"]
    emit_reports(record, tmp_path / "out")
    assert json.loads((tmp_path / "out" / "errors.json").read_text()).keys() == {"tiny"}


def test_empty_record_cannot_be_reported(tmp_path):
    with pytest.raises(DataError):
        emit_reports(RunRecord(ExperimentSpec(("kemerer",))), tmp_path)
