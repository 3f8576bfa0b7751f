import csv
import io
import json

import pytest

from builders import make, sec
from sectioning import (ConflictReport, Sectioning, Timetable, generate_instance, load_instance,
                        scg_of, score, serialize_instance, validate_sectioning)
from sectioning.generate import PRESETS
from sectioning.instance import PeriodGrid
from sectioning.pipeline import (BENCH_COLUMNS, BenchRow, PipelineConfig, PipelineError,
                                 bench_csv, bench_json, bench_row, bench_table, format_bench,
                                 run_pipeline)
from sectioning.timetable import structural_violations


def clash_instance_file(tmp_path):
    # one period for two sections taught by the same professor: a clash is forced
    inst = make([sec("A.1", "A"), sec("B.1", "B")], [("G", 1, ["A"]), ("H", 1, ["B"])],
                grid=PeriodGrid(1, 1, None), name="forced")
    path = tmp_path / "forced.json"
    path.write_text(serialize_instance(inst))
    return path


def test_config_validation():
    with pytest.raises(ValueError):
        PipelineConfig()
    with pytest.raises(ValueError):
        PipelineConfig(preset="tiny", budget_minimize=0)
    with pytest.raises(ValueError):
        PipelineConfig(preset="tiny", tabu_rounds=-1)
    with pytest.raises(ValueError):
        PipelineConfig(preset="tiny", objective="fewest")
    assert PipelineConfig(preset="tiny", objective="weighted-tabu").objective == "weighted_tabu"


def test_tiny_pipeline_one_round(tmp_path):
    cfg = PipelineConfig(preset="tiny", seed=2, budget_minimize=1, budget_timetable=5,
                         tabu_rounds=1, out=str(tmp_path))
    result = run_pipeline(cfg)
    assert result.exit_code == 0 and result.report.total == 0
    assert result.bench_row.time_to_zero is not None


def test_artifacts_revalidate(tmp_path):
    cfg = PipelineConfig(preset="tiny", seed=5, budget_minimize=1, budget_timetable=5,
                         out=str(tmp_path))
    result = run_pipeline(cfg)
    inst = load_instance(tmp_path / "instance.json")
    assert inst == generate_instance("tiny", 5)
    f = Sectioning.from_document((tmp_path / "sectioning.json").read_text())
    tt = Timetable.from_document((tmp_path / "timetable.json").read_text())
    assert validate_sectioning(inst, f) == []
    assert structural_violations(inst, tt, complete=True) == []
    rep = ConflictReport.from_document((tmp_path / "report.json").read_text())
    assert rep.total == score(inst, scg_of(inst, f), tt, complete=True).total
    assert (rep.clash_count == 0) == (result.exit_code == 0)
    row = json.loads((tmp_path / "bench_row.json").read_text())
    assert row["minimized_edges"] <= row["greedy_edges"]
    for name in ("greedy_sectioning.json", "greedy_trace.tsv", "run_log.json"):
        assert (tmp_path / name).exists()


def test_forced_clash_without_tabu_rounds(tmp_path):
    path = clash_instance_file(tmp_path)
    cfg = PipelineConfig(instance_path=str(path), budget_minimize=1, budget_timetable=1,
                         tabu_rounds=0, out=str(tmp_path / "out"))
    result = run_pipeline(cfg)
    assert result.exit_code != 0
    rep = ConflictReport.from_document((tmp_path / "out" / "report.json").read_text())
    assert rep.clash_count == 1 and rep.total >= 1000
    assert not (tmp_path / "out" / "tabu.json").exists()


def test_stage_errors_name_the_stage(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    cfg = PipelineConfig(instance_path=str(bad), out=str(tmp_path / "out"))
    with pytest.raises(PipelineError) as err:
        run_pipeline(cfg)
    assert err.value.stage == "instance"


def test_bench_row_single():
    rows = bench_table(["easy"], [0.05], 1, 0, budget_timetable=0.05)
    assert len(rows) == 1
    row = rows[0]
    assert row.budget == 0.05 and row.instance == "easy-0"
    for name in ("greedy_edges", "minimized_edges", "reduction_pct", "timetable_objective"):
        assert getattr(row, name) is not None
    assert row.time_to_zero is None or row.timetable_objective == 0


def test_bench_table_shape_and_files():
    budgets = [0.01, 0.02, 0.03]
    rows = bench_table(list(PRESETS), budgets, 3, 0, budget_timetable=0.01)
    assert len(rows) == 36
    assert [r.budget for r in rows] == [b for b in budgets for _ in range(12)]
    for r in rows:
        assert r.reduction_pct == BenchRow.reduction(r.greedy_edges, r.minimized_edges)
        assert r.reduction_pct == round(100 * (r.greedy_edges - r.minimized_edges)
                                        / r.greedy_edges, 2)
        assert (r.time_to_zero is None) == (r.timetable_objective != 0)
    table = format_bench(rows)
    assert len(table.splitlines()) == 38
    parsed = list(csv.DictReader(io.StringIO(bench_csv(rows))))
    assert len(parsed) == 36 and tuple(parsed[0]) == BENCH_COLUMNS
    assert [BenchRow(**d) for d in json.loads(bench_json(rows))] == rows


def test_bench_row_reproducible():
    inst = generate_instance("easy", 1)
    a = bench_row(inst, 0.2, 0.2, 1)
    b = bench_row(inst, 0.2, 0.2, 1)
    assert a.to_document() == b.to_document()


@pytest.mark.slow
def test_medium_bench_row_reduction():
    row = bench_row(generate_instance("medium", 1), 100, 1, 1)
    assert row.reduction_pct >= 1.0
