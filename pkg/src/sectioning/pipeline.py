"""End-to-end runs: greedy sectioning, edge minimization, phased timetabling
and the tabu loop, plus benchmark tables.

Budgets are given in seconds. With ``deterministic`` on (the default) each
budget also becomes an iteration cap at a fixed nominal rate, set well below
what the searches reach on ordinary hardware, so the cap is hit before the
clock and a run is reproducible from its seed. The wall clock still stops a
run at the budget on slower machines. Times in bench rows are then measured
on the same work clock (iterations divided by the nominal rate).
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .generate import generate_instance
from .graph import Sectioning, edge_count, scg_of, validate_sectioning
from .greedy import greedy_section
from .improve import improve
from .instance import Instance, load_instance, serialize_instance
from .model import VARIANTS, ObjectiveSpec, TabuList, objective_value
from .timetable import ConflictReport, Timetable, extract_tabu, score, structural_violations
from .ttsolve import phased_solve
from .weights import EdgeWeights, SoftWeights

IMPROVE_RATE = 4000  # nominal local-search iterations per second
TIMETABLE_RATE = 200  # nominal timetable-search iterations per second

INSTANCE_FILE = "instance.json"
GREEDY_FILE = "greedy_sectioning.json"
TRACE_FILE = "greedy_trace.tsv"
SECTIONING_FILE = "sectioning.json"
TABU_FILE = "tabu.json"
TIMETABLE_FILE = "timetable.json"
REPORT_FILE = "report.json"
BENCH_ROW_FILE = "bench_row.json"
RUN_LOG_FILE = "run_log.json"


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


def objective_variant(name: str) -> str:
    """Accept CLI spellings such as ``weighted-tabu``."""
    variant = name.replace("-", "_")
    if variant not in VARIANTS:
        raise ValueError(f"unknown objective {name!r}; expected one of "
                         + ", ".join(v.replace("_", "-") for v in VARIANTS))
    return variant


@dataclass
class PipelineConfig:
    preset: str | None = None
    seed: int = 0
    instance_path: str | None = None
    budget_minimize: float = 100.0
    budget_timetable: float = 600.0
    tabu_rounds: int = 3
    objective: str = "weighted"
    edge_weights: EdgeWeights | None = None
    soft_weights: SoftWeights | None = None
    workers: int = 1
    out: str = "out"
    deterministic: bool = True

    def __post_init__(self):
        if (self.preset is None) == (self.instance_path is None):
            raise ValueError("give exactly one of a preset or an instance path")
        if self.budget_minimize <= 0 or self.budget_timetable <= 0:
            raise ValueError("budgets must be positive")
        if self.tabu_rounds < 0:
            raise ValueError("tabu rounds must be >= 0")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        self.objective = objective_variant(self.objective)

    def improve_iters(self) -> int | None:
        return work_cap(self.budget_minimize, IMPROVE_RATE, self.deterministic)

    def timetable_iters(self) -> int | None:
        return work_cap(self.budget_timetable, TIMETABLE_RATE, self.deterministic)


def work_cap(budget: float, rate: int, deterministic: bool) -> int | None:
    return math.ceil(budget * rate) if deterministic else None


@dataclass
class BenchRow:
    budget: float
    instance: str
    greedy_edges: float
    minimized_edges: float
    reduction_pct: float
    timetable_objective: float
    time_to_zero: float | None

    @staticmethod
    def reduction(greedy: float, minimized: float) -> float:
        return round(100 * (greedy - minimized) / greedy, 2) if greedy else 0.0

    def to_document(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=1) + "\n"


@dataclass
class PipelineResult:
    exit_code: int
    sectioning: Sectioning
    timetable: Timetable
    report: ConflictReport
    bench_row: BenchRow
    rounds: list[dict] = field(default_factory=list)


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineError:
        raise
    except Exception as exc:  # noqa: BLE001 - re-raised with the stage name
        raise PipelineError(name, exc) from exc


def load_config_instance(cfg: PipelineConfig) -> Instance:
    if cfg.instance_path is not None:
        inst = load_instance(cfg.instance_path)
    else:
        inst = generate_instance(cfg.preset, cfg.seed)
    if cfg.edge_weights is not None:
        inst = replace(inst, edge_weights=cfg.edge_weights)
    if cfg.soft_weights is not None:
        inst = replace(inst, soft_weights=cfg.soft_weights)
    return inst


def _time_to_zero(log, deterministic: bool) -> float | None:
    if log.zero_iteration is None:
        return None
    if deterministic:
        return round(log.zero_iteration / TIMETABLE_RATE, 2)
    return round(log.zero_seconds, 2)


def run_pipeline(cfg: PipelineConfig) -> PipelineResult:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    wall: dict[str, float] = {}

    def timed(name, fn, *args, **kwargs):
        t0 = time.perf_counter()
        result = _stage(name, fn, *args, **kwargs)
        wall[name] = wall.get(name, 0.0) + time.perf_counter() - t0
        return result

    inst = timed("instance", load_config_instance, cfg)
    (out / INSTANCE_FILE).write_text(serialize_instance(inst))

    f0, trace = timed("greedy", greedy_section, inst, cfg.seed)
    (out / GREEDY_FILE).write_text(f0.to_document())
    (out / TRACE_FILE).write_text(trace.to_text())

    weights = inst.edge_weights
    base_variant = "edges" if cfg.objective == "edges" else "weighted"
    plain = ObjectiveSpec(base_variant, weights)
    tabu = TabuList()
    obj = ObjectiveSpec(cfg.objective, weights, tabu if cfg.objective == "weighted_tabu" else None)
    greedy_value = objective_value(inst, f0, plain)

    f, _, _ = timed("minimize", improve, inst, f0, obj, budget=cfg.budget_minimize,
                    seed=cfg.seed, max_iters=cfg.improve_iters(), workers=cfg.workers)
    minimized_value = objective_value(inst, f, plain)

    def timetable(sectioning: Sectioning, round_no: int):
        g = scg_of(inst, sectioning)
        return timed("timetable", phased_solve, inst, g, inst.soft_weights,
                     budget=cfg.budget_timetable, seed=cfg.seed + 7919 * round_no,
                     max_iters=cfg.timetable_iters(), workers=cfg.workers)

    tt, report, log = timetable(f, 0)
    rounds = [dict(round=0, edges=edge_count(scg_of(inst, f)), objective=report.total,
                   clashes=report.clash_count, tabu_pairs=0)]
    best = (report.total, f, tt, report, _time_to_zero(log, cfg.deterministic))
    tabu_weights = weights if base_variant == "weighted" else EdgeWeights(1, 1, 1, weights.d)

    for r in range(1, cfg.tabu_rounds + 1):
        if best[3].clash_count == 0:
            break
        cur_f, cur_report = best[1], best[3]
        tabu = TabuList(tabu.pairs | extract_tabu(inst, cur_f, cur_report).pairs)
        tabu_obj = ObjectiveSpec("weighted_tabu", tabu_weights, tabu)
        f_r, _, _ = timed("minimize", improve, inst, cur_f, tabu_obj, budget=cfg.budget_minimize,
                          seed=cfg.seed + r, max_iters=cfg.improve_iters(), workers=cfg.workers)
        tt_r, report_r, log_r = timetable(f_r, r)
        rounds.append(dict(round=r, edges=edge_count(scg_of(inst, f_r)), objective=report_r.total,
                           clashes=report_r.clash_count, tabu_pairs=len(tabu)))
        if report_r.total < best[0]:
            best = (report_r.total, f_r, tt_r, report_r, _time_to_zero(log_r, cfg.deterministic))
    _, f, tt, report, zero_time = best
    if tabu:
        (out / TABU_FILE).write_text(tabu.to_document())

    # Independent re-check of what goes to disk.
    problems = validate_sectioning(inst, f) + structural_violations(inst, tt, complete=True)
    if problems:
        raise PipelineError("verify", ValueError("; ".join(str(p) for p in problems[:5])))
    check = score(inst, scg_of(inst, f), tt, inst.soft_weights, complete=True)
    assert check == report

    row = BenchRow(cfg.budget_minimize, inst.name or "instance", greedy_value, minimized_value,
                   BenchRow.reduction(greedy_value, minimized_value), report.total, zero_time)
    (out / SECTIONING_FILE).write_text(f.to_document())
    (out / TIMETABLE_FILE).write_text(tt.to_document())
    (out / REPORT_FILE).write_text(report.to_document())
    (out / BENCH_ROW_FILE).write_text(row.to_document())
    (out / RUN_LOG_FILE).write_text(json.dumps({"rounds": rounds, "wall_seconds": wall},
                                               sort_keys=True, indent=1) + "\n")
    exit_code = 0 if check.clash_count == 0 else 1
    return PipelineResult(exit_code, f, tt, report, row, rounds)


# -- benchmark table -------------------------------------------------------------

BENCH_COLUMNS = ("budget", "instance", "greedy_edges", "minimized_edges", "reduction_pct",
                 "timetable_objective", "time_to_zero")
BENCH_HEADERS = ("budget s", "instance", "SCG after greedy", "after minimization",
                 "% reduction", "timetable objective", "time to zero s")


def bench_row(inst: Instance, budget: float, budget_timetable: float, seed: int,
              objective: str = "weighted", workers: int = 1, deterministic: bool = True) -> BenchRow:
    """One benchmark row: greedy, minimization, phased timetable (no tabu loop)."""
    variant = objective_variant(objective)
    f0, _ = greedy_section(inst, seed)
    plain = ObjectiveSpec("edges" if variant == "edges" else "weighted", inst.edge_weights)
    obj = ObjectiveSpec(variant, inst.edge_weights,
                        TabuList() if variant == "weighted_tabu" else None)
    f, _, _ = improve(inst, f0, obj, budget=budget, seed=seed,
                      max_iters=work_cap(budget, IMPROVE_RATE, deterministic), workers=workers)
    g0, g1 = objective_value(inst, f0, plain), objective_value(inst, f, plain)
    _, report, log = phased_solve(inst, scg_of(inst, f), inst.soft_weights,
                                  budget=budget_timetable, seed=seed,
                                  max_iters=work_cap(budget_timetable, TIMETABLE_RATE, deterministic),
                                  workers=workers)
    return BenchRow(budget, inst.name or "instance", g0, g1, BenchRow.reduction(g0, g1),
                    report.total, _time_to_zero(log, deterministic))


def bench_table(presets, budgets, repeats: int, seed: int, budget_timetable: float = 600.0,
                objective: str = "weighted", workers: int = 1, deterministic: bool = True,
                progress=None) -> list[BenchRow]:
    """Rows ordered by budget, then preset, then repeat.

    Each preset is generated once from ``seed``; repeat ``k`` reruns the
    searches with seed ``seed + k``.
    """
    instances = {p: generate_instance(p, seed) for p in presets}
    rows = []
    for budget in budgets:
        for p in presets:
            for k in range(repeats):
                row = bench_row(instances[p], budget, budget_timetable, seed + k, objective,
                                workers, deterministic)
                rows.append(row)
                if progress is not None:
                    progress(row)
    return rows


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:g}" if v != int(v) else str(int(v))
    return str(v)


def format_bench(rows: list[BenchRow]) -> str:
    cells = [list(BENCH_HEADERS)] + [[_fmt(getattr(r, c)) for c in BENCH_COLUMNS] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(BENCH_COLUMNS))]
    lines = []
    for k, row in enumerate(cells):
        lines.append("  ".join(v.rjust(w) if k and i != 1 else v.ljust(w)
                               for i, (v, w) in enumerate(zip(row, widths))).rstrip())
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def bench_csv(rows: list[BenchRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BENCH_COLUMNS)
    for r in rows:
        writer.writerow([_fmt(getattr(r, c)) for c in BENCH_COLUMNS])
    return buf.getvalue()


def bench_json(rows: list[BenchRow]) -> str:
    return json.dumps([asdict(r) for r in rows], sort_keys=True, indent=1) + "\n"
