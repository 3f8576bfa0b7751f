"""Command-line entry point: ``sectioning <verb> [options]``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .generate import PRESET_NAMES, PRESETS, generate_instance
from .graph import InvalidSectioningError, Sectioning, scg_of, validate_sectioning
from .greedy import greedy_section
from .improve import improve
from .instance import InstanceError, load_instance, serialize_instance, validate
from .model import (InfeasibleAssignmentError, ObjectiveSpec, TabuList, build_model, export_opb,
                    export_wcnf, import_solution, wcnf_var_map_text)
from .pipeline import (IMPROVE_RATE, TIMETABLE_RATE, PipelineConfig, PipelineError, bench_csv,
                       bench_json, bench_table, format_bench, objective_variant, run_pipeline,
                       work_cap)
from .render import UnknownSelectorError, render_document, selectors
from .timetable import Timetable, TimetableStructureError, structural_violations
from .ttsolve import phased_solve


def _instance_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--instance", help="instance document (JSON)")
    src.add_argument("--preset", choices=PRESET_NAMES, help="generate this preset instead")
    p.add_argument("--seed", type=int, default=0, help="instance and search seed (default 0)")


def _out_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default="out", help="output directory (default ./out)")


def _search_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--workers", type=int, default=1, help="parallel search processes")
    p.add_argument("--wall-clock", action="store_true",
                   help="stop on the clock only (runs are then not reproducible)")


def _objective_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--objective", default="weighted",
                   choices=("edges", "weighted", "weighted-tabu"))
    p.add_argument("--tabu", help="tabu list document for --objective weighted-tabu")


def _load(args):
    if args.instance:
        return load_instance(args.instance)
    if args.preset:
        return generate_instance(args.preset, args.seed)
    raise SystemExit("error: give --instance or --preset")


def _objective(args, inst) -> ObjectiveSpec:
    variant = objective_variant(args.objective)
    tabu = None
    if variant == "weighted_tabu":
        tabu = TabuList.from_document(Path(args.tabu).read_text()) if args.tabu else TabuList()
    return ObjectiveSpec(variant, inst.edge_weights, tabu)


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str) -> None:
    path.write_text(text)
    print(path)


def cmd_generate(args) -> int:
    inst = generate_instance(args.preset, args.seed)
    _write(_out(args) / "instance.json", serialize_instance(inst))
    return 0


def cmd_validate(args) -> int:
    try:
        inst = load_instance(args.path, check=False)
    except InstanceError as exc:
        print(f"{args.path}: {exc}")
        return 1
    problems = validate(inst)
    if args.sectioning and not problems:
        f = Sectioning.from_document(Path(args.sectioning).read_text())
        problems += validate_sectioning(inst, f)
        if args.timetable and not problems:
            tt = Timetable.from_document(Path(args.timetable).read_text())
            problems += structural_violations(inst, tt, complete=True)
    for v in problems:
        print(v)
    if not problems:
        print(f"{args.path}: ok ({len(inst.sections)} sections, {len(inst.students)} students)")
    return 1 if problems else 0


def cmd_section(args) -> int:
    inst = _load(args)
    f, trace = greedy_section(inst, args.seed)
    out = _out(args)
    _write(out / "instance.json", serialize_instance(inst))
    _write(out / "greedy_sectioning.json", f.to_document())
    _write(out / "greedy_trace.tsv", trace.to_text())
    return 0


def _sectioning(args, inst) -> Sectioning:
    if args.sectioning:
        return Sectioning.from_document(Path(args.sectioning).read_text())
    return greedy_section(inst, args.seed)[0]


def cmd_minimize(args) -> int:
    inst = _load(args)
    start = _sectioning(args, inst)
    obj = _objective(args, inst)
    f, value, log = improve(inst, start, obj, budget=args.budget_minimize, seed=args.seed,
                            max_iters=work_cap(args.budget_minimize, IMPROVE_RATE,
                                               not args.wall_clock),
                            workers=args.workers)
    print(f"objective {log.start_value:g} -> {value:g} ({log.iterations} iterations)")
    _write(_out(args) / "sectioning.json", f.to_document())
    return 0


def cmd_timetable(args) -> int:
    inst = _load(args)
    f = _sectioning(args, inst)
    tt, report, _ = phased_solve(inst, scg_of(inst, f), inst.soft_weights,
                                 budget=args.budget_timetable, seed=args.seed,
                                 max_iters=work_cap(args.budget_timetable, TIMETABLE_RATE,
                                                    not args.wall_clock),
                                 workers=args.workers)
    out = _out(args)
    _write(out / "timetable.json", tt.to_document())
    _write(out / "report.json", report.to_document())
    print(f"score {report.total:g} ({report.clash_count} clashes)")
    return 0 if report.clash_count == 0 else 1


def cmd_pipeline(args) -> int:
    cfg = PipelineConfig(preset=args.preset, seed=args.seed, instance_path=args.instance,
                         budget_minimize=args.budget_minimize,
                         budget_timetable=args.budget_timetable, tabu_rounds=args.tabu_rounds,
                         objective=args.objective, workers=args.workers, out=args.out,
                         deterministic=not args.wall_clock)
    try:
        result = run_pipeline(cfg)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    row = result.bench_row
    print(f"{row.instance}: edges {row.greedy_edges:g} -> {row.minimized_edges:g} "
          f"({row.reduction_pct:.2f}% less), timetable score {result.report.total:g}, "
          f"{result.report.clash_count} clashes")
    return result.exit_code


def cmd_bench(args) -> int:
    out = _out(args)
    rows = bench_table(args.presets, args.budgets, args.repeats, args.seed,
                       budget_timetable=args.budget_timetable, objective=args.objective,
                       workers=args.workers, deterministic=not args.wall_clock,
                       progress=lambda r: print(f"  {r.instance} {r.budget:g}s: "
                                                f"{r.reduction_pct:.2f}%", file=sys.stderr))
    text = format_bench(rows)
    sys.stdout.write(text)
    _write(out / "bench.txt", text)
    _write(out / "bench.csv", bench_csv(rows))
    _write(out / "bench.json", bench_json(rows))
    return 0


def cmd_render(args) -> int:
    inst = _load(args)
    f = Sectioning.from_document(Path(args.sectioning).read_text())
    tt = Timetable.from_document(Path(args.timetable).read_text())
    chosen = args.select or [s for s in selectors(inst, f) if s.startswith("division:")]
    try:
        text = render_document(inst, f, tt, chosen, "text")
        page = render_document(inst, f, tt, chosen, "html")
    except UnknownSelectorError as exc:
        print(f"error: unknown selector {exc}; try one of {', '.join(selectors(inst, f)[:5])}, ...",
              file=sys.stderr)
        return 2
    out = _out(args)
    _write(out / "schedule.txt", text)
    _write(out / "schedule.html", page)
    return 0


def cmd_export_model(args) -> int:
    inst = _load(args)
    model = build_model(inst, _objective(args, inst))
    out = _out(args)
    if args.format in ("opb", "both"):
        _write(out / "model.opb", export_opb(model))
        _write(out / "model.map", model.var_map_text())
    if args.format in ("wcnf", "both"):
        _write(out / "model.wcnf", export_wcnf(model))
        _write(out / "model.wcnf.map", wcnf_var_map_text(model))
    sizes = " ".join(f"{k}={v}" for k, v in model.set_sizes().items())
    print(f"{model.num_vars} variables; {sizes}")
    return 0


def cmd_import_solution(args) -> int:
    inst = _load(args)
    model = build_model(inst, _objective(args, inst))
    try:
        f = import_solution(model, Path(args.solution).read_text())
    except (InfeasibleAssignmentError, InvalidSectioningError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _write(_out(args) / "sectioning.json", f.to_document())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sectioning",
                                     description="Student sectioning and timetabling.")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("generate", help="write a synthetic instance")
    p.add_argument("--preset", choices=PRESET_NAMES, required=True)
    p.add_argument("--seed", type=int, default=0)
    _out_arg(p)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("validate", help="check an instance (and optionally a solution)")
    p.add_argument("path")
    p.add_argument("--sectioning")
    p.add_argument("--timetable")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("section", help="greedy sectioning")
    _instance_args(p)
    _out_arg(p)
    p.set_defaults(fn=cmd_section)

    p = sub.add_parser("minimize", help="reduce conflict-graph edges from a sectioning")
    _instance_args(p)
    p.add_argument("--sectioning", help="start sectioning (default: greedy)")
    p.add_argument("--budget-minimize", type=float, default=100.0)
    _objective_arg(p)
    _search_args(p)
    _out_arg(p)
    p.set_defaults(fn=cmd_minimize)

    p = sub.add_parser("timetable", help="phased timetable for a sectioning")
    _instance_args(p)
    p.add_argument("--sectioning", help="sectioning (default: greedy)")
    p.add_argument("--budget-timetable", type=float, default=600.0)
    _search_args(p)
    _out_arg(p)
    p.set_defaults(fn=cmd_timetable)

    p = sub.add_parser("pipeline", help="greedy, minimize, timetable and tabu rounds")
    _instance_args(p)
    p.add_argument("--budget-minimize", type=float, default=100.0)
    p.add_argument("--budget-timetable", type=float, default=600.0)
    p.add_argument("--tabu-rounds", type=int, default=3)
    p.add_argument("--objective", default="weighted",
                   choices=("edges", "weighted", "weighted-tabu"))
    _search_args(p)
    _out_arg(p)
    p.set_defaults(fn=cmd_pipeline)

    p = sub.add_parser("bench", help="benchmark table over presets and budgets")
    p.add_argument("--presets", nargs="+", default=list(PRESETS), choices=PRESET_NAMES)
    p.add_argument("--budgets", nargs="+", type=float, default=[100.0, 600.0, 1800.0])
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget-timetable", type=float, default=600.0)
    p.add_argument("--objective", default="weighted",
                   choices=("edges", "weighted", "weighted-tabu"))
    _search_args(p)
    _out_arg(p)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("render", help="weekly grids as text and HTML")
    _instance_args(p)
    p.add_argument("--sectioning", required=True)
    p.add_argument("--timetable", required=True)
    p.add_argument("--select", action="append",
                   help="division:<group>/<k> or professor:<id>; repeatable "
                        "(default: every division)")
    _out_arg(p)
    p.set_defaults(fn=cmd_render)

    p = sub.add_parser("export-model", help="write the sectioning model as OPB and/or WCNF")
    _instance_args(p)
    _objective_arg(p)
    p.add_argument("--format", choices=("opb", "wcnf", "both"), default="both")
    _out_arg(p)
    p.set_defaults(fn=cmd_export_model)

    p = sub.add_parser("import-solution", help="read a solver assignment back as a sectioning")
    _instance_args(p)
    _objective_arg(p)
    p.add_argument("--solution", required=True)
    _out_arg(p)
    p.set_defaults(fn=cmd_import_solution)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (InstanceError, TimetableStructureError, InvalidSectioningError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
