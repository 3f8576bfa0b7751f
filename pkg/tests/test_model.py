import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

import oracles
from builders import make, random_sectioning, sec
from sectioning import (EdgeWeights, ObjectiveSpec, TabuList, base_scg,
                        brute_force_optimum, build_model, edge_count, export_model,
                        generate_instance, greedy_section, import_solution, objective_value,
                        scg_of, validate_sectioning)
from sectioning.improve import SearchLimitError
from sectioning.model import ExportError, InfeasibleAssignmentError, UnknownVariableError


def by_family(m, fam):
    return [c for c in m.constraints() if c.family == fam]


def test_two_students_one_course_counts():
    inst = make([sec("A.1", "A", cap=1), sec("A.2", "A", cap=1, prof="P2")], [("G", 2, ["A"])])
    m = build_model(inst)
    assert m.set_sizes()["GC"] == 2
    assert len(by_family(m, 2)) == 2
    assert all(c.op == "=" and c.rhs == 1 and len(c.terms) == 2 for c in by_family(m, 2))
    assert len(by_family(m, 3)) == 2
    assert all(c.rhs == -1 for c in by_family(m, 3))


def test_single_room_pair_fixes_y():
    inst = make([sec("A.1", "A", room="pool"), sec("B.1", "B", prof="P2", room="pool")],
                [("G", 1, ["A"])], rooms=[("POOL", "pool")])
    m = build_model(inst)
    assert m.RSS == [("POOL", "A.1", "B.1")]
    [row] = by_family(m, 1)
    assert row.terms == ((1, m.y("A.1", "B.1")),) and row.op == "=" and row.rhs == 1


def test_family_rows():
    inst = make([sec("L.1", "L", cap=2), sec("B.1", "B", cap=2, prof="P2", parent="L.1")],
                [("G", 2, ["L", "B"])])
    m = build_model(inst)
    assert m.FSS == [("L.1", "B.1")]
    assert m.FGSS == [("G#0", "L.1", "B.1"), ("G#1", "L.1", "B.1")]
    rows = by_family(m, 4)
    assert rows[0].terms == ((1, m.x("G#0", "L.1")), (-1, m.x("G#0", "B.1")))
    assert rows[0].op == ">=" and rows[0].rhs == 0


def test_index_set_sizes_tiny(tiny):
    inst = tiny(4)
    m = build_model(inst)
    sizes = m.set_sizes()
    n = len(inst.sections)
    assert sizes["SS"] == n * (n - 1) // 2 == len(list(m.SS()))
    assert sizes["GSS"] == len(list(m.GSS()))
    assert sizes["W"] == len(m.W) and sizes["PS"] == n
    assert m.num_vars == len(m.W) + sizes["SS"]
    assert len(set(m.var_names())) == m.num_vars


def test_objective_variants(tiny):
    inst = tiny(6)
    f, _ = greedy_section(inst, 0)
    g = scg_of(inst, f)
    assert objective_value(inst, f, ObjectiveSpec("edges")) == edge_count(g)
    plain = objective_value(inst, f, ObjectiveSpec("weighted"))
    assert objective_value(inst, f, ObjectiveSpec("weighted_tabu", tabu=TabuList())) == plain
    assert plain == oracles.weighted_value(inst, f.as_dict)
    g0, _, s0 = f.assignment[0]
    tabu = TabuList(frozenset({(g0, s0)}))
    assert objective_value(inst, f, ObjectiveSpec("weighted_tabu", tabu=tabu)) == plain + 5


def test_edges_variant_five_edges():
    secs = [sec(f"C{i}.1", f"C{i}", prof=f"P{i}") for i in range(4)]
    inst = make(secs, [("G", 1, ["C0", "C1", "C2"]), ("H", 1, ["C1", "C2", "C3"])])
    f, _ = greedy_section(inst, 0)
    assert edge_count(base_scg(inst)) == 0
    assert edge_count(scg_of(inst, f)) == 5
    assert objective_value(inst, f, ObjectiveSpec("edges")) == 5


def test_objective_spec_checks():
    with pytest.raises(ValueError):
        ObjectiveSpec("fewest")
    with pytest.raises(ValueError):
        ObjectiveSpec("weighted_tabu")
    inst = make([sec("A.1", "A")], [("G", 1, ["A"])])
    bad = ObjectiveSpec("weighted_tabu", tabu=TabuList(frozenset({("G#0", "Z.1")})))
    with pytest.raises(ValueError):
        build_model(inst, bad)


def test_smallest_export():
    inst = make([sec("A.1", "A", cap=1)], [("G", 1, ["A"])])
    m = build_model(inst)
    assert m.num_vars == 1
    n_vars, objective, rows = oracles.parse_opb(export_model(m))
    assert n_vars == 1 and objective == []
    assert [r for r in rows if r[1] == "="] == [([(1, False, 1)], "=", 1)]


def test_gss_clauses():
    inst = make([sec("A.1", "A"), sec("B.1", "B", prof="P2"), sec("C.1", "C", prof="P3")],
                [("G", 2, ["A", "B", "C"])])
    m = build_model(inst)
    gss = list(m.GSS())
    assert len(gss) == 6
    _, _, hard, _ = oracles.parse_wcnf(export_model(m, "weighted_clauses"))
    triples = [c for c in hard if len(c) == 3]
    expected = sorted(sorted([-m.x(g, s), -m.x(g, t), m.y(s, t)]) for g, s, t in gss)
    assert sorted(sorted(c) for c in triples) == expected
    _, _, rows = oracles.parse_opb(export_model(m))
    assert sum(1 for terms, _, _ in rows if len(terms) == 3) == 6


def test_export_is_byte_deterministic(tiny):
    a = build_model(tiny(5))
    b = build_model(generate_instance("tiny", 5))
    for fmt in ("pseudo_boolean", "weighted_clauses"):
        assert export_model(a, fmt) == export_model(b, fmt)
    assert a.var_map_text() == b.var_map_text()


def test_export_rejects_fractional_weights():
    inst = make([sec("A.1", "A"), sec("B.1", "B")], [("G", 1, ["A", "B"])])
    m = build_model(inst, ObjectiveSpec(weights=EdgeWeights(a=0.5)))
    with pytest.raises(ExportError):
        export_model(m)
    with pytest.raises(ExportError):
        export_model(build_model(inst), "lp")


def _solution_lines(m, value):
    return "".join(f"x{i} {value[i]}\n" for i in range(1, m.num_vars + 1))


def test_import_round_trip_and_formats(tiny):
    inst = tiny(9)
    f, v = brute_force_optimum(inst)
    m = build_model(inst)
    value = m.assignment_from(f)
    back = import_solution(m, _solution_lines(m, value))
    assert back == f and objective_value(inst, back, m.objective) == v
    v_line = "v " + " ".join(("" if value[i] else "-") + f"x{i}" for i in sorted(value)) + " 0\n"
    assert import_solution(m, "s OPTIMUM FOUND\no 38\n" + v_line) == f
    named = "".join(f"{name} {value[i]}\n" for i, name in enumerate(m.var_names(), 1))
    assert import_solution(m, named) == f


def test_import_rejects_unknown_and_infeasible():
    inst = make([sec("A.1", "A", cap=1), sec("A.2", "A", cap=1, prof="P2")], [("G", 2, ["A"])])
    m = build_model(inst)
    with pytest.raises(UnknownVariableError):
        import_solution(m, "x99 1\n")
    with pytest.raises(UnknownVariableError):
        import_solution(m, "x[G#0,Z.9] 1\n")
    crowded = {m.x("G#0", "A.1"): 1, m.x("G#0", "A.2"): 0,
               m.x("G#1", "A.1"): 1, m.x("G#1", "A.2"): 0}
    with pytest.raises(InfeasibleAssignmentError) as err:
        import_solution(m, "".join(f"x{i} {v}\n" for i, v in crowded.items()))
    assert "capacity" in {v.rule for v in err.value.violations}
    with pytest.raises(InfeasibleAssignmentError):
        import_solution(m, "x1 1\n")


def test_brute_force_one_student():
    inst = make([sec("A.1", "A", prof="P1"), sec("B.1", "B", prof="P2"),
                 sec("B.2", "B", prof="P1"), sec("C.1", "C", prof="P3")],
                [("G", 1, ["A", "B", "C"])])
    f, v = brute_force_optimum(inst, ObjectiveSpec("edges"))
    # the student's sections form a triangle; picking B.2 reuses the base edge A.1-B.2
    assert f.section_of("G#0", "B") == "B.2"
    assert v == len({frozenset(e) for e in base_scg(inst).edges}
                    | {frozenset(p) for p in itertools.combinations(["A.1", "B.2", "C.1"], 2)})


def test_brute_force_capacity_forces_partition():
    inst = make([sec("A.1", "A", cap=1), sec("A.2", "A", cap=1, prof="P2"),
                 sec("B.1", "B", cap=1, prof="P3"), sec("B.2", "B", cap=1, prof="P4")],
                [("G", 2, ["A", "B"])])
    f, v = brute_force_optimum(inst, ObjectiveSpec("edges"))
    assert v == edge_count(base_scg(inst)) + 2
    assert validate_sectioning(inst, f) == []


def test_brute_force_limit():
    inst = generate_instance("tiny", 2)
    with pytest.raises(SearchLimitError) as err:
        brute_force_optimum(inst, limit=10)
    assert err.value.product > 10


def test_brute_force_matches_frozen_optima(tiny, tiny_optima):
    for seed in range(1, 21):
        inst = tiny(seed)
        f, v = brute_force_optimum(inst)
        assert v == tiny_optima[str(seed)]["weighted"]
        assert validate_sectioning(inst, f) == []
        assert objective_value(inst, f, ObjectiveSpec()) == v
        _, e = brute_force_optimum(inst, ObjectiveSpec("edges"))
        assert e == tiny_optima[str(seed)]["edges"]


def test_brute_force_with_tabu_matches_enumeration(tiny):
    for seed in (3, 7, 9, 14):
        inst = tiny(seed)
        f, _ = greedy_section(inst, seed)
        tabu = frozenset(list((g, s) for g, _, s in f.assignment)[:3])
        obj = ObjectiveSpec("weighted_tabu", tabu=TabuList(tabu))
        _, v = brute_force_optimum(inst, obj)
        expected = min(oracles.weighted_value(inst, mp, tabu=tabu, d=5)
                       for mp in oracles.all_sectionings(inst))
        assert v == expected


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 60), st.integers(0, 2**32))
def test_model_soundness_both_directions(seed, rseed):
    inst = generate_instance("tiny", seed)
    m = build_model(inst)
    rng = random.Random(rseed)
    f = random_sectioning(inst, rng)
    assert m.violated(m.assignment_from(f)) == []

    # an arbitrary x: satisfiable with minimal y exactly when it is a valid sectioning
    x = {i: rng.randint(0, 1) for i in range(1, len(m.W) + 1)}
    full = m.minimal_y(x)
    ok_model = not m.violated(full)
    by_gc = {}
    for (g, s), i in m.x_index.items():
        if x[i]:
            by_gc.setdefault((g, inst.section_map[s].course_id), []).append(s)
    one_each = all(len(v) == 1 for v in by_gc.values())
    ok_sectioning = one_each and validate_sectioning(inst, m.sectioning_from(x)) == []
    assert ok_model == ok_sectioning


def test_opb_evaluator_agrees_on_every_sectioning():
    for seed in (7, 9, 14):
        inst = generate_instance("tiny", seed)
        m = build_model(inst)
        _, objective, rows = oracles.parse_opb(export_model(m))
        y_vars = set(range(len(m.W) + 1, m.num_vars + 1))
        best = None
        keys = [(g, c) for g, cs in oracles.students(inst) for c in cs]
        for combo in itertools.product(*(oracles.sections_of(inst, c) for _, c in keys)):
            x = dict.fromkeys(range(1, len(m.W) + 1), 0)
            for (g, _), s in zip(keys, combo):
                x[m.x(g, s)] = 1
            value = oracles.opb_complete(rows, x, y_vars)
            if oracles.opb_satisfied(rows, value):
                v = oracles.opb_objective(objective, value)
                best = v if best is None else min(best, v)
        assert best == brute_force_optimum(inst)[1]


def test_wcnf_evaluator_on_optimum(tiny):
    for seed in range(1, 21):
        inst = tiny(seed)
        f, v = brute_force_optimum(inst)
        m = build_model(inst)
        n_vars, top, hard, soft = oracles.parse_wcnf(export_model(m, "weighted_clauses"))
        assert top == sum(w for w, _ in soft) + 1
        assert oracles.wcnf_cost(hard, soft, m.assignment_from(f), n_vars) == v
