"""Boolean sectioning model: index sets, x/y variables, the five constraint
families, the three objectives, and exchange with external solvers through
pseudo-boolean (OPB) and weighted CNF (WCNF) text.

Variables are numbered from 1: first ``x[g,s]`` for every (student, section)
pair in W, then ``y[s,t]`` for every section pair in SS.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Iterator

from .graph import Sectioning, scg_of, validate_sectioning, weighted_edge_count
from .instance import Instance, Violation
from .weights import EdgeWeights

VARIANTS = ("edges", "weighted", "weighted_tabu")


@dataclass(frozen=True)
class TabuList:
    pairs: frozenset[tuple[str, str]] = frozenset()

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(sorted(self.pairs))

    def to_document(self) -> str:
        return json.dumps({"tabu": [list(p) for p in sorted(self.pairs)]}, indent=1) + "\n"

    @classmethod
    def from_document(cls, text: str) -> "TabuList":
        try:
            pairs = json.loads(text)["tabu"]
            return cls(frozenset((str(g), str(s)) for g, s in pairs))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"not a tabu list document: {exc}") from exc


@dataclass(frozen=True)
class ObjectiveSpec:
    variant: str = "weighted"
    weights: EdgeWeights = field(default_factory=EdgeWeights)
    tabu: TabuList | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown objective variant {self.variant!r}")
        if self.variant == "weighted_tabu" and self.tabu is None:
            raise ValueError("weighted_tabu needs a tabu list")

    @property
    def pair_weights(self) -> EdgeWeights:
        if self.variant == "edges":
            return EdgeWeights(1, 1, 1, self.weights.d)
        return self.weights

    @property
    def tabu_pairs(self) -> frozenset[tuple[str, str]]:
        if self.variant == "weighted_tabu" and self.tabu is not None:
            return self.tabu.pairs
        return frozenset()


def check_objective(inst: Instance, obj: ObjectiveSpec) -> None:
    students = inst.student_map
    sm = inst.section_map
    for g, s in obj.tabu_pairs:
        if g not in students or s not in sm or sm[s].course_id not in students[g].required_course_ids:
            raise ValueError(f"tabu pair ({g}, {s}) is not a possible enrollment")


def objective_value(inst: Instance, f: Sectioning, obj: ObjectiveSpec) -> float:
    """Edge (or weighted edge) count of SCG(f), plus d per tabu pair kept."""
    graph = scg_of(inst, f)
    value = weighted_edge_count(graph, inst, obj.pair_weights)
    tabu = obj.tabu_pairs
    if tabu:
        held = f.schedules
        value += obj.weights.d * sum(1 for g, s in tabu if s in held.get(g, ()))
    return value


@dataclass(frozen=True)
class Constraint:
    """``sum(coef * lit) op rhs``; a negative literal means ``not var``."""

    family: int
    terms: tuple[tuple[int, int], ...]
    op: str  # ">=" or "="
    rhs: int

    def holds(self, value: dict[int, int]) -> bool:
        total = 0
        for coef, lit in self.terms:
            v = value[abs(lit)]
            total += coef * (v if lit > 0 else 1 - v)
        return total == self.rhs if self.op == "=" else total >= self.rhs


class SectioningModel:
    """Index sets and constraints over a fixed instance and objective."""

    def __init__(self, inst: Instance, obj: ObjectiveSpec):
        check_objective(inst, obj)
        self.inst = inst
        self.objective = obj
        sections = inst.sections
        self.sections = [s.id for s in sections]
        order = inst.section_index
        by_course = inst.course_sections

        self.GC = [(g.id, c) for g in inst.students for c in g.required_course_ids]
        self.W = [(g.id, s) for g in inst.students
                  for c in g.required_course_ids for s in by_course[c]]
        self.W.sort(key=lambda p: (p[0], order[p[1]]))
        self.PS = [(s.professor_id, s.id) for s in sections]
        self.PSS = [(p, s1, s2) for (p, s1), (q, s2) in combinations(self.PS, 2) if p == q]
        self.FSS = [(s.parent_id, s.id) for s in sections if s.parent_id is not None]
        w_set = set(self.W)
        self.FGSS = [(g.id, p, s) for g in inst.students for p, s in self.FSS
                     if (g.id, p) in w_set and (g.id, s) in w_set]
        single = {r.id: r.room_type for r in inst.rooms if inst.rooms_per_type[r.room_type] == 1}
        self.RSS = [(r, s1.id, s2.id) for r, rt in single.items()
                    for s1, s2 in combinations([s for s in sections if s.room_type == rt], 2)]

        self.x_index = {p: i + 1 for i, p in enumerate(self.W)}
        n = len(self.sections)
        self._n = n
        self._y0 = len(self.W) + 1
        self.num_vars = len(self.W) + n * (n - 1) // 2
        self._w_of_student: dict[str, list[str]] = {}
        for g, s in self.W:
            self._w_of_student.setdefault(g, []).append(s)

    # -- index sets that are too large to materialize on big instances ----

    def SS(self) -> Iterator[tuple[str, str]]:
        return combinations(self.sections, 2)

    def GSS(self) -> Iterator[tuple[str, str, str]]:
        for g, secs in self._w_of_student.items():
            for s1, s2 in combinations(secs, 2):
                yield g, s1, s2

    def set_sizes(self) -> dict[str, int]:
        n = self._n
        return {
            "W": len(self.W), "GC": len(self.GC), "SS": n * (n - 1) // 2,
            "GSS": sum(len(v) * (len(v) - 1) // 2 for v in self._w_of_student.values()),
            "PS": len(self.PS), "PSS": len(self.PSS), "FSS": len(self.FSS),
            "FGSS": len(self.FGSS), "RSS": len(self.RSS),
        }

    # -- variables -----------------------------------------------------------

    def x(self, g: str, s: str) -> int:
        return self.x_index[g, s]

    def y(self, s: str, t: str) -> int:
        i, j = self.inst.section_index[s], self.inst.section_index[t]
        if i > j:
            i, j = j, i
        n = self._n
        return self._y0 + i * n - i * (i + 1) // 2 + (j - i - 1)

    def var_names(self) -> list[str]:
        names = [f"x[{g},{s}]" for g, s in self.W]
        names += [f"y[{s},{t}]" for s, t in self.SS()]
        return names

    def var_map_text(self) -> str:
        return "".join(f"{name} {i}\n" for i, name in enumerate(self.var_names(), 1))

    # -- constraints -----------------------------------------------------------

    @cached_property
    def forced_pairs(self) -> list[tuple[str, str]]:
        order = self.inst.section_index
        seen = set()
        for _, s1, s2 in self.RSS + self.PSS:
            seen.add((s1, s2) if order[s1] < order[s2] else (s2, s1))
        return sorted(seen, key=lambda p: (order[p[0]], order[p[1]]))

    def constraints(self, families=(1, 2, 3, 4, 5)) -> Iterator[Constraint]:
        by_course = self.inst.course_sections
        if 1 in families:
            for s, t in self.forced_pairs:
                yield Constraint(1, ((1, self.y(s, t)),), "=", 1)
        if 2 in families:
            for g, c in self.GC:
                yield Constraint(2, tuple((1, self.x(g, s)) for s in by_course[c]), "=", 1)
        if 3 in families:
            members: dict[str, list[int]] = {}
            for g, s in self.W:
                members.setdefault(s, []).append(self.x(g, s))
            for sec in self.inst.sections:
                if sec.id in members:
                    yield Constraint(3, tuple((-1, v) for v in members[sec.id]), ">=", -sec.capacity)
        if 4 in families:
            for g, p, s in self.FGSS:
                yield Constraint(4, ((1, self.x(g, p)), (-1, self.x(g, s))), ">=", 0)
        if 5 in families:
            for g, s1, s2 in self.GSS():
                yield Constraint(5, ((1, -self.x(g, s1)), (1, -self.x(g, s2)), (1, self.y(s1, s2))),
                                 ">=", 1)

    def objective_terms(self) -> list[tuple[float, int]]:
        w = self.objective.pair_weights
        ext = {s.id: s.is_extended for s in self.inst.sections}
        terms = []
        for s, t in self.SS():
            coef = w.for_pair(ext[s] + ext[t])
            if coef:
                terms.append((coef, self.y(s, t)))
        d = self.objective.weights.d
        if d:
            for g, s in sorted(self.objective.tabu_pairs, key=lambda p: self.x_index[p]):
                terms.append((d, self.x(g, s)))
        return terms

    # -- assignments -------------------------------------------------------

    def assignment_from(self, f: Sectioning) -> dict[int, int]:
        """x from the sectioning, y as the edge indicator of SCG(f)."""
        value = dict.fromkeys(range(1, self.num_vars + 1), 0)
        for g, _, s in f.assignment:
            value[self.x(g, s)] = 1
        for s, t in scg_of(self.inst, f).edges:
            value[self.y(s, t)] = 1
        return value

    def minimal_y(self, x_value: dict[int, int]) -> dict[int, int]:
        """Complete an x assignment with the smallest y allowed by constraints 1 and 5."""
        value = dict(x_value)
        for i in range(self._y0, self.num_vars + 1):
            value[i] = 0
        for s, t in self.forced_pairs:
            value[self.y(s, t)] = 1
        for g, secs in self._w_of_student.items():
            on = [s for s in secs if x_value.get(self.x(g, s))]
            for s1, s2 in combinations(on, 2):
                value[self.y(s1, s2)] = 1
        return value

    def violated(self, value: dict[int, int]) -> list[Constraint]:
        return [c for c in self.constraints() if not c.holds(value)]

    def evaluate(self, value: dict[int, int]) -> float:
        return sum(coef * value[v] for coef, v in self.objective_terms())

    def sectioning_from(self, x_value: dict[int, int]) -> Sectioning:
        """Read f off the x variables (no validity check)."""
        course_of = {s.id: s.course_id for s in self.inst.sections}
        mapping = {}
        for (g, s), i in self.x_index.items():
            if x_value.get(i):
                mapping[g, course_of[s]] = s
        return Sectioning.from_mapping(mapping)


def build_model(inst: Instance, obj: ObjectiveSpec | None = None) -> SectioningModel:
    return SectioningModel(inst, obj or ObjectiveSpec(weights=inst.edge_weights))


# -- export --------------------------------------------------------------------


class ExportError(ValueError):
    pass


def _integral(v: float, what: str) -> int:
    if float(v) != int(v):
        raise ExportError(f"{what} weight {v} is not integral; OPB/WCNF need integer weights")
    return int(v)


def _lit(lit: int) -> str:
    return f"x{lit}" if lit > 0 else f"~x{-lit}"


def _pb_row(c: Constraint) -> str:
    body = " ".join(f"{coef:+d} {_lit(lit)}" for coef, lit in c.terms)
    return f"{body} {c.op} {c.rhs} ;"


def export_model(m: SectioningModel, fmt: str = "pseudo_boolean") -> str:
    if fmt == "pseudo_boolean":
        return export_opb(m)
    if fmt == "weighted_clauses":
        return export_wcnf(m)
    raise ExportError(f"unsupported export format {fmt!r}")


def export_opb(m: SectioningModel) -> str:
    rows = [_pb_row(c) for c in m.constraints()]
    obj = [(_integral(coef, "objective"), v) for coef, v in m.objective_terms()]
    lines = [f"* #variable= {m.num_vars} #constraint= {len(rows)}",
             f"* sectioning model {m.inst.name or '<unnamed>'}; objective {m.objective.variant}",
             "* variable names are listed in the accompanying map file"]
    lines.append("min: " + " ".join(f"{coef:+d} x{v}" for coef, v in obj) + " ;")
    lines += rows
    return "\n".join(lines) + "\n"


def _at_most_k(lits: list[int], k: int, next_var: int) -> tuple[list[list[int]], int, list]:
    """Sequential-counter CNF for sum(lits) <= k; returns clauses, next free var, aux names."""
    n = len(lits)
    if n <= k:
        return [], next_var, []
    if k == 0:
        return [[-x] for x in lits], next_var, []
    aux = [[0] * (k + 1) for _ in range(n)]
    names = []
    for i in range(n - 1):
        for j in range(1, k + 1):
            aux[i][j] = next_var
            names.append((next_var, i, j))
            next_var += 1
    cl = [[-lits[0], aux[0][1]]]
    cl += [[-aux[0][j]] for j in range(2, k + 1)]
    for i in range(1, n - 1):
        cl.append([-lits[i], aux[i][1]])
        cl.append([-aux[i - 1][1], aux[i][1]])
        for j in range(2, k + 1):
            cl.append([-lits[i], -aux[i - 1][j - 1], aux[i][j]])
            cl.append([-aux[i - 1][j], aux[i][j]])
        cl.append([-lits[i], -aux[i - 1][k]])
    cl.append([-lits[n - 1], -aux[n - 2][k]])
    return cl, next_var, names


def wcnf_parts(m: SectioningModel):
    """Hard clauses, soft (weight, clause) pairs, and aux-variable names."""
    hard: list[list[int]] = []
    aux_names: list[tuple[int, str]] = []
    next_var = m.num_vars + 1
    for c in m.constraints():
        lits = [lit for _, lit in c.terms]
        if c.family in (1, 5):
            hard.append(lits)
        elif c.family == 2:
            hard.append(lits)
            hard += [[-a, -b] for a, b in combinations(lits, 2)]
        elif c.family == 3:
            clauses, next_var, names = _at_most_k(lits, -c.rhs, next_var)
            hard += clauses
            first = lits[0]
            aux_names += [(v, f"cap[{m.W[first - 1][1]},{i},{j}]") for v, i, j in names]
        elif c.family == 4:
            (_, parent), (_, child) = c.terms
            hard.append([parent, -child])
    soft = [(_integral(coef, "objective"), [-v]) for coef, v in m.objective_terms()]
    return hard, soft, aux_names, next_var - 1


def export_wcnf(m: SectioningModel) -> str:
    hard, soft, _, nvars = wcnf_parts(m)
    top = sum(w for w, _ in soft) + 1
    lines = [f"c sectioning model {m.inst.name or '<unnamed>'}; objective {m.objective.variant}",
             f"p wcnf {nvars} {len(hard) + len(soft)} {top}"]
    lines += [f"{top} " + " ".join(map(str, cl)) + " 0" for cl in hard]
    lines += [f"{w} " + " ".join(map(str, cl)) + " 0" for w, cl in soft]
    return "\n".join(lines) + "\n"


def wcnf_var_map_text(m: SectioningModel) -> str:
    _, _, aux, _ = wcnf_parts(m)
    return m.var_map_text() + "".join(f"{name} {v}\n" for v, name in aux)


# -- import ----------------------------------------------------------------------


class UnknownVariableError(ValueError):
    pass


class InfeasibleAssignmentError(ValueError):
    def __init__(self, violations: list[Violation]):
        self.violations = violations
        super().__init__("assignment is not a sectioning: "
                         + "; ".join(str(v) for v in violations[:5]))


_TOKEN = re.compile(r"^(-|~)?x(\d+)$")


def import_solution(m: SectioningModel, text: str) -> Sectioning:
    """Read a solver assignment back into a :class:`Sectioning`.

    Accepts solver ``v`` lines (``v x1 -x2 ...``) and ``name value`` lines
    where ``name`` is ``x<index>`` or a mapped name such as ``x[1MC#0,K.1]``.
    Variables left out are read as 0 only if they are y variables; every x
    variable must be given.
    """
    names = {name: i for i, name in enumerate(m.var_names(), 1)}
    value: dict[int, int] = {}

    def index_of(tok: str) -> int:
        mt = _TOKEN.match(tok)
        if mt:
            i = int(mt.group(2))
        elif tok in names:
            i = names[tok]
        else:
            raise UnknownVariableError(f"unknown variable {tok!r}")
        if not 1 <= i <= m.num_vars:
            raise UnknownVariableError(f"variable index {i} out of range")
        return i

    for raw in text.splitlines():
        line = raw.strip()
        if not line or line[0] in "c*so":
            continue
        if line.startswith("v "):
            for tok in line[2:].split():
                if tok == "0":
                    continue
                neg = tok[0] in "-~"
                value[index_of(tok.lstrip("-~") if neg else tok)] = 0 if neg else 1
            continue
        parts = line.split()
        if len(parts) != 2 or parts[1] not in ("0", "1"):
            raise ValueError(f"cannot read assignment line {raw!r}")
        value[index_of(parts[0])] = int(parts[1])

    missing = [m.W[i - 1] for i in range(1, len(m.W) + 1) if i not in value]
    if missing:
        g, s = missing[0]
        raise InfeasibleAssignmentError([Violation("unassigned variable", (g, s),
                                                   f"{len(missing)} x variables missing")])
    x_value = {i: value[i] for i in range(1, len(m.W) + 1)}
    full = m.minimal_y(x_value)
    broken = m.violated(full)
    if broken:
        violations = [_describe(m, c) for c in broken]
        raise InfeasibleAssignmentError(violations)
    f = m.sectioning_from(x_value)
    problems = validate_sectioning(m.inst, f)
    if problems:
        raise InfeasibleAssignmentError(problems)
    return f


def _describe(m: SectioningModel, c: Constraint) -> Violation:
    rules = {1: "forced edge", 2: "choose one section", 3: "capacity", 4: "family", 5: "edge link"}
    names = []
    for _, lit in c.terms:
        i = abs(lit)
        names.append(f"x[{m.W[i - 1][0]},{m.W[i - 1][1]}]" if i <= len(m.W) else f"y#{i}")
    return Violation(rules[c.family], tuple(names[:4]))
