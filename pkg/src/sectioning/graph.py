"""Sectionings and the student conflict graph (SCG) they induce."""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from typing import Mapping

from .instance import Instance, Violation
from .weights import EdgeWeights

PROFESSOR = "professor"
SINGLE_ROOM = "single_room"
STUDENT = "student"


class InvalidSectioningError(ValueError):
    def __init__(self, violations: list[Violation]):
        self.violations = violations
        head = "; ".join(str(v) for v in violations[:5])
        super().__init__(f"invalid sectioning: {head}")


@dataclass(frozen=True)
class Sectioning:
    """Assignment of every (student, required course) pair to one section.

    Stored as the canonically sorted tuple of ``(student, course, section)``
    triples, so equal sectionings compare and serialize identically.
    """

    assignment: tuple[tuple[str, str, str], ...]

    @classmethod
    def from_mapping(cls, mapping: Mapping[tuple[str, str], str]) -> "Sectioning":
        return cls(tuple(sorted((g, c, s) for (g, c), s in mapping.items())))

    @cached_property
    def as_dict(self) -> dict[tuple[str, str], str]:
        return {(g, c): s for g, c, s in self.assignment}

    @cached_property
    def schedules(self) -> dict[str, frozenset[str]]:
        out: dict[str, set[str]] = defaultdict(set)
        for g, _, s in self.assignment:
            out[g].add(s)
        return {g: frozenset(v) for g, v in out.items()}

    @cached_property
    def enrollment(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = defaultdict(list)
        for g, _, s in self.assignment:
            out[s].append(g)
        return {s: tuple(v) for s, v in out.items()}

    def section_of(self, student: str, course: str) -> str:
        return self.as_dict[student, course]

    def to_document(self) -> str:
        return json.dumps({"assignments": [list(t) for t in self.assignment]}, indent=1) + "\n"

    @classmethod
    def from_document(cls, text: str) -> "Sectioning":
        doc = json.loads(text)
        return cls(tuple(sorted(tuple(t) for t in doc["assignments"])))


@dataclass(frozen=True)
class ConflictGraph:
    """Sections as vertices; each edge is an index-ordered pair with its kinds.

    A pair that is both a professor edge and a student edge is still a single
    edge; the kinds are kept for diagnostics only.
    """

    vertices: tuple[str, ...]
    edges: Mapping[tuple[str, str], frozenset[str]]

    @cached_property
    def adjacency(self) -> dict[str, frozenset[str]]:
        adj: dict[str, set[str]] = {v: set() for v in self.vertices}
        for s, t in self.edges:
            adj[s].add(t)
            adj[t].add(s)
        return {v: frozenset(n) for v, n in adj.items()}

    def has_edge(self, s: str, t: str) -> bool:
        return (s, t) in self.edges or (t, s) in self.edges

    def kinds(self, s: str, t: str) -> frozenset[str]:
        return self.edges.get((s, t)) or self.edges.get((t, s)) or frozenset()

    def edge_list_text(self) -> str:
        lines = [f"{s} {t} {','.join(sorted(k))}" for (s, t), k in self.edges.items()]
        return "\n".join(lines) + ("\n" if lines else "")


def _ordered(inst: Instance, s: str, t: str) -> tuple[str, str]:
    idx = inst.section_index
    return (s, t) if idx[s] < idx[t] else (t, s)


def _sorted_edges(inst: Instance, edges: dict[tuple[str, str], set[str]]):
    idx = inst.section_index
    return {k: frozenset(edges[k]) for k in sorted(edges, key=lambda e: (idx[e[0]], idx[e[1]]))}


def _base_edges(inst: Instance) -> dict[tuple[str, str], set[str]]:
    edges: dict[tuple[str, str], set[str]] = defaultdict(set)
    by_prof: dict[str, list[str]] = defaultdict(list)
    by_single_room: dict[str, list[str]] = defaultdict(list)
    for s in inst.sections:
        by_prof[s.professor_id].append(s.id)
        if inst.rooms_per_type.get(s.room_type, 0) == 1:
            by_single_room[s.room_type].append(s.id)
    for group in by_prof.values():
        for s, t in combinations(group, 2):
            edges[_ordered(inst, s, t)].add(PROFESSOR)
    for group in by_single_room.values():
        for s, t in combinations(group, 2):
            edges[_ordered(inst, s, t)].add(SINGLE_ROOM)
    return edges


def base_scg(inst: Instance) -> ConflictGraph:
    """Professor and single-room edges only; these exist before sectioning."""
    return ConflictGraph(tuple(s.id for s in inst.sections), _sorted_edges(inst, _base_edges(inst)))


def scg_of(inst: Instance, f: Sectioning) -> ConflictGraph:
    violations = validate_sectioning(inst, f)
    if violations:
        raise InvalidSectioningError(violations)
    edges = _base_edges(inst)
    for sched in f.schedules.values():
        for s, t in combinations(sched, 2):
            edges[_ordered(inst, s, t)].add(STUDENT)
    return ConflictGraph(tuple(s.id for s in inst.sections), _sorted_edges(inst, edges))


def edge_count(g: ConflictGraph) -> int:
    return len(g.edges)


def pair_weight(inst: Instance, w: EdgeWeights, s: str, t: str) -> float:
    sm = inst.section_map
    return w.for_pair(int(sm[s].is_extended) + int(sm[t].is_extended))


def weighted_edge_count(g: ConflictGraph, inst: Instance, w: EdgeWeights | None = None) -> float:
    w = w or inst.edge_weights
    return sum(pair_weight(inst, w, s, t) for s, t in g.edges)


def validate_sectioning(inst: Instance, f: Sectioning) -> list[Violation]:
    out: list[Violation] = []
    sm = inst.section_map
    students = inst.student_map
    assigned = f.as_dict
    if len(assigned) != len(f.assignment):
        dup = [k for k, n in Counter((g, c) for g, c, _ in f.assignment).items() if n > 1]
        for g, c in dup:
            out.append(Violation("duplicate", (g, c), "pair assigned more than once"))
    for g in inst.students:
        for c in g.required_course_ids:
            if (g.id, c) not in assigned:
                out.append(Violation("incomplete", (g.id, c)))
    for (g, c), s in assigned.items():
        student = students.get(g)
        if student is None:
            out.append(Violation("unknown student", (g,)))
            continue
        if c not in student.required_course_ids:
            out.append(Violation("unexpected course", (g, c)))
        sec = sm.get(s)
        if sec is None:
            out.append(Violation("unknown section", (g, s)))
        elif sec.course_id != c:
            out.append(Violation("wrong course", (g, c, s), f"{s} belongs to {sec.course_id}"))
    for s, members in f.enrollment.items():
        sec = sm.get(s)
        if sec is not None and len(members) > sec.capacity:
            out.append(Violation("capacity", (s,), f"{len(members)} > {sec.capacity}"))
    for g, sched in f.schedules.items():
        for s in sorted(sched, key=lambda x: inst.section_index.get(x, -1)):
            sec = sm.get(s)
            if sec is not None and sec.parent_id is not None and sec.parent_id not in sched:
                out.append(Violation("family", (g, s, sec.parent_id),
                                     "child assigned without its parent"))
    return out


def divisions(inst: Instance, f: Sectioning) -> list[tuple[str, ...]]:
    """Partition students into blocks with identical section schedules.

    Blocks are additionally split by major-group, which only matters when two
    groups happen to share the same course list.
    """
    violations = validate_sectioning(inst, f)
    if violations:
        raise InvalidSectioningError(violations)
    blocks: dict[tuple[str, frozenset[str]], list[str]] = {}
    for g in inst.students:
        key = (g.major_group_id, f.schedules.get(g.id, frozenset()))
        blocks.setdefault(key, []).append(g.id)
    out = [tuple(b) for b in blocks.values()]
    for block in out:
        assert len({inst.student_map[g].major_group_id for g in block}) == 1
    return out
