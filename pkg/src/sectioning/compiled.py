"""Integer-indexed view of an instance for the search routines.

Sections, courses and students become dense ints so that inner loops work
on lists and ints; a section pair ``(s, t)`` with ``s < t`` is keyed as
``s * n + t``.
"""

from __future__ import annotations

from .graph import Sectioning, _base_edges
from .instance import Instance
from .weights import EdgeWeights


class Compiled:
    def __init__(self, inst: Instance):
        self.inst = inst
        self.section_ids = [s.id for s in inst.sections]
        self.n = len(self.section_ids)
        sidx = inst.section_index
        self.course_ids = [c.id for c in inst.courses]
        cidx = {c: i for i, c in enumerate(self.course_ids)}
        self.course_index = cidx
        self.course_of = [cidx[s.course_id] for s in inst.sections]
        self.cap = [s.capacity for s in inst.sections]
        self.extended = [s.is_extended for s in inst.sections]
        self.parent = [sidx[s.parent_id] if s.parent_id is not None else -1 for s in inst.sections]
        self.course_sections = [[] for _ in self.course_ids]
        for i, c in enumerate(self.course_of):
            self.course_sections[c].append(i)
        # child_courses[c]: courses containing a section whose parent lies in course c
        self.child_courses: list[set[int]] = [set() for _ in self.course_ids]
        for i, p in enumerate(self.parent):
            if p >= 0:
                self.child_courses[self.course_of[p]].add(self.course_of[i])
        self.is_child_course = [any(self.parent[s] >= 0 for s in secs) for secs in self.course_sections]

        self.student_ids = [g.id for g in inst.students]
        self.student_group = [g.major_group_id for g in inst.students]
        self.student_courses = [tuple(cidx[c] for c in g.required_course_ids) for g in inst.students]
        self.student_index = {g: i for i, g in enumerate(self.student_ids)}

        self.base_keys = {self.key(sidx[s], sidx[t]) for s, t in _base_edges(inst)}

    def key(self, s: int, t: int) -> int:
        return s * self.n + t if s < t else t * self.n + s

    def unkey(self, k: int) -> tuple[int, int]:
        return divmod(k, self.n)

    def weight_table(self, w: EdgeWeights) -> "PairWeights":
        return PairWeights(self, w)

    # -- conversions -------------------------------------------------------

    def to_sectioning(self, assign: list[dict[int, int]]) -> Sectioning:
        triples = []
        for g, held in enumerate(assign):
            gid = self.student_ids[g]
            for c, s in held.items():
                triples.append((gid, self.course_ids[c], self.section_ids[s]))
        return Sectioning(tuple(sorted(triples)))

    def from_sectioning(self, f: Sectioning) -> list[dict[int, int]]:
        assign: list[dict[int, int]] = [dict() for _ in self.student_ids]
        sidx = self.inst.section_index
        for g, c, s in f.assignment:
            assign[self.student_index[g]][self.course_index[c]] = sidx[s]
        return assign


class PairWeights:
    def __init__(self, cm: Compiled, w: EdgeWeights):
        self._table = (w.a, w.b, w.c)
        self._ext = cm.extended
        self._n = cm.n

    def __call__(self, key: int) -> float:
        s, t = divmod(key, self._n)
        return self._table[self._ext[s] + self._ext[t]]


def compile_instance(inst: Instance) -> Compiled:
    # Instances are immutable, so the compiled view is memoized on the object.
    cm = inst.__dict__.get("_compiled")
    if cm is None:
        cm = Compiled(inst)
        inst.__dict__["_compiled"] = cm
    return cm
