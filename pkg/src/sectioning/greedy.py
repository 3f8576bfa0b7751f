"""Greedy chain sectioning.

Students are visited as a chain: each next student is an unenrolled one
closest (by symmetric difference of course lists) to the previous one. The
new student copies every still-open section of the predecessor that it also
needs, then picks the remaining sections to add as few new conflict-graph
edges as possible.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .compiled import Compiled, compile_instance
from .graph import Sectioning
from .instance import Instance, Student


class InfeasibleSectioningError(RuntimeError):
    def __init__(self, student: str, course: str):
        super().__init__(f"no open section of course {course!r} left for student {student!r}")
        self.student = student
        self.course = course


@dataclass
class GreedyTrace:
    order: list[str] = field(default_factory=list)
    copied: list[int] = field(default_factory=list)
    fresh: list[int] = field(default_factory=list)
    edges: list[int] = field(default_factory=list)

    def to_text(self) -> str:
        rows = ["student\tcopied\tfresh\tedges"]
        rows += [f"{g}\t{c}\t{f}\t{e}" for g, c, f, e in
                 zip(self.order, self.copied, self.fresh, self.edges)]
        return "\n".join(rows) + "\n"


def student_distance(g1: Student, g2: Student) -> int:
    return len(set(g1.required_course_ids) ^ set(g2.required_course_ids))


class _Greedy:
    def __init__(self, cm: Compiled, rng: random.Random):
        self.cm = cm
        self.rng = rng
        self.edges = set(cm.base_keys)
        self.load = [0] * cm.n
        self.assign: list[dict[int, int] | None] = [None] * len(cm.student_ids)

    def is_open(self, s: int) -> bool:
        return self.load[s] < self.cm.cap[s]

    def new_edges(self, s: int, held) -> int:
        key, edges = self.cm.key, self.edges
        return sum(1 for u in held if key(s, u) not in edges)

    def pick(self, options: list, cost) -> object:
        """Minimum cost, then lowest load, then a seeded random choice."""
        scored = [(cost(o), self.load[o if isinstance(o, int) else o[0]], o) for o in options]
        best = min(x[:2] for x in scored)
        ties = [o for c, ld, o in scored if (c, ld) == best]
        return ties[0] if len(ties) == 1 else self.rng.choice(ties)

    def family_completion(self, s: int, need: set[int], held: dict[int, int], smart: bool):
        """Child sections to take alongside ``s``; None if some needed child is full."""
        cm = self.cm
        chosen: list[int] = []
        members = list(held.values()) + [s]
        for c2 in sorted(cm.child_courses[cm.course_of[s]]):
            if c2 not in need or c2 in held:
                continue
            opts = [t for t in cm.course_sections[c2]
                    if cm.parent[t] in (s, -1) and self.is_open(t)]
            if not opts:
                return None
            t = (self.pick(opts, lambda t: self.new_edges(t, members)) if smart
                 else self.rng.choice(opts))
            chosen.append(t)
            members.append(t)
        return chosen

    def enroll(self, h: int, g: int | None) -> tuple[int, int]:
        cm = self.cm
        need = set(cm.student_courses[h])
        held: dict[int, int] = {}
        if g is not None:
            prev = self.assign[g]
            for s in sorted(prev.values(), key=lambda s: (cm.parent[s] >= 0, s)):
                c = cm.course_of[s]
                if c not in need or not self.is_open(s):
                    continue
                p = cm.parent[s]
                if p >= 0 and held.get(cm.course_of[p]) != p:
                    continue
                held[c] = s
            # A copied parent is useless if a needed child course cannot follow it.
            for c, s in sorted(held.items()):
                if held.get(c) != s or cm.parent[s] >= 0:
                    continue
                if self.family_completion(s, need, held, smart=False) is None:
                    del held[c]
                    for c2, t in list(held.items()):
                        if cm.parent[t] == s:
                            del held[c2]
        copied = len(held)

        smart = g is not None
        todo = sorted(need - held.keys(), key=lambda c: (cm.is_child_course[c], c))
        for c in todo:
            if c in held:
                continue
            members = list(held.values())
            options = []
            for s in cm.course_sections[c]:
                if not self.is_open(s):
                    continue
                p = cm.parent[s]
                if p >= 0 and held.get(cm.course_of[p]) != p:
                    continue
                kids = self.family_completion(s, need, held, smart)
                if kids is None:
                    continue
                options.append((s, tuple(kids)))
            if not options:
                raise InfeasibleSectioningError(cm.student_ids[h], cm.course_ids[c])

            def unit_cost(opt):
                s, kids = opt
                unit = [s, *kids]
                total = 0
                for i, x in enumerate(unit):
                    total += self.new_edges(x, members + unit[:i])
                return total

            s, kids = self.pick(options, unit_cost) if smart else self.rng.choice(options)
            held[c] = s
            for t in kids:
                held[cm.course_of[t]] = t

        sections = list(held.values())
        for i, s in enumerate(sections):
            self.load[s] += 1
            for u in sections[:i]:
                self.edges.add(cm.key(s, u))
        self.assign[h] = held
        return copied, len(held) - copied


def greedy_section(inst: Instance, seed: int = 0) -> tuple[Sectioning, GreedyTrace]:
    cm = compile_instance(inst)
    rng = random.Random(seed)
    run = _Greedy(cm, rng)
    trace = GreedyTrace()
    n_students = len(cm.student_ids)
    if n_students == 0:
        return Sectioning(()), trace

    groups = [m.id for m in inst.major_groups]
    courses = {m.id: set(m.required_course_ids) for m in inst.major_groups}
    dist = {a: {b: len(courses[a] ^ courses[b]) for b in groups} for a in groups}
    waiting: dict[str, list[int]] = {m: [] for m in groups}
    for i, grp in enumerate(cm.student_group):
        waiting[grp].append(i)

    def take(grp: str, k: int) -> int:
        lst = waiting[grp]
        lst[k], lst[-1] = lst[-1], lst[k]
        return lst.pop()

    first = rng.randrange(n_students)
    grp = cm.student_group[first]
    current = take(grp, waiting[grp].index(first))
    prev = None
    while True:
        copied, fresh = run.enroll(current, prev)
        trace.order.append(cm.student_ids[current])
        trace.copied.append(copied)
        trace.fresh.append(fresh)
        trace.edges.append(len(run.edges))
        prev = current
        here = cm.student_group[current]
        live = [m for m in groups if waiting[m]]
        if not live:
            break
        best = min(dist[here][m] for m in live)
        ties = [m for m in live if dist[here][m] == best]
        r = rng.randrange(sum(len(waiting[m]) for m in ties))
        for m in ties:
            if r < len(waiting[m]):
                current = take(m, r)
                break
            r -= len(waiting[m])

    return cm.to_sectioning(run.assign), trace
