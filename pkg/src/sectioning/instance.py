"""Problem instances: period grid, rooms, professors, courses, sections and
major-groups, plus the JSON instance document and its validator.

Students are never listed one by one. A major-group carries a size and a
course list, and :func:`expand_students` produces deterministic synthetic
students (``<group>#<ordinal>``) from it.
"""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from typing import Iterable

import jsonschema

from .weights import EdgeWeights, SoftWeights

Slot = tuple[int, int]  # (day, period)


class InstanceError(ValueError):
    """Base class for problems found while loading an instance document."""


class DocumentSyntaxError(InstanceError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")
        self.line = line
        self.column = column


class UnknownReferenceError(InstanceError):
    def __init__(self, kind: str, ref: str, owner: str):
        super().__init__(f"unknown {kind} {ref!r} referenced by {owner!r}")
        self.kind = kind
        self.ref = ref
        self.owner = owner


class InvariantViolationError(InstanceError):
    def __init__(self, violations: list["Violation"]):
        self.violations = violations
        summary = "; ".join(str(v) for v in violations[:5])
        more = f" (+{len(violations) - 5} more)" if len(violations) > 5 else ""
        super().__init__(f"invariant violation: {summary}{more}")


@dataclass(frozen=True)
class Violation:
    rule: str
    ids: tuple[str, ...] = ()
    detail: str = ""

    def __str__(self):
        ids = ", ".join(self.ids)
        text = f"{self.rule} [{ids}]"
        return f"{text}: {self.detail}" if self.detail else text


@dataclass(frozen=True)
class PeriodGrid:
    days: int = 5
    periods_per_day: int = 8
    lunch_period: int | None = None

    @property
    def teaching_periods(self) -> tuple[int, ...]:
        return tuple(t for t in range(self.periods_per_day) if t != self.lunch_period)

    def slots(self) -> list[Slot]:
        return [(d, t) for d in range(self.days) for t in self.teaching_periods]


@dataclass(frozen=True)
class Room:
    id: str
    room_type: str


@dataclass(frozen=True)
class Professor:
    id: str
    requested_day_off: int | None = None


@dataclass(frozen=True)
class Course:
    id: str


@dataclass(frozen=True)
class Section:
    id: str
    course_id: str
    capacity: int
    professor_id: str
    room_type: str
    meetings_per_week: int
    is_extended: bool = False
    parent_id: str | None = None


@dataclass(frozen=True)
class MajorGroup:
    id: str
    size: int
    required_course_ids: tuple[str, ...]


@dataclass(frozen=True)
class Student:
    id: str
    major_group_id: str
    required_course_ids: tuple[str, ...]


def block_starts(grid: PeriodGrid, length: int) -> tuple[int, ...]:
    """Start periods of a contiguous same-day block of ``length`` periods.

    With a lunch period, 2- and 3-period blocks may sit before lunch or after
    it, while 4-period blocks are only allowed before lunch.
    """
    last = grid.periods_per_day - 1
    lunch = grid.lunch_period
    starts = []
    for t in grid.teaching_periods:
        end = t + length - 1
        if lunch is None:
            ok = end <= last
        elif length >= 4:
            ok = end < lunch
        else:
            ok = end < lunch or (t > lunch and end <= last)
        if ok:
            starts.append(t)
    return tuple(starts)


@dataclass(frozen=True)
class Instance:
    grid: PeriodGrid
    rooms: tuple[Room, ...]
    professors: tuple[Professor, ...]
    courses: tuple[Course, ...]
    sections: tuple[Section, ...]
    major_groups: tuple[MajorGroup, ...]
    common_section_id: str | None = None
    edge_weights: EdgeWeights = field(default_factory=EdgeWeights)
    soft_weights: SoftWeights = field(default_factory=SoftWeights)
    name: str = ""
    # Known zero-penalty timetable, recorded by the generator for test presets.
    planted: tuple[tuple[str, tuple[Slot, ...]], ...] | None = None

    @cached_property
    def section_map(self) -> dict[str, Section]:
        return {s.id: s for s in self.sections}

    @cached_property
    def section_index(self) -> dict[str, int]:
        return {s.id: i for i, s in enumerate(self.sections)}

    @cached_property
    def course_sections(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {c.id: [] for c in self.courses}
        for s in self.sections:
            out.setdefault(s.course_id, []).append(s.id)
        return {c: tuple(v) for c, v in out.items()}

    @cached_property
    def children(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = defaultdict(list)
        for s in self.sections:
            if s.parent_id is not None:
                out[s.parent_id].append(s.id)
        return {p: tuple(v) for p, v in out.items()}

    @cached_property
    def rooms_per_type(self) -> Counter:
        return Counter(r.room_type for r in self.rooms)

    @cached_property
    def professor_map(self) -> dict[str, Professor]:
        return {p.id: p for p in self.professors}

    @cached_property
    def group_map(self) -> dict[str, MajorGroup]:
        return {m.id: m for m in self.major_groups}

    @cached_property
    def students(self) -> tuple[Student, ...]:
        return tuple(expand_students(self))

    @cached_property
    def student_map(self) -> dict[str, Student]:
        return {g.id: g for g in self.students}

    @property
    def planted_slots(self) -> dict[str, tuple[Slot, ...]] | None:
        return None if self.planted is None else dict(self.planted)


def expand_students(inst: Instance) -> list[Student]:
    students = []
    for m in inst.major_groups:
        for i in range(m.size):
            students.append(Student(f"{m.id}#{i}", m.id, m.required_course_ids))
    return students


def course_demand(inst: Instance) -> Counter:
    demand: Counter = Counter()
    for m in inst.major_groups:
        for c in m.required_course_ids:
            demand[c] += m.size
    return demand


def _duplicates(kind: str, ids: Iterable[str]) -> list[Violation]:
    counts = Counter(ids)
    return [Violation("duplicate id", (i,), f"{kind} id used {n} times")
            for i, n in counts.items() if n > 1]


def validate(inst: Instance) -> list[Violation]:
    """Return every broken invariant as a :class:`Violation`; empty means valid."""
    out: list[Violation] = []
    grid = inst.grid
    if grid.days < 1:
        out.append(Violation("grid days", (), f"days={grid.days}"))
    if grid.periods_per_day < 1:
        out.append(Violation("grid periods", (), f"periods_per_day={grid.periods_per_day}"))
    if grid.lunch_period is not None and not 0 <= grid.lunch_period < grid.periods_per_day:
        out.append(Violation("lunch range", (), f"lunch_period={grid.lunch_period}"))

    out += _duplicates("room", (r.id for r in inst.rooms))
    out += _duplicates("professor", (p.id for p in inst.professors))
    out += _duplicates("course", (c.id for c in inst.courses))
    out += _duplicates("section", (s.id for s in inst.sections))
    out += _duplicates("major-group", (m.id for m in inst.major_groups))

    for p in inst.professors:
        if p.requested_day_off is not None and not 0 <= p.requested_day_off < grid.days:
            out.append(Violation("day off range", (p.id,), f"day {p.requested_day_off}"))

    course_ids = {c.id for c in inst.courses}
    sections = inst.section_map
    for s in inst.sections:
        if s.course_id not in course_ids:
            out.append(Violation("unknown course", (s.id, s.course_id)))
        if s.professor_id not in inst.professor_map:
            out.append(Violation("unknown professor", (s.id, s.professor_id)))
        if inst.rooms_per_type.get(s.room_type, 0) == 0:
            out.append(Violation("room type empty", (s.id, s.room_type)))
        if s.capacity < 1:
            out.append(Violation("capacity", (s.id,), f"capacity={s.capacity}"))
        if s.meetings_per_week < 1:
            out.append(Violation("meetings", (s.id,), f"meetings_per_week={s.meetings_per_week}"))
        if s.is_extended:
            if not 2 <= s.meetings_per_week <= 4:
                out.append(Violation("extended length", (s.id,),
                                     f"extended block of {s.meetings_per_week} periods"))
            elif not block_starts(grid, s.meetings_per_week):
                out.append(Violation("extended window", (s.id,),
                                     f"no legal start for a {s.meetings_per_week}-period block"))
        elif s.meetings_per_week > len(grid.slots()):
            out.append(Violation("meetings", (s.id,), "more meetings than teaching slots"))
        if s.parent_id is not None:
            parent = sections.get(s.parent_id)
            if parent is None:
                out.append(Violation("unknown parent", (s.id, s.parent_id)))
                continue
            if parent.parent_id is not None:
                out.append(Violation("grandchild", (parent.parent_id, parent.id, s.id)))
            if parent.capacity != s.capacity:
                out.append(Violation("family capacity mismatch", (parent.id, s.id),
                                     f"{parent.capacity} != {s.capacity}"))
            if parent.course_id == s.course_id:
                out.append(Violation("family same course", (parent.id, s.id)))

    child_parent_courses: dict[str, set[str]] = defaultdict(set)
    for s in inst.sections:
        if s.parent_id is not None and s.parent_id in sections:
            child_parent_courses[s.course_id].add(sections[s.parent_id].course_id)
    for m in inst.major_groups:
        if m.size < 1:
            out.append(Violation("group size", (m.id,), f"size={m.size}"))
        required = set(m.required_course_ids)
        for c in m.required_course_ids:
            if c not in course_ids:
                out.append(Violation("unknown course", (m.id, c)))
            for pc in sorted(child_parent_courses.get(c, ())):
                if pc not in required:
                    out.append(Violation("missing parent course", (m.id, c, pc),
                                         "child course required without its parent course"))

    capacity: Counter = Counter()
    for s in inst.sections:
        capacity[s.course_id] += s.capacity
    for c, need in sorted(course_demand(inst).items()):
        if capacity[c] < need:
            out.append(Violation("insufficient capacity", (c,), f"{capacity[c]} < {need}"))

    if inst.common_section_id is not None:
        common = sections.get(inst.common_section_id)
        if common is None:
            out.append(Violation("unknown common section", (inst.common_section_id,)))
        else:
            total = sum(m.size for m in inst.major_groups)
            if common.capacity < total:
                out.append(Violation("common capacity", (common.id,), f"{common.capacity} < {total}"))
            if len(inst.course_sections.get(common.course_id, ())) != 1:
                out.append(Violation("common course sections", (common.id, common.course_id),
                                     "the common course must have exactly one section"))
            for m in inst.major_groups:
                if common.course_id not in m.required_course_ids:
                    out.append(Violation("common not required", (m.id, common.course_id)))

    if inst.planted is not None:
        out += _check_planted(inst)
    return out


def _check_planted(inst: Instance) -> list[Violation]:
    out = []
    legal = set(inst.grid.slots())
    planted = dict(inst.planted)
    for s in inst.sections:
        slots = planted.get(s.id)
        if slots is None:
            out.append(Violation("planted incomplete", (s.id,)))
            continue
        if len(set(slots)) != s.meetings_per_week or not set(slots) <= legal:
            out.append(Violation("planted slots", (s.id,)))
    return out


# -- documents ---------------------------------------------------------------

_SCHEMA = None


def instance_schema() -> dict:
    global _SCHEMA
    if _SCHEMA is None:
        text = resources.files(__package__).joinpath("instance.schema.json").read_text("utf-8")
        _SCHEMA = json.loads(text)
    return _SCHEMA


def to_dict(inst: Instance) -> dict:
    def section(s: Section) -> dict:
        d = {"id": s.id, "course_id": s.course_id, "capacity": s.capacity,
             "professor_id": s.professor_id, "room_type": s.room_type,
             "meetings_per_week": s.meetings_per_week, "is_extended": s.is_extended}
        if s.parent_id is not None:
            d["parent_id"] = s.parent_id
        return d

    def professor(p: Professor) -> dict:
        d = {"id": p.id}
        if p.requested_day_off is not None:
            d["requested_day_off"] = p.requested_day_off
        return d

    grid = {"days": inst.grid.days, "periods_per_day": inst.grid.periods_per_day}
    if inst.grid.lunch_period is not None:
        grid["lunch_period"] = inst.grid.lunch_period
    doc = {
        "name": inst.name,
        "grid": grid,
        "rooms": [{"id": r.id, "room_type": r.room_type} for r in inst.rooms],
        "professors": [professor(p) for p in inst.professors],
        "courses": [{"id": c.id} for c in inst.courses],
        "sections": [section(s) for s in inst.sections],
        "major_groups": [{"id": m.id, "size": m.size,
                          "required_course_ids": list(m.required_course_ids)}
                         for m in inst.major_groups],
        "weights": {"edge": inst.edge_weights.to_dict(), "soft": inst.soft_weights.to_dict()},
    }
    if inst.common_section_id is not None:
        doc["common_section_id"] = inst.common_section_id
    if inst.planted is not None:
        doc["planted"] = {sid: [list(x) for x in slots] for sid, slots in inst.planted}
    return doc


def serialize_instance(inst: Instance) -> str:
    """Canonical document text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(to_dict(inst), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def from_dict(doc: dict) -> Instance:
    """Build an Instance from an already schema-checked document dict.

    Cross references are resolved here; invariants are not checked.
    """
    g = doc["grid"]
    grid = PeriodGrid(g["days"], g["periods_per_day"], g.get("lunch_period"))
    rooms = tuple(Room(r["id"], r["room_type"]) for r in doc["rooms"])
    profs = tuple(Professor(p["id"], p.get("requested_day_off")) for p in doc["professors"])
    courses = tuple(Course(c["id"]) for c in doc["courses"])
    sections = tuple(
        Section(s["id"], s["course_id"], s["capacity"], s["professor_id"], s["room_type"],
                s["meetings_per_week"], s.get("is_extended", False), s.get("parent_id"))
        for s in doc["sections"])
    groups = tuple(MajorGroup(m["id"], m["size"], tuple(m["required_course_ids"]))
                   for m in doc["major_groups"])
    weights = doc.get("weights", {})
    planted = doc.get("planted")
    if planted is not None:
        planted = tuple(sorted((sid, tuple(sorted(tuple(x) for x in slots)))
                               for sid, slots in planted.items()))
    inst = Instance(
        grid=grid, rooms=rooms, professors=profs, courses=courses, sections=sections,
        major_groups=groups, common_section_id=doc.get("common_section_id"),
        edge_weights=EdgeWeights(**weights.get("edge", {})),
        soft_weights=SoftWeights(**weights.get("soft", {})),
        name=doc.get("name", ""), planted=planted)
    _check_references(inst)
    return inst


def _check_references(inst: Instance) -> None:
    course_ids = {c.id for c in inst.courses}
    section_ids = {s.id for s in inst.sections}
    for s in inst.sections:
        if s.course_id not in course_ids:
            raise UnknownReferenceError("course", s.course_id, s.id)
        if s.professor_id not in inst.professor_map:
            raise UnknownReferenceError("professor", s.professor_id, s.id)
        if s.parent_id is not None and s.parent_id not in section_ids:
            raise UnknownReferenceError("section", s.parent_id, s.id)
    for m in inst.major_groups:
        for c in m.required_course_ids:
            if c not in course_ids:
                raise UnknownReferenceError("course", c, m.id)
    if inst.common_section_id is not None and inst.common_section_id not in section_ids:
        raise UnknownReferenceError("section", inst.common_section_id, "common_section_id")
    if inst.planted is not None:
        for sid, _ in inst.planted:
            if sid not in section_ids:
                raise UnknownReferenceError("section", sid, "planted")


def parse_instance(text: str, check: bool = True) -> Instance:
    """Parse an instance document.

    Raises :class:`DocumentSyntaxError` for malformed JSON or schema
    mismatches, :class:`UnknownReferenceError` for dangling ids and, when
    ``check`` is true, :class:`InvariantViolationError` listing every broken
    invariant.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentSyntaxError(exc.msg, exc.lineno, exc.colno) from None
    try:
        jsonschema.validate(doc, instance_schema())
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise DocumentSyntaxError(f"schema: {exc.message} at {path}") from None
    inst = from_dict(doc)
    if check:
        violations = validate(inst)
        if violations:
            raise InvariantViolationError(violations)
    return inst


def load_instance(path, check: bool = True) -> Instance:
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh.read(), check=check)
