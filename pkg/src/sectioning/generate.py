"""Synthetic instance presets.

The four benchmark presets are built to an exact section count (256, 339,
352 and 372). ``tiny`` is small enough for exhaustive sectioning search and
carries a planted zero-penalty timetable.
"""

from __future__ import annotations

import math
import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace

from .instance import (Course, Instance, MajorGroup, PeriodGrid, Professor, Room,
                       Section, block_starts, validate)

MAJORS = ("MC", "SC", "EX", "ME", "NA", "LG", "EE", "CS")


@dataclass(frozen=True)
class PresetSpec:
    target_sections: int
    majors: int
    years: int = 4
    group_size: tuple[int, int] = (14, 24)
    retakes: int = 0
    lab_share: float = 0.4
    workshop_share: float = 0.3
    shared_major_course: float = 0.6
    base_capacity: int = 20
    max_prof_meetings: int = 14
    lecture_meetings: tuple[int, ...] = (2, 3, 3, 4)


PRESETS: dict[str, PresetSpec] = {
    "easy": PresetSpec(256, majors=5, group_size=(26, 38), lab_share=0.3, workshop_share=0.2),
    "medium": PresetSpec(339, majors=6, group_size=(26, 38), retakes=2),
    "medium2": PresetSpec(352, majors=6, group_size=(28, 42), retakes=4, lab_share=0.5),
    "hard": PresetSpec(372, majors=7, group_size=(24, 36), retakes=4, lab_share=0.5,
                       workshop_share=0.45),
}
PRESET_NAMES = tuple(PRESETS) + ("tiny",)

GRID = PeriodGrid(days=5, periods_per_day=8, lunch_period=4)


@dataclass
class _CourseDraft:
    id: str
    meetings: int
    extended: bool
    room_type: str
    dept: str
    year: int = 0
    parent_course: str | None = None
    children: list[str] = field(default_factory=list)


def generate_instance(preset: str, seed: int, **overrides) -> Instance:
    """Deterministic instance for ``(preset, seed)``.

    ``overrides`` replace fields of the preset's :class:`PresetSpec`
    (e.g. ``target_sections=120``); they are ignored for ``tiny``.
    """
    if preset == "tiny":
        return _tiny(seed)
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}; expected one of {', '.join(PRESET_NAMES)}")
    spec = replace(PRESETS[preset], **overrides) if overrides else PRESETS[preset]
    rng = random.Random(f"{preset}:{seed}")
    inst = _build(spec, rng, name=f"{preset}-{seed}")
    problems = validate(inst)
    assert not problems, problems
    return inst


def _build(spec: PresetSpec, rng: random.Random, name: str) -> Instance:
    courses: dict[str, _CourseDraft] = {}

    def add(draft: _CourseDraft) -> _CourseDraft:
        courses[draft.id] = draft
        return draft

    add(_CourseDraft("COMMON", 1, False, "hall", "common"))
    majors = MAJORS[:spec.majors]
    groups: list[tuple[str, list[str]]] = []
    for y in range(1, spec.years + 1):
        core = [add(_CourseDraft(f"C{y}0{k}", 3, False, "lecture", "core", y)) for k in (1, 2)]
        lab = add(_CourseDraft(f"C{y}01L", 2, True, "lab", "core", y,
                               parent_course=core[0].id))
        core[0].children.append(lab.id)
        own: dict[str, list[str]] = {}
        for mj in majors:
            ids = []
            for k in (1, 2, 3):
                c = add(_CourseDraft(f"{mj}{y}{k}", rng.choice(spec.lecture_meetings), False,
                                     "lecture", mj, y))
                ids.append(c.id)
                if k == 1 and rng.random() < spec.lab_share:
                    child = add(_CourseDraft(f"{c.id}L", 3, True, "lab", mj, y,
                                             parent_course=c.id))
                    c.children.append(child.id)
                    ids.append(child.id)
            if rng.random() < spec.workshop_share:
                length, rtype = rng.choice(((4, "computer"), (3, "computer"), (2, "simulator")))
                ids.append(add(_CourseDraft(f"{mj}{y}W", length, True, rtype, mj, y)).id)
            own[mj] = ids
        for i, mj in enumerate(majors):
            req = ["COMMON", core[0].id, lab.id, core[1].id] + own[mj]
            neighbour = majors[i - 1]
            if neighbour != mj and rng.random() < spec.shared_major_course:
                req.append(f"{neighbour}{y}3")
            groups.append((f"{y}{mj}", req))

    sizes = {gid: rng.randint(*spec.group_size) for gid, _ in groups}
    seen = {frozenset(req) for _, req in groups}
    for r in range(spec.retakes):
        y = rng.randint(1, spec.years)
        pool = [c for c in courses.values() if c.parent_course is None and c.year == y]
        picks = rng.sample(pool, k=min(len(pool), rng.randint(3, 5)))
        req = ["COMMON"]
        for c in picks:
            req.append(c.id)
            req.extend(c.children)
        if frozenset(req) in seen:
            continue
        seen.add(frozenset(req))
        gid = f"R{r + 1:02d}"
        groups.append((gid, req))
        sizes[gid] = 1

    demand: Counter = Counter()
    for gid, req in groups:
        for c in req:
            demand[c] += sizes[gid]
    total_students = sum(sizes.values())

    # Family units: a parent course together with its child courses.
    units = [c for c in courses.values() if c.parent_course is None and c.id != "COMMON"]
    cap = spec.base_capacity
    while True:
        count = {c.id: max(1, math.ceil(demand[c.id] / cap)) for c in units}
        total = 1 + sum(n * (1 + len(courses[u].children)) for u, n in count.items())
        if total <= spec.target_sections:
            break
        cap += 1
    remaining = spec.target_sections - total
    while remaining > 0:
        fits = [c for c in units if 1 + len(c.children) <= remaining]
        if not fits:
            break
        best = max(fits, key=lambda c: (demand[c.id] / (count[c.id] * cap), c.id))
        count[best.id] += 1
        remaining -= 1 + len(best.children)

    sections: list[Section] = [Section("COMMON.01", "COMMON", total_students, "", "hall", 1)]
    for c in units:
        for k in range(1, count[c.id] + 1):
            sid = f"{c.id}.{k:02d}"
            sections.append(Section(sid, c.id, cap, "", c.room_type, c.meetings, c.extended))
            for child_id in c.children:
                child = courses[child_id]
                sections.append(Section(f"{child_id}.{k:02d}", child_id, cap, "", child.room_type,
                                        child.meetings, child.extended, parent_id=sid))

    sections, professors = _staff(sections, courses, spec.max_prof_meetings, rng)
    rooms = _rooms(sections)
    used = {s.course_id for s in sections}
    return Instance(
        grid=GRID,
        rooms=tuple(rooms),
        professors=tuple(professors),
        courses=tuple(Course(c) for c in courses if c in used),
        sections=tuple(sections),
        major_groups=tuple(MajorGroup(gid, sizes[gid], tuple(req)) for gid, req in groups),
        common_section_id="COMMON.01",
        name=name,
    )


def _staff(sections: list[Section], courses: dict[str, _CourseDraft], max_meetings: int,
           rng: random.Random) -> tuple[list[Section], list[Professor]]:
    by_dept: dict[str, list[str]] = defaultdict(list)
    load: Counter = Counter()
    staffed = []
    for s in sections:
        dept = courses[s.course_id].dept
        pool = [p for p in by_dept[dept] if load[p] + s.meetings_per_week <= max_meetings]
        if pool and rng.random() < 0.85:
            prof = min(pool, key=lambda p: (load[p], p))
        else:
            prof = f"P{dept}{len(by_dept[dept]) + 1:02d}"
            by_dept[dept].append(prof)
        load[prof] += s.meetings_per_week
        staffed.append(replace(s, professor_id=prof))
    # About a third of the staff ask for a specific free day; the rest only
    # need some teaching-free day.
    profs = [Professor(p, rng.randrange(GRID.days) if rng.random() < 0.35 else None)
             for dept in by_dept for p in by_dept[dept]]
    return staffed, profs


def _rooms(sections: list[Section]) -> list[Room]:
    meetings: Counter = Counter()
    for s in sections:
        meetings[s.room_type] += s.meetings_per_week
    slots = len(GRID.slots())
    rooms = []
    for rtype in sorted(meetings):
        if rtype in ("hall", "simulator"):
            n = 1
        else:
            n = max(2, math.ceil(1.3 * meetings[rtype] / slots))
        rooms += [Room(f"{rtype.upper()}{i + 1:02d}", rtype) for i in range(n)]
    return rooms


# -- tiny ----------------------------------------------------------------------


def _tiny(seed: int) -> Instance:
    rng = random.Random(f"tiny:{seed}")
    grid = GRID
    size_a = rng.randint(1, 3)
    size_b = rng.randint(1, 3)
    n_k = rng.choice((2, 2, 3))
    n_m = rng.choice((2, 3))
    # Keep the raw (student, course) choice product at or below 10**6.
    while (n_k * 4) ** size_a * (n_k * n_m) ** size_b > 10**6:
        if size_a >= size_b:
            size_a -= 1
        else:
            size_b -= 1
    demand_k = size_a + size_b

    def caps(n: int, need: int) -> list[int]:
        base = max(1, math.ceil(need / n))
        return [base + rng.randint(0, 1) for _ in range(n)]

    profs = [f"P{i}" for i in range(1, 5)]
    pick = lambda: rng.choice(profs)  # noqa: E731
    sections = [Section("COM.1", "COM", demand_k, pick(), "hall", 1)]
    for i, cap in enumerate(caps(n_k, demand_k), 1):
        sections.append(Section(f"K.{i}", "K", cap, pick(), "lecture", rng.choice((2, 3))))
    lab_len = rng.choice((2, 3))
    for i, cap in enumerate(caps(2, size_a), 1):
        sections.append(Section(f"L.{i}", "L", cap, pick(), "lecture", 2))
        sections.append(Section(f"B.{i}", "B", cap, pick(), "lab", lab_len, True, f"L.{i}"))
    for i, cap in enumerate(caps(n_m, size_b), 1):
        sections.append(Section(f"M.{i}", "M", cap, pick(), "lecture", 2))
    rooms = [Room("HALL1", "hall"), Room("LEC1", "lecture"), Room("LEC2", "lecture"),
             Room("LAB1", "lab")]

    for _ in range(200):
        days_off = {p: rng.randrange(grid.days) for p in profs}
        planted = _plant(sections, grid, days_off, rng)
        if planted is not None:
            break
    else:  # pragma: no cover - the grid is far larger than the demand
        raise RuntimeError("could not plant a timetable")
    professors = [Professor(p, days_off[p]) for p in profs if any(s.professor_id == p for s in sections)]
    return Instance(
        grid=grid,
        rooms=tuple(rooms),
        professors=tuple(professors),
        courses=tuple(Course(c) for c in ("COM", "K", "L", "B", "M")),
        sections=tuple(sections),
        major_groups=(MajorGroup("1MC", size_a, ("COM", "K", "L", "B")),
                      MajorGroup("2SC", size_b, ("COM", "K", "M"))),
        common_section_id="COM.1",
        name=f"tiny-{seed}",
        planted=tuple(sorted((sid, tuple(sorted(v))) for sid, v in planted.items())),
    )


def _plant(sections, grid: PeriodGrid, days_off: dict[str, int], rng: random.Random):
    """Place every section on its own slots, so no edge can ever clash."""
    free = set(grid.slots())
    out = {}
    for s in sorted(sections, key=lambda s: (not s.is_extended, s.id)):
        off = days_off[s.professor_id]
        days = [d for d in range(grid.days) if d != off]
        if s.is_extended:
            options = [(d, t) for d in days for t in block_starts(grid, s.meetings_per_week)
                       if all((d, t + k) in free for k in range(s.meetings_per_week))]
            if not options:
                return None
            d, t = rng.choice(options)
            slots = [(d, t + k) for k in range(s.meetings_per_week)]
        else:
            rng.shuffle(days)
            slots = []
            for d in days:
                opts = [(d, t) for t in grid.teaching_periods if (d, t) in free]
                if opts:
                    slots.append(rng.choice(opts))
                if len(slots) == s.meetings_per_week:
                    break
            if len(slots) < s.meetings_per_week:
                return None
        free.difference_update(slots)
        out[s.id] = slots
    return out
