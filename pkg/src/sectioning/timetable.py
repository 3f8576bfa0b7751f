"""Timetables over the period grid: structure checks, soft-constraint scoring,
room assignment and tabu extraction from clashes.

Structural rules (meeting counts, lunch, block contiguity, room types) are
hard and raise; clashes, room shortages, repeated same-day meetings and
missing days off are soft and priced by :class:`SoftWeights`.
"""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .graph import ConflictGraph, Sectioning
from .instance import Instance, Section, Slot, Violation, block_starts
from .model import TabuList
from .weights import SoftWeights

CATEGORIES = ("clash", "room_overflow", "double_meeting", "prof_day_off")


class TimetableStructureError(ValueError):
    def __init__(self, violations: list[Violation]):
        self.violations = violations
        super().__init__("timetable is not structurally valid: "
                         + "; ".join(str(v) for v in violations[:5]))


class NotExtendedError(ValueError):
    pass


@dataclass(frozen=True)
class Timetable:
    """Meeting slots per section, plus optionally a room per meeting.

    ``rooms`` maps ``(section, day, period)`` to a room id.
    """

    slots: Mapping[str, tuple[Slot, ...]]
    rooms: Mapping[tuple[str, int, int], str] | None = None

    @classmethod
    def from_slots(cls, slots: Mapping[str, Iterable[Slot]], rooms=None) -> "Timetable":
        norm = {s: tuple(sorted((int(d), int(t)) for d, t in v)) for s, v in slots.items()}
        return cls(dict(sorted(norm.items())), dict(sorted(rooms.items())) if rooms else None)

    def restricted(self, sections: Iterable[str]) -> "Timetable":
        keep = set(sections)
        rooms = None
        if self.rooms is not None:
            rooms = {k: r for k, r in self.rooms.items() if k[0] in keep}
        return Timetable.from_slots({s: v for s, v in self.slots.items() if s in keep}, rooms)

    def without_rooms(self) -> "Timetable":
        return Timetable(self.slots)

    def to_document(self) -> str:
        out = {}
        for s, slots in self.slots.items():
            out[s] = [[d, t, self.rooms.get((s, d, t)) if self.rooms else None] for d, t in slots]
        return json.dumps({"sections": out}, sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_document(cls, text: str) -> "Timetable":
        doc = json.loads(text)["sections"]
        slots = {s: [(d, t) for d, t, _ in v] for s, v in doc.items()}
        rooms = {(s, d, t): r for s, v in doc.items() for d, t, r in v if r is not None}
        return cls.from_slots(slots, rooms or None)


@dataclass(frozen=True)
class ConflictReport:
    witnesses: tuple[tuple[str, str, int, int], ...]
    totals: Mapping[str, float]
    total: float
    # (day, period, room) cells hosting more than one meeting, with the excess
    room_double_bookings: tuple[tuple[int, int, str, int], ...] = field(default=())

    @property
    def clash_count(self) -> int:
        return len(self.witnesses)

    def to_document(self) -> str:
        doc = {
            "total": self.total,
            "totals": dict(self.totals),
            "clashes": [list(w) for w in self.witnesses],
            "room_double_bookings": [list(r) for r in self.room_double_bookings],
        }
        return json.dumps(doc, sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_document(cls, text: str) -> "ConflictReport":
        doc = json.loads(text)
        return cls(tuple(tuple(w) for w in doc["clashes"]), doc["totals"], doc["total"],
                   tuple(tuple(r) for r in doc.get("room_double_bookings", ())))


def legal_starts(inst: Instance, section: Section | str) -> set[Slot]:
    s = inst.section_map[section] if isinstance(section, str) else section
    if not s.is_extended:
        raise NotExtendedError(f"section {s.id} is not extended; it has no block starts")
    starts = block_starts(inst.grid, s.meetings_per_week)
    return {(d, t) for d in range(inst.grid.days) for t in starts}


def structural_violations(inst: Instance, tt: Timetable, complete: bool = False) -> list[Violation]:
    out: list[Violation] = []
    sm = inst.section_map
    grid = inst.grid
    if complete:
        for s in inst.sections:
            if s.id not in tt.slots:
                out.append(Violation("unscheduled section", (s.id,)))
    for sid, slots in tt.slots.items():
        if sid not in sm:
            out.append(Violation("unknown section", (sid,)))
            continue
        s = sm[sid]
        if len(slots) != s.meetings_per_week:
            out.append(Violation("meeting count", (sid,),
                                 f"{len(slots)} meetings, expected {s.meetings_per_week}"))
        if len(set(slots)) != len(slots):
            out.append(Violation("repeated slot", (sid,)))
        for d, t in slots:
            if not (0 <= d < grid.days and 0 <= t < grid.periods_per_day):
                out.append(Violation("slot outside grid", (sid,), f"({d}, {t})"))
            elif t == grid.lunch_period:
                out.append(Violation("lunch period used", (sid,), f"day {d}"))
        if s.is_extended and slots:
            d0, t0 = slots[0]
            block = [(d0, t0 + k) for k in range(s.meetings_per_week)]
            if list(slots) != block or t0 not in block_starts(grid, s.meetings_per_week):
                out.append(Violation("extended block", (sid,), "meetings are not one legal block"))
    if tt.rooms is not None:
        room_type = {r.id: r.room_type for r in inst.rooms}
        for sid, slots in tt.slots.items():
            if sid not in sm:
                continue
            used = set()
            for d, t in slots:
                r = tt.rooms.get((sid, d, t))
                if r is None:
                    out.append(Violation("meeting without room", (sid,), f"({d}, {t})"))
                elif room_type.get(r) != sm[sid].room_type:
                    out.append(Violation("room type", (sid, r)))
                used.add(r)
            if sm[sid].is_extended and len(used) > 1:
                out.append(Violation("extended block room", (sid,), "block split over rooms"))
        for (sid, d, t) in tt.rooms:
            if (d, t) not in set(tt.slots.get(sid, ())):
                out.append(Violation("room for missing meeting", (sid,), f"({d}, {t})"))
    return out


def room_double_bookings(tt: Timetable) -> list[tuple[int, int, str, int]]:
    if not tt.rooms:
        return []
    occ = Counter((d, t, r) for (_, d, t), r in tt.rooms.items())
    return sorted((d, t, r, n - 1) for (d, t, r), n in occ.items() if n > 1)


def score(inst: Instance, g: ConflictGraph, tt: Timetable, w: SoftWeights | None = None,
          complete: bool = False) -> ConflictReport:
    """Penalty report for ``tt``; sections absent from ``tt`` are ignored."""
    problems = structural_violations(inst, tt, complete)
    if problems:
        raise TimetableStructureError(problems)
    w = w or inst.soft_weights
    slots = tt.slots
    common = inst.common_section_id
    order = inst.section_index

    witnesses = []
    clash = 0.0
    for (s, t) in g.edges:
        if s in slots and t in slots:
            shared = set(slots[s]).intersection(slots[t])
            if shared:
                mult = w.common_multiplier if common in (s, t) else 1
                clash += w.clash * mult * len(shared)
                witnesses.extend((s, t, d, p) for d, p in shared)
    witnesses.sort(key=lambda x: (order[x[0]], order[x[1]], x[2], x[3]))

    sm = inst.section_map
    demand: Counter = Counter()
    for sid, ss in slots.items():
        for d, p in ss:
            demand[sm[sid].room_type, d, p] += 1
    supply = inst.rooms_per_type
    room = w.room_overflow * sum(1 for (rt, _, _), n in demand.items() if n > supply.get(rt, 0))

    double = 0.0
    for sid, ss in slots.items():
        if not sm[sid].is_extended:
            per_day = Counter(d for d, _ in ss)
            double += w.double_meeting * sum(n - 1 for n in per_day.values() if n > 1)

    days: dict[str, set[int]] = defaultdict(set)
    for sid, ss in slots.items():
        days[sm[sid].professor_id].update(d for d, _ in ss)
    prof = 0.0
    for p, taught in days.items():
        if prof_lacks_day_off(inst.professor_map[p].requested_day_off, taught, inst.grid.days):
            prof += w.prof_day_off

    totals = {"clash": clash, "room_overflow": room, "double_meeting": double, "prof_day_off": prof}
    return ConflictReport(tuple(witnesses), totals, clash + room + double + prof,
                          tuple(room_double_bookings(tt)))


def prof_lacks_day_off(requested: int | None, taught_days, n_days: int) -> bool:
    if requested is not None:
        return requested in taught_days
    return len(set(taught_days)) >= n_days


# -- rooms -----------------------------------------------------------------------


def assign_rooms(inst: Instance, tt: Timetable) -> Timetable:
    """Give every meeting a room of its section's type, one room per block.

    Per day and room type, meetings are runs of periods (a single period for
    a regular meeting). Runs are placed in start order into any free room;
    when every room is busy, a run joins the room whose current occupancy
    ends first. This keeps a room idle only when no room is double-booked,
    so the number of double bookings equals, slot by slot, the excess of
    demand over the rooms of that type.
    """
    sm = inst.section_map
    rooms_of: dict[str, list[str]] = defaultdict(list)
    for r in inst.rooms:
        rooms_of[r.room_type].append(r.id)
    runs: dict[tuple[int, str], list[tuple[int, int, int, str]]] = defaultdict(list)
    order = inst.section_index
    for sid, slots in tt.slots.items():
        s = sm[sid]
        if s.is_extended:
            d, t = slots[0]
            runs[d, s.room_type].append((t, t + len(slots) - 1, order[sid], sid))
        else:
            for d, t in slots:
                runs[d, s.room_type].append((t, t, order[sid], sid))
    assigned: dict[tuple[str, int, int], str] = {}
    for (d, rtype), items in sorted(runs.items()):
        names = rooms_of[rtype]
        busy_until = [-1] * len(names)
        for start, end, _, sid in sorted(items):
            free = [i for i, b in enumerate(busy_until) if b < start]
            if free:
                i = free[0]
            else:
                i = min(range(len(names)), key=lambda k: (busy_until[k], k))
            busy_until[i] = max(busy_until[i], end)
            for t in range(start, end + 1):
                assigned[sid, d, t] = names[i]
    return Timetable.from_slots(tt.slots, assigned)


def room_deficit(inst: Instance, tt: Timetable) -> int:
    """Meetings that cannot get a room of their own: sum over slot and type of
    demand minus supply, where positive."""
    sm = inst.section_map
    demand: Counter = Counter()
    for sid, ss in tt.slots.items():
        for d, t in ss:
            demand[sm[sid].room_type, d, t] += 1
    supply = inst.rooms_per_type
    return sum(max(0, n - supply.get(rt, 0)) for (rt, _, _), n in demand.items())


# -- tabu --------------------------------------------------------------------------


def extract_tabu(inst: Instance, f: Sectioning, report: ConflictReport) -> TabuList:
    enrolled = f.enrollment
    pairs = set()
    for s1, s2, _, _ in report.witnesses:
        both = set(enrolled.get(s1, ())) & set(enrolled.get(s2, ()))
        for g in both:
            pairs.add((g, s1))
            pairs.add((g, s2))
    return TabuList(frozenset(pairs))
