"""Compact constructors for hand-built instances."""

from sectioning import EdgeWeights, Instance, Sectioning, SoftWeights
from sectioning.instance import Course, MajorGroup, PeriodGrid, Professor, Room, Section


def sec(sid, course, cap=10, prof="P1", room="lec", meetings=1, extended=False, parent=None):
    return Section(sid, course, cap, prof, room, meetings, extended, parent)


def make(sections, groups, rooms=None, grid=None, common=None, days_off=None,
         edge=None, soft=None, name="built"):
    """groups: list of (id, size, courses). rooms: list of (id, type); by default
    two rooms per used type. days_off: professor -> requested day."""
    sections = tuple(sections)
    if rooms is None:
        types = sorted({s.room_type for s in sections})
        rooms = [(f"{t}{k}", t) for t in types for k in (1, 2)]
    profs = sorted({s.professor_id for s in sections})
    days_off = days_off or {}
    courses = []
    for s in sections:
        if s.course_id not in courses:
            courses.append(s.course_id)
    return Instance(
        grid=grid or PeriodGrid(5, 8, 4),
        rooms=tuple(Room(r, t) for r, t in rooms),
        professors=tuple(Professor(p, days_off.get(p)) for p in profs),
        courses=tuple(Course(c) for c in courses),
        sections=sections,
        major_groups=tuple(MajorGroup(g, n, tuple(cs)) for g, n, cs in groups),
        common_section_id=common,
        edge_weights=edge or EdgeWeights(),
        soft_weights=soft or SoftWeights(),
        name=name,
    )


def random_sectioning(inst, rng, tries=200):
    """A seeded random valid sectioning, built student by student."""
    sections = inst.course_sections
    smap = inst.section_map
    for _ in range(tries):
        load = {s.id: 0 for s in inst.sections}
        mapping = {}
        order = list(inst.students)
        rng.shuffle(order)
        ok = True
        for g in order:
            held = set()
            # parents before children
            courses = sorted(g.required_course_ids,
                             key=lambda c: any(smap[s].parent_id for s in sections[c]))
            for c in courses:
                opts = [s for s in sections[c] if load[s] < smap[s].capacity
                        and (smap[s].parent_id is None or smap[s].parent_id in held)]
                if not opts:
                    ok = False
                    break
                s = rng.choice(opts)
                load[s] += 1
                held.add(s)
                mapping[g.id, c] = s
            if not ok:
                break
        if ok:
            return Sectioning.from_mapping(mapping)
    raise RuntimeError("no random sectioning found")
