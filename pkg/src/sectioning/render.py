"""Static weekly grids for divisions and professors, as text or HTML."""

from __future__ import annotations

import html
from collections import defaultdict

from .graph import Sectioning, divisions
from .instance import Instance, Slot
from .timetable import Timetable

DAY_NAMES = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")


class UnknownSelectorError(KeyError):
    pass


def division_table(inst: Instance, f: Sectioning) -> dict[str, tuple[str, ...]]:
    """Division name -> its students. Names are ``<major-group>/<k>``, with k
    counting from 1 in order of each division's first student id."""
    group_of = {g.id: g.major_group_id for g in inst.students}
    blocks = sorted((sorted(b) for b in divisions(inst, f)), key=lambda b: (group_of[b[0]], b[0]))
    counter: dict[str, int] = defaultdict(int)
    out = {}
    for block in blocks:
        grp = group_of[block[0]]
        counter[grp] += 1
        out[f"{grp}/{counter[grp]}"] = tuple(block)
    return out


def selectors(inst: Instance, f: Sectioning) -> list[str]:
    names = [f"division:{d}" for d in division_table(inst, f)]
    names += [f"professor:{p.id}" for p in inst.professors]
    return names


def selected_sections(inst: Instance, f: Sectioning, selector: str) -> tuple[str, list[str]]:
    kind, _, key = selector.partition(":")
    if kind == "division":
        table = division_table(inst, f)
        if key not in table:
            raise UnknownSelectorError(selector)
        sections = f.schedules[table[key][0]]
        n = len(table[key])
        title = f"Division {key} ({n} student{'' if n == 1 else 's'})"
    elif kind == "professor":
        if key not in inst.professor_map:
            raise UnknownSelectorError(selector)
        sections = [s.id for s in inst.sections if s.professor_id == key]
        title = f"Professor {key}"
    else:
        raise UnknownSelectorError(selector)
    order = inst.section_index
    return title, sorted(sections, key=order.__getitem__)


def grid_cells(inst: Instance, tt: Timetable, sections) -> dict[Slot, list[str]]:
    cells: dict[Slot, list[str]] = defaultdict(list)
    for s in sections:
        for slot in tt.slots.get(s, ()):
            cells[slot].append(s)
    return dict(cells)


def _label(inst: Instance, tt: Timetable, s: str, slot: Slot) -> str:
    if tt.rooms and (s, *slot) in tt.rooms:
        return f"{s} @{tt.rooms[s, slot[0], slot[1]]}"
    return s


def render_text(inst: Instance, f: Sectioning, tt: Timetable, selector: str) -> str:
    """Days as columns, periods as rows. The first period of an extended
    block shows the section; the rest of the block shows ``|``."""
    title, sections = selected_sections(inst, f, selector)
    grid = inst.grid
    cells = grid_cells(inst, tt, sections)
    ext = {s.id for s in inst.sections if s.is_extended}
    table = []
    for t in range(grid.periods_per_day):
        if t == grid.lunch_period:
            table.append([f"P{t}"] + ["LUNCH"] * grid.days)
            continue
        row = [f"P{t}"]
        for d in range(grid.days):
            parts = []
            for s in cells.get((d, t), ()):
                if s in ext and (d, t - 1) in tt.slots[s]:
                    parts.append("|")
                else:
                    parts.append(_label(inst, tt, s, (d, t)))
            row.append(" / ".join(parts) if parts else ".")
        table.append(row)
    head = [""] + [DAY_NAMES[d] if d < len(DAY_NAMES) else f"D{d}" for d in range(grid.days)]
    widths = [max(len(r[i]) for r in [head] + table) for i in range(len(head))]
    lines = [title, "  ".join(h.ljust(w) for h, w in zip(head, widths)).rstrip()]
    lines += ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in table]
    return "\n".join(lines) + "\n"


def render_html(inst: Instance, f: Sectioning, tt: Timetable, selector: str) -> str:
    """One ``<table>``; extended blocks are single cells spanning their rows."""
    title, sections = selected_sections(inst, f, selector)
    grid = inst.grid
    cells = grid_cells(inst, tt, sections)
    ext = {s.id for s in inst.sections if s.is_extended}
    covered: set[Slot] = set()
    out = [f"<h2>{html.escape(title)}</h2>", "<table class=\"week\">",
           "<tr><th></th>" + "".join(f"<th>{DAY_NAMES[d]}</th>" for d in range(grid.days)) + "</tr>"]
    for t in range(grid.periods_per_day):
        if t == grid.lunch_period:
            out.append(f"<tr class=\"lunch\"><th>P{t}</th><td colspan=\"{grid.days}\">lunch</td></tr>")
            continue
        row = [f"<tr><th>P{t}</th>"]
        for d in range(grid.days):
            if (d, t) in covered:
                continue
            here = cells.get((d, t), [])
            span = 1
            blocks = [s for s in here if s in ext and tt.slots[s][0] == (d, t)]
            # merge rows only when a lone block owns every slot it spans
            if len(here) == 1 and blocks:
                span = len(tt.slots[blocks[0]])
                if any(len(cells.get((d, t + k), [])) != 1 for k in range(span)):
                    span = 1
            for k in range(1, span):
                covered.add((d, t + k))
            text = "<br>".join(html.escape(_label(inst, tt, s, (d, t))) for s in here)
            attr = f" rowspan=\"{span}\"" if span > 1 else ""
            cls = " class=\"extended\"" if blocks else ""
            row.append(f"<td{attr}{cls}>{text}</td>")
        row.append("</tr>")
        out.append("".join(row))
    out.append("</table>")
    return "\n".join(out) + "\n"


_STYLE = ("table.week{border-collapse:collapse;margin-bottom:1em}"
          "td,th{border:1px solid #999;padding:2px 6px}"
          "td.extended{background:#e8eefc}tr.lunch td{background:#eee;text-align:center}")


def render_schedule(inst: Instance, f: Sectioning, tt: Timetable, selector: str,
                    fmt: str = "text") -> str:
    return render_document(inst, f, tt, [selector], fmt)


def render_document(inst: Instance, f: Sectioning, tt: Timetable, chosen: list[str],
                    fmt: str = "text") -> str:
    """Grids for several selectors in one text file or one HTML page."""
    if fmt == "text":
        return "\n".join(render_text(inst, f, tt, sel) for sel in chosen)
    if fmt == "html":
        body = "".join(render_html(inst, f, tt, sel) for sel in chosen)
        return (f"<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><style>{_STYLE}</style>"
                f"</head><body>\n{body}</body></html>\n")
    raise ValueError(f"unknown render format {fmt!r}")
