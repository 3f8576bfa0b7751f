"""Weight tables shared by the sectioning and timetabling objectives."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields


@dataclass(frozen=True)
class EdgeWeights:
    """Cost of a conflict-graph edge by how many endpoints are extended.

    ``a`` applies when neither endpoint is extended, ``b`` when exactly one
    is, ``c`` when both are. ``d`` is charged per tabu (student, section)
    assignment that survives into a new sectioning.
    """

    a: float = 1
    b: float = 4
    c: float = 7
    d: float = 5

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"edge weight {f.name} must be >= 0")

    def for_pair(self, extended_endpoints: int) -> float:
        return (self.a, self.b, self.c)[extended_endpoints]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SoftWeights:
    """Penalties of the soft timetabling constraints."""

    clash: float = 1000
    common_multiplier: float = 10
    room_overflow: float = 100
    double_meeting: float = 10
    prof_day_off: float = 1

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"soft weight {f.name} must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)
