"""Timetable search: tabu-guided min-conflicts over meeting slots.

A step picks a section that currently carries penalty, tries every slot for
each of its meetings (or every legal start for an extended block), and makes
the best move that is not tabu. Moving a meeting out of a slot forbids moving
it back for a few steps. On stagnation the search returns to its best
timetable and scrambles a few penalized sections.

Slots are dense ints ``day * periods_per_day + period``; all state lives in
lists so that runs are reproducible for a given seed.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field

from .graph import ConflictGraph
from .indexset import IndexedSet
from .instance import Instance, block_starts
from .timetable import ConflictReport, Timetable, assign_rooms, score
from .weights import SoftWeights


class NoLegalStartError(ValueError):
    pass


@dataclass
class SolveLog:
    iterations: int = 0
    restarts: int = 0
    seconds: float = 0.0
    start_value: float = 0.0
    best_value: float = 0.0
    # first iteration / wall second at which the objective hit zero
    zero_iteration: int | None = None
    zero_seconds: float | None = None
    history: list[tuple[int, float, float]] = field(default_factory=list)


class _State:
    def __init__(self, inst: Instance, g: ConflictGraph, w: SoftWeights, members: list[str],
                 fixed: set[str]):
        grid = inst.grid
        self.inst = inst
        self.P = grid.periods_per_day
        self.D = grid.days
        sm = inst.section_map
        self.ids = members
        self.secs = [sm[s] for s in members]
        n = len(members)
        local = {s: i for i, s in enumerate(members)}
        self.movable = [s not in fixed for s in members]
        self.ext = [s.is_extended for s in self.secs]
        self.m = [s.meetings_per_week for s in self.secs]

        rtypes = sorted({s.room_type for s in self.secs})
        rt_index = {r: k for k, r in enumerate(rtypes)}
        self.rt = [rt_index[s.room_type] for s in self.secs]
        self.supply = [inst.rooms_per_type.get(r, 0) for r in rtypes]
        profs = sorted({s.professor_id for s in self.secs})
        p_index = {p: k for k, p in enumerate(profs)}
        self.prof = [p_index[s.professor_id] for s in self.secs]
        self.req = [inst.professor_map[p].requested_day_off for p in profs]
        self.prof_secs = [[] for _ in profs]
        for i, p in enumerate(self.prof):
            self.prof_secs[p].append(i)

        self.w_clash = w.clash
        self.w_room = w.room_overflow
        self.w_dbl = w.double_meeting
        self.w_prof = w.prof_day_off
        common = inst.common_section_id
        self.adj: list[dict[int, float]] = [dict() for _ in range(n)]
        for (s, t) in g.edges:
            if s in local and t in local:
                mult = w.common_multiplier if common in (s, t) else 1
                i, j = local[s], local[t]
                self.adj[i][j] = self.adj[j][i] = w.clash * mult

        n_slots = self.D * self.P
        teaching = [d * self.P + t for d in range(self.D) for t in grid.teaching_periods]
        self.regular_slots = teaching
        self.block_slots: list[list[tuple[int, ...]]] = []
        for i, s in enumerate(self.secs):
            if s.is_extended:
                starts = block_starts(grid, s.meetings_per_week)
                if not starts:
                    raise NoLegalStartError(f"section {s.id} has no legal block start")
                self.block_slots.append([tuple(d * self.P + t + k for k in range(s.meetings_per_week))
                                         for d in range(self.D) for t in starts])
            else:
                self.block_slots.append([])

        self.pos: list[list[int]] = [[] for _ in range(n)]
        self.occ: list[list[int]] = [[] for _ in range(n_slots)]
        self.dem = [[0] * n_slots for _ in rtypes]
        self.daycnt = [[0] * self.D for _ in range(n)]
        self.teach = [[0] * self.D for _ in profs]
        self.ndays = [0] * len(profs)
        self.clash_inv = [0] * n
        # conf[i][x]: clash weight section i would meet at slot x
        self.conf = [[0.0] * n_slots for _ in range(n)]
        self.value = 0.0
        self.pool = IndexedSet()

    # -- cost of adding / removing meetings on one day ---------------------

    def add_cost(self, i: int, xs) -> float:
        cost = 0.0
        rt = self.rt[i]
        dem, sup = self.dem[rt], self.supply[rt]
        conf = self.conf[i]
        for x in xs:
            cost += conf[x]
            if dem[x] == sup:
                cost += self.w_room
        d = xs[0] // self.P
        if not self.ext[i] and self.daycnt[i][d] > 0:
            cost += self.w_dbl
        p = self.prof[i]
        if self.teach[p][d] == 0:
            r = self.req[p]
            if r is not None:
                if d == r:
                    cost += self.w_prof
            elif self.ndays[p] == self.D - 1:
                cost += self.w_prof
        return cost

    def add(self, i: int, xs) -> float:
        cost = self.add_cost(i, xs)
        adj = self.adj[i]
        rt = self.rt[i]
        dem, sup = self.dem[rt], self.supply[rt]
        pool = self.pool
        pos, conf, inv = self.pos, self.conf, self.clash_inv
        for x in xs:
            for j, c in adj.items():
                conf[j][x] += c
                if x in pos[j]:
                    inv[i] += 1
                    inv[j] += 1
                    if self.movable[j]:
                        pool.add(j)
            self.occ[x].append(i)
            dem[x] += 1
            if dem[x] > sup:
                for j in self.occ[x]:
                    if self.rt[j] == rt and self.movable[j]:
                        pool.add(j)
            self.pos[i].append(x)
        d = xs[0] // self.P
        self.daycnt[i][d] += len(xs)
        p = self.prof[i]
        if self.teach[p][d] == 0:
            self.ndays[p] += 1
        self.teach[p][d] += len(xs)
        if cost > 0:
            if self.movable[i]:
                pool.add(i)
            for j in self.prof_secs[p]:
                if self.movable[j] and self.pos[j]:
                    pool.add(j)
        self.value += cost
        return cost

    def remove(self, i: int, xs) -> float:
        gain = 0.0
        adj = self.adj[i]
        rt = self.rt[i]
        dem, sup = self.dem[rt], self.supply[rt]
        pos, conf, inv = self.pos, self.conf, self.clash_inv
        for x in xs:
            self.occ[x].remove(i)
            pos[i].remove(x)
            gain += conf[i][x]
            for j, c in adj.items():
                conf[j][x] -= c
                if x in pos[j]:
                    inv[i] -= 1
                    inv[j] -= 1
            if dem[x] == sup + 1:
                gain += self.w_room
            dem[x] -= 1
        d = xs[0] // self.P
        if not self.ext[i] and self.daycnt[i][d] > 1:
            gain += self.w_dbl
        self.daycnt[i][d] -= len(xs)
        p = self.prof[i]
        self.teach[p][d] -= len(xs)
        if self.teach[p][d] == 0:
            r = self.req[p]
            if r is not None:
                if d == r:
                    gain += self.w_prof
            elif self.ndays[p] == self.D:
                gain += self.w_prof
            self.ndays[p] -= 1
        self.value -= gain
        return -gain

    # -- penalty carried by one section --------------------------------------

    def is_bad(self, i: int) -> bool:
        if self.clash_inv[i]:
            return True
        rt = self.rt[i]
        dem, sup = self.dem[rt], self.supply[rt]
        days = set()
        for x in self.pos[i]:
            if dem[x] > sup:
                return True
            d = x // self.P
            if d in days and not self.ext[i]:
                return True
            days.add(d)
        p = self.prof[i]
        r = self.req[p]
        if r is not None:
            return r in days
        return self.ndays[p] == self.D

    def groups(self, i: int) -> list[tuple[int, ...]]:
        """Current meetings as removable units: one block, or single meetings."""
        if self.ext[i]:
            return [tuple(sorted(self.pos[i]))]
        return [(x,) for x in self.pos[i]]

    def snapshot(self) -> list[list[int]]:
        return [sorted(p) for p in self.pos]

    def timetable(self, pos=None) -> Timetable:
        pos = pos if pos is not None else self.pos
        P = self.P
        return Timetable.from_slots({self.ids[i]: [divmod(x, P) for x in xs]
                                     for i, xs in enumerate(pos)})


def _place(st: _State, i: int, rng: random.Random) -> None:
    """Greedy placement of an unplaced section at its cheapest slots."""
    if st.ext[i]:
        options = st.block_slots[i]
        costs = [st.add_cost(i, xs) for xs in options]
        best = min(costs)
        st.add(i, rng.choice([o for o, c in zip(options, costs) if c == best]))
        return
    for _ in range(st.m[i]):
        options = [x for x in st.regular_slots if x not in st.pos[i]]
        costs = [st.add_cost(i, (x,)) for x in options]
        best = min(costs)
        st.add(i, (rng.choice([o for o, c in zip(options, costs) if c == best]),))


def _load(st: _State, pos: list[list[int]]) -> None:
    for i in range(len(pos)):
        for xs in st.groups(i):
            st.remove(i, xs)
    for i, xs in enumerate(pos):
        if st.ext[i]:
            st.add(i, tuple(xs))
        else:
            for x in xs:
                st.add(i, (x,))


def solve(inst: Instance, g: ConflictGraph, w: SoftWeights | None = None,
          restrict=None, warm: Timetable | None = None, fixed=(), budget: float = 10.0,
          seed: int = 0, max_iters: int | None = None, workers: int = 1,
          tenure: int = 10, noise: float = 0.05, patience: int = 3000, swap_rate: float = 1.0,
          exchange=None) -> tuple[Timetable, ConflictReport, SolveLog]:
    """Timetable the sections in ``restrict`` (default: all).

    ``warm`` gives starting slots; sections listed in ``fixed`` keep their
    warm slots. Without a budget hit first, a run is fully determined by
    ``seed`` and ``max_iters``.
    """
    w = w or inst.soft_weights
    if workers > 1:
        from .portfolio import run_portfolio
        jobs = [dict(inst=inst, g=g, w=w, restrict=restrict, warm=warm, fixed=fixed,
                     budget=budget, seed=seed + k, max_iters=max_iters, tenure=tenure,
                     noise=noise, patience=patience, swap_rate=swap_rate) for k in range(workers)]
        return run_portfolio(solve, jobs, workers, key=lambda r: r[1].total)

    members = [s.id for s in inst.sections] if restrict is None else \
        [s.id for s in inst.sections if s.id in set(restrict)]
    fixed = set(fixed)
    warm_slots = dict(warm.slots) if warm is not None else {}
    missing = fixed.difference(warm_slots)
    if missing:
        raise ValueError(f"fixed sections without warm slots: {sorted(missing)[:5]}")
    members += sorted(fixed.difference(members), key=inst.section_index.__getitem__)
    st = _State(inst, g, w, members, fixed)
    rng = random.Random(seed)
    log = SolveLog()
    t0 = time.perf_counter()

    order = []
    for i, sid in enumerate(members):
        if sid in warm_slots:
            slots = warm_slots[sid]
            xs = [d * st.P + t for d, t in slots]
            if st.ext[i]:
                st.add(i, tuple(xs))
            else:
                for x in xs:
                    st.add(i, (x,))
        else:
            order.append(i)
    order.sort(key=lambda i: (not st.ext[i], -len(st.adj[i]), i))
    for i in order:
        _place(st, i, rng)

    movable = [i for i in range(len(members)) if st.movable[i]]
    for i in movable:
        if st.is_bad(i):
            st.pool.add(i)
    log.start_value = st.value
    best_value = st.value
    best_pos = st.snapshot()
    at_best = True
    tabu: dict[tuple[int, int], int] = {}
    it = 0
    stall = 0
    if best_value <= 1e-9:
        log.zero_iteration, log.zero_seconds = 0, 0.0
    while movable and best_value > 1e-9:
        if max_iters is not None and it >= max_iters:
            break
        if it & 63 == 0 and time.perf_counter() - t0 >= budget:
            break
        it += 1
        i = _pick(st, rng, movable)
        if i is None:
            break
        if rng.random() < noise:
            move = _random_move(st, i, rng)
        else:
            move = _best_move(st, i, rng, tabu, it, best_value, rng.random() < swap_rate)
        if move is None:
            stall += 1
            continue
        steps, delta = move
        if delta > 1e-9 and at_best:
            best_pos, at_best = st.snapshot(), False
        _apply(st, steps)
        for j, old, _ in steps:
            for x in old:
                tabu[j, x] = it + tenure + rng.randrange(tenure + 1)
        if st.value < best_value - 1e-9:
            best_value = st.value
            at_best = True
            stall = 0
            log.history.append((it, time.perf_counter() - t0, best_value))
            if best_value <= 1e-9:
                log.zero_iteration = it
                log.zero_seconds = time.perf_counter() - t0
        else:
            stall += 1
            if abs(st.value - best_value) <= 1e-9:
                at_best = True
        if stall >= patience:
            stall = 0
            log.restarts += 1
            if at_best:
                best_pos, at_best = st.snapshot(), False
            if exchange is not None:
                shared = exchange.offer(best_value, best_pos)
                if shared is not None:
                    best_value, best_pos = shared
            _load(st, best_pos)
            tabu.clear()
            _perturb(st, rng, movable)
            at_best = abs(st.value - best_value) <= 1e-9
    if at_best:
        best_pos = st.snapshot()
    log.iterations = it
    log.seconds = time.perf_counter() - t0
    log.best_value = best_value
    tt = st.timetable(best_pos)
    report = score(inst, g, tt, w)
    assert abs(report.total - best_value) < 1e-6, (report.total, best_value)
    return tt, report, log


def _pick(st: _State, rng: random.Random, movable: list[int]) -> int | None:
    pool = st.pool
    while len(pool):
        i = pool.items[rng.randrange(len(pool))]
        if st.is_bad(i):
            return i
        pool.discard(i)
    # nothing penalized among movable sections: the rest is fixed
    return None


def _apply(st: _State, steps) -> None:
    for i, old, _ in steps:
        st.remove(i, old)
    for i, _, new in steps:
        st.add(i, new)


def _random_move(st: _State, i: int, rng: random.Random):
    if st.ext[i]:
        old = tuple(sorted(st.pos[i]))
        new = rng.choice(st.block_slots[i])
        if new == old:
            return None
    else:
        old = (rng.choice(st.pos[i]),)
        options = [x for x in st.regular_slots if x not in st.pos[i]]
        if not options:
            return None
        new = (rng.choice(options),)
    delta = st.remove(i, old)
    delta += st.add_cost(i, new)
    st.add(i, old)
    return [(i, old, new)], delta


def _best_move(st: _State, i: int, rng: random.Random, tabu, it: int, best_value: float,
               swaps: bool = True):
    """Best non-tabu relocation of one meeting (or block) of ``i``.

    With ``swaps``, a regular meeting may also take a slot held by a single
    clashing regular neighbour, which then moves to its own best slot. A tabu
    move is still taken if it reaches a new best value. Equal moves are
    ranked by how many meetings they take off a professor's requested (or
    else lightest) day, since the day-off penalty itself only changes once
    the last such meeting leaves.
    """
    best = None
    ties = 0
    nudge = 0.1 * st.w_prof
    P = st.P

    targets: dict[int, int | None] = {}

    def target(p: int) -> int | None:
        """Day professor p should clear: the requested one, else the lightest."""
        if p not in targets:
            r = st.req[p]
            if r is None and st.ndays[p] == st.D:
                teach = st.teach[p]
                r = min(range(st.D), key=lambda d: (teach[d], d))
            targets[p] = r
        return targets[p]

    def guide(steps) -> float:
        total = 0
        for j, old, new in steps:
            r = target(st.prof[j])
            if r is not None:
                for x in new:
                    total += x // P == r
                for x in old:
                    total -= x // P == r
        return nudge * total

    def consider(steps, delta):
        nonlocal best, ties
        if any(tabu.get((j, x), 0) > it for j, _, new in steps for x in new) \
                and base + delta >= best_value - 1e-9:
            return
        rank = delta + guide(steps) if nudge else delta
        if best is None or rank < best[2] - 1e-9:
            best, ties = (steps, delta, rank), 1
        elif abs(rank - best[2]) <= 1e-9:
            ties += 1
            if rng.randrange(ties) == 0:
                best = (steps, delta, rank)

    if nudge:
        target(st.prof[i])
    adj = st.adj[i]
    for old in st.groups(i):
        base = st.value
        rem = st.remove(i, old)
        if st.ext[i]:
            for new in st.block_slots[i]:
                if new != old:
                    consider([(i, old, new)], rem + st.add_cost(i, new))
            st.add(i, old)
            continue
        x = old[0]
        for y in st.regular_slots:
            if y == x or y in st.pos[i]:
                continue
            consider([(i, old, (y,))], rem + st.add_cost(i, (y,)))
            blocked = st.conf[i][y]
            if not swaps or not blocked:
                continue
            for j in list(st.occ[y]):
                # only a lone blocking neighbour is worth trading places with
                if adj.get(j) != blocked or st.ext[j] or not st.movable[j] or x in st.pos[j]:
                    continue
                # eject j from y and send it to its cheapest free slot
                part = rem + st.remove(j, (y,))
                part += st.add(i, (y,))
                for z in st.regular_slots:
                    if z != y and z not in st.pos[j]:
                        consider([(i, old, (y,)), (j, (y,), (z,))], part + st.add_cost(j, (z,)))
                st.remove(i, (y,))
                st.add(j, (y,))
        st.add(i, old)
    return None if best is None else best[:2]


def _perturb(st: _State, rng: random.Random, movable: list[int], size: int = 3) -> None:
    bad = [i for i in st.pool.items if st.is_bad(i)]
    source = bad if bad else movable
    for _ in range(size):
        i = source[rng.randrange(len(source))]
        move = _random_move(st, i, rng)
        if move is not None:
            _apply(st, move[0])


# -- phased solve -------------------------------------------------------------


@dataclass
class PhasedLog:
    phase_a: SolveLog
    phase_b: SolveLog
    zero_iteration: int | None
    zero_seconds: float | None


def phase_a_sections(inst: Instance) -> list[str]:
    return [s.id for s in inst.sections
            if (s.is_extended and s.meetings_per_week >= 2) or s.id == inst.common_section_id]


def phased_solve(inst: Instance, g: ConflictGraph, w: SoftWeights | None = None,
                 budget: float = 60.0, seed: int = 0, max_iters: int | None = None,
                 workers: int = 1, share_a: float = 0.25
                 ) -> tuple[Timetable, ConflictReport, PhasedLog]:
    """Extended sections and the common section first, then the rest with those
    fixed, then rooms. ``budget`` and ``max_iters`` are split between the two
    search phases; phase B gets whatever phase A leaves over."""
    w = w or inst.soft_weights
    t0 = time.perf_counter()
    first = phase_a_sections(inst)
    iters_a = None if max_iters is None else max(1, int(max_iters * share_a))
    tt_a, _, log_a = solve(inst, g, w, restrict=first, budget=budget * share_a, seed=seed,
                           max_iters=iters_a, workers=workers)
    left = max(0.0, budget - (time.perf_counter() - t0))
    iters_b = None if max_iters is None else max(1, max_iters - log_a.iterations)
    tt_b, _, log_b = solve(inst, g, w, warm=tt_a, fixed=first, budget=left, seed=seed + 1,
                           max_iters=iters_b, workers=workers)
    final = assign_rooms(inst, tt_b)
    report = score(inst, g, final, w, complete=True)
    zero_it = zero_s = None
    if log_b.zero_iteration is not None:
        zero_it = log_a.iterations + log_b.zero_iteration
        zero_s = log_a.seconds + log_b.zero_seconds
    return final, report, PhasedLog(log_a, log_b, zero_it, zero_s)
