"""Local search over sectionings, and an exhaustive optimum for small cases.

Moves:

* re-enroll one student in a different section of one course, choosing the
  section that adds the least objective (family members follow: a child
  drags its parent along and an orphaned child is re-seated);
* swap the sections two students hold for a course, together with the
  family-linked courses, which keeps every section load unchanged;
* eject a thinly held edge: every student holding both of its sections is
  re-enrolled out of one of them, and the batch is kept only if the
  objective does not grow.

Only non-worsening moves are accepted. When the search stalls it returns to
the best sectioning seen and kicks it with a few random re-enrollments.
"""

from __future__ import annotations

import random
import time
from collections import Counter
from dataclasses import dataclass, field

from .compiled import Compiled, compile_instance
from .indexset import IndexedSet
from .graph import InvalidSectioningError, Sectioning, validate_sectioning
from .instance import Instance
from .model import ObjectiveSpec, check_objective, objective_value


@dataclass
class ImproveLog:
    iterations: int = 0
    accepted: int = 0
    kicks: int = 0
    seconds: float = 0.0
    start_value: float = 0.0
    # (iteration, seconds, best value) every time the best value drops
    history: list[tuple[int, float, float]] = field(default_factory=list)


class _State:
    """Sectioning plus the pair-sharing counts that define its SCG."""

    # edges held by at most this many students are ejection candidates
    thin = 3

    def __init__(self, cm: Compiled, obj: ObjectiveSpec, assign: list[dict[int, int]]):
        self.cm = cm
        self.weight = cm.weight_table(obj.pair_weights)
        self.d = obj.weights.d
        sidx = cm.inst.section_index
        self.tabu = {(cm.student_index[g], sidx[s]) for g, s in obj.tabu_pairs}
        self.load(assign)

    def load(self, assign: list[dict[int, int]]) -> None:
        cm = self.cm
        self.assign = [dict(a) for a in assign]
        self.size = [0] * cm.n
        self.members: list[list[int]] = [[] for _ in range(cm.n)]
        self.count: Counter = Counter()
        for g, held in enumerate(self.assign):
            secs = list(held.values())
            for i, s in enumerate(secs):
                self.size[s] += 1
                self.members[s].append(g)
                for u in secs[:i]:
                    self.count[cm.key(s, u)] += 1
        base = cm.base_keys
        self.low = IndexedSet(k for k, v in self.count.items() if v <= self.thin and k not in base)
        self.value = self.recompute()

    def recompute(self) -> float:
        keys = set(self.cm.base_keys)
        keys.update(k for k, v in self.count.items() if v > 0)
        total = sum(self.weight(k) for k in keys)
        if self.tabu:
            total += self.d * sum(1 for g, s in self.tabu if s in self.assign[g].values())
        return total

    # -- move evaluation ---------------------------------------------------

    def pair_delta(self, g: int, changes: dict[int, int], dk: Counter) -> float:
        """Accumulate pair-count changes for student g into dk; return tabu delta."""
        key = self.cm.key
        held = self.assign[g]
        removed = [held[c] for c in changes]
        added = list(changes.values())
        kept = [s for c, s in held.items() if c not in changes]
        for i, r in enumerate(removed):
            for k in kept:
                dk[key(r, k)] -= 1
            for r2 in removed[:i]:
                dk[key(r, r2)] -= 1
        for i, a in enumerate(added):
            for k in kept:
                dk[key(a, k)] += 1
            for a2 in added[:i]:
                dk[key(a, a2)] += 1
        tabu_delta = 0.0
        if self.tabu:
            for r in removed:
                if (g, r) in self.tabu:
                    tabu_delta -= self.d
            for a in added:
                if (g, a) in self.tabu:
                    tabu_delta += self.d
        return tabu_delta

    def edge_delta(self, dk: Counter) -> float:
        delta = 0.0
        base, count, weight = self.cm.base_keys, self.count, self.weight
        for k, d in dk.items():
            if d == 0 or k in base:
                continue
            old = count.get(k, 0)
            new = old + d
            if old == 0 and new > 0:
                delta += weight(k)
            elif old > 0 and new == 0:
                delta -= weight(k)
        return delta

    def apply(self, moves: list[tuple[int, dict[int, int]]], dk: Counter, delta: float) -> None:
        for g, changes in moves:
            held = self.assign[g]
            for c, s in changes.items():
                old = held[c]
                self.size[old] -= 1
                self.members[old].remove(g)
                self.size[s] += 1
                self.members[s].append(g)
                held[c] = s
        count, low, base = self.count, self.low, self.cm.base_keys
        for k, d in dk.items():
            if d:
                v = count[k] + d
                if v:
                    count[k] = v
                else:
                    del count[k]
                if 0 < v <= self.thin and k not in base:
                    low.add(k)
                else:
                    low.discard(k)
        self.value += delta

    # -- family-aware move construction -------------------------------------

    def reenroll_changes(self, g: int, c: int, s_new: int) -> dict[int, int] | None:
        """All course changes needed to put g into s_new; None if impossible."""
        cm = self.cm
        held = self.assign[g]
        need = held.keys()
        changes = {c: s_new}

        def now(course: int) -> int:
            return changes.get(course, held[course])

        for _ in range(2 * len(held) + 2):
            stable = True
            for course in list(changes):
                p = cm.parent[changes[course]]
                if p >= 0 and now(cm.course_of[p]) != p:
                    pc = cm.course_of[p]
                    if pc not in need or pc in changes:
                        return None
                    changes[pc] = p
                    stable = False
            for course in need:
                t = now(course)
                p = cm.parent[t]
                if p >= 0 and now(cm.course_of[p]) != p:
                    if course in changes:
                        return None
                    for alt in cm.course_sections[course]:
                        pa = cm.parent[alt]
                        if (pa < 0 or now(cm.course_of[pa]) == pa) and self.size[alt] < cm.cap[alt]:
                            changes[course] = alt
                            break
                    else:
                        return None
                    stable = False
            if stable:
                break
        else:
            return None
        changes = {k: v for k, v in changes.items() if held[k] != v}
        for s in changes.values():
            if self.size[s] >= cm.cap[s]:
                return None
        return changes or None

    def family_courses(self, g: int, c: int) -> set[int]:
        cm = self.cm
        held = self.assign[g]
        s = held[c]
        root = cm.parent[s] if cm.parent[s] >= 0 else s
        out = {cm.course_of[root]}
        for course, t in held.items():
            if cm.parent[t] == root:
                out.add(course)
        return out

    def valid_family(self, sections) -> bool:
        held = set(sections)
        parent = self.cm.parent
        return all(parent[s] < 0 or parent[s] in held for s in held)


def _copy_assign(assign):
    return [dict(a) for a in assign]


def improve(inst: Instance, start: Sectioning, obj: ObjectiveSpec | None = None,
            budget: float = 10.0, seed: int = 0, max_iters: int | None = None,
            patience: int = 2000, kick_size: int = 3, workers: int = 1,
            exchange=None, target: float | None = None) -> tuple[Sectioning, float, ImproveLog]:
    """Improve ``start`` under ``obj`` for at most ``budget`` seconds.

    With ``max_iters`` set and the budget not reached first, a run is fully
    determined by ``seed``. ``workers > 1`` runs independent seeds
    (``seed``, ``seed + 1``, ...) in separate processes and returns the best.
    The search also stops once the value is at most ``target``, when given.
    """
    obj = obj or ObjectiveSpec(weights=inst.edge_weights)
    if workers > 1:
        from .portfolio import improve_portfolio
        return improve_portfolio(inst, start, obj, budget, seed, max_iters, patience,
                                 kick_size, workers, target)
    problems = validate_sectioning(inst, start)
    if problems:
        raise InvalidSectioningError(problems)
    check_objective(inst, obj)
    cm = compile_instance(inst)
    rng = random.Random(seed)
    st = _State(cm, obj, cm.from_sectioning(start))
    log = ImproveLog(start_value=st.value)
    best_value = st.value
    best_assign = _copy_assign(st.assign)
    best_snap_value = st.value
    # no sectioning goes below the base edges
    stop_at = sum(st.weight(k) for k in cm.base_keys)
    if target is not None:
        stop_at = max(stop_at, target)

    n_students = len(cm.student_ids)
    choice_courses = [[c for c in cm.student_courses[g] if len(cm.course_sections[c]) > 1]
                      for g in range(n_students)]
    movable = [g for g in range(n_students) if choice_courses[g]]
    t0 = time.perf_counter()
    stall = 0
    it = 0
    while movable and best_value > stop_at:
        if max_iters is not None and it >= max_iters:
            break
        if it & 255 == 0 and time.perf_counter() - t0 >= budget:
            break
        it += 1
        g = movable[rng.randrange(len(movable))]
        c = rng.choice(choice_courses[g])
        roll = rng.random()
        if roll < 0.4 and st.low:
            move = None
            if _eject(st, rng) is not None:
                log.accepted += 1
        elif roll < 0.7:
            move = _best_reenroll(st, g, c, rng)
        else:
            move = _swap(st, g, c, rng)
        if move is not None:
            moves, dk, delta = move
            if delta <= 0:
                st.apply(moves, dk, delta)
                log.accepted += 1
        if st.value < best_value - 1e-9:
            best_value = st.value
            stall = 0
            log.history.append((it, time.perf_counter() - t0, best_value))
        else:
            stall += 1
        if stall >= patience:
            stall = 0
            log.kicks += 1
            if st.value < best_snap_value:
                best_assign, best_snap_value = _copy_assign(st.assign), st.value
            if exchange is not None:
                shared = exchange.offer(best_snap_value, best_assign)
                if shared is not None:
                    best_snap_value, best_assign = shared
                    best_value = min(best_value, best_snap_value)
            if st.value > best_snap_value:
                st.load(best_assign)
            _kick(st, rng, movable, choice_courses, kick_size)
    if st.value < best_snap_value:
        best_assign, best_snap_value = _copy_assign(st.assign), st.value
    log.iterations = it
    log.seconds = time.perf_counter() - t0
    result = cm.to_sectioning(best_assign)
    value = objective_value(inst, result, obj)
    assert abs(value - best_snap_value) < 1e-6, (value, best_snap_value)
    return result, value, log


def _best_reenroll(st: _State, g: int, c: int, rng: random.Random):
    cm = st.cm
    current = st.assign[g][c]
    best = None
    ties = 0
    for s in cm.course_sections[c]:
        if s == current:
            continue
        changes = st.reenroll_changes(g, c, s)
        if changes is None:
            continue
        dk: Counter = Counter()
        delta = st.pair_delta(g, changes, dk) + st.edge_delta(dk)
        if best is None or delta < best[2] - 1e-12:
            best = ([(g, changes)], dk, delta)
            ties = 1
        elif abs(delta - best[2]) <= 1e-12:
            ties += 1
            if rng.randrange(ties) == 0:
                best = ([(g, changes)], dk, delta)
    return best


def _swap(st: _State, g: int, c: int, rng: random.Random):
    cm = st.cm
    s = st.assign[g][c]
    others = [t for t in cm.course_sections[c] if t != s and st.members[t]]
    if not others:
        return None
    t = rng.choice(others)
    h = rng.choice(st.members[t])
    courses = st.family_courses(g, c) | st.family_courses(h, c)
    held_g, held_h = st.assign[g], st.assign[h]
    if not all(k in held_g and k in held_h for k in courses):
        return None
    ch_g = {k: held_h[k] for k in courses if held_g[k] != held_h[k]}
    ch_h = {k: held_g[k] for k in courses if held_g[k] != held_h[k]}
    if not ch_g:
        return None
    new_g = [ch_g.get(k, v) for k, v in held_g.items()]
    new_h = [ch_h.get(k, v) for k, v in held_h.items()]
    if not (st.valid_family(new_g) and st.valid_family(new_h)):
        return None
    dk: Counter = Counter()
    delta = st.pair_delta(g, ch_g, dk) + st.pair_delta(h, ch_h, dk)
    delta += st.edge_delta(dk)
    return [(g, ch_g), (h, ch_h)], dk, delta


def _kick(st: _State, rng: random.Random, movable, choice_courses, size: int) -> None:
    cm = st.cm
    for _ in range(size * 10):
        if size <= 0:
            break
        g = movable[rng.randrange(len(movable))]
        c = rng.choice(choice_courses[g])
        options = [s for s in cm.course_sections[c] if s != st.assign[g][c]]
        changes = st.reenroll_changes(g, c, rng.choice(options))
        if changes is None:
            continue
        dk: Counter = Counter()
        delta = st.pair_delta(g, changes, dk) + st.edge_delta(dk)
        st.apply([(g, changes)], dk, delta)
        size -= 1


# -- exhaustive optimum ------------------------------------------------------


class SearchLimitError(ValueError):
    def __init__(self, product: int, limit: int):
        super().__init__(f"sectioning space has {product} assignments, above the limit {limit}")
        self.product = product
        self.limit = limit


def choice_space(inst: Instance) -> int:
    by_course = inst.course_sections
    total = 1
    for g in inst.students:
        for c in g.required_course_ids:
            total *= len(by_course[c])
    return total


def brute_force_optimum(inst: Instance, obj: ObjectiveSpec | None = None,
                        limit: int = 10**6) -> tuple[Sectioning, float]:
    """Global optimum by depth-first enumeration with capacity/family pruning.

    The partial objective never decreases as students are added, so branches
    at or above the incumbent are cut. Students of one major-group are
    interchangeable; their schedules are enumerated in non-decreasing order.
    """
    obj = obj or ObjectiveSpec(weights=inst.edge_weights)
    check_objective(inst, obj)
    product = choice_space(inst)
    if product > limit:
        raise SearchLimitError(product, limit)
    cm = compile_instance(inst)
    weight = cm.weight_table(obj.pair_weights)
    sidx = inst.section_index
    tabu = {(cm.student_index[g], sidx[s]) for g, s in obj.tabu_pairs}
    d = obj.weights.d
    n_students = len(cm.student_ids)
    order = [sorted(cm.student_courses[g], key=lambda c: (cm.is_child_course[c], c))
             for g in range(n_students)]
    prev_same = [g - 1 if g > 0 and cm.student_group[g - 1] == cm.student_group[g] and
                 not tabu else -1 for g in range(n_students)]
    size = [0] * cm.n
    count: Counter = Counter()
    held: list[list[int]] = [[] for _ in range(n_students)]
    best = [float("inf"), None]
    base_value = sum(weight(k) for k in cm.base_keys)

    def dfs(g: int, pos: int, value: float, tied: bool):
        if value >= best[0] - 1e-12:
            return
        if g == n_students:
            best[0] = value
            best[1] = [list(h) for h in held]
            return
        courses = order[g]
        if pos == len(courses):
            dfs(g + 1, 0, value, prev_same[g + 1] >= 0 if g + 1 < n_students else False)
            return
        c = courses[pos]
        mine = held[g]
        floor = held[prev_same[g]][pos] if tied else -1
        for s in cm.course_sections[c]:
            if s < floor or size[s] >= cm.cap[s]:
                continue
            p = cm.parent[s]
            if p >= 0 and p not in mine:
                continue
            added = 0.0
            keys = []
            for u in mine:
                k = cm.key(s, u)
                keys.append(k)
                if count[k] == 0 and k not in cm.base_keys:
                    added += weight(k)
                count[k] += 1
            if (g, s) in tabu:
                added += d
            size[s] += 1
            mine.append(s)
            dfs(g, pos + 1, value + added, tied and s == floor)
            mine.pop()
            size[s] -= 1
            for k in keys:
                count[k] -= 1

    dfs(0, 0, base_value, False)
    if best[1] is None:
        raise InvalidSectioningError([])
    assign = [{cm.course_of[s]: s for s in secs} for secs in best[1]]
    f = cm.to_sectioning(assign)
    return f, objective_value(inst, f, obj)


def _eject(st: _State, rng: random.Random) -> float | None:
    """Try to empty one thinly held edge; returns the delta if kept."""
    cm = st.cm
    s, u = cm.unkey(st.low.items[rng.randrange(len(st.low))])
    cs, cu = cm.course_of[s], cm.course_of[u]
    holders = [g for g in st.members[s] if st.assign[g].get(cu) == u]
    rng.shuffle(holders)
    done: list[tuple[int, dict[int, int]]] = []
    total = 0.0
    for g in holders:
        held = st.assign[g]
        best = None
        for c, cur in ((cs, s), (cu, u)):
            if held.get(c) == cur and len(cm.course_sections[c]) > 1:
                cand = _best_reenroll(st, g, c, rng)
                if cand is not None and (best is None or cand[2] < best[2]):
                    best = cand
        if best is None:
            total = float("inf")
            break
        moves, dk, delta = best
        back = {c: held[c] for c in moves[0][1]}
        st.apply(moves, dk, delta)
        done.append((g, back))
        total += delta
    if total <= 0:
        return total
    for g, back in reversed(done):
        dk: Counter = Counter()
        delta = st.pair_delta(g, back, dk) + st.edge_delta(dk)
        st.apply([(g, back)], dk, delta)
    return None
