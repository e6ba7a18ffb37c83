"""Enumerative exact solver for desk-scale instances.

Only the objective couples schools, and with start times pinned at
dismissal it does so through the trip counts alone: once every school's
number of trips is fixed, each outgoing compatibility edge is a property of
its tail trip.  So for every admissible trips-per-school vector the problem
splits into one subproblem per school, solved by branch and bound over
candidate trips (stop subset, last stop, cheapest ordering).  Feasibility of
a chosen multiset of trips is Hall's condition for splitting each stop's
students over the trips that visit it.
"""
from __future__ import annotations

import itertools
import logging
import time

from .heuristic import construct
from .instance import Instance, School
from .routing import (
    PathCache,
    RoutingSolution,
    SolverConfig,
    TripWeights,
    build_solution,
)

log = logging.getLogger(__name__)


class ExactSolverGuardError(ValueError):
    """Instance too large (or outside the model) for exhaustive search."""


class _Timeout(Exception):
    pass


def exact_admissible(inst: Instance, config: SolverConfig) -> str | None:
    """Return a reason the exact solver refuses ``inst``, or None."""
    if inst.buffer_pickup != 0:
        return "exact solver requires buffer_pickup = 0"
    n_trips = sum(inst.trips_allowed(k)[1] for k in inst.schools)
    if n_trips > config.exact_max_trips:
        return f"{n_trips} trips exceed the exact guard ({config.exact_max_trips})"
    widest = max((len(k.demand) for k in inst.schools), default=0)
    if widest > config.exact_max_stops:
        return f"{widest} stops at one school exceed the exact guard ({config.exact_max_stops})"
    return None


class _School:
    """Candidate trips and Hall data for one school."""

    def __init__(self, inst: Instance, school: School, cache: PathCache):
        self.school = school
        idx = inst.matrix.index
        self.stop_idx = [idx[s] for s in school.demand]
        self.n = len(self.stop_idx)
        self.full = (1 << self.n) - 1
        dem = [school.demand[s] for s in school.demand]
        self.demand = [0] * (1 << self.n)
        for mask in range(1, 1 << self.n):
            low = mask & -mask
            self.demand[mask] = self.demand[mask ^ low] + dem[low.bit_length() - 1]
        self.cap = inst.capacity
        # (mask, last, tt, path) for every nonempty subset and every last stop
        self.raw = []
        for mask in range(1, 1 << self.n):
            members = frozenset(self.stop_idx[i] for i in range(self.n) if mask >> i & 1)
            for last, (tt, path) in cache.get(school, members).items():
                self.raw.append((mask, last, tt, path))

    def hall_ok(self, masks: list[int]) -> bool:
        cap = self.cap
        demand = self.demand
        for u in range(1, self.full + 1):
            hit = 0
            for m in masks:
                if m & u:
                    hit += 1
            if demand[u] > cap * hit:
                return False
        return True


def _solve_school(sd: _School, weights: TripWeights, n_trips: int, deadline: float):
    """Best multiset of ``n_trips`` candidates, as ``(key_sum, [paths])`` or None."""
    school = sd.school
    cands = sorted(
        ((weights.key(school, last, tt), mask, path) for mask, last, tt, path in sd.raw),
        key=lambda c: (c[0], c[1], c[2]),
    )
    # drop candidates dominated by a no-worse superset
    kept: list[tuple[int, int, tuple[int, ...]]] = []
    for c in cands:
        if any((m & c[1]) == c[1] for _, m, _ in kept):
            continue
        kept.append(c)
    keys = [c[0] for c in kept]
    masks = [c[1] for c in kept]
    suffix = [0] * (len(kept) + 1)
    for i in range(len(kept) - 1, -1, -1):
        suffix[i] = suffix[i + 1] | masks[i]

    best_key: list = [None]
    best_pick: list = [None]
    full = sd.full
    counter = [0]

    def dfs(start: int, depth: int, acc: int, picked: list[int], covered: int):
        counter[0] += 1
        if counter[0] & 1023 == 0 and time.perf_counter() > deadline:
            raise _Timeout
        if depth == n_trips:
            if covered == full and sd.hall_ok([masks[i] for i in picked]):
                if best_key[0] is None or acc < best_key[0]:
                    best_key[0] = acc
                    best_pick[0] = list(picked)
            return
        r = n_trips - depth
        for i in range(start, len(kept)):
            if best_key[0] is not None and acc + r * keys[i] >= best_key[0]:
                break
            if covered | suffix[i] != full:
                break
            picked.append(i)
            dfs(i, depth + 1, acc + keys[i], picked, covered | masks[i])
            picked.pop()

    timed_out = False
    try:
        dfs(0, 0, 0, [], 0)
    except _Timeout:
        timed_out = True
    lower = n_trips * keys[0] if keys else 0
    if best_key[0] is None:
        return None, lower, timed_out
    return (best_key[0], [kept[i][2] for i in best_pick[0]]), lower, timed_out


def _min_key(sd: _School, weights: TripWeights) -> int:
    return min(weights.key(sd.school, last, tt) for _, last, tt, _ in sd.raw)


def solve_exact(inst: Instance, config: SolverConfig | None = None) -> RoutingSolution:
    """Provably optimal routing for ``config.objective_kind`` on small instances.

    Ties on the objective are broken by lower total travel time, then by the
    canonical candidate order, so the result is deterministic.  If the time
    limit is hit the best incumbent is returned with a valid lower bound.
    """
    config = config or SolverConfig()
    reason = exact_admissible(inst, config)
    if reason:
        raise ExactSolverGuardError(reason)
    t0 = time.perf_counter()
    deadline = t0 + config.time_limit
    kind = config.objective_kind
    cache = PathCache(inst)
    weights = TripWeights(inst, kind, config.C_B, config.C_C)
    schools = [_School(inst, k, cache) for k in inst.schools]
    ranges = [range(inst.trips_allowed(k)[0], inst.trips_allowed(k)[1] + 1) for k in inst.schools]

    best = None  # (key_sum, paths_by_school)
    lower_bound = None  # min over count vectors of a valid per-vector bound
    complete = True
    for counts in itertools.product(*ranges):
        weights.set_counts({k.id: n for k, n in zip(inst.schools, counts)})
        total, lb_total, paths, feasible = 0, 0, {}, True
        for sd, n in zip(schools, counts):
            if not complete:
                lb_total += n * _min_key(sd, weights)
                feasible = False
                continue
            res, lb, timed_out = _solve_school(sd, weights, n, deadline)
            if timed_out:
                complete = False
            if res is None:
                feasible = False
                lb_total += lb
            else:
                lb_total += lb if timed_out else res[0]
                total += res[0]
                paths[sd.school.id] = res[1]
        lower_bound = lb_total if lower_bound is None else min(lower_bound, lb_total)
        if feasible and (best is None or total < best[0]):
            best = (total, paths)
        if time.perf_counter() > deadline:
            complete = False

    if best is None:
        # timed out before any count vector produced an incumbent
        weights.set_counts({})
        start = construct(inst)
        weights.set_counts({k: len(v) for k, v in start.items()})
        best = (None, {k.id: [cache.best(k, s, weights)[2] for s in start[k.id]] for k in inst.schools})
    trips, schedules, value = build_solution(inst, best[1], kind, config.C_B, config.C_C)
    if complete:
        bound, status = value, "optimal"
    else:
        bound = weights.primary_value(lower_bound // weights.big) if lower_bound is not None else None
        status = "time_limit"
        log.warning("exact solver hit the time limit; returning incumbent")
    return RoutingSolution(
        trips,
        schedules,
        kind,
        value,
        bound=bound,
        wall_time=time.perf_counter() - t0,
        status=status,
    )
