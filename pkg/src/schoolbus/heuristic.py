"""Construct-and-improve routing heuristic.

A solution is held as, per school, a list of visit sets.  The stop order of
each trip is not searched directly: every set is ordered by ``PathCache``
(exact for small sets) for the current objective, and loads are recovered by
a max-flow split.  Local search moves stops between trips of one school:

* relocate -- move a stop visit to another (possibly new) trip
* swap     -- exchange two stop visits between trips
* split    -- also visit a stop from a second trip (split load)
* drop     -- remove a redundant visit
* resplit  -- cut the union of two trips at a point along its best path
* open     -- allow relocations into a new trip while under the trip limit

Moves are tried in a seeded random order and accepted on strict improvement
of the objective key (objective, then travel time).
"""
from __future__ import annotations

import logging
import random
import time
from typing import Iterator

from .instance import Instance, School
from .routing import (
    ObjectiveKind,
    PathCache,
    RoutingSolution,
    SolverConfig,
    TripWeights,
    build_solution,
)
from .trips import assign_loads

log = logging.getLogger(__name__)

Sets = list[frozenset[int]]


def nearest_neighbor_sets(inst: Instance, school: School) -> Sets:
    """Fill buses one at a time, always driving to the nearest unserved stop."""
    D = inst.matrix.rows
    idx = inst.matrix.index
    remaining = {idx[s]: n for s, n in school.demand.items()}
    sets: Sets = []
    while remaining:
        cur, load, trip = idx[school.origin_stop], 0, []
        while load < inst.capacity and remaining:
            s = min(remaining, key=lambda j: (D[cur][j], j))
            q = min(inst.capacity - load, remaining[s])
            remaining[s] -= q
            if remaining[s] == 0:
                del remaining[s]
            load += q
            trip.append(s)
            cur = s
        sets.append(frozenset(trip))
    return sets


class _Search:
    def __init__(self, inst: Instance, config: SolverConfig, deadline: float):
        self.inst = inst
        self.config = config
        self.deadline = deadline
        self.kind = config.objective_kind
        self.cache = PathCache(inst)
        self.weights = TripWeights(inst, self.kind, config.C_B, config.C_C)
        self.schools = list(inst.schools)
        self.ids = inst.matrix.ids
        self.limits = {k.id: inst.trips_allowed(k) for k in self.schools}
        self.ops = set(config.neighborhood_ops)
        self._feasible: dict[tuple, bool] = {}
        self.evaluated = 0

    # -- evaluation -------------------------------------------------------- #

    def trip_key(self, school: School, s: frozenset[int]) -> int:
        return self.cache.best(school, s, self.weights)[0]

    def total(self, state: dict[str, Sets]) -> int:
        self.weights.set_counts({k: len(v) for k, v in state.items()})
        return sum(self.trip_key(k, s) for k in self.schools for s in state[k.id])

    def feasible(self, school: School, sets: Sets) -> bool:
        key = (school.id, tuple(sorted(tuple(sorted(s)) for s in sets)))
        hit = self._feasible.get(key)
        if hit is None:
            visits = [[self.ids[i] for i in sorted(s)] for s in sets]
            hit = assign_loads(school, visits, self.inst.capacity) is not None
            self._feasible[key] = hit
        return hit

    # -- neighborhood ------------------------------------------------------ #

    def moves(self, school: School, sets: Sets) -> Iterator[tuple[str, Sets]]:
        n = len(sets)
        lo, hi = self.limits[school.id]
        ops = self.ops
        for i in range(n):
            for s in sorted(sets[i]):
                rest = sets[i] - {s}
                if "relocate" in ops:
                    for j in range(n):
                        if j != i and s not in sets[j]:
                            new = list(sets)
                            new[j] = sets[j] | {s}
                            if rest:
                                new[i] = rest
                            elif n > lo:
                                del new[i]
                            else:
                                continue
                            yield "relocate", new
                    if "open" in ops and n < hi and rest:
                        new = list(sets)
                        new[i] = rest
                        yield "open", new + [frozenset({s})]
                if "split" in ops:
                    for j in range(n):
                        if j != i and s not in sets[j]:
                            new = list(sets)
                            new[j] = sets[j] | {s}
                            yield "split", new
                if "drop" in ops and any(s in sets[j] for j in range(n) if j != i):
                    new = list(sets)
                    if rest:
                        new[i] = rest
                    elif n > lo:
                        del new[i]
                    else:
                        continue
                    yield "drop", new
        if "swap" in ops:
            for i in range(n):
                for j in range(i + 1, n):
                    for a in sorted(sets[i] - sets[j]):
                        for b in sorted(sets[j] - sets[i]):
                            new = list(sets)
                            new[i] = (sets[i] - {a}) | {b}
                            new[j] = (sets[j] - {b}) | {a}
                            yield "swap", new
        if "resplit" in ops:
            for i in range(n):
                for j in range(i + 1, n):
                    union = sets[i] | sets[j]
                    _, _, path = self.cache.best(school, union, self.weights)
                    for cut in range(1, len(path)):
                        for overlap in (0, 1):
                            a = frozenset(path[: cut + overlap])
                            b = frozenset(path[cut:])
                            if (a, b) == (sets[i], sets[j]) or not a or not b:
                                continue
                            new = list(sets)
                            new[i], new[j] = a, b
                            yield "resplit", new

    # -- descent ----------------------------------------------------------- #

    def descend(self, state: dict[str, Sets], rng: random.Random, budget: int) -> tuple[dict[str, Sets], int]:
        current = self.total(state)
        accepted = 0
        while accepted < budget:
            if time.perf_counter() > self.deadline:
                break
            improved = False
            order = list(self.schools)
            rng.shuffle(order)
            for school in order:
                cands = list(self.moves(school, state[school.id]))
                rng.shuffle(cands)
                for _, new in cands:
                    self.evaluated += 1
                    trial = dict(state)
                    trial[school.id] = new
                    if len(new) == len(state[school.id]):
                        # counts unchanged: only this school's keys move
                        old_part = sum(self.trip_key(school, s) for s in state[school.id])
                        new_part = sum(self.trip_key(school, s) for s in new)
                        value = current - old_part + new_part
                    else:
                        value = self.total(trial)
                        self.weights.set_counts({k: len(v) for k, v in state.items()})
                    if value < current and self.feasible(school, new):
                        state, current = trial, value
                        self.weights.set_counts({k: len(v) for k, v in state.items()})
                        accepted += 1
                        improved = True
                        break
                if improved or time.perf_counter() > self.deadline:
                    break
            if not improved:
                break
        return state, current

    def perturb(self, state: dict[str, Sets], rng: random.Random, strength: int) -> dict[str, Sets]:
        state = dict(state)
        for _ in range(strength):
            school = rng.choice(self.schools)
            options = [new for op, new in self.moves(school, state[school.id]) if op in ("relocate", "swap", "split")]
            rng.shuffle(options)
            for new in options:
                if self.feasible(school, new):
                    state[school.id] = new
                    break
        return state


def construct(inst: Instance) -> dict[str, Sets]:
    return {k.id: nearest_neighbor_sets(inst, k) for k in inst.schools}


def solve_heuristic(inst: Instance, config: SolverConfig | None = None) -> RoutingSolution:
    """Nearest-neighbor construction followed by seeded local search with restarts.

    Deterministic for a fixed seed unless the time limit cuts the search short.
    """
    config = config or SolverConfig()
    t0 = time.perf_counter()
    search = _Search(inst, config, t0 + config.time_limit)
    rng = random.Random(config.seed)

    state = construct(inst)
    budget = config.max_iterations
    if config.objective_kind is ObjectiveKind.MINN:
        # construction already uses the minimum trip count: proven optimal
        budget = 0
    if budget > 0:
        state, value = search.descend(state, rng, budget)
        best, best_value = state, value
        for r in range(config.restarts):
            if time.perf_counter() > search.deadline:
                break
            trial = search.perturb(best, rng, strength=2 + r)
            trial, value = search.descend(trial, rng, budget)
            if value < best_value:
                best, best_value = trial, value
        state = best

    search.weights.set_counts({k: len(v) for k, v in state.items()})
    paths = {
        k.id: [search.cache.best(k, s, search.weights)[2] for s in state[k.id]]
        for k in inst.schools
    }
    trips, schedules, value = build_solution(inst, paths, config.objective_kind, config.C_B, config.C_C)
    timed_out = time.perf_counter() > search.deadline
    return RoutingSolution(
        trips,
        schedules,
        config.objective_kind,
        value,
        bound=None,
        wall_time=time.perf_counter() - t0,
        status="time_limit" if timed_out else "heuristic",
        stats={"evaluated_moves": search.evaluated},
    )

