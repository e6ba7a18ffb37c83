"""Objectives, solver configuration and the routing solution container."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Mapping, Sequence

from .instance import Instance, School, to_minutes
from .paths import endpoint_paths
from .trips import (
    CompatibilityGraph,
    Trip,
    TripSchedule,
    assign_loads,
    build_compatibility_graph,
    loads_from_counts,
    schedule_trip,
)


class ObjectiveKind(str, enum.Enum):
    MAXCOM_TT = "maxcom+tt"
    MAXCOM = "maxcom"
    MINN = "minn"
    MINTT = "mintt"

    @classmethod
    def parse(cls, text: "str | ObjectiveKind") -> "ObjectiveKind":
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower().replace(" ", "").replace("_", "")
        aliases = {"maxcomtt": "maxcom+tt", "maxcom+tt": "maxcom+tt"}
        key = aliases.get(key, key)
        for kind in cls:
            if kind.value == key:
                return kind
        raise ValueError(f"unknown objective {text!r}; choose from {[k.value for k in cls]}")

    @property
    def label(self) -> str:
        return {"maxcom+tt": "MaxCom+TT", "maxcom": "MaxCom", "minn": "MinN", "mintt": "MinTT"}[self.value]


ALL_OBJECTIVES = tuple(ObjectiveKind)

DEFAULT_OPS = ("relocate", "swap", "split", "drop", "resplit", "open")


@dataclass(frozen=True)
class SolverConfig:
    objective_kind: ObjectiveKind = ObjectiveKind.MAXCOM_TT
    C_B: float = 1000
    C_C: float = 200
    time_limit: float = 60.0
    seed: int = 0
    neighborhood_ops: tuple[str, ...] = DEFAULT_OPS
    restarts: int = 4
    max_iterations: int = 10_000
    # guard for the enumerative solver
    exact_max_trips: int = 8
    exact_max_stops: int = 7

    def __post_init__(self):
        if self.time_limit <= 0:
            raise ValueError("time_limit must be positive")
        object.__setattr__(self, "objective_kind", ObjectiveKind.parse(self.objective_kind))
        unknown = set(self.neighborhood_ops) - set(DEFAULT_OPS)
        if unknown:
            raise ValueError(f"unknown neighborhood ops {sorted(unknown)}")


@dataclass
class RoutingSolution:
    trips: list[Trip]
    schedules: dict[str, TripSchedule]
    objective_kind: ObjectiveKind
    objective_value: float
    bound: float | None = None
    wall_time: float = 0.0
    status: str = "heuristic"
    stats: dict = field(default_factory=dict)

    @property
    def gap(self) -> float | None:
        """Relative gap in percent between value and bound, if a bound exists."""
        if self.bound is None:
            return None
        diff = self.objective_value - self.bound
        if diff <= 0:
            return 0.0
        return 100.0 * diff / max(abs(self.objective_value), 1e-9)

    @property
    def total_tt(self) -> int:
        return sum(s.travel_time for s in self.schedules.values())


def evaluate_objective(
    trips: Sequence[Trip],
    schedules: Mapping[str, TripSchedule],
    compat: CompatibilityGraph,
    kind: ObjectiveKind | str,
    C_B: float = 1000,
    C_C: float = 200,
) -> float:
    kind = ObjectiveKind.parse(kind)
    if not trips:
        return 0.0
    tt = sum(to_minutes(schedules[t.id].travel_time) for t in trips)
    edges = compat.n_edges
    if kind is ObjectiveKind.MAXCOM_TT:
        return tt + C_B * len(trips) - C_C * edges
    if kind is ObjectiveKind.MAXCOM:
        return float(-edges)
    if kind is ObjectiveKind.MINN:
        return float(len(trips))
    return float(tt)


# --------------------------------------------------------------------------- #
# shared machinery for both solvers


class TripWeights:
    """Integer sort keys for single trips under a fixed trips-per-school vector.

    With start times pinned at dismissal, whether trip t can precede the trips
    of school k depends only on t's school, last stop and duration, so every
    compatibility edge can be charged to its tail trip.  The key packs the
    objective contribution (primary) above the trip duration (tie-break).
    """

    def __init__(self, inst: Instance, kind: ObjectiveKind, C_B: float, C_C: float):
        self.inst = inst
        self.kind = kind
        self.D = inst.matrix.rows
        self.idx = inst.matrix.index
        cb, cc = Fraction(str(C_B)), Fraction(str(C_C))
        scale = lcm(cb.denominator, cc.denominator)
        self.scale = scale
        self.cb = int(cb * scale) * 10  # per-trip penalty in scaled ticks
        self.cc = int(cc * scale) * 10
        self.schools = list(inst.schools)
        self.origin = {k.id: self.idx[k.origin_stop] for k in self.schools}
        max_tt = max((self.D[i][j] for i in range(len(self.D)) for j in range(len(self.D))), default=0)
        n_stops = sum(len(k.demand) for k in self.schools)
        n_trips = sum(inst.trips_allowed(k)[1] for k in self.schools)
        # tie-break sums of durations must stay below one primary unit
        self.big = (max_tt + 1) * (n_stops + 1) * (n_trips + 1) + 1
        self.n: dict[str, int] = {}

    def set_counts(self, n: Mapping[str, int]) -> None:
        self.n = dict(n)

    def out_edges(self, school: School, last: int, tt: int) -> int:
        end = school.dismissal + tt
        e = 0
        for k2 in self.schools:
            if end + self.D[last][self.origin[k2.id]] <= k2.dismissal:
                e += self.n.get(k2.id, 0) - (1 if k2.id == school.id else 0)
        return e

    def primary(self, school: School, last: int, tt: int) -> int:
        kind = self.kind
        if kind is ObjectiveKind.MAXCOM_TT:
            return tt * self.scale + self.cb - self.cc * self.out_edges(school, last, tt)
        if kind is ObjectiveKind.MAXCOM:
            return -self.out_edges(school, last, tt)
        if kind is ObjectiveKind.MINN:
            return 1
        return tt

    def key(self, school: School, last: int, tt: int) -> int:
        return self.primary(school, last, tt) * self.big + tt

    def primary_value(self, total_primary: int) -> float:
        """Convert a summed primary key back to objective units (minutes)."""
        if self.kind is ObjectiveKind.MAXCOM_TT:
            return total_primary / (10 * self.scale)
        if self.kind is ObjectiveKind.MINTT:
            return total_primary / 10
        return float(total_primary)


class PathCache:
    """Memoised endpoint paths keyed by (school, stop set)."""

    def __init__(self, inst: Instance):
        self.inst = inst
        self.D = inst.matrix.rows
        self.idx = inst.matrix.index
        self._cache: dict[tuple[str, frozenset[int]], dict[int, tuple[int, tuple[int, ...]]]] = {}

    def get(self, school: School, stops: frozenset[int]):
        key = (school.id, stops)
        hit = self._cache.get(key)
        if hit is None:
            hit = endpoint_paths(self.idx[school.origin_stop], stops, self.D)
            self._cache[key] = hit
        return hit

    def best(self, school: School, stops: frozenset[int], weights: TripWeights) -> tuple[int, int, tuple[int, ...]]:
        """``(key, tt, path)`` of the best ordering of ``stops`` for ``weights``."""
        best = None
        for last, (tt, path) in self.get(school, stops).items():
            k = weights.key(school, last, tt)
            if best is None or k < best[0]:
                best = (k, tt, path)
        return best


def build_solution(
    inst: Instance,
    paths_by_school: Mapping[str, Sequence[tuple[int, ...]]],
    kind: ObjectiveKind,
    C_B: float,
    C_C: float,
) -> tuple[list[Trip], dict[str, TripSchedule], float]:
    """Turn per-school index paths into trips with loads and schedules."""
    ids = inst.matrix.ids
    trips: list[Trip] = []
    for k in inst.schools:
        paths = sorted(tuple(ids[i] for i in p) for p in paths_by_school.get(k.id, ()))
        counts = assign_loads(k, paths, inst.capacity)
        if counts is None:
            raise RuntimeError(f"school {k.id}: trips cannot carry all students")
        for i, (p, c) in enumerate(zip(paths, counts)):
            trips.append(Trip(f"{k.id}-{i}", k.id, p, loads_from_counts(c, inst.capacity)))
    schedules = {t.id: schedule_trip(t, inst) for t in trips}
    compat = build_compatibility_graph(trips, inst)
    value = evaluate_objective(trips, schedules, compat, kind, C_B, C_C)
    return trips, schedules, value
