"""Trips, their schedules, deadheads and pairwise compatibility."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .instance import Instance, School, Violation, to_minutes, to_ticks


@dataclass(frozen=True)
class Trip:
    """Open PM path from the school origin through ``stops`` in order.

    ``loads`` maps a visited stop to the fraction of bus capacity filled there;
    a stop may be passed through with no load entry.
    """

    id: str
    school: str
    stops: tuple[str, ...]
    loads: Mapping[str, Fraction] = field(default_factory=dict)

    @property
    def last_stop(self) -> str:
        return self.stops[-1]


@dataclass(frozen=True)
class TripSchedule:
    start: int
    travel_time: int
    end: int


def trip_travel_time(trip: Trip, inst: Instance) -> int:
    """Duration from the school origin to the last stop, in ticks.

    The closing arc back to the school is not part of a PM trip.
    """
    d = inst.matrix
    prev = inst.school(trip.school).origin_stop
    total = 0
    for sid in trip.stops:
        total += d(prev, sid)
        prev = sid
    return total


def schedule_trip(trip: Trip, inst: Instance, start: int | None = None) -> TripSchedule:
    school = inst.school(trip.school)
    if start is None:
        start = school.dismissal
    if not school.dismissal <= start <= school.dismissal + inst.buffer_pickup:
        raise ValueError(
            f"trip {trip.id}: start {start} outside [{school.dismissal}, {school.dismissal + inst.buffer_pickup}]"
        )
    tt = trip_travel_time(trip, inst)
    return TripSchedule(start, tt, start + tt)


def deadhead(t1: Trip, t2: Trip, inst: Instance) -> int:
    """Empty drive from the last stop of ``t1`` to the origin of ``t2``'s school."""
    return inst.matrix(t1.last_stop, inst.school(t2.school).origin_stop)


def is_compatible(t1: Trip, t2: Trip, schedules: Mapping[str, TripSchedule], inst: Instance) -> bool:
    if t1.id == t2.id:
        return False
    return schedules[t1.id].end + deadhead(t1, t2, inst) <= schedules[t2.id].start


@dataclass(frozen=True)
class CompatibilityGraph:
    nodes: tuple[str, ...]
    deadhead: Mapping[tuple[str, str], int]
    edges: frozenset[tuple[str, str]]

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def successors(self) -> dict[str, list[str]]:
        order = {t: i for i, t in enumerate(self.nodes)}
        out: dict[str, list[str]] = {t: [] for t in self.nodes}
        for a, b in sorted(self.edges, key=lambda e: (order[e[0]], order[e[1]])):
            out[a].append(b)
        return out

    @classmethod
    def from_edges(cls, nodes: Iterable[str], edges: Iterable[tuple[str, str]]) -> "CompatibilityGraph":
        """Bare graph without deadheads, handy for blocking tests."""
        return cls(tuple(nodes), {}, frozenset(edges))


def _unpack(solution) -> tuple[list[Trip], dict[str, TripSchedule] | None]:
    if hasattr(solution, "trips"):
        return list(solution.trips), getattr(solution, "schedules", None)
    return list(solution), None


def default_schedules(trips: Iterable[Trip], inst: Instance) -> dict[str, TripSchedule]:
    return {t.id: schedule_trip(t, inst) for t in trips}


def build_compatibility_graph(solution, inst: Instance) -> CompatibilityGraph:
    """All ordered compatible pairs over the trips of ``solution``.

    ``solution`` is a routing solution or a plain sequence of trips; trips
    without a schedule start at their school's dismissal.
    """
    trips, schedules = _unpack(solution)
    sched = dict(schedules or {})
    for t in trips:
        if t.id not in sched:
            sched[t.id] = schedule_trip(t, inst)
    dd: dict[tuple[str, str], int] = {}
    edges = set()
    for a in trips:
        for b in trips:
            if a.id == b.id:
                continue
            dd[a.id, b.id] = deadhead(a, b, inst)
            if sched[a.id].end + dd[a.id, b.id] <= sched[b.id].start:
                edges.add((a.id, b.id))
    return CompatibilityGraph(tuple(t.id for t in trips), dd, frozenset(edges))


def check_routing_feasibility(solution, inst: Instance) -> list[Violation]:
    trips, schedules = _unpack(solution)
    out: list[Violation] = []
    schools = {k.id: k for k in inst.schools}
    served: dict[tuple[str, str], Fraction] = {}
    per_school: dict[str, int] = {k: 0 for k in schools}
    seen_ids: set[str] = set()

    for t in trips:
        if t.id in seen_ids:
            out.append(Violation("unique-trip-ids", f"duplicate trip id {t.id}"))
        seen_ids.add(t.id)
        school = schools.get(t.school)
        if school is None:
            out.append(Violation("trip-school", f"trip {t.id}: unknown school {t.school!r}"))
            continue
        per_school[t.school] += 1
        if not t.stops:
            out.append(Violation("trip-nonempty", f"trip {t.id} visits no stop"))
            continue
        if len(set(t.stops)) != len(t.stops):
            out.append(Violation("simple-path", f"trip {t.id} repeats a stop"))
        foreign = [s for s in t.stops if s not in school.demand]
        if foreign:
            out.append(Violation("school-stops", f"trip {t.id} visits stops of another school: {foreign}"))
        total = Fraction(0)
        for sid, frac in t.loads.items():
            frac = Fraction(frac)
            if sid not in t.stops:
                out.append(Violation("load-at-visited-stop", f"trip {t.id} loads at unvisited stop {sid}"))
            if not 0 < frac <= 1:
                out.append(Violation("load-range", f"trip {t.id} stop {sid}: load {frac}"))
            total += frac
            served[t.school, sid] = served.get((t.school, sid), Fraction(0)) + frac
        if total > 1:
            out.append(Violation("capacity", f"trip {t.id} loads {total} of capacity"))
        if schedules is not None and t.id in schedules:
            s = schedules[t.id]
            tt = trip_travel_time(t, inst)
            if s.travel_time != tt or s.end != s.start + s.travel_time:
                out.append(Violation("schedule", f"trip {t.id}: inconsistent schedule {s}"))
            if not school.dismissal <= s.start <= school.dismissal + inst.buffer_pickup:
                out.append(Violation("start-window", f"trip {t.id}: start {s.start}"))

    for k in inst.schools:
        for sid, n in k.demand.items():
            got = served.get((k.id, sid), Fraction(0)) * inst.capacity
            if got != n:
                out.append(Violation("demand-coverage", f"school {k.id} stop {sid}: served {got} of {n}"))
        lo, hi = inst.trips_allowed(k)
        if not lo <= per_school[k.id] <= hi:
            out.append(Violation("trip-count", f"school {k.id}: {per_school[k.id]} trips, allowed [{lo}, {hi}]"))
    return out


# --------------------------------------------------------------------------- #
# splitting a school's students over a fixed set of trips


def assign_loads(school: School, visits: Sequence[Iterable[str]], capacity: int) -> list[dict[str, int]] | None:
    """Integral student counts per trip and stop, or None if infeasible.

    A max-flow from trips (capacity ``capacity`` each) to the stops they visit
    (demand per stop).  Augmenting paths are explored in trip and stop order
    so the split is deterministic.
    """
    visits = [list(v) for v in visits]
    stops = list(school.demand)
    sidx = {s: i for i, s in enumerate(stops)}
    n_t = len(visits)
    flow = [[0] * len(stops) for _ in range(n_t)]
    used = [0] * n_t
    got = [0] * len(stops)
    adj = [[sidx[s] for s in v if s in sidx] for v in visits]
    by_stop: list[list[int]] = [[] for _ in stops]
    for t, ss in enumerate(adj):
        for s in ss:
            by_stop[s].append(t)

    # greedy fill first, then repair with augmenting paths
    for t, ss in enumerate(adj):
        for s in ss:
            q = min(capacity - used[t], school.demand[stops[s]] - got[s])
            if q > 0:
                flow[t][s] += q
                used[t] += q
                got[s] += q

    while True:
        short = [s for s in range(len(stops)) if got[s] < school.demand[stops[s]]]
        if not short:
            break
        target = short[0]
        # BFS backwards from the short stop: stop <- trip (edge) ; trip <- stop (residual flow)
        prev_trip: dict[int, int] = {}
        prev_stop: dict[int, int] = {}
        seen_s = {target}
        dq = deque([target])
        found = None
        while dq and found is None:
            s = dq.popleft()
            for t in by_stop[s]:
                if t in prev_trip:
                    continue
                prev_trip[t] = s
                if used[t] < capacity:
                    found = t
                    break
                for s2 in adj[t]:
                    if s2 not in seen_s and flow[t][s2] > 0:
                        seen_s.add(s2)
                        prev_stop[s2] = t
                        dq.append(s2)
        if found is None:
            return None
        # unwind: ``found`` takes q more at stop s; if s is not the target,
        # the trip that fed s hands q over to the stop it was reached from
        push: list[tuple[int, int]] = []  # (trip, stop) gaining q
        pull: list[tuple[int, int]] = []  # (trip, stop) losing q
        t = found
        while True:
            s = prev_trip[t]
            push.append((t, s))
            if s == target:
                break
            t = prev_stop[s]
            pull.append((t, s))
        q = min(capacity - used[found], school.demand[stops[target]] - got[target])
        for t, s in pull:
            q = min(q, flow[t][s])
        for t, s in push:
            flow[t][s] += q
        for t, s in pull:
            flow[t][s] -= q
        used[found] += q
        got[target] += q
    return [{stops[s]: flow[t][s] for s in range(len(stops)) if flow[t][s]} for t in range(n_t)]


def loads_from_counts(counts: Mapping[str, int], capacity: int) -> dict[str, Fraction]:
    return {sid: Fraction(n, capacity) for sid, n in counts.items() if n}


# --------------------------------------------------------------------------- #
# solution JSON


def _fmt_minutes(ticks: int) -> int | float:
    m = to_minutes(ticks)
    return int(m) if m == int(m) else m


def trips_to_json(trips: Sequence[Trip], schedules: Mapping[str, TripSchedule]) -> list[dict]:
    out = []
    for t in trips:
        s = schedules[t.id]
        out.append(
            {
                "id": t.id,
                "school": t.school,
                "stops": list(t.stops),
                "loads": {sid: f"{Fraction(v).numerator}/{Fraction(v).denominator}" for sid, v in t.loads.items()},
                "start": _fmt_minutes(s.start),
                "tt": _fmt_minutes(s.travel_time),
                "end": _fmt_minutes(s.end),
            }
        )
    return out


def trips_from_json(items: Sequence[Mapping]) -> tuple[list[Trip], dict[str, TripSchedule]]:
    trips, schedules = [], {}
    for i, item in enumerate(items):
        try:
            t = Trip(
                str(item["id"]),
                str(item["school"]),
                tuple(str(s) for s in item["stops"]),
                {str(k): Fraction(v) for k, v in item.get("loads", {}).items()},
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise ValueError(f"trips[{i}]: {exc}") from exc
        trips.append(t)
        if "start" in item:
            schedules[t.id] = TripSchedule(to_ticks(item["start"]), to_ticks(item["tt"]), to_ticks(item["end"]))
    return trips, schedules
