"""Problem data for multi-school PM bus routing.

Times are stored as integer deciminutes (``TICKS_PER_MINUTE`` ticks per
minute) so that every schedule comparison is exact.  The JSON file format
keeps dismissal times and the pickup buffer in minutes and the travel-time
matrix in deciminutes.
"""
from __future__ import annotations

import json
import math
import random
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

TICKS_PER_MINUTE = 10


def to_ticks(minutes: float) -> int:
    return int(round(minutes * TICKS_PER_MINUTE))


def to_minutes(ticks: int) -> float:
    return ticks / TICKS_PER_MINUTE


class InstanceFormatError(ValueError):
    """Raised when an instance file cannot be parsed or violates the schema."""


@dataclass(frozen=True)
class Violation:
    rule: str
    message: str

    def __str__(self) -> str:
        return f"{self.rule}: {self.message}"


@dataclass(frozen=True)
class Stop:
    id: str
    x: float = 0.0
    y: float = 0.0


@dataclass(frozen=True)
class School:
    id: str
    origin_stop: str
    dismissal: int  # ticks
    demand: Mapping[str, int] = field(default_factory=dict)

    @property
    def assigned_stops(self) -> tuple[str, ...]:
        return tuple(self.demand)

    @property
    def population(self) -> int:
        return sum(self.demand.values())


class TravelTimeMatrix:
    """Square stop-to-stop duration table in ticks, dwell time included.

    Construction applies the metric closure (all-pairs shortest paths), so a
    direct arc is never longer than a detour through other stops.  Pass
    ``close=False`` only to inspect raw data.
    """

    def __init__(self, ids: Sequence[str], rows: Sequence[Sequence[int]], close: bool = True):
        self.ids = tuple(ids)
        self.index = {sid: i for i, sid in enumerate(self.ids)}
        arr = np.asarray(rows, dtype=np.int64).reshape(len(self.ids), len(self.ids))
        if close and len(self.ids) and (arr >= 0).all():
            arr = metric_closure(arr)
        self._arr = arr
        self.rows = tuple(tuple(int(v) for v in row) for row in arr)

    def __call__(self, a: str, b: str) -> int:
        return self.rows[self.index[a]][self.index[b]]

    def __len__(self) -> int:
        return len(self.ids)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TravelTimeMatrix):
            return NotImplemented
        return self.ids == other.ids and self.rows == other.rows

    def __repr__(self) -> str:
        return f"TravelTimeMatrix(n={len(self.ids)})"

    def as_array(self) -> np.ndarray:
        return self._arr.copy()


def metric_closure(arr: np.ndarray) -> np.ndarray:
    """Floyd-Warshall on a nonnegative integer matrix."""
    d = np.array(arr, dtype=np.int64, copy=True)
    np.fill_diagonal(d, 0)
    for k in range(d.shape[0]):
        d = np.minimum(d, d[:, k : k + 1] + d[k : k + 1, :])
    return d


@dataclass(frozen=True, eq=True)
class Instance:
    stops: tuple[Stop, ...]
    schools: tuple[School, ...]
    matrix: TravelTimeMatrix
    capacity: int = 48
    buffer_pickup: int = 0  # ticks
    additional_trips: int = 0

    def school(self, school_id: str) -> School:
        for k in self.schools:
            if k.id == school_id:
                return k
        raise KeyError(school_id)

    @property
    def horizon(self) -> int:
        """Latest dismissal plus buffer, in ticks."""
        if not self.schools:
            return 0
        return max(k.dismissal for k in self.schools) + self.buffer_pickup

    def trips_allowed(self, school: School) -> tuple[int, int]:
        lo = minimum_trips(school, self.capacity)
        return lo, lo + self.additional_trips


def minimum_trips(school: School, capacity: int) -> int:
    """Fewest trips that can carry the school's whole population."""
    if capacity < 1:
        raise ValueError("capacity must be >= 1")
    return -(-school.population // capacity)


def validate_instance(inst: Instance) -> list[Violation]:
    out: list[Violation] = []
    if inst.capacity < 1:
        out.append(Violation("capacity-positive", f"capacity={inst.capacity}"))
    if inst.buffer_pickup < 0:
        out.append(Violation("buffer-nonnegative", f"buffer_pickup={inst.buffer_pickup}"))
    if inst.additional_trips < 0:
        out.append(Violation("additional-trips-nonnegative", f"additional_trips={inst.additional_trips}"))

    ids = [s.id for s in inst.stops]
    if len(set(ids)) != len(ids):
        out.append(Violation("unique-stop-ids", "duplicate stop id"))
    kids = [k.id for k in inst.schools]
    if len(set(kids)) != len(kids):
        out.append(Violation("unique-school-ids", "duplicate school id"))

    known = set(ids)
    owner: dict[str, str] = {}
    for k in inst.schools:
        if k.origin_stop not in known:
            out.append(Violation("unknown-stop", f"school {k.id} origin {k.origin_stop!r}"))
        if not k.demand:
            out.append(Violation("school-nonempty", f"school {k.id} has no assigned stops"))
        if k.origin_stop in k.demand:
            out.append(Violation("origin-not-assigned", f"school {k.id} origin is a pickup stop"))
        for sid, n in k.demand.items():
            if sid not in known:
                out.append(Violation("unknown-stop", f"school {k.id} demand stop {sid!r}"))
            if n < 1:
                out.append(Violation("demand-positive", f"school {k.id} stop {sid}: {n}"))
            if sid in owner:
                out.append(Violation("disjoint-assignment", f"stop {sid} assigned to {owner[sid]} and {k.id}"))
            else:
                owner[sid] = k.id

    m = inst.matrix
    if m.ids != tuple(ids):
        out.append(Violation("matrix-shape", "matrix ids do not match stops"))
        return out
    arr = np.asarray(m.rows, dtype=np.int64).reshape(len(ids), len(ids))
    if (arr < 0).any():
        out.append(Violation("matrix-nonnegativity", "negative duration"))
    if len(ids) and np.diagonal(arr).any():
        out.append(Violation("matrix-diagonal", "nonzero diagonal"))
    if len(ids) and (arr >= 0).all():
        via = (arr[:, :, None] + arr[None, :, :]).min(axis=1)
        if (arr > via).any():
            out.append(Violation("matrix-triangle", "triangle inequality violated"))
    return out


# --------------------------------------------------------------------------- #
# scenario generation


@dataclass(frozen=True)
class ScenarioSpec:
    n_stops: int
    n_schools: int
    avg_students_per_school: float
    max_stops_per_school: int
    dismissal_range: tuple[int, int] = (0, 30)
    dismissal_grid: int = 15
    capacity: int = 48
    seed: int = 0
    region_km: float = 10.0
    speed_kmh: float = 30.0
    dwell_min: float = 1.0
    population_spread: float = 0.3
    additional_trips: int = 0
    buffer_pickup: int = 0

    def errors(self) -> list[str]:
        errs = []
        if self.n_schools < 1:
            errs.append("n_schools must be >= 1")
        if self.n_stops < self.n_schools:
            errs.append("n_stops must be >= n_schools (every school needs a stop)")
        if self.max_stops_per_school < 1:
            errs.append("max_stops_per_school must be >= 1")
        if self.dismissal_range[0] > self.dismissal_range[1]:
            errs.append("dismissal_range min > max")
        if self.dismissal_grid <= 0:
            errs.append("dismissal_grid must be positive")
        if self.capacity < 1:
            errs.append("capacity must be >= 1")
        if self.speed_kmh <= 0 or self.region_km < 0:
            errs.append("speed_kmh must be positive and region_km nonnegative")
        if not 0 <= self.population_spread < 1:
            errs.append("population_spread must be in [0, 1)")
        if self.additional_trips < 0 or self.buffer_pickup < 0:
            errs.append("additional_trips and buffer_pickup must be >= 0")
        return errs

    @classmethod
    def from_dict(cls, data: Mapping) -> "ScenarioSpec":
        kw = dict(data)
        if "dismissal_range" in kw:
            kw["dismissal_range"] = tuple(kw["dismissal_range"])
        unknown = set(kw) - set(cls.__dataclass_fields__)
        if unknown:
            warnings.warn(f"ignoring unknown scenario fields: {sorted(unknown)}")
            for key in unknown:
                del kw[key]
        return cls(**kw)


def _largest_remainder(total: int, weights: Sequence[float], floor: Sequence[int]) -> list[int]:
    """Split ``total`` proportionally to ``weights`` with per-part minimums."""
    base = list(floor)
    rest = total - sum(base)
    wsum = sum(weights)
    raw = [rest * w / wsum for w in weights]
    parts = [int(math.floor(r)) for r in raw]
    left = rest - sum(parts)
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - parts[i]), i))
    for i in order[:left]:
        parts[i] += 1
    return [b + p for b, p in zip(base, parts)]


def generate_scenario(spec: ScenarioSpec) -> Instance:
    """Random instance shaped by the scenario parameters, deterministic in ``spec.seed``."""
    errs = spec.errors()
    if errs:
        raise ValueError("infeasible scenario spec: " + "; ".join(errs))
    rng = random.Random(spec.seed)
    R = spec.region_km
    school_xy = [(rng.uniform(0, R), rng.uniform(0, R)) for _ in range(spec.n_schools)]
    stop_xy = [(rng.uniform(0, R), rng.uniform(0, R)) for _ in range(spec.n_stops)]

    def dist(a, b):
        return math.hypot(a[0] - b[0], a[1] - b[1])

    # each school first claims its nearest free stop, then stops go to the
    # nearest school with room; leftovers stay as unassigned locations
    owner: list[int | None] = [None] * spec.n_stops
    count = [0] * spec.n_schools
    for k in range(spec.n_schools):
        free = [i for i in range(spec.n_stops) if owner[i] is None]
        i = min(free, key=lambda i: (dist(school_xy[k], stop_xy[i]), i))
        owner[i] = k
        count[k] += 1
    for i in range(spec.n_stops):
        if owner[i] is not None:
            continue
        room = [k for k in range(spec.n_schools) if count[k] < spec.max_stops_per_school]
        if not room:
            continue
        k = min(room, key=lambda k: (dist(school_xy[k], stop_xy[i]), k))
        owner[i] = k
        count[k] += 1

    total = int(round(spec.avg_students_per_school * spec.n_schools))
    if total < sum(count):
        raise ValueError("infeasible scenario spec: fewer students than assigned stops")
    spread = spec.population_spread
    weights = [1.0 + spread * rng.uniform(-1.0, 1.0) for _ in range(spec.n_schools)]
    totals = _largest_remainder(total, weights, [0] * spec.n_schools)
    # keep at least one student per assigned stop
    for k in range(spec.n_schools):
        while totals[k] < count[k]:
            j = max(range(spec.n_schools), key=lambda j: (totals[j] - count[j], -j))
            totals[j] -= 1
            totals[k] += 1

    lo, hi = spec.dismissal_range
    grid = list(range(lo, hi + 1, spec.dismissal_grid))

    stops = [Stop(f"O{k}", round(x, 4), round(y, 4)) for k, (x, y) in enumerate(school_xy)]
    stops += [Stop(f"s{i}", round(x, 4), round(y, 4)) for i, (x, y) in enumerate(stop_xy)]
    schools = []
    for k in range(spec.n_schools):
        mine = [i for i in range(spec.n_stops) if owner[i] == k]
        w = [rng.uniform(0.5, 1.5) for _ in mine]
        per_stop = _largest_remainder(totals[k], w, [1] * len(mine))
        demand = {f"s{i}": n for i, n in zip(mine, per_stop)}
        schools.append(School(f"K{k}", f"O{k}", to_ticks(rng.choice(grid)), demand))

    matrix = matrix_from_geometry(stops, spec.speed_kmh, spec.dwell_min)
    return Instance(
        tuple(stops),
        tuple(schools),
        matrix,
        capacity=spec.capacity,
        buffer_pickup=to_ticks(spec.buffer_pickup),
        additional_trips=spec.additional_trips,
    )


def matrix_from_geometry(stops: Sequence[Stop], speed_kmh: float = 30.0, dwell_min: float = 1.0) -> TravelTimeMatrix:
    """Euclidean driving time plus a constant dwell on every arc, metric-closed."""
    n = len(stops)
    rows = [[0] * n for _ in range(n)]
    dwell = to_ticks(dwell_min)
    for i, a in enumerate(stops):
        for j, b in enumerate(stops):
            if i != j:
                km = math.hypot(a.x - b.x, a.y - b.y)
                rows[i][j] = to_ticks(km / speed_kmh * 60.0) + dwell
    return TravelTimeMatrix([s.id for s in stops], rows)


# --------------------------------------------------------------------------- #
# JSON I/O

_TOP_FIELDS = {"capacity", "buffer_pickup", "additional_trips", "stops", "schools", "matrix"}
_STOP_FIELDS = {"id", "x", "y"}
_SCHOOL_FIELDS = {"id", "origin", "dismissal", "demand"}


def _minutes_out(ticks: int) -> int | float:
    m = to_minutes(ticks)
    return int(m) if m == int(m) else m


def instance_to_dict(inst: Instance) -> dict:
    return {
        "capacity": inst.capacity,
        "buffer_pickup": _minutes_out(inst.buffer_pickup),
        "additional_trips": inst.additional_trips,
        "stops": [{"id": s.id, "x": s.x, "y": s.y} for s in inst.stops],
        "schools": [
            {"id": k.id, "origin": k.origin_stop, "dismissal": _minutes_out(k.dismissal), "demand": dict(k.demand)}
            for k in inst.schools
        ],
        "matrix": [list(r) for r in inst.matrix.rows],
    }


def _need(obj: Mapping, key: str, where: str, kinds: type | tuple[type, ...]):
    if key not in obj:
        raise InstanceFormatError(f"{where}.{key}: missing required field")
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, kinds):
        raise InstanceFormatError(f"{where}.{key}: expected {getattr(kinds, '__name__', kinds)}, got {type(val).__name__}")
    return val


def _warn_extra(obj: Mapping, allowed: set[str], where: str) -> None:
    extra = sorted(set(obj) - allowed)
    if extra:
        warnings.warn(f"{where}: ignoring unknown field(s) {extra}", stacklevel=3)


def instance_from_dict(data: Mapping, speed_kmh: float = 30.0, dwell_min: float = 1.0) -> Instance:
    if not isinstance(data, Mapping):
        raise InstanceFormatError("instance: expected a JSON object")
    _warn_extra(data, _TOP_FIELDS, "instance")
    capacity = _need(data, "capacity", "instance", int)
    buffer_pickup = data.get("buffer_pickup", 0)
    additional = data.get("additional_trips", 0)
    if isinstance(buffer_pickup, bool) or not isinstance(buffer_pickup, (int, float)):
        raise InstanceFormatError("instance.buffer_pickup: expected number")
    if isinstance(additional, bool) or not isinstance(additional, int):
        raise InstanceFormatError("instance.additional_trips: expected int")

    stops = []
    for i, s in enumerate(_need(data, "stops", "instance", list)):
        where = f"stops[{i}]"
        if not isinstance(s, Mapping):
            raise InstanceFormatError(f"{where}: expected object")
        _warn_extra(s, _STOP_FIELDS, where)
        sid = _need(s, "id", where, (str, int))
        stops.append(Stop(str(sid), float(s.get("x", 0.0)), float(s.get("y", 0.0))))

    schools = []
    for i, k in enumerate(_need(data, "schools", "instance", list)):
        where = f"schools[{i}]"
        if not isinstance(k, Mapping):
            raise InstanceFormatError(f"{where}: expected object")
        _warn_extra(k, _SCHOOL_FIELDS, where)
        kid = _need(k, "id", where, (str, int))
        origin = _need(k, "origin", where, (str, int))
        dism = _need(k, "dismissal", where, (int, float))
        demand = _need(k, "demand", where, dict)
        for sid, n in demand.items():
            if isinstance(n, bool) or not isinstance(n, int):
                raise InstanceFormatError(f"{where}.demand[{sid!r}]: expected int")
        schools.append(School(str(kid), str(origin), to_ticks(dism), {str(s): n for s, n in demand.items()}))

    ids = [s.id for s in stops]
    if "matrix" in data and data["matrix"] is not None:
        rows = data["matrix"]
        if not isinstance(rows, list) or len(rows) != len(ids) or any(
            not isinstance(r, list) or len(r) != len(ids) for r in rows
        ):
            raise InstanceFormatError(f"instance.matrix: expected {len(ids)}x{len(ids)} list of lists")
        for r in rows:
            for v in r:
                if isinstance(v, bool) or not isinstance(v, int):
                    raise InstanceFormatError("instance.matrix: entries must be integer deciminutes")
        matrix = TravelTimeMatrix(ids, rows)
    else:
        matrix = matrix_from_geometry(stops, speed_kmh, dwell_min)
    return Instance(tuple(stops), tuple(schools), matrix, capacity, to_ticks(buffer_pickup), additional)


def load_instance(path: str | Path) -> Instance:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return instance_from_dict(data)


def save_instance(inst: Instance, path: str | Path) -> None:
    Path(path).write_text(dumps(instance_to_dict(inst)), encoding="utf-8")


def dumps(data) -> str:
    return json.dumps(data, indent=1) + "\n"
