"""Mixed-integer routing and blocking models with MPS export.

The routing model works in minutes.  Every school gets its full allowance of
candidate trips, numbered globally in school order; a trip's graph is the
school origin plus the school's stops, with a closing arc back to the origin
whose head marks the last stop.  No solver is invoked here.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .instance import Instance, to_minutes
from .routing import ObjectiveKind
from .trips import CompatibilityGraph, Trip, TripSchedule, loads_from_counts, schedule_trip

INF = math.inf
_NAME_OK = re.compile(r"^\S+$")


class ModelBuildError(ValueError):
    """The model cannot be built as requested (e.g. big-M too small)."""


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str = "continuous"  # continuous | binary | integer
    lb: float = 0.0
    ub: float = INF


@dataclass(frozen=True)
class Row:
    name: str
    sense: str  # L, G or E
    coefs: tuple[tuple[str, float], ...]
    rhs: float = 0.0


@dataclass(frozen=True)
class ModelInstance:
    name: str
    variables: tuple[Variable, ...]
    rows: tuple[Row, ...]
    objective: tuple[tuple[str, float], ...]
    sense: str = "MIN"
    comments: tuple[str, ...] = ()

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def count_by_prefix(self, what: str = "variables") -> dict[str, int]:
        """Counts keyed by the name part before the first underscore."""
        items = self.variables if what == "variables" else self.rows
        out: dict[str, int] = {}
        for it in items:
            p = it.name.split("_", 1)[0]
            out[p] = out.get(p, 0) + 1
        return out

    def as_arrays(self):
        """Dense arrays ``(c, A, row_lo, row_hi, lb, ub, integrality)`` for LP/MIP codes."""
        col = {v.name: i for i, v in enumerate(self.variables)}
        c = np.zeros(len(col))
        for name, coef in self.objective:
            c[col[name]] += coef
        if self.sense == "MAX":
            c = -c
        A = np.zeros((len(self.rows), len(col)))
        lo = np.full(len(self.rows), -np.inf)
        hi = np.full(len(self.rows), np.inf)
        for r, row in enumerate(self.rows):
            for name, coef in row.coefs:
                A[r, col[name]] += coef
            if row.sense in "LE":
                hi[r] = row.rhs
            if row.sense in "GE":
                lo[r] = row.rhs
        lb = np.array([v.lb for v in self.variables], dtype=float)
        ub = np.array([v.ub for v in self.variables], dtype=float)
        integrality = np.array([0 if v.kind == "continuous" else 1 for v in self.variables])
        return c, A, lo, hi, lb, ub, integrality


class _Builder:
    def __init__(self, name: str):
        self.name = name
        self.vars: dict[str, Variable] = {}
        self.rows: list[Row] = []
        self.obj: dict[str, float] = {}
        self.comments: list[str] = []

    def var(self, name: str, kind: str = "continuous", lb: float = 0.0, ub: float = INF) -> str:
        if not _NAME_OK.match(name):
            raise ModelBuildError(f"variable name {name!r} contains whitespace")
        if name in self.vars:
            raise ModelBuildError(f"duplicate variable {name}")
        if kind == "binary":
            lb, ub = 0.0, 1.0
        self.vars[name] = Variable(name, kind, lb, ub)
        return name

    def row(self, name: str, sense: str, coefs: Iterable[tuple[str, float]], rhs: float = 0.0) -> None:
        merged: dict[str, float] = {}
        for v, c in coefs:
            if v not in self.vars:
                raise ModelBuildError(f"row {name} uses unknown variable {v}")
            merged[v] = merged.get(v, 0.0) + c
        self.rows.append(Row(name, sense, tuple((v, c) for v, c in merged.items() if c != 0), float(rhs)))

    def build(self, sense: str = "MIN") -> ModelInstance:
        # coefficients in column order, so a model equals its MPS round trip
        pos = {v: i for i, v in enumerate(self.vars)}
        rows = tuple(Row(r.name, r.sense, tuple(sorted(r.coefs, key=lambda vc: pos[vc[0]])), r.rhs) for r in self.rows)
        return ModelInstance(
            self.name,
            tuple(self.vars.values()),
            rows,
            tuple(sorted(self.obj.items(), key=lambda vc: pos[vc[0]])),
            sense,
            tuple(self.comments),
        )


# --------------------------------------------------------------------------- #
# routing model


@dataclass(frozen=True)
class ModelSpec:
    objective_kind: ObjectiveKind = ObjectiveKind.MAXCOM_TT
    C_B: float = 1000
    C_C: float = 200
    big_M: float | None = None  # compatibility rows; derived per instance when None
    deadhead_M: float | None = None  # unused-trip branches of the deadhead rows

    def __post_init__(self):
        object.__setattr__(self, "objective_kind", ObjectiveKind.parse(self.objective_kind))
        if self.C_B <= 0 or self.C_C <= 0:
            raise ValueError("C_B and C_C must be positive")


@dataclass(frozen=True)
class ModelTrip:
    index: int
    school: str
    name: str  # t{index}


def model_trips(inst: Instance) -> list[ModelTrip]:
    out = []
    for k in inst.schools:
        for _ in range(inst.trips_allowed(k)[1]):
            i = len(out)
            out.append(ModelTrip(i, k.id, f"t{i}"))
    return out


@dataclass(frozen=True)
class BigMAudit:
    horizon: float  # latest possible end minus earliest start
    max_deadhead: float
    deadhead_M: float
    big_M: float
    required_big_M: float

    @property
    def ok(self) -> bool:
        return self.big_M >= self.required_big_M and self.deadhead_M > 0


def _max_trip_tt(inst: Instance, school) -> float:
    """Upper bound on a trip's duration: every stop entered by its dearest arc."""
    m = inst.matrix
    nodes = [school.origin_stop, *school.demand]
    return sum(max(to_minutes(m(a, s)) for a in nodes if a != s) for s in school.demand)


def audit_big_m(inst: Instance, spec: ModelSpec) -> BigMAudit:
    """Bound audit for the big-M rows.

    With ``b = 0`` the compatibility row reads ``end1 + dd - M <= start2``.
    ``end1`` is at most the latest dismissal plus buffer plus trip bound, and
    the deadhead row can force ``dd`` up to ``deadhead_M + max D``, so the row
    is slack for every bound-feasible point iff ``M`` covers their sum minus
    the earliest start.
    """
    m = inst.matrix
    schools = list(inst.schools)
    if not schools:
        return BigMAudit(0.0, 0.0, 1.0, spec.big_M or 1.0, 0.0)
    latest_end = max(to_minutes(k.dismissal + inst.buffer_pickup) + _max_trip_tt(inst, k) for k in schools)
    earliest = min(to_minutes(k.dismissal) for k in schools)
    horizon = latest_end - earliest
    max_dd = max(to_minutes(m(s, k2.origin_stop)) for k in schools for s in k.demand for k2 in schools)
    dM = spec.deadhead_M if spec.deadhead_M is not None else horizon + max_dd + 1
    required = horizon + dM + max_dd
    bM = spec.big_M if spec.big_M is not None else required + 1
    return BigMAudit(horizon, max_dd, dM, bM, required)


def build_routing_model(inst: Instance, spec: ModelSpec | None = None) -> ModelInstance:
    spec = spec or ModelSpec()
    audit = audit_big_m(inst, spec)
    if not audit.ok:
        raise ModelBuildError(
            f"big_M {audit.big_M} too small: compatibility rows need at least {audit.required_big_M}"
        )
    M, dM = audit.big_M, audit.deadhead_M
    mx = inst.matrix
    D = lambda a, b: to_minutes(mx(a, b))  # noqa: E731
    cap = inst.capacity
    B = _Builder(f"routing_{spec.objective_kind.value.replace('+', '_')}")
    B.comments.append(f"objective {spec.objective_kind.value} C_B={spec.C_B} C_C={spec.C_C}")
    B.comments.append(f"big_M={M:.6g} deadhead_M={dM:.6g}")
    trips = model_trips(inst)
    by_school: dict[str, list[ModelTrip]] = {k.id: [] for k in inst.schools}
    for t in trips:
        by_school[t.school].append(t)

    # per-trip variables and rows
    for k in inst.schools:
        O = k.origin_stop
        S = list(k.demand)
        for mt in by_school[k.id]:
            t = mt.name
            t2s = B.var(f"t2s_{t}_k{k.id}", "binary")
            for s in S:
                B.var(f"s2t_s{s}_{t}", "binary")
            for s in S:
                B.var(f"p4t_s{s}_{t}", "continuous", 0.0, min(1.0, k.demand[s] / cap))
            arcs = [(O, s) for s in S] + [(a, b) for a in S for b in S if a != b] + [(s, O) for s in S]
            for a, b in arcs:
                B.var(f"x_{t}_{a}_{b}", "binary")
            for s in S:
                B.var(f"l_s{s}_{t}", "binary")
            for a, b in arcs:
                if b != O:
                    B.var(f"c_{t}_{a}_{b}", "continuous", 0.0, float(len(S)))
            tt = B.var(f"tt_{t}")
            lo = to_minutes(k.dismissal)
            start = B.var(f"start_{t}", "continuous", lo, lo + to_minutes(inst.buffer_pickup))
            end = B.var(f"end_{t}")

            x = lambda a, b: f"x_{t}_{a}_{b}"  # noqa: E731
            for s in S:
                B.row(f"use_s{s}_{t}", "L", [(f"s2t_s{s}_{t}", 1), (t2s, -1)])
            B.row(f"cap_{t}", "L", [(f"p4t_s{s}_{t}", 1) for s in S], 1)
            for s in S:
                B.row(f"load_s{s}_{t}", "L", [(f"p4t_s{s}_{t}", 1), (f"s2t_s{s}_{t}", -1)])
            for s in S:
                outs = [(x(s, j), 1) for j in [*S, O] if j != s]
                B.row(f"visit_s{s}_{t}", "E", outs + [(f"s2t_s{s}_{t}", -1)])
            B.row(f"depart_{t}", "E", [(x(O, s), 1) for s in S] + [(t2s, -1)])
            for s in S:
                outs = [(x(s, j), 1) for j in [*S, O] if j != s]
                ins = [(x(i, s), -1) for i in [O, *S] if i != s]
                B.row(f"flow_s{s}_{t}", "E", outs + ins)
            B.row(f"tt_{t}", "E", [(x(a, b), D(a, b)) for a, b in arcs if b != O] + [(tt, -1)])
            B.row(f"end_{t}", "E", [(end, 1), (start, -1), (tt, -1)])
            for s in S:
                B.row(f"last_s{s}_{t}", "E", [(x(s, O), 1), (f"l_s{s}_{t}", -1)])
            for s in S:
                ins = [(f"c_{t}_{i}_{s}", 1) for i in [O, *S] if i != s]
                outs = [(f"c_{t}_{s}_{j}", -1) for j in S if j != s]
                B.row(f"commodity_s{s}_{t}", "E", ins + outs + [(f"s2t_s{s}_{t}", -1)])
            for a, b in arcs:
                if b != O:
                    B.row(f"cflow_{t}_{a}_{b}", "L", [(f"c_{t}_{a}_{b}", 1), (x(a, b), -float(len(S)))])

        for s in S:
            B.row(
                f"demand_k{k.id}_s{s}",
                "E",
                [(f"p4t_s{s}_{mt.name}", 1) for mt in by_school[k.id]],
                k.demand[s] / cap,
            )
        ts = by_school[k.id]
        for a, b in zip(ts, ts[1:]):
            B.row(f"order_{a.name}_{b.name}", "G", [(f"t2s_{a.name}_k{k.id}", 1), (f"t2s_{b.name}_k{k.id}", -1)])
        lo_n, hi_n = inst.trips_allowed(k)
        used = [(f"t2s_{mt.name}_k{k.id}", 1) for mt in ts]
        B.row(f"mintrips_k{k.id}", "G", used, lo_n)
        B.row(f"maxtrips_k{k.id}", "L", used, hi_n)

    # pairwise compatibility
    school = {k.id: k for k in inst.schools}
    for t1 in trips:
        for t2 in trips:
            if t1.index == t2.index:
                continue
            B.var(f"b_{t1.name}_{t2.name}", "binary")
            B.var(f"dd_{t1.name}_{t2.name}")
    for t1 in trips:
        k1 = school[t1.school]
        for t2 in trips:
            if t1.index == t2.index:
                continue
            k2 = school[t2.school]
            b, dd = f"b_{t1.name}_{t2.name}", f"dd_{t1.name}_{t2.name}"
            u1, u2 = f"t2s_{t1.name}_k{k1.id}", f"t2s_{t2.name}_k{k2.id}"
            B.row(
                f"compat_{t1.name}_{t2.name}",
                "L",
                [(f"end_{t1.name}", 1), (dd, 1), (b, M), (f"start_{t2.name}", -1)],
                M,
            )
            # dd >= dM/2 (1 - u1) + dM/2 (1 - u2) + sum D(s, O2) l_s
            coefs = [(dd, 1), (u1, dM / 2), (u2, dM / 2)]
            coefs += [(f"l_s{s}_{t1.name}", -D(s, k2.origin_stop)) for s in k1.demand]
            B.row(f"deadhead_{t1.name}_{t2.name}", "G", coefs, dM)
            B.row(f"btail_{t1.name}_{t2.name}", "L", [(b, 1), (u1, -1)])
            B.row(f"bhead_{t1.name}_{t2.name}", "L", [(b, 1), (u2, -1)])

    kind = spec.objective_kind
    if kind in (ObjectiveKind.MAXCOM_TT, ObjectiveKind.MINTT):
        for t in trips:
            B.obj[f"tt_{t.name}"] = 1.0
    if kind in (ObjectiveKind.MAXCOM_TT, ObjectiveKind.MINN):
        w = float(spec.C_B) if kind is ObjectiveKind.MAXCOM_TT else 1.0
        for t in trips:
            B.obj[f"t2s_{t.name}_k{t.school}"] = w
    if kind in (ObjectiveKind.MAXCOM_TT, ObjectiveKind.MAXCOM):
        w = -float(spec.C_C) if kind is ObjectiveKind.MAXCOM_TT else -1.0
        for t1 in trips:
            for t2 in trips:
                if t1.index != t2.index:
                    B.obj[f"b_{t1.name}_{t2.name}"] = w
    return B.build()


def decode_routing(inst: Instance, values: Mapping[str, float], tol: float = 1e-6) -> tuple[list[Trip], dict[str, TripSchedule]]:
    """Read trips back from a (MIP) assignment of the routing model's variables.

    Loads are rounded to whole students; the path is followed from the origin
    along the selected arcs.
    """
    cap = inst.capacity
    trips: list[Trip] = []
    by_school: dict[str, int] = {}
    for mt in model_trips(inst):
        k = inst.school(mt.school)
        if values.get(f"t2s_{mt.name}_k{k.id}", 0.0) < 0.5:
            continue
        path: list[str] = []
        cur = k.origin_stop
        while True:
            nxt = [s for s in k.demand if s != cur and s not in path and values.get(f"x_{mt.name}_{cur}_{s}", 0.0) > 0.5]
            if not nxt:
                break
            cur = nxt[0]
            path.append(cur)
        counts = {}
        for s in k.demand:
            q = round(values.get(f"p4t_s{s}_{mt.name}", 0.0) * cap)
            if q > 0:
                counts[s] = q
        i = by_school.get(k.id, 0)
        by_school[k.id] = i + 1
        trips.append(Trip(f"{k.id}-{i}", k.id, tuple(path), loads_from_counts(counts, cap)))
    schedules = {t.id: schedule_trip(t, inst) for t in trips}
    return trips, schedules


# --------------------------------------------------------------------------- #
# blocking model


def build_blocking_model(trips: Sequence[Trip] | Sequence[str], compat: CompatibilityGraph) -> ModelInstance:
    """Blocking model over the given trips and the compatible pairs of ``compat``."""
    ids = [t.id if isinstance(t, Trip) else str(t) for t in trips]
    known = set(ids)
    edges = sorted((a, b) for a, b in compat.edges if a in known and b in known)
    B = _Builder("blocking")
    B.comments.append("f_* (first trip of a multi-trip block) is declared but constrained by no row")
    for a, b in edges:
        B.var(f"y_{a}_{b}", "binary")
    for t in ids:
        B.var(f"a_{t}", "binary")
    for t in ids:
        B.var(f"m_{t}", "binary")
    for t in ids:
        B.var(f"f_{t}", "binary")
    out: dict[str, list[str]] = {t: [] for t in ids}
    inn: dict[str, list[str]] = {t: [] for t in ids}
    for a, b in edges:
        out[a].append(f"y_{a}_{b}")
        inn[b].append(f"y_{a}_{b}")
    for t in ids:
        o = [(v, 1) for v in out[t]]
        i = [(v, 1) for v in inn[t]]
        a = [(f"a_{t}", 1)]
        B.row(f"covered_{t}", "G", o + i + a, 1)
        B.row(f"onenext_{t}", "L", o + a, 1)
        B.row(f"oneprev_{t}", "L", i + a, 1)
        B.row(f"degree_{t}", "L", o + i, 2)
        B.row(f"middle_{t}", "E", o + i + a + [(f"m_{t}", -1)], 1)
    for t in ids:
        B.obj[f"m_{t}"] = -1.0
    for t in ids:
        B.obj[f"a_{t}"] = 1.0
    for t in ids:
        B.obj[f"f_{t}"] = 0.0
    return B.build()


# --------------------------------------------------------------------------- #
# MPS (free format)


def _num(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def model_to_mps(model: ModelInstance) -> str:
    lines = [f"NAME {model.name}"]
    lines += [f"* {c}" for c in model.comments]
    lines += ["OBJSENSE", f"    {model.sense}", "ROWS", " N obj"]
    lines += [f" {r.sense} {r.name}" for r in model.rows]
    entries: dict[str, list[tuple[str, float]]] = {v.name: [] for v in model.variables}
    for name, coef in model.objective:
        entries[name].append(("obj", coef))
    for r in model.rows:
        for name, coef in r.coefs:
            entries[name].append((r.name, coef))
    lines.append("COLUMNS")
    in_int = False
    n_marker = 0
    for v in model.variables:
        is_int = v.kind != "continuous"
        if is_int != in_int:
            tag = "'INTORG'" if is_int else "'INTEND'"
            lines.append(f"    MARKER{n_marker} 'MARKER' {tag}")
            n_marker += 1
            in_int = is_int
        ent = entries[v.name] or [("obj", 0.0)]
        for row, coef in ent:
            lines.append(f"    {v.name} {row} {_num(coef)}")
    if in_int:
        lines.append(f"    MARKER{n_marker} 'MARKER' 'INTEND'")
    lines.append("RHS")
    for r in model.rows:
        if r.rhs != 0:
            lines.append(f"    RHS {r.name} {_num(r.rhs)}")
    lines.append("BOUNDS")
    for v in model.variables:
        if v.kind == "binary":
            lines.append(f" BV BND {v.name}")
        elif v.lb == v.ub:
            lines.append(f" FX BND {v.name} {_num(v.lb)}")
        else:
            if v.lb == -INF:
                lines.append(f" MI BND {v.name}")
            elif v.lb != 0:
                lines.append(f" LO BND {v.name} {_num(v.lb)}")
            if v.ub != INF:
                lines.append(f" UP BND {v.name} {_num(v.ub)}")
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"


def export_model(model: ModelInstance, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(model_to_mps(model), encoding="ascii")
    return path


def parse_mps(text: str) -> ModelInstance:
    """Read the free-format MPS subset written by ``model_to_mps``."""
    name, sense, section = "", "MIN", None
    comments: list[str] = []
    row_sense: dict[str, str] = {}
    obj_row = None
    coefs: dict[str, list[tuple[str, float]]] = {}
    col_order: list[str] = []
    kinds: dict[str, str] = {}
    rhs: dict[str, float] = {}
    lb: dict[str, float] = {}
    ub: dict[str, float] = {}
    objective: list[tuple[str, float]] = []
    integer = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        if not raw.strip():
            continue
        if raw.startswith("*"):
            comments.append(raw[1:].strip())
            continue
        tok = raw.split()
        if not raw[0].isspace():
            section = tok[0]
            if section == "NAME":
                name = tok[1] if len(tok) > 1 else ""
            elif section == "ENDATA":
                break
            elif section not in ("OBJSENSE", "ROWS", "COLUMNS", "RHS", "BOUNDS", "RANGES"):
                raise ValueError(f"line {lineno}: unknown section {section}")
            continue
        try:
            if section == "OBJSENSE":
                sense = "MAX" if tok[0].upper().startswith("MAX") else "MIN"
            elif section == "ROWS":
                if tok[0] == "N":
                    if obj_row is None:
                        obj_row = tok[1]
                else:
                    row_sense[tok[1]] = tok[0]
                    coefs[tok[1]] = []
            elif section == "COLUMNS":
                if len(tok) >= 3 and tok[1] == "'MARKER'":
                    integer = tok[2] == "'INTORG'"
                    continue
                col = tok[0]
                if col not in kinds:
                    col_order.append(col)
                    kinds[col] = "integer" if integer else "continuous"
                for i in range(1, len(tok) - 1, 2):
                    row, val = tok[i], float(tok[i + 1])
                    if row == obj_row:
                        objective.append((col, val))
                    else:
                        coefs[row].append((col, val))
            elif section == "RHS":
                for i in range(1, len(tok) - 1, 2):
                    rhs[tok[i]] = float(tok[i + 1])
            elif section == "BOUNDS":
                kind, col = tok[0], tok[2]
                val = float(tok[3]) if len(tok) > 3 else None
                if kind == "BV":
                    kinds[col], lb[col], ub[col] = "binary", 0.0, 1.0
                elif kind == "FX":
                    lb[col] = ub[col] = val
                elif kind == "LO":
                    lb[col] = val
                elif kind == "UP":
                    ub[col] = val
                elif kind == "MI":
                    lb[col] = -INF
                elif kind == "FR":
                    lb[col], ub[col] = -INF, INF
                else:
                    raise ValueError(f"unsupported bound type {kind}")
            elif section == "RANGES":
                raise ValueError("RANGES not supported")
        except (IndexError, KeyError, ValueError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
    variables = []
    for col in col_order:
        kind = kinds[col]
        lo = lb.get(col, 0.0)
        hi = ub.get(col, 1.0 if kind == "binary" else INF)
        if kind == "integer" and lo == 0 and hi == 1:
            kind = "binary"
        variables.append(Variable(col, kind, lo, hi))
    rows = tuple(Row(r, s, tuple(coefs[r]), rhs.get(r, 0.0)) for r, s in row_sense.items())
    return ModelInstance(name, tuple(variables), rows, tuple(objective), sense, tuple(comments))


def read_mps(path: str | Path) -> ModelInstance:
    return parse_mps(Path(path).read_text(encoding="ascii"))

