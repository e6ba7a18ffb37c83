"""Batch experiments: route under each objective, block, tabulate."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .blocking import solve_blocking
from .exact import exact_admissible, solve_exact
from .heuristic import solve_heuristic
from .instance import Instance, to_minutes
from .routing import ALL_OBJECTIVES, ObjectiveKind, RoutingSolution, SolverConfig
from .trips import build_compatibility_graph

log = logging.getLogger(__name__)

CSV_COLUMNS = ("scenario", "objective", "rt_sec", "gap_pct", "n_trips", "n_buses", "total_tt_min")
NEW_OBJECTIVES = (ObjectiveKind.MAXCOM_TT, ObjectiveKind.MAXCOM)
TRADITIONAL_OBJECTIVES = (ObjectiveKind.MINTT, ObjectiveKind.MINN)


@dataclass(frozen=True)
class ExperimentRow:
    scenario: str
    objective: ObjectiveKind
    rt_sec: float | None = None
    gap_pct: float | None = None
    n_trips: int | None = None
    n_buses: int | None = None
    total_tt: float | None = None  # minutes
    n_edges: int | None = None
    solver: str = ""
    travel_times: tuple[float, ...] = ()
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def csv_record(self) -> list[str]:
        return [
            self.scenario,
            self.objective.value,
            _fmt(self.rt_sec, 3),
            _fmt(self.gap_pct, 2),
            _fmt(self.n_trips),
            _fmt(self.n_buses),
            _fmt(self.total_tt, 1),
        ]


@dataclass(frozen=True)
class TradeoffSummary:
    buses_saved_pct: float
    extra_tt_per_bus: float


def _fmt(v, digits: int | None = None) -> str:
    if v is None:
        return ""
    if digits is None:
        return str(v)
    return f"{v:.{digits}f}"


def choose_solver(inst: Instance, config: SolverConfig) -> str:
    return "exact" if exact_admissible(inst, config) is None else "heuristic"


def solve_routing(inst: Instance, config: SolverConfig) -> RoutingSolution:
    if choose_solver(inst, config) == "exact":
        return solve_exact(inst, config)
    return solve_heuristic(inst, config)


def run_experiment(
    inst: Instance,
    objectives: Iterable[ObjectiveKind | str] = ALL_OBJECTIVES,
    config: SolverConfig | None = None,
    scenario: str = "scenario",
) -> list[ExperimentRow]:
    """One row per objective; a failing objective gets an error row and the run goes on."""
    config = config or SolverConfig()
    rows = []
    for obj in objectives:
        kind = ObjectiveKind.parse(obj)
        cfg = replace(config, objective_kind=kind)
        solver = ""
        t0 = time.perf_counter()
        try:
            solver = choose_solver(inst, cfg)
            sol = solve_routing(inst, cfg)
            compat = build_compatibility_graph(sol, inst)
            blocks = solve_blocking(sol.trips, compat)
        except Exception as exc:  # recorded, not raised
            log.exception("%s / %s failed", scenario, kind.value)
            rows.append(ExperimentRow(scenario, kind, time.perf_counter() - t0, solver=solver, error=f"{type(exc).__name__}: {exc}"))
            continue
        tts = tuple(to_minutes(sol.schedules[t.id].travel_time) for t in sol.trips)
        rows.append(
            ExperimentRow(
                scenario,
                kind,
                rt_sec=time.perf_counter() - t0,
                gap_pct=sol.gap,
                n_trips=len(sol.trips),
                n_buses=blocks.bus_count,
                total_tt=to_minutes(sol.total_tt),
                n_edges=compat.n_edges,
                solver=solver,
                travel_times=tts,
            )
        )
    return rows


def travel_time_histogram(travel_times: Iterable[float], width: float = 5) -> dict[float, int]:
    """Counts per left-closed bin ``[b, b + width)`` keyed by the bin start."""
    out: dict[float, int] = {}
    for tt in travel_times:
        b = math.floor(tt / width) * width
        if b == int(b):
            b = int(b)
        out[b] = out.get(b, 0) + 1
    return dict(sorted(out.items()))


def tradeoff(best_new: ExperimentRow, best_trad: ExperimentRow) -> TradeoffSummary:
    """Bus saving of ``best_new`` over ``best_trad`` and the travel-time price per bus."""
    for r in (best_new, best_trad):
        if not r.n_buses:
            raise ValueError(f"row {r.scenario}/{r.objective.value} has no buses")
    saved = (best_trad.n_buses - best_new.n_buses) / best_trad.n_buses * 100
    extra = best_new.total_tt / best_new.n_buses - best_trad.total_tt / best_trad.n_buses
    return TradeoffSummary(saved, extra)


def best_row(rows: Iterable[ExperimentRow], kinds: Sequence[ObjectiveKind]) -> ExperimentRow | None:
    """Fewest buses, then least total travel time, among successful rows of ``kinds``."""
    cands = [r for r in rows if r.ok and r.objective in kinds]
    if not cands:
        return None
    return min(cands, key=lambda r: (r.n_buses, r.total_tt, kinds.index(r.objective)))


def scenario_tradeoffs(rows: Sequence[ExperimentRow]) -> dict[str, TradeoffSummary]:
    out = {}
    for sc in sorted({r.scenario for r in rows}):
        mine = [r for r in rows if r.scenario == sc]
        new = best_row(mine, NEW_OBJECTIVES)
        trad = best_row(mine, TRADITIONAL_OBJECTIVES)
        if new is not None and trad is not None:
            out[sc] = tradeoff(new, trad)
    return out


def _order(rows: Iterable[ExperimentRow]) -> list[ExperimentRow]:
    rank = {k: i for i, k in enumerate(ALL_OBJECTIVES)}
    return sorted(rows, key=lambda r: (r.scenario, rank[r.objective]))


def table_csv(rows: Iterable[ExperimentRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in _order(rows):
        w.writerow(r.csv_record())
    return buf.getvalue()


def report_dict(rows: Sequence[ExperimentRow]) -> dict:
    rows = _order(rows)
    out_rows = []
    for r in rows:
        d = asdict(r)
        d["objective"] = r.objective.value
        d["travel_times"] = list(r.travel_times)
        d["histogram"] = {str(k): v for k, v in travel_time_histogram(r.travel_times).items()}
        out_rows.append(d)
    return {
        "rows": out_rows,
        "tradeoffs": {sc: asdict(t) for sc, t in scenario_tradeoffs(rows).items()},
    }


def emit_reports(rows: Sequence[ExperimentRow], path: str | Path, timings: bool = True) -> list[Path]:
    """Write ``table.csv``, ``report.json`` and plot-ready CSVs under ``path``.

    With ``timings=False`` running times are blanked so reruns are byte-identical.
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    if not timings:
        rows = [replace(r, rt_sec=None) for r in rows]
    written = []
    p = path / "table.csv"
    p.write_text(table_csv(rows), encoding="utf-8")
    written.append(p)
    p = path / "report.json"
    p.write_text(json.dumps(report_dict(rows), indent=1, sort_keys=True) + "\n", encoding="utf-8")
    written.append(p)

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("scenario", "objective", "bin_start_min", "count"))
    for r in _order(rows):
        for b, n in travel_time_histogram(r.travel_times).items():
            w.writerow((r.scenario, r.objective.value, b, n))
    p = path / "histograms.csv"
    p.write_text(buf.getvalue(), encoding="utf-8")
    written.append(p)

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("scenario", "buses_saved_pct", "extra_tt_per_bus_min"))
    for sc, t in scenario_tradeoffs(list(rows)).items():
        w.writerow((sc, f"{t.buses_saved_pct:.2f}", f"{t.extra_tt_per_bus:.2f}"))
    p = path / "tradeoff.csv"
    p.write_text(buf.getvalue(), encoding="utf-8")
    written.append(p)
    return written


def rows_from_json(data: Mapping) -> list[ExperimentRow]:
    rows = []
    for d in data.get("rows", []):
        d = dict(d)
        d.pop("histogram", None)
        d["objective"] = ObjectiveKind.parse(d["objective"])
        d["travel_times"] = tuple(d.get("travel_times", ()))
        rows.append(ExperimentRow(**d))
    return rows
