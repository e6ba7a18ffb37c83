import json
from dataclasses import replace

import pytest

from schoolbus.fixtures import toy_instance
from schoolbus.instance import Instance, School, Stop, TravelTimeMatrix
from schoolbus.report import (
    CSV_COLUMNS,
    ExperimentRow,
    best_row,
    emit_reports,
    rows_from_json,
    run_experiment,
    table_csv,
    tradeoff,
    travel_time_histogram,
)
from schoolbus.routing import ObjectiveKind, SolverConfig

K = ObjectiveKind


def row(kind, buses, tt, scenario="s"):
    return ExperimentRow(scenario, kind, 1.0, 0.0, buses, buses, tt)


def test_histogram_binning():
    assert travel_time_histogram([3, 7, 12]) == {0: 1, 5: 1, 10: 1}
    assert travel_time_histogram([5]) == {5: 1}
    assert travel_time_histogram([4.9, 0]) == {0: 2}
    assert travel_time_histogram([]) == {}


def test_tradeoff_examples():
    t = tradeoff(row(K.MAXCOM_TT, 45, 45 * 30), row(K.MINTT, 52, 52 * 25))
    assert round(t.buses_saved_pct, 2) == 13.46
    assert t.extra_tt_per_bus == pytest.approx(5)
    same = row(K.MINTT, 10, 100)
    assert tradeoff(same, same) == (tradeoff(same, same).__class__(0.0, 0.0))
    cheaper = tradeoff(row(K.MAXCOM, 9, 90), row(K.MINN, 10, 117))
    assert cheaper.extra_tt_per_bus == pytest.approx(-1.7)
    with pytest.raises(ValueError):
        tradeoff(row(K.MAXCOM, 0, 0), row(K.MINN, 3, 10))


def test_best_row_prefers_buses_then_travel_time():
    rows = [row(K.MAXCOM_TT, 5, 100), row(K.MAXCOM, 5, 90), row(K.MINTT, 6, 80)]
    assert best_row(rows, (K.MAXCOM_TT, K.MAXCOM)).objective is K.MAXCOM
    assert best_row(rows, (K.MINN,)) is None


def test_toy_experiment():
    rows = run_experiment(toy_instance(), scenario="toy")
    got = {r.objective: r for r in rows}
    assert got[K.MAXCOM_TT].n_buses == got[K.MAXCOM].n_buses == 2
    assert got[K.MINTT].n_buses == got[K.MINN].n_buses == 3
    assert got[K.MAXCOM_TT].total_tt == 50 and got[K.MINTT].total_tt == 40
    for r in rows:
        assert r.solver == "exact" and r.n_buses <= r.n_trips
        assert sum(travel_time_histogram(r.travel_times).values()) == r.n_trips
        assert r.n_buses == r.n_trips - min(r.n_edges, r.n_trips - r.n_buses)
    assert travel_time_histogram(got[K.MAXCOM].travel_times) == {0: 1, 10: 1, 40: 1}


def test_single_school_all_objectives_agree_on_buses():
    ids = ["O", "a", "b", "c"]
    rows_ = [[0, 50, 90, 130], [50, 0, 40, 80], [90, 40, 0, 40], [130, 80, 40, 0]]
    inst = Instance(tuple(Stop(s) for s in ids), (School("K", "O", 0, {"a": 40, "b": 40, "c": 40}),), TravelTimeMatrix(ids, rows_))
    rows = run_experiment(inst)
    assert len({r.n_buses for r in rows}) == 1


def test_repeat_run_identical_apart_from_time():
    a = run_experiment(toy_instance(), config=SolverConfig(seed=1))
    b = run_experiment(toy_instance(), config=SolverConfig(seed=1))
    assert [replace(r, rt_sec=None) for r in a] == [replace(r, rt_sec=None) for r in b]


def test_failure_recorded_in_row():
    bad = Instance((Stop("O"), Stop("a")), (School("K", "O", 0, {"a": 5}),), TravelTimeMatrix(["O", "a"], [[0, 1], [1, 0]]), capacity=0)
    rows = run_experiment(bad, [K.MINTT, K.MINN])
    assert len(rows) == 2 and all(not r.ok and r.error for r in rows)
    assert table_csv(rows).splitlines()[1].startswith("scenario,minn,")


def test_emit_reports(tmp_path):
    rows = run_experiment(toy_instance(), scenario="b") + run_experiment(toy_instance(), scenario="a")
    files = emit_reports(rows, tmp_path / "r", timings=False)
    assert sorted(p.name for p in files) == ["histograms.csv", "report.json", "table.csv", "tradeoff.csv"]
    table = (tmp_path / "r" / "table.csv").read_text().splitlines()
    assert table[0] == ",".join(CSV_COLUMNS)
    assert [line.split(",")[:2] for line in table[1:3]] == [["a", "maxcom+tt"], ["a", "maxcom"]]
    data = json.loads((tmp_path / "r" / "report.json").read_text())
    assert data["tradeoffs"]["a"]["buses_saved_pct"] == pytest.approx(100 / 3)
    assert rows_from_json(data)[0].n_buses == 2
    first = {p.name: p.read_bytes() for p in files}
    again = emit_reports(rows, tmp_path / "r", timings=False)
    assert {p.name: p.read_bytes() for p in again} == first


def test_empty_report(tmp_path):
    emit_reports([], tmp_path)
    assert (tmp_path / "table.csv").read_text() == ",".join(CSV_COLUMNS) + "\n"
    assert json.loads((tmp_path / "report.json").read_text()) == {"rows": [], "tradeoffs": {}}
