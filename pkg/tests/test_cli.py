import json

import pytest

from schoolbus.cli import main
from schoolbus.fixtures import toy_instance
from schoolbus.instance import load_instance, save_instance, validate_instance
from schoolbus.mip import read_mps


@pytest.fixture
def toy(tmp_path):
    p = tmp_path / "toy.json"
    save_instance(toy_instance(), p)
    return p


def test_generate(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"n_stops": 12, "n_schools": 2, "avg_students_per_school": 70, "max_stops_per_school": 6}))
    out = tmp_path / "inst.json"
    assert main(["generate", "--spec", str(spec), "--seed", "4", "-o", str(out)]) == 0
    assert validate_instance(load_instance(out)) == []
    out2 = tmp_path / "again.json"
    main(["generate", "--spec", str(spec), "--seed", "4", "-o", str(out2)])
    assert out.read_bytes() == out2.read_bytes()


def test_solve_then_block(toy, tmp_path):
    sol = tmp_path / "out" / "sol.json"
    sol.parent.mkdir()
    assert main(["solve", "--instance", str(toy), "--objective", "maxcom+tt", "--time-limit", "5", "-o", str(sol)]) == 0
    data = json.loads(sol.read_text())
    assert data["manifest"]["objective_value"] == 2850 and data["manifest"]["gap"] == 0
    assert {"objective_kind", "seed", "wall_time", "bound"} <= set(data["manifest"])
    blocks = tmp_path / "blocks.json"
    assert main(["block", "--solution", str(sol), "-o", str(blocks)]) == 0
    assert json.loads(blocks.read_text())["bus_count"] == 2


def test_experiment(toy, tmp_path):
    out = tmp_path / "rep"
    assert main(["experiment", "--instances", str(toy.parent), "--objectives", "all", "--no-timings", "-o", str(out)]) == 0
    lines = (out / "table.csv").read_text().splitlines()
    assert lines[0] == "scenario,objective,rt_sec,gap_pct,n_trips,n_buses,total_tt_min"
    assert len(lines) == 5


def test_export_mps(toy, tmp_path):
    out = tmp_path / "m.mps"
    assert main(["export-mps", "--instance", str(toy), "--objective", "mintt", "-o", str(out)]) == 0
    assert read_mps(out).n_variables == 90


def test_errors_exit_nonzero(tmp_path, capsys):
    assert main(["solve", "--instance", str(tmp_path / "missing.json"), "-o", str(tmp_path / "x.json")]) == 1
    assert "missing.json" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["block", "--solution", str(bad), "-o", str(tmp_path / "b.json")]) == 1
    assert "line 1" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--instance", "x", "--objective", "fastest", "-o", "y"])
    assert exc.value.code != 0
