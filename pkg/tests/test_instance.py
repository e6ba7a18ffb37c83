import json
import warnings
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from schoolbus.fixtures import toy_instance
from schoolbus.instance import (
    Instance,
    InstanceFormatError,
    ScenarioSpec,
    School,
    Stop,
    TravelTimeMatrix,
    generate_scenario,
    instance_from_dict,
    instance_to_dict,
    load_instance,
    minimum_trips,
    save_instance,
    to_minutes,
    to_ticks,
    validate_instance,
)


def rules(inst):
    return {v.rule for v in validate_instance(inst)}


def tiny(**kw):
    stops = (Stop("O"), Stop("a"), Stop("b"))
    m = TravelTimeMatrix(["O", "a", "b"], [[0, 10, 20], [10, 0, 10], [20, 10, 0]])
    base = dict(stops=stops, schools=(School("K", "O", 0, {"a": 5, "b": 7}),), matrix=m)
    base.update(kw)
    return Instance(**base)


def test_ticks_round_trip():
    assert to_ticks(2.5) == 25
    assert to_minutes(25) == 2.5


def test_minimum_trips_is_ceiling():
    k = School("K", "O", 0, {"a": 48, "b": 1})
    assert minimum_trips(k, 48) == 2
    assert minimum_trips(replace(k, demand={"a": 48}), 48) == 1


def test_toy_fixture_is_valid():
    assert validate_instance(toy_instance()) == []


def test_metric_closure_shortens_detours():
    m = TravelTimeMatrix(["a", "b", "c"], [[0, 5, 50], [5, 0, 5], [50, 5, 0]])
    assert m("a", "c") == 10
    raw = TravelTimeMatrix(["a", "b", "c"], [[0, 5, 50], [5, 0, 5], [50, 5, 0]], close=False)
    assert raw("a", "c") == 50


@pytest.mark.parametrize(
    "kw,rule",
    [
        (dict(capacity=0), "capacity-positive"),
        (dict(buffer_pickup=-1), "buffer-nonnegative"),
        (dict(additional_trips=-1), "additional-trips-nonnegative"),
        (dict(schools=(School("K", "O", 0, {}),)), "school-nonempty"),
        (dict(schools=(School("K", "O", 0, {"a": 0}),)), "demand-positive"),
        (dict(schools=(School("K", "O", 0, {"zz": 3}),)), "unknown-stop"),
        (dict(schools=(School("K", "O", 0, {"O": 3}),)), "origin-not-assigned"),
        (dict(schools=(School("K", "O", 0, {"a": 3}), School("L", "b", 0, {"a": 2}))), "disjoint-assignment"),
        (dict(schools=(School("K", "O", 0, {"a": 3}), School("K", "b", 0, {"a": 2}))), "unique-school-ids"),
    ],
)
def test_validation_rules(kw, rule):
    assert rule in rules(tiny(**kw))


def test_matrix_rules():
    stops = (Stop("O"), Stop("a"), Stop("a"))
    m = TravelTimeMatrix(["O", "a", "a"], [[0, 1, 1], [1, 0, 1], [1, 1, 0]])
    assert "unique-stop-ids" in rules(tiny(stops=stops, matrix=m))
    bad = TravelTimeMatrix(["O", "a", "b"], [[0, 10, 50], [10, 0, 10], [50, 10, 0]], close=False)
    assert "matrix-triangle" in rules(tiny(matrix=bad))
    neg = TravelTimeMatrix(["O", "a", "b"], [[0, -1, 2], [1, 0, 1], [2, 1, 0]])
    assert "matrix-nonnegativity" in rules(tiny(matrix=neg))
    diag = TravelTimeMatrix(["O", "a", "b"], [[3, 1, 2], [1, 0, 1], [2, 1, 0]], close=False)
    assert "matrix-diagonal" in rules(tiny(matrix=diag))
    shape = TravelTimeMatrix(["O", "a"], [[0, 1], [1, 0]])
    assert "matrix-shape" in rules(tiny(matrix=shape))


def test_json_round_trip(tmp_path):
    inst = toy_instance()
    p = tmp_path / "i.json"
    save_instance(inst, p)
    assert load_instance(p) == inst
    first = p.read_text()
    save_instance(load_instance(p), p)
    assert p.read_text() == first


def test_json_errors_name_the_field(tmp_path):
    data = instance_to_dict(toy_instance())
    del data["schools"][1]["origin"]
    with pytest.raises(InstanceFormatError, match=r"schools\[1\]\.origin"):
        instance_from_dict(data)
    data = instance_to_dict(toy_instance())
    data["schools"][0]["demand"]["s1"] = "20"
    with pytest.raises(InstanceFormatError, match="demand"):
        instance_from_dict(data)
    p = tmp_path / "bad.json"
    p.write_text('{"capacity": 48,\n "stops": [}')
    with pytest.raises(InstanceFormatError, match="line 2"):
        load_instance(p)


def test_unknown_fields_warn():
    data = instance_to_dict(toy_instance())
    data["colour"] = "yellow"
    with pytest.warns(UserWarning, match="colour"):
        instance_from_dict(data)


def test_matrix_optional_uses_geometry():
    data = instance_to_dict(toy_instance())
    data.pop("matrix")
    data["stops"] = [{"id": s["id"], "x": i, "y": 0} for i, s in enumerate(data["stops"])]
    inst = instance_from_dict(data, speed_kmh=60, dwell_min=0)
    assert inst.matrix("O1", "s1") == 10  # 1 km at 60 km/h


def test_generator_is_deterministic():
    spec = ScenarioSpec(25, 3, 91, 8, seed=7)
    a, b = generate_scenario(spec), generate_scenario(spec)
    assert a == b
    assert json.dumps(instance_to_dict(a)) == json.dumps(instance_to_dict(b))
    assert generate_scenario(replace(spec, seed=8)) != a


def test_generator_rejects_bad_spec():
    with pytest.raises(ValueError, match="n_stops"):
        generate_scenario(ScenarioSpec(1, 3, 50, 4))
    with pytest.raises(ValueError, match="fewer students"):
        generate_scenario(ScenarioSpec(10, 1, 3, 10))


def test_spec_from_dict_warns_on_unknown():
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        spec = ScenarioSpec.from_dict({"n_stops": 5, "n_schools": 1, "avg_students_per_school": 20, "max_stops_per_school": 5, "bogus": 1})
    assert spec.n_stops == 5 and any("bogus" in str(x.message) for x in w)


@settings(max_examples=60, deadline=None)
@given(
    n_schools=st.integers(1, 4),
    extra=st.integers(0, 12),
    max_stops=st.integers(1, 8),
    avg=st.integers(15, 150),
    seed=st.integers(0, 10_000),
    lo=st.sampled_from([0, 15, 30]),
    width=st.sampled_from([0, 30, 90]),
)
def test_generated_instances_are_valid(n_schools, extra, max_stops, avg, seed, lo, width):
    spec = ScenarioSpec(n_schools + extra, n_schools, avg, max_stops, dismissal_range=(lo, lo + width), seed=seed)
    inst = generate_scenario(spec)
    assert validate_instance(inst) == []
    assert sum(k.population for k in inst.schools) == round(avg * n_schools)
    for k in inst.schools:
        assert 1 <= len(k.demand) <= max_stops
        assert to_ticks(lo) <= k.dismissal <= to_ticks(lo + width)
        assert (to_minutes(k.dismissal) - lo) % 15 == 0
    arr = inst.matrix.as_array()
    assert (np.diagonal(arr) == 0).all()
