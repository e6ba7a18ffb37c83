import random

from scipy.optimize import Bounds, LinearConstraint, milp

from schoolbus.instance import ScenarioSpec, generate_scenario
from schoolbus.mip import ModelSpec, build_routing_model, decode_routing


def micro_instance(seed: int, max_schools: int = 3, max_stops: int = 7, region_km: float = 6.0):
    """Small random instance: <= max_schools schools, <= max_stops stops each, A in {0, 1}."""
    r = random.Random(seed)
    n_schools = r.randint(1, max_schools)
    per_school = r.randint(1, max_stops)
    n_stops = r.randint(n_schools, n_schools * per_school)
    spec = ScenarioSpec(
        n_stops=n_stops,
        n_schools=n_schools,
        avg_students_per_school=r.randint(10, 80),
        max_stops_per_school=per_school,
        dismissal_range=(0, 30),
        seed=seed,
        region_km=region_km,
        additional_trips=r.randint(0, 1),
    )
    return generate_scenario(spec)


def solve_mip(model):
    c, A, lo, hi, lb, ub, integ = model.as_arrays()
    cons = LinearConstraint(A, lo, hi) if len(A) else ()
    res = milp(c, constraints=cons, bounds=Bounds(lb, ub), integrality=integ)
    assert res.success, res.message
    return res.fun, {v.name: x for v, x in zip(model.variables, res.x)}


def mip_route(inst, kind):
    """Optimum value and decoded trips of the routing MIP, solved by HiGHS through scipy."""
    model = build_routing_model(inst, ModelSpec(kind))
    value, values = solve_mip(model)
    trips, schedules = decode_routing(inst, values)
    return value, trips, schedules, values


def random_dag(r: random.Random, n: int, p: float):
    ids = [f"t{i}" for i in range(n)]
    perm = list(range(n))
    r.shuffle(perm)
    edges = [(ids[perm[i]], ids[perm[j]]) for i in range(n) for j in range(i + 1, n) if r.random() < p]
    return ids, edges

