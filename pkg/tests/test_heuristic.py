import pytest

from helpers import micro_instance
from schoolbus.exact import exact_admissible, solve_exact
from schoolbus.fixtures import toy_instance
from schoolbus.heuristic import solve_heuristic
from schoolbus.instance import ScenarioSpec, generate_scenario
from schoolbus.routing import ALL_OBJECTIVES, SolverConfig
from schoolbus.trips import build_compatibility_graph, check_routing_feasibility

TOY = toy_instance()


@pytest.mark.parametrize("kind", [k.value for k in ALL_OBJECTIVES])
def test_toy_reaches_optimum(kind):
    h = solve_heuristic(TOY, SolverConfig(objective_kind=kind))
    e = solve_exact(TOY, SolverConfig(objective_kind=kind))
    assert h.objective_value == e.objective_value
    assert check_routing_feasibility(h, TOY) == []


def test_zero_iterations_is_construction_only():
    inst = generate_scenario(ScenarioSpec(25, 3, 91, 8, seed=4))
    sol = solve_heuristic(inst, SolverConfig(max_iterations=0, restarts=0))
    assert check_routing_feasibility(sol, inst) == []
    assert sol.stats["evaluated_moves"] == 0


def test_deterministic_under_seed():
    inst = generate_scenario(ScenarioSpec(25, 3, 91, 8, seed=5))
    cfg = SolverConfig(seed=3)
    a, b = solve_heuristic(inst, cfg), solve_heuristic(inst, cfg)
    assert a.trips == b.trips and a.objective_value == b.objective_value


def test_time_limit_returns_feasible_incumbent():
    inst = generate_scenario(ScenarioSpec(40, 4, 120, 10, seed=6))
    sol = solve_heuristic(inst, SolverConfig(time_limit=0.01))
    assert check_routing_feasibility(sol, inst) == []


@pytest.mark.parametrize("ops", [("relocate",), ("swap", "split"), ("drop", "resplit", "open")])
def test_restricted_neighborhoods_stay_feasible(ops):
    inst = generate_scenario(ScenarioSpec(20, 3, 80, 7, seed=9, additional_trips=1))
    sol = solve_heuristic(inst, SolverConfig(neighborhood_ops=ops))
    assert check_routing_feasibility(sol, inst) == []


@pytest.mark.parametrize("seed", range(100, 120))
def test_dominated_by_exact(seed):
    inst = micro_instance(seed)
    if exact_admissible(inst, SolverConfig()):
        pytest.skip("outside the exact guard")
    for kind in ALL_OBJECTIVES:
        cfg = SolverConfig(objective_kind=kind, seed=seed)
        e, h = solve_exact(inst, cfg), solve_heuristic(inst, cfg)
        assert h.objective_value >= e.objective_value - 1e-9
        assert check_routing_feasibility(h, inst) == []


@pytest.mark.parametrize("seed", range(200, 215))
def test_objective_ordering(seed):
    inst = micro_instance(seed)
    if exact_admissible(inst, SolverConfig()):
        pytest.skip("outside the exact guard")
    sol = {k: solve_exact(inst, SolverConfig(objective_kind=k)) for k in ALL_OBJECTIVES}
    edges = {k: build_compatibility_graph(s, inst).n_edges for k, s in sol.items()}
    mintt, mctt, mc = ALL_OBJECTIVES[3], ALL_OBJECTIVES[0], ALL_OBJECTIVES[1]
    assert sol[mintt].total_tt <= sol[mctt].total_tt
    assert edges[mc] >= edges[mctt]
