import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_dag
from schoolbus.blocking import (
    CyclicCompatibilityError,
    count_saveable_buses,
    replay_blocks,
    solve_blocking,
    solve_blocking_oracle,
)
from schoolbus.fixtures import toy_instance
from schoolbus.heuristic import solve_heuristic
from schoolbus.instance import ScenarioSpec, generate_scenario
from schoolbus.routing import SolverConfig
from schoolbus.trips import CompatibilityGraph, build_compatibility_graph

G = CompatibilityGraph.from_edges


def partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for p in partitions(rest):
        for i in range(len(p)):
            yield p[:i] + [[first] + p[i]] + p[i + 1 :]
        yield [[first]] + p


def brute_force_buses(ids, edges):
    """Fewest chains over all set partitions and orderings (tiny graphs only)."""
    es = set(edges)
    best = len(ids)
    for p in partitions(list(ids)):
        if all(any(all((o[i], o[i + 1]) in es for i in range(len(o) - 1)) for o in itertools.permutations(part)) for part in p):
            best = min(best, len(p))
    return best


def is_valid(sol, ids, edges):
    seen = [t for b in sol.blocks for t in b.trips]
    assert sorted(seen) == sorted(ids)
    for b in sol.blocks:
        assert b.trips
        for x, y in zip(b.trips, b.trips[1:]):
            assert (x, y) in edges
    assert sol.bus_count == len(ids) - sol.edges_used


def test_fork_saves_one_bus():
    g = G("ABC", [("A", "B"), ("A", "C")])
    sol = solve_blocking("ABC", g)
    assert sol.bus_count == 2
    assert g.n_edges == 2 and count_saveable_buses(g) == 1
    assert solve_blocking_oracle("ABC", g).bus_count == 2


def test_chain_and_empty():
    g = G("ABC", [("A", "B"), ("B", "C")])
    sol = solve_blocking("ABC", g)
    assert [b.trips for b in sol.blocks] == [("A", "B", "C")]
    assert count_saveable_buses(g) == 2
    assert solve_blocking("ABCD", G("ABCD", [])).bus_count == 4
    assert count_saveable_buses(G([], [])) == 0


def test_oracle_small_cases():
    one = solve_blocking_oracle(["A"], G("A", []))
    assert one.objective == 1 and one.bus_count == 1
    two = solve_blocking_oracle("AB", G("AB", [("A", "B")]))
    assert two.objective == 0 and two.bus_count == 1
    chain = solve_blocking_oracle("ABC", G("ABC", [("A", "B"), ("B", "C")]))
    assert chain.objective == -1


def test_cycles_rejected():
    g = G("AB", [("A", "B"), ("B", "A")])
    with pytest.raises(CyclicCompatibilityError):
        solve_blocking("AB", g)
    with pytest.raises(CyclicCompatibilityError):
        solve_blocking_oracle("AB", g)


def test_oracle_size_guard():
    ids = [f"t{i}" for i in range(13)]
    with pytest.raises(ValueError, match="12"):
        solve_blocking_oracle(ids, G(ids, []))


def test_json_shape():
    sol = solve_blocking("ABC", G("ABC", [("A", "B")]))
    assert sol.to_json() == {"blocks": [["A", "B"], ["C"]], "bus_count": 2, "edges_used": 1}


@settings(max_examples=150, deadline=None)
@given(n=st.integers(0, 6), p=st.floats(0, 1), seed=st.integers(0, 10**6))
def test_matches_brute_force_partitions(n, p, seed):
    ids, edges = random_dag(random.Random(seed), n, p)
    sol = solve_blocking(ids, G(ids, edges))
    is_valid(sol, ids, set(edges))
    assert sol.bus_count == brute_force_buses(ids, edges)


@settings(max_examples=250, deadline=None)
@given(n=st.integers(1, 12), p=st.floats(0, 1), seed=st.integers(0, 10**6))
def test_matches_oracle(n, p, seed):
    ids, edges = random_dag(random.Random(seed), n, p)
    g = G(ids, edges)
    fast, oracle = solve_blocking(ids, g), solve_blocking_oracle(ids, g)
    is_valid(oracle, ids, set(edges))
    assert fast.bus_count == oracle.bus_count
    assert oracle.objective == n - 2 * oracle.edges_used


@settings(max_examples=100, deadline=None)
@given(n=st.integers(1, 12), p=st.floats(0, 1), seed=st.integers(0, 10**6))
def test_monotone_in_edges(n, p, seed):
    r = random.Random(seed)
    ids, edges = random_dag(r, n, p)
    sub = [e for e in edges if r.random() < 0.5]
    assert solve_blocking(ids, G(ids, edges)).bus_count <= solve_blocking(ids, G(ids, sub)).bus_count


@pytest.mark.parametrize("seed", range(5))
def test_blocks_replay_on_schedules(seed):
    inst = generate_scenario(ScenarioSpec(25, 3, 91, 8, seed=seed))
    sol = solve_heuristic(inst, SolverConfig())
    g = build_compatibility_graph(sol, inst)
    blocks = solve_blocking(sol.trips, g)
    assert replay_blocks(blocks, sol.trips, sol.schedules, inst) == []


def test_toy_blocking():
    toy = toy_instance()
    sol = solve_heuristic(toy, SolverConfig())
    assert solve_blocking(sol.trips, build_compatibility_graph(sol, toy)).bus_count == 2
