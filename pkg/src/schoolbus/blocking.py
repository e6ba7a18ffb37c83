"""Chaining compatible trips into blocks (one block per bus).

The minimum number of blocks is a minimum path cover of the compatibility
DAG: split every trip into an out-copy and an in-copy, match out-copies to
in-copies along edges, and each matched edge glues two trips together.
"""
from __future__ import annotations

import functools
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .trips import CompatibilityGraph, Trip, TripSchedule

ORACLE_MAX_TRIPS = 12


class CyclicCompatibilityError(ValueError):
    """Compatibility graph has a directed cycle."""


@dataclass(frozen=True)
class Block:
    trips: tuple[str, ...]


@dataclass(frozen=True)
class BlockingSolution:
    blocks: tuple[Block, ...]
    edges_used: int
    objective: int | None = None  # alone minus middle trips, set by the oracle

    @property
    def bus_count(self) -> int:
        return len(self.blocks)

    def to_json(self) -> dict:
        return {
            "blocks": [list(b.trips) for b in self.blocks],
            "bus_count": self.bus_count,
            "edges_used": self.edges_used,
        }


def _ids(trips: Iterable[Trip | str]) -> list[str]:
    return [t.id if isinstance(t, Trip) else str(t) for t in trips]


def _adjacency(ids: Sequence[str], compat: CompatibilityGraph) -> list[list[int]]:
    pos = {t: i for i, t in enumerate(ids)}
    adj: list[list[int]] = [[] for _ in ids]
    for a, b in compat.edges:
        if a in pos and b in pos:
            adj[pos[a]].append(pos[b])
    for row in adj:
        row.sort()
    return adj


def _topological(adj: list[list[int]], ids: Sequence[str]) -> list[int]:
    indeg = [0] * len(adj)
    for row in adj:
        for j in row:
            indeg[j] += 1
    dq = deque(i for i, d in enumerate(indeg) if d == 0)
    order = []
    while dq:
        i = dq.popleft()
        order.append(i)
        for j in adj[i]:
            indeg[j] -= 1
            if indeg[j] == 0:
                dq.append(j)
    if len(order) != len(adj):
        stuck = [ids[i] for i, d in enumerate(indeg) if d > 0]
        raise CyclicCompatibilityError(f"compatibility graph has a cycle through {stuck[:5]}")
    return order


def hopcroft_karp(adj: list[list[int]], n_right: int) -> tuple[list[int], list[int]]:
    """Maximum bipartite matching; returns ``(match_left, match_right)`` with -1 for free."""
    n_left = len(adj)
    INF = n_left + n_right + 1
    ml = [-1] * n_left
    mr = [-1] * n_right
    dist = [0] * n_left

    def bfs() -> bool:
        dq = deque()
        for u in range(n_left):
            if ml[u] == -1:
                dist[u] = 0
                dq.append(u)
            else:
                dist[u] = INF
        found = False
        while dq:
            u = dq.popleft()
            for v in adj[u]:
                w = mr[v]
                if w == -1:
                    found = True
                elif dist[w] == INF:
                    dist[w] = dist[u] + 1
                    dq.append(w)
        return found

    def dfs(u: int) -> bool:
        # iterative DFS along the layered graph
        stack = [(u, iter(adj[u]))]
        path: list[tuple[int, int]] = []
        while stack:
            x, it = stack[-1]
            advanced = False
            for v in it:
                w = mr[v]
                if w == -1:
                    path.append((x, v))
                    for a, b in path:
                        ml[a], mr[b] = b, a
                    return True
                if dist[w] == dist[x] + 1:
                    path.append((x, v))
                    stack.append((w, iter(adj[w])))
                    advanced = True
                    break
            if not advanced:
                dist[x] = INF
                stack.pop()
                if path:
                    path.pop()
        return False

    while bfs():
        for u in range(n_left):
            if ml[u] == -1:
                dfs(u)
    return ml, mr


def _chains(ids: Sequence[str], nxt: Mapping[int, int], has_prev: set[int]) -> tuple[Block, ...]:
    blocks = []
    for i in range(len(ids)):
        if i in has_prev:
            continue
        chain = [ids[i]]
        while i in nxt:
            i = nxt[i]
            chain.append(ids[i])
        blocks.append(Block(tuple(chain)))
    return tuple(blocks)


def solve_blocking(trips: Iterable[Trip | str], compat: CompatibilityGraph) -> BlockingSolution:
    """Fewest blocks covering all trips, each block a chain of compatibility edges."""
    ids = _ids(trips)
    adj = _adjacency(ids, compat)
    _topological(adj, ids)
    ml, mr = hopcroft_karp(adj, len(ids))
    nxt = {u: v for u, v in enumerate(ml) if v != -1}
    has_prev = {v for v, u in enumerate(mr) if u != -1}
    blocks = _chains(ids, nxt, has_prev)
    return BlockingSolution(blocks, len(nxt))


def count_saveable_buses(compat: CompatibilityGraph, trips: Iterable[Trip | str] | None = None) -> int:
    """Buses saved by chaining: the size of a maximum matching of the split graph."""
    ids = _ids(trips) if trips is not None else list(compat.nodes)
    return solve_blocking(ids, compat).edges_used


def solve_blocking_oracle(trips: Iterable[Trip | str], compat: CompatibilityGraph) -> BlockingSolution:
    """Exhaustive optimum of the blocking model over pair selections ``y``.

    Trips are visited in topological order; each picks at most one successor
    among trips whose in-copy is still free.  The in-degree of a trip is fixed
    by the time it is reached, so its alone/middle indicators and the degree
    rows are evaluated literally per trip.  Memoising on (position, taken
    in-copies) covers every ``y`` without listing them one by one.  Limited
    to ``ORACLE_MAX_TRIPS`` trips.
    """
    ids = _ids(trips)
    n = len(ids)
    if n > ORACLE_MAX_TRIPS:
        raise ValueError(f"oracle limited to {ORACLE_MAX_TRIPS} trips, got {n}")
    adj = _adjacency(ids, compat)
    order = _topological(adj, ids)
    rank = {v: r for r, v in enumerate(order)}
    succ = [[rank[j] for j in adj[v]] for v in order]

    @functools.lru_cache(maxsize=None)
    def best(r: int, taken: int) -> tuple[int, int] | None:
        # (objective, successor rank or -1) for trips r.. given taken in-copies
        if r == n:
            return (0, -1)
        ind = taken >> r & 1
        out = None
        for o, j in [(0, -1)] + [(1, j) for j in succ[r] if not taken >> j & 1]:
            here = _node_value(o, ind)
            if here is None:
                continue
            rest = best(r + 1, taken | (1 << j if j >= 0 else 0))
            if rest is None:
                continue
            cand = (here + rest[0], j)
            if out is None or cand[0] < out[0]:
                out = cand
        return out

    res = best(0, 0)
    assert res is not None
    obj = res[0]
    chosen, taken = [], 0
    for r in range(n):
        _, j = best(r, taken)
        if j >= 0:
            chosen.append((order[r], order[j]))
            taken |= 1 << j
    best.cache_clear()
    assert obj == n - 2 * len(chosen), "objective identity violated"
    nxt = dict(chosen)
    has_prev = {b for _, b in chosen}
    return BlockingSolution(_chains(ids, nxt, has_prev), len(chosen), obj)


def _node_value(o: int, i: int) -> int | None:
    """Least ``a - m`` for a trip with out/in degrees o and i, or None if no row setting fits."""
    vals = []
    for a in (0, 1):
        for m in (0, 1):
            if o + i + a >= 1 and o + a <= 1 and i + a <= 1 and o + i <= 2 and o + i + a == 1 + m:
                vals.append(a - m)
    return min(vals) if vals else None


def replay_blocks(solution: BlockingSolution, trips: Sequence[Trip], schedules: Mapping[str, TripSchedule], inst) -> list[str]:
    """Drive every block in order and report any trip the bus reaches late."""
    by_id = {t.id: t for t in trips}
    problems = []
    for block in solution.blocks:
        clock = None
        prev = None
        for tid in block.trips:
            s = schedules[tid]
            if prev is not None:
                arrive = clock + inst.matrix(by_id[prev].last_stop, inst.school(by_id[tid].school).origin_stop)
                if arrive > s.start:
                    problems.append(f"block {block.trips}: late for {tid} ({arrive} > {s.start})")
            clock = s.end
            prev = tid
    return problems
