"""Cheapest open paths from a school origin through a set of stops.

For every possible last stop we want the shortest path that starts at the
origin, visits the whole set and ends there, because the end point and the
end time are all that compatibility looks at.  Sets up to ``EXACT_LIMIT``
stops are solved exactly by Held-Karp; larger sets fall back to insertion
plus 2-opt.
"""
from __future__ import annotations

from typing import Sequence

EXACT_LIMIT = 9


def endpoint_paths(origin: int, stops: Sequence[int], D: Sequence[Sequence[int]]) -> dict[int, tuple[int, tuple[int, ...]]]:
    """Map each last stop to ``(duration, path)``; keys follow ``stops`` order."""
    stops = sorted(stops)
    if not stops:
        return {}
    if len(stops) <= EXACT_LIMIT:
        return _held_karp(origin, stops, D)
    return {last: _heuristic_path(origin, stops, last, D) for last in stops}


def _held_karp(origin: int, stops: list[int], D) -> dict[int, tuple[int, tuple[int, ...]]]:
    n = len(stops)
    full = (1 << n) - 1
    INF = float("inf")
    cost = [[INF] * n for _ in range(1 << n)]
    prev = [[-1] * n for _ in range(1 << n)]
    for j in range(n):
        cost[1 << j][j] = D[origin][stops[j]]
    for mask in range(1, 1 << n):
        row = cost[mask]
        for j in range(n):
            c = row[j]
            if c == INF:
                continue
            dj = D[stops[j]]
            for k in range(n):
                if mask >> k & 1:
                    continue
                nm = mask | 1 << k
                v = c + dj[stops[k]]
                if v < cost[nm][k]:
                    cost[nm][k] = v
                    prev[nm][k] = j
    out = {}
    for j in range(n):
        path = []
        mask, k = full, j
        while k != -1:
            path.append(stops[k])
            pk = prev[mask][k]
            mask ^= 1 << k
            k = pk
        out[stops[j]] = (int(cost[full][j]), tuple(reversed(path)))
    return out


def path_duration(origin: int, path: Sequence[int], D) -> int:
    total, prev = 0, origin
    for s in path:
        total += D[prev][s]
        prev = s
    return total


def _heuristic_path(origin: int, stops: list[int], last: int, D) -> tuple[int, tuple[int, ...]]:
    body: list[int] = []
    for s in stops:
        if s == last:
            continue
        best = None
        for pos in range(len(body) + 1):
            cand = body[:pos] + [s] + body[pos:]
            c = path_duration(origin, cand + [last], D)
            if best is None or c < best[0]:
                best = (c, cand)
        body = best[1]
    path = body + [last]
    cur = path_duration(origin, path, D)
    improved = True
    while improved:
        improved = False
        for i in range(len(path) - 2):
            for j in range(i + 1, len(path) - 1):
                cand = path[:i] + path[i : j + 1][::-1] + path[j + 1 :]
                c = path_duration(origin, cand, D)
                if c < cur:
                    path, cur, improved = cand, c, True
    return cur, tuple(path)
