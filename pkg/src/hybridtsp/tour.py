"""Tours, the MST baseline, the brute-force oracle, stitching and 2-opt moves."""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class InvalidTour(ValueError):
    pass


@dataclass(frozen=True)
class Tour:
    order: tuple[int, ...]
    closed: bool = True

    def __post_init__(self):
        order = tuple(int(i) for i in self.order)
        if len(set(order)) != len(order):
            raise InvalidTour(f"duplicate city in tour {order}")
        object.__setattr__(self, "order", order)

    def __len__(self):
        return len(self.order)

    def validate(self, n: int, start: int | None = None) -> None:
        """Check that this is a full closed tour over ``n`` cities starting at ``start``."""
        if sorted(self.order) != list(range(n)):
            raise InvalidTour(f"tour {self.order} does not visit all {n} cities exactly once")
        if not self.closed:
            raise InvalidTour("a full solution tour must be closed")
        if start is not None and self.order[0] != start:
            raise InvalidTour(f"tour starts at {self.order[0]}, expected {start}")


def _matrix(dm) -> np.ndarray:
    return np.asarray(getattr(dm, "d", dm), dtype=float)


def tour_cost(t: Tour, dm) -> float:
    d = _matrix(dm)
    n = len(d)
    order = t.order
    if any(i < 0 or i >= n for i in order):
        raise InvalidTour(f"tour {order} has an index outside [0, {n})")
    if len(order) < 2:
        return 0.0
    idx = np.asarray(order)
    total = float(d[idx[:-1], idx[1:]].sum())
    if t.closed:
        total += float(d[idx[-1], idx[0]])
    return total


def brute_force_optimal(dm, start: int = 0) -> Tour:
    """Exhaustive search over every ordering with a fixed start (n <= 10).

    Ties are broken by the lexicographically smallest order.
    """
    d = _matrix(dm)
    n = len(d)
    if not 2 <= n <= 10:
        raise ValueError(f"brute force supports 2 <= n <= 10, got {n}")
    rest = [i for i in range(n) if i != start]
    best, best_cost = None, np.inf
    # permutations of a sorted list come out in lexicographic order
    for perm in itertools.permutations(rest):
        order = (start, *perm)
        c = d[order[-1], start] + sum(d[order[k], order[k + 1]] for k in range(n - 1))
        if c < best_cost:
            best, best_cost = order, c
    return Tour(best)


def minimum_spanning_tree(d: np.ndarray) -> list[tuple[int, int]]:
    """Prim's algorithm from vertex 0; ties go to the lowest (weight, vertex, parent)."""
    n = len(d)
    in_tree = [False] * n
    edges = []
    heap = [(0.0, 0, -1)]
    while heap:
        w, v, parent = heapq.heappop(heap)
        if in_tree[v]:
            continue
        in_tree[v] = True
        if parent >= 0:
            edges.append((parent, v))
        for u in range(n):
            if not in_tree[u]:
                heapq.heappush(heap, (float(d[v, u]), u, v))
    return edges


def _greedy_matching(d: np.ndarray, odd: list[int]) -> list[tuple[int, int]]:
    pairs = sorted(
        (float(d[a, b]), a, b) for i, a in enumerate(odd) for b in odd[i + 1:]
    )
    used: set[int] = set()
    out = []
    for _, a, b in pairs:
        if a not in used and b not in used:
            used.update((a, b))
            out.append((a, b))
    return out


def _euler_circuit(n: int, edges: list[tuple[int, int]], start: int) -> list[int]:
    """Hierholzer's algorithm on a multigraph given as an edge list."""
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for e, (a, b) in enumerate(edges):
        adj[a].append((b, e))
        adj[b].append((a, e))
    for lst in adj:
        lst.sort(reverse=True)  # pop() takes the lowest neighbour first
    used = [False] * len(edges)
    stack, circuit = [start], []
    while stack:
        v = stack[-1]
        while adj[v] and used[adj[v][-1][1]]:
            adj[v].pop()
        if adj[v]:
            u, e = adj[v].pop()
            used[e] = True
            stack.append(u)
        else:
            circuit.append(stack.pop())
    return circuit[::-1]


def _shortcut(walk: Sequence[int]) -> list[int]:
    seen: set[int] = set()
    out = []
    for v in walk:
        if v not in seen:
            seen.add(v)
            out.append(v)
    return out


def _rotate(order: Sequence[int], start: int) -> tuple[int, ...]:
    k = list(order).index(start)
    return tuple(order[k:]) + tuple(order[:k])


def mst_heuristic(dm, start: int = 0) -> Tour:
    """MST + greedy odd-vertex matching + Euler circuit + shortcutting.

    Falls back to shortcutting the doubled tree if the matched tour ever
    exceeds twice the tree weight, which keeps the 2x bound on metric inputs.
    """
    d = _matrix(dm)
    n = len(d)
    if n < 2:
        raise ValueError("need at least 2 cities")
    tree = minimum_spanning_tree(d)
    degree = np.zeros(n, dtype=int)
    for a, b in tree:
        degree[a] += 1
        degree[b] += 1
    odd = [v for v in range(n) if degree[v] % 2]
    multigraph = tree + _greedy_matching(d, odd)
    order = _shortcut(_euler_circuit(n, multigraph, start))
    tour = Tour(_rotate(order, start))
    tree_weight = sum(float(d[a, b]) for a, b in tree)
    if tour_cost(tour, d) > 2 * tree_weight:
        order = _shortcut(_euler_circuit(n, tree + tree, start))
        tour = Tour(_rotate(order, start))
    return tour


def stitch(cluster_paths: Sequence[Sequence[int]], start_city: int, dm) -> Tour:
    """Join per-cluster open paths into one closed tour from ``start_city``.

    The path holding the start city is rotated to begin there. Then, from the
    current tail, the unvisited cluster with the nearest path end is appended,
    reversed when its last city is the nearer end. Ties go to the lowest
    cluster index and to the unreversed orientation.
    """
    d = _matrix(dm)
    n = len(d)
    paths = [list(p) for p in cluster_paths]
    flat = [c for p in paths for c in p]
    if sorted(flat) != list(range(n)) or any(not p for p in paths):
        raise InvalidTour("cluster paths must partition all cities into non-empty paths")
    home = next((k for k, p in enumerate(paths) if start_city in p), None)
    if home is None:
        raise InvalidTour(f"start city {start_city} is not in any cluster path")

    order = list(_rotate(paths[home], start_city))
    remaining = [k for k in range(len(paths)) if k != home]
    while remaining:
        tail = order[-1]
        best = None
        for k in remaining:
            p = paths[k]
            for rev, end in ((False, p[0]), (True, p[-1])):
                key = (d[tail, end], k, rev)
                if best is None or key < best:
                    best = key
        _, k, rev = best
        order += paths[k][::-1] if rev else paths[k]
        remaining.remove(k)
    return Tour(tuple(order))


def two_opt_swap(t: Tour, i: int, j: int) -> Tour:
    """Reverse ``order[i..j]`` inclusive; index 0 (the start) never moves."""
    n = len(t.order)
    if not (0 < i <= j < n):
        raise IndexError(f"need 0 < i <= j < {n}, got i={i}, j={j}")
    o = t.order
    return Tour(o[:i] + o[i : j + 1][::-1] + o[j + 1 :], t.closed)


def two_opt_moves(n: int):
    """All proper swaps (i, j) with 0 < i < j < n."""
    return [(i, j) for i in range(1, n - 1) for j in range(i + 1, n)]
