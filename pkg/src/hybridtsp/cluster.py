"""K-means decomposition of an instance into size-capped clusters."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_CAP = 4


@dataclass(frozen=True)
class ClusterAssignment:
    members: tuple[tuple[int, ...], ...]
    centroids: tuple[tuple[float, float], ...]

    @property
    def k(self) -> int:
        return len(self.members)

    def labels(self, n: int) -> list[int]:
        out = [-1] * n
        for c, mem in enumerate(self.members):
            for i in mem:
                out[i] = c
        return out

    def to_dict(self) -> dict:
        return {
            "members": [list(m) for m in self.members],
            "centroids": [list(c) for c in self.centroids],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ClusterAssignment":
        return cls(
            tuple(tuple(m) for m in data["members"]),
            tuple(tuple(c) for c in data["centroids"]),
        )


def choose_k(n: int, cap: int = DEFAULT_CAP) -> int:
    if n < 1:
        raise ValueError("need at least one city")
    return max(1, math.ceil(n / cap))


def _assign(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    # argmin returns the first minimum: equidistant ties go to the lowest cluster index
    return np.argmin(d2, axis=1)


def _reseed_empty(points: np.ndarray, labels: np.ndarray, centroids: np.ndarray, k: int) -> bool:
    changed = False
    for c in range(k):
        if np.any(labels == c):
            continue
        sizes = np.bincount(labels, minlength=k)
        big = int(np.argmax(sizes))
        idx = np.flatnonzero(labels == big)
        dist = ((points[idx] - centroids[big]) ** 2).sum(axis=1)
        far = int(idx[int(np.argmax(dist))])
        labels[far] = c
        centroids[c] = points[far]
        centroids[big] = points[labels == big].mean(axis=0)
        changed = True
    return changed


def kmeans(points, k: int, max_iter: int = 100, seed: int = 0) -> ClusterAssignment:
    """Lloyd's algorithm on raw coordinate pairs with Euclidean distance.

    Initial centroids are ``k`` distinct points drawn by a seeded generator.
    Stops at an assignment fixpoint or after ``max_iter`` iterations.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be an (n, 2) array of (lat, lon)")
    n = len(pts)
    if k < 1 or k > n:
        raise ValueError(f"k={k} must lie in [1, {n}]")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    rng = np.random.default_rng(seed)
    centroids = pts[np.sort(rng.choice(n, size=k, replace=False))].copy()
    labels = _assign(pts, centroids)
    for _ in range(max_iter):
        _reseed_empty(pts, labels, centroids, k)
        for c in range(k):
            centroids[c] = pts[labels == c].mean(axis=0)
        new = _assign(pts, centroids)
        if np.array_equal(new, labels):
            break
        labels = new
    _reseed_empty(pts, labels, centroids, k)
    members = tuple(tuple(int(i) for i in np.flatnonzero(labels == c)) for c in range(k))
    cents = tuple(tuple(float(v) for v in pts[list(m)].mean(axis=0)) for m in members)
    return ClusterAssignment(members, cents)


def enforce_cap(assignment: ClusterAssignment, points, cap: int = DEFAULT_CAP) -> ClusterAssignment:
    """Split clusters larger than ``cap``.

    The point farthest from its cluster centroid is detached and moved to the
    smallest other cluster with room, or into a new cluster when none has
    room; repeated until every cluster fits.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    pts = np.asarray(points, dtype=float)
    clusters = [list(m) for m in assignment.members if m]
    if all(len(m) <= cap for m in clusters):
        return assignment

    def centroid(m):
        return pts[m].mean(axis=0)

    c = 0
    while c < len(clusters):
        while len(clusters[c]) > cap:
            mem = clusters[c]
            dist = ((pts[mem] - centroid(mem)) ** 2).sum(axis=1)
            # ties go to the lowest point index
            order = sorted(range(len(mem)), key=lambda t: (-dist[t], mem[t]))
            far = mem.pop(order[0])
            room = [o for o in range(len(clusters)) if o != c and len(clusters[o]) < cap]
            if room:
                target = min(room, key=lambda o: (len(clusters[o]), o))
                clusters[target].append(far)
            else:
                clusters.append([far])
        c += 1
    members = tuple(tuple(sorted(m)) for m in clusters)
    cents = tuple(tuple(float(v) for v in centroid(list(m))) for m in members)
    return ClusterAssignment(members, cents)


def decompose(points, cap: int = DEFAULT_CAP, max_iter: int = 100, seed: int = 0) -> ClusterAssignment:
    """choose_k, kmeans and enforce_cap in sequence."""
    n = len(points)
    return enforce_cap(kmeans(points, choose_k(n, cap), max_iter, seed), points, cap)
