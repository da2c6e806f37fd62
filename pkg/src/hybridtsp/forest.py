"""Random-forest regression over tour edge features and forest-guided 2-opt."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .tour import Tour, tour_cost, two_opt_moves, two_opt_swap


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 300
    max_depth: int = 30
    min_samples_split: int = 2
    max_samples: int = 10_000
    feature_subsample: float = 1.0

    def __post_init__(self):
        if self.n_trees < 1 or self.max_depth < 1 or self.max_samples < 1:
            raise ValueError("n_trees, max_depth and max_samples must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if not 0.0 < self.feature_subsample <= 1.0:
            raise ValueError("feature_subsample must be in (0, 1]")


@dataclass(frozen=True, eq=False)
class TrainingSet:
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if X.ndim != 2 or y.shape != (X.shape[0],):
            raise ValueError(f"inconsistent shapes X{X.shape}, y{y.shape}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    def __len__(self):
        return len(self.y)


class RegressionTree:
    """CART regression tree stored as flat node arrays.

    Internal nodes have ``feature >= 0``; samples with ``x[feature] <= threshold``
    go left. Leaves carry ``feature == -1`` and the mean of their labels.
    """

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=float)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=int)
        for k in range(self.n_nodes):
            if self.feature[k] >= 0:
                depth[self.left[k]] = depth[self.right[k]] = depth[k] + 1
        return int(depth.max())

    @classmethod
    def fit(cls, X, y, max_depth=30, min_samples_split=2, feature_subsample=1.0, rng=None):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        n_features = X.shape[1]
        n_try = max(1, int(round(feature_subsample * n_features)))
        rng = np.random.default_rng(0) if rng is None else rng
        feature, threshold, left, right, value = [], [], [], [], []

        def new_node():
            for arr, v in ((feature, -1), (threshold, 0.0), (left, -1), (right, -1), (value, 0.0)):
                arr.append(v)
            return len(feature) - 1

        root = new_node()
        stack = [(root, np.arange(len(y)), 0)]
        while stack:
            node, idx, depth = stack.pop()
            ys = y[idx]
            value[node] = ys[0] if np.all(ys == ys[0]) else float(ys.mean())
            if depth >= max_depth or len(idx) < min_samples_split or np.all(ys == ys[0]):
                continue
            if n_try < n_features:
                feats = np.sort(rng.choice(n_features, n_try, replace=False))
            else:
                feats = range(n_features)
            split = _best_split(X[idx], ys, feats)
            if split is None:
                continue
            f, thr = split
            go_left = X[idx, f] <= thr
            lnode, rnode = new_node(), new_node()
            feature[node], threshold[node] = f, thr
            left[node], right[node] = lnode, rnode
            stack.append((rnode, idx[~go_left], depth + 1))
            stack.append((lnode, idx[go_left], depth + 1))
        return cls(feature, threshold, left, right, value)

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return self.value[node]
            r, nd = rows[inner], node[inner]
            go_left = X[r, f[inner]] <= self.threshold[nd]
            node[inner] = np.where(go_left, self.left[nd], self.right[nd])

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RegressionTree":
        return cls(data["feature"], data["threshold"], data["left"], data["right"], data["value"])


def _best_split(X: np.ndarray, y: np.ndarray, feats) -> tuple[int, float] | None:
    """Split with the largest reduction in squared error.

    Thresholds are midpoints between adjacent distinct sorted values. Ties go
    to the lowest feature index, then the lowest threshold.
    """
    n = len(y)
    parent = float(((y - y.mean()) ** 2).sum())
    best_gain, best = 1e-12 * max(parent, 1.0), None
    for f in feats:
        order = np.argsort(X[:, f], kind="stable")
        xs, ys = X[order, f], y[order]
        valid = np.flatnonzero(xs[:-1] < xs[1:])
        if valid.size == 0:
            continue
        cs = np.cumsum(ys)
        cs2 = np.cumsum(ys * ys)
        nl = valid + 1.0
        nr = n - nl
        sl, sl2 = cs[valid], cs2[valid]
        sr, sr2 = cs[-1] - sl, cs2[-1] - sl2
        sse = (sl2 - sl * sl / nl) + (sr2 - sr * sr / nr)
        k = int(np.argmin(sse))
        gain = parent - float(sse[k])
        if gain > best_gain:
            best_gain = gain
            best = (int(f), float((xs[valid[k]] + xs[valid[k] + 1]) / 2))
    return best


class Forest:
    def __init__(self, trees: Sequence[RegressionTree], n_features: int):
        self.trees = list(trees)
        self.n_features = n_features

    def predict(self, features) -> np.ndarray | float:
        X = np.asarray(features, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        per_tree = np.stack([t.predict(X) for t in self.trees])
        out = per_tree.mean(axis=0)
        # keep exact values where every tree agrees
        same = np.all(per_tree == per_tree[0], axis=0)
        out[same] = per_tree[0, same]
        return float(out[0]) if single else out

    __call__ = predict

    def to_dict(self) -> dict:
        return {"n_features": self.n_features, "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, data: dict) -> "Forest":
        return cls([RegressionTree.from_dict(t) for t in data["trees"]], data["n_features"])


def train_forest(data: TrainingSet, cfg: ForestConfig = ForestConfig(), rng=None) -> Forest:
    """Bagged CART trees; the set is first subsampled to ``cfg.max_samples`` rows."""
    if len(data) < 2:
        raise ValueError("need at least 2 training rows")
    rng = np.random.default_rng(0) if rng is None else rng
    X, y = data.X, data.y
    if len(y) > cfg.max_samples:
        keep = np.sort(rng.choice(len(y), cfg.max_samples, replace=False))
        X, y = X[keep], y[keep]
    trees = []
    for tree_rng in rng.spawn(cfg.n_trees):
        boot = tree_rng.integers(0, len(y), len(y))
        trees.append(
            RegressionTree.fit(
                X[boot], y[boot], cfg.max_depth, cfg.min_samples_split, cfg.feature_subsample, tree_rng
            )
        )
    return Forest(trees, X.shape[1])


def predict(forest: Forest, features):
    return forest.predict(features)


def extract_features(t: Tour, dm) -> np.ndarray:
    """Consecutive edge lengths in tour order, closing edge last."""
    d = np.asarray(getattr(dm, "d", dm), dtype=float)
    n = len(d)
    if not t.closed or sorted(t.order) != list(range(n)):
        raise ValueError("features need a closed tour over every city")
    o = np.asarray(t.order)
    return d[o, np.roll(o, -1)]


def random_tours(n: int, count: int, start: int, rng) -> list[Tour]:
    rest = np.array([i for i in range(n) if i != start])
    return [Tour((start, *rng.permutation(rest).tolist())) for _ in range(count)]


def build_training_set(dm, tours: Sequence[Tour], max_rows: int = 10_000) -> TrainingSet:
    """Edge features labelled with true tour cost, capped at ``max_rows``."""
    tours = list(tours)[:max_rows]
    X = np.stack([extract_features(t, dm) for t in tours])
    y = np.array([tour_cost(t, dm) for t in tours])
    return TrainingSet(X, y)


Predictor = Callable[[np.ndarray], np.ndarray]


def ml_refine(t: Tour, predictor: Predictor, dm, max_rounds: int = 3) -> Tour:
    """Apply up to ``max_rounds`` predicted-best 2-opt swaps.

    ``predictor`` maps a 2-D batch of feature rows to predicted costs. Each
    round scores every swap and accepts the lowest prediction only if it is
    strictly below the current tour's prediction.
    """
    if max_rounds < 0:
        raise ValueError("max_rounds must be >= 0")
    moves = two_opt_moves(len(t.order))
    current = t
    for _ in range(max_rounds):
        if not moves:
            break
        cands = [two_opt_swap(current, i, j) for i, j in moves]
        feats = np.stack([extract_features(c, dm) for c in [current] + cands])
        pred = np.asarray(predictor(feats), dtype=float)
        k = int(np.argmin(pred[1:]))
        if not pred[1 + k] < pred[0]:
            break
        current = cands[k]
    return current
