"""Regression trees and a bootstrap forest built on numpy."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int = 10
    min_split: int = 2
    min_leaf: int = 2
    max_features: int | None = None  # None -> ceil(sqrt(n_features))

    def features_per_split(self, n_features: int) -> int:
        if self.max_features is None:
            return math.ceil(math.sqrt(n_features))
        return min(self.max_features, n_features)


@dataclass
class RegressionTree:
    """Binary tree stored as parallel arrays; ``feature == -1`` marks a leaf.

    Rows with ``x[feature] <= threshold`` go to ``left``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    depth: int = 0

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        for _ in range(self.depth):
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                break
            r, n_, f_ = rows[inner], node[inner], f[inner]
            go_left = X[r, f_] <= self.threshold[n_]
            node[inner] = np.where(go_left, self.left[n_], self.right[n_])
        return self.value[node]

    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.feature < 0)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "n_samples": self.n_samples.tolist(),
            "depth": self.depth,
        }

    @classmethod
    def from_dict(cls, d) -> "RegressionTree":
        return cls(
            np.array(d["feature"], dtype=np.int64),
            np.array(d["threshold"], dtype=np.float64),
            np.array(d["left"], dtype=np.int64),
            np.array(d["right"], dtype=np.int64),
            np.array(d["value"], dtype=np.float64),
            np.array(d["n_samples"], dtype=np.int64),
            int(d["depth"]),
        )


def _best_split(x, y, min_leaf):
    """Best variance-reduction split of one feature.

    Returns ``(sse, threshold)`` or ``None`` when no admissible split exists.
    """
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    n = len(ys)
    csum = np.cumsum(ys)
    csq = np.cumsum(ys * ys)
    i = np.arange(min_leaf, n - min_leaf + 1)  # size of the left part
    if len(i) == 0:
        return None
    i = i[xs[i - 1] < xs[i]]
    if len(i) == 0:
        return None
    left_sum, left_sq = csum[i - 1], csq[i - 1]
    right_sum, right_sq = csum[-1] - left_sum, csq[-1] - left_sq
    sse = (left_sq - left_sum**2 / i) + (right_sq - right_sum**2 / (n - i))
    k = int(np.argmin(sse))
    lo, hi = xs[i[k] - 1], xs[i[k]]
    threshold = lo + (hi - lo) / 2.0
    if not lo <= threshold < hi:
        threshold = lo
    return float(sse[k]), float(threshold)


def fit_tree(X, y, params: ForestParams, rng: np.random.Generator) -> RegressionTree:
    n_features = X.shape[1]
    per_split = params.features_per_split(n_features)
    feature, threshold, left, right, value, n_samples = [], [], [], [], [], []

    def add(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(y[idx].mean()))
        n_samples.append(len(idx))
        return len(feature) - 1

    root = add(np.arange(len(y)))
    stack = [(root, np.arange(len(y)), 0)]
    max_depth = 0
    while stack:
        node, idx, depth = stack.pop()
        max_depth = max(max_depth, depth)
        if depth >= params.max_depth or len(idx) < params.min_split or len(idx) < 2 * params.min_leaf:
            continue
        yy = y[idx] - value[node]
        parent_sse = float(yy @ yy)
        if parent_sse <= 0.0:
            continue
        candidates = rng.permutation(n_features)
        best = None
        # draw features in order; keep going past the quota only while nothing splits
        for rank, f in enumerate(candidates):
            if rank >= per_split and best is not None:
                break
            found = _best_split(X[idx, f], yy, params.min_leaf)
            if found is not None and (best is None or found[0] < best[0]):
                best = (found[0], found[1], int(f))
        if best is None or best[0] >= parent_sse:
            continue
        _, thr, f = best
        go_left = X[idx, f] <= thr
        li, ri = idx[go_left], idx[~go_left]
        feature[node], threshold[node] = f, thr
        l_node = add(li)
        r_node = add(ri)
        left[node], right[node] = l_node, r_node
        stack.append((r_node, ri, depth + 1))
        stack.append((l_node, li, depth + 1))

    return RegressionTree(
        np.array(feature, dtype=np.int64),
        np.array(threshold),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value),
        np.array(n_samples, dtype=np.int64),
        max_depth,
    )


@dataclass
class Forest:
    trees: list
    params: ForestParams
    seed: int
    meta: dict = field(default_factory=dict)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        total = np.zeros(len(X))
        for tree in self.trees:
            total += tree.predict(X)
        return total / len(self.trees)


def fit_forest(X, y, params: ForestParams = ForestParams(), seed: int = 0) -> Forest:
    """Bootstrap-aggregated regression trees, one child seed per tree."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(y) < 2 * params.min_split:
        raise ValueError(f"need at least {2 * params.min_split} rows, got {len(y)}")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValueError("training data must be finite")
    trees = []
    for child in np.random.SeedSequence(seed).spawn(params.n_trees):
        rng = np.random.default_rng(child)
        sample = rng.integers(0, len(y), size=len(y))
        trees.append(fit_tree(X[sample], y[sample], params, rng))
    return Forest(trees, params, seed)
