"""Bagged CART classifier with Gini splits, refit from scratch on every slice."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import FeatureMatrix, InvalidInputError

# Weighted-impurity decreases below this are treated as no improvement.
_GAIN_EPS = 1e-12


@dataclass(frozen=True)
class RFParams:
    n_trees: int = 50
    min_samples_leaf: int = 2
    mtry: Optional[int] = None  # None -> max(1, floor(sqrt(d)))
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise InvalidInputError("n_trees must be >= 1")
        if self.min_samples_leaf < 1:
            raise InvalidInputError("min_samples_leaf must be >= 1")
        if self.mtry is not None and self.mtry < 1:
            raise InvalidInputError("mtry must be >= 1")

    def resolve_mtry(self, d: int) -> int:
        m = max(1, math.isqrt(d)) if self.mtry is None else self.mtry
        if m > d:
            raise InvalidInputError(f"mtry={m} exceeds feature dimension {d}")
        return m


@dataclass
class DecisionTree:
    """A fitted tree stored as parallel node arrays.

    ``feature[i] == -1`` marks a leaf. ``counts[i]`` holds the (Bg, LV)
    training weight reaching node ``i``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def leaf_index(self, X: np.ndarray) -> np.ndarray:
        idx = np.zeros(len(X), dtype=np.int64)
        active = np.flatnonzero(self.feature[idx] >= 0)
        while active.size:
            node = idx[active]
            f = self.feature[node]
            go_left = X[active, f] <= self.threshold[node]
            idx[active] = np.where(go_left, self.left[node], self.right[node])
            active = active[self.feature[idx[active]] >= 0]
        return idx

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        c = self.counts[self.leaf_index(X)]
        total = c.sum(axis=1, keepdims=True)
        return c / total


def _best_split(x, w, y1, n, c1, min_leaf):
    """Best Gini threshold on one feature; returns (child_impurity, threshold) or None."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    left_n = np.cumsum(w[order])[:-1]
    left_1 = np.cumsum(y1[order])[:-1]
    valid = (xs[1:] > xs[:-1]) & (left_n >= min_leaf) & (n - left_n >= min_leaf)
    if not valid.any():
        return None
    pos = np.flatnonzero(valid)
    ln = left_n[pos]
    l1 = left_1[pos]
    rn = n - ln
    r1 = c1 - l1
    l0 = ln - l1
    r0 = rn - r1
    impurity = (ln - (l1 * l1 + l0 * l0) / ln) + (rn - (r1 * r1 + r0 * r0) / rn)
    k = int(np.argmin(impurity))
    i = pos[k]
    return float(impurity[k]), (xs[i] + xs[i + 1]) / 2.0


def _grow_tree(X, y, weights, min_leaf, mtry, rng) -> DecisionTree:
    d = X.shape[1]
    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node(rows):
        w = weights[rows]
        n = w.sum()
        c1 = (w * y[rows]).sum()
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append((n - c1, c1))
        return len(feature) - 1

    stack = [(new_node(np.arange(len(X))), np.arange(len(X)))]
    while stack:
        node, rows = stack.pop()
        n0, n1 = counts[node]
        n = n0 + n1
        if n0 == 0 or n1 == 0 or n < 2 * min_leaf:
            continue
        parent_impurity = n - (n0 * n0 + n1 * n1) / n
        w = weights[rows]
        wy = w * y[rows]
        best = None
        # Features beyond the first mtry are only tried while no valid split exists.
        for tried, f in enumerate(rng.permutation(d)):
            if tried >= mtry and best is not None:
                break
            cand = _best_split(X[rows, f], w, wy, n, n1, min_leaf)
            if cand is None or parent_impurity - cand[0] <= _GAIN_EPS * n:
                continue
            key = (cand[0], int(f), cand[1])
            if best is None or key < best:
                best = key
        if best is None:
            continue
        _, f, thr = best
        go_left = X[rows, f] <= thr
        lrows, rrows = rows[go_left], rows[~go_left]
        feature[node] = f
        threshold[node] = thr
        left[node] = new_node(lrows)
        right[node] = new_node(rrows)
        stack.append((right[node], rrows))
        stack.append((left[node], lrows))

    return DecisionTree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        counts=np.array(counts, dtype=np.float64),
    )


@dataclass
class RandomForestModel:
    params: RFParams
    n_features: int
    trees: list[DecisionTree] = field(default_factory=list)

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise InvalidInputError(
                f"expected {self.n_features} features, got array of shape {X.shape}"
            )
        return X

    def tree_proba(self, X) -> np.ndarray:
        """P(LV) per tree, shape ``(n_trees, n_rows)``."""
        X = self._check(X)
        return np.stack([t.predict_proba(X)[:, 1] for t in self.trees])

    def predict_proba(self, X) -> np.ndarray:
        """Columns ``(P(Bg), P(LV))``."""
        X = self._check(X)
        proba = np.zeros((len(X), 2))
        for t in self.trees:
            proba += t.predict_proba(X)
        return proba / len(self.trees)


def _check_training_data(data: FeatureMatrix):
    if len(data) == 0:
        raise InvalidInputError("cannot fit on empty data")
    if data.labels is None:
        raise InvalidInputError("training rows must be labeled")


def rf_fit(data: FeatureMatrix, params: RFParams = RFParams()) -> RandomForestModel:
    _check_training_data(data)
    X = data.values
    y = data.labels.astype(np.float64)
    n, d = X.shape
    mtry = params.resolve_mtry(d)
    model = RandomForestModel(params=params, n_features=d)
    for t in range(params.n_trees):
        rng = np.random.default_rng([params.seed, t])
        if params.bootstrap:
            weights = np.bincount(rng.integers(0, n, n), minlength=n).astype(np.float64)
        else:
            weights = np.ones(n)
        rows = np.flatnonzero(weights)
        tree = _grow_tree(X[rows], y[rows], weights[rows], params.min_samples_leaf, mtry, rng)
        model.trees.append(tree)
    return model


def rf_predict_proba(model: RandomForestModel, features) -> np.ndarray:
    """P(LV) per row: mean over trees of the leaf LV frequency."""
    X = features.values if isinstance(features, FeatureMatrix) else features
    return model.predict_proba(X)[:, 1]
