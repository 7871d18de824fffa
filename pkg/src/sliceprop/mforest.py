"""Mondrian forest classifier.

Trees are grown by sampling Mondrian blocks over the bounding box of the data
reaching each node, can be extended online one labeled point at a time, and
predict with the hierarchical posterior that mixes node posteriors by the
probability that a query would have branched off before reaching each node.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import FeatureMatrix, InvalidInputError


@dataclass(frozen=True)
class MFParams:
    n_trees: int = 50
    lifetime: float = math.inf
    min_samples_leaf: int = 2
    smoothing_alpha: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise InvalidInputError("n_trees must be >= 1")
        if not self.lifetime > 0:
            raise InvalidInputError("lifetime must be positive")
        if not self.smoothing_alpha > 0:
            raise InvalidInputError("smoothing_alpha must be positive")
        if self.min_samples_leaf < 1:
            raise InvalidInputError("min_samples_leaf must be >= 1")


class MondrianNode:
    __slots__ = ("tau", "lo", "hi", "split_dim", "split_loc", "counts", "left", "right", "rows")

    def __init__(self, tau, lo, hi, counts, rows=None):
        self.tau = tau
        self.lo = lo
        self.hi = hi
        self.counts = counts
        self.split_dim = -1
        self.split_loc = 0.0
        self.left: Optional[MondrianNode] = None
        self.right: Optional[MondrianNode] = None
        # Indices into the forest's data store; kept on leaves only.
        self.rows = rows

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def walk(self):
        """Pre-order traversal."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            if not node.is_leaf:
                stack.append(node.right)
                stack.append(node.left)


@dataclass
class FlatTree:
    """Array form of a Mondrian tree used for vectorized prediction."""

    tau: np.ndarray
    parent_tau: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    split_dim: np.ndarray
    split_loc: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray


def flatten(root: MondrianNode) -> FlatTree:
    nodes = list(root.walk())
    index = {id(n): i for i, n in enumerate(nodes)}
    parent_tau = np.zeros(len(nodes))
    for n in nodes:
        if not n.is_leaf:
            parent_tau[index[id(n.left)]] = n.tau
            parent_tau[index[id(n.right)]] = n.tau
    return FlatTree(
        tau=np.array([n.tau for n in nodes], dtype=np.float64),
        parent_tau=parent_tau,
        lo=np.array([n.lo for n in nodes], dtype=np.float64),
        hi=np.array([n.hi for n in nodes], dtype=np.float64),
        split_dim=np.array([n.split_dim for n in nodes], dtype=np.int64),
        split_loc=np.array([n.split_loc for n in nodes], dtype=np.float64),
        left=np.array([index[id(n.left)] if not n.is_leaf else -1 for n in nodes], dtype=np.int64),
        right=np.array([index[id(n.right)] if not n.is_leaf else -1 for n in nodes], dtype=np.int64),
        counts=np.array([n.counts for n in nodes], dtype=np.float64),
    )


def node_posteriors(flat: FlatTree, alpha: float) -> np.ndarray:
    """Smoothed class posteriors, shape ``(n_nodes, 2)``.

    Each node shrinks its empirical counts toward its parent's posterior with
    pseudo-count ``alpha``; the root shrinks toward the uniform distribution.
    Nodes are in pre-order, so parents precede children.
    """
    post = np.empty_like(flat.counts)
    post[0] = (flat.counts[0] + alpha * 0.5) / (flat.counts[0].sum() + alpha)
    for j in range(len(post)):
        if flat.left[j] >= 0:
            for c in (flat.left[j], flat.right[j]):
                post[c] = (flat.counts[c] + alpha * post[j]) / (flat.counts[c].sum() + alpha)
    return post


def branch_off_probability(delta_tau, eta) -> np.ndarray:
    """``1 - exp(-delta_tau * eta)``, taking ``inf * 0`` as no branching."""
    delta_tau = np.asarray(delta_tau, dtype=np.float64)
    eta = np.asarray(eta, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        p = -np.expm1(-delta_tau * eta)
    return np.where(eta > 0, p, 0.0)


def leaf_index(flat: FlatTree, X: np.ndarray) -> np.ndarray:
    """Leaf reached by each row when following the splits."""
    idx = np.zeros(len(X), dtype=np.int64)
    active = np.flatnonzero(flat.left[idx] >= 0)
    while active.size:
        node = idx[active]
        go_left = X[active, flat.split_dim[node]] <= flat.split_loc[node]
        idx[active] = np.where(go_left, flat.left[node], flat.right[node])
        active = active[flat.left[idx[active]] >= 0]
    return idx


def _branch_off_predict(flat: FlatTree, post: np.ndarray, X: np.ndarray) -> np.ndarray:
    n = len(X)
    out = np.zeros((n, 2))
    w = np.ones(n)
    idx = np.zeros(n, dtype=np.int64)
    active = np.arange(n)
    while active.size:
        node = idx[active]
        x = X[active]
        eta = (np.maximum(x - flat.hi[node], 0.0) + np.maximum(flat.lo[node] - x, 0.0)).sum(axis=1)
        p = branch_off_probability(flat.tau[node] - flat.parent_tau[node], eta)
        wa = w[active]
        out[active] += (wa * p)[:, None] * post[node]
        wa = wa * (1.0 - p)
        w[active] = wa
        leaf = flat.left[node] < 0
        out[active[leaf]] += wa[leaf, None] * post[node[leaf]]
        inner = ~leaf
        active, node, x = active[inner], node[inner], x[inner]
        go_left = x[np.arange(len(active)), flat.split_dim[node]] <= flat.split_loc[node]
        idx[active] = np.where(go_left, flat.left[node], flat.right[node])
    return out


def tree_predict(flat: FlatTree, post: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Per-class predictive probabilities of one tree, shape ``(n, 2)``."""
    # Boxes are nested, so a row inside its leaf's box never branches off and
    # gets the leaf posterior; only the others need the full recursion.
    leaf = leaf_index(flat, X)
    out = post[leaf]
    outside = np.flatnonzero(((X < flat.lo[leaf]) | (X > flat.hi[leaf])).any(axis=1))
    if outside.size:
        out[outside] = _branch_off_predict(flat, post, X[outside])
    return out


class MondrianTree:
    def __init__(self, root: MondrianNode, rng: np.random.Generator):
        self.root = root
        self.rng = rng
        self._flat: Optional[FlatTree] = None
        self._post: Optional[np.ndarray] = None

    def invalidate(self):
        self._flat = None
        self._post = None

    def flat(self) -> FlatTree:
        if self._flat is None:
            self._flat = flatten(self.root)
        return self._flat

    def predict(self, X: np.ndarray, alpha: float) -> np.ndarray:
        flat = self.flat()
        if self._post is None:
            self._post = node_posteriors(flat, alpha)
        return tree_predict(flat, self._post, X)

    @property
    def n_nodes(self) -> int:
        return len(self.flat().tau)


@dataclass
class MondrianForestModel:
    params: MFParams
    n_features: int
    data_X: np.ndarray
    data_y: np.ndarray
    trees: list[MondrianTree] = field(default_factory=list)

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise InvalidInputError(
                f"expected {self.n_features} features, got array of shape {X.shape}"
            )
        return X

    def tree_proba(self, X) -> np.ndarray:
        X = self._check(X)
        return np.stack([t.predict(X, self.params.smoothing_alpha)[:, 1] for t in self.trees])

    def predict_proba(self, X) -> np.ndarray:
        """Columns ``(P(Bg), P(LV))`` averaged over trees."""
        X = self._check(X)
        proba = np.zeros((len(X), 2))
        for t in self.trees:
            proba += t.predict(X, self.params.smoothing_alpha)
        return proba / len(self.trees)


class _Grower:
    """Mondrian block sampling and extension for one tree."""

    def __init__(self, model: MondrianForestModel, rng: np.random.Generator):
        self.X = model.data_X
        self.y = model.data_y
        self.lifetime = model.params.lifetime
        self.min_split = 2 * model.params.min_samples_leaf
        self.rng = rng

    def _leaf_or_split(self, node: MondrianNode, rows: np.ndarray, tau_parent: float) -> bool:
        c = node.counts
        if c[0] == 0 or c[1] == 0 or len(rows) < self.min_split:
            return False
        side = node.hi - node.lo
        rate = side.sum()
        if rate <= 0:
            return False
        tau = tau_parent + self.rng.exponential(1.0 / rate)
        if tau >= self.lifetime:
            return False
        d = int(np.searchsorted(np.cumsum(side), self.rng.uniform() * rate, side="right"))
        d = min(d, len(side) - 1)
        loc = self._uniform_inside(node.lo[d], node.hi[d])
        node.tau = tau
        node.split_dim = d
        node.split_loc = loc
        return True

    def _uniform_inside(self, a: float, b: float) -> float:
        while True:
            loc = float(self.rng.uniform(a, b))
            if a < loc < b:
                return loc

    def _make_node(self, rows: np.ndarray) -> MondrianNode:
        Xr = self.X[rows]
        counts = np.bincount(self.y[rows], minlength=2).astype(np.float64)
        return MondrianNode(self.lifetime, Xr.min(axis=0), Xr.max(axis=0), counts, rows)

    def grow(self, rows: np.ndarray, tau_parent: float) -> MondrianNode:
        root = self._make_node(rows)
        stack = [(root, tau_parent)]
        while stack:
            node, tp = stack.pop()
            if not self._leaf_or_split(node, node.rows, tp):
                continue
            rows = node.rows
            go_left = self.X[rows, node.split_dim] <= node.split_loc
            node.left = self._make_node(rows[go_left])
            node.right = self._make_node(rows[~go_left])
            node.rows = None
            stack.append((node.right, node.tau))
            stack.append((node.left, node.tau))
        return root

    def extend(self, node: MondrianNode, tau_parent: float, row: int) -> MondrianNode:
        """Absorb data row ``row`` below ``node``; returns the node now occupying its slot."""
        x = self.X[row]
        label = int(self.y[row])
        e_lo = np.maximum(node.lo - x, 0.0)
        e_hi = np.maximum(x - node.hi, 0.0)
        ext = e_lo + e_hi
        eta = ext.sum()
        if eta > 0:
            tau = tau_parent + self.rng.exponential(1.0 / eta)
            if tau < node.tau:
                d = int(np.searchsorted(np.cumsum(ext), self.rng.uniform() * eta, side="right"))
                d = min(d, len(ext) - 1)
                if x[d] > node.hi[d]:
                    loc = self._uniform_inside(node.hi[d], x[d])
                else:
                    loc = self._uniform_inside(x[d], node.lo[d])
                leaf = self._make_node(np.array([row], dtype=np.int64))
                parent = MondrianNode(
                    tau, np.minimum(node.lo, x), np.maximum(node.hi, x), node.counts + leaf.counts
                )
                parent.split_dim = d
                parent.split_loc = loc
                if x[d] <= loc:
                    parent.left, parent.right = leaf, node
                else:
                    parent.left, parent.right = node, leaf
                return parent
        node.lo = np.minimum(node.lo, x)
        node.hi = np.maximum(node.hi, x)
        node.counts = node.counts.copy()
        node.counts[label] += 1
        if node.is_leaf:
            node.rows = np.append(node.rows, row)
            if node.counts[0] > 0 and node.counts[1] > 0 and len(node.rows) >= self.min_split:
                return self.grow(node.rows, tau_parent)
            return node
        if x[node.split_dim] <= node.split_loc:
            node.left = self.extend(node.left, node.tau, row)
        else:
            node.right = self.extend(node.right, node.tau, row)
        return node


def _check_training_data(data: FeatureMatrix):
    if len(data) == 0:
        raise InvalidInputError("cannot fit on empty data")
    if data.labels is None:
        raise InvalidInputError("training rows must be labeled")


def mf_fit(data: FeatureMatrix, params: MFParams = MFParams()) -> MondrianForestModel:
    _check_training_data(data)
    model = MondrianForestModel(
        params=params,
        n_features=data.d,
        data_X=np.array(data.values),
        data_y=data.labels.astype(np.int64),
    )
    rows = np.arange(len(data), dtype=np.int64)
    for t in range(params.n_trees):
        rng = np.random.default_rng([params.seed, t])
        root = _Grower(model, rng).grow(rows, 0.0)
        model.trees.append(MondrianTree(root, rng))
    return model


def mf_extend(model: MondrianForestModel, data: FeatureMatrix) -> MondrianForestModel:
    """Extend every tree in place with the labeled rows of ``data``; returns ``model``."""
    _check_training_data(data)
    if data.d != model.n_features:
        raise InvalidInputError(f"expected {model.n_features} features, got {data.d}")
    start = len(model.data_X)
    model.data_X = np.concatenate([model.data_X, data.values])
    model.data_y = np.concatenate([model.data_y, data.labels.astype(np.int64)])
    new_rows = range(start, len(model.data_X))
    for tree in model.trees:
        grower = _Grower(model, tree.rng)
        for row in new_rows:
            tree.root = grower.extend(tree.root, 0.0, row)
        tree.invalidate()
    return model


def mf_predict_proba(model: MondrianForestModel, features) -> np.ndarray:
    """P(LV) per row."""
    X = features.values if isinstance(features, FeatureMatrix) else features
    return model.predict_proba(X)[:, 1]


def structural_audit(model: MondrianForestModel) -> list[str]:
    """Check every tree's invariants; returns a list of violation messages."""
    problems = []
    X, y = model.data_X, model.data_y
    for t, tree in enumerate(model.trees):
        # (node, parent tau, path) ; rows are gathered bottom-up
        def visit(node: MondrianNode, tau_parent: float, path: str) -> np.ndarray:
            where = f"tree {t} node {path or 'root'}"
            if not node.tau > tau_parent:
                problems.append(f"{where}: tau {node.tau} <= parent tau {tau_parent}")
            if node.is_leaf:
                rows = node.rows
                if rows is None:
                    problems.append(f"{where}: leaf without data")
                    return np.zeros(0, dtype=np.int64)
            else:
                d, loc = node.split_dim, node.split_loc
                if not node.lo[d] < loc < node.hi[d]:
                    problems.append(f"{where}: split {loc} outside ({node.lo[d]}, {node.hi[d]})")
                for child in (node.left, node.right):
                    if (child.lo < node.lo).any() or (child.hi > node.hi).any():
                        problems.append(f"{where}: child box not inside the node box")
                if not np.array_equal(node.counts, node.left.counts + node.right.counts):
                    problems.append(f"{where}: counts differ from children's sum")
                lrows = visit(node.left, node.tau, path + "L")
                rrows = visit(node.right, node.tau, path + "R")
                if (X[lrows, d] > loc).any() or (X[rrows, d] <= loc).any():
                    problems.append(f"{where}: rows on the wrong side of the split")
                rows = np.concatenate([lrows, rrows])
            Xr = X[rows]
            if len(rows) and ((Xr < node.lo).any() or (Xr > node.hi).any()):
                problems.append(f"{where}: data outside the node box")
            if not np.array_equal(np.bincount(y[rows], minlength=2), node.counts):
                problems.append(f"{where}: counts do not match the data below")
            return rows

        visit(tree.root, 0.0, "")
    return problems
