"""CART decision trees (Gini) and a bagged random forest."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp

from .._seeding import derive_seed
from ._base import TrainedModel, as_matrix, check_training_data


@dataclass
class ForestConfig:
    """``features_per_split=None`` means ``sqrt(n_features)`` candidates per split."""

    n_trees: int = 20
    max_depth: int | None = None
    features_per_split: float | None = None
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be at least 1")
        if self.features_per_split is not None and not 0 < self.features_per_split <= 1:
            raise ValueError("features_per_split must be a fraction in (0, 1]")

    def to_dict(self):
        return asdict(self)

    def n_candidates(self, d):
        if self.features_per_split is None:
            return max(1, int(np.sqrt(d)))
        return max(1, int(round(self.features_per_split * d)))


class DecisionTree:
    """Array-encoded binary tree; ``feature == -1`` marks a leaf."""

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=float)

    @property
    def n_nodes(self):
        return len(self.feature)

    def apply(self, X):
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                return node
            r = rows[active]
            n = node[active]
            go_left = X[r, feat[active]] <= self.threshold[n]
            node[active] = np.where(go_left, self.left[n], self.right[n])

    def predict_proba(self, X):
        return self.value[self.apply(X)]

    def to_dict(self):
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(), "value": self.value.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["feature"], d["threshold"], d["left"], d["right"], d["value"])


def _best_split(Xn, yoh):
    """Best Gini split over the columns of ``Xn``.

    Returns ``(column, threshold)`` or ``None`` when no column has two
    distinct values. Ties go to the earliest column, then the lowest
    threshold.
    """
    n = Xn.shape[0]
    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    counts = np.cumsum(yoh[order], axis=0)  # (n, m, K)
    left = counts[:-1]
    right = counts[-1][None, :, :] - left
    nl = np.arange(1, n, dtype=float)[:, None]
    # maximizing sum(left^2)/nl + sum(right^2)/nr minimizes weighted Gini
    score = (left ** 2).sum(axis=2) / nl + (right ** 2).sum(axis=2) / (n - nl)
    valid = xs[1:] > xs[:-1]
    if not valid.any():
        return None
    score = np.where(valid, score, -np.inf)
    flat = np.argmax(score.T)
    col, pos = divmod(int(flat), n - 1)
    lo, hi = xs[pos, col], xs[pos + 1, col]
    thr = (lo + hi) / 2.0
    if thr >= hi:
        thr = lo
    return col, thr


def build_tree(X, y_idx, n_classes, rng, n_candidates, max_depth=None) -> DecisionTree:
    """Grow a CART tree until leaves are pure (or ``max_depth`` is reached)."""
    yoh = np.eye(n_classes)[y_idx]
    d = X.shape[1]
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        c = yoh[idx].sum(axis=0)
        value.append(c / c.sum())
        return len(feature) - 1

    stack = [(new_node(np.arange(len(y_idx))), np.arange(len(y_idx)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        if np.count_nonzero(value[node]) <= 1 or len(idx) < 2:
            continue
        if max_depth is not None and depth >= max_depth:
            continue
        perm = rng.permutation(d)
        Xnode = X[idx]
        split = None
        # draw candidate features until enough non-constant ones have been seen
        start = 0
        chosen = []
        while start < d and len(chosen) < n_candidates:
            block = perm[start:start + n_candidates]
            start += len(block)
            sub = Xnode[:, block]
            varying = block[sub.max(axis=0) > sub.min(axis=0)]
            chosen.extend(varying[:n_candidates - len(chosen)].tolist())
        if chosen:
            split = _best_split(Xnode[:, chosen], yoh[idx])
        if split is None:
            continue
        col, thr = split
        f = chosen[col]
        mask = Xnode[:, f] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[node] = f
        threshold[node] = thr
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))
    return DecisionTree(feature, threshold, left, right, np.array(value))


class RandomForest(TrainedModel):
    kind = "forest"

    def __init__(self, labels, n_features, trees, config, preprocessing=""):
        super().__init__(labels, n_features, config, preprocessing)
        self.trees = trees

    def _proba(self, X):
        X = X.toarray() if sp.issparse(X) else X
        return np.mean([t.predict_proba(X) for t in self.trees], axis=0)

    def tree_probas(self, X):
        X = as_matrix(X)
        X = X.toarray() if sp.issparse(X) else X
        return [t.predict_proba(X) for t in self.trees]

    def _params_dict(self):
        return {"trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def _from_dict(cls, d):
        return cls(d["labels"], d["n_features"],
                   [DecisionTree.from_dict(t) for t in d["params"]["trees"]],
                   ForestConfig(**d["config"]), d["preprocessing"])


def canonical_order(X, y_idx):
    """Row permutation sorting rows by their bytes, then by label."""
    X = np.ascontiguousarray(X, dtype=float)
    X = X + 0.0  # fold -0.0 into 0.0 so equal rows have equal bytes
    rows = X.view(np.dtype((np.void, X.dtype.itemsize * X.shape[1]))).ravel()
    _, rank = np.unique(rows, return_inverse=True)
    return np.lexsort((y_idx, rank.ravel()))


def train_forest(X, y, config: ForestConfig | None = None, preprocessing="") -> RandomForest:
    """Bagged CART trees; predictions average the trees' leaf class distributions.

    Rows are first put in a canonical order (by content, then label) and
    tree ``t`` draws its bootstrap positions and split candidates from a
    generator seeded by ``(config.seed, t)``. The forest is therefore a
    deterministic function of the training multiset and the seed: shuffling
    the training rows does not change it.
    """
    config = config or ForestConfig()
    X = as_matrix(X)
    X = X.toarray() if sp.issparse(X) else X
    labels, y_idx = check_training_data(X, y)
    order = canonical_order(X, y_idx)
    X, y_idx = X[order], y_idx[order]
    n, d = X.shape
    k = config.n_candidates(d)
    trees = []
    for t in range(config.n_trees):
        rng = np.random.default_rng(derive_seed(config.seed, "tree", t))
        idx = rng.integers(0, n, n) if config.bootstrap else np.arange(n)
        trees.append(build_tree(X[idx], y_idx[idx], len(labels), rng, k, config.max_depth))
    return RandomForest(labels, d, trees, config, preprocessing)
