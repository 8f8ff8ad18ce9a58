"""Random forest of Gini-impurity decision trees over count features."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .config import ForestConfig
from .sgd import as_xy

LEAF = -1


@dataclass
class Tree:
    """Array-encoded binary tree; rows with ``x[feature] <= threshold`` go left."""
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # fraction of positive training samples reaching the node

    def predict(self, X: sp.csr_matrix) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        active = self.feature[node] != LEAF
        while active.any():
            r, nd = rows[active], node[active]
            vals = np.asarray(X[r, self.feature[nd]]).ravel()
            node[active] = np.where(vals <= self.threshold[nd], self.left[nd], self.right[nd])
            active = self.feature[node] != LEAF
        return self.value[node]


@dataclass
class Forest:
    trees: list[Tree]
    config: ForestConfig = field(default_factory=ForestConfig)
    n_features: int = 0
    family = "rf"
    representation = "bow"

    def predict_proba(self, X) -> np.ndarray:
        X = sp.csr_matrix(X)
        out = np.zeros(X.shape[0])
        for t in self.trees:
            out += t.predict(X)
        return out / len(self.trees)


def _best_split(block: np.ndarray, y: np.ndarray):
    """Lowest weighted Gini split over the columns of ``block``.

    Returns (column, threshold) or None when every column is constant.
    """
    m = block.shape[0]
    order = np.argsort(block, axis=0, kind="stable")
    xs = np.take_along_axis(block, order, axis=0)
    cum_pos = np.cumsum(y[order], axis=0)[:-1]
    valid = xs[:-1] < xs[1:]
    if not valid.any():
        return None
    n_left = np.arange(1, m, dtype=np.float64)[:, None]
    n_right = m - n_left
    p_left = cum_pos
    p_right = y.sum() - p_left
    impurity = (p_left * (n_left - p_left) / n_left + p_right * (n_right - p_right) / n_right)
    impurity = np.where(valid, impurity, np.inf)
    flat = int(np.argmin(impurity.T))  # feature-major: earlier sampled feature wins ties
    col, pos = divmod(flat, m - 1)
    return col, 0.5 * (xs[pos, col] + xs[pos + 1, col])


def build_tree(X: sp.csr_matrix, y: np.ndarray, cfg: ForestConfig, rng: np.random.Generator,
               sample: np.ndarray | None = None) -> Tree:
    n_features = X.shape[1]
    k = cfg.max_features or max(1, int(np.sqrt(n_features)))
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(float(y[idx].mean()))
        return len(feature) - 1

    idx0 = np.arange(X.shape[0]) if sample is None else sample
    stack = [(new_node(idx0), idx0, 0)]
    while stack:
        node, idx, depth = stack.pop()
        pos = y[idx].sum()
        if (pos == 0 or pos == len(idx) or len(idx) < cfg.min_samples_split
                or (cfg.max_depth is not None and depth >= cfg.max_depth)):
            continue
        rows = X[idx]
        yi = y[idx].astype(np.float64)
        perm = rng.permutation(n_features)
        split = None
        for start in range(0, n_features, k):
            feats = perm[start:start + k]
            found = _best_split(rows[:, feats].toarray(), yi)
            if found is not None:
                split = (int(feats[found[0]]), float(found[1]))
                break
        if split is None:
            continue
        f, thr = split
        col = rows[:, f].toarray().ravel()
        go_left = col <= thr
        li, ri = idx[go_left], idx[~go_left]
        feature[node], threshold[node] = f, thr
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))
    return Tree(np.array(feature, dtype=np.int64), np.array(threshold), np.array(left, dtype=np.int64),
                np.array(right, dtype=np.int64), np.array(value))


def train_random_forest(train, cfg: ForestConfig, y=None) -> Forest:
    """Bagged trees; each tree gets its own seed stream derived from ``cfg.seed``."""
    X, y = as_xy(train, y)
    X = sp.csr_matrix(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[0] == 0:
        raise ValueError("empty training set")
    trees = []
    for child in np.random.SeedSequence(cfg.seed).spawn(cfg.n_trees):
        rng = np.random.default_rng(child)
        sample = rng.integers(0, X.shape[0], X.shape[0]) if cfg.bootstrap else None
        trees.append(build_tree(X, y, cfg, rng, sample))
    return Forest(trees, cfg, X.shape[1])
