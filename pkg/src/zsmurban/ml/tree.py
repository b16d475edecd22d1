"""CART trees used by both the forest and the boosting stages.

Nodes are stored in flat parallel arrays so batch prediction is a simple
vectorized index walk and serialization is plain JSON. Split search is
deterministic: candidate thresholds are midpoints between consecutive sorted
feature values, equal-gain ties resolve to the lowest feature index and then
the lowest threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["DecisionTree", "grow_classification_tree", "grow_regression_tree"]

_LEAF = -1


@dataclass
class DecisionTree:
    """Flat binary tree. ``feature[i] == -1`` marks a leaf; ``value`` holds
    class counts (classification) or a fitted scalar (regression).
    """

    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    value: list[list[float]] = field(default_factory=list)

    def _add_node(self) -> int:
        self.feature.append(_LEAF)
        self.threshold.append(0.0)
        self.left.append(_LEAF)
        self.right.append(_LEAF)
        self.value.append([0.0])
        return len(self.feature) - 1

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def depth_of(self, node: int = 0) -> int:
        if self.feature[node] == _LEAF:
            return 0
        return 1 + max(self.depth_of(self.left[node]), self.depth_of(self.right[node]))

    def predict_value(self, x: np.ndarray) -> list[float]:
        node = 0
        while self.feature[node] != _LEAF:
            node = self.left[node] if x[self.feature[node]] <= self.threshold[node] else self.right[node]
        return self.value[node]

    def leaf_indices(self, x: np.ndarray) -> np.ndarray:
        """Vectorized leaf lookup for an (n, d) matrix."""
        n = len(x)
        feature = np.asarray(self.feature)
        threshold = np.asarray(self.threshold)
        left = np.asarray(self.left)
        right = np.asarray(self.right)
        node = np.zeros(n, dtype=int)
        active = feature[node] != _LEAF
        while active.any():
            idx = np.nonzero(active)[0]
            cur = node[idx]
            go_left = x[idx, feature[cur]] <= threshold[cur]
            node[idx] = np.where(go_left, left[cur], right[cur])
            active = feature[node] != _LEAF
        return node

    def to_dict(self) -> dict:
        return {
            "feature": list(self.feature),
            "threshold": [float(t) for t in self.threshold],
            "left": list(self.left),
            "right": list(self.right),
            "value": [[float(v) for v in vals] for vals in self.value],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DecisionTree":
        return cls(
            feature=[int(v) for v in data["feature"]],
            threshold=[float(v) for v in data["threshold"]],
            left=[int(v) for v in data["left"]],
            right=[int(v) for v in data["right"]],
            value=[[float(v) for v in vals] for vals in data["value"]],
        )


def _best_split_gini(x, w_pos, w_neg, idx, features, min_leaf):
    """(weighted_child_impurity, feature, threshold) or None.

    Impurity is the count-weighted Gini sum over both children (parent size
    factored out). Features must arrive in ascending order for the tie rule.
    """
    best = None
    n = idx.size
    for f in features:
        vals = x[idx, f]
        order = np.argsort(vals, kind="stable")
        xs = vals[order]
        wp = np.cumsum(w_pos[idx][order])
        wn = np.cumsum(w_neg[idx][order])
        counts = np.arange(1, n)
        valid = xs[1:] > xs[:-1]
        if min_leaf > 1:
            valid &= (counts >= min_leaf) & (n - counts >= min_leaf)
        if not valid.any():
            continue
        lp, ln = wp[:-1], wn[:-1]
        rp, rn = wp[-1] - lp, wn[-1] - ln
        lt, rt = lp + ln, rp + rn
        with np.errstate(divide="ignore", invalid="ignore"):
            imp = np.where(lt > 0, 2.0 * lp * ln / lt, 0.0) + np.where(rt > 0, 2.0 * rp * rn / rt, 0.0)
        imp = np.where(valid, imp, np.inf)
        j = int(np.argmin(imp))  # first minimum -> lowest threshold
        if np.isfinite(imp[j]) and (best is None or imp[j] < best[0]):
            best = (float(imp[j]), int(f), 0.5 * (float(xs[j]) + float(xs[j + 1])))
    return best


def _best_split_sse(x, targets, idx, features, min_leaf):
    """Minimum residual sum of squares split for regression trees."""
    best = None
    n = idx.size
    for f in features:
        vals = x[idx, f]
        order = np.argsort(vals, kind="stable")
        xs = vals[order]
        sums = np.cumsum(targets[idx][order])
        counts = np.arange(1, n)
        valid = xs[1:] > xs[:-1]
        if min_leaf > 1:
            valid &= (counts >= min_leaf) & (n - counts >= min_leaf)
        if not valid.any():
            continue
        left = sums[:-1]
        right = sums[-1] - left
        score = left * left / counts + right * right / (n - counts)  # maximize
        score = np.where(valid, score, -np.inf)
        j = int(np.argmax(score))
        if np.isfinite(score[j]) and (best is None or score[j] > best[0]):
            best = (float(score[j]), int(f), 0.5 * (float(xs[j]) + float(xs[j + 1])))
    return best


def grow_classification_tree(x, y, *, max_depth, min_samples_leaf=1,
                             sample_weight=None, max_features=None, rng=None) -> DecisionTree:
    """Gini CART on 0/1 labels. ``max_features`` draws a random feature
    subset per split (requires ``rng``); leaves store weighted class counts.
    """
    n, d = x.shape
    w = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    w_pos = w * (y == 1)
    w_neg = w * (y == 0)
    tree = DecisionTree()

    def build(idx: np.ndarray, depth: int) -> int:
        node = tree._add_node()
        pos = float(w_pos[idx].sum())
        neg = float(w_neg[idx].sum())
        tree.value[node] = [neg, pos]
        if depth >= max_depth or idx.size < 2 * min_samples_leaf or pos == 0.0 or neg == 0.0:
            return node
        if max_features is not None and max_features < d:
            features = np.sort(rng.choice(d, size=max_features, replace=False))
        else:
            features = np.arange(d)
        total = pos + neg
        parent_imp = 2.0 * pos * neg / total
        split = _best_split_gini(x, w_pos, w_neg, idx, features, min_samples_leaf)
        if split is None or split[0] >= parent_imp - 1e-12:
            return node
        _, f, thr = split
        mask = x[idx, f] <= thr
        left = build(idx[mask], depth + 1)
        right = build(idx[~mask], depth + 1)
        tree.feature[node] = f
        tree.threshold[node] = thr
        tree.left[node] = left
        tree.right[node] = right
        return node

    build(np.arange(n), 0)
    return tree


def grow_regression_tree(x, grad, hess, *, max_depth, min_samples_leaf=1) -> DecisionTree:
    """Regression tree on gradient targets with Newton leaf values.

    Splits minimize the SSE of ``grad``; each leaf stores
    ``sum(grad) / sum(hess)`` (damped by the caller's learning rate).
    """
    n, _ = x.shape
    tree = DecisionTree()

    def build(idx: np.ndarray, depth: int) -> int:
        node = tree._add_node()
        g = float(grad[idx].sum())
        h = float(hess[idx].sum())
        leaf_value = g / max(h, 1e-12)
        tree.value[node] = [float(np.clip(leaf_value, -4.0, 4.0))]
        if depth >= max_depth or idx.size < 2 * min_samples_leaf:
            return node
        split = _best_split_sse(x, grad, idx, np.arange(x.shape[1]), min_samples_leaf)
        if split is None:
            return node
        sums = grad[idx].sum()
        base = sums * sums / idx.size
        if split[0] <= base + 1e-12:
            return node
        _, f, thr = split
        mask = x[idx, f] <= thr
        left = build(idx[mask], depth + 1)
        right = build(idx[~mask], depth + 1)
        tree.feature[node] = f
        tree.threshold[node] = thr
        tree.left[node] = left
        tree.right[node] = right
        return node

    build(np.arange(n), 0)
    return tree
