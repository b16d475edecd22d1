"""Random forest: bagged Gini trees with per-split feature subsampling,
class probability = fraction of trees voting NLOS.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tree import DecisionTree, grow_classification_tree

__all__ = ["RfConfig", "RandomForestModel", "train_rf_arrays"]


@dataclass(frozen=True)
class RfConfig:
    tree_count: int = 100
    max_depth: int = 8
    min_samples_leaf: int = 1
    max_features: int | None = None  # None -> max(1, floor(sqrt(d)))
    balanced: bool = False
    seed: int = 0


@dataclass
class RandomForestModel:
    trees: list[DecisionTree]
    feature_subsample_count: int
    seed: int

    def vote_fractions(self, x: np.ndarray) -> np.ndarray:
        """Fraction of trees voting NLOS for each row of ``x``."""
        votes = np.zeros(len(x))
        for tree in self.trees:
            leaves = tree.leaf_indices(x)
            values = np.asarray(tree.value)[leaves]
            votes += (values[:, 1] > values[:, 0]).astype(float)  # ties -> LOS
        return votes / len(self.trees)

    def to_dict(self) -> dict:
        return {
            "trees": [t.to_dict() for t in self.trees],
            "feature_subsample_count": self.feature_subsample_count,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RandomForestModel":
        return cls(
            trees=[DecisionTree.from_dict(t) for t in data["trees"]],
            feature_subsample_count=int(data["feature_subsample_count"]),
            seed=int(data["seed"]),
        )


def _class_weights(y: np.ndarray, balanced: bool) -> np.ndarray:
    if not balanced:
        return np.ones(len(y))
    n = len(y)
    pos = int(y.sum())
    neg = n - pos
    w = np.where(y == 1, n / (2.0 * max(pos, 1)), n / (2.0 * max(neg, 1)))
    return w


def train_rf_arrays(x: np.ndarray, y: np.ndarray, cfg: RfConfig) -> RandomForestModel:
    n, d = x.shape
    k = cfg.max_features if cfg.max_features is not None else max(1, int(math.isqrt(d)))
    rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed), 0xF0]))
    weights = _class_weights(y, cfg.balanced)
    trees = []
    for _ in range(cfg.tree_count):
        boot = rng.integers(0, n, size=n)
        trees.append(grow_classification_tree(
            x[boot], y[boot],
            max_depth=cfg.max_depth,
            min_samples_leaf=cfg.min_samples_leaf,
            sample_weight=weights[boot],
            max_features=k,
            rng=rng,
        ))
    return RandomForestModel(trees=trees, feature_subsample_count=k, seed=cfg.seed)
