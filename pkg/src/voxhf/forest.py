"""Random forest classifier built on class-weighted CART trees, with
recursive feature elimination and KCCQ label binarization.

Determinism contract: every tree draws from its own RNG stream derived from
(seed, tree index), so a forest is byte-identical across runs and thread
counts. Split search scans midpoints of sorted unique values over a random
feature subset per node; routing is x <= threshold to the left child.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

KCCQ_BEST_THRESHOLD = 87.5
KCCQ_WORST_THRESHOLD = 65.6

LABEL_BEST = 0
LABEL_WORST = 1
LABEL_EXCLUDED = -1


class DegenerateModelError(ValueError):
    """Training labels contain a single class."""


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 300
    max_depth: int | None = None
    min_leaf: int = 2
    features_per_split: int | None = None  # None -> ceil(sqrt(p))
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1 or self.min_leaf < 1:
            raise ValueError("n_trees and min_leaf must be >= 1")


def binarize_labels(kccq: np.ndarray) -> np.ndarray:
    """KCCQ > 87.5 -> best (0, negative class); KCCQ <= 65.6 -> worst
    (1, positive class); otherwise excluded (-1)."""
    kccq = np.asarray(kccq, dtype=float)
    out = np.full(kccq.shape, LABEL_EXCLUDED, dtype=int)
    out[kccq > KCCQ_BEST_THRESHOLD] = LABEL_BEST
    out[kccq <= KCCQ_WORST_THRESHOLD] = LABEL_WORST
    return out


@dataclass
class Tree:
    feature: np.ndarray    # -1 at leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    probs: np.ndarray      # (n_nodes, 2), meaningful at leaves

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=int)
        while True:
            feat = self.feature[node]
            internal = feat >= 0
            if not internal.any():
                break
            rows = np.flatnonzero(internal)
            go_left = X[rows, feat[rows]] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]],
                                  self.right[node[rows]])
        return self.probs[node]


@dataclass
class Forest:
    trees: list[Tree]
    oob_indices: list[np.ndarray]
    feature_names: list[str]
    config: ForestConfig
    importances: np.ndarray

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[1] != self.n_features:
            raise ValueError(
                f"feature dimension {X.shape[1]} != {self.n_features}"
            )
        acc = np.zeros((len(X), 2))
        for tree in self.trees:
            acc += tree.predict_proba(X)
        return acc / len(self.trees)

    def predict_worst_probability(self, X: np.ndarray) -> np.ndarray:
        return self.predict_proba(X)[:, LABEL_WORST]

    def oob_accuracy(self, X: np.ndarray, y: np.ndarray) -> float:
        votes = np.zeros((len(X), 2))
        hit = np.zeros(len(X), dtype=bool)
        for tree, oob in zip(self.trees, self.oob_indices):
            if len(oob) == 0:
                continue
            votes[oob] += tree.predict_proba(X[oob])
            hit[oob] = True
        if not hit.any():
            return float("nan")
        pred = votes[hit].argmax(axis=1)
        return float(np.mean(pred == y[hit]))

    def to_json(self) -> str:
        payload = {
            "config": {
                "n_trees": self.config.n_trees,
                "max_depth": self.config.max_depth,
                "min_leaf": self.config.min_leaf,
                "features_per_split": self.config.features_per_split,
                "bootstrap": self.config.bootstrap,
                "seed": self.config.seed,
            },
            "feature_names": self.feature_names,
            "trees": [
                {
                    "feature": t.feature.tolist(),
                    "threshold": t.threshold.tolist(),
                    "left": t.left.tolist(),
                    "right": t.right.tolist(),
                    "probs": t.probs.tolist(),
                }
                for t in self.trees
            ],
        }
        return json.dumps(payload, sort_keys=True)


def _class_weights(y: np.ndarray) -> np.ndarray:
    counts = np.bincount(y, minlength=2).astype(float)
    weights = np.where(counts > 0, len(y) / (2.0 * np.maximum(counts, 1)), 0.0)
    return weights[y]


class _TreeBuilder:
    def __init__(self, X, y, w, mtry, min_leaf, max_depth, rng):
        self.X, self.y, self.w = X, y, w
        self.mtry, self.min_leaf, self.max_depth = mtry, min_leaf, max_depth
        self.rng = rng
        self.p = X.shape[1]
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.probs: list[tuple[float, float]] = []
        self.importance = np.zeros(self.p)

    def _new_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.probs.append((0.0, 0.0))
        return len(self.feature) - 1

    def build(self, idx: np.ndarray) -> int:
        node = self._new_node()
        w = self.w[idx]
        y = self.y[idx]
        w_pos = float(w[y == 1].sum())
        w_tot = float(w.sum())
        p1 = w_pos / w_tot if w_tot > 0 else 0.0
        self.probs[node] = (1.0 - p1, p1)

        depth_ok = self.max_depth is None or self._depth < self.max_depth
        if (
            len(idx) >= 2 * self.min_leaf
            and 0.0 < p1 < 1.0
            and depth_ok
        ):
            split = self._best_split(idx)
            if split is not None:
                feat, thr, gain, left_mask = split
                self.feature[node] = feat
                self.threshold[node] = thr
                self.importance[feat] += gain
                self._depth += 1
                self.left[node] = self.build(idx[left_mask])
                self.right[node] = self.build(idx[~left_mask])
                self._depth -= 1
        return node

    def fit(self, idx: np.ndarray) -> Tree:
        self._depth = 0
        self.build(idx)
        return Tree(
            feature=np.array(self.feature, dtype=int),
            threshold=np.array(self.threshold, dtype=float),
            left=np.array(self.left, dtype=int),
            right=np.array(self.right, dtype=int),
            probs=np.array(self.probs, dtype=float),
        )

    def _best_split(self, idx):
        n = len(idx)
        mtry = min(self.mtry, self.p)
        feats = np.sort(self.rng.choice(self.p, size=mtry, replace=False))
        Xn = self.X[idx][:, feats]
        wn = self.w[idx]
        wyn = wn * self.y[idx]

        order = Xn.argsort(axis=0, kind="stable")
        cols = np.arange(mtry)
        sv = Xn[order, cols]
        # weights are strictly positive, so every prefix/suffix sum is > 0
        cw = np.cumsum(wn[order], axis=0)
        cwy = np.cumsum(wyn[order], axis=0)
        w_tot = cw[-1]
        wy_tot = cwy[-1]

        lw, lwy = cw[:-1], cwy[:-1]
        rw, rwy = w_tot - lw, wy_tot - lwy
        cost = (
            lw - (lwy**2 + (lw - lwy) ** 2) / lw
            + rw - (rwy**2 + (rw - rwy) ** 2) / rw
        )
        counts = np.arange(1, n)[:, None]
        valid = (
            (sv[1:] > sv[:-1])
            & (counts >= self.min_leaf)
            & ((n - counts) >= self.min_leaf)
        )
        cost[~valid] = np.inf
        flat = int(cost.argmin())
        i, j = flat // mtry, flat % mtry
        if not np.isfinite(cost[i, j]):
            return None

        parent_g = float(
            w_tot[j] - (wy_tot[j] ** 2 + (w_tot[j] - wy_tot[j]) ** 2) / w_tot[j]
        )
        gain = parent_g - float(cost[i, j])
        thr = float((sv[i, j] + sv[i + 1, j]) / 2.0)
        feat = int(feats[j])
        left_mask = self.X[idx, feat] <= thr
        # numerical guard: a degenerate split keeps the node a leaf
        if left_mask.all() or not left_mask.any():
            return None
        return feat, thr, gain, left_mask


def fit_forest(
    X: np.ndarray,
    y: np.ndarray,
    cfg: ForestConfig,
    feature_names: list[str] | None = None,
) -> Forest:
    """CART trees on bootstrap samples with inverse-frequency class weights
    in both the Gini criterion and the leaf probabilities."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if np.isnan(X).any():
        raise ValueError("fit_forest requires imputed inputs (NaN found)")
    classes = np.unique(y)
    if len(classes) < 2:
        raise DegenerateModelError("training labels contain a single class")
    n, p = X.shape
    if feature_names is None:
        feature_names = [f"f{i}" for i in range(p)]
    mtry = cfg.features_per_split or int(np.ceil(np.sqrt(p)))
    weights = _class_weights(y)

    trees: list[Tree] = []
    oob_list: list[np.ndarray] = []
    importance = np.zeros(p)
    for t in range(cfg.n_trees):
        rng = np.random.default_rng(np.random.SeedSequence(
            entropy=(cfg.seed & 0xFFFFFFFFFFFFFFFF, t)
        ))
        if cfg.bootstrap:
            idx = np.sort(rng.integers(0, n, size=n))
            oob = np.setdiff1d(np.arange(n), np.unique(idx))
        else:
            idx = np.arange(n)
            oob = np.empty(0, dtype=int)
        builder = _TreeBuilder(X, y, weights, mtry, cfg.min_leaf,
                               cfg.max_depth, rng)
        trees.append(builder.fit(idx))
        oob_list.append(oob)
        total = builder.importance.sum()
        if total > 0:
            importance += builder.importance / total
    importance /= cfg.n_trees
    return Forest(trees, oob_list, list(feature_names), cfg, importance)


RFE_TARGET_SIZES = (10, 20, 30)
RFE_DROP_FRACTION = 0.20


def rfe(
    X: np.ndarray,
    y: np.ndarray,
    cfg: ForestConfig,
    feature_names: list[str],
    target_sizes=RFE_TARGET_SIZES,
    protected: set[str] | None = None,
) -> dict[int, list[str]]:
    """Recursive feature elimination by mean impurity-decrease importance,
    dropping the lowest 20% (at least one) of droppable features per round.
    Protected features (covariates) are never eliminated. Returns the
    surviving feature-name list at each target size; subsets are nested."""
    protected = protected or set()
    names = list(feature_names)
    smallest = min(target_sizes)
    elimination: list[str] = []
    current = list(range(len(names)))

    while len(current) > smallest:
        droppable = [i for i in current if names[i] not in protected]
        if not droppable:
            break
        sub_cfg = replace(cfg, features_per_split=None)
        forest = fit_forest(X[:, current], y, sub_cfg,
                            [names[i] for i in current])
        imp = {names[current[j]]: forest.importances[j]
               for j in range(len(current))}
        k = max(1, int(np.floor(RFE_DROP_FRACTION * len(droppable))))
        k = min(k, len(current) - smallest, len(droppable))
        if k <= 0:
            break
        ranked = sorted(droppable, key=lambda i: (imp[names[i]], names[i]))
        to_drop = ranked[:k]
        elimination.extend(names[i] for i in to_drop)
        drop_set = set(to_drop)
        current = [i for i in current if i not in drop_set]

    # survivors ordered by final importance ascending; protected last
    if len(current) > 1:
        forest = fit_forest(X[:, current], y, replace(cfg, features_per_split=None),
                            [names[i] for i in current])
        imp = {names[current[j]]: forest.importances[j]
               for j in range(len(current))}
    else:
        imp = {names[i]: 0.0 for i in current}
    survivors = sorted(
        current,
        key=lambda i: (names[i] in protected, imp[names[i]], names[i]),
    )
    full_order = elimination + [names[i] for i in survivors]

    out: dict[int, list[str]] = {}
    for size in sorted(target_sizes):
        take = min(size, len(full_order))
        out[size] = sorted(full_order[-take:])
    return out
