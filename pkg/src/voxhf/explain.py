"""Exact interventional Shapley attributions for the trained forest.

For each (tree, background point) pair the attribution is computed in closed
form per leaf: a root-to-leaf path constrains each distinct feature to an
interval, so against a background point z every path feature is either
unconstrained (x and z both satisfy it), required in the coalition (only x
satisfies), forbidden (only z satisfies), or kills the leaf (neither). The
Shapley weight of a leaf then depends only on the required/forbidden counts.
Attributions are averaged over the background set and summed over trees; the
explained output is the forest's probability of the "worst" class.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from voxhf.forest import Forest, LABEL_WORST

MAX_BACKGROUND = 128


@dataclass
class ShapReport:
    feature_names: list[str]
    phi: np.ndarray          # (n_samples, n_features)
    base_value: float
    predictions: np.ndarray  # forest P(worst) per explained sample
    X: np.ndarray            # explained feature values (for summaries)

    def local_accuracy_error(self) -> np.ndarray:
        return np.abs(self.phi.sum(axis=1) + self.base_value - self.predictions)

    def global_ranking(self) -> list[tuple[str, float]]:
        mean_abs = np.abs(self.phi).mean(axis=0)
        order = sorted(
            range(len(self.feature_names)),
            key=lambda j: (-mean_abs[j], self.feature_names[j]),
        )
        return [(self.feature_names[j], float(mean_abs[j])) for j in order]


@dataclass
class _LeafPaths:
    feats: list[np.ndarray]
    lo: list[np.ndarray]
    hi: list[np.ndarray]
    values: np.ndarray


def _leaf_paths(tree) -> _LeafPaths:
    feats, los, his, values = [], [], [], []

    def walk(node, lo: dict, hi: dict):
        f = tree.feature[node]
        if f < 0:
            keys = np.array(sorted(set(lo) | set(hi)), dtype=int)
            los.append(np.array([lo.get(k, -np.inf) for k in keys]))
            his.append(np.array([hi.get(k, np.inf) for k in keys]))
            feats.append(keys)
            values.append(tree.probs[node][LABEL_WORST])
            return
        thr = tree.threshold[node]
        old = hi.get(f)
        hi[f] = min(hi.get(f, np.inf), thr)
        walk(tree.left[node], lo, hi)
        if old is None:
            del hi[f]
        else:
            hi[f] = old
        old = lo.get(f)
        lo[f] = max(lo.get(f, -np.inf), thr)
        walk(tree.right[node], lo, hi)
        if old is None:
            del lo[f]
        else:
            lo[f] = old

    walk(0, {}, {})
    return _LeafPaths(feats, los, his, np.array(values))


def _weight_tables(max_m: int):
    """w_in[i, M] = (i-1)!(M-i)!/M!, w_out[i, M] = i!(M-i-1)!/M!."""
    w_in = np.zeros((max_m + 1, max_m + 1))
    w_out = np.zeros((max_m + 1, max_m + 1))
    for m in range(max_m + 1):
        for i in range(m + 1):
            if i >= 1:
                w_in[i, m] = factorial(i - 1) * factorial(m - i) / factorial(m)
            if m - i >= 1:
                w_out[i, m] = factorial(i) * factorial(m - i - 1) / factorial(m)
    return w_in, w_out


def select_background(X_train: np.ndarray, limit: int = MAX_BACKGROUND) -> np.ndarray:
    """Deterministic subsample: evenly strided rows, at most `limit`."""
    n = len(X_train)
    if n <= limit:
        return np.array(X_train, dtype=float)
    idx = np.unique(np.linspace(0, n - 1, limit).astype(int))
    return np.array(X_train[idx], dtype=float)


def tree_shap(
    forest: Forest, X_explain: np.ndarray, background: np.ndarray
) -> ShapReport:
    """Interventional Shapley values of P(worst) for each explained sample,
    exact per tree against each background point."""
    X = np.atleast_2d(np.asarray(X_explain, dtype=float))
    Z = np.atleast_2d(np.asarray(background, dtype=float))
    p = forest.n_features
    if X.shape[1] != p or Z.shape[1] != p:
        raise ValueError(
            f"feature dimension mismatch: explain {X.shape[1]}, "
            f"background {Z.shape[1]}, forest {p}"
        )
    nx, nz = len(X), len(Z)
    phi = np.zeros((nx, p))

    max_depth_bound = 0
    all_paths = []
    for tree in forest.trees:
        paths = _leaf_paths(tree)
        all_paths.append(paths)
        if paths.feats:
            max_depth_bound = max(max_depth_bound,
                                  max(len(f) for f in paths.feats))
    w_in, w_out = _weight_tables(max(max_depth_bound, 1))

    for paths in all_paths:
        for feats, lo, hi, value in zip(paths.feats, paths.lo, paths.hi,
                                        paths.values):
            if len(feats) == 0 or value == 0.0:
                # constraint-free leaves shift x and z equally; zero-value
                # leaves contribute nothing
                continue
            a = (X[:, feats] > lo[None, :]) & (X[:, feats] <= hi[None, :])
            b = (Z[:, feats] > lo[None, :]) & (Z[:, feats] <= hi[None, :])
            # (nx, nz, P)
            in_mask = a[:, None, :] & ~b[None, :, :]
            out_mask = ~a[:, None, :] & b[None, :, :]
            feasible = ~(~a[:, None, :] & ~b[None, :, :]).any(axis=2)
            i_cnt = in_mask.sum(axis=2)
            m_cnt = i_cnt + out_mask.sum(axis=2)
            win = w_in[i_cnt, m_cnt] * feasible
            wout = w_out[i_cnt, m_cnt] * feasible
            contrib = (
                in_mask * win[:, :, None] - out_mask * wout[:, :, None]
            ).sum(axis=1)
            phi[:, feats] += value * contrib / nz

    phi /= len(forest.trees)
    predictions = forest.predict_worst_probability(X)
    base = float(forest.predict_worst_probability(Z).mean())
    return ShapReport(list(forest.feature_names), phi, base, predictions, X)


def brute_force_shap(
    forest: Forest, x: np.ndarray, background: np.ndarray
) -> np.ndarray:
    """Subset-enumeration oracle (exponential; forests on <= ~12 features):
    v(S) = mean over background of the forest with out-of-coalition features
    replaced by background values."""
    x = np.asarray(x, dtype=float)
    Z = np.atleast_2d(np.asarray(background, dtype=float))
    p = forest.n_features
    values: dict[int, float] = {}
    for mask in range(1 << p):
        hybrid = np.array(Z)
        for j in range(p):
            if mask >> j & 1:
                hybrid[:, j] = x[j]
        values[mask] = float(forest.predict_worst_probability(hybrid).mean())

    phi = np.zeros(p)
    for j in range(p):
        for mask in range(1 << p):
            if mask >> j & 1:
                continue
            s = bin(mask).count("1")
            weight = factorial(s) * factorial(p - s - 1) / factorial(p)
            phi[j] += weight * (values[mask | (1 << j)] - values[mask])
    return phi


@dataclass
class ShapSummary:
    ranking: list[tuple[str, float]]          # (feature, mean |phi|) desc
    direction: dict[str, float]               # rank corr(feature value, phi)
    top_n: int

    def top_features(self) -> list[str]:
        return [name for name, _ in self.ranking[: self.top_n]]


def _rank(v: np.ndarray) -> np.ndarray:
    order = np.argsort(v, kind="stable")
    ranks = np.empty(len(v))
    ranks[order] = np.arange(len(v), dtype=float)
    return ranks


def shap_summary(report: ShapReport, top_n: int = 10) -> ShapSummary:
    """Global ranking by mean |phi| with a per-feature direction: Spearman
    correlation between feature value and attribution (positive means high
    values push toward 'worst')."""
    ranking = report.global_ranking()
    direction: dict[str, float] = {}
    for j, name in enumerate(report.feature_names):
        x = report.X[:, j]
        f = report.phi[:, j]
        if np.ptp(x) == 0 or np.ptp(f) == 0:
            direction[name] = 0.0
            continue
        rx, rf = _rank(x), _rank(f)
        rx -= rx.mean()
        rf -= rf.mean()
        denom = np.sqrt((rx @ rx) * (rf @ rf))
        direction[name] = float(rx @ rf / denom) if denom > 0 else 0.0
    return ShapSummary(ranking=ranking, direction=direction, top_n=top_n)
