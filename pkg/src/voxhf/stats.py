"""Repeated-measures correlation screening and best/worst group comparisons.

rmcorr centers both variables within subject and correlates the centered
pairs: the within-subject association with subject-specific intercepts and a
common slope. Screening ranks descriptor columns by |r| against the KCCQ
anchor values, keeping the top N per descriptor type.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as spstats

from voxhf.windows import DESCRIPTOR_NAMES, WindowDataset

DEFAULT_PER_DESCRIPTOR_N = 25
NORMALITY_ALPHA = 0.05
NORMALITY_MIN_N = 20
MWU_EXACT_MAX_PRODUCT = 64


class DegenerateCorrelationError(ValueError):
    """x or y is constant within every subject; rmcorr undefined."""


@dataclass(frozen=True)
class RmcorrResult:
    r: float
    df: int
    p: float
    slope_sign: int


def _prepare_groups(subject_ids) -> dict:
    groups: dict = {}
    for i, sid in enumerate(subject_ids):
        groups.setdefault(sid, []).append(i)
    # subjects with a single observation carry no within-subject information
    return {sid: np.array(ix) for sid, ix in groups.items() if len(ix) >= 2}


def rmcorr(x, y, subject_ids) -> RmcorrResult:
    """Repeated-measures correlation of paired observations grouped by
    subject. Requires >= 2 subjects with >= 2 observations each."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    groups = _prepare_groups(subject_ids)
    if len(groups) < 2:
        raise ValueError("rmcorr needs >= 2 subjects with >= 2 observations")

    xc_parts, yc_parts = [], []
    for ix in groups.values():
        xc_parts.append(x[ix] - x[ix].mean())
        yc_parts.append(y[ix] - y[ix].mean())
    xc = np.concatenate(xc_parts)
    yc = np.concatenate(yc_parts)
    n = len(xc)
    k = len(groups)

    sxx = float(xc @ xc)
    syy = float(yc @ yc)
    if sxx == 0 or syy == 0:
        raise DegenerateCorrelationError("constant within-subject series")
    sxy = float(xc @ yc)
    r = sxy / np.sqrt(sxx * syy)
    r = float(np.clip(r, -1.0, 1.0))
    df = n - k - 1
    if df < 1:
        raise ValueError(f"rmcorr df {df} < 1")
    if abs(r) >= 1.0:
        p = 0.0
    else:
        t = r * np.sqrt(df / (1.0 - r * r))
        p = float(2 * spstats.t.sf(abs(t), df))
    return RmcorrResult(r=r, df=df, p=p, slope_sign=int(np.sign(sxy)) or 0)


def rmcorr_matrix(X: np.ndarray, y: np.ndarray, subject_ids) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Column-wise rmcorr of X against y: returns (r, df, p) arrays with NaN
    for undefined columns. Complete columns go through one vectorized pass;
    columns with missing values fall back to the exact scalar path."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, nf = X.shape
    groups = _prepare_groups(subject_ids)
    r_out = np.full(nf, np.nan)
    df_out = np.full(nf, 0, dtype=int)
    p_out = np.full(nf, np.nan)
    if len(groups) < 2:
        return r_out, df_out, p_out

    keep = np.concatenate(list(groups.values()))
    gindex = np.concatenate([
        np.full(len(ix), gi) for gi, ix in enumerate(groups.values())
    ])
    k = len(groups)
    counts = np.bincount(gindex, minlength=k).astype(float)

    Xk = X[keep]
    yk = y[keep]
    complete = np.isfinite(Xk).all(axis=0)

    if complete.any():
        sub = Xk[:, complete]
        gsum = np.zeros((k, sub.shape[1]))
        np.add.at(gsum, gindex, sub)
        xc = sub - (gsum / counts[:, None])[gindex]
        ysum = np.zeros(k)
        np.add.at(ysum, gindex, yk)
        yc = yk - (ysum / counts)[gindex]

        sxx = np.einsum("ij,ij->j", xc, xc)
        syy = float(yc @ yc)
        sxy = yc @ xc
        with np.errstate(invalid="ignore", divide="ignore"):
            r = np.where((sxx > 0) & (syy > 0), sxy / np.sqrt(sxx * syy), np.nan)
        r = np.clip(r, -1.0, 1.0)
        df = len(yk) - k - 1
        with np.errstate(invalid="ignore", divide="ignore"):
            t = r * np.sqrt(df / np.maximum(1.0 - r * r, 1e-300))
        p = 2 * spstats.t.sf(np.abs(t), df)
        p = np.where(np.abs(r) >= 1.0, 0.0, p)
        r_out[np.flatnonzero(complete)] = r
        df_out[np.flatnonzero(complete)] = df
        p_out[np.flatnonzero(complete)] = p

    for j in np.flatnonzero(~complete):
        col = X[:, j]
        ok = np.isfinite(col)
        if ok.sum() < 4:
            continue
        sids = [s for s, m in zip(subject_ids, ok) if m]
        try:
            res = rmcorr(col[ok], y[ok], sids)
        except (ValueError, DegenerateCorrelationError):
            continue
        r_out[j], df_out[j], p_out[j] = res.r, res.df, res.p
    return r_out, df_out, p_out


@dataclass(frozen=True)
class ScreenReport:
    selected: list[str]
    r: dict[str, float]
    df: dict[str, int]
    p: dict[str, float]


def screen_features(
    dataset: WindowDataset, per_descriptor_n: int = DEFAULT_PER_DESCRIPTOR_N
) -> ScreenReport:
    """Per descriptor type, rank features by |rmcorr(descriptor, KCCQ)| and
    keep the top per_descriptor_n; union across the six descriptors. Ties
    break by smaller p, then lexicographic name."""
    names = dataset.descriptor_names
    r, df, p = rmcorr_matrix(
        dataset.X[:, : len(names)], dataset.kccq, dataset.subject_ids
    )
    by_type: dict[str, list[int]] = {d: [] for d in DESCRIPTOR_NAMES}
    for j, name in enumerate(names):
        by_type[name.rsplit(".", 1)[1]].append(j)

    selected: list[str] = []
    for dtype in DESCRIPTOR_NAMES:
        idx = [j for j in by_type[dtype] if np.isfinite(r[j])]
        idx.sort(key=lambda j: (-abs(r[j]), p[j], names[j]))
        selected.extend(names[j] for j in idx[:per_descriptor_n])

    selected = sorted(set(selected))
    return ScreenReport(
        selected=selected,
        r={names[j]: float(r[j]) for j in range(len(names)) if np.isfinite(r[j])},
        df={names[j]: int(df[j]) for j in range(len(names))},
        p={names[j]: float(p[j]) for j in range(len(names)) if np.isfinite(p[j])},
    )


@dataclass(frozen=True)
class GroupComparison:
    feature: str
    test: str
    p: float
    effect: float
    median_best: float
    iqr_best: float
    median_worst: float
    iqr_worst: float
    n_best: int
    n_worst: int


def _mwu_counts(n1: int, n2: int) -> np.ndarray:
    """Number of arrangements for each U value via the standard recurrence
    c(n1, n2, u) = c(n1-1, n2, u-n2) + c(n1, n2-1, u)."""
    table = np.zeros((n1 + 1, n2 + 1, n1 * n2 + 1))
    table[0, :, 0] = 1.0
    table[:, 0, 0] = 1.0
    for a in range(1, n1 + 1):
        for b in range(1, n2 + 1):
            prev_a = table[a - 1, b]
            prev_b = table[a, b - 1]
            cur = np.zeros(n1 * n2 + 1)
            cur[b:] += prev_a[: n1 * n2 + 1 - b]
            cur += prev_b
            table[a, b] = cur
    return table[n1, n2]


def mann_whitney(values_best, values_worst) -> tuple[float, float]:
    """Returns (U, two-sided p) where U counts (best, worst) pairs with
    worst above best (ties half). Exact enumeration for n1*n2 <= 64 without
    ties; tie- and continuity-corrected normal approximation otherwise."""
    b = np.asarray(values_best, dtype=float)
    w = np.asarray(values_worst, dtype=float)
    n1, n2 = len(b), len(w)
    greater = (w[None, :] > b[:, None]).sum()
    equal = (w[None, :] == b[:, None]).sum()
    u = float(greater) + 0.5 * float(equal)

    pooled = np.concatenate([b, w])
    _, tie_counts = np.unique(pooled, return_counts=True)
    has_ties = bool((tie_counts > 1).any())

    if n1 * n2 <= MWU_EXACT_MAX_PRODUCT and not has_ties:
        counts = _mwu_counts(n1, n2)
        total = counts.sum()
        u_int = int(round(u))
        lo = counts[: u_int + 1].sum() / total
        hi = counts[u_int:].sum() / total
        p = float(min(1.0, 2 * min(lo, hi)))
        return u, p

    n = n1 + n2
    mean_u = n1 * n2 / 2.0
    tie_term = float(((tie_counts**3 - tie_counts).sum()) / (n * (n - 1))) if n > 1 else 0.0
    var_u = n1 * n2 / 12.0 * ((n + 1) - tie_term)
    if var_u <= 0:
        return u, 1.0
    diff = u - mean_u
    z = (diff - 0.5 * np.sign(diff)) / np.sqrt(var_u) if diff != 0 else 0.0
    p = float(2 * spstats.norm.sf(abs(z)))
    return u, min(1.0, p)


def compare_groups(values_best, values_worst, feature: str = "") -> GroupComparison:
    """Welch t-test with Cohen's d when both groups pass D'Agostino-Pearson
    normality (alpha 0.05, n >= 20 each); Mann-Whitney with rank-biserial r
    otherwise. Medians and IQRs reported per group."""
    b = np.asarray(values_best, dtype=float)
    w = np.asarray(values_worst, dtype=float)
    b = b[np.isfinite(b)]
    w = w[np.isfinite(w)]
    if len(b) < 3 or len(w) < 3:
        raise ValueError("compare_groups needs >= 3 observations per group")

    def _iqr(v):
        return float(np.percentile(v, 75) - np.percentile(v, 25))

    stats_common = dict(
        feature=feature,
        median_best=float(np.median(b)),
        iqr_best=_iqr(b),
        median_worst=float(np.median(w)),
        iqr_worst=_iqr(w),
        n_best=len(b),
        n_worst=len(w),
    )

    if np.ptp(np.concatenate([b, w])) == 0:
        return GroupComparison(test="degenerate", p=1.0, effect=0.0, **stats_common)

    normal = False
    if len(b) >= NORMALITY_MIN_N and len(w) >= NORMALITY_MIN_N:
        if b.std() > 0 and w.std() > 0:
            _, p_b = spstats.normaltest(b)
            _, p_w = spstats.normaltest(w)
            normal = p_b > NORMALITY_ALPHA and p_w > NORMALITY_ALPHA

    if normal:
        t_res = spstats.ttest_ind(b, w, equal_var=False)
        s_pooled = np.sqrt(
            ((len(b) - 1) * b.var(ddof=1) + (len(w) - 1) * w.var(ddof=1))
            / (len(b) + len(w) - 2)
        )
        d = float((b.mean() - w.mean()) / s_pooled) if s_pooled > 0 else 0.0
        return GroupComparison(test="welch_t", p=float(t_res.pvalue), effect=d,
                               **stats_common)

    u, p = mann_whitney(b, w)
    rank_biserial = 1.0 - 2.0 * u / (len(b) * len(w))
    return GroupComparison(test="mann_whitney", p=p, effect=float(rank_biserial),
                           **stats_common)
