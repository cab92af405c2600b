"""Statistical functionals collapsing LLD contours into daily vowel feature
vectors.

Thirteen functionals are applied to each of the 64 contours and to each
contour's first difference ("delta"), giving 64 x 2 x 13 = 1,664 features per
vowel recording; daily vectors average the available repetitions.

Conventions, pinned for the brute-force oracle tests: NaNs are excluded;
quartiles use linear interpolation on the order statistics (index (n-1)*q);
std is the population standard deviation; skewness/kurtosis are
bias-uncorrected moment ratios with excess kurtosis, NaN at zero variance;
slope_per_s is the least-squares slope against frame time; mean_abs_delta
averages |x[i]-x[i-1]| over adjacent pairs where both values are present.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date as Date

import numpy as np

from voxhf.lld import LLD_NAMES, LldMatrix

FUNCTIONAL_NAMES = [
    "mean", "std", "min", "max", "range", "q1", "median", "q3", "iqr",
    "skewness", "kurtosis", "slope_per_s", "mean_abs_delta",
]
MIN_VALID_VALUES = 3
FEATURES_PER_VOWEL = len(LLD_NAMES) * 2 * len(FUNCTIONAL_NAMES)

NAMESPACES = ("vowel_a", "vowel_o", "vowel_i", "command", "text", "story",
              "soc", "hfast")


@dataclass(frozen=True)
class DailyFeatureVector:
    subject_id: str
    date: Date
    namespace: str
    values: dict[str, float]

    def __post_init__(self):
        if self.namespace not in NAMESPACES:
            raise ValueError(f"unknown namespace {self.namespace}")


def functionals(contour: np.ndarray, times_s: np.ndarray) -> dict[str, float]:
    """All thirteen functionals of one contour (NaN-aware). Contours with
    fewer than three valid values yield all-NaN."""
    row = np.asarray(contour, dtype=float)[None, :]
    out = functionals_matrix(row, np.asarray(times_s, dtype=float))
    return {name: float(out[name][0]) for name in FUNCTIONAL_NAMES}


def functionals_matrix(
    contours: np.ndarray, times_s: np.ndarray
) -> dict[str, np.ndarray]:
    """Vectorized functionals across rows of a (n_contours, n_frames) matrix."""
    x = np.asarray(contours, dtype=float)
    t = np.asarray(times_s, dtype=float)
    n_rows = x.shape[0]
    valid = np.isfinite(x)
    counts = valid.sum(axis=1)
    enough = counts >= MIN_VALID_VALUES

    out: dict[str, np.ndarray] = {}
    with np.errstate(invalid="ignore", divide="ignore"):
        counts_f = np.maximum(counts, 1).astype(float)
        xz = np.where(valid, x, 0.0)
        mean = xz.sum(axis=1) / counts_f
        dev = np.where(valid, x - mean[:, None], 0.0)
        m2 = (dev**2).sum(axis=1) / counts_f
        m3 = (dev**3).sum(axis=1) / counts_f
        m4 = (dev**4).sum(axis=1) / counts_f

        # quantiles via one sort per matrix (NaNs sort last); linear
        # interpolation on the order statistics, index (c-1)*q
        srt = np.sort(x, axis=1)
        rows = np.arange(n_rows)
        last = np.maximum(counts - 1, 0)
        mn = srt[rows, 0]
        mx = srt[rows, last]

        def _quantile(q: float) -> np.ndarray:
            h = last * q
            lo = np.floor(h).astype(int)
            hi = np.ceil(h).astype(int)
            lo_v = srt[rows, lo]
            return lo_v + (h - lo) * (srt[rows, hi] - lo_v)

        q1 = _quantile(0.25)
        q2 = _quantile(0.50)
        q3 = _quantile(0.75)

        std = np.sqrt(m2)
        skew = np.where(m2 > 0, m3 / np.maximum(m2, 1e-300) ** 1.5, np.nan)
        kurt = np.where(m2 > 0, m4 / np.maximum(m2, 1e-300) ** 2 - 3.0, np.nan)

        # masked least-squares slope vs time, one pass over rows
        w = valid.astype(float)
        tw = w * t[None, :]
        xw = np.where(valid, x, 0.0)
        sw = counts.astype(float)
        t_mean = tw.sum(axis=1) / np.maximum(sw, 1)
        x_mean = xw.sum(axis=1) / np.maximum(sw, 1)
        t_dev = (t[None, :] - t_mean[:, None]) * w
        x_dev = np.where(valid, x - x_mean[:, None], 0.0)
        cov = (t_dev * x_dev).sum(axis=1)
        var_t = (t_dev**2).sum(axis=1)
        slope = np.where(var_t > 0, cov / np.maximum(var_t, 1e-300), np.nan)

        pair = valid[:, 1:] & valid[:, :-1]
        diffs = np.where(pair, np.abs(x[:, 1:] - x[:, :-1]), 0.0)
        n_pairs = pair.sum(axis=1)
        mad = np.where(n_pairs > 0, diffs.sum(axis=1) / np.maximum(n_pairs, 1), np.nan)

    nanrow = np.full(n_rows, np.nan)
    for name, vals in (
        ("mean", mean), ("std", std), ("min", mn), ("max", mx),
        ("range", mx - mn), ("q1", q1), ("median", q2), ("q3", q3),
        ("iqr", q3 - q1), ("skewness", skew), ("kurtosis", kurt),
        ("slope_per_s", slope), ("mean_abs_delta", mad),
    ):
        out[name] = np.where(enough, vals, nanrow)
    return out


def recording_features(m: LldMatrix) -> dict[str, float]:
    """1,664 named features for one vowel recording:
    `{lld}.{functional}` and `{lld}.delta.{functional}`."""
    t = m.frame_times_s
    plain = np.vstack([m.columns[name] for name in LLD_NAMES])
    a, b = plain[:, 1:], plain[:, :-1]
    delta = np.where(np.isfinite(a) & np.isfinite(b), a - b, np.nan)

    feats: dict[str, float] = {}
    f_plain = functionals_matrix(plain, t)
    f_delta = functionals_matrix(delta, t[1:]) if plain.shape[1] > 1 else {
        f: np.full(len(LLD_NAMES), np.nan) for f in FUNCTIONAL_NAMES
    }
    for i, lld in enumerate(LLD_NAMES):
        for func in FUNCTIONAL_NAMES:
            feats[f"{lld}.{func}"] = float(f_plain[func][i])
            feats[f"{lld}.delta.{func}"] = float(f_delta[func][i])
    return feats


def daily_vowel_vector(
    subject_id: str,
    date: Date,
    namespace: str,
    repetitions: list[LldMatrix],
) -> DailyFeatureVector | None:
    """Average per-repetition functionals over the available repetitions
    (per-feature NaNs skipped). Zero retained repetitions -> no vector."""
    if not repetitions:
        return None
    per_rep = [recording_features(m) for m in repetitions]
    names = per_rep[0].keys()
    values = {}
    for name in names:
        vals = [r[name] for r in per_rep if np.isfinite(r[name])]
        values[name] = float(np.mean(vals)) if vals else float("nan")
    return DailyFeatureVector(subject_id, date, namespace, values)
