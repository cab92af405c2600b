"""K-day lookback aggregation: daily features preceding each KCCQ anchor
summarized by six time-series descriptors (mean, std, slope, rolling
variability, two dominant spectral magnitudes).

The window for an anchor date covers [anchor - K + 1, anchor]. Moments and
slope use present days only; the DFT path linearly interpolates missing days
onto the regular K-day grid (nearest-value extension at the edges) because
the DFT needs a regular grid. Samples whose window has fewer than
min_present_days days of data are dropped into diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date as Date, timedelta

import numpy as np

from voxhf.functionals import DailyFeatureVector
from voxhf.manifest import SubjectProfile

DESCRIPTOR_NAMES = ("mean", "std", "slope", "rollvar", "fft1", "fft2")
ROLLING_SUBWINDOW = 3
COVARIATE_NAMES = ("age_years", "sex_male", "sex_female", "native_speaker")


@dataclass(frozen=True)
class WindowConfig:
    k_days: int
    min_present_days: int | None = None
    rolling_subwindow: int = ROLLING_SUBWINDOW

    def __post_init__(self):
        if not 2 <= self.k_days <= 14:
            raise ValueError(f"k_days {self.k_days} outside [2, 14]")
        if self.min_present_days is None:
            # the nominal default max(3, ceil(K/2)) exceeds K at K=2; clamp
            object.__setattr__(
                self, "min_present_days",
                min(self.k_days, max(3, int(np.ceil(self.k_days / 2)))),
            )
        if self.min_present_days > self.k_days:
            raise ValueError("min_present_days exceeds k_days")


@dataclass
class FeatureTable:
    """Per-subject daily feature matrices: dates (sorted) x named features."""

    feature_names: list[str]
    subjects: dict[str, tuple[list[Date], np.ndarray]] = field(default_factory=dict)

    @classmethod
    def from_vectors(cls, vectors: list[DailyFeatureVector]) -> "FeatureTable":
        names = sorted({
            f"{v.namespace}.{name}" for v in vectors for name in v.values
        })
        col = {n: i for i, n in enumerate(names)}
        by_subject: dict[str, dict[Date, np.ndarray]] = {}
        for v in vectors:
            rows = by_subject.setdefault(v.subject_id, {})
            if v.date not in rows:
                rows[v.date] = np.full(len(names), np.nan)
            row = rows[v.date]
            for name, value in v.values.items():
                row[col[f"{v.namespace}.{name}"]] = value
        table = cls(feature_names=names)
        for sid, rows in by_subject.items():
            dates = sorted(rows)
            table.subjects[sid] = (dates, np.vstack([rows[d] for d in dates]))
        return table

    def select(self, feature_names: list[str]) -> "FeatureTable":
        idx = [self.feature_names.index(n) for n in feature_names]
        out = FeatureTable(feature_names=list(feature_names))
        for sid, (dates, mat) in self.subjects.items():
            out.subjects[sid] = (dates, mat[:, idx])
        return out


@dataclass(frozen=True)
class WindowSample:
    subject_id: str
    anchor_date: Date
    kccq: float
    descriptors: dict[str, float]
    covariates: dict[str, float]
    present_days: int


@dataclass
class WindowDataset:
    """Matrix form of the window samples: X columns are
    `{feature}.{descriptor}` then the covariates."""

    config: WindowConfig
    descriptor_names: list[str]
    covariate_names: list[str]
    subject_ids: list[str]
    anchor_dates: list[Date]
    kccq: np.ndarray
    present_days: np.ndarray
    X: np.ndarray
    diagnostics: list[str] = field(default_factory=list)

    @property
    def n_samples(self) -> int:
        return len(self.subject_ids)

    @property
    def column_names(self) -> list[str]:
        return self.descriptor_names + self.covariate_names

    def sample(self, i: int) -> WindowSample:
        nd = len(self.descriptor_names)
        return WindowSample(
            self.subject_ids[i],
            self.anchor_dates[i],
            float(self.kccq[i]),
            dict(zip(self.descriptor_names, self.X[i, :nd])),
            dict(zip(self.covariate_names, self.X[i, nd:])),
            int(self.present_days[i]),
        )


def window_descriptors(window: np.ndarray, cfg: WindowConfig) -> np.ndarray:
    """(6, n_features) descriptors of a (k_days, n_features) window matrix
    with NaN marking absent values. Rows follow DESCRIPTOR_NAMES."""
    k, nf = window.shape
    valid = np.isfinite(window)
    counts = valid.sum(axis=0)
    out = np.full((6, nf), np.nan)
    offsets = np.arange(k, dtype=float)

    with np.errstate(invalid="ignore", divide="ignore"):
        sums = np.where(valid, window, 0.0).sum(axis=0)
        mean = np.where(counts >= 1, sums / np.maximum(counts, 1), np.nan)
        out[0] = mean

        dev = np.where(valid, window - mean[None, :], 0.0)
        ss = (dev**2).sum(axis=0)
        out[1] = np.where(counts >= 2, np.sqrt(ss / np.maximum(counts - 1, 1)), np.nan)

        t_mean = (offsets[:, None] * valid).sum(axis=0) / np.maximum(counts, 1)
        t_dev = np.where(valid, offsets[:, None] - t_mean[None, :], 0.0)
        var_t = (t_dev**2).sum(axis=0)
        cov = (t_dev * dev).sum(axis=0)
        out[2] = np.where((counts >= 2) & (var_t > 0),
                          cov / np.maximum(var_t, 1e-300), np.nan)

    out[3] = _rolling_variability(window, valid, cfg.rolling_subwindow)
    out[4], out[5] = _fft_descriptors(window, valid, counts)
    return out


def _rolling_std_complete(window, width):
    """(n_windows, nf) rolling std (ddof=1) of a complete matrix along axis 0.
    Columns are centered first so the sum-of-squares form stays accurate."""
    x = window - window.mean(axis=0)
    c1 = np.cumsum(np.vstack([np.zeros((1, x.shape[1])), x]), axis=0)
    c2 = np.cumsum(np.vstack([np.zeros((1, x.shape[1])), x**2]), axis=0)
    s1 = c1[width:] - c1[:-width]
    s2 = c2[width:] - c2[:-width]
    var = np.maximum(s2 - s1**2 / width, 0.0) / (width - 1)
    return np.sqrt(var)


def _rolling_variability(window, valid, width):
    k, nf = window.shape
    out = np.full(nf, np.nan)
    complete = valid.all(axis=0)
    if k >= width and complete.any():
        out[complete] = _rolling_std_complete(window[:, complete], width).mean(axis=0)
    for j in np.flatnonzero(~complete):
        vals = window[valid[:, j], j]
        if len(vals) < width:
            continue
        stds = [np.std(vals[i : i + width], ddof=1)
                for i in range(len(vals) - width + 1)]
        out[j] = float(np.mean(stds))
    return out


def _top2_magnitudes(x):
    """fft1/fft2 of mean-removed complete columns: (2, nf) from (k, nf)."""
    k = x.shape[0]
    xm = x - x.mean(axis=0)
    mags = np.abs(np.fft.rfft(xm, axis=0))[1 : k // 2 + 1]
    if mags.shape[0] == 0:
        return np.zeros((2, x.shape[1]))
    if mags.shape[0] == 1:
        return np.vstack([mags[0], np.zeros(x.shape[1])])
    part = -np.partition(-mags, 1, axis=0)
    return part[:2]


def _fft_descriptors(window, valid, counts):
    k, nf = window.shape
    fft1 = np.full(nf, np.nan)
    fft2 = np.full(nf, np.nan)
    complete = valid.all(axis=0)
    if complete.any():
        top2 = _top2_magnitudes(window[:, complete])
        fft1[complete] = top2[0]
        fft2[complete] = top2[1]
    offsets = np.arange(k, dtype=float)
    for j in np.flatnonzero(~complete):
        n_ok = counts[j]
        if n_ok < 2:
            continue
        ok = valid[:, j]
        filled = np.interp(offsets, offsets[ok], window[ok, j])
        top2 = _top2_magnitudes(filled[:, None])
        fft1[j] = top2[0, 0]
        fft2[j] = top2[1, 0]
    return fft1, fft2


def aggregate_window(
    dates: list[Date], values: np.ndarray, anchor: Date, cfg: WindowConfig
) -> dict[str, float] | None:
    """Six descriptors of one feature series over the window ending at the
    anchor; None when fewer than min_present_days values are present."""
    window = np.full((cfg.k_days, 1), np.nan)
    start = anchor - timedelta(days=cfg.k_days - 1)
    for d, v in zip(dates, values):
        off = (d - start).days
        if 0 <= off < cfg.k_days:
            window[off, 0] = v
    if np.isfinite(window).sum() < cfg.min_present_days:
        return None
    desc = window_descriptors(window, cfg)
    return {name: float(desc[i, 0]) for i, name in enumerate(DESCRIPTOR_NAMES)}


def build_window_dataset(
    table: FeatureTable,
    labels: list,
    profiles: dict[str, SubjectProfile],
    cfg: WindowConfig,
    feature_subset: list[str] | None = None,
) -> WindowDataset:
    """One sample per (subject, KCCQ date) whose window has at least
    min_present_days days of data; absent subjects or starved windows go to
    diagnostics."""
    if feature_subset is not None:
        table = table.select(feature_subset)
    names = table.feature_names
    desc_names = [f"{f}.{d}" for f in names for d in DESCRIPTOR_NAMES]

    rows = []
    meta = []
    diagnostics = []
    for lab in sorted(labels, key=lambda r: (r.subject_id, r.date)):
        entry = table.subjects.get(lab.subject_id)
        if entry is None:
            diagnostics.append(f"{lab.subject_id}: no daily features for any window")
            continue
        dates, mat = entry
        start = lab.date - timedelta(days=cfg.k_days - 1)
        window = np.full((cfg.k_days, len(names)), np.nan)
        present = 0
        for d, row in zip(dates, mat):
            off = (d - start).days
            if 0 <= off < cfg.k_days:
                window[off] = row
                present += 1
        if present < cfg.min_present_days:
            diagnostics.append(
                f"{lab.subject_id}@{lab.date.isoformat()}: "
                f"{present} present days < {cfg.min_present_days}"
            )
            continue
        desc = window_descriptors(window, cfg)
        rows.append(desc.T.reshape(-1))
        meta.append((lab.subject_id, lab.date, lab.kccq, present))

    cov_rows = []
    for sid, _, _, _ in meta:
        p = profiles[sid]
        cov_rows.append([
            p.age_years,
            1.0 if p.sex == "male" else 0.0,
            1.0 if p.sex == "female" else 0.0,
            1.0 if p.native_speaker else 0.0,
        ])

    n = len(meta)
    X = np.hstack([
        np.vstack(rows) if n else np.empty((0, len(desc_names))),
        np.array(cov_rows) if n else np.empty((0, len(COVARIATE_NAMES))),
    ])
    return WindowDataset(
        config=cfg,
        descriptor_names=desc_names,
        covariate_names=list(COVARIATE_NAMES),
        subject_ids=[m[0] for m in meta],
        anchor_dates=[m[1] for m in meta],
        kccq=np.array([m[2] for m in meta]),
        present_days=np.array([m[3] for m in meta], dtype=int),
        X=X,
        diagnostics=diagnostics,
    )
