"""Metric suite, subject-wise nested cross-validation and the feature-set x
lookback-window sweep.

Leakage discipline: outer and inner folds are grouped by subject; screening
re-runs inside each outer training fold (a paper-style global mode exists
behind a flag); median imputation statistics come from the training rows of
the fold at hand, and every imputer fit is recorded in an audit trail so
train-fold-only usage is assertable."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from voxhf.forest import (
    LABEL_EXCLUDED,
    LABEL_WORST,
    DegenerateModelError,
    Forest,
    ForestConfig,
    binarize_labels,
    fit_forest,
    rfe,
)
from voxhf.stats import screen_features
from voxhf.windows import FeatureTable, WindowConfig, WindowDataset, build_window_dataset

FEATURE_SETS: dict[str, tuple[str, ...]] = {
    "soc": ("soc",),
    "hfast": ("hfast",),
    "vowel": ("vowel_a", "vowel_o", "vowel_i"),
    "speech": ("command", "text", "story"),
    "voice": ("vowel_a", "vowel_o", "vowel_i", "command", "text", "story"),
    "all": ("soc", "hfast", "vowel_a", "vowel_o", "vowel_i",
            "command", "text", "story"),
}
METRIC_NAMES = ("sensitivity", "specificity", "f1", "mcc", "auc", "auprc")


class MetricsError(ValueError):
    """AUC/AUPRC undefined for single-class ground truth."""


def _roc_points(y_true: np.ndarray, y_prob: np.ndarray):
    """ROC curve points over distinct-score thresholds, from (0,0) to (1,1)."""
    order = np.argsort(-y_prob, kind="stable")
    yt = y_true[order]
    ps = y_prob[order]
    distinct = np.flatnonzero(np.diff(ps)) if len(ps) > 1 else np.array([], int)
    cut = np.concatenate([distinct, [len(ps) - 1]])
    cum_tp = np.cumsum(yt == 1)[cut]
    cum_fp = np.cumsum(yt == 0)[cut]
    pos = float((y_true == 1).sum())
    neg = float((y_true == 0).sum())
    tpr = np.concatenate([[0.0], cum_tp / pos])
    fpr = np.concatenate([[0.0], cum_fp / neg])
    return fpr, tpr, cum_tp, cum_fp, pos


def roc_curve(y_true, y_prob):
    fpr, tpr, *_ = _roc_points(np.asarray(y_true, int), np.asarray(y_prob, float))
    return fpr, tpr


def pr_curve(y_true, y_prob):
    _, _, cum_tp, cum_fp, pos = _roc_points(
        np.asarray(y_true, int), np.asarray(y_prob, float)
    )
    recall = np.concatenate([[0.0], cum_tp / pos])
    precision = np.concatenate([[1.0], cum_tp / np.maximum(cum_tp + cum_fp, 1)])
    return recall, precision


def metrics(y_true, y_prob, threshold: float = 0.5) -> dict[str, float]:
    """Confusion metrics at the threshold (prediction positive when
    probability >= threshold), trapezoidal AUC over the full ROC, and
    step-wise average precision. Raises MetricsError when y_true is
    single-class (AUC/AUPRC undefined)."""
    y_true = np.asarray(y_true, dtype=int)
    y_prob = np.asarray(y_prob, dtype=float)
    if y_prob.min() < 0 or y_prob.max() > 1:
        raise ValueError("probabilities outside [0, 1]")
    if len(np.unique(y_true)) < 2:
        raise MetricsError("single-class ground truth")

    out = confusion_metrics(y_true, y_prob, threshold)
    fpr, tpr, cum_tp, cum_fp, pos = _roc_points(y_true, y_prob)
    out["auc"] = float(np.trapezoid(tpr, fpr))

    recall = cum_tp / pos
    precision = cum_tp / np.maximum(cum_tp + cum_fp, 1)
    rec_prev = np.concatenate([[0.0], recall[:-1]])
    out["auprc"] = float(((recall - rec_prev) * precision).sum())
    return out


def confusion_metrics(y_true, y_prob, threshold: float = 0.5) -> dict[str, float]:
    """Threshold metrics alone, NaN where undefined (used per CV fold)."""
    y_true = np.asarray(y_true, dtype=int)
    pred = np.asarray(y_prob, dtype=float) >= threshold
    tp = float(np.sum(pred & (y_true == 1)))
    tn = float(np.sum(~pred & (y_true == 0)))
    fp = float(np.sum(pred & (y_true == 0)))
    fn = float(np.sum(~pred & (y_true == 1)))

    sens = tp / (tp + fn) if (tp + fn) > 0 else float("nan")
    spec = tn / (tn + fp) if (tn + fp) > 0 else float("nan")
    f1 = 2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) > 0 else float("nan")
    factors = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    mcc = (tp * tn - fp * fn) / np.sqrt(factors) if factors > 0 else 0.0
    return {"sensitivity": sens, "specificity": spec, "f1": f1, "mcc": float(mcc)}


class MedianImputer:
    """Per-column median imputation; remembers which samples it was fitted on
    so leakage is auditable."""

    def __init__(self):
        self.medians: np.ndarray | None = None
        self.fitted_on: list[int] = []

    def fit(self, X: np.ndarray, sample_tags: list[int]) -> "MedianImputer":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            med = np.nanmedian(X, axis=0)
        self.medians = np.where(np.isfinite(med), med, 0.0)
        self.fitted_on = list(sample_tags)
        return self

    def transform(self, X: np.ndarray) -> np.ndarray:
        out = np.array(X, dtype=float)
        mask = ~np.isfinite(out)
        if mask.any():
            out[mask] = np.broadcast_to(self.medians, out.shape)[mask]
        return out


@dataclass(frozen=True)
class CvConfig:
    outer_folds: int = 5
    inner_folds: int = 3
    rfe_sizes: tuple[int, ...] = (10, 20, 30)
    min_leaf_grid: tuple[int, ...] = (1, 2, 4)
    per_descriptor_n: int = 25
    screening: str = "per_fold"  # or "global"
    threshold: float = 0.5
    seed: int = 0


@dataclass
class FoldResult:
    fold: int
    test_subjects: list[str]
    metrics: dict[str, float]
    selected_features: list[str]
    chosen_rfe_size: int
    chosen_min_leaf: int
    n_train: int
    n_test: int
    y_true: list[int]
    y_prob: list[float]
    warnings: list[str] = field(default_factory=list)


@dataclass
class CvReport:
    folds: list[FoldResult]
    summary: dict[str, tuple[float, float]]
    screening_mode: str
    imputation_audit: list[dict] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def pooled_predictions(self) -> tuple[np.ndarray, np.ndarray]:
        yt = np.concatenate([np.array(f.y_true, int) for f in self.folds]) if self.folds else np.empty(0, int)
        yp = np.concatenate([np.array(f.y_prob, float) for f in self.folds]) if self.folds else np.empty(0)
        return yt, yp

    def to_dict(self) -> dict:
        return {
            "screening_mode": self.screening_mode,
            "summary": {k: {"mean": v[0], "sd": v[1]} for k, v in self.summary.items()},
            "warnings": self.warnings,
            "folds": [
                {
                    "fold": f.fold,
                    "test_subjects": f.test_subjects,
                    "metrics": f.metrics,
                    "selected_features": f.selected_features,
                    "chosen_rfe_size": f.chosen_rfe_size,
                    "chosen_min_leaf": f.chosen_min_leaf,
                    "n_train": f.n_train,
                    "n_test": f.n_test,
                    "y_true": f.y_true,
                    "y_prob": f.y_prob,
                    "warnings": f.warnings,
                }
                for f in self.folds
            ],
        }


def grouped_folds(subjects: list[str], n_folds: int, seed: int) -> list[list[str]]:
    """Round-robin assignment of shuffled subjects: fold sizes balanced by
    subject count, every subject in exactly one fold."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 0xF01D)))
    order = list(np.array(sorted(subjects))[rng.permutation(len(subjects))])
    folds: list[list[str]] = [[] for _ in range(n_folds)]
    for i, sid in enumerate(order):
        folds[i % n_folds].append(sid)
    return [sorted(f) for f in folds]


def _rows_for(ds: WindowDataset, subjects: set[str], usable: np.ndarray) -> np.ndarray:
    members = np.array([sid in subjects for sid in ds.subject_ids])
    return np.flatnonzero(members & usable)


def nested_cv(
    ds: WindowDataset,
    model_cfg: ForestConfig = ForestConfig(),
    cv_cfg: CvConfig = CvConfig(),
) -> CvReport:
    """Outer folds grouped by subject; inner grouped folds select
    (RFE size x min_leaf) by mean inner MCC; screening runs inside each outer
    training fold; metrics come from untouched outer test folds."""
    labels = binarize_labels(ds.kccq)
    usable = labels != LABEL_EXCLUDED
    usable_subjects = sorted({s for s, u in zip(ds.subject_ids, usable) if u})
    class_counts = np.bincount(labels[usable], minlength=2)
    if len(usable_subjects) < 5 or (class_counts == 0).any():
        raise DegenerateModelError(
            f"need >= 5 subjects and both classes; have {len(usable_subjects)} "
            f"subjects, class counts {class_counts.tolist()}"
        )

    all_subjects = sorted(set(ds.subject_ids))
    outer = grouped_folds(all_subjects, cv_cfg.outer_folds, cv_cfg.seed)
    n_desc = len(ds.descriptor_names)
    global_screen = (
        screen_features(ds, cv_cfg.per_descriptor_n).selected
        if cv_cfg.screening == "global"
        else None
    )

    col_index = {name: i for i, name in enumerate(ds.column_names)}
    report = CvReport(folds=[], summary={}, screening_mode=cv_cfg.screening)

    for k, test_subjects in enumerate(outer):
        fold_warnings: list[str] = []
        test_set = set(test_subjects)
        train_subjects = [s for s in all_subjects if s not in test_set]

        if cv_cfg.screening == "per_fold":
            train_rows_all = np.flatnonzero(
                np.array([sid not in test_set for sid in ds.subject_ids])
            )
            sub_ds = _subset_dataset(ds, train_rows_all)
            selected = screen_features(sub_ds, cv_cfg.per_descriptor_n).selected
        else:
            selected = global_screen

        columns = [col_index[n] for n in selected] + [
            col_index[c] for c in ds.covariate_names
        ]
        col_names = list(selected) + list(ds.covariate_names)
        protected = set(ds.covariate_names)

        train_rows = _rows_for(ds, set(train_subjects), usable)
        test_rows = _rows_for(ds, test_set, usable)
        y_train = labels[train_rows]
        y_test = labels[test_rows]

        nan_metrics = {m: float("nan") for m in METRIC_NAMES}
        if len(test_rows) == 0 or len(np.unique(y_train)) < 2:
            fold_warnings.append("fold skipped: empty test or single-class train")
            report.folds.append(FoldResult(
                k, test_subjects, nan_metrics, [], 0, 0,
                len(train_rows), len(test_rows), [], [], fold_warnings,
            ))
            continue

        X_train_raw = ds.X[np.ix_(train_rows, columns)]
        X_test_raw = ds.X[np.ix_(test_rows, columns)]

        # inner selection
        inner_subjects = sorted({ds.subject_ids[i] for i in train_rows})
        inner = grouped_folds(inner_subjects, cv_cfg.inner_folds,
                              cv_cfg.seed * 31 + k + 1)
        scores: dict[tuple[int, int], list[float]] = {
            (s, ml): [] for s in cv_cfg.rfe_sizes for ml in cv_cfg.min_leaf_grid
        }
        for j, val_subjects in enumerate(inner):
            val_set = set(val_subjects)
            it_rows = np.array([i for i in train_rows
                                if ds.subject_ids[i] not in val_set])
            iv_rows = np.array([i for i in train_rows
                                if ds.subject_ids[i] in val_set])
            if len(it_rows) == 0 or len(iv_rows) == 0:
                continue
            y_it, y_iv = labels[it_rows], labels[iv_rows]
            if len(np.unique(y_it)) < 2:
                fold_warnings.append(f"inner fold {j}: single-class train")
                continue
            imputer = MedianImputer().fit(
                ds.X[np.ix_(it_rows, columns)], it_rows.tolist()
            )
            report.imputation_audit.append({
                "fold": k, "phase": f"inner-{j}",
                "fitted_on": it_rows.tolist(),
                "train_pool": train_rows.tolist(),
            })
            X_it = imputer.transform(ds.X[np.ix_(it_rows, columns)])
            X_iv = imputer.transform(ds.X[np.ix_(iv_rows, columns)])
            seed_inner = cv_cfg.seed * 1009 + k * 17 + j
            subsets = rfe(X_it, y_it, replace(model_cfg, seed=seed_inner),
                          col_names, cv_cfg.rfe_sizes, protected)
            for size in cv_cfg.rfe_sizes:
                sel = [col_names.index(n) for n in subsets[size]]
                for ml in cv_cfg.min_leaf_grid:
                    forest = fit_forest(
                        X_it[:, sel], y_it,
                        replace(model_cfg, min_leaf=ml, seed=seed_inner),
                        subsets[size],
                    )
                    prob = forest.predict_worst_probability(X_iv[:, sel])
                    mcc = confusion_metrics(y_iv, prob, cv_cfg.threshold)["mcc"]
                    scores[(size, ml)].append(mcc)

        def _mean_score(key):
            vals = scores[key]
            return float(np.mean(vals)) if vals else float("-inf")

        best_size, best_ml = min(
            scores,
            key=lambda key: (-_mean_score(key), key[0], key[1]),
        )

        # final model on the full outer training fold
        imputer = MedianImputer().fit(X_train_raw, train_rows.tolist())
        report.imputation_audit.append({
            "fold": k, "phase": "outer",
            "fitted_on": train_rows.tolist(),
            "train_pool": train_rows.tolist(),
        })
        X_train = imputer.transform(X_train_raw)
        X_test = imputer.transform(X_test_raw)
        seed_final = cv_cfg.seed * 1009 + k * 17 + 13
        subsets = rfe(X_train, y_train, replace(model_cfg, seed=seed_final),
                      col_names, cv_cfg.rfe_sizes, protected)
        final_features = subsets[best_size]
        sel = [col_names.index(n) for n in final_features]
        forest = fit_forest(
            X_train[:, sel], y_train,
            replace(model_cfg, min_leaf=best_ml, seed=seed_final),
            final_features,
        )
        prob = forest.predict_worst_probability(X_test[:, sel])

        fold_metrics = confusion_metrics(y_test, prob, cv_cfg.threshold)
        if len(np.unique(y_test)) < 2:
            fold_warnings.append("single-class test fold: AUC/AUPRC undefined")
            fold_metrics["auc"] = float("nan")
            fold_metrics["auprc"] = float("nan")
        else:
            fold_metrics.update({
                key: metrics(y_test, prob, cv_cfg.threshold)[key]
                for key in ("auc", "auprc")
            })

        report.folds.append(FoldResult(
            k, test_subjects, fold_metrics, final_features, best_size, best_ml,
            len(train_rows), len(test_rows),
            y_test.tolist(), [float(p) for p in prob], fold_warnings,
        ))

    for m in METRIC_NAMES:
        vals = np.array([f.metrics.get(m, float("nan")) for f in report.folds])
        finite = vals[np.isfinite(vals)]
        if len(finite) < len(vals):
            report.warnings.append(
                f"{m}: {len(vals) - len(finite)} fold(s) undefined, excluded from mean"
            )
        report.summary[m] = (
            (float(finite.mean()), float(finite.std(ddof=0)))
            if len(finite)
            else (float("nan"), float("nan"))
        )
    return report


def _subset_dataset(ds: WindowDataset, rows: np.ndarray) -> WindowDataset:
    return WindowDataset(
        config=ds.config,
        descriptor_names=ds.descriptor_names,
        covariate_names=ds.covariate_names,
        subject_ids=[ds.subject_ids[i] for i in rows],
        anchor_dates=[ds.anchor_dates[i] for i in rows],
        kccq=ds.kccq[rows],
        present_days=ds.present_days[rows],
        X=ds.X[rows],
    )


def namespace_features(table: FeatureTable, namespaces: tuple[str, ...]) -> list[str]:
    return [n for n in table.feature_names if n.split(".", 1)[0] in namespaces]


@dataclass
class SweepCell:
    feature_set: str
    k_days: int
    summary: dict[str, tuple[float, float]]
    report: CvReport


@dataclass
class SweepReport:
    cells: list[SweepCell]

    def cell(self, feature_set: str, k_days: int) -> SweepCell | None:
        for c in self.cells:
            if c.feature_set == feature_set and c.k_days == k_days:
                return c
        return None


def subset_columns(ds: WindowDataset, namespaces: tuple[str, ...]) -> WindowDataset:
    """Column view of a window dataset restricted to the namespaces of one
    feature set (covariates always kept)."""
    keep = [i for i, n in enumerate(ds.descriptor_names)
            if n.split(".", 1)[0] in namespaces]
    nd = len(ds.descriptor_names)
    cols = keep + [nd + j for j in range(len(ds.covariate_names))]
    return WindowDataset(
        config=ds.config,
        descriptor_names=[ds.descriptor_names[i] for i in keep],
        covariate_names=ds.covariate_names,
        subject_ids=ds.subject_ids,
        anchor_dates=ds.anchor_dates,
        kccq=ds.kccq,
        present_days=ds.present_days,
        X=ds.X[:, cols],
    )


def sweep_cell(
    table: FeatureTable,
    labels,
    profiles,
    feature_set: str,
    k_days: int,
    model_cfg: ForestConfig = ForestConfig(),
    cv_cfg: CvConfig = CvConfig(),
    window_cache: dict | None = None,
) -> SweepCell:
    """One (feature set, K) cell: windows built once per K over the full
    table (cached when a cache dict is supplied), column-sliced to the set's
    namespaces (covariates always appended), then nested CV."""
    if window_cache is not None and k_days in window_cache:
        full = window_cache[k_days]
    else:
        full = build_window_dataset(table, labels, profiles,
                                    WindowConfig(k_days=k_days))
        if window_cache is not None:
            window_cache[k_days] = full
    ds = subset_columns(full, FEATURE_SETS[feature_set])
    cell_seed = cv_cfg.seed * 1_000_003 + sorted(FEATURE_SETS).index(feature_set) * 101 + k_days
    report = nested_cv(ds, model_cfg, replace(cv_cfg, seed=cell_seed))
    return SweepCell(feature_set, k_days, report.summary, report)


def feature_set_sweep(
    table: FeatureTable,
    labels,
    profiles,
    feature_sets: tuple[str, ...] = tuple(sorted(FEATURE_SETS)),
    k_range: tuple[int, ...] = tuple(range(2, 15)),
    model_cfg: ForestConfig = ForestConfig(),
    cv_cfg: CvConfig = CvConfig(),
    pool=None,
) -> SweepReport:
    """Nested CV per (set, K) cell; cells are independent and may run on a
    process pool. Per-cell failures become empty cells, partial sweeps allowed."""
    tasks = [(fs, k) for fs in feature_sets for k in k_range]
    cells: dict[tuple[str, int], SweepCell] = {}
    cache: dict = {}

    def _run(fs, k):
        try:
            return sweep_cell(table, labels, profiles, fs, k, model_cfg, cv_cfg,
                              window_cache=cache)
        except DegenerateModelError as err:
            empty = CvReport(folds=[], summary={m: (float("nan"), float("nan"))
                                                for m in METRIC_NAMES},
                             screening_mode=cv_cfg.screening,
                             warnings=[str(err)])
            return SweepCell(fs, k, empty.summary, empty)

    if pool is None:
        for fs, k in tasks:
            cells[(fs, k)] = _run(fs, k)
    else:
        futures = {pool.submit(_sweep_task, fs, k, model_cfg, cv_cfg): (fs, k)
                   for fs, k in tasks}
        for fut, key in futures.items():
            cells[key] = fut.result()

    return SweepReport(cells=[cells[t] for t in tasks])


_WORKER_STATE: dict = {}


def _sweep_init(table, labels, profiles):
    _WORKER_STATE["table"] = table
    _WORKER_STATE["labels"] = labels
    _WORKER_STATE["profiles"] = profiles
    _WORKER_STATE["cache"] = {}


def _sweep_task(fs: str, k: int, model_cfg: ForestConfig, cv_cfg: CvConfig) -> SweepCell:
    table = _WORKER_STATE["table"]
    labels = _WORKER_STATE["labels"]
    profiles = _WORKER_STATE["profiles"]
    try:
        return sweep_cell(table, labels, profiles, fs, k, model_cfg, cv_cfg,
                          window_cache=_WORKER_STATE["cache"])
    except DegenerateModelError as err:
        empty = CvReport(folds=[], summary={m: (float("nan"), float("nan"))
                                            for m in METRIC_NAMES},
                         screening_mode=cv_cfg.screening, warnings=[str(err)])
        return SweepCell(fs, k, empty.summary, empty)
