"""Command-line pipeline driver.

Subcommands: synth, extract, aggregate, screen, train, evaluate, explain,
compare, case-study, report. Every command is idempotent for identical
inputs and seed, echoes the effective configuration into its output
directory, and exits 0 on success, 1 on data errors (diagnostics on stderr),
2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import shutil
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np
from scipy import stats as spstats

from voxhf.audio import AudioFormatError
from voxhf.config import ConfigError, PipelineConfig, load_config
from voxhf.evaluate import (
    FEATURE_SETS,
    METRIC_NAMES,
    CvReport,
    MedianImputer,
    _sweep_init,
    feature_set_sweep,
    namespace_features,
    nested_cv,
    pr_curve,
    roc_curve,
    sweep_cell,
)
from voxhf.explain import select_background, shap_summary, tree_shap
from voxhf.forest import (
    LABEL_EXCLUDED,
    DegenerateModelError,
    binarize_labels,
    fit_forest,
    rfe,
)
from voxhf.manifest import CohortManifest, ManifestError, load_manifest
from voxhf.pipeline import (
    extract_features,
    read_features_csv,
    write_features_csv,
    write_windows_csv,
)
from voxhf.stats import compare_groups, screen_features
from voxhf.svgplot import PALETTE, Panel, write_beeswarm, write_panels
from voxhf.synth import EffectMap, generate_cohort
from voxhf.windows import FeatureTable, WindowConfig, build_window_dataset


class DataError(RuntimeError):
    """User-facing data problem; exits 1 with context."""


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float):
        return obj if np.isfinite(obj) else None
    if isinstance(obj, (np.floating, np.integer)):
        return _jsonable(obj.item())
    return obj


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(_jsonable(payload), sort_keys=True, indent=1) + "\n")


def _pool(threads: int):
    return ProcessPoolExecutor(max_workers=threads) if threads > 1 else None


def _load_cohort(data_dir: str) -> CohortManifest:
    try:
        return load_manifest(data_dir)
    except ManifestError as err:
        raise DataError(str(err)) from err


def _load_table(features_path: str) -> FeatureTable:
    path = Path(features_path)
    if not path.exists():
        raise DataError(f"features file not found: {path}")
    return FeatureTable.from_vectors(read_features_csv(path))


def _dataset(cfg: PipelineConfig, table, man, k_days, feature_set=None):
    if feature_set is not None:
        feats = namespace_features(table, FEATURE_SETS[feature_set])
        if not feats:
            raise DataError(f"no features for set {feature_set!r}")
        table = table.select(feats)
    wcfg = WindowConfig(k_days=k_days,
                        min_present_days=cfg.window.get("min_present_days"))
    return build_window_dataset(table, man.labels, man.profiles, wcfg)


def cmd_synth(args, cfg: PipelineConfig) -> int:
    out = Path(args.out)
    synth_cfg = cfg.synth
    if args.null_effects:
        synth_cfg = replace(synth_cfg, effects=EffectMap.zeroed())
    pool = _pool(cfg.threads)
    try:
        truth = generate_cohort(synth_cfg, out, pool)
    finally:
        if pool:
            pool.shutdown()
    cfg.echo(out)
    n_labels = sum(len(v) for v in truth.intended_class.values())
    print(f"cohort written to {out}: {synth_cfg.n_subjects} subjects, "
          f"{synth_cfg.days} days, {n_labels} label anchors")
    return 0


def cmd_extract(args, cfg: PipelineConfig) -> int:
    man = _load_cohort(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pool = _pool(cfg.threads)
    try:
        result = extract_features(man, cfg.preprocess, pool)
    finally:
        if pool:
            pool.shutdown()
    write_features_csv(out / "features_daily.csv", result.vectors)
    with open(out / "rejections.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "reason"])
        writer.writerows(result.rejections)
    for path, reason in result.rejections:
        print(f"skipped {path}: {reason}", file=sys.stderr)
    cfg.echo(out)
    print(f"extracted {len(result.vectors)} daily vectors "
          f"({len(result.rejections)} recordings rejected) -> {out}")
    return 0


def cmd_aggregate(args, cfg: PipelineConfig) -> int:
    man = _load_cohort(args.data)
    table = _load_table(args.features)
    ds = _dataset(cfg, table, man, args.k)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_windows_csv(out / f"windows_K{args.k}.csv", ds)
    for line in ds.diagnostics:
        print(f"window dropped: {line}", file=sys.stderr)
    cfg.echo(out)
    print(f"{ds.n_samples} window samples at K={args.k} -> {out}")
    return 0


def cmd_screen(args, cfg: PipelineConfig) -> int:
    man = _load_cohort(args.data)
    table = _load_table(args.features)
    ds = _dataset(cfg, table, man, args.k)
    report = screen_features(ds, cfg.cv.per_descriptor_n)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "rmcorr_report.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "descriptor", "r", "df", "p", "selected"])
        for name in sorted(report.r, key=lambda n: (-abs(report.r[n]), n)):
            base, desc = name.rsplit(".", 1)
            writer.writerow([
                base, desc, f"{report.r[name]:.9g}", report.df[name],
                f"{report.p[name]:.9g}", str(name in report.selected).lower(),
            ])
    (out / "selected_features.txt").write_text(
        "\n".join(report.selected) + "\n"
    )
    cfg.echo(out)
    print(f"screened {len(report.r)} descriptors, selected "
          f"{len(report.selected)} -> {out}")
    return 0


def cmd_train(args, cfg: PipelineConfig) -> int:
    man = _load_cohort(args.data)
    table = _load_table(args.features)
    ds = _dataset(cfg, table, man, args.k, args.set)
    try:
        report = nested_cv(ds, cfg.model, cfg.cv)
    except DegenerateModelError as err:
        raise DataError(str(err)) from err
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "cv_report.json", report.to_dict())
    cfg.echo(out)
    for m in METRIC_NAMES:
        mean, sd = report.summary[m]
        print(f"{m}: {mean:.3f} +/- {sd:.3f}")
    print(f"cv report -> {out / 'cv_report.json'}")
    return 0


def _train_final_model(ds, cfg: PipelineConfig, rfe_size: int = 30):
    """Screen on the full dataset, impute, RFE to the target size, fit."""
    labels = binarize_labels(ds.kccq)
    usable = np.flatnonzero(labels != LABEL_EXCLUDED)
    if len(usable) == 0 or len(np.unique(labels[usable])) < 2:
        raise DataError("no binarizable samples (need KCCQ > 87.5 and <= 65.6)")
    selected = screen_features(ds, cfg.cv.per_descriptor_n).selected
    col_index = {name: i for i, name in enumerate(ds.column_names)}
    columns = [col_index[n] for n in selected] + [
        col_index[c] for c in ds.covariate_names
    ]
    col_names = list(selected) + list(ds.covariate_names)
    imputer = MedianImputer().fit(ds.X[np.ix_(usable, columns)], usable.tolist())
    X = imputer.transform(ds.X[np.ix_(usable, columns)])
    y = labels[usable]
    target = min(rfe_size, len(col_names))
    subsets = rfe(X, y, cfg.model, col_names, (target,),
                  protected=set(ds.covariate_names))
    feats = subsets[target]
    sel = [col_names.index(n) for n in feats]
    forest = fit_forest(X[:, sel], y, cfg.model, feats)
    return forest, feats, imputer, columns, col_names, usable, X[:, sel], y


def cmd_explain(args, cfg: PipelineConfig) -> int:
    man = _load_cohort(args.data)
    table = _load_table(args.features)
    ds = _dataset(cfg, table, man, args.k, args.set)
    forest, feats, _, _, _, usable, X_train, _ = _train_final_model(ds, cfg)
    background = select_background(X_train)
    report = tree_shap(forest, X_train, background)
    summary = shap_summary(report, top_n=args.top)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "shap_values.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject_id", "anchor_date", "base_value"] + feats)
        for row, i in enumerate(usable):
            writer.writerow(
                [ds.subject_ids[i], ds.anchor_dates[i].isoformat(),
                 f"{report.base_value:.9g}"]
                + [f"{v:.9g}" for v in report.phi[row]]
            )
    with open(out / "shap_summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "mean_abs_phi", "direction"])
        for name, value in summary.ranking:
            writer.writerow([name, f"{value:.9g}",
                             f"{summary.direction[name]:.9g}"])
    top = summary.ranking[: args.top]
    feat_index = {name: j for j, name in enumerate(feats)}
    write_beeswarm(
        out / "shap_summary.svg",
        [name for name, _ in top],
        [report.phi[:, feat_index[name]] for name, _ in top],
        [report.X[:, feat_index[name]] for name, _ in top],
        f"Attribution summary ({args.set}, K={args.k}); "
        "dot color: feature value (blue low, red high)",
        "attribution toward P(worst)",
    )
    max_err = float(report.local_accuracy_error().max())
    cfg.echo(out)
    print(f"explained {len(report.phi)} samples; top feature: "
          f"{summary.ranking[0][0]}; local accuracy error {max_err:.2e}")
    return 0


def cmd_compare(args, cfg: PipelineConfig) -> int:
    man = _load_cohort(args.data)
    table = _load_table(args.features)
    ds = _dataset(cfg, table, man, args.k, args.set)
    labels = binarize_labels(ds.kccq)
    best_rows = labels == 0
    worst_rows = labels == 1
    if best_rows.sum() < 3 or worst_rows.sum() < 3:
        raise DataError("need >= 3 samples in both best and worst groups")
    screen = screen_features(ds, cfg.cv.per_descriptor_n)
    ranked = sorted(screen.selected, key=lambda n: (-abs(screen.r[n]), n))
    col_index = {name: i for i, name in enumerate(ds.column_names)}

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for name in ranked[: args.top]:
        vals = ds.X[:, col_index[name]]
        b = vals[best_rows]
        w = vals[worst_rows]
        b, w = b[np.isfinite(b)], w[np.isfinite(w)]
        if len(b) < 3 or len(w) < 3:
            continue
        res = compare_groups(b, w, feature=name)
        rows.append(res)
    with open(out / "group_stats.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "feature", "test", "p", "effect",
            "median_best", "iqr_best", "median_worst", "iqr_worst",
            "n_best", "n_worst",
        ])
        for r in rows:
            writer.writerow([
                r.feature, r.test, f"{r.p:.9g}", f"{r.effect:.9g}",
                f"{r.median_best:.9g}", f"{r.iqr_best:.9g}",
                f"{r.median_worst:.9g}", f"{r.iqr_worst:.9g}",
                r.n_best, r.n_worst,
            ])
    cfg.echo(out)
    print(f"compared {len(rows)} features -> {out / 'group_stats.csv'}")
    return 0


def cmd_evaluate(args, cfg: PipelineConfig) -> int:
    man = _load_cohort(args.data)
    table = _load_table(args.features)
    sets = tuple(args.sets.split(","))
    for s in sets:
        if s not in FEATURE_SETS:
            raise DataError(f"unknown feature set {s!r}; "
                            f"choose from {sorted(FEATURE_SETS)}")
    k_range = tuple(range(args.k_min, args.k_max + 1))

    pool = None
    if cfg.threads > 1:
        pool = ProcessPoolExecutor(
            max_workers=cfg.threads,
            initializer=_sweep_init,
            initargs=(table, man.labels, man.profiles),
        )
    try:
        sweep = feature_set_sweep(
            table, man.labels, man.profiles, sets, k_range,
            cfg.model, cfg.cv, pool,
        )
    finally:
        if pool:
            pool.shutdown()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["feature_set", "k_days"]
        for m in METRIC_NAMES:
            header += [f"{m}_mean", f"{m}_sd"]
        writer.writerow(header)
        for cell in sweep.cells:
            row = [cell.feature_set, cell.k_days]
            for m in METRIC_NAMES:
                mean, sd = cell.summary.get(m, (float("nan"), float("nan")))
                row += [
                    "" if not np.isfinite(mean) else f"{mean:.9g}",
                    "" if not np.isfinite(sd) else f"{sd:.9g}",
                ]
            writer.writerow(row)

    panels = []
    for m in ("sensitivity", "specificity", "f1", "mcc"):
        panel = Panel(m, "lookback window K (days)", m,
                      ylim=(-0.5, 1.0) if m == "mcc" else (0.0, 1.0))
        for si, s in enumerate(sets):
            ks, vals = [], []
            for cell in sweep.cells:
                if cell.feature_set == s and np.isfinite(cell.summary[m][0]):
                    ks.append(cell.k_days)
                    vals.append(cell.summary[m][0])
            panel.add(s, ks, vals, PALETTE[si % len(PALETTE)])
        panels.append(panel)
    write_panels(out / "sweep.svg", panels, columns=2)

    roc_panel = Panel("ROC", "false positive rate", "true positive rate",
                      ylim=(0.0, 1.0))
    roc_panel.add("chance", [0.0, 1.0], [0.0, 1.0], "#bbbbbb")
    pr_panel = Panel("Precision-Recall", "recall", "precision", ylim=(0.0, 1.0))
    for si, s in enumerate(sets):
        cell = sweep.cell(s, args.roc_k)
        if cell is None or not cell.report.folds:
            continue
        yt, yp = cell.report.pooled_predictions()
        if len(np.unique(yt)) < 2:
            continue
        fpr, tpr = roc_curve(yt, yp)
        rec, prec = pr_curve(yt, yp)
        roc_panel.add(s, fpr, tpr, PALETTE[si % len(PALETTE)])
        pr_panel.add(s, rec, prec, PALETTE[si % len(PALETTE)])
    write_panels(out / "roc_pr.svg", [roc_panel, pr_panel], columns=2)

    _write_json(out / "evaluate_report.json", {
        "sets": list(sets),
        "k_range": list(k_range),
        "roc_k": args.roc_k,
        "cells": [
            {
                "feature_set": c.feature_set,
                "k_days": c.k_days,
                "summary": {m: {"mean": c.summary[m][0], "sd": c.summary[m][1]}
                            for m in METRIC_NAMES if m in c.summary},
                "warnings": c.report.warnings,
            }
            for c in sweep.cells
        ],
    })
    cfg.echo(out)
    print(f"sweep of {len(sweep.cells)} cells -> {out}")
    return 0


def cmd_case_study(args, cfg: PipelineConfig) -> int:
    man = _load_cohort(args.data)
    table = _load_table(args.features)
    holdout = args.holdout
    if holdout not in man.profiles:
        raise DataError(f"unknown subject {holdout!r}")

    feats = namespace_features(table, FEATURE_SETS[args.set])
    sub_table = table.select(feats)
    wcfg = WindowConfig(k_days=args.k,
                        min_present_days=cfg.window.get("min_present_days"))
    train_labels = [r for r in man.labels if r.subject_id != holdout]
    hold_labels = [r for r in man.labels if r.subject_id == holdout]
    if not hold_labels:
        raise DataError(f"subject {holdout!r} has no labels")
    train_ds = build_window_dataset(sub_table, train_labels, man.profiles, wcfg)
    hold_ds = build_window_dataset(sub_table, hold_labels, man.profiles, wcfg)
    if hold_ds.n_samples == 0:
        raise DataError(f"subject {holdout!r} has no usable windows at K={args.k}")

    forest, feat_names, imputer, columns, col_names, _, _, _ = _train_final_model(
        train_ds, cfg
    )
    hold_cols = [hold_ds.column_names.index(n) for n in col_names]
    X_hold = imputer.transform(hold_ds.X[:, hold_cols])
    sel = [col_names.index(n) for n in feat_names]
    probs = forest.predict_worst_probability(X_hold[:, sel])

    rho = float("nan")
    if len(probs) >= 3 and np.ptp(hold_ds.kccq) > 0 and np.ptp(probs) > 0:
        rho = float(spstats.spearmanr(probs, hold_ds.kccq).statistic)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "case_study.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject_id", "anchor_date", "kccq", "p_worst"])
        for i in range(hold_ds.n_samples):
            writer.writerow([
                holdout, hold_ds.anchor_dates[i].isoformat(),
                f"{hold_ds.kccq[i]:.9g}", f"{probs[i]:.9g}",
            ])
    day0 = hold_ds.anchor_dates[0]
    xs = [(d - day0).days for d in hold_ds.anchor_dates]
    panel = Panel(
        f"Held-out subject {holdout} (set={args.set}, K={args.k}, "
        f"spearman={rho:.2f})",
        "days since first anchor", "deterioration scale", ylim=(0.0, 1.0),
    )
    panel.add("predicted P(worst)", xs, probs.tolist(), PALETTE[0])
    panel.add("KCCQ (reversed, scaled)", xs,
              [(100 - k) / 100 for k in hold_ds.kccq], PALETTE[1])
    write_panels(out / "case_study.svg", [panel], columns=1)
    _write_json(out / "case_study.json", {
        "subject": holdout, "set": args.set, "k_days": args.k,
        "spearman_p_worst_vs_kccq": rho,
        "anchors": [d.isoformat() for d in hold_ds.anchor_dates],
        "kccq": hold_ds.kccq.tolist(),
        "p_worst": probs.tolist(),
    })
    cfg.echo(out)
    print(f"case study for {holdout}: spearman(P(worst), KCCQ) = {rho:.3f} -> {out}")
    return 0


REPORT_ARTIFACTS = (
    "features_daily.csv", "rejections.csv", "rmcorr_report.csv",
    "selected_features.txt", "cv_report.json", "sweep.csv", "sweep.svg",
    "roc_pr.svg", "evaluate_report.json", "shap_values.csv",
    "shap_summary.csv", "shap_summary.svg", "group_stats.csv",
    "case_study.csv", "case_study.svg", "case_study.json",
)


def cmd_report(args, cfg: PipelineConfig) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    copied = []
    for src_dir in args.sources:
        src = Path(src_dir)
        if not src.is_dir():
            raise DataError(f"not a directory: {src}")
        for name in REPORT_ARTIFACTS:
            path = src / name
            if path.exists():
                shutil.copyfile(path, out / name)
                copied.append(name)
        for k_file in sorted(src.glob("windows_K*.csv")):
            shutil.copyfile(k_file, out / k_file.name)
            copied.append(k_file.name)
    cfg.echo(out)
    print(f"bundled {len(copied)} artifacts -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline config JSON")
    common.add_argument("--seed", type=int, help="master seed override")
    common.add_argument("--threads", type=int,
                        help="worker processes (fallback: $VOXHF_THREADS)")
    parser = argparse.ArgumentParser(
        prog="voxhf",
        description="Longitudinal voice-biomarker pipeline: synthesize a "
        "cohort, extract acoustic features, aggregate lookback windows, "
        "screen, train, evaluate, explain.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_parser(name, **kwargs):
        return sub.add_parser(name, parents=[common], **kwargs)

    p = add_parser("synth", help="generate a synthetic cohort")
    p.add_argument("--out", required=True)
    p.add_argument("--null-effects", action="store_true",
                   help="zero the health-to-acoustics effect map")
    p.add_argument("--subjects", type=int, help="override synth.n_subjects")
    p.add_argument("--days", type=int, help="override synth.days")
    p.add_argument("--label-every", type=int, help="override synth.label_every")

    p = add_parser("extract", help="WAVs -> daily features")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)

    p = add_parser("aggregate", help="daily features -> K-day windows")
    p.add_argument("--data", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out", required=True)

    p = add_parser("screen", help="repeated-measures correlation screening")
    p.add_argument("--data", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--k", type=int, default=7)
    p.add_argument("--out", required=True)

    p = add_parser("train", help="nested CV for one (set, K) cell")
    p.add_argument("--data", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--set", default="voice", choices=sorted(FEATURE_SETS))
    p.add_argument("--k", type=int, default=9)
    p.add_argument("--out", required=True)

    p = add_parser("evaluate", help="feature-set x K sweep with figures")
    p.add_argument("--data", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--sets", default=",".join(sorted(FEATURE_SETS)))
    p.add_argument("--k-min", type=int, default=2)
    p.add_argument("--k-max", type=int, default=14)
    p.add_argument("--roc-k", type=int, default=9)
    p.add_argument("--out", required=True)

    p = add_parser("explain", help="attribution report for one cell")
    p.add_argument("--data", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--set", default="voice", choices=sorted(FEATURE_SETS))
    p.add_argument("--k", type=int, default=9)
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--out", required=True)

    p = add_parser("compare", help="best/worst group statistics")
    p.add_argument("--data", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--set", default="voice", choices=sorted(FEATURE_SETS))
    p.add_argument("--k", type=int, default=9)
    p.add_argument("--top", type=int, default=25)
    p.add_argument("--out", required=True)

    p = add_parser("case-study", help="hold out one subject, predict their "
                       "deterioration trajectory")
    p.add_argument("--data", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--holdout", required=True)
    p.add_argument("--set", default="voice", choices=sorted(FEATURE_SETS))
    p.add_argument("--k", type=int, default=9)
    p.add_argument("--out", required=True)

    p = add_parser("report", help="bundle artifacts + config into one dir")
    p.add_argument("--out", required=True)
    p.add_argument("sources", nargs="+", help="directories with artifacts")
    return parser


COMMANDS = {
    "synth": cmd_synth,
    "extract": cmd_extract,
    "aggregate": cmd_aggregate,
    "screen": cmd_screen,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "explain": cmd_explain,
    "compare": cmd_compare,
    "case-study": cmd_case_study,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides: dict = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.threads is not None:
        overrides["threads"] = args.threads
    if args.command == "synth":
        if args.subjects is not None:
            overrides["synth.n_subjects"] = args.subjects
        if args.days is not None:
            overrides["synth.days"] = args.days
        if args.label_every is not None:
            overrides["synth.label_every"] = args.label_every
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    try:
        return COMMANDS[args.command](args, cfg)
    except (DataError, ManifestError, AudioFormatError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
