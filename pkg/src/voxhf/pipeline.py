"""Extraction pipeline: cohort manifest -> daily feature vectors, plus the
long-format features CSV that every downstream stage reads.

Extraction runs one pass per recording (decode, resample, gate, features) and
is parallel per subject; assembly and CSV output are sorted so results do not
depend on worker scheduling.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import date as Date
from pathlib import Path

import numpy as np

from voxhf.audio import INTERNAL_RATE_HZ, decode_wav, resample
from voxhf.functionals import DailyFeatureVector, daily_vowel_vector
from voxhf.lld import extract_vowel_llds
from voxhf.manifest import (
    CohortManifest,
    RecordingMeta,
    SPEECH_TASKS,
    VOWEL_TASKS,
    flag_covariates,
    gate_recording,
)
from voxhf.preprocess import PreprocessConfig
from voxhf.speech import UnvoicedRecordingError, segment_pauses, speech_vector
from voxhf.windows import FeatureTable


@dataclass
class ExtractResult:
    vectors: list[DailyFeatureVector]
    rejections: list[tuple[str, str]]  # (recording path, reason)
    flags: list

    def table(self) -> FeatureTable:
        return FeatureTable.from_vectors(self.vectors)


def _extract_subject(
    recordings: list[RecordingMeta], cfg: PreprocessConfig
) -> tuple[list[DailyFeatureVector], list[tuple[str, str]]]:
    by_day: dict[Date, dict[str, list[RecordingMeta]]] = {}
    for meta in recordings:
        by_day.setdefault(meta.date, {}).setdefault(meta.task, []).append(meta)

    vectors: list[DailyFeatureVector] = []
    rejections: list[tuple[str, str]] = []
    for date in sorted(by_day):
        tasks = by_day[date]
        sid = recordings[0].subject_id
        for task in VOWEL_TASKS:
            reps = []
            for meta in sorted(tasks.get(task, []), key=lambda m: m.repetition):
                buf = resample(decode_wav(meta.path), INTERNAL_RATE_HZ)
                result, reason = gate_recording(buf, True, cfg)
                if result is None:
                    rejections.append((str(meta.path), reason))
                    continue
                out, mask = result
                reps.append(extract_vowel_llds(out, mask))
            vec = daily_vowel_vector(sid, date, task, reps)
            if vec is not None:
                vectors.append(vec)
        for task in SPEECH_TASKS:
            for meta in tasks.get(task, []):
                buf = resample(decode_wav(meta.path), INTERNAL_RATE_HZ)
                result, reason = gate_recording(buf, False, cfg)
                if result is None:
                    rejections.append((str(meta.path), reason))
                    continue
                out, mask = result
                seg = segment_pauses(out, mask, cfg)
                try:
                    rec = speech_vector(out, mask, seg, cfg)
                except UnvoicedRecordingError:
                    rejections.append((str(meta.path), "unvoiced"))
                    continue
                vectors.append(DailyFeatureVector(sid, date, task, rec.as_dict()))
    return vectors, rejections


def extract_features(
    man: CohortManifest,
    cfg: PreprocessConfig = PreprocessConfig(),
    pool=None,
) -> ExtractResult:
    """All daily feature vectors for a cohort: vowel functionals averaged over
    repetitions, speech features per task, SoC and HFaST streams (outlier-
    flagged covariate values become absent)."""
    by_subject: dict[str, list[RecordingMeta]] = {}
    for meta in man.recordings:
        by_subject.setdefault(meta.subject_id, []).append(meta)

    subjects = sorted(by_subject)
    if pool is None:
        results = [_extract_subject(by_subject[s], cfg) for s in subjects]
    else:
        futures = [pool.submit(_extract_subject, by_subject[s], cfg)
                   for s in subjects]
        results = [f.result() for f in futures]

    vectors: list[DailyFeatureVector] = []
    rejections: list[tuple[str, str]] = []
    for vecs, rejs in results:
        vectors.extend(vecs)
        rejections.extend(rejs)

    flags = flag_covariates(man.covariates)
    flagged = {(f.subject_id, f.date, f.field) for f in flags}
    for cov in man.covariates:
        soc_vals: dict[str, float] = {}
        for name, value in (
            ("weight_kg", cov.weight_kg),
            ("systolic_mmhg", cov.systolic_mmhg),
            ("diastolic_mmhg", cov.diastolic_mmhg),
        ):
            if value is not None and (cov.subject_id, cov.date, name) not in flagged:
                soc_vals[name] = value
        if soc_vals:
            vectors.append(DailyFeatureVector(cov.subject_id, cov.date, "soc",
                                              soc_vals))
        if cov.hfast is not None:
            vectors.append(DailyFeatureVector(cov.subject_id, cov.date, "hfast",
                                              {"score": cov.hfast}))

    vectors.sort(key=lambda v: (v.subject_id, v.date, v.namespace))
    rejections.sort()
    return ExtractResult(vectors, rejections, flags)


def write_features_csv(path: str | Path, vectors: list[DailyFeatureVector]) -> None:
    """Long format: subject_id,date,feature,value (feature carries the
    namespace prefix; NaNs written as empty)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject_id", "date", "feature", "value"])
        for v in sorted(vectors, key=lambda v: (v.subject_id, v.date, v.namespace)):
            for name in sorted(v.values):
                value = v.values[name]
                text = "" if not np.isfinite(value) else f"{value:.9g}"
                writer.writerow(
                    [v.subject_id, v.date.isoformat(), f"{v.namespace}.{name}", text]
                )


def read_features_csv(path: str | Path) -> list[DailyFeatureVector]:
    grouped: dict[tuple[str, Date, str], dict[str, float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            namespace, name = row["feature"].split(".", 1)
            key = (row["subject_id"], Date.fromisoformat(row["date"]), namespace)
            value = float(row["value"]) if row["value"] != "" else float("nan")
            grouped.setdefault(key, {})[name] = value
    return [
        DailyFeatureVector(sid, date, namespace, values)
        for (sid, date, namespace), values in sorted(grouped.items(),
                                                     key=lambda kv: kv[0])
    ]


def write_windows_csv(path: str | Path, ds) -> None:
    """Wide format, one row per WindowSample."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["subject_id", "anchor_date", "kccq", "present_days"]
            + ds.covariate_names + ds.descriptor_names
        )
        nd = len(ds.descriptor_names)
        for i in range(ds.n_samples):
            row = [
                ds.subject_ids[i],
                ds.anchor_dates[i].isoformat(),
                f"{ds.kccq[i]:.9g}",
                str(int(ds.present_days[i])),
            ]
            cov = ds.X[i, nd:]
            desc = ds.X[i, :nd]
            row.extend("" if not np.isfinite(v) else f"{v:.9g}" for v in cov)
            row.extend("" if not np.isfinite(v) else f"{v:.9g}" for v in desc)
            writer.writerow(row)
