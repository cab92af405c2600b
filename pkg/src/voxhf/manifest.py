"""Cohort ingestion: recordings, daily covariates, labels and subject
profiles from four CSV files, with invariant validation and outlier
screening.

Structural problems (missing files, duplicate keys, malformed dates, missing
profiles) are hard errors. Value-range violations are collected as
diagnostics and the offending rows excluded from the validated collections,
never silently dropped.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from datetime import date as Date
from pathlib import Path

import numpy as np

from voxhf.audio import AudioBuffer, INTERNAL_RATE_HZ, decode_wav, resample, wav_info
from voxhf.preprocess import (
    DurationError,
    PreprocessConfig,
    VoicedMask,
    preprocess_speech,
    preprocess_vowel,
)

VOWEL_TASKS = ("vowel_a", "vowel_o", "vowel_i")
SPEECH_TASKS = ("command", "text", "story")
ALL_TASKS = VOWEL_TASKS + SPEECH_TASKS
MAX_VOWEL_REPETITIONS = 3

CLIPPING_LEVEL = 0.999
MAX_CLIPPING_FRACTION = 0.01
MIN_VOICED_FRACTION = 0.10
MAX_WEIGHT_CHANGE_KG_PER_DAY = 5.0
SYSTOLIC_RANGE = (60.0, 250.0)
DIASTOLIC_RANGE = (30.0, 150.0)


class ManifestError(ValueError):
    """Structural manifest problem (hard error)."""


@dataclass(frozen=True)
class RecordingMeta:
    subject_id: str
    date: Date
    task: str
    repetition: int
    path: Path
    duration_s: float
    sample_rate_hz: int

    def __post_init__(self):
        if self.task not in ALL_TASKS:
            raise ManifestError(f"unknown task {self.task!r}")
        if self.repetition < 1:
            raise ManifestError(f"repetition {self.repetition} < 1")

    @property
    def key(self):
        return (self.subject_id, self.date, self.task, self.repetition)

    @property
    def is_vowel(self) -> bool:
        return self.task in VOWEL_TASKS


@dataclass(frozen=True)
class DailyCovariates:
    subject_id: str
    date: Date
    weight_kg: float | None = None
    systolic_mmhg: float | None = None
    diastolic_mmhg: float | None = None
    hfast: float | None = None


@dataclass(frozen=True)
class LabelRecord:
    subject_id: str
    date: Date
    kccq: float


@dataclass(frozen=True)
class SubjectProfile:
    subject_id: str
    age_years: float
    sex: str
    native_speaker: bool

    def __post_init__(self):
        if self.sex not in ("male", "female"):
            raise ManifestError(f"sex must be male/female, got {self.sex!r}")


@dataclass(frozen=True)
class Diagnostic:
    source: str
    row: int
    message: str


@dataclass
class CohortManifest:
    root: Path
    recordings: list[RecordingMeta] = field(default_factory=list)
    covariates: list[DailyCovariates] = field(default_factory=list)
    labels: list[LabelRecord] = field(default_factory=list)
    profiles: dict[str, SubjectProfile] = field(default_factory=dict)
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def subjects(self) -> list[str]:
        return sorted({r.subject_id for r in self.recordings})


def _parse_date(value: str, source: str, row: int) -> Date:
    try:
        return Date.fromisoformat(value.strip())
    except ValueError as err:
        raise ManifestError(f"{source} row {row}: malformed date {value!r}") from err


def _read_rows(path: Path, required: list[str]) -> list[dict]:
    if not path.exists():
        raise ManifestError(f"missing file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != required:
            raise ManifestError(
                f"{path.name}: expected header {','.join(required)}, "
                f"got {','.join(reader.fieldnames or [])}"
            )
        return list(reader)


def _opt_float(value: str | None) -> float | None:
    if value is None or value.strip() == "":
        return None
    return float(value)


def load_manifest(
    root_path: str | Path, manifest_file: str | Path = "recordings.csv"
) -> CohortManifest:
    """Load and validate the four cohort CSVs rooted at root_path."""
    root = Path(root_path)
    man = CohortManifest(root=root)
    rec_path = root / manifest_file

    seen: dict[tuple, int] = {}
    for i, row in enumerate(_read_rows(
        rec_path, ["subject_id", "date", "task", "repetition", "path"]
    ), start=2):
        date = _parse_date(row["date"], rec_path.name, i)
        try:
            rep = int(row["repetition"])
        except ValueError as err:
            raise ManifestError(
                f"{rec_path.name} row {i}: bad repetition {row['repetition']!r}"
            ) from err
        wav = root / row["path"]
        if not wav.exists():
            raise ManifestError(f"{rec_path.name} row {i}: missing file: {wav}")
        duration, rate = wav_info(wav)
        meta = RecordingMeta(row["subject_id"], date, row["task"], rep, wav,
                             duration, rate)
        if meta.key in seen:
            raise ManifestError(
                f"{rec_path.name}: duplicate key {meta.key} in rows "
                f"{seen[meta.key]} and {i}"
            )
        seen[meta.key] = i
        if meta.is_vowel and rep > MAX_VOWEL_REPETITIONS:
            man.diagnostics.append(Diagnostic(
                rec_path.name, i, f"vowel repetition {rep} exceeds 3"))
            continue
        if duration <= 0:
            man.diagnostics.append(Diagnostic(rec_path.name, i, "empty recording"))
            continue
        man.recordings.append(meta)

    cov_path = root / "covariates.csv"
    if cov_path.exists():
        seen_cov: dict[tuple, int] = {}
        for i, row in enumerate(_read_rows(
            cov_path,
            ["subject_id", "date", "weight_kg", "systolic", "diastolic", "hfast"],
        ), start=2):
            date = _parse_date(row["date"], cov_path.name, i)
            key = (row["subject_id"], date)
            if key in seen_cov:
                raise ManifestError(
                    f"{cov_path.name}: duplicate (subject,date) {key} in rows "
                    f"{seen_cov[key]} and {i}"
                )
            seen_cov[key] = i
            weight = _opt_float(row["weight_kg"])
            if weight is not None and weight <= 0:
                man.diagnostics.append(Diagnostic(cov_path.name, i,
                                                  f"weight {weight} <= 0"))
                weight = None
            man.covariates.append(DailyCovariates(
                row["subject_id"], date, weight,
                _opt_float(row["systolic"]), _opt_float(row["diastolic"]),
                _opt_float(row["hfast"]),
            ))

    lab_path = root / "labels.csv"
    if lab_path.exists():
        for i, row in enumerate(_read_rows(
            lab_path, ["subject_id", "date", "kccq"]
        ), start=2):
            date = _parse_date(row["date"], lab_path.name, i)
            kccq = float(row["kccq"])
            if not 0 <= kccq <= 100:
                man.diagnostics.append(Diagnostic(
                    lab_path.name, i, f"kccq {kccq} outside [0, 100]"))
                continue
            man.labels.append(LabelRecord(row["subject_id"], date, kccq))

    sub_path = root / "subjects.csv"
    if sub_path.exists():
        for i, row in enumerate(_read_rows(
            sub_path, ["subject_id", "age", "sex", "native_speaker"]
        ), start=2):
            sid = row["subject_id"]
            if sid in man.profiles:
                raise ManifestError(f"{sub_path.name}: duplicate profile for {sid}")
            age = float(row["age"])
            if age <= 0:
                man.diagnostics.append(Diagnostic(sub_path.name, i,
                                                  f"age {age} <= 0"))
                continue
            man.profiles[sid] = SubjectProfile(
                sid, age, row["sex"].strip().lower(),
                row["native_speaker"].strip().lower() in ("1", "true", "yes"),
            )

    missing = {r.subject_id for r in man.recordings} - set(man.profiles)
    if missing:
        raise ManifestError(f"recordings reference subjects without profiles: "
                            f"{sorted(missing)}")
    return man


@dataclass(frozen=True)
class RejectedRecording:
    meta: RecordingMeta
    reason: str


@dataclass(frozen=True)
class CovariateFlag:
    subject_id: str
    date: Date
    field: str
    message: str


def gate_recording(
    buf: AudioBuffer, is_vowel: bool, cfg: PreprocessConfig
) -> tuple[tuple[AudioBuffer, VoicedMask] | None, str | None]:
    """Apply the retention gates and preprocessing chain in one pass.
    Returns ((preprocessed, mask), None) or (None, reason)."""
    clipped = float(np.mean(np.abs(buf.samples) >= CLIPPING_LEVEL)) if len(buf) else 0.0
    if clipped > MAX_CLIPPING_FRACTION:
        return None, f"clipping>{MAX_CLIPPING_FRACTION:.0%}"
    try:
        if is_vowel:
            out, mask = preprocess_vowel(buf, cfg)
        else:
            out, mask = preprocess_speech(buf, cfg)
    except DurationError:
        return None, "duration<1s"
    if is_vowel and mask.voiced_fraction < MIN_VOICED_FRACTION:
        return None, f"voiced_fraction<{MIN_VOICED_FRACTION:.0%}"
    return (out, mask), None


def flag_covariates(covariates: list[DailyCovariates]) -> list[CovariateFlag]:
    """Per-record covariate outlier flags: day-on-day weight jumps and blood
    pressure outside physiological bounds."""
    flags: list[CovariateFlag] = []
    by_subject: dict[str, list[DailyCovariates]] = {}
    for c in covariates:
        by_subject.setdefault(c.subject_id, []).append(c)
    for sid, recs in sorted(by_subject.items()):
        recs = sorted(recs, key=lambda c: c.date)
        prev_weight: tuple[Date, float] | None = None
        for c in recs:
            if c.weight_kg is not None:
                if prev_weight is not None:
                    days = max(1, (c.date - prev_weight[0]).days)
                    rate = abs(c.weight_kg - prev_weight[1]) / days
                    if rate > MAX_WEIGHT_CHANGE_KG_PER_DAY:
                        flags.append(CovariateFlag(
                            sid, c.date, "weight_kg",
                            f"change {rate:.1f} kg/day exceeds "
                            f"{MAX_WEIGHT_CHANGE_KG_PER_DAY}"))
                prev_weight = (c.date, c.weight_kg)
            if c.systolic_mmhg is not None and not (
                SYSTOLIC_RANGE[0] <= c.systolic_mmhg <= SYSTOLIC_RANGE[1]
            ):
                flags.append(CovariateFlag(sid, c.date, "systolic_mmhg",
                                           f"{c.systolic_mmhg} outside "
                                           f"{SYSTOLIC_RANGE}"))
            if c.diastolic_mmhg is not None and not (
                DIASTOLIC_RANGE[0] <= c.diastolic_mmhg <= DIASTOLIC_RANGE[1]
            ):
                flags.append(CovariateFlag(sid, c.date, "diastolic_mmhg",
                                           f"{c.diastolic_mmhg} outside "
                                           f"{DIASTOLIC_RANGE}"))
    return flags


def screen_outliers(
    man: CohortManifest, cfg: PreprocessConfig = PreprocessConfig()
) -> tuple[CohortManifest, list[RejectedRecording], list[CovariateFlag]]:
    """Decode every recording and apply the retention gates; rejection is
    data, not failure. Idempotent: re-screening a screened manifest keeps it
    unchanged."""
    kept: list[RecordingMeta] = []
    rejected: list[RejectedRecording] = []
    for meta in man.recordings:
        buf = resample(decode_wav(meta.path), INTERNAL_RATE_HZ)
        result, reason = gate_recording(buf, meta.is_vowel, cfg)
        if result is None:
            rejected.append(RejectedRecording(meta, reason))
        else:
            kept.append(meta)
    flags = flag_covariates(man.covariates)
    out = CohortManifest(
        root=man.root,
        recordings=kept,
        covariates=list(man.covariates),
        labels=list(man.labels),
        profiles=dict(man.profiles),
        diagnostics=list(man.diagnostics),
    )
    return out, rejected, flags
