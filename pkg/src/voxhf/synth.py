"""Source-filter synthesis of vowels and burst-train speech, plus the
synthetic longitudinal cohort generator used as the pipeline's measurement
oracle.

Vowels are glottal pulse trains with controlled per-period timing and
amplitude perturbations, filtered through cascaded two-pole resonators. The
perturbation sequences are rescaled so the realized local jitter/shimmer of
the source equals the requested value exactly; recovery tests then measure
only the analyzer's error.

The cohort generator drives every acoustic parameter from a per-subject
AR(1) latent health trajectory through an effect map whose directions mirror
the deterioration markers the pipeline is meant to find: worse health means
higher shimmer (and more day-to-day shimmer variability), higher jitter,
delayed energy peak, lower speaking rate, more pauses, shifted and noisier
formants. Standard-of-care channels couple weakly by default.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, replace
from datetime import date as Date, timedelta
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from voxhf.audio import AudioBuffer, write_wav

SOURCE_TILT_CORNER_HZ = 100.0


def _resonator_coeffs(freq_hz: float, bw_hz: float, rate: int):
    r = np.exp(-np.pi * bw_hz / rate)
    theta = 2 * np.pi * freq_hz / rate
    return [1.0], [1.0, -2 * r * np.cos(theta), r * r]


def _scaled_perturbation(rng: np.random.Generator, n: int, target_frac: float):
    """Gaussian sequence eps with mean|eps_i - eps_{i-1}| / (1 + mean(eps))
    rescaled to hit target_frac exactly (zero when target is zero)."""
    if target_frac <= 0 or n < 2:
        return np.zeros(n)
    eps = rng.standard_normal(n)
    mad = np.mean(np.abs(np.diff(eps)))
    if mad == 0:
        return np.zeros(n)
    scale = target_frac / (mad - target_frac * np.mean(eps))
    return eps * scale


def synthesize_vowel(
    f0_hz: float,
    formants: list[tuple[float, float]],
    jitter_pct: float,
    shimmer_pct: float,
    duration_s: float,
    rate_hz: int = 16000,
    seed: int = 0,
    energy_peak_frac: float | None = None,
    noise_snr_db: float | None = None,
) -> AudioBuffer:
    """Synthesize a sustained vowel.

    energy_peak_frac shapes a triangular amplitude envelope peaking at that
    fraction of the duration (None = flat). noise_snr_db adds white noise at
    the given SNR (None = clean).
    """
    if not 60 <= f0_hz <= 400:
        raise ValueError(f"f0 {f0_hz} Hz outside [60, 400]")
    for freq, _bw in formants:
        if freq >= rate_hz / 2:
            raise ValueError(f"formant {freq} Hz at or above Nyquist")

    rng = np.random.default_rng(seed)
    n = int(round(duration_s * rate_hz))
    t0 = rate_hz / f0_hz
    n_periods = int(np.ceil(n / t0)) + 2

    periods = t0 * (1.0 + _scaled_perturbation(rng, n_periods, jitter_pct / 100))
    amps = 1.0 + _scaled_perturbation(rng, n_periods, shimmer_pct / 100)
    onsets = np.concatenate([[0.0], np.cumsum(periods)])[:-1]

    if energy_peak_frac is not None:
        peak = np.clip(energy_peak_frac, 0.05, 0.95) * n
        pos = np.minimum(onsets, n - 1)
        env = np.where(pos <= peak, 0.25 + 0.75 * pos / peak,
                       0.25 + 0.75 * (n - pos) / (n - peak))
        amps = amps * env

    # First-order fractional placement keeps period timing sub-sample accurate.
    source = np.zeros(n + 2)
    base = np.floor(onsets).astype(int)
    frac = onsets - base
    valid = base < n
    np.add.at(source, base[valid], amps[valid] * (1 - frac[valid]))
    np.add.at(source, base[valid] + 1, amps[valid] * frac[valid])
    source = source[:n]

    # -12 dB/oct source tilt: two cascaded one-pole lowpasses.
    a = np.exp(-2 * np.pi * SOURCE_TILT_CORNER_HZ / rate_hz)
    for _ in range(2):
        source = lfilter([1 - a], [1, -a], source)

    out = source
    for freq, bw in formants:
        b, aa = _resonator_coeffs(freq, bw, rate_hz)
        out = lfilter(b, aa, out)

    if noise_snr_db is not None:
        sig_rms = np.sqrt(np.mean(out**2))
        noise = rng.standard_normal(n)
        noise *= sig_rms * 10 ** (-noise_snr_db / 20) / np.sqrt(np.mean(noise**2))
        out = out + noise

    peak = np.max(np.abs(out))
    if peak > 0:
        out = out * (0.5 / peak)
    return AudioBuffer(out, rate_hz)


@dataclass(frozen=True)
class PausePlan:
    """Pauses to insert after given syllable indices (1-based count offsets)."""

    entries: tuple[tuple[int, float], ...] = ()

    @property
    def total_s(self) -> float:
        return sum(d for _, d in self.entries)


def synthesize_speech(
    syllable_count: int,
    pause_plan: PausePlan,
    f0_contour: np.ndarray | float,
    duration_s: float,
    rate_hz: int = 16000,
    seed: int = 0,
    formant_scatter_hz: float = 0.0,
    noise_snr_db: float | None = None,
) -> AudioBuffer:
    """Concatenated vowel bursts with inter-burst dips as syllable boundaries
    and silences per the pause plan. f0_contour is either a scalar or one
    value per syllable."""
    if syllable_count < 1:
        raise ValueError("need at least one syllable")
    rng = np.random.default_rng(seed)
    f0s = np.atleast_1d(np.asarray(f0_contour, dtype=float))
    if len(f0s) == 1:
        f0s = np.full(syllable_count, f0s[0])
    elif len(f0s) != syllable_count:
        raise ValueError("f0 contour length must match syllable count")

    speech_time = duration_s - pause_plan.total_s
    if speech_time <= 0.1 * duration_s:
        raise ValueError("pause plan leaves too little speech time")
    slot_s = speech_time / syllable_count
    burst_s = 0.80 * slot_s
    gap_s = slot_s - burst_s

    pause_after = dict(pause_plan.entries)
    base_formants = [
        [(700.0, 90.0), (1220.0, 110.0)],
        [(450.0, 90.0), (1700.0, 120.0)],
    ]

    pieces = []
    for i in range(syllable_count):
        forms = [
            (f + formant_scatter_hz * rng.standard_normal(), bw)
            for f, bw in base_formants[i % 2]
        ]
        forms = [(min(max(f, 250.0), rate_hz / 2 - 200.0), bw) for f, bw in forms]
        burst = synthesize_vowel(
            float(np.clip(f0s[i], 60, 400)),
            forms,
            jitter_pct=0.4,
            shimmer_pct=0.8,
            duration_s=burst_s,
            rate_hz=rate_hz,
            seed=int(rng.integers(0, 2**31)),
        ).samples.copy()
        ramp = max(4, int(0.02 * rate_hz))
        ramp = min(ramp, len(burst) // 2)
        win = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
        burst[:ramp] *= win
        burst[-ramp:] *= win[::-1]
        pieces.append(burst)
        if i < syllable_count - 1:
            pieces.append(np.zeros(int(round(gap_s * rate_hz))))
        if (i + 1) in pause_after:
            pieces.append(np.zeros(int(round(pause_after[i + 1] * rate_hz))))

    out = np.concatenate(pieces)
    n = int(round(duration_s * rate_hz))
    if len(out) < n:
        out = np.concatenate([out, np.zeros(n - len(out))])
    out = out[:n]

    if noise_snr_db is not None:
        sig_rms = np.sqrt(np.mean(out**2))
        noise = rng.standard_normal(len(out))
        noise *= sig_rms * 10 ** (-noise_snr_db / 20) / np.sqrt(np.mean(noise**2))
        out = out + noise

    peak = np.max(np.abs(out))
    if peak > 0:
        out = out * (0.5 / peak)
    return AudioBuffer(out, rate_hz)


@dataclass(frozen=True)
class EffectMap:
    """Linear links from the health deficit (baseline 75 minus latent health)
    to daily acoustic and covariate parameters. Zeroing every field yields a
    null cohort."""

    jitter_pct_per_point: float = 0.030
    shimmer_pct_per_point: float = 0.060
    shimmer_noise_per_point: float = 0.030
    f0_hz_per_point: float = 0.05
    formant_shift_frac_per_point: float = 0.0012
    formant_scatter_hz_per_point: float = 0.5
    speaking_rate_per_point: float = 0.022
    pause_prob_per_point: float = 0.007
    energy_peak_delay_per_point: float = 0.011
    soc_weight_kg_per_point: float = 0.030
    soc_systolic_per_point: float = -0.08
    hfast_per_point: float = 0.25

    @classmethod
    def zeroed(cls) -> "EffectMap":
        return cls(**{f: 0.0 for f in cls.__dataclass_fields__})

    def is_null(self) -> bool:
        return all(getattr(self, f) == 0.0 for f in self.__dataclass_fields__)


@dataclass(frozen=True)
class ChannelNoise:
    """Day-to-day noise per planted channel. The defaults keep single-day
    deficit correlations moderate (the realistic regime) rather than letting
    any one channel be a near-noiseless deficit readout."""

    jitter_pct: float = 0.45
    shimmer_pct: float = 0.15
    f0_hz: float = 2.5
    rate_syll_s: float = 0.10
    pause_prob: float = 0.012
    peak_frac: float = 0.065
    weight_kg: float = 0.40
    systolic: float = 6.0
    diastolic: float = 4.0
    hfast: float = 3.0


# planted effect -> daily-feature name fragments that measure it. Each effect
# has one physical mechanism but several legitimate measurements: period
# perturbation shows up in jitter_local and in frame-to-frame f0 variation;
# the energy-envelope peak shift shows up in rms_energy and in the loudness
# proxy (both are envelope trackers).
PLANTED_EFFECT_MARKERS: dict[str, tuple[str, ...]] = {
    "shimmer_variability": ("shimmer_local",),
    "jitter": ("jitter_local", "f0_hz.delta", "f0_hz.mean_abs_delta"),
    "energy_peak_delay": ("rms_energy", "loudness_proxy"),
    "speaking_rate": ("speaking_rate", "articulation_rate"),
    "pauses": ("pause_rate", "phonation_ratio", "mean_pause_duration_s",
               "voiced_segment_count"),
}

VOWEL_FORMANTS = {
    "vowel_a": ((710.0, 80.0), (1240.0, 90.0)),
    "vowel_o": ((460.0, 80.0), (920.0, 90.0)),
    "vowel_i": ((310.0, 80.0), (2250.0, 110.0)),
}
SPEECH_DURATIONS = {"command": 2.2, "text": 3.0, "story": 3.0}


@dataclass(frozen=True)
class SynthConfig:
    n_subjects: int = 32
    days: int = 60
    label_every: int = 14
    seed: int = 0
    health_mean: float = 75.0
    health_persistence: float = 0.9
    health_innovation_sd: float = 6.0
    ramp_fraction: float = 0.25
    ramp_slope_min: float = 0.5
    ramp_slope_max: float = 1.0
    kccq_noise_sd: float = 4.0
    effects: EffectMap = field(default_factory=EffectMap)
    channel_noise: ChannelNoise = field(default_factory=ChannelNoise)
    noise_snr_db: float = 38.0
    vowel_duration_s: float = 2.0
    lead_silence_s: float = 0.15
    sample_rate_hz: int = 16000
    start_date: str = "2024-01-01"

    def start(self) -> Date:
        return Date.fromisoformat(self.start_date)


@dataclass
class GroundTruth:
    config: SynthConfig
    latent_health: dict[str, list[float]]
    planted_effects: dict[str, dict]
    intended_class: dict[str, dict[str, str]]

    def to_json(self) -> str:
        payload = {
            "config": _config_dict(self.config),
            "latent_health": self.latent_health,
            "planted_effects": self.planted_effects,
            "intended_class": self.intended_class,
        }
        return json.dumps(payload, sort_keys=True, indent=1)


def _config_dict(cfg: SynthConfig) -> dict:
    out = asdict(cfg)
    return out


def _rec_seed(cfg: SynthConfig, subj: int, day: int, task_i: int, rep: int) -> int:
    ss = np.random.SeedSequence(entropy=(cfg.seed & 0xFFFFFFFF, subj, day, task_i, rep))
    return int(ss.generate_state(1)[0])


@dataclass
class _SubjectPlan:
    sid: str
    index: int
    sex: str
    age: float
    native: bool
    health: np.ndarray
    f0_base: float
    rate_base: float
    weight_base: float
    systolic_base: float
    diastolic_base: float
    formant_scale: float
    ramp_slope: float


def _plan_subject(cfg: SynthConfig, subj: int) -> _SubjectPlan:
    rng = np.random.default_rng(np.random.SeedSequence(
        entropy=(cfg.seed & 0xFFFFFFFF, subj, 0xBA5E)
    ))
    sid = f"subj{subj:02d}"
    sex = "male" if rng.uniform() < 0.75 else "female"
    age = float(rng.uniform(40, 82))
    native = bool(rng.uniform() < 0.8)

    n_ramp = max(1, int(round(cfg.ramp_fraction * cfg.n_subjects)))
    is_ramp = subj < n_ramp
    ramp_slope = (
        float(rng.uniform(cfg.ramp_slope_min, cfg.ramp_slope_max)) if is_ramp else 0.0
    )
    # the first subject is the designated case-study patient: high start,
    # steep deterministic decline
    mean = cfg.health_mean + (15.0 if subj == 0 else 0.0)
    if subj == 0:
        ramp_slope = cfg.ramp_slope_max

    stationary_sd = cfg.health_innovation_sd / np.sqrt(
        max(1e-9, 1 - cfg.health_persistence**2)
    )
    h = np.empty(cfg.days)
    level = mean + float(rng.normal(0, stationary_sd / 2))
    for d in range(cfg.days):
        level = mean + cfg.health_persistence * (level - mean) + float(
            rng.normal(0, cfg.health_innovation_sd)
        )
        h[d] = level - ramp_slope * d
    h = np.clip(h, 0.0, 100.0)

    f0_base = float(np.clip(
        rng.normal(115, 12) if sex == "male" else rng.normal(200, 18), 80, 320
    ))
    return _SubjectPlan(
        sid=sid, index=subj, sex=sex, age=age, native=native, health=h,
        f0_base=f0_base,
        rate_base=float(rng.normal(4.2, 0.15)),
        weight_base=float(rng.normal(87, 14)),
        systolic_base=float(rng.normal(118, 10)),
        diastolic_base=float(rng.normal(70, 7)),
        formant_scale=float(rng.uniform(0.97, 1.03)),
        ramp_slope=ramp_slope,
    )


def synthesize_subject(cfg: SynthConfig, subj: int, out_root: Path) -> dict:
    """Generate all recordings and daily rows for one subject. Returns the
    CSV rows and latent trajectory; file layout is wavs/{sid}/{date}_{task}_{rep}.wav."""
    plan = _plan_subject(cfg, subj)
    rng = np.random.default_rng(np.random.SeedSequence(
        entropy=(cfg.seed & 0xFFFFFFFF, subj, 0xDA11)
    ))
    e = cfg.effects
    wav_dir = out_root / "wavs" / plan.sid
    wav_dir.mkdir(parents=True, exist_ok=True)

    recording_rows: list[tuple] = []
    covariate_rows: list[tuple] = []
    label_rows: list[tuple] = []
    start = cfg.start()
    lead = np.zeros(int(cfg.lead_silence_s * cfg.sample_rate_hz))

    for day in range(cfg.days):
        date = start + timedelta(days=day)
        deficit = cfg.health_mean - plan.health[day]

        nz = cfg.channel_noise
        jitter = float(np.clip(
            0.8 + e.jitter_pct_per_point * deficit
            + rng.normal(0, nz.jitter_pct), 0.1, 6.0))
        shimmer_sd = nz.shimmer_pct + e.shimmer_noise_per_point * max(deficit, 0.0)
        shimmer = float(np.clip(
            1.2 + e.shimmer_pct_per_point * deficit + rng.normal(0, shimmer_sd),
            0.2, 8.0))
        f0_day = float(np.clip(
            plan.f0_base - e.f0_hz_per_point * deficit
            + rng.normal(0, nz.f0_hz), 75, 380))
        formant_shift = 1.0 + e.formant_shift_frac_per_point * deficit
        scatter = 4.0 + e.formant_scatter_hz_per_point * max(deficit, 0.0)
        rate = float(np.clip(
            plan.rate_base - e.speaking_rate_per_point * deficit
            + rng.normal(0, nz.rate_syll_s), 2.2, 5.2))
        pause_prob = float(np.clip(
            0.04 + e.pause_prob_per_point * deficit
            + rng.normal(0, nz.pause_prob), 0.0, 0.5))
        peak_frac = float(np.clip(
            0.30 + e.energy_peak_delay_per_point * deficit
            + rng.normal(0, nz.peak_frac), 0.05, 0.90))

        for task_i, (task, formants) in enumerate(sorted(VOWEL_FORMANTS.items())):
            forms = [
                (min(f * plan.formant_scale * formant_shift, cfg.sample_rate_hz / 2 - 500),
                 bw)
                for f, bw in formants
            ]
            for rep in (1, 2, 3):
                seed = _rec_seed(cfg, subj, day, task_i, rep)
                buf = synthesize_vowel(
                    float(np.clip(f0_day + rng.normal(0, 1.0), 75, 380)),
                    forms, jitter, shimmer, cfg.vowel_duration_s,
                    cfg.sample_rate_hz, seed,
                    energy_peak_frac=peak_frac,
                    noise_snr_db=cfg.noise_snr_db,
                )
                padded = AudioBuffer(
                    np.concatenate([lead, buf.samples, lead]), cfg.sample_rate_hz
                )
                name = f"{date.isoformat()}_{task}_{rep}.wav"
                write_wav(wav_dir / name, padded)
                recording_rows.append(
                    (plan.sid, date.isoformat(), task, rep,
                     f"wavs/{plan.sid}/{name}")
                )

        for task_i, (task, duration) in enumerate(sorted(SPEECH_DURATIONS.items()),
                                                  start=3):
            seed = _rec_seed(cfg, subj, day, task_i, 1)
            task_rng = np.random.default_rng(seed)
            syllables = max(4, int(round(rate * duration)))
            n_slots = max(1, syllables // 3)
            entries = []
            pause_budget = 0.35 * duration
            for slot in range(1, n_slots + 1):
                if task_rng.uniform() < pause_prob and pause_budget > 0.25:
                    dur = float(task_rng.uniform(0.25, 0.6))
                    dur = min(dur, pause_budget)
                    entries.append((slot * 3, dur))
                    pause_budget -= dur
            f0_contour = f0_day * np.linspace(1.02, 0.97, syllables)
            buf = synthesize_speech(
                syllables, PausePlan(tuple(entries)), f0_contour, duration,
                cfg.sample_rate_hz, seed,
                formant_scatter_hz=scatter,
                noise_snr_db=cfg.noise_snr_db,
            )
            padded = AudioBuffer(
                np.concatenate([lead, buf.samples, lead]), cfg.sample_rate_hz
            )
            name = f"{date.isoformat()}_{task}_1.wav"
            write_wav(wav_dir / name, padded)
            recording_rows.append(
                (plan.sid, date.isoformat(), task, 1, f"wavs/{plan.sid}/{name}")
            )

        covariate_rows.append((
            plan.sid, date.isoformat(),
            f"{plan.weight_base + e.soc_weight_kg_per_point * deficit + rng.normal(0, nz.weight_kg):.2f}",
            f"{plan.systolic_base + e.soc_systolic_per_point * deficit + rng.normal(0, nz.systolic):.1f}",
            f"{plan.diastolic_base + 0.6 * e.soc_systolic_per_point * deficit + rng.normal(0, nz.diastolic):.1f}",
            f"{np.clip(14 + e.hfast_per_point * deficit + rng.normal(0, nz.hfast), 0, 50):.1f}",
        ))

        day_index = day + 1
        if day_index % cfg.label_every == 0:
            kccq = float(np.clip(
                plan.health[day] + rng.normal(0, cfg.kccq_noise_sd), 0, 100
            ))
            label_rows.append((plan.sid, date.isoformat(), f"{kccq:.2f}"))

    return {
        "sid": plan.sid,
        "subject_row": (plan.sid, f"{plan.age:.1f}", plan.sex,
                        "true" if plan.native else "false"),
        "recordings": recording_rows,
        "covariates": covariate_rows,
        "labels": label_rows,
        "health": [float(v) for v in plan.health],
        "ramp_slope": plan.ramp_slope,
    }


def generate_cohort(cfg: SynthConfig, out_dir: str | Path, pool=None) -> GroundTruth:
    """Write the full synthetic cohort (WAVs plus the four CSVs) and the
    ground-truth sidecar. Byte-identical for a fixed (config, seed)."""
    out_root = Path(out_dir)
    out_root.mkdir(parents=True, exist_ok=True)

    if pool is None:
        results = [synthesize_subject(cfg, s, out_root) for s in range(cfg.n_subjects)]
    else:
        futures = [pool.submit(synthesize_subject, cfg, s, out_root)
                   for s in range(cfg.n_subjects)]
        results = [f.result() for f in futures]
    results.sort(key=lambda r: r["sid"])

    def _write_csv(name: str, header: list[str], rows):
        with open(out_root / name, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)

    _write_csv("recordings.csv", ["subject_id", "date", "task", "repetition", "path"],
               [row for r in results for row in r["recordings"]])
    _write_csv("covariates.csv",
               ["subject_id", "date", "weight_kg", "systolic", "diastolic", "hfast"],
               [row for r in results for row in r["covariates"]])
    _write_csv("labels.csv", ["subject_id", "date", "kccq"],
               [row for r in results for row in r["labels"]])
    _write_csv("subjects.csv", ["subject_id", "age", "sex", "native_speaker"],
               [r["subject_row"] for r in results])

    e = cfg.effects
    truth = GroundTruth(
        config=cfg,
        latent_health={r["sid"]: r["health"] for r in results},
        planted_effects={
            name: {
                "markers": list(markers),
                "strength": {
                    "shimmer_variability": e.shimmer_noise_per_point,
                    "jitter": e.jitter_pct_per_point,
                    "energy_peak_delay": e.energy_peak_delay_per_point,
                    "speaking_rate": e.speaking_rate_per_point,
                    "pauses": e.pause_prob_per_point,
                }[name],
            }
            for name, markers in PLANTED_EFFECT_MARKERS.items()
        },
        intended_class={
            r["sid"]: {
                d: ("best" if float(k) > 87.5 else
                    "worst" if float(k) <= 65.6 else "excluded")
                for _, d, k in r["labels"]
            }
            for r in results
        },
    )
    (out_root / "ground_truth.json").write_text(truth.to_json())
    return truth
