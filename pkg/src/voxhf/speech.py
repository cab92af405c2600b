"""Per-recording speech features: timing, articulation, phonation and
respiration measures (25 named fields), one record per speech task.

Timing comes from a pause segmentation (inactive runs of at least 200 ms) and
intensity-peak syllable nuclei. Articulation uses order-12 LPC formants on an
11.025 kHz view. Phonation reuses the pitch/HNR/CPP machinery from the vowel
LLD path. Intensity statistics are computed over speech (non-pause) frames so
appended silence does not dilute them.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np
from scipy.ndimage import uniform_filter1d

from voxhf.audio import AudioBuffer, resample
from voxhf.dsp import frame_matrix, frame_rms, frame_times
from voxhf.lld import _cpp_contour, lpc_formants, pitch_contours
from voxhf.preprocess import PreprocessConfig, VoicedMask

MIN_PAUSE_S = 0.200
NUCLEUS_PROMINENCE_DB = 2.0
NUCLEUS_FLOOR_REL_DB = -6.0
INTENSITY_SMOOTH_S = 0.050
SPEECH_LPC_RATE_HZ = 11025
SPEECH_LPC_ORDER = 12
SLOPE_BAND_HZ = (0.0, 4000.0)
TILT_BAND_HZ = (0.0, 1500.0)
INTENSITY_FLOOR_DB = -120.0


class UnvoicedRecordingError(ValueError):
    """Speech recording with no voiced frames."""


@dataclass(frozen=True)
class PauseSegmentation:
    """(start_s, end_s, kind) segments tiling [0, duration] without overlap;
    kind is 'speech' or 'pause'."""

    segments: tuple[tuple[float, float, str], ...]
    duration_s: float

    @property
    def pauses(self) -> list[tuple[float, float]]:
        return [(a, b) for a, b, k in self.segments if k == "pause"]

    @property
    def phonation_time_s(self) -> float:
        return sum(b - a for a, b, k in self.segments if k == "speech")

    @property
    def pause_time_s(self) -> float:
        return sum(b - a for a, b, k in self.segments if k == "pause")


@dataclass(frozen=True)
class SpeechFeatureRecord:
    speaking_rate: float
    articulation_rate: float
    pause_rate: float
    mean_pause_duration_s: float
    phonation_ratio: float
    f1_mean: float
    f1_std: float
    f2_mean: float
    f2_std: float
    f1_bandwidth_mean: float
    f2_bandwidth_mean: float
    spectral_gravity_mean: float
    spectral_std: float
    spectral_skewness: float
    spectral_kurtosis: float
    hnr_mean_db: float
    spectral_slope_db_per_khz: float
    spectral_tilt_db_per_khz: float
    cpp_mean_db: float
    pitch_mean_hz: float
    pitch_std_semitones: float
    intensity_mean_db: float
    intensity_range_db: float
    voiced_segment_count: float
    total_duration_s: float

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


SPEECH_FEATURE_NAMES = [f.name for f in fields(SpeechFeatureRecord)]
assert len(SPEECH_FEATURE_NAMES) == 25


def _frame_layout(buf: AudioBuffer, cfg: PreprocessConfig):
    rate = buf.sample_rate_hz
    flen, hop = cfg.frame_len(rate), cfg.hop(rate)
    frames = frame_matrix(buf.samples, flen, hop)
    return rate, flen, hop, frames


def segment_pauses(
    buf: AudioBuffer, mask: VoicedMask, cfg: PreprocessConfig = PreprocessConfig()
) -> PauseSegmentation:
    """Frames inactive iff unvoiced AND below the silence RMS threshold;
    inactive runs of >= 200 ms become pauses, shorter runs merge into speech."""
    rate, flen, hop, frames = _frame_layout(buf, cfg)
    nf = frames.shape[0]
    duration = buf.duration_s
    if nf == 0:
        return PauseSegmentation(((0.0, duration, "speech"),) if duration else (),
                                 duration)
    voiced = mask.voiced[:nf]
    rms = frame_rms(frames)
    peak = rms.max()
    quiet = rms < peak * 10 ** (cfg.silence_threshold_db / 20) if peak > 0 else rms <= 0
    inactive = (~voiced) & quiet

    hop_s = hop / rate
    min_frames = int(np.ceil(MIN_PAUSE_S / hop_s))
    segments: list[tuple[float, float, str]] = []
    i = 0
    while i < nf:
        j = i
        while j + 1 < nf and inactive[j + 1] == inactive[i]:
            j += 1
        kind = "pause" if inactive[i] and (j - i + 1) >= min_frames else "speech"
        start = i * hop_s
        end = duration if j == nf - 1 else (j + 1) * hop_s
        if segments and segments[-1][2] == kind:
            segments[-1] = (segments[-1][0], end, kind)
        else:
            segments.append((start, end, kind))
        i = j + 1
    return PauseSegmentation(tuple(segments), duration)


def _intensity_db(frames: np.ndarray) -> np.ndarray:
    rms = frame_rms(frames)
    return 20 * np.log10(np.maximum(rms, 10 ** (INTENSITY_FLOOR_DB / 20)))


def count_syllables(
    buf: AudioBuffer,
    seg: PauseSegmentation,
    mask: VoicedMask,
    cfg: PreprocessConfig = PreprocessConfig(),
) -> int:
    """Intensity-peak nuclei: smoothed dB contour (50 ms window), local maxima
    at least 2 dB above both adjacent minima, above median intensity - 6 dB,
    inside voiced regions."""
    rate, flen, hop, frames = _frame_layout(buf, cfg)
    nf = frames.shape[0]
    if nf == 0:
        return 0
    voiced = mask.voiced[:nf]
    if not voiced.any():
        return 0
    smooth_frames = max(1, int(round(INTENSITY_SMOOTH_S * rate / hop)))
    ints = uniform_filter1d(_intensity_db(frames), smooth_frames, mode="nearest")
    floor = np.median(ints[voiced]) + NUCLEUS_FLOOR_REL_DB

    peaks = [
        i
        for i in range(1, nf - 1)
        if ints[i] >= ints[i - 1] and ints[i] > ints[i + 1]
        and voiced[i] and ints[i] >= floor
    ]
    count = 0
    prev_peak = 0
    for n, i in enumerate(peaks):
        nxt = peaks[n + 1] if n + 1 < len(peaks) else nf - 1
        left_min = ints[prev_peak:i].min() if i > prev_peak else ints[i]
        right_min = ints[i + 1 : nxt + 1].min() if nxt > i else ints[i]
        if (ints[i] - left_min >= NUCLEUS_PROMINENCE_DB
                and ints[i] - right_min >= NUCLEUS_PROMINENCE_DB):
            count += 1
            prev_peak = i
    return count


def speech_vector(
    buf: AudioBuffer,
    mask: VoicedMask,
    seg: PauseSegmentation,
    cfg: PreprocessConfig = PreprocessConfig(),
) -> SpeechFeatureRecord:
    rate, flen, hop, frames = _frame_layout(buf, cfg)
    nf = frames.shape[0]
    voiced = mask.voiced[:nf]
    if nf == 0 or not voiced.any():
        raise UnvoicedRecordingError("unvoiced recording")

    total = buf.duration_s
    phonation = seg.phonation_time_s
    pauses = seg.pauses
    syllables = count_syllables(buf, seg, mask, cfg)

    speaking_rate = syllables / total
    articulation_rate = syllables / phonation if phonation > 0 else float("nan")
    pause_rate = len(pauses) / total
    mean_pause = float(np.mean([b - a for a, b in pauses])) if pauses else 0.0
    phonation_ratio = phonation / total

    # articulation: order-12 LPC on the 11.025 kHz view
    view = resample(buf, SPEECH_LPC_RATE_HZ)
    vlen = cfg.frame_len(SPEECH_LPC_RATE_HZ)
    vhop = cfg.hop(SPEECH_LPC_RATE_HZ)
    vframes = frame_matrix(view.samples, vlen, vhop)
    nvf = min(vframes.shape[0], nf)
    f1, f2, b1, b2 = lpc_formants(
        vframes[:nvf], voiced[:nvf], SPEECH_LPC_RATE_HZ, SPEECH_LPC_ORDER
    )

    def _stat(vals, fn):
        vals = vals[np.isfinite(vals)]
        return float(fn(vals)) if len(vals) else float("nan")

    # long-term average power spectrum over speech frames
    nfft = 1 << int(np.ceil(np.log2(flen)))
    window = np.hamming(flen)
    hop_s = hop / rate
    starts = np.arange(nf) * hop_s
    in_pause = np.zeros(nf, dtype=bool)
    for a, b in pauses:
        in_pause |= (starts >= a - 1e-9) & (starts < b - 1e-9)
    speech_frames = frames[~in_pause] if (~in_pause).any() else frames
    power = (np.abs(np.fft.rfft(speech_frames * window, nfft, axis=1)) ** 2).mean(axis=0)
    bin_freqs = np.arange(len(power)) * rate / nfft
    in_band = bin_freqs <= 8000.0
    p = power[in_band]
    f = bin_freqs[in_band]
    total_p = p.sum()
    if total_p > 0:
        phat = p / total_p
        gravity = float(phat @ f)
        var = float(phat @ (f - gravity) ** 2)
        sstd = float(np.sqrt(var))
        sskew = float(phat @ (f - gravity) ** 3 / var**1.5) if var > 0 else float("nan")
        skurt = float(phat @ (f - gravity) ** 4 / var**2 - 3.0) if var > 0 else float("nan")
    else:
        gravity = sstd = sskew = skurt = float("nan")

    db = 20 * np.log10(np.maximum(np.sqrt(power), 1e-12))

    def _band_slope(lo, hi):
        sel = (bin_freqs >= lo) & (bin_freqs <= hi)
        fk = bin_freqs[sel] / 1000.0
        y = db[sel]
        fc = fk - fk.mean()
        return float(fc @ y / (fc @ fc))

    slope = _band_slope(*SLOPE_BAND_HZ)
    tilt = _band_slope(*TILT_BAND_HZ)

    f0, _, hnr = pitch_contours(frames, voiced, rate)
    cpp = _cpp_contour(buf.samples, rate, voiced, flen, hop, nf)
    f0_valid = f0[np.isfinite(f0)]
    if len(f0_valid) >= 4:
        # burst boundaries leave octave-scale outliers; standard 2.5-sigma rejection
        mu, sd = np.mean(f0_valid), np.std(f0_valid)
        kept = f0_valid[np.abs(f0_valid - mu) <= 2.5 * sd]
        if len(kept) >= 2:
            f0_valid = kept
    pitch_mean = float(np.mean(f0_valid)) if len(f0_valid) else float("nan")
    if len(f0_valid) >= 2:
        semis = 12 * np.log2(f0_valid / np.median(f0_valid))
        pitch_std_semi = float(np.std(semis))
    else:
        pitch_std_semi = float("nan")

    ints = _intensity_db(frames)
    speech_ints = ints[~in_pause] if (~in_pause).any() else ints
    intensity_mean = float(np.mean(speech_ints))
    intensity_range = float(np.percentile(speech_ints, 95) - np.percentile(speech_ints, 5))

    runs = int(np.sum(np.diff(np.concatenate([[0], voiced.astype(int)])) == 1))

    return SpeechFeatureRecord(
        speaking_rate=speaking_rate,
        articulation_rate=articulation_rate,
        pause_rate=pause_rate,
        mean_pause_duration_s=mean_pause,
        phonation_ratio=phonation_ratio,
        f1_mean=_stat(f1, np.mean),
        f1_std=_stat(f1, np.std),
        f2_mean=_stat(f2, np.mean),
        f2_std=_stat(f2, np.std),
        f1_bandwidth_mean=_stat(b1, np.mean),
        f2_bandwidth_mean=_stat(b2, np.mean),
        spectral_gravity_mean=gravity,
        spectral_std=sstd,
        spectral_skewness=sskew,
        spectral_kurtosis=skurt,
        hnr_mean_db=_stat(hnr, np.mean),
        spectral_slope_db_per_khz=slope,
        spectral_tilt_db_per_khz=tilt,
        cpp_mean_db=_stat(cpp, np.mean),
        pitch_mean_hz=pitch_mean,
        pitch_std_semitones=pitch_std_semi,
        intensity_mean_db=intensity_mean,
        intensity_range_db=intensity_range,
        voiced_segment_count=float(runs),
        total_duration_s=total,
    )
