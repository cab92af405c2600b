"""Recording preprocessing: silence trimming, band filtering, pitch-based
voice activity detection and min-max normalization.

Two chains are exposed. Vowels get the full treatment (trim, 70 Hz high-pass,
3 kHz low-pass, min-max normalize, VAD); speech keeps its band up to 8 kHz
and its absolute intensity dynamics, so it is only trimmed, high-passed and
VAD-masked.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.signal import butter, sosfilt

from voxhf.audio import AudioBuffer
from voxhf.dsp import frame_matrix, frame_rms, median3_bool, normalized_autocorr

VAD_PITCH_MIN_HZ = 60.0
VAD_PITCH_MAX_HZ = 500.0
VAD_AUTOCORR_THRESHOLD = 0.45


class DurationError(ValueError):
    """Recording too short after trimming; carries the measured duration."""

    def __init__(self, duration_s: float, min_duration_s: float):
        self.duration_s = duration_s
        self.min_duration_s = min_duration_s
        super().__init__(
            f"recording is {duration_s:.3f}s after trimming "
            f"(minimum {min_duration_s:.3f}s)"
        )


@dataclass(frozen=True)
class PreprocessConfig:
    silence_threshold_db: float = -40.0
    highpass_hz: float = 70.0
    vowel_lowpass_hz: float = 3000.0
    min_duration_s: float = 1.0
    frame_ms: float = 25.0
    hop_ms: float = 10.0

    def __post_init__(self):
        if not 0 < self.hop_ms <= self.frame_ms:
            raise ValueError("require 0 < hop_ms <= frame_ms")
        if not self.highpass_hz < self.vowel_lowpass_hz:
            raise ValueError("require highpass_hz < vowel_lowpass_hz")

    def frame_len(self, rate: int) -> int:
        return int(round(self.frame_ms / 1000 * rate))

    def hop(self, rate: int) -> int:
        return int(round(self.hop_ms / 1000 * rate))


@dataclass(frozen=True)
class VoicedMask:
    """Per-frame voiced flags on the standard framing grid. The normalized
    autocorrelation matrix computed for the decision is cached so the pitch
    path does not recompute it."""

    voiced: np.ndarray
    frame_ms: float
    hop_ms: float
    ncc: np.ndarray | None = field(default=None, compare=False, repr=False)
    ncc_lag_min: int = field(default=0, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "voiced", np.asarray(self.voiced, dtype=bool))

    def __len__(self) -> int:
        return len(self.voiced)

    @property
    def voiced_fraction(self) -> float:
        if len(self.voiced) == 0:
            return 0.0
        return float(np.mean(self.voiced))


def trim_silence(buf: AudioBuffer, cfg: PreprocessConfig) -> AudioBuffer:
    """Drop leading/trailing frames whose RMS falls below the threshold
    relative to the loudest frame. Output is a contiguous slice of the input."""
    rate = buf.sample_rate_hz
    flen, hop = cfg.frame_len(rate), cfg.hop(rate)
    frames = frame_matrix(buf.samples, flen, hop)
    if frames.shape[0] == 0:
        return AudioBuffer(np.empty(0), rate)
    rms = frame_rms(frames)
    peak = rms.max()
    if peak == 0:
        return AudioBuffer(np.empty(0), rate)
    keep = rms >= peak * 10 ** (cfg.silence_threshold_db / 20)
    if not keep.any():
        return AudioBuffer(np.empty(0), rate)
    first = int(np.argmax(keep))
    last = len(keep) - 1 - int(np.argmax(keep[::-1]))
    start = first * hop
    # The tail not covered by any complete frame belongs to no removable
    # frame, so it stays whenever the final frame stays.
    stop = len(buf) if last == len(keep) - 1 else last * hop + flen
    if first == 0 and stop == len(buf):
        return buf
    return AudioBuffer(buf.samples[start:stop], rate)


@lru_cache(maxsize=32)
def _butter_sos(fc_hz: float, rate: int, btype: str) -> np.ndarray:
    nyq = rate / 2
    if not 0 < fc_hz < nyq:
        raise ValueError(f"cutoff {fc_hz} Hz outside (0, {nyq}) for rate {rate}")
    return butter(4, fc_hz / nyq, btype=btype, output="sos")


def _zero_phase(sos: np.ndarray, x: np.ndarray) -> np.ndarray:
    # Literally filter(reverse(filter(reverse(x)))) with zero initial state;
    # the zero-phase property test compares against this expression verbatim.
    return sosfilt(sos, sosfilt(sos, x[::-1])[::-1])


def highpass(buf: AudioBuffer, fc_hz: float) -> AudioBuffer:
    sos = _butter_sos(fc_hz, buf.sample_rate_hz, "highpass")
    return AudioBuffer(_zero_phase(sos, buf.samples), buf.sample_rate_hz)


def lowpass(buf: AudioBuffer, fc_hz: float) -> AudioBuffer:
    sos = _butter_sos(fc_hz, buf.sample_rate_hz, "lowpass")
    return AudioBuffer(_zero_phase(sos, buf.samples), buf.sample_rate_hz)


def minmax_normalize(buf: AudioBuffer) -> AudioBuffer:
    """Affine map of the sample range onto [-1, +1]; constant input maps to
    all zeros (documented degenerate case)."""
    if len(buf) == 0:
        return buf
    lo, hi = buf.samples.min(), buf.samples.max()
    if hi == lo:
        return AudioBuffer(np.zeros(len(buf)), buf.sample_rate_hz)
    return AudioBuffer((buf.samples - lo) / (hi - lo) * 2 - 1, buf.sample_rate_hz)


def detect_voiced(buf: AudioBuffer, cfg: PreprocessConfig) -> VoicedMask:
    """Frame is voiced iff its normalized autocorrelation peak in the pitch
    lag range reaches 0.45 and its RMS clears the silence threshold. A width-3
    median filter removes single-frame flips."""
    rate = buf.sample_rate_hz
    flen, hop = cfg.frame_len(rate), cfg.hop(rate)
    frames = frame_matrix(buf.samples, flen, hop)
    if frames.shape[0] == 0:
        return VoicedMask(np.empty(0, dtype=bool), cfg.frame_ms, cfg.hop_ms)
    rms = frame_rms(frames)
    peak = rms.max()
    loud = rms >= peak * 10 ** (cfg.silence_threshold_db / 20) if peak > 0 else rms > 0

    lag_min = int(np.floor(rate / VAD_PITCH_MAX_HZ))
    lag_max = int(np.ceil(rate / VAD_PITCH_MIN_HZ))
    r, _ = normalized_autocorr(frames, lag_min, lag_max)
    periodic = (
        r.max(axis=1) >= VAD_AUTOCORR_THRESHOLD
        if r.shape[1]
        else np.zeros(frames.shape[0], dtype=bool)
    )
    return VoicedMask(median3_bool(loud & periodic), cfg.frame_ms, cfg.hop_ms,
                      ncc=r, ncc_lag_min=lag_min)


def preprocess_vowel(
    buf: AudioBuffer, cfg: PreprocessConfig
) -> tuple[AudioBuffer, VoicedMask]:
    trimmed = trim_silence(buf, cfg)
    if trimmed.duration_s < cfg.min_duration_s:
        raise DurationError(trimmed.duration_s, cfg.min_duration_s)
    out = highpass(trimmed, cfg.highpass_hz)
    out = lowpass(out, cfg.vowel_lowpass_hz)
    out = minmax_normalize(out)
    return out, detect_voiced(out, cfg)


def preprocess_speech(
    buf: AudioBuffer, cfg: PreprocessConfig
) -> tuple[AudioBuffer, VoicedMask]:
    trimmed = trim_silence(buf, cfg)
    if trimmed.duration_s < cfg.min_duration_s:
        raise DurationError(trimmed.duration_s, cfg.min_duration_s)
    out = highpass(trimmed, cfg.highpass_hz)
    return out, detect_voiced(out, cfg)
