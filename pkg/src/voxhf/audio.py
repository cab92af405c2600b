"""PCM WAV decoding/encoding and band-limited resampling.

All downstream DSP runs on mono float buffers at a fixed internal rate
(16 kHz); this module is the only place that touches sample formats.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from math import gcd
from pathlib import Path

import numpy as np
from scipy.special import i0

INTERNAL_RATE_HZ = 16000


class AudioFormatError(ValueError):
    """Unsupported codec or corrupt WAV structure."""


@dataclass(frozen=True)
class AudioBuffer:
    """Mono signal in [-1, 1] with its sample rate."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("AudioBuffer requires a 1-D sample array")
        if not np.all(np.isfinite(samples)):
            raise ValueError("AudioBuffer samples must be finite")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz

    def rms(self) -> float:
        if len(self) == 0:
            return 0.0
        return float(np.sqrt(np.mean(self.samples**2)))


_PCM_SCALE = {16: 32768.0, 24: 8388608.0}


def decode_wav(path: str | Path) -> AudioBuffer:
    """Decode a PCM WAV file (16/24-bit int or 32-bit float) to a mono buffer.

    Stereo files are averaged across channels; integer samples are scaled by
    the format's full-scale value so output lies in [-1, 1].
    """
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[0:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise AudioFormatError(f"not a RIFF/WAVE file: {path}")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        chunk_id = raw[pos : pos + 4]
        (chunk_size,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8 : pos + 8 + chunk_size]
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise AudioFormatError(f"truncated fmt chunk: {path}")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            if len(body) < chunk_size:
                raise AudioFormatError(f"truncated data chunk: {path}")
            data = body
        pos += 8 + chunk_size + (chunk_size & 1)

    if fmt is None or data is None:
        raise AudioFormatError(f"missing fmt/data chunk: {path}")
    audio_format, n_channels, sample_rate, _, _, bits = fmt
    if audio_format == 0xFFFE and len(data) >= 0:  # WAVE_FORMAT_EXTENSIBLE
        raise AudioFormatError(f"extensible WAV not supported: {path}")
    if n_channels < 1:
        raise AudioFormatError(f"invalid channel count {n_channels}: {path}")

    if audio_format == 1 and bits == 16:
        x = np.frombuffer(data, dtype="<i2").astype(np.float64) / _PCM_SCALE[16]
    elif audio_format == 1 and bits == 24:
        b = np.frombuffer(data, dtype=np.uint8)
        b = b[: (len(b) // 3) * 3].reshape(-1, 3)
        vals = (
            b[:, 0].astype(np.int32)
            | (b[:, 1].astype(np.int32) << 8)
            | (b[:, 2].astype(np.int32) << 16)
        )
        vals = np.where(vals >= 1 << 23, vals - (1 << 24), vals)
        x = vals.astype(np.float64) / _PCM_SCALE[24]
    elif audio_format == 3 and bits == 32:
        x = np.frombuffer(data, dtype="<f4").astype(np.float64)
        x = np.clip(x, -1.0, 1.0)
    else:
        raise AudioFormatError(
            f"unsupported codec (format={audio_format}, bits={bits}): {path}"
        )

    if n_channels > 1:
        x = x[: (len(x) // n_channels) * n_channels]
        x = x.reshape(-1, n_channels).mean(axis=1)
    return AudioBuffer(x, sample_rate)


def wav_info(path: str | Path) -> tuple[float, int]:
    """(duration_s, sample_rate_hz) from the WAV header without full decode."""
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[0:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise AudioFormatError(f"not a RIFF/WAVE file: {path}")
    fmt = None
    data_size = None
    pos = 12
    while pos + 8 <= len(raw):
        chunk_id = raw[pos : pos + 4]
        (chunk_size,) = struct.unpack_from("<I", raw, pos + 4)
        if chunk_id == b"fmt " and chunk_size >= 16:
            fmt = struct.unpack_from("<HHIIHH", raw, pos + 8)
        elif chunk_id == b"data":
            data_size = min(chunk_size, len(raw) - pos - 8)
        pos += 8 + chunk_size + (chunk_size & 1)
    if fmt is None or data_size is None:
        raise AudioFormatError(f"missing fmt/data chunk: {path}")
    _, n_channels, sample_rate, _, block_align, _ = fmt
    if block_align == 0 or sample_rate == 0:
        raise AudioFormatError(f"degenerate fmt chunk: {path}")
    n_frames = data_size // block_align
    return n_frames / sample_rate, sample_rate


def write_wav(path: str | Path, buf: AudioBuffer) -> None:
    """Write a mono buffer as 16-bit PCM WAV."""
    x = np.clip(buf.samples, -1.0, 1.0)
    pcm = np.round(x * 32767.0).astype("<i2").tobytes()
    header = b"RIFF" + struct.pack("<I", 36 + len(pcm)) + b"WAVE"
    header += b"fmt " + struct.pack(
        "<IHHIIHH", 16, 1, 1, buf.sample_rate_hz, buf.sample_rate_hz * 2, 2, 16
    )
    header += b"data" + struct.pack("<I", len(pcm))
    Path(path).write_bytes(header + pcm)


# Resampler constants: 64-tap Kaiser-windowed sinc per output sample. beta=6
# gives ~60 dB stopband; the cutoff sits below the tighter Nyquist so the
# transition band ends at 0.97 * Nyquist (a 7.9 kHz tone going 48->16 kHz
# lands fully in the stopband).
_TAPS = 64
_KAISER_BETA = 6.0
_HALF_TRANSITION = 0.5 * (60.0 + 7.95) / (2.285 * 2.0 * np.pi * _TAPS)


def resample(buf: AudioBuffer, target_hz: int) -> AudioBuffer:
    """Band-limited polyphase resampling; identity when rates already match.

    Output length is round(n * target / source).
    """
    if target_hz <= 0:
        raise ValueError("target_hz must be positive")
    if target_hz == buf.sample_rate_hz or len(buf) == 0:
        return AudioBuffer(buf.samples, target_hz if len(buf) == 0 else buf.sample_rate_hz)

    src = buf.sample_rate_hz
    n_out = int(round(len(buf) * target_hz / src))
    g = gcd(target_hz, src)
    up, down = target_hz // g, src // g

    # Cutoff in cycles per input sample, pulled in so the transition band
    # stays inside 97% of the limiting Nyquist.
    out_nyq = 0.5 * min(1.0, target_hz / src)
    fc = 0.97 * out_nyq - _HALF_TRANSITION
    if fc <= 0:
        raise ValueError(f"resampling ratio {src}->{target_hz} too extreme for 64 taps")

    # One filter per output phase: phase p has fractional offset (p*down % up)/up.
    k = np.arange(_TAPS) - (_TAPS // 2 - 1)
    fracs = (np.arange(up) * down % up) / up
    offsets = k[None, :] - fracs[:, None]
    kernels = 2.0 * fc * np.sinc(2.0 * fc * offsets)
    half_width = _TAPS / 2
    arg = 1.0 - (offsets / half_width) ** 2
    kernels *= np.where(arg > 0, i0(_KAISER_BETA * np.sqrt(np.maximum(arg, 0.0))), 0.0)
    kernels /= i0(_KAISER_BETA)
    kernels /= kernels.sum(axis=1, keepdims=True)

    m = np.arange(n_out)
    num = m * down
    base = num // up
    phase = num % up
    pad = np.concatenate(
        [np.zeros(_TAPS), buf.samples, np.zeros(_TAPS)]
    )
    out = np.empty(n_out)
    chunk = 65536
    for start in range(0, n_out, chunk):
        sl = slice(start, min(start + chunk, n_out))
        idx = base[sl, None] + k[None, :] + _TAPS
        out[sl] = np.einsum("ij,ij->i", pad[idx], kernels[phase[sl]])
    return AudioBuffer(out, target_hz)
