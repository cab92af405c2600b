"""Shared frame-level DSP primitives: framing grid, RMS, normalized
autocorrelation and parabolic peak refinement.

Every frame-based stage in the pipeline uses the same grid: frames of
``frame_len`` samples starting every ``hop`` samples from sample 0, keeping
only frames that fit entirely inside the signal.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def frame_count(n: int, frame_len: int, hop: int) -> int:
    if n < frame_len:
        return 0
    return 1 + (n - frame_len) // hop


def frame_matrix(x: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    """(n_frames, frame_len) view of x; empty matrix when x is too short."""
    n = frame_count(len(x), frame_len, hop)
    if n == 0:
        return np.empty((0, frame_len))
    return sliding_window_view(x, frame_len)[::hop][:n]


def frame_times(n_frames: int, frame_len: int, hop: int, rate: int) -> np.ndarray:
    """Frame center times in seconds."""
    return (np.arange(n_frames) * hop + frame_len / 2) / rate


def frame_rms(frames: np.ndarray) -> np.ndarray:
    if frames.shape[0] == 0:
        return np.empty(0)
    return np.sqrt(np.mean(frames**2, axis=1))


def normalized_autocorr(
    frames: np.ndarray, lag_min: int, lag_max: int
) -> tuple[np.ndarray, int]:
    """Normalized cross-correlation r(tau) per frame for tau in [lag_min, lag_max].

    r(tau) = sum(x[n] x[n+tau]) / sqrt(sum_head(x^2) * sum_tail(x^2)), so a
    perfectly periodic frame scores 1 at its period regardless of lag. Returns
    (matrix of shape (n_frames, lag_max - lag_min + 1), lag_min).
    """
    n_frames, flen = frames.shape
    lag_max = min(lag_max, flen - 1)
    if n_frames == 0 or lag_max < lag_min:
        return np.empty((n_frames, 0)), lag_min

    nfft = 1 << int(np.ceil(np.log2(2 * flen)))
    spec = np.fft.rfft(frames, nfft, axis=1)
    acf = np.fft.irfft(spec * np.conj(spec), nfft, axis=1)[:, : lag_max + 1]

    sq = frames**2
    csum = np.concatenate([np.zeros((n_frames, 1)), np.cumsum(sq, axis=1)], axis=1)
    total = csum[:, -1:]
    lags = np.arange(lag_min, lag_max + 1)
    head = csum[:, flen - lags]          # sum of x[0 : flen-tau]^2
    tail = total - csum[:, lags]         # sum of x[tau : flen]^2
    denom = np.sqrt(head * tail)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(denom > 0, acf[:, lag_min : lag_max + 1] / denom, 0.0)
    return np.clip(r, -1.0, 1.0), lag_min


def parabolic_peak(y: np.ndarray, idx: int) -> tuple[float, float]:
    """Refine a local maximum at integer index by fitting a parabola through
    its neighbors. Returns (refined_index, refined_value)."""
    if idx <= 0 or idx >= len(y) - 1:
        return float(idx), float(y[idx])
    ym, y0, yp = y[idx - 1], y[idx], y[idx + 1]
    denom = ym - 2 * y0 + yp
    if denom == 0:
        return float(idx), float(y0)
    delta = 0.5 * (ym - yp) / denom
    delta = float(np.clip(delta, -0.5, 0.5))
    return idx + delta, float(y0 - 0.25 * (ym - yp) * delta)


def median3_bool(mask: np.ndarray) -> np.ndarray:
    """Width-3 median filter on a boolean mask (edges kept as-is)."""
    if len(mask) < 3:
        return mask.copy()
    out = mask.copy()
    triple = mask[:-2].astype(int) + mask[1:-1].astype(int) + mask[2:].astype(int)
    out[1:-1] = triple >= 2
    return out
