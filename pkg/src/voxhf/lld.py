"""Frame-level low-level descriptors for vowel recordings.

One pass over a preprocessed vowel produces 64 named contours on the shared
25 ms / 10 ms grid: pitch and voicing, local jitter/shimmer, log HNR,
cepstral peak prominence, two formants, 14 MFCCs and a 42-column spectral
suite. Source/pitch contours are NaN on unvoiced frames.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.fft import dct
from scipy.ndimage import uniform_filter1d

from voxhf.audio import AudioBuffer
from voxhf.dsp import (
    frame_matrix,
    frame_rms,
    frame_times,
    normalized_autocorr,
    parabolic_peak,
)
from voxhf.preprocess import VoicedMask

PITCH_MIN_HZ = 60.0
PITCH_MAX_HZ = 500.0
PREEMPHASIS = 0.97
N_MEL_FILTERS = 26
N_MFCC = 14
N_BANDS = 26
BAND_TOP_HZ = 8000.0
LPC_ORDER = 10
LPC_RATE_HZ = 8000
FORMANT_MIN_ROOT_MOD = 0.7
F1_RANGE_HZ = (200.0, 1000.0)
F2_RANGE_HZ = (700.0, 3000.0)
CPP_FRAME_MS = 40.0
CPP_QUEFRENCY_HZ = (60.0, 300.0)
CPP_TREND_START_S = 1e-3
CPP_TIME_SMOOTH = 9
CPP_QUEF_SMOOTH = 5
HNR_CLAMP_DB = (-20.0, 40.0)


@dataclass(frozen=True)
class FrameConfig:
    frame_ms: float = 25.0
    hop_ms: float = 10.0

    def frame_len(self, rate: int) -> int:
        return int(round(self.frame_ms / 1000 * rate))

    def hop(self, rate: int) -> int:
        return int(round(self.hop_ms / 1000 * rate))

    def fft_size(self, rate: int) -> int:
        return 1 << int(np.ceil(np.log2(self.frame_len(rate))))


MFCC_NAMES = [f"mfcc_{i}" for i in range(1, N_MFCC + 1)]
BAND_NAMES = [f"band_{i}" for i in range(1, N_BANDS + 1)]
SPECTRAL_NAMES = BAND_NAMES + [
    "energy_250_650",
    "energy_1k_4k",
    "rolloff_25",
    "rolloff_50",
    "rolloff_75",
    "rolloff_90",
    "spectral_flux",
    "spectral_centroid",
    "spectral_entropy",
    "spectral_slope",
    "spectral_variance",
    "spectral_skewness",
    "spectral_kurtosis",
    "zcr",
    "rms_energy",
    "loudness_proxy",
]
LLD_NAMES = (
    ["f0_hz", "voicing_prob", "jitter_local", "shimmer_local", "log_hnr", "cpp",
     "f1_hz", "f2_hz"]
    + MFCC_NAMES
    + SPECTRAL_NAMES
)
assert len(LLD_NAMES) == 64


@dataclass(frozen=True)
class LldMatrix:
    frame_times_s: np.ndarray
    columns: dict[str, np.ndarray]
    mask: VoicedMask

    def __post_init__(self):
        n = len(self.frame_times_s)
        for name, col in self.columns.items():
            if len(col) != n:
                raise ValueError(f"column {name} has {len(col)} frames, expected {n}")
            if name not in LLD_NAMES:
                raise ValueError(f"unknown LLD column {name}")

    @property
    def n_frames(self) -> int:
        return len(self.frame_times_s)


def write_lld_csv(matrix: LldMatrix, path) -> None:
    """Debug dump: frame_time_s plus one column per LLD contour."""
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame_time_s"] + LLD_NAMES)
        for i, t in enumerate(matrix.frame_times_s):
            row = [f"{t:.6f}"]
            for name in LLD_NAMES:
                v = matrix.columns[name][i]
                row.append("" if not np.isfinite(v) else f"{v:.9g}")
            writer.writerow(row)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=float) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=float) / 2595.0) - 1.0)


@lru_cache(maxsize=8)
def _mel_filterbank_cached(n_filters: int, nfft: int, rate: int, fmax: float):
    fb = mel_filterbank(n_filters, nfft, rate, fmax)
    fb.setflags(write=False)
    return fb


def mel_filterbank(n_filters: int, nfft: int, rate: int, fmax: float) -> np.ndarray:
    """(n_filters, nfft//2+1) triangular filters, HTK mel spacing, unit peak."""
    edges_mel = np.linspace(hz_to_mel(0.0), hz_to_mel(fmax), n_filters + 2)
    edges_hz = mel_to_hz(edges_mel)
    bin_freqs = np.arange(nfft // 2 + 1) * rate / nfft
    fb = np.zeros((n_filters, len(bin_freqs)))
    for i in range(n_filters):
        lo, mid, hi = edges_hz[i], edges_hz[i + 1], edges_hz[i + 2]
        up = (bin_freqs - lo) / (mid - lo)
        down = (hi - bin_freqs) / (hi - mid)
        fb[i] = np.clip(np.minimum(up, down), 0.0, None)
    return fb


def preemphasize(x: np.ndarray, coef: float = PREEMPHASIS) -> np.ndarray:
    if len(x) == 0:
        return x
    return np.concatenate([[x[0]], x[1:] - coef * x[:-1]])


def _pick_pitch_lag(r_row: np.ndarray, lag_min: int) -> tuple[float, float, bool]:
    """Smallest strong local maximum (≥ 0.85 of the global peak) with
    parabolic refinement; avoids octave-down errors on highly periodic
    frames. Returns (lag_samples, peak_value, has_peak); has_peak is False
    when the row has no interior local maximum at all (no periodicity
    evidence in the pitch range)."""
    n = len(r_row)
    if n < 3:
        j = int(np.argmax(r_row))
        return float(lag_min + j), float(r_row[j]), False
    gmax = float(r_row.max())
    is_peak = np.zeros(n, dtype=bool)
    is_peak[1:-1] = (r_row[1:-1] >= r_row[:-2]) & (r_row[1:-1] >= r_row[2:])
    if not is_peak.any():
        j = int(np.argmax(r_row))
        return float(lag_min + j), gmax, False
    strong = np.flatnonzero(is_peak & (r_row >= 0.85 * gmax))
    j = int(strong[0]) if len(strong) else int(np.argmax(r_row * is_peak))
    lag, val = parabolic_peak(r_row, j)
    return lag_min + lag, val, True


def pitch_contours(frames, voiced, rate, cached_ncc=None, cached_lag_min=0):
    """Autocorrelation pitch per frame: f0 from the parabolic-refined peak lag,
    voicing probability from the clamped peak value, log HNR from
    10*log10(r/(1-r)) clamped to [-20, 40] dB. f0/HNR are NaN off-mask."""
    nf = frames.shape[0]
    lag_min = int(np.floor(rate / PITCH_MAX_HZ))
    lag_max = int(np.ceil(rate / PITCH_MIN_HZ))
    if cached_ncc is not None and cached_ncc.shape[0] == nf and cached_lag_min == lag_min:
        r_mat = cached_ncc
    else:
        r_mat, _ = normalized_autocorr(frames, lag_min, lag_max)

    f0 = np.full(nf, np.nan)
    vprob = np.zeros(nf)
    hnr = np.full(nf, np.nan)
    for i in range(nf):
        if r_mat.shape[1] == 0:
            continue
        lag, val, has_peak = _pick_pitch_lag(r_mat[i], lag_min)
        vprob[i] = min(max(val, 0.0), 1.0)
        if voiced[i] and has_peak:
            f0[i] = rate / lag
            rr = min(max(val, 1e-9), 1.0 - 1e-12)
            hnr[i] = float(np.clip(10 * np.log10(rr / (1 - rr)), *HNR_CLAMP_DB))
    return f0, vprob, hnr


def _track_periods(
    x: np.ndarray, rate: int, regions: list[tuple[int, int]], t0_samples: float
):
    """Waveform peak-picking seeded from the f0 estimate. Returns arrays of
    refined peak positions (samples) and peak amplitudes, per voiced region."""
    sign = 1.0 if abs(x.max()) >= abs(x.min()) else -1.0
    y = sign * x
    tracks = []
    for start, stop in regions:
        if stop - start < 2 * t0_samples:
            continue
        seg_positions, seg_amps = [], []
        w0, w1 = start, min(stop, start + int(1.5 * t0_samples))
        if w1 - w0 < 3:
            continue
        j = w0 + int(np.argmax(y[w0:w1]))
        pos, amp = parabolic_peak(y, j)
        seg_positions.append(pos)
        seg_amps.append(amp)
        t_loc = t0_samples
        while True:
            w0 = int(round(seg_positions[-1] + 0.7 * t_loc))
            w1 = int(round(seg_positions[-1] + 1.3 * t_loc)) + 1
            if w1 > stop or w0 >= w1 - 1:
                break
            j = w0 + int(np.argmax(y[w0:w1]))
            pos, amp = parabolic_peak(y, j)
            period = pos - seg_positions[-1]
            seg_positions.append(pos)
            seg_amps.append(amp)
            t_loc = period
        if len(seg_positions) >= 3:
            tracks.append((np.array(seg_positions), np.array(seg_amps)))
    return tracks


def _mask_regions(mask: np.ndarray, flen: int, hop: int, n: int):
    """Contiguous voiced frame runs mapped to sample ranges."""
    regions = []
    i = 0
    while i < len(mask):
        if mask[i]:
            j = i
            while j + 1 < len(mask) and mask[j + 1]:
                j += 1
            regions.append((i * hop, min(n, j * hop + flen)))
            i = j + 1
        else:
            i += 1
    return regions


def _levinson_batch(r: np.ndarray, order: int) -> np.ndarray:
    """Levinson-Durbin across frames: r is (n_frames, order+1) autocorrelation,
    returns LPC polynomial coefficients a (n_frames, order+1) with a[:,0]=1."""
    nf = r.shape[0]
    a = np.zeros((nf, order + 1))
    a[:, 0] = 1.0
    err = r[:, 0].copy()
    err[err <= 0] = np.finfo(float).tiny
    for i in range(1, order + 1):
        acc = r[:, i].copy()
        for j in range(1, i):
            acc += a[:, j] * r[:, i - j]
        k = -acc / err
        prev = a[:, 1:i][:, ::-1].copy()
        a[:, i] = k
        if i > 1:
            a[:, 1:i] += k[:, None] * prev
        err *= 1.0 - k * k
        err[err <= 0] = np.finfo(float).tiny
    return a


def extract_vowel_llds(
    buf: AudioBuffer, mask: VoicedMask, cfg: FrameConfig = FrameConfig()
) -> LldMatrix:
    """Compute all 64 LLD contours for a preprocessed vowel."""
    rate = buf.sample_rate_hz
    x = buf.samples
    flen, hop = cfg.frame_len(rate), cfg.hop(rate)
    frames = frame_matrix(x, flen, hop)
    nf = frames.shape[0]
    voiced = mask.voiced[:nf] if len(mask.voiced) >= nf else np.pad(
        mask.voiced, (0, nf - len(mask.voiced))
    )
    times = frame_times(nf, flen, hop, rate)
    cols: dict[str, np.ndarray] = {}

    f0, vprob, hnr = pitch_contours(
        frames, voiced, rate,
        cached_ncc=getattr(mask, "ncc", None),
        cached_lag_min=getattr(mask, "ncc_lag_min", 0),
    )
    cols["f0_hz"] = f0
    cols["voicing_prob"] = vprob
    cols["log_hnr"] = hnr

    cols["jitter_local"], cols["shimmer_local"] = _jitter_shimmer(
        x, rate, voiced, f0, flen, hop, nf
    )
    cols["cpp"] = _cpp_contour(x, rate, voiced, flen, hop, nf)
    cols["f1_hz"], cols["f2_hz"] = _formant_contours(frames, voiced, rate)

    emph_frames = frame_matrix(preemphasize(x), flen, hop)
    window = np.hamming(flen)
    nfft = cfg.fft_size(rate)
    spec_emph = np.abs(np.fft.rfft(emph_frames * window, nfft, axis=1))
    spec_raw = np.abs(np.fft.rfft(frames * window, nfft, axis=1))

    fb = _mel_filterbank_cached(N_MEL_FILTERS, nfft, rate, min(BAND_TOP_HZ, rate / 2))
    mel_emph = spec_emph**2 @ fb.T
    logmel = np.log(np.maximum(mel_emph, 1e-10))
    mfcc_all = dct(logmel, type=2, norm="ortho", axis=1)
    for k in range(1, N_MFCC + 1):
        cols[f"mfcc_{k}"] = mfcc_all[:, k].copy()

    mel_raw = spec_raw**2 @ fb.T
    cols["loudness_proxy"] = np.cbrt(mel_raw).sum(axis=1)

    # Spectral suite runs on the raw (unemphasized) spectra; pre-emphasis is
    # reserved for the MFCC and LPC front-ends.
    _spectral_suite(cols, spec_raw, frames, rate, nfft, flen)

    for name in ("f0_hz", "jitter_local", "shimmer_local", "log_hnr", "cpp",
                 "f1_hz", "f2_hz"):
        cols[name][~voiced] = np.nan

    return LldMatrix(times, cols, mask)


def _jitter_shimmer(x, rate, voiced, f0, flen, hop, nf):
    jitter = np.full(nf, np.nan)
    shimmer = np.full(nf, np.nan)
    f0_valid = f0[np.isfinite(f0)]
    if len(f0_valid) == 0:
        return jitter, shimmer
    t0 = rate / float(np.median(f0_valid))
    regions = _mask_regions(voiced, flen, hop, len(x))
    tracks = _track_periods(x, rate, regions, t0)
    if not tracks:
        return jitter, shimmer

    starts = np.arange(nf) * hop
    ends = starts + flen
    vrows = np.flatnonzero(voiced)
    for positions, amps in tracks:
        periods = np.diff(positions)
        p_start, p_end = positions[:-1], positions[1:]
        pamps = amps[1:]
        # periods intersecting frame i form the contiguous run [lo_i, hi_i)
        lo = np.searchsorted(p_end, starts[vrows], side="right")
        hi = np.searchsorted(p_start, ends[vrows], side="left")
        count = hi - lo
        ok = count >= 3
        if not ok.any():
            continue
        cum_t = np.concatenate([[0.0], np.cumsum(periods)])
        cum_a = np.concatenate([[0.0], np.cumsum(pamps)])
        cum_dt = np.concatenate([[0.0, 0.0], np.cumsum(np.abs(np.diff(periods)))])
        cum_da = np.concatenate([[0.0, 0.0], np.cumsum(np.abs(np.diff(pamps)))])
        l, h, c = lo[ok], hi[ok], count[ok]
        mean_t = (cum_t[h] - cum_t[l]) / c
        mean_a = (cum_a[h] - cum_a[l]) / c
        mean_dt = (cum_dt[h] - cum_dt[l + 1]) / (c - 1)
        mean_da = (cum_da[h] - cum_da[l + 1]) / (c - 1)
        rows = vrows[ok]
        jitter[rows] = mean_dt / mean_t
        with np.errstate(invalid="ignore", divide="ignore"):
            shimmer[rows] = np.where(mean_a > 0, mean_da / mean_a, np.nan)
    return jitter, shimmer


def _cpp_contour(x, rate, voiced, flen, hop, nf):
    """Smoothed cepstral peak prominence per frame: 40 ms windows centered on
    the standard grid frame centers (signal reflect-padded at the edges),
    squared real cepstrum of the dB-magnitude spectrum, box-smoothed over 9
    frames and 5 quefrency bins, expressed in dB, with the linear quefrency
    trend over [1 ms, max pitch lag] subtracted at the peak. Smoothing keeps
    the aperiodic baseline low; an unsmoothed single-frame peak estimate is
    dominated by the extreme-value bias of the quefrency search band."""
    cpp_len = int(round(CPP_FRAME_MS / 1000 * rate))
    half_extra = (cpp_len - flen) // 2
    xp = np.pad(x, half_extra, mode="reflect") if len(x) > 1 else x
    frames = frame_matrix(xp, cpp_len, hop)[:nf]
    if frames.shape[0] < nf:
        frames = np.pad(frames, ((0, nf - frames.shape[0]), (0, 0)))
    nfft = 1 << int(np.ceil(np.log2(cpp_len)))
    window = np.hamming(cpp_len)
    logmag_db = 20 * np.log10(np.maximum(np.abs(
        np.fft.rfft(frames * window, nfft, axis=1)), 1e-12))
    cep_sq = np.fft.irfft(logmag_db, nfft, axis=1) ** 2
    cep_sq = uniform_filter1d(cep_sq, CPP_TIME_SMOOTH, axis=0, mode="nearest")
    cep_sq = uniform_filter1d(cep_sq, CPP_QUEF_SMOOTH, axis=1, mode="nearest")
    cep_db = 10 * np.log10(np.maximum(cep_sq, 1e-24))

    q_lo = int(np.floor(rate / CPP_QUEFRENCY_HZ[1]))
    q_hi = int(np.ceil(rate / CPP_QUEFRENCY_HZ[0]))
    q_hi = min(q_hi, nfft // 2 - 1)
    trend_lo = int(round(CPP_TREND_START_S * rate))
    qs = np.arange(trend_lo, q_hi + 1)
    seg = cep_db[:, trend_lo : q_hi + 1]

    qc = qs - qs.mean()
    denom = np.sum(qc**2)
    slope = seg @ qc / denom
    intercept = seg.mean(axis=1) - slope * qs.mean()

    band = cep_db[:, q_lo : q_hi + 1]
    peak_idx = np.argmax(band, axis=1) + q_lo
    peak_val = band[np.arange(nf), peak_idx - q_lo]
    cpp = peak_val - (intercept + slope * peak_idx)
    cpp[~voiced] = np.nan
    return cpp


def lpc_formants(frames, voiced, rate, order=LPC_ORDER):
    """LPC formants per voiced frame: in-frame pre-emphasis, Hamming window,
    autocorrelation LPC via Levinson-Durbin, polynomial roots (companion
    eigenvalues), angle-to-Hz mapping with the F1/F2 search windows.
    Returns (f1, f2, bw1, bw2); bandwidth = -(rate/pi) * ln|root|."""
    nf = frames.shape[0]
    f1 = np.full(nf, np.nan)
    f2 = np.full(nf, np.nan)
    b1 = np.full(nf, np.nan)
    b2 = np.full(nf, np.nan)
    views = np.array(frames)
    views[:, 1:] -= PREEMPHASIS * views[:, :-1]
    views = views * np.hamming(views.shape[1])

    vidx = np.flatnonzero(voiced)
    if len(vidx) == 0:
        return f1, f2, b1, b2
    sub = views[vidx]
    nfft = 1 << int(np.ceil(np.log2(2 * sub.shape[1])))
    spec = np.fft.rfft(sub, nfft, axis=1)
    acf = np.fft.irfft(spec * np.conj(spec), nfft, axis=1)[:, : order + 1]
    a = _levinson_batch(acf, order)

    # batched companion-matrix eigenvalues (one LAPACK call for all frames)
    companion = np.zeros((len(vidx), order, order))
    companion[:, 1:, :-1] = np.eye(order - 1)
    companion[:, 0, :] = -a[:, 1:]
    all_roots = np.linalg.eigvals(companion)

    for row, fi in enumerate(vidx):
        roots = all_roots[row]
        roots = roots[(np.abs(roots) > FORMANT_MIN_ROOT_MOD) & (roots.imag > 0)]
        if len(roots) == 0:
            continue
        freqs = np.angle(roots) * rate / (2 * np.pi)
        bws = -(rate / np.pi) * np.log(np.abs(roots))
        idx = np.argsort(freqs)
        freqs, bws = freqs[idx], bws[idx]
        cand1 = np.flatnonzero((freqs >= F1_RANGE_HZ[0]) & (freqs <= F1_RANGE_HZ[1]))
        if len(cand1):
            f1[fi] = freqs[cand1[0]]
            b1[fi] = bws[cand1[0]]
        lo2 = max(F2_RANGE_HZ[0], (f1[fi] + 1.0) if np.isfinite(f1[fi]) else F2_RANGE_HZ[0])
        cand2 = np.flatnonzero((freqs >= lo2) & (freqs <= F2_RANGE_HZ[1]))
        if len(cand2):
            f2[fi] = freqs[cand2[0]]
            b2[fi] = bws[cand2[0]]
    return f1, f2, b1, b2


def _formant_contours(frames, voiced, rate):
    """Vowel path: 8 kHz decimated view (the vowel band stops at 3 kHz, so
    plain decimation is alias-free), order-10 LPC."""
    decim = max(1, rate // LPC_RATE_HZ)
    f1, f2, _, _ = lpc_formants(frames[:, ::decim], voiced, rate / decim, LPC_ORDER)
    return f1, f2


def _spectral_suite(cols, spec, raw_frames, rate, nfft, flen):
    """Band fractions, rolloffs, moments, entropy, slope, flux, zcr, rms on
    the pre-emphasized magnitude spectra (zcr/rms from the raw frames)."""
    nf = spec.shape[0]
    power = spec**2
    total = power.sum(axis=1)
    ok = total > 0
    bin_freqs = np.arange(power.shape[1]) * rate / nfft

    band_idx = np.minimum(
        (bin_freqs / (BAND_TOP_HZ / N_BANDS)).astype(int), N_BANDS - 1
    )
    with np.errstate(invalid="ignore", divide="ignore"):
        for b in range(N_BANDS):
            sel = band_idx == b
            val = power[:, sel].sum(axis=1) / total
            val[~ok] = np.nan
            cols[f"band_{b + 1}"] = val

        for name, lo, hi in (
            ("energy_250_650", 250.0, 650.0),
            ("energy_1k_4k", 1000.0, 4000.0),
        ):
            sel = (bin_freqs >= lo) & (bin_freqs <= hi)
            val = power[:, sel].sum(axis=1) / total
            val[~ok] = np.nan
            cols[name] = val

        cum = np.cumsum(power, axis=1)
        for q in (0.25, 0.50, 0.75, 0.90):
            idx = np.argmax(cum >= q * total[:, None], axis=1)
            val = bin_freqs[idx].astype(float)
            val[~ok] = np.nan
            cols[f"rolloff_{int(q * 100)}"] = val

        phat = power / np.where(total > 0, total, 1.0)[:, None]
        centroid = phat @ bin_freqs
        dev = bin_freqs[None, :] - centroid[:, None]
        var = np.einsum("ij,ij->i", phat, dev**2)
        m3 = np.einsum("ij,ij->i", phat, dev**3)
        m4 = np.einsum("ij,ij->i", phat, dev**4)
        skew = np.where(var > 0, m3 / np.maximum(var, 1e-300) ** 1.5, np.nan)
        kurt = np.where(var > 0, m4 / np.maximum(var, 1e-300) ** 2 - 3.0, np.nan)
        for name, val in (
            ("spectral_centroid", centroid),
            ("spectral_variance", var),
            ("spectral_skewness", skew),
            ("spectral_kurtosis", kurt),
        ):
            val = val.astype(float)
            val[~ok] = np.nan
            cols[name] = val

        plog = np.where(phat > 0, phat * np.log(np.where(phat > 0, phat, 1.0)), 0.0)
        entropy = -plog.sum(axis=1) / np.log(power.shape[1])
        entropy[~ok] = np.nan
        cols["spectral_entropy"] = entropy

        mag_db = 20 * np.log10(np.maximum(spec, 1e-12))
        fc = bin_freqs - bin_freqs.mean()
        slope = (mag_db @ fc) / np.sum(fc**2)
        slope[~ok] = np.nan
        cols["spectral_slope"] = slope

        norm = np.sqrt((spec**2).sum(axis=1))
        unit = spec / np.where(norm > 0, norm, 1.0)[:, None]
        flux = np.zeros(nf)
        if nf > 1:
            flux[1:] = np.sqrt(((unit[1:] - unit[:-1]) ** 2).sum(axis=1))
        cols["spectral_flux"] = flux

    signs = raw_frames[:, 1:] * raw_frames[:, :-1] < 0
    cols["zcr"] = signs.sum(axis=1) / (flen / rate)
    cols["rms_energy"] = frame_rms(raw_frames)
