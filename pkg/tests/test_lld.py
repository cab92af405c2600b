import numpy as np
import pytest

from conftest import all_voiced_mask, make_noise, make_tone
from voxhf.audio import AudioBuffer
from voxhf.dsp import frame_matrix
from voxhf.lld import (
    LLD_NAMES,
    FrameConfig,
    extract_vowel_llds,
    hz_to_mel,
    mel_filterbank,
    mel_to_hz,
)
from voxhf.preprocess import PreprocessConfig, detect_voiced, preprocess_vowel
from voxhf.synth import synthesize_vowel

RATE = 16000


def pulse_train(f0, duration_s=2.0, rate=RATE, resonate=True):
    return synthesize_vowel(
        f0, [(500.0, 100.0)] if resonate else [], 0.0, 0.0, duration_s, rate, seed=0
    )


def extract(buf, mask=None):
    if mask is None:
        mask = detect_voiced(buf, PreprocessConfig())
    return extract_vowel_llds(buf, mask)


class TestF0:
    def test_sine_440(self):
        buf = make_tone(440)
        m = extract(buf)
        f0 = m.columns["f0_hz"]
        med = np.nanmedian(f0)
        assert 435.6 <= med <= 444.4

    def test_pulse_train_100(self):
        m = extract(pulse_train(100))
        med = np.nanmedian(m.columns["f0_hz"])
        assert 99 <= med <= 101

    def test_noise_mostly_nan(self):
        m = extract(make_noise())
        f0 = m.columns["f0_hz"]
        assert np.mean(np.isnan(f0)) >= 0.8

    def test_voicing_prob_range(self):
        m = extract(make_tone(200))
        v = m.columns["voicing_prob"]
        assert np.all((v >= 0) & (v <= 1))


class TestJitterShimmer:
    def test_perfect_periodicity(self):
        m = extract(pulse_train(100))
        jit = np.nanmedian(m.columns["jitter_local"])
        shim = np.nanmedian(m.columns["shimmer_local"])
        assert jit < 1e-6
        assert shim < 1e-6

    def test_alternating_periods(self):
        # 10.0 / 10.2 ms alternating periods: jitter = 0.2 / 10.1.
        rate = RATE
        periods = np.tile([0.0100 * rate, 0.0102 * rate], 120)
        onsets = np.concatenate([[0.0], np.cumsum(periods)])[:-1]
        n = int(onsets[-1]) + 400
        src = np.zeros(n + 2)
        base = np.floor(onsets).astype(int)
        frac = onsets - base
        np.add.at(src, base, 1 - frac)
        np.add.at(src, base + 1, frac)
        from scipy.signal import lfilter

        r = np.exp(-np.pi * 100 / rate)
        th = 2 * np.pi * 500 / rate
        x = lfilter([1.0], [1.0, -2 * r * np.cos(th), r * r], src[:n])
        buf = AudioBuffer(0.5 * x / np.abs(x).max(), rate)
        m = extract(buf, all_voiced_mask(buf))
        jit = np.nanmedian(m.columns["jitter_local"])
        assert jit == pytest.approx(0.2 / 10.1, abs=2e-3)

    @pytest.mark.parametrize("planted", [1.0, 2.0])
    def test_planted_jitter_recovery(self, planted):
        buf = synthesize_vowel(110, [(700, 80), (1220, 90)], planted, 0.0, 3.0, seed=7)
        m = extract(buf)
        measured = 100 * np.nanmedian(m.columns["jitter_local"])
        assert abs(measured - planted) <= 0.3

    @pytest.mark.parametrize("planted", [1.0, 2.0])
    def test_planted_shimmer_recovery(self, planted):
        buf = synthesize_vowel(110, [(700, 80), (1220, 90)], 0.0, planted, 3.0, seed=8)
        m = extract(buf)
        measured = 100 * np.nanmedian(m.columns["shimmer_local"])
        assert abs(measured - planted) <= 0.3

    def test_nonnegative(self):
        buf = synthesize_vowel(120, [(500, 90)], 1.5, 1.5, 2.0, seed=3)
        m = extract(buf)
        for name in ("jitter_local", "shimmer_local"):
            vals = m.columns[name]
            assert np.all(vals[np.isfinite(vals)] >= 0)


class TestHnr:
    def test_pure_sine_hits_ceiling(self):
        m = extract(make_tone(200))
        assert np.nanmedian(m.columns["log_hnr"]) == pytest.approx(40.0, abs=1e-9)

    def test_noise_low(self):
        buf = make_noise()
        m = extract(buf, all_voiced_mask(buf))
        assert np.nanmedian(m.columns["log_hnr"]) <= 0.0

    def test_snr_10db(self):
        rng = np.random.default_rng(99)
        t = np.arange(int(2.0 * RATE)) / RATE
        sig = 0.4 * np.sin(2 * np.pi * 150 * t)
        noise = rng.standard_normal(len(t))
        noise *= np.sqrt(np.mean(sig**2)) * 10 ** (-10 / 20) / np.sqrt(np.mean(noise**2))
        buf = AudioBuffer(sig + noise, RATE)
        m = extract(buf, all_voiced_mask(buf))
        med = np.nanmedian(m.columns["log_hnr"])
        assert 7.0 <= med <= 13.0


def oracle_mfcc(x, rate=RATE, cfg=FrameConfig()):
    """Independent textbook implementation: explicit matrices end to end."""
    emph = np.empty_like(x)
    emph[0] = x[0]
    emph[1:] = x[1:] - 0.97 * x[:-1]
    flen, hop = cfg.frame_len(rate), cfg.hop(rate)
    nfft = cfg.fft_size(rate)
    n_frames = 1 + (len(x) - flen) // hop
    ham = np.array([0.54 - 0.46 * np.cos(2 * np.pi * i / (flen - 1)) for i in range(flen)])

    # mel filterbank from the HTK formula
    def mel(f):
        return 2595.0 * np.log10(1 + f / 700.0)

    def imel(m):
        return 700.0 * (10 ** (m / 2595.0) - 1)

    edges = imel(np.linspace(mel(0), mel(8000), 28))
    bin_f = np.arange(nfft // 2 + 1) * rate / nfft
    fb = np.zeros((26, nfft // 2 + 1))
    for i in range(26):
        lo, mid, hi = edges[i], edges[i + 1], edges[i + 2]
        for j, f in enumerate(bin_f):
            if lo <= f <= mid:
                fb[i, j] = (f - lo) / (mid - lo)
            elif mid < f <= hi:
                fb[i, j] = (hi - f) / (hi - mid)

    # orthonormal DCT-II matrix
    k = np.arange(26)
    dct_mat = np.cos(np.pi * np.outer(np.arange(26), 2 * k + 1) / (2 * 26))
    dct_mat *= np.sqrt(2.0 / 26)
    dct_mat[0] *= np.sqrt(0.5)

    out = np.zeros((n_frames, 14))
    for i in range(n_frames):
        fr = emph[i * hop : i * hop + flen] * ham
        spec = np.abs(np.fft.rfft(fr, nfft)) ** 2
        melpow = fb @ spec
        logmel = np.log(np.maximum(melpow, 1e-10))
        out[i] = (dct_mat @ logmel)[1:15]
    return out


class TestMfcc:
    def test_silence_zero(self):
        buf = AudioBuffer(np.zeros(RATE), RATE)
        m = extract(buf, all_voiced_mask(buf))
        for k in range(1, 15):
            assert np.allclose(m.columns[f"mfcc_{k}"], 0.0, atol=1e-12)

    def test_count(self):
        m = extract(make_tone(300, 1.0))
        names = [n for n in m.columns if n.startswith("mfcc_")]
        assert len(names) == 14

    def test_matches_textbook_oracle(self):
        buf = make_tone(1000, 1.0)
        m = extract(buf)
        expected = oracle_mfcc(buf.samples)
        got = np.column_stack([m.columns[f"mfcc_{k}"] for k in range(1, 15)])
        assert np.max(np.abs(got - expected)) < 1e-6

    def test_mel_roundtrip(self):
        f = np.array([0.0, 440.0, 1000.0, 7999.0])
        assert np.allclose(mel_to_hz(hz_to_mel(f)), f, rtol=1e-12)

    def test_filterbank_shape(self):
        fb = mel_filterbank(26, 512, RATE, 8000)
        assert fb.shape == (26, 257)
        assert np.all(fb >= 0)


class TestFormants:
    @pytest.mark.parametrize("f1,f2", [(700, 1220), (300, 2300)])
    def test_synthetic_vowel_recovery(self, f1, f2):
        buf = synthesize_vowel(110, [(f1, 80), (f2, 90)], 0.3, 0.3, 2.0, seed=5)
        m = extract(buf)
        med1 = np.nanmedian(m.columns["f1_hz"])
        med2 = np.nanmedian(m.columns["f2_hz"])
        assert abs(med1 - f1) / f1 <= 0.05
        assert abs(med2 - f2) / f2 <= 0.05

    def test_noise_mostly_undefined(self):
        buf = make_noise()
        m = extract(buf)
        undef = np.mean(np.isnan(m.columns["f1_hz"]))
        assert undef >= 0.5


class TestCpp:
    def test_pulse_train_high(self):
        buf = synthesize_vowel(100, [(700, 80), (1220, 90)], 0.0, 0.0, 2.0, seed=1)
        m = extract(buf)
        assert np.nanmedian(m.columns["cpp"]) > 15.0

    def test_noise_low(self):
        buf = make_noise()
        m = extract(buf, all_voiced_mask(buf))
        assert np.nanmedian(m.columns["cpp"]) < 5.0

    def test_noise_ordering(self):
        rng = np.random.default_rng(11)
        for f0 in (100, 150, 220):
            clean = synthesize_vowel(f0, [(700, 80), (1220, 90)], 0.3, 0.3, 2.0, seed=2)
            noise = rng.standard_normal(len(clean))
            noise *= clean.rms() / np.sqrt(np.mean(noise**2))
            noisy = AudioBuffer(
                0.5 * (clean.samples + noise) / np.abs(clean.samples + noise).max(),
                RATE,
            )
            mask = all_voiced_mask(clean)
            c_clean = np.nanmedian(extract(clean, mask).columns["cpp"])
            c_noisy = np.nanmedian(extract(noisy, mask).columns["cpp"])
            assert c_clean > c_noisy


class TestSpectralSuite:
    def test_tone_centroid_and_rolloff(self):
        buf = make_tone(1000)
        m = extract(buf)
        cent = np.nanmedian(m.columns["spectral_centroid"])
        assert 980 <= cent <= 1020
        bin_hz = RATE / 512
        r90 = np.nanmedian(m.columns["rolloff_90"])
        assert abs(r90 - 1000) <= bin_hz

    def test_entropy_noise_vs_tone(self):
        m_noise = extract(make_noise())
        m_tone = extract(make_tone(1000))
        assert np.nanmedian(m_noise.columns["spectral_entropy"]) > 0.9
        assert np.nanmedian(m_tone.columns["spectral_entropy"]) < 0.3

    def test_stationary_flux(self):
        m = extract(make_tone(500))
        flux = m.columns["spectral_flux"]
        assert flux[0] == 0.0
        assert np.all(flux[1:] < 1e-6)

    def test_band_fractions(self):
        buf = synthesize_vowel(120, [(700, 80), (1220, 90)], 0.5, 0.5, 2.0, seed=9)
        m = extract(buf)
        bands = np.column_stack([m.columns[f"band_{b}"] for b in range(1, 27)])
        valid = ~np.isnan(bands).any(axis=1)
        assert np.all(bands[valid] >= 0)
        assert np.all(bands[valid] <= 1)
        sums = bands[valid].sum(axis=1)
        assert np.all(sums <= 1 + 1e-9)
        assert np.allclose(sums, 1.0, atol=1e-9)

    def test_rolloff_monotone(self):
        buf = synthesize_vowel(120, [(700, 80), (1220, 90)], 0.5, 0.5, 2.0, seed=9)
        m = extract(buf)
        r25, r50 = m.columns["rolloff_25"], m.columns["rolloff_50"]
        r75, r90 = m.columns["rolloff_75"], m.columns["rolloff_90"]
        valid = np.isfinite(r25)
        assert np.all(r25[valid] <= r50[valid])
        assert np.all(r50[valid] <= r75[valid])
        assert np.all(r75[valid] <= r90[valid])


class TestLldMatrix:
    def test_registry_complete(self):
        buf = synthesize_vowel(110, [(700, 80), (1220, 90)], 1.0, 1.0, 2.0, seed=4)
        m = extract(buf)
        assert set(m.columns) == set(LLD_NAMES)
        assert len(LLD_NAMES) == 64
        for col in m.columns.values():
            assert len(col) == m.n_frames

    def test_lld_dump_csv(self, tmp_path):
        from voxhf.lld import write_lld_csv

        buf = synthesize_vowel(110, [(700, 80), (1220, 90)], 1.0, 1.0, 1.5, seed=2)
        m = extract(buf)
        path = tmp_path / "lld.csv"
        write_lld_csv(m, path)
        header = path.read_text().splitlines()[0].split(",")
        assert header[0] == "frame_time_s"
        assert len(header) == 65

    def test_time_shift_robustness(self):
        buf = synthesize_vowel(110, [(700, 80), (1220, 90)], 1.0, 1.0, 2.0, seed=6)
        cfg = PreprocessConfig()
        hop = cfg.hop(RATE)
        shifted = AudioBuffer(buf.samples[hop:], RATE)
        m0 = extract(buf)
        m1 = extract(shifted)
        trim = 5
        for name in LLD_NAMES:
            a = m0.columns[name][1 + trim : m1.n_frames + 1 - trim]
            b = m1.columns[name][trim : -trim or None]
            b = b[: len(a)]
            both = np.isfinite(a) & np.isfinite(b)
            assert np.allclose(a[both], b[both], atol=1e-9), name
