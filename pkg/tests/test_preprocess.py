import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_noise, make_tone
from voxhf.audio import AudioBuffer
from voxhf.preprocess import (
    DurationError,
    PreprocessConfig,
    detect_voiced,
    highpass,
    lowpass,
    minmax_normalize,
    preprocess_speech,
    preprocess_vowel,
    trim_silence,
)
from voxhf.synth import synthesize_vowel

RATE = 16000


class TestTrimSilence:
    def test_all_zero(self, cfg):
        out = trim_silence(AudioBuffer(np.zeros(RATE), RATE), cfg)
        assert len(out) == 0

    def test_no_silence_untouched(self, cfg):
        buf = make_tone(300, 1.0)
        out = trim_silence(buf, cfg)
        assert out.samples is buf.samples

    def test_padded_tone_duration(self, cfg):
        sil = np.zeros(int(0.5 * RATE))
        t = np.arange(int(2.0 * RATE)) / RATE
        sig = np.concatenate([sil, 0.5 * np.sin(2 * np.pi * 220 * t), sil])
        out = trim_silence(AudioBuffer(sig, RATE), cfg)
        assert out.duration_s == pytest.approx(2.0, abs=0.05)

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=20, deadline=None)
    def test_output_is_contiguous_slice(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(RATE // 2, 2 * RATE))
        x = rng.standard_normal(n) * rng.uniform(0.001, 0.5)
        pad = np.zeros(int(rng.integers(0, RATE // 4)))
        x = np.concatenate([pad, x, pad])
        out = trim_silence(AudioBuffer(x, RATE), PreprocessConfig())
        if len(out) == 0:
            return
        # find the slice by matching the first output sample run
        for start in range(len(x) - len(out) + 1):
            if np.array_equal(x[start : start + len(out)], out.samples):
                return
        pytest.fail("output is not a contiguous slice of input")


class TestFilters:
    def test_dc_rejected(self):
        buf = AudioBuffer(np.full(2 * RATE, 0.25), RATE)
        out = highpass(buf, 70)
        assert abs(np.mean(out.samples)) < 1e-3 * 0.25

    def test_highpass_passband(self):
        buf = make_tone(1000, 2.0)
        out = highpass(buf, 70)
        assert abs(out.rms() - buf.rms()) / buf.rms() < 0.01

    def test_lowpass_stopband(self):
        buf = make_tone(5000, 2.0)
        out = lowpass(buf, 3000)
        assert out.rms() < 0.05 * buf.rms()

    def test_length_preserved(self):
        buf = make_noise(1.0)
        assert len(highpass(buf, 70)) == len(buf)
        assert len(lowpass(buf, 3000)) == len(buf)

    def test_cutoff_above_nyquist_rejected(self):
        buf = make_tone(100, 0.5)
        with pytest.raises(ValueError):
            lowpass(buf, RATE)

    def test_zero_phase_definition(self):
        from scipy.signal import butter, sosfilt

        buf = make_noise(0.5, seed=5)
        sos = butter(4, 70 / (RATE / 2), btype="highpass", output="sos")
        expected = sosfilt(sos, sosfilt(sos, buf.samples[::-1])[::-1])
        got = highpass(buf, 70)
        assert np.array_equal(got.samples, expected)


class TestMinmaxNormalize:
    def test_affine_endpoints(self):
        out = minmax_normalize(AudioBuffer(np.array([0.0, 0.5]), RATE))
        assert np.allclose(out.samples, [-1.0, 1.0])

    def test_constant_to_zero(self):
        out = minmax_normalize(AudioBuffer(np.full(100, 0.3), RATE))
        assert np.all(out.samples == 0.0)

    def test_exact_range(self):
        out = minmax_normalize(make_noise(0.5))
        assert out.samples.min() == -1.0
        assert out.samples.max() == 1.0

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_idempotent(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(200) * rng.uniform(0.01, 1.0)
        once = minmax_normalize(AudioBuffer(x, RATE))
        twice = minmax_normalize(once)
        assert np.max(np.abs(twice.samples - once.samples)) < 1e-12


class TestDetectVoiced:
    def test_noise_mostly_unvoiced(self, cfg):
        mask = detect_voiced(make_noise(), cfg)
        assert mask.voiced_fraction < 0.2

    def test_synthetic_vowel_voiced(self, cfg):
        buf = synthesize_vowel(120, [(700, 80), (1220, 90)], 0.5, 0.5, 3.0, seed=2)
        mask = detect_voiced(buf, cfg)
        assert mask.voiced_fraction > 0.9

    def test_all_zero_unvoiced(self, cfg):
        mask = detect_voiced(AudioBuffer(np.zeros(RATE), RATE), cfg)
        assert not mask.voiced.any()

    def test_short_buffer_empty_mask(self, cfg):
        mask = detect_voiced(AudioBuffer(np.zeros(10), RATE), cfg)
        assert len(mask) == 0


class TestChains:
    def test_vowel_chain(self, cfg):
        buf = synthesize_vowel(120, [(700, 80), (1220, 90)], 0.5, 0.5, 3.0, seed=2)
        out, mask = preprocess_vowel(buf, cfg)
        assert mask.voiced_fraction > 0.9
        assert out.samples.max() == 1.0

    def test_too_short_tone(self, cfg):
        buf = make_tone(220, 0.8)
        with pytest.raises(DurationError) as err:
            preprocess_vowel(buf, cfg)
        assert err.value.duration_s <= 0.8

    def test_silence_only(self, cfg):
        buf = AudioBuffer(np.zeros(2 * RATE), RATE)
        with pytest.raises(DurationError):
            preprocess_vowel(buf, cfg)

    def test_speech_chain_no_normalization(self, cfg):
        buf = synthesize_vowel(120, [(700, 80), (1220, 90)], 0.5, 0.5, 2.0, seed=3)
        scaled = AudioBuffer(buf.samples * 0.1, RATE)
        out, _ = preprocess_speech(scaled, cfg)
        assert out.samples.max() < 0.5  # no min-max blow-up

    def test_deterministic(self, cfg):
        buf = synthesize_vowel(120, [(700, 80), (1220, 90)], 1.0, 1.0, 2.0, seed=4)
        a, _ = preprocess_vowel(buf, cfg)
        b, _ = preprocess_vowel(buf, cfg)
        assert np.array_equal(a.samples, b.samples)


class TestConfig:
    def test_invalid_hop(self):
        with pytest.raises(ValueError):
            PreprocessConfig(frame_ms=10, hop_ms=25)

    def test_invalid_band_order(self):
        with pytest.raises(ValueError):
            PreprocessConfig(highpass_hz=4000, vowel_lowpass_hz=3000)
