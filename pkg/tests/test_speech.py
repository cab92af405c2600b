import numpy as np
import pytest

from conftest import all_voiced_mask
from voxhf.audio import AudioBuffer
from voxhf.preprocess import PreprocessConfig, detect_voiced
from voxhf.speech import (
    SPEECH_FEATURE_NAMES,
    UnvoicedRecordingError,
    count_syllables,
    segment_pauses,
    speech_vector,
)
from voxhf.synth import PausePlan, synthesize_speech, synthesize_vowel

RATE = 16000
CFG = PreprocessConfig()


def continuous_voiced(duration=2.0, seed=0):
    return synthesize_vowel(120, [(700, 80), (1220, 90)], 0.5, 0.5, duration, seed=seed)


def with_gap(gap_s, seed=0):
    a = continuous_voiced(1.0, seed).samples
    b = continuous_voiced(1.0, seed + 1).samples
    return AudioBuffer(np.concatenate([a, np.zeros(int(gap_s * RATE)), b]), RATE)


class TestSegmentPauses:
    def test_continuous(self):
        buf = continuous_voiced()
        seg = segment_pauses(buf, detect_voiced(buf, CFG), CFG)
        assert len(seg.pauses) == 0
        assert seg.phonation_time_s == pytest.approx(buf.duration_s, rel=1e-9)

    def test_single_pause(self):
        buf = with_gap(0.5)
        seg = segment_pauses(buf, detect_voiced(buf, CFG), CFG)
        assert len(seg.pauses) == 1
        a, b = seg.pauses[0]
        assert (b - a) == pytest.approx(0.5, abs=0.05)

    def test_short_gap_not_pause(self):
        buf = with_gap(0.1)
        seg = segment_pauses(buf, detect_voiced(buf, CFG), CFG)
        assert len(seg.pauses) == 0

    def test_tiling(self):
        buf = with_gap(0.4, seed=3)
        seg = segment_pauses(buf, detect_voiced(buf, CFG), CFG)
        covered = sum(b - a for a, b, _ in seg.segments)
        assert covered == pytest.approx(buf.duration_s, abs=1e-9)
        for (_, e1, _), (s2, _, _) in zip(seg.segments, seg.segments[1:]):
            assert e1 == pytest.approx(s2, abs=1e-12)


class TestCountSyllables:
    def test_silence_zero(self):
        buf = AudioBuffer(np.zeros(RATE), RATE)
        mask = detect_voiced(buf, CFG)
        seg = segment_pauses(buf, mask, CFG)
        assert count_syllables(buf, seg, mask, CFG) == 0

    def test_eight_bursts(self):
        buf = synthesize_speech(8, PausePlan(), 120.0, 2.4, seed=1)
        mask = detect_voiced(buf, CFG)
        seg = segment_pauses(buf, mask, CFG)
        assert abs(count_syllables(buf, seg, mask, CFG) - 8) <= 1

    def test_doubling(self):
        counts = []
        for n in (6, 12):
            buf = synthesize_speech(n, PausePlan(), 120.0, n * 0.3, seed=2)
            mask = detect_voiced(buf, CFG)
            seg = segment_pauses(buf, mask, CFG)
            counts.append(count_syllables(buf, seg, mask, CFG))
        assert abs(counts[1] - 2 * counts[0]) <= 1


class TestSpeechVector:
    def _vector(self, buf):
        mask = detect_voiced(buf, CFG)
        seg = segment_pauses(buf, mask, CFG)
        return speech_vector(buf, mask, seg, CFG), seg

    def test_ten_syllable_rates(self):
        buf = synthesize_speech(10, PausePlan(), 120.0, 2.5, seed=3)
        rec, _ = self._vector(buf)
        assert rec.speaking_rate == pytest.approx(4.0, abs=0.4)
        assert rec.articulation_rate == pytest.approx(4.0, abs=0.4)

    def test_inserted_pause_arithmetic(self):
        buf = synthesize_speech(10, PausePlan(((5, 0.5),)), 120.0, 3.0, seed=3)
        rec, _ = self._vector(buf)
        assert rec.speaking_rate == pytest.approx(10 / 3.0, abs=0.4)
        assert rec.articulation_rate == pytest.approx(4.0, abs=0.45)
        assert rec.phonation_ratio == pytest.approx(2.5 / 3.0, abs=0.04)

    def test_monotone_pitch(self):
        buf = synthesize_speech(8, PausePlan(), 130.0, 2.4, seed=4)
        rec, _ = self._vector(buf)
        assert rec.pitch_std_semitones < 0.2

    def test_cross_field_consistency(self):
        buf = synthesize_speech(9, PausePlan(((4, 0.3),)), 120.0, 2.8, seed=5)
        mask = detect_voiced(buf, CFG)
        seg = segment_pauses(buf, mask, CFG)
        rec = speech_vector(buf, mask, seg, CFG)
        syllables = count_syllables(buf, seg, mask, CFG)
        assert rec.speaking_rate == pytest.approx(syllables / rec.total_duration_s)
        assert rec.articulation_rate == pytest.approx(syllables / seg.phonation_time_s)
        assert rec.phonation_ratio + seg.pause_time_s / rec.total_duration_s == (
            pytest.approx(1.0, abs=1e-9)
        )

    def test_silence_insertion_property(self):
        base = synthesize_speech(10, PausePlan(), 120.0, 2.5, seed=6)
        rec0, _ = self._vector(base)
        padded = AudioBuffer(
            np.concatenate(
                [base.samples[: len(base) // 2], np.zeros(int(0.6 * RATE)),
                 base.samples[len(base) // 2 :]]
            ),
            RATE,
        )
        rec1, _ = self._vector(padded)
        assert rec1.speaking_rate < rec0.speaking_rate
        assert rec1.phonation_ratio < rec0.phonation_ratio
        assert rec1.articulation_rate == pytest.approx(rec0.articulation_rate, rel=0.05)

    def test_feature_count(self):
        buf = synthesize_speech(8, PausePlan(), 120.0, 2.4, seed=7)
        rec, _ = self._vector(buf)
        assert len(rec.as_dict()) == 25
        assert SPEECH_FEATURE_NAMES == list(rec.as_dict())

    def test_unvoiced_error(self):
        buf = AudioBuffer(np.zeros(2 * RATE), RATE)
        mask = detect_voiced(buf, CFG)
        seg = segment_pauses(buf, mask, CFG)
        with pytest.raises(UnvoicedRecordingError):
            speech_vector(buf, mask, seg, CFG)

    def test_articulation_at_least_speaking(self):
        buf = synthesize_speech(10, PausePlan(((3, 0.3), (7, 0.4))), 115.0, 3.2, seed=8)
        rec, seg = self._vector(buf)
        assert len(seg.pauses) >= 1
        assert rec.articulation_rate >= rec.speaking_rate
