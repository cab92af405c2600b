import numpy as np
import pytest

from voxhf.audio import AudioBuffer
from voxhf.preprocess import PreprocessConfig, VoicedMask, detect_voiced


@pytest.fixture
def cfg():
    return PreprocessConfig()


def make_tone(freq, duration_s=2.0, rate=16000, amp=0.5):
    t = np.arange(int(duration_s * rate)) / rate
    return AudioBuffer(amp * np.sin(2 * np.pi * freq * t), rate)


def make_noise(duration_s=2.0, rate=16000, amp=0.3, seed=1234):
    rng = np.random.default_rng(seed)
    return AudioBuffer(amp * rng.standard_normal(int(duration_s * rate)) / 4, rate)


def all_voiced_mask(buf, cfg=PreprocessConfig()):
    n = len(detect_voiced(buf, cfg).voiced)
    return VoicedMask(np.ones(n, dtype=bool), cfg.frame_ms, cfg.hop_ms)
