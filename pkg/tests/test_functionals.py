import math
from datetime import date

import numpy as np
import pytest

from voxhf.functionals import (
    FEATURES_PER_VOWEL,
    FUNCTIONAL_NAMES,
    daily_vowel_vector,
    functionals,
    recording_features,
)
from voxhf.lld import extract_vowel_llds
from voxhf.preprocess import PreprocessConfig, detect_voiced
from voxhf.synth import synthesize_vowel


def oracle_functionals(contour, times):
    """Brute-force reference: explicit loops, sort-based quartiles, direct
    moment sums. Independent of the vectorized implementation."""
    vals = [(t, v) for t, v in zip(times, contour) if math.isfinite(v)]
    nan = {name: float("nan") for name in FUNCTIONAL_NAMES}
    if len(vals) < 3:
        return nan
    xs = sorted(v for _, v in vals)
    n = len(xs)

    def quantile(q):
        h = (n - 1) * q
        lo = math.floor(h)
        hi = math.ceil(h)
        return xs[lo] + (h - lo) * (xs[hi] - xs[lo])

    mean = sum(xs) / n
    m2 = sum((v - mean) ** 2 for v in xs) / n
    m3 = sum((v - mean) ** 3 for v in xs) / n
    m4 = sum((v - mean) ** 4 for v in xs) / n
    std = math.sqrt(m2)
    skew = m3 / m2**1.5 if m2 > 0 else float("nan")
    kurt = m4 / m2**2 - 3.0 if m2 > 0 else float("nan")

    tm = sum(t for t, _ in vals) / len(vals)
    xm = sum(v for _, v in vals) / len(vals)
    var_t = sum((t - tm) ** 2 for t, _ in vals)
    cov = sum((t - tm) * (v - xm) for t, v in vals)
    slope = cov / var_t if var_t > 0 else float("nan")

    deltas = [
        abs(contour[i] - contour[i - 1])
        for i in range(1, len(contour))
        if math.isfinite(contour[i]) and math.isfinite(contour[i - 1])
    ]
    mad = sum(deltas) / len(deltas) if deltas else float("nan")

    return {
        "mean": mean, "std": std, "min": xs[0], "max": xs[-1],
        "range": xs[-1] - xs[0], "q1": quantile(0.25), "median": quantile(0.5),
        "q3": quantile(0.75), "iqr": quantile(0.75) - quantile(0.25),
        "skewness": skew, "kurtosis": kurt, "slope_per_s": slope,
        "mean_abs_delta": mad,
    }


class TestFunctionals:
    def test_constant_contour(self):
        t = np.arange(10) * 0.01
        out = functionals(np.full(10, 3.5), t)
        assert out["mean"] == 3.5
        assert out["std"] == 0.0
        assert out["iqr"] == 0.0
        assert out["slope_per_s"] == 0.0
        assert math.isnan(out["skewness"])
        assert math.isnan(out["kurtosis"])

    def test_exact_line_slope(self):
        t = np.arange(4) * 0.01
        out = functionals(np.array([1.0, 2.0, 3.0, 4.0]), t)
        assert out["slope_per_s"] == pytest.approx(100.0, abs=1e-9)

    def test_brute_force_oracle_200_contours(self):
        rng = np.random.default_rng(2024)
        for trial in range(200):
            n = int(rng.integers(3, 120))
            x = rng.standard_normal(n) * rng.uniform(0.1, 50)
            if trial % 3 == 0:
                nan_idx = rng.choice(n, size=int(rng.integers(0, n)), replace=False)
                x[nan_idx] = np.nan
            t = np.cumsum(rng.uniform(0.005, 0.02, size=n))
            got = functionals(x, t)
            want = oracle_functionals(list(x), list(t))
            for name in FUNCTIONAL_NAMES:
                g, w = got[name], want[name]
                if math.isnan(w):
                    assert math.isnan(g), (trial, name)
                else:
                    assert abs(g - w) <= 1e-10 * max(1.0, abs(w)), (trial, name)

    def test_too_few_values(self):
        t = np.arange(2) * 0.01
        out = functionals(np.array([1.0, 2.0]), t)
        assert all(math.isnan(v) for v in out.values())

    def test_quartile_ordering(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            x = rng.standard_normal(40)
            out = functionals(x, np.arange(40) * 0.01)
            assert out["min"] <= out["q1"] <= out["median"] <= out["q3"] <= out["max"]


def _recording(seed, shimmer=1.0):
    buf = synthesize_vowel(110, [(700, 80), (1220, 90)], 1.0, shimmer, 2.0, seed=seed)
    return extract_vowel_llds(buf, detect_voiced(buf, PreprocessConfig()))


class TestDailyVector:
    def test_feature_count(self):
        m = _recording(1)
        feats = recording_features(m)
        assert len(feats) == FEATURES_PER_VOWEL == 1664

    def test_identical_repetitions_collapse(self):
        m = _recording(2)
        single = daily_vowel_vector("s1", date(2024, 1, 1), "vowel_a", [m])
        triple = daily_vowel_vector("s1", date(2024, 1, 1), "vowel_a", [m, m, m])
        for name, v in single.values.items():
            if math.isfinite(v):
                assert triple.values[name] == pytest.approx(v, rel=1e-12)

    def test_nan_policy_average(self):
        m1, m2 = _recording(3), _recording(4)
        v1 = daily_vowel_vector("s", date(2024, 1, 1), "vowel_o", [m1])
        v2 = daily_vowel_vector("s", date(2024, 1, 1), "vowel_o", [m2])
        both = daily_vowel_vector("s", date(2024, 1, 1), "vowel_o", [m1, m2])
        name = "f0_hz.mean"
        expect = (v1.values[name] + v2.values[name]) / 2
        assert both.values[name] == pytest.approx(expect, rel=1e-12)

    def test_zero_repetitions(self):
        assert daily_vowel_vector("s", date(2024, 1, 1), "vowel_a", []) is None

    def test_permutation_invariance(self):
        reps = [_recording(i) for i in range(3)]
        a = daily_vowel_vector("s", date(2024, 1, 1), "vowel_i", reps)
        b = daily_vowel_vector("s", date(2024, 1, 1), "vowel_i", reps[::-1])
        for name, v in a.values.items():
            if math.isfinite(v):
                assert b.values[name] == pytest.approx(v, rel=1e-12)

    def test_planted_shimmer_in_daily_vector(self):
        reps = [_recording(seed, shimmer=2.0) for seed in (10, 11, 12)]
        vec = daily_vowel_vector("s", date(2024, 1, 1), "vowel_o", reps)
        assert 0.017 <= vec.values["shimmer_local.mean"] <= 0.023
