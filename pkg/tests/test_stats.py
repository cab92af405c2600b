from datetime import date, timedelta
from itertools import combinations

import numpy as np
import pytest

from voxhf.functionals import DailyFeatureVector
from voxhf.manifest import LabelRecord, SubjectProfile
from voxhf.stats import (
    DegenerateCorrelationError,
    compare_groups,
    mann_whitney,
    rmcorr,
    rmcorr_matrix,
    screen_features,
)
from voxhf.windows import FeatureTable, WindowConfig, build_window_dataset


def oracle_rmcorr_ancova(x, y, subjects):
    """Dummy-coded least-squares ANCOVA: subject indicators + common slope.
    r^2 = SS_measure / (SS_measure + SS_error), sign from the slope."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    sids = sorted(set(subjects))
    D = np.column_stack([np.asarray(subjects) == s for s in sids]).astype(float)
    full = np.column_stack([D, x])
    beta_full, *_ = np.linalg.lstsq(full, y, rcond=None)
    rss_full = float(((y - full @ beta_full) ** 2).sum())
    beta_red, *_ = np.linalg.lstsq(D, y, rcond=None)
    rss_red = float(((y - D @ beta_red) ** 2).sum())
    ss_measure = rss_red - rss_full
    r = np.sqrt(ss_measure / (ss_measure + rss_full))
    return float(np.sign(beta_full[-1]) * r), len(y) - len(sids) - 1


def random_longitudinal(rng, n_subjects=None):
    n_subjects = n_subjects or int(rng.integers(3, 8))
    xs, ys, sids = [], [], []
    for s in range(n_subjects):
        n_obs = int(rng.integers(2, 9))
        offset_x, offset_y = rng.normal(0, 5, size=2)
        slope = rng.uniform(-2, 2)
        x = rng.standard_normal(n_obs) * rng.uniform(0.5, 3)
        y = slope * x + offset_y + rng.standard_normal(n_obs)
        xs.append(x + offset_x)
        ys.append(y)
        sids.extend([f"s{s}"] * n_obs)
    return np.concatenate(xs), np.concatenate(ys), sids


class TestRmcorr:
    def test_perfect_within_subject_line(self):
        x, y, sids = [], [], []
        rng = np.random.default_rng(1)
        for s in range(4):
            xv = rng.standard_normal(5)
            x.extend(xv)
            y.extend(xv + 10 * s)
            sids.extend([f"s{s}"] * 5)
        res = rmcorr(x, y, sids)
        assert res.r == pytest.approx(1.0, abs=1e-12)

    def test_negative_slope(self):
        x, y, sids = [], [], []
        rng = np.random.default_rng(2)
        for s in range(4):
            xv = rng.standard_normal(5)
            x.extend(xv)
            y.extend(-2 * xv + 3 * s)
            sids.extend([f"s{s}"] * 5)
        res = rmcorr(x, y, sids)
        assert res.r == pytest.approx(-1.0, abs=1e-12)
        assert res.slope_sign == -1

    def test_matches_ancova_oracle_50_datasets(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            x, y, sids = random_longitudinal(rng)
            res = rmcorr(x, y, sids)
            r_oracle, df_oracle = oracle_rmcorr_ancova(x, y, sids)
            assert res.r == pytest.approx(r_oracle, abs=1e-8)
            assert res.df == df_oracle

    def test_per_subject_offset_invariance(self):
        rng = np.random.default_rng(3)
        x, y, sids = random_longitudinal(rng)
        res0 = rmcorr(x, y, sids)
        offsets = {s: rng.normal(0, 100) for s in set(sids)}
        x2 = x + np.array([offsets[s] for s in sids])
        y2 = y + np.array([offsets[s] * 2 for s in sids])
        res1 = rmcorr(x2, y2, sids)
        assert res1.r == pytest.approx(res0.r, abs=1e-10)

    def test_constant_series_error(self):
        with pytest.raises(DegenerateCorrelationError):
            rmcorr([1, 1, 1, 1], [1, 2, 3, 4], ["a", "a", "b", "b"])

    def test_matrix_path_matches_scalar(self):
        rng = np.random.default_rng(4)
        x, y, sids = random_longitudinal(rng, n_subjects=5)
        X = np.column_stack([x, x**2, rng.standard_normal(len(x))])
        r, df, p = rmcorr_matrix(X, y, sids)
        for j in range(3):
            res = rmcorr(X[:, j], y, sids)
            assert r[j] == pytest.approx(res.r, abs=1e-12)
            assert df[j] == res.df
            assert p[j] == pytest.approx(res.p, abs=1e-12)

    def test_matrix_nan_column(self):
        rng = np.random.default_rng(5)
        x, y, sids = random_longitudinal(rng, n_subjects=5)
        X = np.column_stack([x, x.copy()])
        X[::7, 1] = np.nan
        r, df, p = rmcorr_matrix(X, y, sids)
        ok = np.isfinite(X[:, 1])
        res = rmcorr(X[ok, 1], y[ok], [s for s, m in zip(sids, ok) if m])
        assert r[1] == pytest.approx(res.r, abs=1e-12)


D0 = date(2024, 1, 1)


def make_screen_dataset(rng, n_subjects=8, n_anchors=4, planted=True):
    vecs, labels = [], []
    profiles = {}
    for s in range(n_subjects):
        sid = f"s{s}"
        profiles[sid] = SubjectProfile(sid, 60.0, "male", True)
        kccq_by_day = {}
        for day in range(56):
            d = D0 + timedelta(days=day)
            health = 70 + 15 * np.sin(day / 9 + s) + rng.normal(0, 2)
            kccq_by_day[day] = health
            values = {"hfast": rng.normal(0, 1)}
            if planted:
                values["weight_kg"] = health + rng.normal(0, 1.0)
            else:
                values["weight_kg"] = rng.normal(0, 1)
            values["systolic"] = rng.normal(0, 1)
            vecs.append(DailyFeatureVector(sid, d, "soc", values))
        for a in range(n_anchors):
            day = 13 + a * 14
            labels.append(LabelRecord(sid, D0 + timedelta(days=day),
                                      float(np.clip(kccq_by_day[day], 0, 100))))
    return FeatureTable.from_vectors(vecs), labels, profiles


class TestScreenFeatures:
    def test_union_bound(self):
        rng = np.random.default_rng(6)
        table, labels, profiles = make_screen_dataset(rng)
        ds = build_window_dataset(table, labels, profiles, WindowConfig(k_days=7))
        report = screen_features(ds, per_descriptor_n=25)
        assert len(report.selected) <= 150

    def test_planted_feature_ranked_first_for_mean(self):
        rng = np.random.default_rng(7)
        table, labels, profiles = make_screen_dataset(rng)
        ds = build_window_dataset(table, labels, profiles, WindowConfig(k_days=7))
        report = screen_features(ds, per_descriptor_n=2)
        mean_rs = {
            name: abs(r)
            for name, r in report.r.items()
            if name.endswith(".mean")
        }
        assert max(mean_rs, key=mean_rs.get) == "soc.weight_kg.mean"
        assert "soc.weight_kg.mean" in report.selected

    def test_planted_beats_noise_null_distribution(self):
        rng = np.random.default_rng(8)
        table, labels, profiles = make_screen_dataset(rng, planted=True)
        ds = build_window_dataset(table, labels, profiles, WindowConfig(k_days=7))
        report = screen_features(ds)
        planted_r = abs(report.r["soc.weight_kg.mean"])
        noise_rs = [abs(r) for name, r in report.r.items()
                    if "weight_kg" not in name]
        assert planted_r > np.percentile(noise_rs, 95)


class TestCompareGroups:
    def test_identical_groups(self):
        vals = np.full(10, 3.0)
        res = compare_groups(vals, vals)
        assert res.effect == 0.0
        assert res.p >= 0.99

    def test_fully_separated(self):
        best = np.array([10.0, 11.0, 12.0, 13.0])
        worst = np.array([1.0, 2.0, 3.0])
        res = compare_groups(best, worst)
        assert res.test == "mann_whitney"
        assert res.effect == pytest.approx(1.0)
        res_flipped = compare_groups(worst, best)
        assert res_flipped.effect == pytest.approx(-1.0)

    def test_shifted_normals_cohens_d(self):
        rng = np.random.default_rng(9)
        best = rng.normal(1.0, 1.0, 200)
        worst = rng.normal(0.0, 1.0, 200)
        res = compare_groups(best, worst)
        assert res.test == "welch_t"
        assert 0.8 <= res.effect <= 1.2
        assert res.p < 1e-6

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(10)
        best = rng.normal(1.0, 1.0, 30)
        worst = rng.gamma(2.0, 1.0, 25)
        u1, p1 = mann_whitney(best, worst)
        u2, p2 = mann_whitney(np.exp(best), np.exp(worst))
        assert u1 == u2
        assert p1 == pytest.approx(p2, abs=1e-12)

    def test_exact_enumeration_small_samples(self):
        # compare exact p against full permutation enumeration
        best = np.array([3.1, 5.2, 7.3])
        worst = np.array([1.0, 4.1, 6.2])
        u_obs, p = mann_whitney(best, worst)
        pooled = np.concatenate([best, worst])
        n1 = len(best)
        us = []
        for idx in combinations(range(6), n1):
            g1 = pooled[list(idx)]
            g2 = pooled[[i for i in range(6) if i not in idx]]
            us.append((g2[None, :] > g1[:, None]).sum())
        us = np.array(us)
        lo = np.mean(us <= u_obs)
        hi = np.mean(us >= u_obs)
        expect = min(1.0, 2 * min(lo, hi))
        assert p == pytest.approx(expect, abs=1e-12)

    def test_reports_medians(self):
        best = np.array([1.0, 2.0, 3.0, 4.0])
        worst = np.array([5.0, 6.0, 7.0, 8.0])
        res = compare_groups(best, worst)
        assert res.median_best == 2.5
        assert res.median_worst == 6.5
