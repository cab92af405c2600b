import csv
import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from voxhf.cli import main

FAST_CONFIG = {
    "seed": 11,
    "synth": {"n_subjects": 6, "days": 14, "label_every": 3,
              "vowel_duration_s": 1.5,
              "ramp_fraction": 0.34, "kccq_noise_sd": 5.0},
    "model": {"n_trees": 40},
    "cv": {"rfe_sizes": [5, 10], "min_leaf_grid": [2], "per_descriptor_n": 6},
}


def run(*argv) -> int:
    return main([str(a) for a in argv])


@pytest.fixture(scope="session")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg_path = root / "config.json"
    cfg_path.write_text(json.dumps(FAST_CONFIG))
    cohort = root / "cohort"
    work = root / "work"
    assert run("synth", "--out", cohort, "--config", cfg_path, "--threads", "2") == 0
    assert run("extract", "--data", cohort, "--out", work, "--config", cfg_path,
               "--threads", "2") == 0
    return {"root": root, "cohort": cohort, "work": work, "config": cfg_path}


def sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class TestSynthExtract:
    def test_cohort_files(self, workspace):
        cohort = workspace["cohort"]
        for name in ("recordings.csv", "covariates.csv", "labels.csv",
                     "subjects.csv", "ground_truth.json",
                     "effective_config.json"):
            assert (cohort / name).exists()

    def test_features_written(self, workspace):
        feats = workspace["work"] / "features_daily.csv"
        assert feats.exists()
        with open(feats) as fh:
            header = fh.readline().strip()
        assert header == "subject_id,date,feature,value"

    def test_synth_determinism_across_threads(self, workspace, tmp_path):
        cfg = workspace["config"]
        a = tmp_path / "a"
        b = tmp_path / "b"
        assert run("synth", "--out", a, "--config", cfg, "--threads", "1") == 0
        assert run("synth", "--out", b, "--config", cfg, "--threads", "2") == 0
        files_a = sorted(p.relative_to(a) for p in a.rglob("*.csv"))
        files_b = sorted(p.relative_to(b) for p in b.rglob("*.csv"))
        assert files_a == files_b
        for rel in files_a:
            assert sha(a / rel) == sha(b / rel), rel
        wavs_a = sorted(p.relative_to(a) for p in a.rglob("*.wav"))
        for rel in wavs_a[:40]:
            assert sha(a / rel) == sha(b / rel), rel


class TestPipelineCommands:
    def test_aggregate(self, workspace, tmp_path):
        out = tmp_path / "agg"
        assert run("aggregate", "--data", workspace["cohort"], "--features",
                   workspace["work"] / "features_daily.csv", "--k", "4",
                   "--out", out, "--config", workspace["config"]) == 0
        windows = out / "windows_K4.csv"
        assert windows.exists()
        with open(windows) as fh:
            header = fh.readline().split(",")
        assert header[:4] == ["subject_id", "anchor_date", "kccq", "present_days"]

    def test_screen(self, workspace, tmp_path):
        out = tmp_path / "scr"
        assert run("screen", "--data", workspace["cohort"], "--features",
                   workspace["work"] / "features_daily.csv", "--k", "4",
                   "--out", out, "--config", workspace["config"]) == 0
        assert (out / "rmcorr_report.csv").exists()
        selected = (out / "selected_features.txt").read_text().splitlines()
        assert 0 < len(selected) <= 6 * 6

    def test_train(self, workspace, tmp_path):
        out = tmp_path / "train"
        assert run("train", "--data", workspace["cohort"], "--features",
                   workspace["work"] / "features_daily.csv", "--set", "voice",
                   "--k", "4", "--out", out, "--config", workspace["config"]) == 0
        report = json.loads((out / "cv_report.json").read_text())
        assert len(report["folds"]) == 5
        assert report["screening_mode"] == "per_fold"
        for fold in report["folds"]:
            assert not (set(fold["test_subjects"])
                        & {s for f in report["folds"] if f != fold
                           for s in f["test_subjects"]})

    def test_evaluate_and_report(self, workspace, tmp_path):
        out = tmp_path / "ev"
        assert run("evaluate", "--data", workspace["cohort"], "--features",
                   workspace["work"] / "features_daily.csv", "--sets", "soc,voice",
                   "--k-min", "3", "--k-max", "4", "--roc-k", "4",
                   "--out", out, "--config", workspace["config"],
                   "--threads", "2") == 0
        with open(out / "sweep.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 4  # 2 sets x 2 K
        assert (out / "sweep.svg").exists()
        assert (out / "roc_pr.svg").exists()
        svg = (out / "sweep.svg").read_text()
        assert svg.startswith("<svg")

        bundle = tmp_path / "bundle"
        assert run("report", "--out", bundle, out,
                   "--config", workspace["config"]) == 0
        assert (bundle / "sweep.csv").exists()
        assert (bundle / "effective_config.json").exists()

    def test_explain(self, workspace, tmp_path):
        out = tmp_path / "ex"
        assert run("explain", "--data", workspace["cohort"], "--features",
                   workspace["work"] / "features_daily.csv", "--set", "voice",
                   "--k", "4", "--out", out, "--config", workspace["config"]) == 0
        with open(out / "shap_values.csv") as fh:
            header = fh.readline().split(",")
        assert header[:3] == ["subject_id", "anchor_date", "base_value"]
        assert (out / "shap_summary.svg").exists()

    def test_compare(self, workspace, tmp_path):
        out = tmp_path / "cmp"
        assert run("compare", "--data", workspace["cohort"], "--features",
                   workspace["work"] / "features_daily.csv", "--set", "voice",
                   "--k", "4", "--out", out, "--config", workspace["config"]) == 0
        with open(out / "group_stats.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert rows
        assert {"feature", "test", "p", "effect"} <= set(rows[0])

    def test_case_study(self, workspace, tmp_path):
        out = tmp_path / "cs"
        assert run("case-study", "--data", workspace["cohort"], "--features",
                   workspace["work"] / "features_daily.csv", "--holdout",
                   "subj00", "--set", "voice", "--k", "4", "--out", out,
                   "--config", workspace["config"]) == 0
        payload = json.loads((out / "case_study.json").read_text())
        assert payload["subject"] == "subj00"
        assert len(payload["p_worst"]) == len(payload["kccq"])


class TestShortRecordingSkip:
    def test_extract_skips_short_file_logs_and_exits_zero(self, tmp_path, capsys):
        from voxhf.audio import AudioBuffer, write_wav
        from voxhf.synth import synthesize_vowel
        import numpy as np

        cohort = tmp_path / "cohort"
        (cohort / "wavs").mkdir(parents=True)
        good = synthesize_vowel(120, [(700, 80), (1220, 90)], 0.8, 0.8, 2.0, seed=1)
        write_wav(cohort / "wavs" / "good.wav", good)
        short = synthesize_vowel(120, [(700, 80)], 0.5, 0.5, 0.8, seed=2)
        write_wav(cohort / "wavs" / "short.wav", short)
        (cohort / "recordings.csv").write_text(
            "subject_id,date,task,repetition,path\n"
            "s1,2024-01-05,vowel_a,1,wavs/good.wav\n"
            "s1,2024-01-05,vowel_o,1,wavs/short.wav\n"
        )
        (cohort / "covariates.csv").write_text(
            "subject_id,date,weight_kg,systolic,diastolic,hfast\n")
        (cohort / "labels.csv").write_text("subject_id,date,kccq\n")
        (cohort / "subjects.csv").write_text(
            "subject_id,age,sex,native_speaker\ns1,60,male,true\n")

        assert run("extract", "--data", cohort, "--out", tmp_path / "w") == 0
        err = capsys.readouterr().err
        assert "duration<1s" in err
        assert "short.wav" in err


class TestErrors:
    def test_unknown_config_key(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"modle": {}}))
        assert run("synth", "--out", tmp_path / "x", "--config", bad) == 1

    def test_missing_data_dir(self, tmp_path):
        assert run("extract", "--data", tmp_path / "nope",
                   "--out", tmp_path / "o") == 1

    def test_usage_error_exit_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["train", "--bogus"])
        assert exc.value.code == 2

    def test_unknown_feature_set(self, workspace, tmp_path):
        assert run("evaluate", "--data", workspace["cohort"], "--features",
                   workspace["work"] / "features_daily.csv", "--sets", "nope",
                   "--out", tmp_path / "o") == 1
