"""Pipeline configuration: one JSON document with namespaced sections that
map onto each stage's config dataclass. Unknown keys are rejected; the full
effective configuration is echoed into every output directory for
auditability.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from voxhf.evaluate import CvConfig
from voxhf.forest import ForestConfig
from voxhf.preprocess import PreprocessConfig
from voxhf.synth import ChannelNoise, EffectMap, SynthConfig

THREADS_ENV_VAR = "VOXHF_THREADS"


class ConfigError(ValueError):
    """Malformed pipeline configuration."""


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    threads: int = 1
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    window: dict = field(default_factory=dict)       # {"k_days": ..} overrides
    model: ForestConfig = field(default_factory=ForestConfig)
    cv: CvConfig = field(default_factory=CvConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)

    def with_seed(self, seed: int) -> "PipelineConfig":
        return replace(
            self,
            seed=seed,
            model=replace(self.model, seed=seed),
            cv=replace(self.cv, seed=seed),
            synth=replace(self.synth, seed=seed),
        )

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "threads": self.threads,
            "preprocess": asdict(self.preprocess),
            "window": dict(self.window),
            "model": asdict(self.model),
            "cv": _cv_dict(self.cv),
            "synth": asdict(self.synth),
        }

    def echo(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "effective_config.json").write_text(
            json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"
        )


def _cv_dict(cv: CvConfig) -> dict:
    d = asdict(cv)
    d["rfe_sizes"] = list(cv.rfe_sizes)
    d["min_leaf_grid"] = list(cv.min_leaf_grid)
    return d


def _build(cls, section: dict, where: str):
    allowed = {f.name for f in fields(cls)}
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    try:
        return cls(**section)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"invalid {where} config: {err}") from err


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> PipelineConfig:
    """Build the effective config: file values (if any), then overrides
    (CLI flags). Tuple-valued fields accept JSON lists."""
    raw: dict = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as err:
            raise ConfigError(f"config {path} is not valid JSON: {err}") from err
        if not isinstance(raw, dict):
            raise ConfigError(f"config {path} must be a JSON object")
    for key, value in (overrides or {}).items():
        section, _, leaf = key.partition(".")
        if leaf:
            raw.setdefault(section, {})
            if not isinstance(raw[section], dict):
                raise ConfigError(f"{section} must be an object")
            raw[section][leaf] = value
        else:
            raw[key] = value

    known = {"seed", "threads", "preprocess", "window", "model", "cv", "synth"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")

    model_raw = dict(raw.get("model", {}))
    cv_raw = dict(raw.get("cv", {}))
    for key in ("rfe_sizes", "min_leaf_grid"):
        if key in cv_raw and isinstance(cv_raw[key], list):
            cv_raw[key] = tuple(cv_raw[key])
    synth_raw = dict(raw.get("synth", {}))
    if "effects" in synth_raw and isinstance(synth_raw["effects"], dict):
        synth_raw["effects"] = _build(EffectMap, synth_raw["effects"],
                                      "synth.effects")
    if "channel_noise" in synth_raw and isinstance(synth_raw["channel_noise"], dict):
        synth_raw["channel_noise"] = _build(ChannelNoise,
                                            synth_raw["channel_noise"],
                                            "synth.channel_noise")

    window_raw = dict(raw.get("window", {}))
    allowed_window = {"k_days", "min_present_days"}
    if set(window_raw) - allowed_window:
        raise ConfigError(
            f"unknown keys in window: {sorted(set(window_raw) - allowed_window)}"
        )

    cfg = PipelineConfig(
        seed=int(raw.get("seed", 0)),
        threads=int(raw.get("threads", 0) or 0),
        preprocess=_build(PreprocessConfig, dict(raw.get("preprocess", {})),
                          "preprocess"),
        window=window_raw,
        model=_build(ForestConfig, model_raw, "model"),
        cv=_build(CvConfig, cv_raw, "cv"),
        synth=_build(SynthConfig, synth_raw, "synth"),
    )
    if "seed" in raw and "seed" not in model_raw:
        cfg = cfg.with_seed(int(raw["seed"]))
    if cfg.threads <= 0:
        env = os.environ.get(THREADS_ENV_VAR, "")
        cfg = replace(cfg, threads=int(env) if env.isdigit() and int(env) > 0 else 1)
    return cfg
