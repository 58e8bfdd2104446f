"""Pipeline configuration: a flat-key JSON file, overridable per CLI flag."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path


class ConfigError(ValueError):
    """Invalid configuration or missing input; maps to exit code 2."""


@dataclass
class PipelineConfig:
    # inputs
    train_home_csv: str | None = None
    train_away_csv: str | None = None
    test_home_csv: str | None = None
    test_away_csv: str | None = None
    test_events_csv: str | None = None
    frames_360_json: str | None = None
    events_360_json: str | None = None
    # artifacts
    model_path: str = "model.json"
    output_dir: str = "out"
    # degradation
    sample_period_s: float = 1.0
    visibility_radius_m: float = 30.0
    trim_frames: int = 30
    # forecaster
    ar_order: int = 2
    ma_order: int = 1
    ball_lags: int = 2
    grid_step_s: float = 1.0
    # interpolation / assignment / ingest
    alpha: float = 0.5
    log_density_floor: float = -50.0
    axis_disagreement_m: float = 5.0
    # evaluation / output
    percentiles: tuple[float, ...] = (25.0, 50.0, 75.0, 95.0)
    enrich_period_s: float = 1.0

    def validate(self) -> None:
        if self.sample_period_s <= 0 or self.grid_step_s <= 0 or self.enrich_period_s <= 0:
            raise ConfigError("periods and grid step must be positive")
        if self.visibility_radius_m <= 0:
            raise ConfigError("visibility_radius_m must be positive")
        if self.trim_frames < 0:
            raise ConfigError("trim_frames must be non-negative")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.ar_order < 0 or self.ma_order < 0 or self.ball_lags < 0:
            raise ConfigError("model orders must be non-negative")

    def require_paths(self, *names: str) -> None:
        for name in names:
            value = getattr(self, name)
            if not value:
                raise ConfigError(f"config key '{name}' is required for this command")
            if not Path(value).exists():
                raise ConfigError(f"{name}: path does not exist: {value}")


_FIELDS = {f.name: f for f in dataclasses.fields(PipelineConfig)}


def load_config(path: str | Path | None) -> PipelineConfig:
    cfg = PipelineConfig()
    if path is None:
        return cfg
    try:
        doc = json.loads(Path(path).read_text(encoding="utf8"))
    except FileNotFoundError:
        raise ConfigError(f"config file does not exist: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}")
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {path} must hold a flat JSON object")
    apply_overrides(cfg, doc, source=str(path))
    return cfg


def apply_overrides(cfg: PipelineConfig, values: dict, *, source: str = "flags") -> None:
    for key, value in values.items():
        if value is None:
            continue
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key '{key}' (from {source})")
        if key == "percentiles":
            value = tuple(float(v) for v in value)
        setattr(cfg, key, value)
    cfg.validate()
