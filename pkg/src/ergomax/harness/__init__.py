"""Experiment harness: configs, deterministic runs, CSV/JSON artifacts, CLI."""

from __future__ import annotations

from .config import (AnalysisConfig, CheckpointConfig, ExperimentConfig,
                     MapConfig, ModelConfig, ObservableConfig, ScheduleConfig,
                     SequenceSpecConfig, TargetConfig, config_hash, from_dict,
                     from_toml, to_dict, to_toml, validate)
from .runner import RunSummary, replay, run

__all__ = [
    "AnalysisConfig", "CheckpointConfig", "ExperimentConfig", "MapConfig",
    "ModelConfig", "ObservableConfig", "ScheduleConfig", "SequenceSpecConfig",
    "TargetConfig", "config_hash", "from_dict", "from_toml", "to_dict",
    "to_toml", "validate", "RunSummary", "replay", "run",
]
