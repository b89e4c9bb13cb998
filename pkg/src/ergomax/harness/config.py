"""Experiment configuration: typed, validated, TOML round-trippable.

Configs are plain frozen dataclasses holding only TOML-representable values
(str/int/float/bool, tuples, nested sections). ``from_toml(to_toml(c))``
reproduces ``c`` exactly: floats are serialised with repr (shortest
round-trip) and optional fields are simply omitted when None.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

from ..dynamics import MAP_IDS, from_id
from ..errors import ConfigInvalid, ParameterError
from ..observables import OBSERVABLE_KINDS
from ..asymptotics import SEQUENCE_KINDS, EXPONENTIAL, PARETO, GAUSSIAN
from ..targets import RULE_KINDS

RUN_KINDS = ("simulate", "bc", "dim", "decay", "iid", "classify")
TARGET_MODES = ("explicit", "auto", "periodic")
MODEL_KINDS = (EXPONENTIAL, PARETO, GAUSSIAN)
DECAY_PAIRS = ("dist_half", "identity", "laminar", "square")


@dataclass(frozen=True)
class MapConfig:
    id: str = "tent"
    params: dict = field(default_factory=dict)
    jitter: float = 0.0


@dataclass(frozen=True)
class ObservableConfig:
    kind: str = "neg_log_dist"
    alpha: Optional[float] = None
    cap: Optional[float] = None
    eps_floor: float = 1e-300


@dataclass(frozen=True)
class TargetConfig:
    mode: str = "explicit"
    point: Optional[tuple] = None
    period: Optional[int] = None
    exclusion_radius: float = 1e-3


@dataclass(frozen=True)
class CheckpointConfig:
    kind: str = "geometric"     # "geometric" | "explicit"
    ratio: float = 1.15
    explicit: Optional[tuple] = None


@dataclass(frozen=True)
class SequenceSpecConfig:
    kind: str = "plain_log"
    eta: Optional[float] = None
    beta: Optional[float] = None
    p: Optional[float] = None
    polylog: float = 0.0


@dataclass(frozen=True)
class ScheduleConfig:
    rule: str = "log_power"
    beta: Optional[float] = 3.0
    measure: str = "analytic"    # "analytic" | "empirical"
    calibration_n: int = 100000


@dataclass(frozen=True)
class ModelConfig:
    kind: str = "exponential"
    gamma: Optional[float] = None


@dataclass(frozen=True)
class AnalysisConfig:
    tail_fraction: float = 0.25
    ratio_u: Optional[SequenceSpecConfig] = None
    band_lower: Optional[SequenceSpecConfig] = None
    band_upper: Optional[SequenceSpecConfig] = None
    band_n_min: int = 1000
    dichotomy: bool = False
    fit_e_min: Optional[float] = None
    fit_e_max: Optional[float] = None
    short_return: bool = False
    short_return_k_max: int = 8
    short_return_alpha: float = 0.1
    lags: Optional[tuple] = None
    decay_pair: str = "dist_half"
    r_max: float = 0.1
    r_decades: float = 2.5
    r_points: int = 24
    annulus_r: float = 0.01


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "simulate"
    seed: int = 0
    n_orbits: int = 1
    n_max: int = 10000
    burn_in: int = 1000
    out_dir: str = "run"
    map: MapConfig = field(default_factory=MapConfig)
    observable: ObservableConfig = field(default_factory=ObservableConfig)
    target: TargetConfig = field(default_factory=TargetConfig)
    checkpoints: CheckpointConfig = field(default_factory=CheckpointConfig)
    schedule: Optional[ScheduleConfig] = None
    model: Optional[ModelConfig] = None
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)


_SECTIONS = {
    "map": MapConfig,
    "observable": ObservableConfig,
    "target": TargetConfig,
    "checkpoints": CheckpointConfig,
    "schedule": ScheduleConfig,
    "model": ModelConfig,
    "analysis": AnalysisConfig,
}
_SEQ_FIELDS = ("ratio_u", "band_lower", "band_upper")


def to_dict(config: ExperimentConfig) -> dict:
    """Nested plain dict; None fields dropped, tuples to lists."""

    def clean(value):
        if isinstance(value, dict):
            return {k: clean(v) for k, v in value.items() if v is not None}
        if isinstance(value, (list, tuple)):
            return [clean(v) for v in value]
        return value

    return clean(asdict(config))


def from_dict(data: dict) -> ExperimentConfig:
    data = dict(data)
    kwargs = {}
    for name, cls in _SECTIONS.items():
        if name in data:
            section = dict(data.pop(name))
            if cls is AnalysisConfig:
                for seq in _SEQ_FIELDS:
                    if seq in section and section[seq] is not None:
                        section[seq] = SequenceSpecConfig(**section[seq])
                if "lags" in section and section["lags"] is not None:
                    section["lags"] = tuple(section["lags"])
            if cls is TargetConfig and section.get("point") is not None:
                section["point"] = tuple(section["point"])
            if cls is CheckpointConfig and section.get("explicit") is not None:
                section["explicit"] = tuple(section["explicit"])
            try:
                kwargs[name] = cls(**section)
            except TypeError as e:
                raise ConfigInvalid(name, str(e)) from None
    try:
        return ExperimentConfig(**data, **kwargs)
    except TypeError as e:
        raise ConfigInvalid("<root>", str(e)) from None


# --- TOML serialisation -------------------------------------------------------


def _fmt_scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        # repr is shortest-round-trip; TOML 1.0 accepts inf/nan spellings too
        # (the cast strips subclass reprs, e.g. numpy scalars)
        return repr(float(v))
    if isinstance(v, str):
        return json.dumps(v)
    raise ConfigInvalid("<serialise>", f"unsupported scalar {type(v)}")


def _emit_table(name: str, table: dict, out: list) -> None:
    scalars = {k: v for k, v in table.items() if not isinstance(v, dict)}
    subs = {k: v for k, v in table.items() if isinstance(v, dict)}
    if scalars or not subs:
        if name:
            out.append(f"[{name}]")
        for k, v in scalars.items():
            if isinstance(v, list):
                body = ", ".join(_fmt_scalar(x) for x in v)
                out.append(f"{k} = [{body}]")
            else:
                out.append(f"{k} = {_fmt_scalar(v)}")
        out.append("")
    for k, v in subs.items():
        _emit_table(f"{name}.{k}" if name else k, v, out)


def to_toml(config: ExperimentConfig) -> str:
    data = to_dict(config)
    top = {k: v for k, v in data.items() if not isinstance(v, dict)}
    out: list[str] = []
    for k, v in top.items():
        if isinstance(v, list):
            body = ", ".join(_fmt_scalar(x) for x in v)
            out.append(f"{k} = [{body}]")
        else:
            out.append(f"{k} = {_fmt_scalar(v)}")
    out.append("")
    for k, v in data.items():
        if isinstance(v, dict):
            _emit_table(k, v, out)
    return "\n".join(out).rstrip() + "\n"


def from_toml(text: str) -> ExperimentConfig:
    try:
        data = _toml.loads(text)
    except _toml.TOMLDecodeError as e:
        raise ConfigInvalid("<toml>", str(e)) from None
    return from_dict(data)


def config_hash(config: ExperimentConfig) -> str:
    return hashlib.sha256(to_toml(config).encode()).hexdigest()[:16]


# --- validation ----------------------------------------------------------------


def validate(config: ExperimentConfig) -> None:
    """Raise ConfigInvalid naming the offending field."""
    c = config
    if c.kind not in RUN_KINDS:
        raise ConfigInvalid("kind", f"must be one of {RUN_KINDS}")
    if c.seed < 0:
        raise ConfigInvalid("seed", "must be >= 0")
    if c.n_orbits < 1:
        raise ConfigInvalid("n_orbits", "must be >= 1")
    if c.n_max < 1:
        raise ConfigInvalid("n_max", "must be >= 1")
    if c.burn_in < 0:
        raise ConfigInvalid("burn_in", "must be >= 0")
    if not c.out_dir:
        raise ConfigInvalid("out_dir", "must be nonempty")

    if c.kind in ("simulate", "bc", "dim", "decay"):
        if c.map.id not in MAP_IDS:
            raise ConfigInvalid("map.id", f"must be one of {MAP_IDS}")
        try:
            system = from_id(c.map.id, c.map.params, c.map.jitter)
        except ParameterError as e:
            raise ConfigInvalid("map", str(e)) from None
        if c.target.mode not in TARGET_MODES:
            raise ConfigInvalid("target.mode", f"must be one of {TARGET_MODES}")
        if c.target.mode == "explicit":
            if not c.target.point:
                raise ConfigInvalid("target.point", "explicit target needs a point")
            if len(c.target.point) != system.dim:
                raise ConfigInvalid(
                    "target.point",
                    f"map {c.map.id} needs a point of dimension {system.dim}")
            if system.dim == 1 and not (0.0 <= c.target.point[0] <= 1.0):
                raise ConfigInvalid("target.point", "interval-map target must lie in [0,1]")
        if c.target.mode == "periodic":
            if not c.target.period:
                raise ConfigInvalid("target.period", "periodic target needs a period")
            if system.dim != 1:
                raise ConfigInvalid("target.mode",
                                    "periodic targets are tabulated for interval maps only")

    if c.kind == "simulate":
        if c.observable.kind not in OBSERVABLE_KINDS:
            raise ConfigInvalid("observable.kind",
                                f"must be one of {OBSERVABLE_KINDS}")
        if c.observable.kind in ("power_dist", "capped_power"):
            if c.observable.alpha is None or c.observable.alpha <= 0:
                raise ConfigInvalid("observable.alpha", "power kinds need alpha > 0")
        if c.observable.kind == "capped_power" and c.observable.cap is None:
            raise ConfigInvalid("observable.cap", "capped_power needs a cap")
        if not (0.0 < c.observable.eps_floor < 1.0):
            raise ConfigInvalid("observable.eps_floor", "must lie in (0,1)")

    if c.kind == "bc":
        if c.schedule is None:
            raise ConfigInvalid("schedule", "bc runs need a schedule")
        if c.schedule.rule not in RULE_KINDS:
            raise ConfigInvalid("schedule.rule", f"must be one of {RULE_KINDS}")
        if c.schedule.rule == "explicit":
            raise ConfigInvalid("schedule.rule",
                                "harness schedules are rule-based; build explicit-radius "
                                "schedules through the library API")
        if c.schedule.rule == "power_law" and not (
                c.schedule.beta is not None and 0 < c.schedule.beta < 1):
            raise ConfigInvalid("schedule.beta", "power_law needs beta in (0,1)")
        if c.schedule.rule == "log_power" and not (
                c.schedule.beta is not None and c.schedule.beta > 0):
            raise ConfigInvalid("schedule.beta", "log_power needs beta > 0")
        if c.schedule.measure not in ("analytic", "empirical"):
            raise ConfigInvalid("schedule.measure", "must be analytic or empirical")
        if c.schedule.measure == "analytic" and c.map.id in ("henon", "lozi"):
            raise ConfigInvalid("schedule.measure",
                                "analytic 1-D geometry needs an interval map")

    if c.kind in ("iid", "classify"):
        if c.model is None:
            raise ConfigInvalid("model", f"{c.kind} runs need a tail model")
        if c.model.kind not in MODEL_KINDS:
            raise ConfigInvalid("model.kind", f"must be one of {MODEL_KINDS}")
        if c.model.kind == "pareto" and (c.model.gamma is None or c.model.gamma <= 0):
            raise ConfigInvalid("model.gamma", "pareto needs gamma > 0")

    if c.kind == "classify":
        if c.analysis.ratio_u is None:
            raise ConfigInvalid("analysis.ratio_u", "classify needs a sequence spec")
        if c.n_max < 10 ** 6:
            raise ConfigInvalid("n_max", "classification horizon must be >= 10^6")

    if c.checkpoints.kind not in ("geometric", "explicit"):
        raise ConfigInvalid("checkpoints.kind", "must be geometric or explicit")
    if c.checkpoints.kind == "geometric" and c.checkpoints.ratio <= 1.0:
        raise ConfigInvalid("checkpoints.ratio", "must exceed 1")
    if c.checkpoints.kind == "explicit":
        if not c.checkpoints.explicit:
            raise ConfigInvalid("checkpoints.explicit", "explicit grid needs entries")
        grid = list(c.checkpoints.explicit)
        if any(g < 1 for g in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigInvalid("checkpoints.explicit",
                                "grid must be strictly increasing and >= 1")
        if grid[-1] > c.n_max:
            raise ConfigInvalid("checkpoints.explicit", "grid extends past n_max")

    for name in _SEQ_FIELDS:
        sc = getattr(c.analysis, name)
        if sc is not None and sc.kind not in SEQUENCE_KINDS:
            raise ConfigInvalid(f"analysis.{name}.kind",
                                f"must be one of {SEQUENCE_KINDS}")
    if not (0.0 < c.analysis.tail_fraction <= 1.0):
        raise ConfigInvalid("analysis.tail_fraction", "must lie in (0,1]")
    if c.analysis.decay_pair not in DECAY_PAIRS:
        raise ConfigInvalid("analysis.decay_pair", f"must be one of {DECAY_PAIRS}")
