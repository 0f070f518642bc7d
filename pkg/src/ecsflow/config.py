"""Run configuration: nested dataclasses with a strict JSON reader."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .flow import FlowConfig
from .seeds import SeedKind, SeedSpec


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


@dataclass(frozen=True)
class SeedSection:
    kind: str = "whitney"
    N: int = 1024
    R: float = 1.0
    eps: float = 0.0
    mode: int = 2
    ricci_constant: float | None = None


@dataclass(frozen=True)
class FlowSection:
    m: int = 2
    cfl: float = 0.25
    a_stop_factor: float = 60.0
    a_stop: float | None = None
    t_max: float | None = None
    dt_floor: float = 1e-14
    redistribute_every: int = 5
    max_steps: int = 20_000_000


@dataclass(frozen=True)
class MonitorSection:
    enabled: bool = True


@dataclass(frozen=True)
class BlowupSection:
    enabled: bool = True
    a0_factor: float = 10.0  # first capture level, relative to the initial max k
    rho: float = math.sqrt(2.0)
    window: float = 20.0
    assert_type_ii: bool = False
    assert_r_growth: bool = False
    assert_reaper: bool = False


@dataclass(frozen=True)
class PlotSection:
    enabled: bool = True
    max_curves: int = 8


@dataclass(frozen=True)
class RunConfig:
    seed: SeedSection = field(default_factory=SeedSection)
    flow: FlowSection = field(default_factory=FlowSection)
    monitors: MonitorSection = field(default_factory=MonitorSection)
    blowup: BlowupSection = field(default_factory=BlowupSection)
    plots: PlotSection = field(default_factory=PlotSection)
    out_dir: str = "out"
    random_seed: int = 0

    def seed_spec(self) -> SeedSpec:
        s = self.seed
        return SeedSpec(SeedKind(s.kind), self.flow.m, s.N, s.R, s.eps, s.mode, s.ricci_constant)

    def flow_config(self) -> FlowConfig:
        f = self.flow
        return FlowConfig(
            cfl=f.cfl,
            a_stop_factor=f.a_stop_factor,
            a_stop=f.a_stop,
            t_max=f.t_max,
            dt_floor=f.dt_floor,
            max_steps=f.max_steps,
            redistribute_every=f.redistribute_every,
            capture_a0_factor=self.blowup.a0_factor,
            capture_rho=self.blowup.rho,
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


_SECTIONS = {
    "seed": SeedSection,
    "flow": FlowSection,
    "monitors": MonitorSection,
    "blowup": BlowupSection,
    "plots": PlotSection,
}


def _coerce(key: str, value, default, annotation: str):
    if value is None:
        if "None" in annotation:
            return None
        raise ConfigError(f"{key}: null not allowed")
    if "bool" in annotation:
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected a boolean")
        return value
    if "int" in annotation and "float" not in annotation:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer")
        return value
    if "float" in annotation:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number")
        if not math.isfinite(value):
            raise ConfigError(f"{key}: must be finite")
        return float(value)
    if "str" in annotation:
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string")
        return value
    return value


def _build(cls, data: dict, prefix: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{prefix}: expected an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"unknown key '{prefix}{unknown[0]}'")
    kwargs = {}
    for name, value in data.items():
        f = fields[name]
        key = prefix + name
        if name in _SECTIONS and cls is RunConfig:
            kwargs[name] = _build(_SECTIONS[name], value, key + ".")
        else:
            kwargs[name] = _coerce(key, value, f.default, str(f.type))
    return cls(**kwargs)


def _validate(cfg: RunConfig) -> None:
    try:
        SeedKind(cfg.seed.kind)
    except ValueError:
        raise ConfigError(f"seed.kind: unknown seed kind '{cfg.seed.kind}'") from None
    checks = [
        ("flow.m", cfg.flow.m >= 2, "must be >= 2"),
        ("seed.N", cfg.seed.N >= 64, "must be >= 64"),
        ("seed.R", cfg.seed.R > 0, "must be positive"),
        ("seed.eps", cfg.seed.eps >= 0, "must be >= 0"),
        ("seed.mode", cfg.seed.mode >= 2, "must be >= 2"),
        ("flow.a_stop_factor", cfg.flow.a_stop_factor > 1, "must exceed 1"),
        ("flow.dt_floor", cfg.flow.dt_floor > 0, "must be positive"),
        ("flow.redistribute_every", cfg.flow.redistribute_every >= 0, "must be >= 0"),
        ("flow.max_steps", cfg.flow.max_steps >= 0, "must be >= 0"),
        ("blowup.a0_factor", cfg.blowup.a0_factor > 0, "must be positive"),
        ("blowup.rho", cfg.blowup.rho > 1, "must exceed 1"),
        ("blowup.window", cfg.blowup.window > 0, "must be positive"),
        ("plots.max_curves", cfg.plots.max_curves >= 1, "must be >= 1"),
    ]
    if cfg.flow.t_max is not None:
        checks.append(("flow.t_max", cfg.flow.t_max >= 0, "must be >= 0"))
    if cfg.flow.a_stop is not None:
        checks.append(("flow.a_stop", cfg.flow.a_stop > 0, "must be positive"))
    for key, ok, msg in checks:
        if not ok:
            raise ConfigError(f"{key}: {msg}")
    if not (0.0 < cfg.flow.cfl <= 0.5):
        raise ConfigError("flow.cfl: cfl out of range (0, 0.5]")


def config_from_dict(data: dict) -> RunConfig:
    cfg = _build(RunConfig, data, "")
    _validate(cfg)
    return cfg


def parse_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc.msg} (line {exc.lineno})") from None
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    return config_from_dict(data)
