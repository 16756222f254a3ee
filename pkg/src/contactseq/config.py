"""Run configuration: nested dataclasses loaded from YAML with dotted overrides."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .envs.randomization import RandomizationConfig
from .stages import ConfigError
from .trainer.curriculum import CurriculumConfig
from .trainer.ppo import PpoConfig

MODES = ("full", "zero-one", "no-stage", "no-curiosity", "rnd-curiosity")
ENVS = ("hopper", "pusher")


@dataclass(frozen=True)
class EnvConfig:
    name: str = "hopper"
    plan_file: str | None = None
    episode_length_s: float = 8.0
    end_on_success: bool = True
    randomize_start_step: bool = True
    randomization: RandomizationConfig = RandomizationConfig()
    options: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RewardSettings:
    """Overrides on top of the environment's reward preset (``None`` keeps the preset)."""

    preset: str | None = None
    w_con: float | None = None
    w_stage: float | None = None
    w_curi: float | None = None
    c01: float | None = None
    reg_weights: dict = field(default_factory=dict)
    task_weights: dict = field(default_factory=dict)
    # PPO sees r_total * control_dt * scale; a uniform factor leaves the optimum unchanged
    time_scale: bool = True
    scale: float = 0.01


@dataclass(frozen=True)
class CuriositySettings:
    method: int = 2
    symmetric: bool = True
    hash_seed: int = 0
    rnd_lr: float = 1e-3


@dataclass(frozen=True)
class RunConfig:
    env: EnvConfig = EnvConfig()
    reward: RewardSettings = RewardSettings()
    curiosity: CuriositySettings = CuriositySettings()
    ppo: PpoConfig = PpoConfig()
    curriculum: CurriculumConfig = CurriculumConfig()
    mode: str = "full"
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    max_iterations: int = 1000
    hold_iterations: int = 0
    checkpoint_every: int = 100
    tail_iterations: int = 20
    out_dir: str = "runs"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown ablation mode {self.mode!r}; expected one of {MODES}")
        if self.env.name not in ENVS:
            raise ConfigError(f"unknown environment {self.env.name!r}; expected one of {ENVS}")
        if self.curiosity.method not in (1, 2, 3):
            raise ConfigError("curiosity.method must be 1, 2 or 3")

    @property
    def seed(self) -> int:
        return self.ppo.seed

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def with_overrides(self, overrides: dict[str, Any]) -> "RunConfig":
        d = self.to_dict()
        for key, value in overrides.items():
            _set_dotted(d, key, value)
        return from_dict(d)


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


def _set_dotted(d: dict, key: str, value):
    parts = key.split(".")
    cur = d
    for p in parts[:-1]:
        if not isinstance(cur.get(p), dict):
            raise ConfigError(f"override key {key!r} does not name a config section")
        cur = cur[p]
    if parts[-1] not in cur and not _open_section(parts[:-1]):
        raise ConfigError(f"unknown config key {key!r}")
    cur[parts[-1]] = value


def _open_section(path) -> bool:
    # free-form mappings accept new keys
    return path[-1:] in (["reg_weights"], ["task_weights"], ["options"])


def _build(cls, data, where: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"section {where or 'root'} must be a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(fields)
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where or 'root'}")
    kw = {}
    for name, value in data.items():
        f = fields[name]
        default = f.default if f.default is not dataclasses.MISSING else None
        if dataclasses.is_dataclass(default):
            kw[name] = _build(type(default), value, f"{where}.{name}".lstrip("."))
        elif isinstance(default, tuple) or name in ("actor_hidden", "critic_hidden", "seeds"):
            kw[name] = _tuple(value, f"{where}.{name}")
        else:
            kw[name] = value
    try:
        return cls(**kw)
    except TypeError as exc:
        raise ConfigError(f"bad values in {where or 'root'}: {exc}") from exc


def _tuple(value, where):
    if isinstance(value, (list, tuple)):
        return tuple(_tuple(v, where) if isinstance(v, (list, tuple)) else v for v in value)
    raise ConfigError(f"{where} must be a list")


def from_dict(d: dict) -> RunConfig:
    return _build(RunConfig, d, "")


def load_config(path, overrides: dict | None = None) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    try:
        data = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {path} is not valid YAML: {exc}") from exc
    env = data.get("env") or {}
    plan = env.get("plan_file")
    if plan is not None and not Path(plan).is_absolute():
        env["plan_file"] = str((path.parent / plan).resolve())
    cfg = from_dict(data)
    return cfg.with_overrides(overrides) if overrides else cfg


def parse_override(text: str) -> tuple[str, Any]:
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    return key.strip(), yaml.safe_load(raw)


def dump_config(cfg: RunConfig, path):
    Path(path).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=True))
