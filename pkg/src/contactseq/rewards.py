"""Reward terms for contact-sequence tasks.

Every function accepts scalars or numpy arrays with a leading batch axis, so
the same code serves unit checks and vectorized rollouts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np

from .stages import ConfigError


def contact_reward(n_corr, n_wrong, n_con, n_stage, f_con, f_task):
    """Dense contact reward.

    Each correct contact earns 1, each wrong contact costs ``n_con`` (masked
    while still in the first stage), and full fulfillment adds ``2 n_con^2``.
    """
    f_con = np.asarray(f_con, dtype=float)
    f_task = np.asarray(f_task, dtype=float)
    past_first = np.asarray(n_stage) > 0
    out = n_corr - n_con * np.asarray(n_wrong) * past_first + 2 * n_con**2 * f_con * f_task
    return out if np.ndim(out) else float(out)


def stage_count_reward(n_stage, f_task):
    out = np.asarray(n_stage, dtype=float) * np.asarray(f_task, dtype=float)
    return out if np.ndim(out) else float(out)


def zero_one_reward(f_con, f_task, c01):
    out = c01 * np.asarray(f_con, dtype=float) * np.asarray(f_task, dtype=float)
    return out if np.ndim(out) else float(out)


def default_zero_one_coefficient(n_con: int) -> float:
    # matches the dense reward's maximum, so only density differs in ablations
    return float(n_con + 2 * n_con**2)


# ---------------------------------------------------------------------------
# regularization library


def _sum(x):
    return np.sum(np.asarray(x, dtype=float), axis=-1)


@dataclass(frozen=True)
class RegTerm:
    signals: tuple[str, ...]
    expression: Callable
    weight: float


# Signal conventions (last axis is joints/feet where applicable):
#   ang_vel_z: yaw rate; torque_ratio: tau / tau_lim; dof_acc, dof_vel,
#   action_rate: per-joint arrays; termination: 0/1; foot_force: |F_c|;
#   foot_contact_angle: theta_c; foot_horizontal_impact: 0/1;
#   foot_speed, foot_contact: per-foot; air_time_at_touchdown, first_contact:
#   per-foot air time (s) and touchdown flags.
REGULARIZATION_TERMS: dict[str, RegTerm] = {
    "yaw_rate": RegTerm(("ang_vel_z",), lambda w: np.square(np.asarray(w, float)), -0.1),
    "torques": RegTerm(("torque_ratio",), lambda r: _sum(np.square(r)), -0.5),
    "torque_overlimit": RegTerm(
        ("torque_ratio",), lambda r: _sum(np.maximum(np.abs(r) - 0.95, 0.0)), -500.0
    ),
    "dof_acc": RegTerm(("dof_acc",), lambda q: _sum(np.square(q)), -0.000005),
    "dof_vel": RegTerm(("dof_vel",), lambda q: _sum(np.square(q)), -0.003),
    "action_rate": RegTerm(("action_rate",), lambda a: _sum(np.square(a)), -250.0),
    "termination": RegTerm(("termination",), lambda t: np.asarray(t, dtype=float), -200.0),
    "foot_contact_forces": RegTerm(
        ("foot_force",), lambda f: _sum(np.maximum(np.abs(f) - 550.0, 0.0)), -0.005
    ),
    "foot_orientation": RegTerm(
        ("foot_contact_angle",), lambda th: _sum(np.abs(np.sin(th))), -50.0
    ),
    "stumble": RegTerm(("foot_horizontal_impact",), lambda h: _sum(h), -100.0),
    "slippage": RegTerm(
        ("foot_speed", "foot_contact"), lambda v, c: _sum(np.square(v) * np.asarray(c, float)), -5.0
    ),
    "feet_air_time": RegTerm(
        ("air_time_at_touchdown", "first_contact"),
        lambda t, first: _sum((np.asarray(t, float) - 0.5) * np.asarray(first, float)),
        20.0,
    ),
    "no_fly": RegTerm(
        ("foot_contact",), lambda c: np.any(np.asarray(c, bool), axis=-1).astype(float), 10.0
    ),
}

DEFAULT_REG_WEIGHTS = {name: t.weight for name, t in REGULARIZATION_TERMS.items()}
STYLE_TERMS = ("feet_air_time", "no_fly")


def regularization_terms(signals: Mapping[str, object], reg_weights: Mapping[str, float]) -> dict:
    """Weighted value of every enabled term (weight 0 or absent = disabled)."""
    out = {}
    for name, w in reg_weights.items():
        if name not in REGULARIZATION_TERMS:
            raise ConfigError(f"unknown regularization term {name!r}")
        if w == 0:
            continue
        term = REGULARIZATION_TERMS[name]
        missing = [s for s in term.signals if s not in signals]
        if missing:
            raise ConfigError(f"term {name!r} enabled but signal(s) {missing} missing")
        out[name] = w * term.expression(*(signals[s] for s in term.signals))
    return out


def regularization_reward(signals, reg_weights, reg_scale: float = 1.0):
    terms = regularization_terms(signals, reg_weights)
    total = sum(terms.values()) if terms else 0.0
    out = reg_scale * np.asarray(total, dtype=float)
    return out if np.ndim(out) else float(out)


# ---------------------------------------------------------------------------
# task rewards


def task_reward_posture(err_rot, err_pos, w_task: float = 30.0):
    out = w_task * np.exp(-np.abs(err_rot) / math.pi) * np.exp(-np.abs(err_pos) / 1.0)
    return out if np.ndim(out) else float(out)


def task_reward_transport(
    d_obj2dest,
    d_left2obj,
    d_right2obj,
    theta_dest,
    theta_obj,
    n_stage,
    w_box: float = 200.0,
    w_hand: float = 100.0,
    angle_gates_enabled: bool = True,
):
    """Approach-then-move reward. For a single effector pass the same
    distance as both ``d_left2obj`` and ``d_right2obj``."""
    if angle_gates_enabled:
        gate_dest = np.abs(theta_dest) < math.pi / 2
        gate_obj = np.abs(theta_obj) < math.pi / 6
    else:
        gate_dest = gate_obj = True
    box = w_box * np.exp(-np.asarray(d_obj2dest, float)) * (np.asarray(n_stage) > 0) * gate_dest
    hand = w_hand * np.exp(-(np.asarray(d_left2obj, float) + np.asarray(d_right2obj, float)) / 2) * gate_obj
    out = box + hand
    return out if np.ndim(out) else float(out)


def task_reward_arm_spread(y_left, y_right, sign_left, sign_right, w_hand: float = 5.0):
    """Signed lateral hand displacement (dance preset)."""
    return w_hand * (np.asarray(y_left) * sign_left + np.asarray(y_right) * sign_right)


def task_reward_gaussian_footholds(d_left, d_right, w_foot: float = 10.0, sigma: float = 0.1):
    return w_foot * np.exp(-np.square(np.asarray(d_left) / sigma)) * np.exp(-np.square(np.asarray(d_right) / sigma))


def task_reward_wall_and_reach(theta_wall, d_ee2goal, w_base: float = 50.0, w_ee: float = 5.0, scale: float = 0.2):
    """Cliffside preset: face the wall and bring end effectors to their goal centers."""
    return w_base * -np.abs(theta_wall) + w_ee * _sum(np.exp(-np.asarray(d_ee2goal) / scale))


# ---------------------------------------------------------------------------
# configuration and assembly


@dataclass(frozen=True)
class RewardConfig:
    w_con: float = 120.0
    w_stage: float = 160.0
    w_curi: float = 20000.0
    n_con: int = 2
    reg_weights: Mapping[str, float] = field(default_factory=dict)
    reg_scale: float = 1.0
    task_weights: Mapping[str, float] = field(default_factory=dict)
    c01: float | None = None

    def __post_init__(self):
        if self.n_con < 1:
            raise ConfigError("n_con must be >= 1")
        if not 1.0 <= self.reg_scale <= 2.0:
            raise ConfigError(f"reg_scale {self.reg_scale} outside [1, 2]")
        for w in (self.w_con, self.w_stage, self.w_curi):
            if w < 0:
                raise ConfigError("contact, stage and curiosity weights must be non-negative")

    @property
    def zero_one_coefficient(self) -> float:
        return default_zero_one_coefficient(self.n_con) if self.c01 is None else float(self.c01)

    def with_(self, **kw) -> "RewardConfig":
        return replace(self, **kw)


# Column weights per task family (contact, stage count, curiosity).
WEIGHT_PRESETS = {
    "parkour": dict(w_con=120.0, w_stage=160.0, w_curi=20000.0),
    "loco_mani": dict(w_con=40.0, w_stage=160.0, w_curi=40000.0),
    "dancing": dict(w_con=10.0, w_stage=5.0, w_curi=5000.0),
    "cliffside": dict(w_con=20.0, w_stage=40.0, w_curi=10000.0),
}

TASK_WEIGHT_PRESETS = {
    "parkour": {"w_task": 30.0},
    "loco_mani": {"w_box": 200.0, "w_hand": 100.0},
    "dancing": {"w_hand": 5.0, "w_foot": 10.0},
    "cliffside": {"w_base": 50.0, "w_ee": 5.0},
}

# Humanoid-only rows whose signals the toy environments do not produce.
FOOT_TERMS = ("slippage", "feet_air_time", "no_fly")
HUMANOID_ONLY = ("torques", "torque_overlimit", "foot_contact_forces", "foot_orientation", "stumble")


def reg_weights_for(env_name: str) -> dict:
    w = dict(DEFAULT_REG_WEIGHTS)
    for name in HUMANOID_ONLY:
        w[name] = 0.0
    if env_name == "hopper":
        # sagittal-plane body: no yaw axis; jumping is the point, so no style terms
        w["yaw_rate"] = 0.0
        for name in STYLE_TERMS:
            w[name] = 0.0
    elif env_name == "pusher":
        # hands are the only end effectors; foot slip and gait terms have no subject
        for name in FOOT_TERMS:
            w[name] = 0.0
    return w


ENV_PRESETS = {"hopper": "parkour", "pusher": "loco_mani"}


def preset(env_name: str, n_con: int, family: str | None = None, **overrides) -> RewardConfig:
    """Reward config for ``env_name``. ``family`` picks the weight preset
    (default: the environment's own); regularization rows always follow the
    environment."""
    family = family or ENV_PRESETS.get(env_name, env_name)
    if family not in WEIGHT_PRESETS:
        raise ConfigError(f"no reward preset for {env_name!r}")
    kw = dict(WEIGHT_PRESETS[family])
    kw.update(n_con=n_con, reg_weights=reg_weights_for(env_name), task_weights=dict(TASK_WEIGHT_PRESETS[family]))
    kw.update(overrides)
    return RewardConfig(**kw)


@dataclass
class RewardBreakdown:
    r_con: np.ndarray | float
    r_stage: np.ndarray | float
    r_curi: np.ndarray | float
    r_reg: np.ndarray | float
    r_task: np.ndarray | float
    r_total: np.ndarray | float

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("r_con", "r_stage", "r_curi", "r_reg", "r_task", "r_total")}


def total_reward(parts: Mapping[str, object], config: RewardConfig) -> RewardBreakdown:
    """Weighted sum of the parts; ``r_reg`` is taken unscaled."""
    get = lambda k: np.asarray(parts.get(k, 0.0), dtype=float)
    r_con, r_stage, r_curi, r_reg, r_task = (get(k) for k in ("r_con", "r_stage", "r_curi", "r_reg", "r_task"))
    total = (
        config.w_con * r_con
        + config.w_stage * r_stage
        + config.w_curi * r_curi
        + config.reg_scale * r_reg
        + r_task
    )
    vals = [r_con, r_stage, r_curi, r_reg, r_task, total]
    vals = [v if np.ndim(v) else float(v) for v in vals]
    return RewardBreakdown(*vals)
