from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RandomizationConfig:
    """Per-episode dynamics randomization ranges (uniform).

    Delays are sampled in milliseconds and rounded to whole control steps.
    ``force_noise`` is the random force injection as a fraction of the
    actuator force limit.
    """

    enabled: bool = True
    friction: tuple[float, float] = (0.2, 1.1)
    mass_scale: tuple[float, float] = (0.7, 1.3)
    kp_scale: tuple[float, float] = (0.75, 1.25)
    kd_scale: tuple[float, float] = (0.75, 1.25)
    com_offset: tuple[float, float] = (-0.1, 0.1)
    delay_ms: tuple[float, float] = (0.0, 20.0)
    force_noise: float = 0.1
    push_interval_s: float = 5.0
    push_dv: float = 0.25

    def sample(self, rng: np.random.Generator, n: int, control_dt: float) -> dict:
        u = lambda r: rng.uniform(r[0], r[1], size=n)
        delay_ms = u(self.delay_ms)
        return {
            "friction": u(self.friction),
            "mass_scale": u(self.mass_scale),
            "kp_scale": u(self.kp_scale),
            "kd_scale": u(self.kd_scale),
            "com_offset": u(self.com_offset),
            "delay_ms": delay_ms,
            "delay_steps": np.rint(delay_ms / (1000.0 * control_dt)).astype(np.int64),
        }


OFF = RandomizationConfig(enabled=False)


def nominal(n: int, friction: float = 0.8) -> dict:
    return {
        "friction": np.full(n, friction),
        "mass_scale": np.ones(n),
        "kp_scale": np.ones(n),
        "kd_scale": np.ones(n),
        "com_offset": np.zeros(n),
        "delay_ms": np.zeros(n),
        "delay_steps": np.zeros(n, dtype=np.int64),
    }


def push_velocity(rng: np.random.Generator, n: int, dv: float, dims: int) -> np.ndarray:
    """Random velocity kicks of magnitude at most ``dv``.

    ``dims=1`` kicks along the horizontal axis only (sagittal worlds);
    ``dims=2`` samples a planar direction uniformly.
    """
    mag = rng.uniform(0.0, dv, size=n)
    if dims == 1:
        sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        return (mag * sign)[:, None]
    ang = rng.uniform(0.0, 2 * np.pi, size=n)
    return np.stack([mag * np.cos(ang), mag * np.sin(ang)], axis=1)


def apply_push(base_vel: np.ndarray, kick: np.ndarray) -> np.ndarray:
    """Add horizontal velocity kicks; ``kick`` covers the leading horizontal axes."""
    out = np.array(base_vel, dtype=float, copy=True)
    out[..., : kick.shape[-1]] += kick
    return out
