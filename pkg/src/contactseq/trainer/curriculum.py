"""Three-phase training schedule.

Phase 1 trains with curiosity and without domain randomization, phase 2
turns randomization on and curiosity off, phase 3 raises the regularization
scale in steps of 0.2 until it doubles.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

REG_STEP = 0.2
REG_MAX_INCREMENTS = 5


@dataclass(frozen=True)
class CurriculumConfig:
    phase1_min: int = 100
    phase1_max: int = 300
    phase2_min: int = 20
    phase2_max: int = 100
    reg_every: int = 2000
    window: int = 100
    rel_tol: float = 0.01


@dataclass(frozen=True)
class CurriculumState:
    phase: int = 1
    iteration: int = 0
    phase_iteration: int = 0
    reg_increments: int = 0
    returns: tuple[float, ...] = field(default=(), repr=False)

    @property
    def reg_scale(self) -> float:
        # computed from the count so five steps land exactly on 2.0
        return 1.0 + REG_STEP * self.reg_increments if self.reg_increments < REG_MAX_INCREMENTS else 2.0

    @property
    def curiosity_multiplier(self) -> float:
        return 1.0 if self.phase == 1 else 0.0

    @property
    def randomization_on(self) -> bool:
        return self.phase >= 2

    def to_dict(self) -> dict:
        return {
            "phase": self.phase,
            "iteration": self.iteration,
            "phase_iteration": self.phase_iteration,
            "reg_increments": self.reg_increments,
            "returns": list(self.returns),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CurriculumState":
        return cls(
            phase=int(d["phase"]),
            iteration=int(d["iteration"]),
            phase_iteration=int(d["phase_iteration"]),
            reg_increments=int(d["reg_increments"]),
            returns=tuple(float(x) for x in d.get("returns", ())),
        )


def plateaued(returns, window: int, rel_tol: float = 0.01) -> bool:
    """True when the moving average over the last ``window`` values improved
    by less than ``rel_tol`` (relative) on the moving average one window earlier."""
    r = np.asarray(returns, dtype=float)
    if r.size < 2 * window:
        return False
    now = r[-window:].mean()
    before = r[-2 * window : -window].mean()
    return (now - before) < rel_tol * max(abs(before), 1e-8)


def curriculum_tick(state: CurriculumState, metrics: dict, cfg: CurriculumConfig) -> CurriculumState:
    """Advance the schedule by one iteration given ``metrics['mean_return']``."""
    returns = (state.returns + (float(metrics["mean_return"]),))[-2 * cfg.window :]
    it, pit = state.iteration + 1, state.phase_iteration + 1
    phase, inc = state.phase, state.reg_increments
    flat = plateaued(returns, cfg.window, cfg.rel_tol)
    if phase == 1 and pit >= cfg.phase1_min and (flat or pit >= cfg.phase1_max):
        return CurriculumState(2, it, 0, 0, ())
    if phase == 2 and pit >= cfg.phase2_min and (flat or pit >= cfg.phase2_max):
        return CurriculumState(3, it, 0, 0, ())
    if phase == 3 and pit % cfg.reg_every == 0 and inc < REG_MAX_INCREMENTS:
        inc += 1
    return replace(state, iteration=it, phase_iteration=pit, reg_increments=inc, returns=returns)
