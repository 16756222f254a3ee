"""Deterministic evaluation of a saved policy.

Each of ``episodes`` environment instances runs exactly one episode with the
policy's mean action. The report lists progress statistics, the fraction of
completed plans, and per-term reward means over all evaluated steps.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import torch
import yaml

from . import config as config_mod
from .curiosity import HashCuriosity, VisitTable
from .stages import ConfigError
from .trainer.curriculum import CurriculumState
from .trainer.networks import Actor, RunningMeanStd
from .trainer.train import TERMS, assemble_rewards, build_env, load_checkpoint, reward_config


class CheckpointMismatch(RuntimeError):
    """The checkpoint's network shapes do not fit the evaluation environment."""


def load_policy(ckpt: dict, cfg) -> tuple[Actor, RunningMeanStd]:
    actor = Actor(ckpt["obs_dim"], ckpt["action_dim"], cfg.ppo.actor_hidden, cfg.ppo.init_std)
    actor.load_state_dict(ckpt["actor"])
    rms = RunningMeanStd(ckpt["obs_dim"])
    rms.load(ckpt["obs_rms"])
    return actor, rms


def evaluate(checkpoint, episodes: int = 64, seed: int = 0, overrides: dict | None = None, trajectory=None) -> dict:
    """Roll out ``episodes`` episodes and return the report dictionary.

    ``overrides`` are dotted config keys applied on top of the checkpoint's
    stored config (for example a different plan file). ``trajectory``, when
    given, is a CSV path receiving one row per environment per step.
    """
    if episodes < 1:
        raise ConfigError("episodes must be at least 1")
    ckpt = load_checkpoint(checkpoint)
    cfg = config_mod.from_dict(ckpt["config"]).with_overrides(overrides or {})
    env = build_env(cfg, episodes, seed)
    env.randomize_start_step = False
    obs = env.reset(seed)
    if env.obs_dim != ckpt["obs_dim"] or env.action_dim != ckpt["action_dim"]:
        raise CheckpointMismatch(
            f"checkpoint expects obs/action dims {ckpt['obs_dim']}/{ckpt['action_dim']}, "
            f"environment {cfg.env.name} has {env.obs_dim}/{env.action_dim}"
        )
    actor, rms = load_policy(ckpt, cfg)
    curriculum = CurriculumState.from_dict(ckpt["curriculum"])
    rcfg = reward_config(cfg, env).with_(reg_scale=curriculum.reg_scale)
    table = VisitTable.from_pairs(ckpt["visit_pairs"])

    hasher = HashCuriosity.build(
        env.curiosity_dim, env.CURIOSITY_LO, env.CURIOSITY_HI, seed=cfg.curiosity.hash_seed, method=cfg.curiosity.method
    )
    hasher.table = table

    active = np.ones(episodes, dtype=bool)
    progress = np.zeros(episodes)
    success = np.zeros(episodes, dtype=bool)
    sums = {k: 0.0 for k in TERMS + ("r_total",)}
    n_steps = 0
    weights = {"r_con": rcfg.w_con, "r_stage": rcfg.w_stage, "r_curi": rcfg.w_curi, "r_reg": rcfg.reg_scale}
    writer, fh = None, None
    if trajectory is not None:
        fh = open(trajectory, "w", newline="")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["step", "env", "n_stage", "f_con", "f_task", "n_corr", "n_wrong", "r_total"]
                        + [f"a{i}" for i in range(env.action_dim)])
    try:
        step = 0
        while active.any():
            with torch.no_grad():
                o = torch.as_tensor(rms.normalize(obs), dtype=torch.float32)
                a = actor.distribution(o).mean.numpy().astype(np.float64)
            res = env.step(a)
            s = res.signals
            bonus = None
            if curiosity_enabled(cfg.mode, curriculum):
                bonus = hasher(s["curiosity_obs"], record=False)
            br = assemble_rewards(s, cfg.mode, rcfg, env.task_reward(s, rcfg.task_weights), bonus)
            d = br.as_dict()
            for k in sums:
                sums[k] += float(np.sum(weights.get(k, 1.0) * np.asarray(d[k])[active]))
            n_steps += int(active.sum())
            if writer is not None:
                for i in np.flatnonzero(active):
                    writer.writerow(
                        [step, i, int(s["n_stage"][i]), int(s["f_con"][i]), int(s["f_task"][i]),
                         int(s["n_corr"][i]), int(s["n_wrong"][i]), f"{float(br.r_total[i]):.9g}"]
                        + [f"{x:.9g}" for x in a[i]]
                    )
            ended = res.done & active
            progress[ended] = res.info["final_progress"][ended]
            success[ended] = res.info["success"][ended] | s["plan_complete"][ended]
            active &= ~res.done
            obs = res.obs
            step += 1
    finally:
        if fh is not None:
            fh.close()
    return {
        "checkpoint": str(checkpoint),
        "env": cfg.env.name,
        "mode": cfg.mode,
        "episodes": int(episodes),
        "seed": int(seed),
        "progress": {"mean": float(progress.mean()), "min": float(progress.min()), "max": float(progress.max())},
        "success_rate": float(success.mean()),
        "reward_terms": {k: v / max(n_steps, 1) for k, v in sums.items()},
    }


def curiosity_enabled(mode: str, curriculum: CurriculumState) -> bool:
    return mode not in ("no-curiosity", "rnd-curiosity") and curriculum.curiosity_multiplier > 0


def write_report(report: dict, path) -> None:
    Path(path).write_text(yaml.safe_dump(report, sort_keys=False))
