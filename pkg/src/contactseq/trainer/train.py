"""Training loop: rollout, reward assembly, GAE, mirrored PPO update, curriculum."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .. import rewards as rw
from ..curiosity import HashCuriosity, RNDCuriosity, preprocess
from ..envs import make_env
from ..envs.randomization import OFF
from ..stages import load_plan
from .curriculum import CurriculumState, curriculum_tick
from .gae import compute_gae
from .networks import Actor, Critic, RunningMeanStd
from .ppo import NonFiniteLossError, normalize_advantages, ppo_update, symmetry_augment

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
METRIC_COLUMNS = (
    "iteration",
    "mean_return",
    "mean_progress",
    "mean_curiosity",
    "reg_scale",
    "phase",
    "r_con",
    "r_stage",
    "r_curi",
    "r_reg",
    "r_task",
    "r_total",
    "episodes",
    "success_rate",
    "policy_loss",
    "value_loss",
    "entropy",
    "kl",
)
TERMS = ("r_con", "r_stage", "r_curi", "r_reg", "r_task")


class TrainingFault(RuntimeError):
    """Raised after a run aborts; the final checkpoint has been written."""

    def __init__(self, message, checkpoint):
        super().__init__(message)
        self.checkpoint = checkpoint


def build_env(cfg, num_envs: int, seed: int):
    plan = load_plan(cfg.env.plan_file) if cfg.env.plan_file else None
    return make_env(
        cfg.env.name,
        plan,
        options=cfg.env.options,
        num_envs=num_envs,
        seed=seed,
        randomization=OFF,
        episode_length_s=cfg.env.episode_length_s,
        end_on_success=cfg.env.end_on_success,
        randomize_start_step=cfg.env.randomize_start_step,
    )


def reward_config(cfg, env) -> rw.RewardConfig:
    s = cfg.reward
    overrides = {k: getattr(s, k) for k in ("w_con", "w_stage", "w_curi", "c01") if getattr(s, k) is not None}
    base = rw.preset(cfg.env.name, env.n_con, family=s.preset)
    reg = dict(base.reg_weights)
    reg.update(s.reg_weights)
    task = dict(base.task_weights)
    task.update(s.task_weights)
    return base.with_(reg_weights=reg, task_weights=task, **overrides)


def assemble_rewards(signals: dict, mode: str, rcfg: rw.RewardConfig, task_reward, bonus) -> rw.RewardBreakdown:
    """Reward terms for one step of every environment under an ablation mode.

    ``bonus`` is the (already curriculum-gated) curiosity bonus, or ``None``.
    ``mode`` only changes which terms enter; weights come from ``rcfg``.
    """
    if mode == "zero-one":
        r_con = rw.zero_one_reward(signals["f_con"], signals["f_task"], rcfg.zero_one_coefficient)
    else:
        r_con = rw.contact_reward(
            signals["n_corr"], signals["n_wrong"], rcfg.n_con, signals["n_stage"], signals["f_con"], signals["f_task"]
        )
    if mode == "no-stage":
        r_stage = np.zeros_like(np.asarray(r_con, dtype=float))
    else:
        r_stage = rw.stage_count_reward(signals["n_stage"], signals["f_task"])
    r_curi = np.zeros_like(np.asarray(r_con, dtype=float)) if bonus is None or mode == "no-curiosity" else bonus
    terms = rw.regularization_terms(signals, rcfg.reg_weights)
    r_reg = sum(terms.values()) if terms else np.zeros_like(np.asarray(r_con, dtype=float))
    parts = {"r_con": r_con, "r_stage": r_stage, "r_curi": r_curi, "r_reg": r_reg, "r_task": task_reward}
    return rw.total_reward(parts, rcfg)


@dataclass
class TrainResult:
    out_dir: Path
    metrics_path: Path
    checkpoint_path: Path
    final_progress: float
    iterations: int


class Trainer:
    def __init__(self, cfg, out_dir):
        self.cfg = cfg
        self.out_dir = Path(out_dir)
        ppo = cfg.ppo
        seed = ppo.seed
        torch.manual_seed(seed)
        torch.set_num_threads(1)
        self.gen = torch.Generator().manual_seed(seed)
        self.env = build_env(cfg, ppo.num_envs, seed)
        self.rcfg = reward_config(cfg, self.env)
        self.obs = self.env.reset(seed)
        od, ad = self.env.obs_dim, self.env.action_dim
        self.actor = Actor(od, ad, ppo.actor_hidden, ppo.init_std)
        self.critic = Critic(od, ppo.critic_hidden)
        self.opt = torch.optim.Adam(list(self.actor.parameters()) + list(self.critic.parameters()), lr=ppo.lr)
        self.obs_rms = RunningMeanStd(od)
        cur = cfg.curiosity
        lo, hi = self.env.CURIOSITY_LO, self.env.CURIOSITY_HI
        self.hash = HashCuriosity.build(self.env.curiosity_dim, lo, hi, seed=cur.hash_seed, method=cur.method)
        self.rnd = None
        if cfg.mode == "rnd-curiosity":
            in_dim = self.env.curiosity_dim if cur.method == 1 else 2 * self.env.curiosity_dim
            self.rnd = RNDCuriosity(in_dim, seed=seed, lr=cur.rnd_lr)
        self.curriculum = CurriculumState()
        self.ep_return = np.zeros(ppo.num_envs)
        self.last_return = 0.0
        self.last_progress = 0.0
        self.progress_history: list[float] = []

    # -- pieces ---------------------------------------------------------------

    def _norm(self, obs):
        return torch.as_tensor(self.obs_rms.normalize(obs), dtype=torch.float32)

    def _curiosity(self, signals) -> np.ndarray | None:
        mult = self.curriculum.curiosity_multiplier
        mode = self.cfg.mode
        if mult == 0.0 or mode == "no-curiosity":
            return None
        o = signals["curiosity_obs"]
        if mode == "rnd-curiosity":
            v = preprocess(o, self.cfg.curiosity.method, self.hash.lo, self.hash.hi, signals["n_stage"])
            self._rnd_inputs.append(v)
            return mult * self.rnd.bonus(v)
        mirror = self.env.mirror_curiosity_obs(o) if self.cfg.curiosity.symmetric else None
        return mult * self.hash(o, mirror, n_stage=signals["n_stage"])

    def rollout(self):
        cfg, env = self.cfg, self.env
        T, N = cfg.ppo.horizon, env.num_envs
        scale = (env.control_dt if cfg.reward.time_scale else 1.0) * cfg.reward.scale
        obs_buf, act_buf, logp_buf = [], [], []
        val_buf, rew_buf, done_buf = np.zeros((T, N)), np.zeros((T, N)), np.zeros((T, N))
        raw_obs = []
        term_sums = {k: 0.0 for k in TERMS + ("r_total",)}
        curi_sum = 0.0
        finished_ret, finished_prog, finished_succ = [], [], []
        self._rnd_inputs = []
        for t in range(T):
            raw_obs.append(self.obs)
            o = self._norm(self.obs)
            with torch.no_grad():
                dist = self.actor.distribution(o)
                a = dist.mean + dist.stddev * torch.randn(dist.mean.shape, generator=self.gen, dtype=torch.float32)
                logp = dist.log_prob(a).sum(-1)
                v = self.critic(o)
            res = env.step(a.numpy().astype(np.float64))
            bonus = self._curiosity(res.signals)
            br = assemble_rewards(
                res.signals, cfg.mode, self.rcfg, env.task_reward(res.signals, self.rcfg.task_weights), bonus
            )
            r = br.r_total * scale
            self.ep_return += r
            info = res.info
            if "final_ids" in info:
                ids = info["final_ids"]
                trunc = info["time_out"][ids]
                if trunc.any():
                    with torch.no_grad():
                        vf = self.critic(self._norm(info["final_obs"][trunc])).numpy()
                    r = r.copy()
                    r[ids[trunc]] += cfg.ppo.gamma * vf
                finished_ret.extend(self.ep_return[ids].tolist())
                finished_prog.extend(info["final_progress"][ids].tolist())
                finished_succ.extend(info["success"][ids].tolist())
                self.ep_return[ids] = 0.0
            obs_buf.append(o)
            act_buf.append(a)
            logp_buf.append(logp)
            val_buf[t] = v.numpy()
            rew_buf[t] = r
            done_buf[t] = res.done
            d = br.as_dict()
            for k in term_sums:
                w = {"r_con": self.rcfg.w_con, "r_stage": self.rcfg.w_stage, "r_curi": self.rcfg.w_curi,
                     "r_reg": self.rcfg.reg_scale, "r_task": 1.0, "r_total": 1.0}[k]
                term_sums[k] += float(np.mean(w * np.asarray(d[k])))
            curi_sum += 0.0 if bonus is None else float(np.mean(bonus))
            self.obs = res.obs
        with torch.no_grad():
            bootstrap = self.critic(self._norm(self.obs)).numpy()
        adv, ret = compute_gae(rew_buf, val_buf, done_buf, bootstrap, cfg.ppo.gamma, cfg.ppo.lam)
        batch = {
            "obs": torch.cat(obs_buf),
            "actions": torch.cat(act_buf),
            "old_log_prob": torch.cat(logp_buf),
            "advantages": torch.as_tensor(adv.reshape(-1), dtype=torch.float32),
            "returns": torch.as_tensor(ret.reshape(-1), dtype=torch.float32),
        }
        if finished_ret:
            self.last_return = float(np.mean(finished_ret))
            self.last_progress = float(np.mean(finished_prog))
        stats = {k: v / T for k, v in term_sums.items()}
        stats.update(
            mean_return=self.last_return,
            mean_progress=self.last_progress,
            mean_curiosity=curi_sum / T,
            episodes=len(finished_ret),
            success_rate=float(np.mean(finished_succ)) if finished_succ else 0.0,
        )
        return batch, np.concatenate(raw_obs), stats

    def update(self, batch, raw_obs):
        env, ppo = self.env, self.cfg.ppo
        if ppo.symmetry:
            batch = symmetry_augment(batch, env.mirror_obs, env.mirror_act, self.actor)
            self.obs_rms.update(np.concatenate([raw_obs, env.mirror_obs(raw_obs)]))
        else:
            self.obs_rms.update(raw_obs)
        batch["advantages"] = normalize_advantages(batch["advantages"])
        if self.rnd is not None and self._rnd_inputs:
            self.rnd.update(np.concatenate(self._rnd_inputs))
        return ppo_update(batch, self.actor, self.critic, self.opt, ppo, generator=self.gen, dump_dir=self.out_dir)

    def _apply_phase(self):
        self.env.randomization = self.cfg.env.randomization if self.curriculum.randomization_on else OFF
        self.rcfg = self.rcfg.with_(reg_scale=self.curriculum.reg_scale)

    # -- loop ------------------------------------------------------------------

    def run(self, max_iterations: int | None = None, log_every: int = 0) -> TrainResult:
        cfg = self.cfg
        self.out_dir.mkdir(parents=True, exist_ok=True)
        metrics_path = self.out_dir / "metrics.csv"
        ckpt = self.out_dir / "checkpoint.npz"
        limit = cfg.max_iterations if max_iterations is None else max_iterations
        hold = 0
        with open(metrics_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(METRIC_COLUMNS)
            fh.flush()
            for it in range(limit):
                self._apply_phase()
                phase, reg_scale = self.curriculum.phase, self.curriculum.reg_scale
                batch, raw_obs, stats = self.rollout()
                try:
                    upd = self.update(batch, raw_obs)
                except NonFiniteLossError as exc:
                    save_checkpoint(self, ckpt)
                    raise TrainingFault(str(exc), ckpt) from exc
                row = {**stats, **upd, "iteration": it, "reg_scale": reg_scale, "phase": phase}
                writer.writerow([_fmt(row[c]) for c in METRIC_COLUMNS])
                fh.flush()
                self.progress_history.append(stats["mean_progress"])
                if log_every and it % log_every == 0:
                    logger.info(
                        "it %d phase %d return %.2f progress %.3f curiosity %.4f",
                        it, phase, stats["mean_return"], stats["mean_progress"], stats["mean_curiosity"],
                    )
                self.curriculum = curriculum_tick(self.curriculum, stats, cfg.curriculum)
                if cfg.checkpoint_every and (it + 1) % cfg.checkpoint_every == 0:
                    save_checkpoint(self, ckpt)
                if self.curriculum.phase == 3 and self.curriculum.reg_increments >= 5:
                    hold += 1
                    if hold > cfg.hold_iterations:
                        break
        save_checkpoint(self, ckpt)
        tail = self.progress_history[-cfg.tail_iterations :] or [0.0]
        return TrainResult(self.out_dir, metrics_path, ckpt, float(np.mean(tail)), len(self.progress_history))


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.9g}"


def train(cfg, out_dir, log_every: int = 0) -> TrainResult:
    return Trainer(cfg, out_dir).run(log_every=log_every)


# -- checkpoints ------------------------------------------------------------------


def save_checkpoint(trainer: Trainer, path):
    arrays = {"format_version": np.array(CHECKPOINT_VERSION)}
    for prefix, net in (("actor", trainer.actor), ("critic", trainer.critic)):
        for i, (name, p) in enumerate(net.state_dict().items()):
            arrays[f"{prefix}/{i:02d}/{name}"] = p.detach().numpy()
    for k, v in trainer.obs_rms.state().items():
        arrays[f"obs_rms/{k}"] = np.asarray(v)
    arrays["visit_pairs"] = trainer.hash.table.to_pairs()
    arrays["curriculum"] = np.array(json.dumps(trainer.curriculum.to_dict(), sort_keys=True))
    arrays["config"] = np.array(json.dumps(trainer.cfg.to_dict(), sort_keys=True))
    arrays["config_hash"] = np.array(trainer.cfg.hash())
    arrays["obs_dim"] = np.array(trainer.env.obs_dim)
    arrays["action_dim"] = np.array(trainer.env.action_dim)
    path = Path(path)
    tmp = path.with_suffix(".tmp.npz")
    np.savez(tmp, **arrays)
    tmp.replace(path)


def load_checkpoint(path) -> dict:
    """Read a checkpoint into plain Python/numpy structures."""
    with np.load(path, allow_pickle=False) as z:
        data = {k: z[k] for k in z.files}
    version = int(data["format_version"])
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"checkpoint format {version} unsupported (expected {CHECKPOINT_VERSION})")
    out = {
        "config": json.loads(str(data["config"])),
        "config_hash": str(data["config_hash"]),
        "curriculum": json.loads(str(data["curriculum"])),
        "visit_pairs": data["visit_pairs"],
        "obs_rms": {k.split("/", 1)[1]: v for k, v in data.items() if k.startswith("obs_rms/")},
        "obs_dim": int(data["obs_dim"]),
        "action_dim": int(data["action_dim"]),
    }
    for prefix in ("actor", "critic"):
        keys = sorted(k for k in data if k.startswith(prefix + "/"))
        out[prefix] = {k.split("/", 2)[2]: torch.as_tensor(data[k]) for k in keys}
    return out
