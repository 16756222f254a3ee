"""Clipped-surrogate PPO with optional mirror augmentation of the batch."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from ..stages import ConfigError
from .networks import Actor, Critic


@dataclass(frozen=True)
class PpoConfig:
    actor_hidden: tuple[int, ...] = (128, 64)
    critic_hidden: tuple[int, ...] = (128, 64)
    clip: float = 0.2
    lr: float = 1e-3
    gamma: float = 0.99
    lam: float = 0.95
    epochs: int = 5
    minibatches: int = 4
    horizon: int = 32
    num_envs: int = 256
    entropy_coef: float = 0.005
    value_coef: float = 1.0
    max_grad_norm: float = 1.0
    init_std: float = 1.0
    desired_kl: float | None = 0.01
    symmetry: bool = True
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.gamma <= 1 and 0 < self.lam <= 1):
            raise ConfigError("gamma and lambda must lie in (0, 1]")
        if self.clip <= 0:
            raise ConfigError("clip ratio must be positive")
        if self.epochs < 1 or self.minibatches < 1:
            raise ConfigError("epochs and minibatches must be >= 1")


class NonFiniteLossError(RuntimeError):
    pass


def surrogate_loss(log_prob, old_log_prob, advantages, clip: float):
    """Negative clipped surrogate, averaged over samples."""
    ratio = torch.exp(log_prob - old_log_prob)
    unclipped = ratio * advantages
    clipped = torch.clamp(ratio, 1.0 - clip, 1.0 + clip) * advantages
    return -torch.min(unclipped, clipped).mean()


def normalize_advantages(adv):
    if isinstance(adv, torch.Tensor):
        return (adv - adv.mean()) / (adv.std(unbiased=False) + 1e-8)
    adv = np.asarray(adv, dtype=float)
    return (adv - adv.mean()) / (adv.std() + 1e-8)


def symmetry_augment(batch: dict, mirror_obs, mirror_act, actor: Actor) -> dict:
    """Append the mirrored copy of every sample.

    Advantages and returns are shared with the original sample; the old
    log-probability of the mirrored pair is evaluated under the policy that
    collected the batch.
    """
    obs_m = torch.as_tensor(mirror_obs(batch["obs"].numpy()), dtype=batch["obs"].dtype)
    act_m = torch.as_tensor(mirror_act(batch["actions"].numpy()), dtype=batch["actions"].dtype)
    with torch.no_grad():
        logp_m = actor.log_prob(obs_m, act_m)
    out = {
        "obs": torch.cat([batch["obs"], obs_m]),
        "actions": torch.cat([batch["actions"], act_m]),
        "old_log_prob": torch.cat([batch["old_log_prob"], logp_m]),
    }
    for key in ("advantages", "returns"):
        out[key] = torch.cat([batch[key], batch[key]])
    return out


def ppo_update(batch: dict, actor: Actor, critic: Critic, optimizer, cfg: PpoConfig, generator=None, dump_dir=None) -> dict:
    """Several epochs of minibatch updates on ``batch``.

    ``batch`` holds tensors obs, actions, old_log_prob, advantages (already
    normalized) and returns. The learning rate adapts to keep the KL
    estimate near ``cfg.desired_kl`` when that is set.
    """
    n = batch["obs"].shape[0]
    mb = max(1, n // cfg.minibatches)
    stats = {"policy_loss": 0.0, "value_loss": 0.0, "entropy": 0.0, "kl": 0.0}
    steps = 0
    actor_params, critic_params = list(actor.parameters()), list(critic.parameters())
    for _ in range(cfg.epochs):
        perm = torch.randperm(n, generator=generator)
        for start in range(0, mb * cfg.minibatches, mb):
            idx = perm[start : start + mb]
            obs = batch["obs"][idx]
            dist = actor.distribution(obs)
            logp = dist.log_prob(batch["actions"][idx]).sum(-1)
            entropy = dist.entropy().sum(-1).mean()
            pol = surrogate_loss(logp, batch["old_log_prob"][idx], batch["advantages"][idx], cfg.clip)
            val = ((critic(obs) - batch["returns"][idx]) ** 2).mean()
            loss = pol + cfg.value_coef * val - cfg.entropy_coef * entropy
            if not torch.isfinite(loss):
                _dump(dump_dir, {"policy_loss": pol.item(), "value_loss": val.item(), "entropy": entropy.item()})
                raise NonFiniteLossError(f"non-finite loss (policy {pol.item()}, value {val.item()})")
            optimizer.zero_grad()
            loss.backward()
            # clipped separately so the value-loss scale cannot throttle the policy step
            torch.nn.utils.clip_grad_norm_(actor_params, cfg.max_grad_norm)
            torch.nn.utils.clip_grad_norm_(critic_params, cfg.max_grad_norm)
            optimizer.step()
            with torch.no_grad():
                log_ratio = logp - batch["old_log_prob"][idx]
                kl = float(((log_ratio.exp() - 1) - log_ratio).mean())
            if cfg.desired_kl is not None:
                lr = optimizer.param_groups[0]["lr"]
                if kl > 2.0 * cfg.desired_kl:
                    lr = max(1e-5, lr / 1.5)
                elif kl < 0.5 * cfg.desired_kl:
                    lr = min(1e-2, lr * 1.5)
                for g in optimizer.param_groups:
                    g["lr"] = lr
            stats["policy_loss"] += pol.item()
            stats["value_loss"] += val.item()
            stats["entropy"] += entropy.item()
            stats["kl"] += kl
            steps += 1
    return {k: v / steps for k, v in stats.items()}


def _dump(dump_dir, payload):
    if dump_dir is None:
        return
    path = Path(dump_dir) / "nonfinite_loss.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({k: (v if math.isfinite(v) else repr(v)) for k, v in payload.items()}, indent=2))
