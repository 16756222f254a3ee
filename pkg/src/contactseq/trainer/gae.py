from __future__ import annotations

import numpy as np


def compute_gae(rewards, values, dones, bootstrap, gamma: float, lam: float):
    """Generalized advantage estimation over a (T, ...) rollout.

    ``dones[t]`` marks that the episode ended after step ``t`` (no bootstrap
    through it). ``bootstrap`` is the value of the observation following the
    last step. Returns ``(advantages, returns)`` with ``returns = adv + values``.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=float)
    if not (rewards.shape == values.shape == dones.shape):
        raise ValueError(f"misaligned rollout arrays {rewards.shape}, {values.shape}, {dones.shape}")
    bootstrap = np.broadcast_to(np.asarray(bootstrap, dtype=float), rewards.shape[1:])
    adv = np.zeros_like(rewards)
    last = np.zeros(rewards.shape[1:])
    next_value = bootstrap
    for t in range(rewards.shape[0] - 1, -1, -1):
        live = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_value * live - values[t]
        last = delta + gamma * lam * live * last
        adv[t] = last
        next_value = values[t]
    return adv, adv + values
