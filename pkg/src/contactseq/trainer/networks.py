from __future__ import annotations

import numpy as np
import torch
from torch import nn


def mlp(in_dim: int, hidden, out_dim: int, activation=nn.ELU) -> nn.Sequential:
    layers, d = [], in_dim
    for h in hidden:
        layers += [nn.Linear(d, h), activation()]
        d = h
    layers.append(nn.Linear(d, out_dim))
    return nn.Sequential(*layers)


class Actor(nn.Module):
    """Gaussian policy with a state-independent log standard deviation."""

    def __init__(self, obs_dim: int, act_dim: int, hidden=(128, 64), init_std: float = 1.0):
        super().__init__()
        self.net = mlp(obs_dim, hidden, act_dim)
        self.log_std = nn.Parameter(torch.full((act_dim,), float(np.log(init_std))))
        with torch.no_grad():
            self.net[-1].weight.mul_(0.01)
            self.net[-1].bias.zero_()

    def forward(self, obs):
        return self.net(obs)

    def distribution(self, obs) -> torch.distributions.Normal:
        mean = self.net(obs)
        return torch.distributions.Normal(mean, self.log_std.exp().expand_as(mean))

    def log_prob(self, obs, actions):
        return self.distribution(obs).log_prob(actions).sum(-1)


class Critic(nn.Module):
    def __init__(self, obs_dim: int, hidden=(128, 64)):
        super().__init__()
        self.net = mlp(obs_dim, hidden, 1)

    def forward(self, obs):
        return self.net(obs).squeeze(-1)


class RunningMeanStd:
    """Running observation statistics (parallel-merge update)."""

    def __init__(self, dim: int, clip: float = 5.0):
        self.mean = np.zeros(dim)
        self.var = np.ones(dim)
        self.count = 1e-4
        self.clip = clip

    def update(self, x: np.ndarray):
        x = np.asarray(x, dtype=float).reshape(-1, self.mean.size)
        b_mean, b_var, b_n = x.mean(0), x.var(0), x.shape[0]
        delta = b_mean - self.mean
        tot = self.count + b_n
        self.mean = self.mean + delta * b_n / tot
        m2 = self.var * self.count + b_var * b_n + delta**2 * self.count * b_n / tot
        self.var = m2 / tot
        self.count = tot

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return np.clip((x - self.mean) / np.sqrt(self.var + 1e-8), -self.clip, self.clip)

    def state(self) -> dict:
        return {"mean": self.mean, "var": self.var, "count": np.array(self.count)}

    def load(self, d: dict):
        self.mean = np.asarray(d["mean"], dtype=float)
        self.var = np.asarray(d["var"], dtype=float)
        self.count = float(d["count"])
