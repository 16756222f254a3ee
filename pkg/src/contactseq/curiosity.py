"""Count-based curiosity through a frozen random-network hash.

Observations are squashed into a fixed range, pushed through a small random
MLP, and the sign pattern of its outputs names a bucket. The bonus for a
state is ``1 / sqrt(visits of its bucket)``.

``RNDCuriosity`` is the random-network-distillation alternative used for
ablations.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

logger = logging.getLogger(__name__)

HIDDEN_UNITS = 32
HASH_BITS = 16


def bin2dec(bits) -> np.ndarray | int:
    """Read boolean arrays (last axis) as binary numbers, first element most significant."""
    bits = np.asarray(bits, dtype=np.int64)
    k = bits.shape[-1]
    weights = np.left_shift(1, np.arange(k - 1, -1, -1, dtype=np.int64))
    out = bits @ weights
    return int(out) if out.ndim == 0 else out


def bucket_from_outputs(outputs) -> np.ndarray | int:
    return bin2dec(np.asarray(outputs) > 0)


class HashNetwork:
    """Frozen ``in_dim -> 32 (tanh) -> out_dim`` network.

    Weights are drawn from ``seed`` with orthogonal rows/columns at unit
    scale; identical seeds give identical weights.
    """

    def __init__(self, in_dim: int, seed: int = 0, hidden: int = HIDDEN_UNITS, out_dim: int = HASH_BITS):
        rng = np.random.default_rng(seed)
        self.in_dim, self.hidden, self.out_dim, self.seed = in_dim, hidden, out_dim, seed
        # unit-order gain so the pre-activations of method-2 inputs are O(1)
        w1 = _orthogonal(rng, hidden, in_dim) * math.sqrt(max(1.0, hidden / in_dim))
        w2 = _orthogonal(rng, out_dim, hidden) * math.sqrt(hidden / out_dim)
        b1 = rng.uniform(-0.5, 0.5, size=hidden)
        self._params = {"w1": w1, "b1": b1, "w2": w2}
        for p in self._params.values():
            p.setflags(write=False)

    @property
    def params(self) -> dict:
        return dict(self._params)

    def __call__(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.in_dim:
            raise ValueError(f"hash input dim {v.shape[-1]} != {self.in_dim}")
        h = np.tanh(v @ self._params["w1"].T + self._params["b1"])
        return h @ self._params["w2"].T

    def bucket(self, v):
        return bucket_from_outputs(self(v))


def _orthogonal(rng, rows, cols) -> np.ndarray:
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    return q if rows >= cols else q.T


def bucket_id(v, net: HashNetwork):
    return net.bucket(v)


class VisitTable:
    """Visit counts per bucket; counts only grow."""

    def __init__(self, n_bits: int = HASH_BITS):
        self.n_bits = n_bits
        self.counts = np.zeros(1 << n_bits, dtype=np.int64)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __getitem__(self, bucket: int) -> int:
        return int(self.counts[bucket])

    def record(self, ids) -> np.ndarray:
        """Increment buckets in the given order; return each entry's count
        right after its own increment."""
        ids = np.asarray(ids, dtype=np.int64).ravel()
        if ids.size == 0:
            return np.zeros(0, dtype=np.int64)
        # rank of each entry among earlier entries with the same id
        order = np.argsort(ids, kind="stable")
        sorted_ids = ids[order]
        starts = np.r_[0, np.flatnonzero(np.diff(sorted_ids)) + 1]
        run_start = np.repeat(starts, np.diff(np.r_[starts, ids.size]))
        rank = np.empty_like(ids)
        rank[order] = np.arange(ids.size) - run_start
        after = self.counts[ids] + rank + 1
        np.add.at(self.counts, ids, 1)
        return after

    def query(self, ids) -> np.ndarray:
        return self.counts[np.asarray(ids, dtype=np.int64)]

    def to_pairs(self) -> np.ndarray:
        """``(k, 2)`` array of ``(bucket, count)`` for visited buckets, sorted by bucket."""
        nz = np.flatnonzero(self.counts)
        return np.stack([nz, self.counts[nz]], axis=1)

    @classmethod
    def from_pairs(cls, pairs, n_bits: int = HASH_BITS) -> "VisitTable":
        t = cls(n_bits)
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        t.counts[pairs[:, 0]] = pairs[:, 1]
        return t


_clamp_warnings = 0


def preprocess(o, method: int, lo, hi, n_stage=0) -> np.ndarray:
    """Squash raw curiosity observations using per-component ranges.

    1: affine map to [0, 1]. 2: map to [0, pi] then (sin, cos) per component,
    sin block first. 3: method 2 scaled by ``n_stage + 1``. Values outside the
    range are clamped.
    """
    global _clamp_warnings
    o = np.asarray(o, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    clipped = np.clip(o, lo, hi)
    if np.any(clipped != o):
        if _clamp_warnings == 0:
            logger.warning("curiosity observation outside declared range; clamping")
        _clamp_warnings += 1
    u = (clipped - lo) / (hi - lo)
    if method == 1:
        return u
    if method not in (2, 3):
        raise ValueError(f"unknown preprocessing method {method}")
    ang = math.pi * u
    out = np.concatenate([np.sin(ang), np.cos(ang)], axis=-1)
    if method == 3:
        scale = np.asarray(n_stage, dtype=float) + 1.0
        out = out * (scale[..., None] if scale.ndim else scale)
    return out


def curiosity_reward(v, net: HashNetwork, table: VisitTable, record: bool = True) -> float:
    b = net.bucket(v)
    if record:
        n = table.record([b])[0]
    else:
        n = max(table[b], 1)
    return 1.0 / math.sqrt(n)


def symmetric_curiosity(v, v_mirror, net: HashNetwork, table: VisitTable) -> float:
    """Average of the two recorded bonuses (original first)."""
    return 0.5 * (curiosity_reward(v, net, table) + curiosity_reward(v_mirror, net, table))


@dataclass
class HashCuriosity:
    """Batched hash curiosity shared by every environment of a run.

    Increments are applied in environment-index order; with ``symmetric``
    each environment's original observation is recorded before its mirror.
    """

    net: HashNetwork
    table: VisitTable
    lo: np.ndarray
    hi: np.ndarray
    method: int = 2

    @classmethod
    def build(cls, raw_dim: int, lo, hi, seed: int = 0, method: int = 2) -> "HashCuriosity":
        in_dim = raw_dim if method == 1 else 2 * raw_dim
        return cls(HashNetwork(in_dim, seed), VisitTable(), np.asarray(lo, float), np.asarray(hi, float), method)

    def buckets(self, o, n_stage=0):
        return self.net.bucket(preprocess(o, self.method, self.lo, self.hi, n_stage))

    def __call__(self, o, o_mirror=None, n_stage=0, record: bool = True) -> np.ndarray:
        ids = np.atleast_1d(self.buckets(o, n_stage))
        if o_mirror is None:
            if record:
                return 1.0 / np.sqrt(self.table.record(ids))
            return 1.0 / np.sqrt(np.maximum(self.table.query(ids), 1))
        mids = np.atleast_1d(self.buckets(o_mirror, n_stage))
        inter = np.stack([ids, mids], axis=1).ravel()
        if record:
            counts = self.table.record(inter)
        else:
            counts = np.maximum(self.table.query(inter), 1)
        return (1.0 / np.sqrt(counts)).reshape(-1, 2).mean(axis=1)


# ---------------------------------------------------------------------------
# random network distillation baseline


def _mlp(in_dim, hidden, out_dim):
    return nn.Sequential(nn.Linear(in_dim, hidden), nn.ELU(), nn.Linear(hidden, out_dim))


def rnd_bonus(v, target_net: nn.Module, predictor_net: nn.Module) -> torch.Tensor:
    """Squared prediction error per sample (summed over output units)."""
    v = torch.as_tensor(v, dtype=torch.float32)
    with torch.no_grad():
        t = target_net(v)
    return ((predictor_net(v) - t) ** 2).sum(-1)


class RNDCuriosity:
    """Frozen target, trained predictor. Bonuses are divided by a running
    standard deviation so their scale is comparable to the hash bonus."""

    def __init__(self, in_dim: int, seed: int = 0, hidden: int = 64, out_dim: int = HASH_BITS, lr: float = 1e-3, normalize: bool = True):
        g = torch.Generator().manual_seed(seed)
        self.target = _mlp(in_dim, hidden, out_dim)
        self.predictor = _mlp(in_dim, hidden, out_dim)
        with torch.no_grad():
            for p in list(self.target.parameters()) + list(self.predictor.parameters()):
                p.copy_(torch.randn(p.shape, generator=g) * (1.0 / math.sqrt(p.shape[-1])))
        for p in self.target.parameters():
            p.requires_grad_(False)
        self.opt = torch.optim.Adam(self.predictor.parameters(), lr=lr)
        self.normalize = normalize
        self._m2 = 0.0
        self._mean = 0.0
        self._n = 0

    def bonus(self, v) -> np.ndarray:
        with torch.no_grad():
            b = rnd_bonus(v, self.target, self.predictor).double().numpy()
        if not self.normalize:
            return b
        x = np.atleast_1d(b)
        n = self._n + x.size
        d = x.mean() - self._mean
        self._m2 += ((x - x.mean()) ** 2).sum() + d * d * self._n * x.size / n
        self._mean += d * x.size / n
        self._n = n
        std = math.sqrt(self._m2 / self._n) if self._n > 1 else 1.0
        return b / max(std, 1e-8)

    def update(self, batch) -> float:
        loss = rnd_bonus(batch, self.target, self.predictor).mean()
        self.opt.zero_grad()
        loss.backward()
        self.opt.step()
        return loss.item()


def rnd_update(batch, rnd: RNDCuriosity) -> float:
    return rnd.update(batch)
