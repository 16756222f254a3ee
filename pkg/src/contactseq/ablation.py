"""Summaries of a (mode x seed) training matrix.

The ablation gates compare the full reward against each ablated variant two
ways: by the median final progress per mode, and seed by seed (seed ``k`` of
one mode against seed ``k`` of the other).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

# ablated mode -> required ratio of full progress over the ablated progress
REQUIRED_RATIO = {"no-stage": 1.0, "zero-one": 3.0, "no-curiosity": 3.0}


def read_summary(path) -> dict[str, dict[int, float]]:
    """Parse ``summary.csv`` written by ``contactseq ablate``."""
    out: dict[str, dict[int, float]] = {}
    with open(Path(path), newline="") as fh:
        for row in csv.DictReader(fh):
            out.setdefault(row["mode"], {})[int(row["seed"])] = float(row["final_progress"])
    return out


def beats(full: float, other: float, ratio: float) -> bool:
    """Strictly better and at least ``ratio`` times as large."""
    return full > other and full >= ratio * other


@dataclass
class AblationSummary:
    progress: dict[str, dict[int, float]]
    reference: str = "full"

    def median(self, mode: str) -> float:
        return float(np.median(list(self.progress[mode].values())))

    def pair_wins(self, mode: str) -> tuple[int, int]:
        """(wins, pairs) of the reference over ``mode`` on shared seeds."""
        ratio = REQUIRED_RATIO[mode]
        ref, other = self.progress[self.reference], self.progress[mode]
        seeds = sorted(set(ref) & set(other))
        wins = sum(beats(ref[s], other[s], ratio) for s in seeds)
        return wins, len(seeds)

    def ordering_holds(self, min_fraction: float = 0.8) -> bool:
        for mode in REQUIRED_RATIO:
            if mode not in self.progress:
                continue
            if not beats(self.median(self.reference), self.median(mode), REQUIRED_RATIO[mode]):
                return False
            wins, pairs = self.pair_wins(mode)
            if pairs == 0 or wins < min_fraction * pairs:
                return False
        return True

    def seed_spread(self) -> float:
        """Largest relative distance of any reference seed from the reference median."""
        med = self.median(self.reference)
        vals = np.array(list(self.progress[self.reference].values()))
        if med <= 0:
            return float("inf")
        return float(np.max(np.abs(vals - med)) / med)

    def seed_spread_ok(self, tol: float = 0.25) -> bool:
        return self.seed_spread() <= tol

    def report(self) -> str:
        lines = []
        for mode, runs in self.progress.items():
            vals = " ".join(f"{runs[s]:.3f}" for s in sorted(runs))
            lines.append(f"{mode:>14}  median {self.median(mode):.3f}  seeds [{vals}]")
        for mode in REQUIRED_RATIO:
            if mode in self.progress:
                wins, pairs = self.pair_wins(mode)
                lines.append(f"{self.reference} vs {mode} (x{REQUIRED_RATIO[mode]:g}): {wins}/{pairs} seed pairs")
        lines.append(f"{self.reference} seed spread: {self.seed_spread():.1%} of median")
        return "\n".join(lines)
