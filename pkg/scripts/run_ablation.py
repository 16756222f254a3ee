"""Train the hopper ablation matrix and check the ordering and seed-spread gates.

    python scripts/run_ablation.py --out runs/ablation [--seeds 0,1,2,3,4]

Writes one run directory per (mode, seed) under ``--out`` plus ``summary.csv``,
then prints the median final progress per mode and the pairwise ordering.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from contactseq import cli
from contactseq.ablation import AblationSummary, read_summary

ROOT = Path(__file__).resolve().parents[1]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(ROOT / "configs" / "hopper.yaml"))
    ap.add_argument("--out", default="runs/ablation")
    ap.add_argument("--seeds", default="0,1,2,3,4")
    ap.add_argument("--modes", default="full,no-stage,zero-one,no-curiosity")
    ap.add_argument("--reuse", action="store_true", help="only summarize an existing summary.csv")
    args = ap.parse_args()
    if not args.reuse:
        code = cli.main(["ablate", "--config", args.config, "--out", args.out, "--modes", args.modes, "--seeds", args.seeds])
        if code:
            return code
    summary = AblationSummary(read_summary(Path(args.out) / "summary.csv"))
    print(summary.report())
    return 0 if summary.ordering_holds() and summary.seed_spread_ok() else 1


if __name__ == "__main__":
    sys.exit(main())
