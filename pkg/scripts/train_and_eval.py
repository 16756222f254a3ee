"""Train one run from a config, then evaluate its final checkpoint.

    python scripts/train_and_eval.py --config configs/pusher.yaml --out runs --episodes 32

Prints the training summary followed by the evaluation report, and writes
``eval.yaml`` and ``trajectory.csv`` next to the checkpoint.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import yaml

from contactseq import cli
from contactseq.config import load_config, parse_override
from contactseq.evaluate import evaluate, write_report

ROOT = Path(__file__).resolve().parents[1]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(ROOT / "configs" / "hopper.yaml"))
    ap.add_argument("--out", default="runs")
    ap.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    ap.add_argument("--episodes", type=int, default=16)
    ap.add_argument("--log-every", type=int, default=10)
    args = ap.parse_args()

    cfg = load_config(args.config, dict(parse_override(o) for o in args.override))
    result = cli.run_one(cfg, Path(args.out) / cli.run_dir_name(cfg), log_every=args.log_every)
    print(f"trained {result.iterations} iterations, final progress {result.final_progress:.3f}")

    report = evaluate(result.checkpoint_path, args.episodes, seed=0, trajectory=result.out_dir / "trajectory.csv")
    write_report(report, result.out_dir / "eval.yaml")
    print(yaml.safe_dump(report, sort_keys=False), end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
