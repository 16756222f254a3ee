"""Command-line front end: ``contactseq {train,eval,ablate,selftest}``.

Exit codes: 0 success, 1 self-test mismatch, 2 configuration error,
3 run fault (the final checkpoint is kept in the run directory).
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import config as config_mod
from . import curiosity as cu
from . import rewards as rw
from .evaluate import CheckpointMismatch, evaluate, write_report
from .stages import ConfigError
from .trainer.train import TrainingFault, Trainer

EXIT_SELFTEST = 1
EXIT_CONFIG = 2
EXIT_FAULT = 3
OUT_ENV_VAR = "CONTACTSEQ_OUT"

logger = logging.getLogger("contactseq")


def _overrides(pairs) -> dict:
    return dict(config_mod.parse_override(p) for p in pairs or [])


def resolve_config(args) -> config_mod.RunConfig:
    """Config file, then ``--override`` pairs, then ``--seed``/``--mode``."""
    ov = _overrides(args.override)
    if getattr(args, "mode", None):
        ov["mode"] = args.mode
    if getattr(args, "seed", None) is not None:
        ov["ppo.seed"] = args.seed
    if args.config:
        return config_mod.load_config(args.config, ov)
    return config_mod.RunConfig().with_overrides(ov)


def output_root(args, cfg) -> Path:
    if args.out:
        return Path(args.out)
    return Path(os.environ.get(OUT_ENV_VAR, cfg.out_dir))


def run_dir_name(cfg) -> str:
    return f"{cfg.env.name}-{cfg.mode}-seed{cfg.seed}"


def run_one(cfg, run_dir: Path, log_every: int = 0):
    run_dir.mkdir(parents=True, exist_ok=True)
    config_mod.dump_config(cfg, run_dir / "config.yaml")
    trainer = Trainer(cfg, run_dir)
    return trainer.run(log_every=log_every)


# -- verbs ------------------------------------------------------------------------


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    run_dir = output_root(args, cfg) / run_dir_name(cfg)
    result = run_one(cfg, run_dir, log_every=args.log_every)
    print(f"run directory: {result.out_dir}")
    print(f"iterations: {result.iterations}  final progress: {result.final_progress:.4f}")
    return 0


def cmd_eval(args) -> int:
    report = evaluate(args.checkpoint, args.episodes, args.seed, _overrides(args.override), args.trajectory)
    text = yaml.safe_dump(report, sort_keys=False)
    if args.report:
        write_report(report, args.report)
    print(text, end="")
    return 0


def cmd_ablate(args) -> int:
    """Train every (mode, seed) pair sequentially and summarize final progress."""
    base = resolve_config(args)
    modes = args.modes.split(",") if args.modes else ["full", "zero-one", "no-stage", "no-curiosity"]
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else list(base.seeds)
    root = output_root(args, base)
    root.mkdir(parents=True, exist_ok=True)
    rows = []
    for mode in modes:
        for seed in seeds:
            cfg = base.with_overrides({"mode": mode, "ppo.seed": seed})
            result = run_one(cfg, root / run_dir_name(cfg), log_every=args.log_every)
            rows.append((mode, seed, result.final_progress, result.iterations))
            print(f"{mode:>14} seed {seed}: final progress {result.final_progress:.4f}", flush=True)
    with open(root / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mode", "seed", "final_progress", "iterations"])
        for mode, seed, prog, its in rows:
            w.writerow([mode, seed, f"{prog:.9g}", its])
    for mode in modes:
        vals = [p for m, _, p, _ in rows if m == mode]
        print(f"{mode:>14} median final progress {float(np.median(vals)):.4f}")
    return 0


def selftest_checks() -> list[tuple[str, bool]]:
    """Golden values with known answers; each entry is ``(name, passed)``."""
    checks = []
    checks.append(("contact reward, first stage wrong foot = 1", rw.contact_reward(1, 1, 2, 0, 0, 1) == 1))
    checks.append(("contact reward, later stage wrong foot = -1", rw.contact_reward(1, 1, 2, 3, 0, 1) == -1))
    checks.append(("contact reward, two effectors fulfilled = 10", rw.contact_reward(2, 0, 2, 1, 1, 1) == 10))
    checks.append(("hash bucket of outputs [1.5, -0.2, 0.4] = 5", cu.bucket_from_outputs([1.5, -0.2, 0.4]) == 5))
    net, table = cu.HashNetwork(3, seed=0), cu.VisitTable()
    seq = [cu.curiosity_reward(np.zeros(3), net, table) for _ in range(100)]
    checks.append(
        ("visit bonus sequence 1/sqrt(n)", all(abs(v - 1 / math.sqrt(n)) <= 1e-12 for n, v in enumerate(seq, 1)))
    )
    presets = {
        "parkour": (120.0, 160.0, 20000.0),
        "loco_mani": (40.0, 160.0, 40000.0),
        "dancing": (10.0, 5.0, 5000.0),
        "cliffside": (20.0, 40.0, 10000.0),
    }
    ok = all(
        (rw.WEIGHT_PRESETS[k]["w_con"], rw.WEIGHT_PRESETS[k]["w_stage"], rw.WEIGHT_PRESETS[k]["w_curi"]) == v
        for k, v in presets.items()
    )
    checks.append(("weight presets", ok))
    return checks


def cmd_selftest(args) -> int:
    checks = selftest_checks()
    for name, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    failed = [n for n, ok in checks if not ok]
    if failed:
        print(f"{len(failed)} check(s) failed", file=sys.stderr)
        return EXIT_SELFTEST
    return 0


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="contactseq", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)

    def run_flags(p):
        p.add_argument("--config", help="YAML run config")
        p.add_argument("--out", help=f"output root (default: ${OUT_ENV_VAR} or config out_dir)")
        p.add_argument("--override", action="append", metavar="KEY=VALUE", help="dotted config override, repeatable")
        p.add_argument("--log-every", type=int, default=0, help="log progress every N iterations (0: quiet)")

    p = sub.add_parser("train", help="train one run")
    run_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=config_mod.MODES)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint with the mean action")
    p.add_argument("checkpoint")
    p.add_argument("--episodes", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", help="also write the YAML report here")
    p.add_argument("--trajectory", help="write a per-step CSV here")
    p.add_argument("--override", action="append", metavar="KEY=VALUE")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train a (mode x seed) matrix")
    run_flags(p)
    p.add_argument("--modes", help="comma-separated modes (default: full,zero-one,no-stage,no-curiosity)")
    p.add_argument("--seeds", help="comma-separated seeds (default: config seeds)")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("selftest", help="check golden values")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CheckpointMismatch as exc:
        print(f"fault: {exc}", file=sys.stderr)
        return EXIT_FAULT
    except TrainingFault as exc:
        print(f"fault: {exc}; checkpoint kept at {exc.checkpoint}", file=sys.stderr)
        return EXIT_FAULT


if __name__ == "__main__":
    sys.exit(main())
