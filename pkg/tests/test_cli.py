import csv

import pytest
import yaml

from contactseq import cli

TINY = ["--override", "ppo.num_envs=8", "--override", "ppo.horizon=8", "--override", "ppo.epochs=1",
        "--override", "max_iterations=2"]


def test_selftest_passes(capsys):
    assert cli.main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") == len(cli.selftest_checks())


def test_selftest_reports_mismatch(monkeypatch, capsys):
    monkeypatch.setitem(cli.rw.WEIGHT_PRESETS, "parkour", dict(w_con=1.0, w_stage=160.0, w_curi=20000.0))
    assert cli.main(["selftest"]) == cli.EXIT_SELFTEST
    assert "FAIL  weight presets" in capsys.readouterr().out


def test_selftest_ignores_zero_one_coefficient(monkeypatch):
    monkeypatch.setattr(cli.rw, "default_zero_one_coefficient", lambda n: 99.0)
    assert cli.main(["selftest"]) == 0


def test_missing_plan_file_is_config_error(tmp_path):
    code = cli.main(["train", "--out", str(tmp_path), "--override", "env.plan_file=/no/such/plan.yaml"] + TINY)
    assert code == cli.EXIT_CONFIG


def test_missing_config_file_is_config_error(tmp_path):
    assert cli.main(["train", "--config", str(tmp_path / "nope.yaml")]) == cli.EXIT_CONFIG


def test_train_writes_snapshot_with_override(tmp_path):
    assert cli.main(["train", "--out", str(tmp_path), "--seed", "4", "--override", "reward.w_curi=123"] + TINY) == 0
    run = tmp_path / "hopper-full-seed4"
    snap = yaml.safe_load((run / "config.yaml").read_text())
    assert snap["reward"]["w_curi"] == 123
    assert snap["ppo"]["seed"] == 4
    assert (run / "metrics.csv").exists() and (run / "checkpoint.npz").exists()


def test_snapshot_reproduces_run(tmp_path):
    assert cli.main(["train", "--out", str(tmp_path / "a")] + TINY) == 0
    snap = tmp_path / "a" / "hopper-full-seed0" / "config.yaml"
    assert cli.main(["train", "--config", str(snap), "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "hopper-full-seed0" / "metrics.csv").read_bytes()
    b = (tmp_path / "b" / "hopper-full-seed0" / "metrics.csv").read_bytes()
    assert a == b


def test_output_root_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV_VAR, str(tmp_path / "env-root"))
    assert cli.main(["train", "--mode", "no-stage"] + TINY) == 0
    assert (tmp_path / "env-root" / "hopper-no-stage-seed0" / "metrics.csv").exists()


def test_fault_exit_code_keeps_checkpoint(tmp_path, monkeypatch):
    from contactseq.trainer.ppo import NonFiniteLossError

    def boom(*a, **k):
        raise NonFiniteLossError("nan")

    monkeypatch.setattr("contactseq.trainer.train.ppo_update", boom)
    assert cli.main(["train", "--out", str(tmp_path)] + TINY) == cli.EXIT_FAULT
    assert (tmp_path / "hopper-full-seed0" / "checkpoint.npz").exists()


def test_ablate_writes_one_metrics_file_per_pair(tmp_path):
    code = cli.main(["ablate", "--out", str(tmp_path), "--modes", "full,no-stage", "--seeds", "0,1"] + TINY)
    assert code == 0
    runs = sorted(p.parent.name for p in tmp_path.glob("*/metrics.csv"))
    assert runs == ["hopper-full-seed0", "hopper-full-seed1", "hopper-no-stage-seed0", "hopper-no-stage-seed1"]
    rows = list(csv.DictReader(open(tmp_path / "summary.csv")))
    assert len(rows) == 4


@pytest.fixture(scope="module")
def checkpoint(tmp_path_factory):
    out = tmp_path_factory.mktemp("ckpt")
    assert cli.main(["train", "--out", str(out)] + TINY) == 0
    return out / "hopper-full-seed0" / "checkpoint.npz"


def test_eval_report_schema_and_determinism(checkpoint, tmp_path, capsys):
    args = ["eval", str(checkpoint), "--episodes", "6", "--seed", "2"]
    assert cli.main(args + ["--report", str(tmp_path / "r1.yaml")]) == 0
    assert cli.main(args + ["--report", str(tmp_path / "r2.yaml")]) == 0
    r1 = yaml.safe_load((tmp_path / "r1.yaml").read_text())
    assert (tmp_path / "r1.yaml").read_text() == (tmp_path / "r2.yaml").read_text()
    assert set(r1) >= {"progress", "success_rate", "reward_terms"}
    assert set(r1["progress"]) == {"mean", "min", "max"}
    assert set(r1["reward_terms"]) == {"r_con", "r_stage", "r_curi", "r_reg", "r_task", "r_total"}
    assert r1["progress"]["mean"] <= 0.25  # barely trained


def test_eval_trajectory_dump(checkpoint, tmp_path):
    traj = tmp_path / "t.csv"
    assert cli.main(["eval", str(checkpoint), "--episodes", "2", "--trajectory", str(traj)]) == 0
    rows = list(csv.DictReader(open(traj)))
    assert rows and {"step", "env", "n_stage", "r_total"} <= set(rows[0])


def test_eval_env_mismatch_is_fault(checkpoint):
    assert cli.main(["eval", str(checkpoint), "--override", "env.name=pusher"]) == cli.EXIT_FAULT
