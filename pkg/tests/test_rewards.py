import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contactseq import rewards as rw
from contactseq.stages import ConfigError

finite = st.floats(-50, 50, allow_nan=False)


# -- contact / stage / zero-one -----------------------------------------------------


def test_wrong_contact_is_masked_in_first_stage():
    assert rw.contact_reward(1, 1, 2, 0, 0, 1) == 1


def test_wrong_contact_penalized_after_first_stage():
    assert rw.contact_reward(1, 1, 2, 3, 0, 1) == -1


def test_full_fulfillment_with_two_effectors_is_ten():
    for n_stage in range(4):
        assert rw.contact_reward(2, 0, 2, n_stage, 1, 1) == 10


@pytest.mark.parametrize("n_con", [1, 2, 3, 4])
def test_contact_reward_maximized_only_at_full_fulfillment(n_con):
    best, argbest = -math.inf, []
    for n_corr, n_wrong in itertools.product(range(n_con + 1), repeat=2):
        if n_corr + n_wrong > n_con:
            continue
        for f_con, f_task, n_stage in itertools.product((0, 1), (0, 1), (0, 2)):
            # F_con implies every constrained effector is correct
            if f_con and (n_corr != n_con or n_wrong):
                continue
            v = rw.contact_reward(n_corr, n_wrong, n_con, n_stage, f_con, f_task)
            if v > best:
                best, argbest = v, [(n_corr, n_wrong, f_con, f_task)]
            elif v == best:
                argbest.append((n_corr, n_wrong, f_con, f_task))
    assert {a for a in argbest} == {(n_con, 0, 1, 1)}


@given(st.integers(0, 4), st.integers(0, 4), st.integers(1, 4), st.booleans(), st.booleans())
def test_penalty_term_vanishes_in_first_stage(n_corr, n_wrong, n_con, f_con, f_task):
    a = rw.contact_reward(n_corr, n_wrong, n_con, 0, f_con, f_task)
    b = rw.contact_reward(n_corr, n_wrong + 1, n_con, 0, f_con, f_task)
    assert a == b


def test_contact_reward_vectorizes():
    out = rw.contact_reward(np.array([1, 2]), np.array([1, 0]), 2, np.array([3, 1]), np.array([0, 1]), np.array([1, 1]))
    np.testing.assert_array_equal(out, [-1, 10])


@pytest.mark.parametrize("n_stage,f_task,expected", [(0, True, 0), (3, True, 3), (5, False, 0)])
def test_stage_count_reward(n_stage, f_task, expected):
    assert rw.stage_count_reward(n_stage, f_task) == expected


@given(st.integers(0, 50), st.integers(0, 50))
def test_stage_count_monotone(a, b):
    lo, hi = sorted((a, b))
    assert rw.stage_count_reward(lo, True) <= rw.stage_count_reward(hi, True)


@pytest.mark.parametrize("f_con,f_task,expected", [(True, True, 10), (True, False, 0), (False, True, 0)])
def test_zero_one_reward(f_con, f_task, expected):
    assert rw.zero_one_reward(f_con, f_task, 10) == expected


def test_zero_one_default_matches_dense_maximum():
    for n_con in range(1, 5):
        assert rw.default_zero_one_coefficient(n_con) == rw.contact_reward(n_con, 0, n_con, 1, 1, 1)
    assert rw.RewardConfig(n_con=2).zero_one_coefficient == 10
    assert rw.RewardConfig(n_con=2, c01=3.0).zero_one_coefficient == 3.0


# -- regularization -------------------------------------------------------------------


def test_termination_only():
    w = {"termination": -200.0}
    assert rw.regularization_reward({"termination": 1.0}, w, 1.0) == -200.0


def test_all_zero_signals_give_zero():
    w = {k: v for k, v in rw.DEFAULT_REG_WEIGHTS.items() if k not in ("no_fly", "feet_air_time")}
    signals = {
        "ang_vel_z": 0.0, "torque_ratio": np.zeros(4), "dof_acc": np.zeros(4), "dof_vel": np.zeros(4),
        "action_rate": np.zeros(4), "termination": 0.0, "foot_force": np.zeros(2),
        "foot_contact_angle": np.zeros(2), "foot_horizontal_impact": np.zeros(2),
        "foot_speed": np.zeros(2), "foot_contact": np.zeros(2),
    }
    assert rw.regularization_reward(signals, w, 1.0) == 0.0


def test_default_weights_follow_table():
    expected = {
        "yaw_rate": -0.1, "torques": -0.5, "torque_overlimit": -500.0, "dof_acc": -5e-6, "dof_vel": -0.003,
        "action_rate": -250.0, "termination": -200.0, "foot_contact_forces": -0.005, "foot_orientation": -50.0,
        "stumble": -100.0, "slippage": -5.0, "feet_air_time": 20.0, "no_fly": 10.0,
    }
    assert rw.DEFAULT_REG_WEIGHTS == expected


def test_enabled_term_with_missing_signal_is_config_error():
    with pytest.raises(ConfigError):
        rw.regularization_reward({}, {"dof_vel": -0.003})


def test_disabled_term_needs_no_signal():
    assert rw.regularization_reward({}, {"dof_vel": 0.0}) == 0.0


def test_unknown_term_is_config_error():
    with pytest.raises(ConfigError):
        rw.regularization_reward({}, {"wiggle": 1.0})


def _reg_oracle(s, w):
    """Each table row evaluated on its own."""
    total = 0.0
    total += w["yaw_rate"] * s["ang_vel_z"] ** 2
    total += w["torques"] * sum(r * r for r in s["torque_ratio"])
    total += w["torque_overlimit"] * sum(max(abs(r) - 0.95, 0.0) for r in s["torque_ratio"])
    total += w["dof_acc"] * sum(q * q for q in s["dof_acc"])
    total += w["dof_vel"] * sum(q * q for q in s["dof_vel"])
    total += w["action_rate"] * sum(a * a for a in s["action_rate"])
    total += w["termination"] * s["termination"]
    total += w["foot_contact_forces"] * sum(max(abs(f) - 550.0, 0.0) for f in s["foot_force"])
    total += w["foot_orientation"] * sum(abs(math.sin(t)) for t in s["foot_contact_angle"])
    total += w["stumble"] * sum(s["foot_horizontal_impact"])
    total += w["slippage"] * sum(v * v * c for v, c in zip(s["foot_speed"], s["foot_contact"]))
    total += w["feet_air_time"] * sum((t - 0.5) * f for t, f in zip(s["air_time_at_touchdown"], s["first_contact"]))
    total += w["no_fly"] * float(any(s["foot_contact"]))
    return total


@settings(max_examples=200)
@given(st.integers(0, 2**31 - 1), st.floats(1.0, 2.0))
def test_regularization_matches_row_by_row_oracle(seed, scale):
    rng = np.random.default_rng(seed)
    s = {
        "ang_vel_z": float(rng.normal()),
        "torque_ratio": list(rng.uniform(-1.2, 1.2, 4)),
        "dof_acc": list(rng.normal(0, 50, 4)),
        "dof_vel": list(rng.normal(0, 3, 4)),
        "action_rate": list(rng.normal(0, 0.3, 4)),
        "termination": float(rng.random() < 0.5),
        "foot_force": list(rng.uniform(0, 900, 2)),
        "foot_contact_angle": list(rng.uniform(-1, 1, 2)),
        "foot_horizontal_impact": list((rng.random(2) < 0.5).astype(float)),
        "foot_speed": list(rng.uniform(0, 2, 2)),
        "foot_contact": list((rng.random(2) < 0.5).astype(float)),
        "air_time_at_touchdown": list(rng.uniform(0, 1, 2)),
        "first_contact": list((rng.random(2) < 0.5).astype(float)),
    }
    w = rw.DEFAULT_REG_WEIGHTS
    got = rw.regularization_reward({k: np.asarray(v) for k, v in s.items()}, w, scale)
    assert got == pytest.approx(scale * _reg_oracle(s, w), abs=1e-9, rel=1e-12)


def test_toy_environments_disable_humanoid_rows():
    for env in ("hopper", "pusher"):
        w = rw.reg_weights_for(env)
        for name in rw.HUMANOID_ONLY:
            assert w[name] == 0.0
    assert rw.reg_weights_for("hopper")["no_fly"] == 0.0
    assert rw.reg_weights_for("hopper")["feet_air_time"] == 0.0


# -- task rewards ---------------------------------------------------------------------


def test_posture_identity_and_decay():
    assert rw.task_reward_posture(0, 0, 30) == 30
    assert rw.task_reward_posture(math.pi, 0, 30) == pytest.approx(30 * math.exp(-1))
    assert rw.task_reward_posture(0, 1, 30) == pytest.approx(11.036, abs=1e-3)


@given(finite, finite)
def test_posture_in_range(a, b):
    v = rw.task_reward_posture(a, b, 30)
    assert 0 <= v <= 30


def test_transport_all_zero_distances():
    assert rw.task_reward_transport(0, 0, 0, 0, 0, 1, 200, 100) == 300


def test_transport_first_stage_only_hand_term():
    v = rw.task_reward_transport(0.0, 3.0, 3.0, 0.0, 0.0, 0, 200, 100)
    assert v == pytest.approx(100 * math.exp(-3.0))


def test_transport_gates_can_be_disabled():
    gated = rw.task_reward_transport(0, 0, 0, 3.0, 3.0, 1, 200, 100)
    free = rw.task_reward_transport(0, 0, 0, 3.0, 3.0, 1, 200, 100, angle_gates_enabled=False)
    assert gated == 0 and free == 300


@given(
    st.floats(0, 5), st.floats(0, 5), st.floats(0, 5),
    st.floats(-math.pi, math.pi), st.floats(-math.pi, math.pi), st.integers(0, 3), st.booleans(),
)
def test_transport_matches_formula(d_od, d_l, d_r, th_d, th_o, n_stage, gates):
    g1 = (abs(th_d) < math.pi / 2) if gates else True
    g2 = (abs(th_o) < math.pi / 6) if gates else True
    expected = 200 * math.exp(-d_od) * (n_stage > 0) * g1 + 100 * math.exp(-(d_l + d_r) / 2) * g2
    got = rw.task_reward_transport(d_od, d_l, d_r, th_d, th_o, n_stage, 200, 100, gates)
    assert got == pytest.approx(expected, abs=1e-12)


def test_preset_only_forms():
    assert rw.task_reward_arm_spread(0.2, -0.2, 1, -1, 5) == pytest.approx(2.0)
    assert rw.task_reward_gaussian_footholds(0, 0, 10) == 10
    assert rw.task_reward_wall_and_reach(0.0, np.zeros(2)) == pytest.approx(10.0)


# -- totals ---------------------------------------------------------------------------


def test_all_zero_parts_total_zero():
    assert rw.total_reward({}, rw.RewardConfig()).r_total == 0


def test_unit_parts_with_parkour_weights():
    cfg = rw.preset("hopper", 2)
    out = rw.total_reward({"r_con": 1, "r_stage": 1, "r_curi": 1, "r_reg": 0.5, "r_task": 2}, cfg)
    assert out.r_total == 120 + 160 + 20000 + 0.5 + 2


def test_presets_follow_weight_columns():
    assert (rw.preset("hopper", 2).w_con, rw.preset("hopper", 2).w_stage, rw.preset("hopper", 2).w_curi) == (120, 160, 20000)
    p = rw.preset("pusher", 2)
    assert (p.w_con, p.w_stage, p.w_curi) == (40, 160, 40000)
    assert rw.WEIGHT_PRESETS["dancing"] == dict(w_con=10.0, w_stage=5.0, w_curi=5000.0)
    assert rw.WEIGHT_PRESETS["cliffside"] == dict(w_con=20.0, w_stage=40.0, w_curi=10000.0)


def test_explicit_family_keeps_environment_regularization_rows():
    own, other = rw.preset("hopper", 2), rw.preset("hopper", 2, family="dancing")
    assert (other.w_con, other.w_stage, other.w_curi) == (10, 5, 5000)
    assert other.reg_weights == own.reg_weights
    assert rw.preset("hopper", 2, family="parkour") == own


@settings(max_examples=200)
@given(st.lists(finite, min_size=5, max_size=5), st.lists(st.floats(0, 1000), min_size=3, max_size=3), st.floats(1, 2))
def test_total_matches_weighted_sum(parts, weights, scale):
    cfg = rw.RewardConfig(w_con=weights[0], w_stage=weights[1], w_curi=weights[2], reg_scale=scale)
    names = ("r_con", "r_stage", "r_curi", "r_reg", "r_task")
    out = rw.total_reward(dict(zip(names, parts)), cfg)
    expected = weights[0] * parts[0] + weights[1] * parts[1] + weights[2] * parts[2] + scale * parts[3] + parts[4]
    assert out.r_total == pytest.approx(expected, abs=1e-9)


@given(st.lists(finite, min_size=5, max_size=5), st.floats(0, 100), st.floats(0, 100))
def test_total_linear_in_contact_weight(parts, a, b):
    names = ("r_con", "r_stage", "r_curi", "r_reg", "r_task")
    p = dict(zip(names, parts))
    f = lambda w: rw.total_reward(p, rw.RewardConfig(w_con=w)).r_total
    assert f(a + b) - f(0) == pytest.approx((f(a) - f(0)) + (f(b) - f(0)), abs=1e-6)


def test_reward_config_validation():
    with pytest.raises(ConfigError):
        rw.RewardConfig(n_con=0)
    with pytest.raises(ConfigError):
        rw.RewardConfig(reg_scale=2.5)
    with pytest.raises(ConfigError):
        rw.RewardConfig(w_curi=-1)
