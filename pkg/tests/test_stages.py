import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contactseq import stages as sc

STONE = sc.Region("world", (0.4, -0.1), (0.8, 0.05))


def two_foot_goal(left, right):
    return sc.ContactGoal({"left": left, "right": right})


# -- Region ------------------------------------------------------------------


def test_region_rejects_inverted_corners():
    with pytest.raises(sc.ConfigError):
        sc.Region("world", (1.0, 0.0), (0.0, 1.0))


def test_region_rejects_unknown_frame():
    with pytest.raises(sc.ConfigError):
        sc.Region("camera", (0, 0), (1, 1))


def test_body_frame_region_follows_base_pose():
    r = sc.Region("body", (0.9, -0.1), (1.1, 0.1))
    # base at (2, 0) facing +y: body-frame (1, 0) is world (2, 1)
    pose = (2.0, 0.0, math.pi / 2)
    assert r.contains((2.0, 1.0), base_pose=pose)
    assert not r.contains((3.0, 0.0), base_pose=pose)


def test_body_region_without_pose_is_config_error():
    r = sc.Region("body", (0, 0), (1, 1))
    with pytest.raises(sc.ConfigError):
        r.contains((0.5, 0.5))


@given(
    st.floats(-5, 5), st.floats(-5, 5), st.floats(-math.pi, math.pi),
    st.floats(-5, 5), st.floats(-5, 5),
)
def test_frame_round_trip(x, y, th, px, py):
    pose = (x, y, th)
    local = sc.world_to_frame((px, py), pose)
    back = sc.frame_to_world(local, pose)
    np.testing.assert_allclose(back, (px, py), atol=1e-9)


# -- evaluate_contacts -------------------------------------------------------------


def test_wrong_foot_scene_counts_one_correct_one_wrong():
    # right foot on the stone as required, left foot on the ground though it should be airborne
    goal = two_foot_goal(sc.Airborne(), sc.InContactWithin(STONE))
    contacts = {"left": (True, (0.1, -0.01)), "right": (True, (0.6, -0.01))}
    assert sc.evaluate_contacts(contacts, goal) == (False, 1, 1)


def test_all_unconstrained_is_trivially_fulfilled():
    goal = two_foot_goal(sc.Unconstrained(), sc.Unconstrained())
    contacts = {"left": (True, (9.0, 0.0)), "right": (False, (0.0, 0.0))}
    assert sc.evaluate_contacts(contacts, goal) == (True, 0, 0)


def test_unknown_effector_is_config_error():
    goal = two_foot_goal(sc.Airborne(), sc.Airborne())
    with pytest.raises(sc.ConfigError):
        sc.evaluate_contacts({"left": (False, (0, 0)), "right": (False, (0, 0)), "tail": (True, (0, 0))}, goal)


def test_missing_effector_is_config_error():
    goal = two_foot_goal(sc.Airborne(), sc.Airborne())
    with pytest.raises(sc.ConfigError):
        sc.evaluate_contacts({"left": (False, (0, 0))}, goal)


def test_not_yet_touching_counts_as_neither():
    goal = two_foot_goal(sc.InContactWithin(STONE), sc.Unconstrained())
    f_con, n_corr, n_wrong = sc.evaluate_contacts({"left": (False, (0.0, 0.3)), "right": (True, (0, 0))}, goal)
    assert (f_con, n_corr, n_wrong) == (False, 0, 0)


def _oracle_counts(reqs, contacts):
    """Per-effector rules written out case by case."""
    corr = wrong = 0
    ok = True
    for kind, (touch, pos) in zip(reqs, contacts):
        inside = STONE.lo[0] <= pos[0] <= STONE.hi[0] and STONE.lo[1] <= pos[1] <= STONE.hi[1]
        if kind == "free":
            continue
        if kind == "air":
            if touch:
                wrong += 1
                ok = False
            else:
                corr += 1
        else:
            if touch and inside:
                corr += 1
            elif touch:
                wrong += 1
                ok = False
            else:
                ok = False
    return ok, corr, wrong


REQ = {"free": sc.Unconstrained(), "air": sc.Airborne(), "in": sc.InContactWithin(STONE)}


@given(
    st.lists(st.sampled_from(sorted(REQ)), min_size=2, max_size=2),
    st.lists(st.tuples(st.booleans(), st.tuples(st.floats(0, 1.2), st.floats(-0.2, 0.2))), min_size=2, max_size=2),
)
def test_contact_counts_match_exhaustive_classifier(kinds, contacts):
    goal = two_foot_goal(REQ[kinds[0]], REQ[kinds[1]])
    obs = {"left": contacts[0], "right": contacts[1]}
    assert sc.evaluate_contacts(obs, goal) == _oracle_counts(kinds, contacts)


@given(
    st.lists(st.sampled_from(sorted(REQ)), min_size=2, max_size=2),
    st.lists(st.tuples(st.booleans(), st.tuples(st.floats(0, 1.2), st.floats(-0.2, 0.2))), min_size=2, max_size=2),
)
def test_fulfilled_goal_has_no_wrong_and_all_correct(kinds, contacts):
    goal = two_foot_goal(REQ[kinds[0]], REQ[kinds[1]])
    f_con, n_corr, n_wrong = sc.evaluate_contacts({"left": contacts[0], "right": contacts[1]}, goal)
    if f_con:
        assert n_wrong == 0
        assert n_corr == len(goal.constrained())
    assert n_corr + n_wrong <= 2


@settings(max_examples=50)
@given(st.integers(0, 2**31 - 1))
def test_batch_contacts_match_scalar(seed):
    rng = np.random.default_rng(seed)
    N, E = 16, 2
    codes = rng.integers(0, 3, size=(N, E))
    touch = rng.random((N, E)) < 0.5
    pos = rng.uniform([0, -0.2], [1.2, 0.2], size=(N, E, 2))
    lo = np.broadcast_to(STONE.lo, (N, E, 2))
    hi = np.broadcast_to(STONE.hi, (N, E, 2))
    f, c, w = sc.evaluate_contacts_batch(touch, pos, codes, lo, hi)
    by_code = {sc.UNCONSTRAINED: sc.Unconstrained(), sc.AIRBORNE: sc.Airborne(), sc.IN_CONTACT: sc.InContactWithin(STONE)}
    for i in range(N):
        goal = two_foot_goal(by_code[codes[i, 0]], by_code[codes[i, 1]])
        obs = {"left": (touch[i, 0], pos[i, 0]), "right": (touch[i, 1], pos[i, 1])}
        assert (bool(f[i]), int(c[i]), int(w[i])) == sc.evaluate_contacts(obs, goal)


# -- evaluate_task -------------------------------------------------------------------


def test_always_goal_is_true():
    assert sc.evaluate_task({}, sc.TaskGoal("always"))


def test_transport_uses_strict_threshold():
    g = sc.TaskGoal("transport", {"threshold": 0.1})
    assert sc.evaluate_task({"object_dest_distance": 0.05}, g)
    assert not sc.evaluate_task({"object_dest_distance": 0.1}, g)


def test_posture_zero_error_is_fulfilled():
    g = sc.TaskGoal("posture", {"target": 0.6, "tolerance": 0.2})
    assert sc.evaluate_task({"pose": 0.6}, g)
    assert not sc.evaluate_task({"pose": 0.9}, g)


def test_task_snapshot_missing_field_is_config_error():
    with pytest.raises(sc.ConfigError):
        sc.evaluate_task({}, sc.TaskGoal("transport", {"threshold": 0.1}))
    with pytest.raises(sc.ConfigError):
        sc.evaluate_task({}, sc.TaskGoal("posture", {"target": 0.0}))


# -- advance -------------------------------------------------------------------------


def _plan(n_stages=3, dwell=1):
    g = two_foot_goal(sc.Unconstrained(), sc.Unconstrained())
    return sc.StagePlan(tuple(sc.Stage(g, sc.TaskGoal("always")) for _ in range(n_stages)), dwell)


def _status():
    return sc.StageStatus(0, False, False, 0, 0, 0, False)


def test_minimal_dwell_advances_next_step():
    s = sc.advance(_status(), True, True, _plan(dwell=1))
    assert s.n_stage == 1 and s.dwell_counter == 0


def test_contact_without_task_never_advances():
    plan, s = _plan(dwell=1), _status()
    for _ in range(100):
        s = sc.advance(s, True, False, plan)
    assert s.n_stage == 0


def _dwell_oracle(pattern, dwell):
    """Step-by-step counter simulation; returns the step index of each advancement."""
    run, events = 0, []
    for t, ok in enumerate(pattern):
        run = run + 1 if ok else 0
        if run == dwell:
            events.append(t)
            run = 0
    return events


def test_dwell_requires_consecutive_steps():
    pattern = [True, True, False, True, True, True]
    plan, s, events = _plan(n_stages=5, dwell=3), _status(), []
    for t, ok in enumerate(pattern):
        before = s.n_stage
        s = sc.advance(s, ok, True, plan)
        if s.n_stage > before:
            events.append(t)
    assert events == [5] == _dwell_oracle(pattern, 3)


@given(st.lists(st.booleans(), max_size=60), st.integers(1, 5))
def test_advance_matches_counter_oracle(pattern, dwell):
    plan, s = _plan(n_stages=100, dwell=dwell), _status()
    events = []
    for t, ok in enumerate(pattern):
        before = s.n_stage
        s = sc.advance(s, ok, ok, plan)
        assert 0 <= s.n_stage - before <= 1
        assert s.dwell_counter <= dwell
        if s.n_stage > before:
            events.append(t)
    assert events == _dwell_oracle(pattern, dwell)


@given(st.lists(st.tuples(st.booleans(), st.booleans()), max_size=40), st.integers(1, 4))
def test_batch_advance_matches_scalar(steps, dwell):
    plan = _plan(n_stages=3, dwell=dwell)
    s = _status()
    n, d = np.zeros(1, np.int64), np.zeros(1, np.int64)
    for fc, ft in steps:
        if s.plan_complete:
            break
        s = sc.advance(s, fc, ft, plan)
        n, d, done = sc.advance_batch(n, d, np.array([fc]), np.array([ft]), dwell, len(plan))
        assert (int(n[0]), int(d[0]), bool(done[0])) == (s.n_stage, s.dwell_counter, s.plan_complete)


def test_plan_complete_after_last_stage():
    plan, s = _plan(n_stages=2, dwell=1), _status()
    s = sc.advance(sc.advance(s, True, True, plan), True, True, plan)
    assert s.plan_complete and s.n_stage == 2
    with pytest.raises(sc.ConfigError):
        sc.advance(s, True, True, plan)


# -- plans ---------------------------------------------------------------------------


def test_plan_pads_with_final_stage():
    plan = sc.StagePlan(
        (
            sc.Stage(two_foot_goal(sc.Airborne(), sc.Airborne()), sc.TaskGoal("always")),
            sc.Stage(two_foot_goal(sc.InContactWithin(STONE), sc.Airborne()), sc.TaskGoal("always")),
        )
    )
    assert plan.stage(7) == plan.stage(1)


def test_n_con_is_max_constrained_count():
    plan = sc.StagePlan(
        (
            sc.Stage(two_foot_goal(sc.Unconstrained(), sc.Airborne()), sc.TaskGoal("always")),
            sc.Stage(two_foot_goal(sc.InContactWithin(STONE), sc.Airborne()), sc.TaskGoal("always")),
        )
    )
    assert plan.n_con == 2


def test_plan_rejects_inconsistent_effectors():
    a = sc.Stage(two_foot_goal(sc.Airborne(), sc.Airborne()), sc.TaskGoal("always"))
    b = sc.Stage(sc.ContactGoal({"left": sc.Airborne()}), sc.TaskGoal("always"))
    with pytest.raises(sc.ConfigError):
        sc.StagePlan((a, b))


def test_plan_rejects_zero_dwell():
    with pytest.raises(sc.ConfigError):
        _plan(dwell=0)


def test_plan_yaml_round_trip(tmp_path):
    import yaml

    plan = sc.StagePlan(
        (
            sc.Stage(two_foot_goal(sc.Airborne(), sc.InContactWithin(STONE)), sc.TaskGoal("posture", {"target": 0.5})),
            sc.Stage(two_foot_goal(sc.Unconstrained(), sc.Airborne()), sc.TaskGoal("always")),
        ),
        dwell_steps=4,
    )
    path = tmp_path / "plan.yaml"
    path.write_text(yaml.safe_dump(sc.plan_to_dict(plan)))
    assert sc.load_plan(path) == plan


def test_missing_plan_file_is_config_error(tmp_path):
    with pytest.raises(sc.ConfigError):
        sc.load_plan(tmp_path / "nope.yaml")
