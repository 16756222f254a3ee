"""Shared machinery for the batched contact-sequence environments.

An environment object simulates ``num_envs`` independent instances in
lockstep; every per-instance quantity is an array with a leading axis of
that size. Instances never read each other's state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import stages as sc
from .randomization import OFF, RandomizationConfig, nominal, push_velocity

HISTORY = 3


@dataclass
class StepResult:
    obs: np.ndarray
    signals: dict
    done: np.ndarray
    info: dict


class ContactSequenceEnv:
    effectors: tuple[str, ...] = ()
    n_joints: int = 0
    action_dim: int = 0
    curiosity_dim: int = 0
    push_dims: int = 2

    def __init__(
        self,
        plan: sc.StagePlan,
        num_envs: int = 1,
        seed: int = 0,
        randomization: RandomizationConfig = OFF,
        control_dt: float = 0.02,
        substeps: int = 4,
        episode_length_s: float = 8.0,
        end_on_success: bool = True,
        randomize_start_step: bool = False,
    ):
        if set(plan.effectors) != set(self.effectors):
            raise sc.ConfigError(f"plan effectors {plan.effectors} != environment effectors {self.effectors}")
        self.plan = plan
        self.num_envs = num_envs
        self.randomization = randomization
        self.control_dt = control_dt
        self.substeps = substeps
        self.dt = control_dt / substeps
        self.max_episode_steps = int(round(episode_length_s / control_dt))
        self.end_on_success = end_on_success
        self.randomize_start_step = randomize_start_step
        self.n_con = plan.n_con
        self.req_codes, self.req_lo, self.req_hi = sc.requirement_arrays(plan, self.effectors)
        self.req_frames = self._region_frames(plan)
        self._check_plan()
        self._seed = seed
        self.rng = np.random.default_rng(seed)
        self.params = nominal(num_envs)
        self._alloc()

    # -- hooks -------------------------------------------------------------

    def _check_plan(self):
        pass

    def _alloc(self):
        N = self.num_envs
        self.n_stage = np.zeros(N, dtype=np.int64)
        self.dwell = np.zeros(N, dtype=np.int64)
        self.f_con = np.zeros(N, dtype=bool)
        self.f_task = np.zeros(N, dtype=bool)
        self.n_corr = np.zeros(N, dtype=np.int64)
        self.n_wrong = np.zeros(N, dtype=np.int64)
        self.plan_complete = np.zeros(N, dtype=bool)
        self.episode_step = np.zeros(N, dtype=np.int64)
        self.last_action = np.zeros((N, self.action_dim))
        self.prev_action = np.zeros((N, self.action_dim))
        self.q_hist = np.zeros((N, HISTORY, self.n_joints))
        self.qd_hist = np.zeros((N, HISTORY, self.n_joints))
        self.a_hist = np.zeros((N, HISTORY, self.action_dim))
        self.push_timer = np.zeros(N, dtype=np.int64)
        self._q_prev = np.zeros((N, self.n_joints))
        self._qd_prev = np.zeros((N, self.n_joints))

    def _reset_physics(self, ids: np.ndarray):
        raise NotImplementedError

    def _integrate(self, applied: np.ndarray, force_noise: np.ndarray):
        raise NotImplementedError

    def _joint_state(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def _contacts(self) -> tuple[np.ndarray, np.ndarray]:
        """World-frame contact flags (N, E) and contact points (N, E, 2)."""
        raise NotImplementedError

    def _local_contact_points(self, points: np.ndarray, stage_idx: np.ndarray) -> np.ndarray:
        return points

    def _task(self, stage_idx: np.ndarray) -> tuple[np.ndarray, dict]:
        raise NotImplementedError

    def _extra_obs(self) -> np.ndarray:
        raise NotImplementedError

    def _goal_obs(self) -> np.ndarray:
        raise NotImplementedError

    def _fallen(self) -> np.ndarray:
        raise NotImplementedError

    def _state_finite(self) -> np.ndarray:
        raise NotImplementedError

    def _reg_signals(self, applied, contact) -> dict:
        return {}

    def curiosity_obs(self) -> np.ndarray:
        raise NotImplementedError

    def mirror_curiosity_obs(self, o: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _base_velocity(self) -> np.ndarray:
        raise NotImplementedError

    def _set_base_velocity(self, v: np.ndarray, ids: np.ndarray):
        raise NotImplementedError

    # -- lifecycle ---------------------------------------------------------

    def _region_frames(self, plan):
        frames = np.zeros((len(plan), len(self.effectors)), dtype=object)
        for i, st in enumerate(plan.stages):
            for j, name in enumerate(self.effectors):
                r = st.contact.requirements[name]
                frames[i, j] = r.region.frame if isinstance(r, sc.InContactWithin) else "world"
        return frames

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self._seed = seed
            self.rng = np.random.default_rng(seed)
        ids = np.arange(self.num_envs)
        self._reset_envs(ids)
        if self.randomize_start_step:
            self.episode_step[:] = self.rng.integers(0, self.max_episode_steps, size=self.num_envs)
        return self.observe()

    def _reset_envs(self, ids: np.ndarray):
        if ids.size == 0:
            return
        if self.randomization.enabled:
            sample = self.randomization.sample(self.rng, ids.size, self.control_dt)
            for k, v in sample.items():
                self.params[k][ids] = v
        else:
            for k, v in nominal(ids.size).items():
                self.params[k][ids] = v
        self._reset_physics(ids)
        for arr in (self.n_stage, self.dwell, self.n_corr, self.n_wrong, self.episode_step, self.push_timer):
            arr[ids] = 0
        for arr in (self.f_con, self.f_task, self.plan_complete):
            arr[ids] = False
        self.last_action[ids] = 0.0
        self.prev_action[ids] = 0.0
        q, qd = self._joint_state()
        self.q_hist[ids] = q[ids, None, :]
        self.qd_hist[ids] = qd[ids, None, :]
        self.a_hist[ids] = 0.0
        self._q_prev[ids] = q[ids]
        self._qd_prev[ids] = qd[ids]

    def observe(self) -> np.ndarray:
        N = self.num_envs
        return np.concatenate(
            [
                self.q_hist.reshape(N, -1),
                self.qd_hist.reshape(N, -1),
                self.a_hist.reshape(N, -1),
                self._extra_obs(),
                self._goal_obs(),
            ],
            axis=1,
        )

    @property
    def obs_dim(self) -> int:
        return self.observe().shape[1]

    def status(self, i: int) -> sc.StageStatus:
        return sc.StageStatus(
            n_stage=int(self.n_stage[i]),
            f_con=bool(self.f_con[i]),
            f_task=bool(self.f_task[i]),
            n_corr=int(self.n_corr[i]),
            n_wrong=int(self.n_wrong[i]),
            dwell_counter=int(self.dwell[i]),
            plan_complete=bool(self.plan_complete[i]),
        )

    @property
    def progress(self) -> np.ndarray:
        return np.minimum(self.n_stage, len(self.plan)) / len(self.plan)

    def clip_action(self, a: np.ndarray) -> np.ndarray:
        return np.clip(a, -self.action_limit, self.action_limit)

    action_limit = 1.0

    def step(self, actions) -> StepResult:
        actions = np.asarray(actions, dtype=float).reshape(self.num_envs, self.action_dim)
        fault = ~np.all(np.isfinite(actions), axis=1)
        actions = np.where(fault[:, None], 0.0, actions)
        issued = self.clip_action(actions)
        delayed = self.params["delay_steps"] > 0
        applied = np.where(delayed[:, None], self.last_action, issued)
        self.prev_action = self.last_action
        self.last_action = issued

        if self.randomization.enabled and self.randomization.push_dv > 0:
            push_steps = max(1, int(round(self.randomization.push_interval_s / self.control_dt)))
            self.push_timer += 1
            due = np.flatnonzero(self.push_timer >= push_steps)
            if due.size:
                self.push_timer[due] = 0
                kick = push_velocity(self.rng, due.size, self.randomization.push_dv, self.push_dims)
                v = self._base_velocity()[due].copy()
                v[:, : kick.shape[1]] += kick
                self._set_base_velocity(v, due)

        if self.randomization.enabled and self.randomization.force_noise > 0:
            noise = self.rng.uniform(-1.0, 1.0, size=applied.shape) * self.randomization.force_noise
        else:
            noise = np.zeros_like(applied)
        self._integrate(applied, noise)

        q, qd = self._joint_state()
        dof_acc = (qd - self._qd_prev) / self.control_dt
        self._q_prev, self._qd_prev = q.copy(), qd.copy()
        self.q_hist = np.concatenate([self.q_hist[:, 1:], q[:, None]], axis=1)
        self.qd_hist = np.concatenate([self.qd_hist[:, 1:], qd[:, None]], axis=1)
        self.a_hist = np.concatenate([self.a_hist[:, 1:], issued[:, None]], axis=1)

        in_contact, points = self._contacts()
        stage_idx = np.minimum(self.n_stage, len(self.plan) - 1)
        local = self._local_contact_points(points, stage_idx)
        f_con, n_corr, n_wrong = sc.evaluate_contacts_batch(
            in_contact, local, self.req_codes[stage_idx], self.req_lo[stage_idx], self.req_hi[stage_idx]
        )
        f_task, task_signals = self._task(stage_idx)
        active = ~self.plan_complete
        n_stage, dwell, complete = sc.advance_batch(
            self.n_stage, self.dwell, f_con, f_task, self.plan.dwell_steps, len(self.plan)
        )
        self.n_stage = np.where(active, n_stage, self.n_stage)
        self.dwell = np.where(active, dwell, self.dwell)
        self.plan_complete = np.where(active, complete, self.plan_complete)
        self.f_con, self.f_task, self.n_corr, self.n_wrong = f_con, f_task, n_corr, n_wrong
        self.episode_step += 1

        bad = fault | ~self._state_finite()
        fallen = self._fallen() | bad
        success = self.plan_complete & self.end_on_success
        time_out = (self.episode_step >= self.max_episode_steps) & ~fallen & ~success
        done = fallen | success | time_out

        signals = {
            "n_stage": self.n_stage.copy(),
            "f_con": f_con,
            "f_task": f_task,
            "n_corr": n_corr,
            "n_wrong": n_wrong,
            "dwell": self.dwell.copy(),
            "plan_complete": self.plan_complete.copy(),
            "termination": fallen.astype(float),
            "dof_vel": qd,
            "dof_acc": dof_acc,
            "action_rate": issued - self.prev_action,
            "foot_contact": in_contact,
            "progress": self.progress,
            "curiosity_obs": self.curiosity_obs(),
            **task_signals,
            **self._reg_signals(applied, in_contact),
        }
        info = {
            "time_out": time_out | (success & ~fallen),
            "success": success,
            "fault": bad,
            "final_progress": self.progress.copy(),
        }
        ids = np.flatnonzero(done)
        if ids.size:
            info["final_obs"] = self.observe()[ids]
            info["final_ids"] = ids
            self._reset_envs(ids)
        return StepResult(self.observe(), signals, done, info)
