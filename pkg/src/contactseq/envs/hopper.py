"""Sagittal-plane two-legged hopper crossing marked stepping stones.

The body is a rigid planar body (x, z, pitch). Each leg is a point-mass foot
pulled toward a body-frame target ``(hip angle, leg length)`` by a PD spring
whose reaction acts on the body at the hip. A single arm joint provides the
posture degree of freedom checked by the task goal. Ground contact uses
penalty springs with regularized Coulomb friction, integrated with
semi-implicit Euler.

Both hips sit at the same body point, so swapping the left and right legs is
an exact symmetry of the dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import rewards
from .. import stages as sc
from .base import ContactSequenceEnv

G = 9.81
FEET = ("left_foot", "right_foot")
PATTERNS = {"left": (True, False), "right": (False, True), "double": (True, True)}


@dataclass(frozen=True)
class HopperParams:
    body_mass: float = 8.0
    foot_mass: float = 0.4
    body_inertia: float = 0.4
    arm_inertia: float = 0.02
    arm_length: float = 0.3
    kp_foot: float = 1500.0
    kd_foot: float = 40.0
    kp_arm: float = 5.0
    kd_arm: float = 0.3
    k_ground: float = 8000.0
    c_ground: float = 60.0
    k_slide: float = 80.0
    k_body_ground: float = 20000.0
    c_body_ground: float = 500.0
    pitch_stiffness: float = 20.0
    pitch_damping: float = 4.0
    leg_rest: float = 0.5
    leg_range: tuple[float, float] = (0.3, 0.7)
    hip_range: tuple[float, float] = (-0.8, 0.8)
    arm_range: tuple[float, float] = (-1.5, 1.5)
    hip_scale: float = 0.4
    leg_scale: float = 0.1
    arm_scale: float = 0.8
    body_radius: float = 0.12
    fall_height: float = 0.2
    fall_pitch: float = 1.0
    # leaving the course (behind the start or past the last stone) ends the episode
    course_margin: float = 0.5
    course_back: float = 1.0
    # with pits, ground exists only on the start platform and the stones
    pits: bool = False
    platform_gap: float = 0.2
    pit_depth: float = 0.1
    # stones raised above the ground as solid blocks; 0 keeps them flush
    stone_height: float = 0.0
    foot_force_limit: float = 150.0
    arm_torque_limit: float = 5.0
    start_height: float = 0.52
    start_noise: float = 0.02


def hopper_plan(
    stones, dwell_steps: int = 5, tolerance: float = 0.2, depth: float = 0.1, height: float = 0.0
) -> sc.StagePlan:
    """Plan with one stage per stone.

    ``stones`` is a sequence of ``(center_x, width, pattern, arm_target)``
    with pattern one of ``left | right | double``. ``height`` is the stone
    top, so a region spans ``[height - depth, height + 0.05]`` vertically.
    """
    stages = []
    for center, width, pattern, arm_target in stones:
        if pattern not in PATTERNS:
            raise sc.ConfigError(f"unknown stone pattern {pattern!r}")
        region = sc.Region("world", (center - width / 2, height - depth), (center + width / 2, height + 0.05))
        reqs = {
            foot: sc.InContactWithin(region) if on else sc.Airborne()
            for foot, on in zip(FEET, PATTERNS[pattern])
        }
        task = sc.TaskGoal("posture", {"target": float(arm_target), "tolerance": tolerance})
        stages.append(sc.Stage(sc.ContactGoal(reqs), task))
    return sc.StagePlan(tuple(stages), dwell_steps)


DEFAULT_STONES = (
    (0.75, 0.3, "right", 0.6),
    (1.35, 0.3, "left", -0.3),
    (1.95, 0.3, "double", 0.6),
    (2.55, 0.3, "right", -0.3),
)


def mirror_plan(plan: sc.StagePlan) -> sc.StagePlan:
    stages = []
    for st in plan.stages:
        r = st.contact.requirements
        swapped = {FEET[0]: r[FEET[1]], FEET[1]: r[FEET[0]]}
        stages.append(sc.Stage(sc.ContactGoal(swapped), st.task))
    return sc.StagePlan(tuple(stages), plan.dwell_steps)


class HopperEnv(ContactSequenceEnv):
    effectors = FEET
    n_joints = 5  # hip/leg left, hip/leg right, arm
    action_dim = 5
    curiosity_dim = 12
    push_dims = 1
    action_limit = 1.5

    def __init__(
        self,
        plan: sc.StagePlan | None = None,
        params: HopperParams = HopperParams(),
        stones=None,
        dwell_steps: int = 5,
        tolerance: float = 0.2,
        **kw,
    ):
        if isinstance(params, dict):
            params = HopperParams(**params)
        self.p = params
        if plan is None:
            stones = DEFAULT_STONES if stones is None else stones
            plan = hopper_plan(stones, dwell_steps, tolerance, height=self.p.stone_height)
        elif stones is not None:
            raise sc.ConfigError("give either a plan file or inline stones, not both")
        super().__init__(plan, **kw)
        spans = self.req_hi[..., 0][self.req_codes == sc.IN_CONTACT]
        self.course = (-self.p.course_back, float(spans.max()) + self.p.course_margin)
        self.ground = self._ground_intervals()
        self.blocks = self._stone_spans() if self.p.stone_height > 0 else np.zeros((0, 2))
        S = len(self.plan)
        self.arm_target = np.zeros(S)
        self.arm_tol = np.full(S, np.inf)
        for i, st in enumerate(self.plan.stages):
            if st.task.kind == "posture":
                self.arm_target[i] = float(st.task.params.get("target", 0.0))
                self.arm_tol[i] = float(st.task.params.get("tolerance", 0.2))
        N = self.num_envs
        self.base_pos = np.zeros((N, 2))
        self.base_vel = np.zeros((N, 2))
        self.pitch = np.zeros(N)
        self.pitch_rate = np.zeros(N)
        self.foot_pos = np.zeros((N, 2, 2))
        self.foot_vel = np.zeros((N, 2, 2))
        self.arm = np.zeros(N)
        self.arm_vel = np.zeros(N)
        self.air_time = np.zeros((N, 2))
        self.was_contact = np.zeros((N, 2), dtype=bool)
        self.ground_enabled = True
        self.actuated = True
        self.reset()

    def _check_plan(self):
        regions = {}
        for i, st in enumerate(self.plan.stages):
            for r in st.contact.requirements.values():
                if isinstance(r, sc.InContactWithin):
                    if r.region.frame != "world":
                        raise sc.ConfigError("hopper stones must be world-frame regions")
                    regions[(r.region.lo, r.region.hi)] = r.region
        spans = sorted((reg.lo[0], reg.hi[0]) for reg in regions.values())
        for (a0, a1), (b0, b1) in zip(spans, spans[1:]):
            if b0 < a1:
                raise sc.ConfigError(f"stones [{a0}, {a1}] and [{b0}, {b1}] overlap")

    def _stone_spans(self) -> np.ndarray:
        """``(k, 2)`` sorted x-intervals of the distinct contact regions."""
        mask = self.req_codes == sc.IN_CONTACT
        return np.unique(np.stack([self.req_lo[..., 0][mask], self.req_hi[..., 0][mask]], axis=1), axis=0)

    def _ground_intervals(self) -> np.ndarray:
        """``(k, 2)`` x-intervals that support the feet."""
        if not self.p.pits:
            return np.array([[-np.inf, np.inf]])
        stones = self._stone_spans()
        platform = [-np.inf, stones[0, 0] - self.p.platform_gap]
        return np.vstack([platform, stones])

    def on_ground(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)[..., None]
        return np.any((x >= self.ground[:, 0]) & (x <= self.ground[:, 1]), axis=-1)

    # -- state -------------------------------------------------------------

    STATE_KEYS = ("base_pos", "base_vel", "pitch", "pitch_rate", "foot_pos", "foot_vel", "arm", "arm_vel")

    def get_state(self) -> dict:
        return {k: getattr(self, k).copy() for k in self.STATE_KEYS}

    def set_state(self, state: dict):
        for k in self.STATE_KEYS:
            getattr(self, k)[...] = state[k]
        q, qd = self._joint_state()
        self.q_hist[:] = q[:, None]
        self.qd_hist[:] = qd[:, None]
        self._q_prev, self._qd_prev = q.copy(), qd.copy()

    @staticmethod
    def mirror_state(state: dict) -> dict:
        out = {k: v.copy() for k, v in state.items()}
        out["foot_pos"] = state["foot_pos"][:, ::-1].copy()
        out["foot_vel"] = state["foot_vel"][:, ::-1].copy()
        return out

    def _reset_physics(self, ids):
        p, n = self.p, ids.size
        x0 = self.rng.uniform(-p.start_noise, p.start_noise, size=n)
        self.base_pos[ids] = np.stack([x0, np.full(n, p.start_height)], axis=1)
        self.base_vel[ids] = 0.0
        self.pitch[ids] = 0.0
        self.pitch_rate[ids] = 0.0
        fx = self.rng.uniform(-p.start_noise, p.start_noise, size=(n, 2))
        self.foot_pos[ids, :, 0] = x0[:, None] + fx
        self.foot_pos[ids, :, 1] = 0.0
        self.foot_vel[ids] = 0.0
        self.arm[ids] = self.rng.uniform(-0.1, 0.1, size=n)
        self.arm_vel[ids] = 0.0
        self.air_time[ids] = 0.0
        self.was_contact[ids] = True

    def _base_velocity(self):
        return self.base_vel

    def _set_base_velocity(self, v, ids):
        self.base_vel[ids] = v

    # -- dynamics ----------------------------------------------------------

    def targets(self, a: np.ndarray):
        p = self.p
        hip = np.clip(a[:, [0, 2]] * p.hip_scale, *p.hip_range)
        leg = np.clip(p.leg_rest + a[:, [1, 3]] * p.leg_scale, *p.leg_range)
        arm = np.clip(a[:, 4] * p.arm_scale, *p.arm_range)
        return hip, leg, arm

    def _integrate(self, applied, noise):
        p, dt = self.p, self.dt
        hip_t, leg_t, arm_t = self.targets(applied)
        # body-frame foot offsets (N, 2 feet, 2)
        off = np.stack([leg_t * np.sin(hip_t), -leg_t * np.cos(hip_t)], axis=-1)
        m_body = p.body_mass * self.params["mass_scale"]
        m_foot = p.foot_mass * self.params["mass_scale"]
        inertia = p.body_inertia * self.params["mass_scale"]
        kp = self.params["kp_scale"] * (p.kp_foot if self.actuated else 0.0)
        kd = self.params["kd_scale"] * (p.kd_foot if self.actuated else 0.0)
        kpa = self.params["kp_scale"] * (p.kp_arm if self.actuated else 0.0)
        kda = self.params["kd_scale"] * (p.kd_arm if self.actuated else 0.0)
        mu = self.params["friction"]
        com = self.params["com_offset"]
        f_noise = noise[:, :4].reshape(-1, 2, 2) * p.foot_force_limit
        a_noise = noise[:, 4] * p.arm_torque_limit
        for _ in range(self.substeps):
            c, s = np.cos(self.pitch), np.sin(self.pitch)
            hip_off = np.stack([com * c, com * s], axis=-1)  # (N, 2)
            r = hip_off[:, None, :] + np.stack(
                [c[:, None] * off[..., 0] - s[:, None] * off[..., 1], s[:, None] * off[..., 0] + c[:, None] * off[..., 1]],
                axis=-1,
            )
            w = self.pitch_rate[:, None, None]
            tgt = self.base_pos[:, None, :] + r
            tgt_vel = self.base_vel[:, None, :] + w * np.stack([-r[..., 1], r[..., 0]], axis=-1)
            f_pd = kp[:, None, None] * (tgt - self.foot_pos) + kd[:, None, None] * (tgt_vel - self.foot_vel) + f_noise

            f_ground = np.zeros_like(self.foot_pos)
            if self.ground_enabled:
                pen = -self.foot_pos[..., 1]
                touching = (pen > 0) & self._supported(self.foot_pos)
                fn = np.where(touching, np.maximum(p.k_ground * pen - p.c_ground * self.foot_vel[..., 1], 0.0), 0.0)
                ft = np.clip(-p.k_slide * self.foot_vel[..., 0], -mu[:, None] * fn, mu[:, None] * fn)
                f_ground = np.stack([ft, fn], axis=-1)
                if self.blocks.size:
                    f_ground += self._block_force(
                        self.foot_pos, self.foot_vel, 0.0, p.k_ground, p.c_ground, p.k_slide, mu[:, None, None]
                    )

            foot_acc = (f_pd + f_ground) / m_foot[:, None, None]
            foot_acc[..., 1] -= G

            # reaction on the body acts at the hip
            hip_world = hip_off[:, None, :]
            f_body = -(f_pd[:, 0] + f_pd[:, 1])
            torque = -(
                (hip_world[:, 0, 0] * f_pd[:, 0, 1] - hip_world[:, 0, 1] * f_pd[:, 0, 0])
                + (hip_world[:, 0, 0] * f_pd[:, 1, 1] - hip_world[:, 0, 1] * f_pd[:, 1, 0])
            )
            if self.ground_enabled:
                pen_b = p.body_radius - self.base_pos[:, 1]
                hit = (pen_b > 0) & self._supported(self.base_pos)
                f_body[:, 1] += np.where(
                    hit, np.maximum(p.k_body_ground * pen_b - p.c_body_ground * self.base_vel[:, 1], 0.0), 0.0
                )
                f_body[:, 0] += np.where(hit, -p.c_body_ground * self.base_vel[:, 0], 0.0)
                if self.blocks.size:
                    f_body += self._block_force(
                        self.base_pos, self.base_vel, p.body_radius, p.k_body_ground, p.c_body_ground
                    )
            tau_arm = kpa * (arm_t - self.arm) - kda * self.arm_vel + a_noise
            torque = torque - tau_arm - p.pitch_stiffness * self.pitch - p.pitch_damping * self.pitch_rate

            body_acc = f_body / m_body[:, None]
            body_acc[:, 1] -= G
            self.foot_vel = self.foot_vel + dt * foot_acc
            self.foot_pos = self.foot_pos + dt * self.foot_vel
            self.base_vel = self.base_vel + dt * body_acc
            self.base_pos = self.base_pos + dt * self.base_vel
            self.pitch_rate = self.pitch_rate + dt * torque / inertia
            self.pitch = self.pitch + dt * self.pitch_rate
            self.arm_vel = self.arm_vel + dt * tau_arm / p.arm_inertia
            self.arm = self.arm + dt * self.arm_vel

    def _block_penetration(self, pos, radius):
        """Penetration of points into the raised stones.

        Returns ``(inside, depth, nx, nz)`` with a trailing stone axis. Each
        point is pushed out through the nearest face: the top or a side wall.
        """
        lo, hi, h = self.blocks[:, 0] - radius, self.blocks[:, 1] + radius, self.p.stone_height + radius
        x, z = pos[..., 0][..., None], pos[..., 1][..., None]
        inside = (x > lo) & (x < hi) & (z < h)
        d_top, d_left, d_right = h - z, x - lo, hi - x
        top = (d_top <= d_left) & (d_top <= d_right)
        left = ~top & (d_left <= d_right)
        depth = np.where(top, d_top, np.where(left, d_left, d_right))
        nx = np.where(top, 0.0, np.where(left, -1.0, 1.0))
        return inside, depth, nx, top.astype(float)

    def _block_force(self, pos, vel, radius, k, c, k_slide=None, mu=None):
        """Penalty force from the raised stones. Tangential force is Coulomb
        friction when ``mu`` is given, plain damping otherwise."""
        inside, depth, nx, nz = self._block_penetration(pos, radius)
        vx, vz = vel[..., 0][..., None], vel[..., 1][..., None]
        fn = np.where(inside, np.maximum(k * depth - c * (vx * nx + vz * nz), 0.0), 0.0)
        tx, tz = nz, -nx
        vt = vx * tx + vz * tz
        ft = -c * vt if mu is None else np.clip(-k_slide * vt, -mu * fn, mu * fn)
        ft = np.where(inside, ft, 0.0)
        fx = np.sum(fn * nx + ft * tx, axis=-1)
        fz = np.sum(fn * nz + ft * tz, axis=-1)
        return np.stack([fx, fz], axis=-1)

    def _supported(self, pos):
        """Points above solid ground; over a pit, anything deeper than the
        pit depth below the surface has fallen past the edge."""
        if not self.p.pits:
            return np.ones(pos.shape[:-1], dtype=bool)
        return self.on_ground(pos[..., 0]) & (pos[..., 1] > -self.p.pit_depth)

    def mechanical_energy(self) -> np.ndarray:
        p = self.p
        mb = p.body_mass * self.params["mass_scale"]
        mf = p.foot_mass * self.params["mass_scale"]
        kin = 0.5 * mb * np.sum(self.base_vel**2, axis=1) + 0.5 * mf * np.sum(self.foot_vel**2, axis=(1, 2))
        kin += 0.5 * p.body_inertia * self.params["mass_scale"] * self.pitch_rate**2
        kin += 0.5 * p.arm_inertia * self.arm_vel**2
        pot = mb * G * self.base_pos[:, 1] + mf * G * self.foot_pos[..., 1].sum(axis=1)
        pot += 0.5 * p.pitch_stiffness * self.pitch**2
        return kin + pot

    # -- measurements ------------------------------------------------------

    def _rel_feet(self):
        c, s = np.cos(self.pitch), np.sin(self.pitch)
        com = self.params["com_offset"]
        hip = self.base_pos + np.stack([com * c, com * s], axis=-1)
        d = self.foot_pos - hip[:, None, :]
        rx = c[:, None] * d[..., 0] + s[:, None] * d[..., 1]
        rz = -s[:, None] * d[..., 0] + c[:, None] * d[..., 1]
        hip_vel = self.base_vel + self.pitch_rate[:, None] * np.stack([-com * s, com * c], axis=-1)
        dv = self.foot_vel - hip_vel[:, None, :]
        vx = c[:, None] * dv[..., 0] + s[:, None] * dv[..., 1]
        vz = -s[:, None] * dv[..., 0] + c[:, None] * dv[..., 1]
        w = self.pitch_rate[:, None]
        return rx, rz, vx + w * rz, vz - w * rx

    def _joint_state(self):
        rx, rz, vx, vz = self._rel_feet()
        L2 = rx**2 + rz**2
        L = np.sqrt(L2)
        phi = np.arctan2(rx, -rz)
        Ld = (rx * vx + rz * vz) / np.maximum(L, 1e-9)
        phid = (-rz * vx + rx * vz) / np.maximum(L2, 1e-12)
        q = np.stack([phi[:, 0], L[:, 0], phi[:, 1], L[:, 1], self.arm], axis=1)
        qd = np.stack([phid[:, 0], Ld[:, 0], phid[:, 1], Ld[:, 1], self.arm_vel], axis=1)
        return q, qd

    def _contacts(self):
        touching = (self.foot_pos[..., 1] < 0.0) & self._supported(self.foot_pos)
        if self.blocks.size:
            touching |= np.any(self._block_penetration(self.foot_pos, 0.0)[0], axis=-1)
        return touching, self.foot_pos.copy()

    def _task(self, stage_idx):
        err = self.arm - self.arm_target[stage_idx]
        f_task = np.abs(err) < self.arm_tol[stage_idx]
        err_pos = 2.0 * self.p.arm_length * np.abs(np.sin(err / 2.0))
        return f_task, {"err_rot": err, "err_pos": err_pos}

    def task_reward(self, signals: dict, weights: dict):
        return rewards.task_reward_posture(signals["err_rot"], signals["err_pos"], weights.get("w_task", 30.0))

    def _to_body(self, pts):
        """World points (N, ..., 2) into each env's body frame."""
        c, s = np.cos(self.pitch), np.sin(self.pitch)
        shape = (-1,) + (1,) * (pts.ndim - 2)
        c, s = c.reshape(shape), s.reshape(shape)
        d = pts - self.base_pos.reshape((-1,) + (1,) * (pts.ndim - 2) + (2,))
        return np.stack([c * d[..., 0] + s * d[..., 1], -s * d[..., 0] + c * d[..., 1]], axis=-1)

    def _extra_obs(self):
        c, s = np.cos(self.pitch), np.sin(self.pitch)
        v = self.base_vel
        v_body = np.stack([c * v[:, 0] + s * v[:, 1], -s * v[:, 0] + c * v[:, 1]], axis=1)
        grav = np.stack([-s, -c], axis=1)
        return np.concatenate([v_body, self.pitch_rate[:, None], grav], axis=1)

    def _goal_obs(self):
        S = len(self.plan)
        parts = []
        for k in range(2):
            idx = np.minimum(self.n_stage + k, S - 1)
            lo = self._to_body(self.req_lo[idx])  # (N, 2 feet, 2)
            hi = self._to_body(self.req_hi[idx])
            on = (self.req_codes[idx] == sc.IN_CONTACT)[..., None]
            corners = np.concatenate([np.where(on, lo, 0.0), np.where(on, hi, 0.0)], axis=-1)  # (N, 2, 4)
            parts.append(corners.reshape(self.num_envs, -1))
        for k in range(2):
            idx = np.minimum(self.n_stage + k, S - 1)
            parts.append(self.arm_target[idx][:, None])
        return np.concatenate(parts, axis=1)

    def _fallen(self):
        x = self.base_pos[:, 0]
        off_course = (x < self.course[0]) | (x > self.course[1])
        if self.p.pits:
            off_course |= np.any(self.foot_pos[..., 1] < -self.p.pit_depth, axis=1)
        return (self.base_pos[:, 1] < self.p.fall_height) | (np.abs(self.pitch) > self.p.fall_pitch) | off_course

    def _state_finite(self):
        return (
            np.all(np.isfinite(self.base_pos), axis=1)
            & np.all(np.isfinite(self.foot_pos), axis=(1, 2))
            & np.isfinite(self.pitch)
            & np.isfinite(self.arm)
        )

    def _reg_signals(self, applied, contact):
        speed = np.linalg.norm(self.foot_vel, axis=-1)
        first = contact & ~self.was_contact
        at_touchdown = np.where(first, self.air_time, 0.0)
        self.air_time = np.where(contact, 0.0, self.air_time + self.control_dt)
        self.was_contact = contact.copy()
        return {"foot_speed": speed, "first_contact": first, "air_time_at_touchdown": at_touchdown}

    CURIOSITY_LO = np.array([-1.0, 0.0, -np.pi, -3.0, -3.0, -10.0, -1.5, -0.2, -1.5, -0.2, 0.0, 0.0])
    CURIOSITY_HI = np.array([4.0, 1.2, np.pi, 3.0, 3.0, 10.0, 4.5, 1.0, 4.5, 1.0, 1.0, 1.0])

    def curiosity_obs(self):
        contact = self._contacts()[0].astype(float)
        return np.concatenate(
            [
                self.base_pos,
                self.pitch[:, None],
                self.base_vel,
                self.pitch_rate[:, None],
                self.foot_pos.reshape(self.num_envs, 4),
                contact,
            ],
            axis=1,
        )

    _CURI_PERM = np.array([0, 1, 2, 3, 4, 5, 8, 9, 6, 7, 11, 10])

    def mirror_curiosity_obs(self, o):
        return o[..., self._CURI_PERM]

    # -- symmetry ----------------------------------------------------------

    _ACT_PERM = np.array([2, 3, 0, 1, 4])

    @classmethod
    def obs_permutation(cls) -> np.ndarray:
        blocks = []
        off = 0
        for _ in range(3 * 3):  # q, qd, action stacks of 3 frames each
            blocks.append(off + cls._ACT_PERM)
            off += 5
        blocks.append(off + np.arange(5))  # base vel (2), pitch rate, gravity (2)
        off += 5
        for _ in range(2):  # two stages x (left corners 4, right corners 4)
            blocks.append(off + np.r_[4:8, 0:4])
            off += 8
        blocks.append(off + np.arange(2))
        return np.concatenate(blocks)

    def mirror_obs(self, o):
        return np.asarray(o)[..., self.obs_permutation()]

    def mirror_act(self, a):
        return np.asarray(a)[..., self._ACT_PERM]
