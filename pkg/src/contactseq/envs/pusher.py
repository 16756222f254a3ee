"""Top-down loco-manipulation: a disc base with point hands moves a box to a
destination.

The base tracks commanded planar velocities and a yaw rate. Each hand is a
point mass pulled toward a body-frame target by a PD spring whose reaction
acts on the base. Hands and the base touch the box through penalty springs
with regularized Coulomb friction; the box slides on the floor with
friction.

The two-hand variant squeezes the box from its left and right faces; the
one-hand variant pushes on its rear face. Contact regions live in the box's
own frame, so they follow the box as it moves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import rewards
from .. import stages as sc
from .base import ContactSequenceEnv

G = 9.81
TWO_HANDS = ("left_hand", "right_hand")
ONE_HAND = ("hand",)


@dataclass(frozen=True)
class PusherParams:
    base_mass: float = 10.0
    base_radius: float = 0.2
    base_track_gain: float = 8.0
    base_force_limit: float = 120.0
    yaw_track_gain: float = 10.0
    hand_mass: float = 0.5
    kp_hand: float = 400.0
    kd_hand: float = 20.0
    box_half: float = 0.15
    box_mass: float = 2.0
    box_inertia: float = 0.03
    k_contact: float = 2000.0
    c_contact: float = 20.0
    hand_friction: float = 0.8
    k_slide: float = 50.0
    k_floor_slide: float = 40.0
    vx_scale: float = 1.0
    vy_scale: float = 0.5
    yaw_scale: float = 1.5
    hand_scale: float = 0.2
    hand_home: tuple[float, float] = (0.3, 0.25)
    hand_range: float = 0.45
    start_x: float = -0.6
    start_noise: float = 0.05
    dest_x: tuple[float, float] = (1.2, 1.8)
    dest_y: tuple[float, float] = (-0.3, 0.3)
    arena: float = 4.0
    hand_force_limit: float = 200.0


def pusher_plan(two_hands: bool = True, half: float = 0.15, threshold: float = 0.2, dwell_steps: int = 5) -> sc.StagePlan:
    """Reach the box faces, then carry/push it to the destination.

    Region depths extend slightly inside the face because contact means
    penetration.
    """
    span = 0.8 * half
    if two_hands:
        reqs = {
            "left_hand": sc.InContactWithin(sc.Region("object", (-span, half - 0.06), (span, half))),
            "right_hand": sc.InContactWithin(sc.Region("object", (-span, -half), (span, -half + 0.06))),
        }
    else:
        reqs = {"hand": sc.InContactWithin(sc.Region("object", (-half, -span), (-half + 0.06, span)))}
    contact = sc.ContactGoal(reqs)
    return sc.StagePlan(
        (
            sc.Stage(contact, sc.TaskGoal("always")),
            sc.Stage(contact, sc.TaskGoal("transport", {"threshold": threshold})),
        ),
        dwell_steps,
    )


def _rot(v, c, s):
    return np.stack([c * v[..., 0] - s * v[..., 1], s * v[..., 0] + c * v[..., 1]], axis=-1)


def _rot_inv(v, c, s):
    return np.stack([c * v[..., 0] + s * v[..., 1], -s * v[..., 0] + c * v[..., 1]], axis=-1)


def _wrap(a):
    return (a + np.pi) % (2 * np.pi) - np.pi


class PusherEnv(ContactSequenceEnv):
    push_dims = 2
    action_limit = 1.5

    def __init__(
        self,
        plan: sc.StagePlan | None = None,
        params: PusherParams = PusherParams(),
        two_hands: bool = True,
        threshold: float = 0.2,
        dwell_steps: int = 5,
        **kw,
    ):
        if isinstance(params, dict):
            params = PusherParams(**params)
        self.p = params
        self.two_hands = two_hands
        self.effectors = TWO_HANDS if two_hands else ONE_HAND
        E = len(self.effectors)
        self.n_joints = 2 * E
        self.action_dim = 3 + 2 * E
        self.curiosity_dim = 10 + 3 * E
        if plan is None:
            plan = pusher_plan(two_hands, params.box_half, threshold, dwell_steps)
        super().__init__(plan, **kw)
        S = len(self.plan)
        self.transport = np.array([st.task.kind == "transport" for st in self.plan.stages])
        self.threshold = np.array([float(st.task.params.get("threshold", np.inf)) for st in self.plan.stages])
        self.region_center = 0.5 * (self.req_lo + self.req_hi)  # (S, E, 2)
        self.object_frame = self.req_frames == "object"
        self.body_frame = self.req_frames == "body"
        N = self.num_envs
        self.base_pos = np.zeros((N, 2))
        self.base_vel = np.zeros((N, 2))
        self.yaw = np.zeros(N)
        self.yaw_rate = np.zeros(N)
        self.hand_pos = np.zeros((N, E, 2))
        self.hand_vel = np.zeros((N, E, 2))
        self.box_pos = np.zeros((N, 2))
        self.box_vel = np.zeros((N, 2))
        self.box_yaw = np.zeros(N)
        self.box_rate = np.zeros(N)
        self.dest = np.zeros((N, 2))
        self._S = S
        self.reset()

    def _check_plan(self):
        for st in self.plan.stages:
            if st.task.kind not in ("always", "transport"):
                raise sc.ConfigError(f"pusher stages support always/transport tasks, not {st.task.kind!r}")

    # -- state -------------------------------------------------------------

    STATE_KEYS = (
        "base_pos", "base_vel", "yaw", "yaw_rate", "hand_pos", "hand_vel",
        "box_pos", "box_vel", "box_yaw", "box_rate", "dest",
    )

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
        """Reflect across the world x axis and swap the hands."""
        out = {k: v.copy() for k, v in state.items()}
        for k in ("base_pos", "base_vel", "box_pos", "box_vel", "dest"):
            out[k][..., 1] *= -1
        for k in ("yaw", "yaw_rate", "box_yaw", "box_rate"):
            out[k] = -out[k]
        for k in ("hand_pos", "hand_vel"):
            out[k] = out[k][:, ::-1].copy()
            out[k][..., 1] *= -1
        return out

    def _home(self):
        hx, hy = self.p.hand_home
        if self.two_hands:
            return np.array([[hx, hy], [hx, -hy]])
        return np.array([[hx, 0.0]])

    def _reset_physics(self, ids):
        p, n = self.p, ids.size
        u = lambda lo, hi, size=n: self.rng.uniform(lo, hi, size=size)
        self.base_pos[ids] = np.stack([p.start_x + u(-p.start_noise, p.start_noise), u(-p.start_noise, p.start_noise)], 1)
        self.base_vel[ids] = 0.0
        self.yaw[ids] = u(-0.1, 0.1)
        self.yaw_rate[ids] = 0.0
        c, s = np.cos(self.yaw[ids]), np.sin(self.yaw[ids])
        home = np.broadcast_to(self._home(), (n,) + self._home().shape)
        self.hand_pos[ids] = self.base_pos[ids, None, :] + _rot(home, c[:, None], s[:, None])
        self.hand_vel[ids] = 0.0
        self.box_pos[ids] = 0.0
        self.box_vel[ids] = 0.0
        self.box_yaw[ids] = 0.0
        self.box_rate[ids] = 0.0
        self.dest[ids] = np.stack([u(*p.dest_x), u(*p.dest_y)], 1)

    def _base_velocity(self):
        return self.base_vel

    def _set_base_velocity(self, v, ids):
        self.base_vel[ids] = v

    # -- dynamics ----------------------------------------------------------

    def commands(self, a):
        p = self.p
        v_cmd = np.stack([a[:, 0] * p.vx_scale, a[:, 1] * p.vy_scale], 1)
        w_cmd = a[:, 2] * p.yaw_scale
        off = self._home()[None] + a[:, 3:].reshape(-1, len(self.effectors), 2) * p.hand_scale
        r = np.linalg.norm(off, axis=-1, keepdims=True)
        off = off * np.minimum(1.0, p.hand_range / np.maximum(r, 1e-9))
        return v_cmd, w_cmd, off

    def _box_contact(self, pts, vel):
        """Penalty force on points ``(N, K, 2)`` inside the box, in world frame."""
        p = self.p
        c, s = np.cos(self.box_yaw)[:, None], np.sin(self.box_yaw)[:, None]
        rel = pts - self.box_pos[:, None]
        local = _rot_inv(rel, c, s)
        box_v = self.box_vel[:, None] + self.box_rate[:, None, None] * np.stack([-rel[..., 1], rel[..., 0]], -1)
        vloc = _rot_inv(vel - box_v, c, s)
        pen_x = p.box_half - np.abs(local[..., 0])
        pen_y = p.box_half - np.abs(local[..., 1])
        inside = (pen_x > 0) & (pen_y > 0)
        use_x = pen_x < pen_y
        pen = np.where(use_x, pen_x, pen_y)
        sign = np.where(use_x, np.sign(local[..., 0]), np.sign(local[..., 1]))
        normal = np.where(use_x[..., None], np.stack([sign, 0 * sign], -1), np.stack([0 * sign, sign], -1))
        vn = np.sum(vloc * normal, -1)
        fn = np.where(inside, np.maximum(p.k_contact * pen - p.c_contact * vn, 0.0), 0.0)
        tangent = np.stack([-normal[..., 1], normal[..., 0]], -1)
        vt = np.sum(vloc * tangent, -1)
        ft = np.clip(-p.k_slide * vt, -p.hand_friction * fn, p.hand_friction * fn)
        f_local = fn[..., None] * normal + ft[..., None] * tangent
        return _rot(f_local, c, s), inside, rel

    def _integrate(self, applied, noise):
        p, dt = self.p, self.dt
        E = len(self.effectors)
        v_cmd, w_cmd, off = self.commands(applied)
        mb = p.base_mass * self.params["mass_scale"]
        mh = p.hand_mass * self.params["mass_scale"]
        mo = p.box_mass * self.params["mass_scale"]
        io = p.box_inertia * self.params["mass_scale"]
        kp = p.kp_hand * self.params["kp_scale"]
        kd = p.kd_hand * self.params["kd_scale"]
        mu = self.params["friction"]
        hand_noise = noise[:, 3:].reshape(-1, E, 2) * p.hand_force_limit
        base_noise = noise[:, :2] * p.base_force_limit
        for _ in range(self.substeps):
            c, s = np.cos(self.yaw), np.sin(self.yaw)
            r = _rot(off, c[:, None], s[:, None])
            w = self.yaw_rate[:, None, None]
            tgt = self.base_pos[:, None] + r
            tgt_vel = self.base_vel[:, None] + w * np.stack([-r[..., 1], r[..., 0]], -1)
            f_pd = kp[:, None, None] * (tgt - self.hand_pos) + kd[:, None, None] * (tgt_vel - self.hand_vel) + hand_noise
            f_hand_box, _, rel_h = self._box_contact(self.hand_pos, self.hand_vel)

            # base body against the box: sample its rim toward the box
            d = self.box_pos - self.base_pos
            dn = d / np.maximum(np.linalg.norm(d, axis=1, keepdims=True), 1e-9)
            rim = (self.base_pos + p.base_radius * dn)[:, None]
            f_base_box, _, rel_b = self._box_contact(rim, self.base_vel[:, None])

            v_world = _rot(v_cmd, c, s)
            f_track = mb[:, None] * p.base_track_gain * (v_world - self.base_vel)
            mag = np.linalg.norm(f_track, axis=1, keepdims=True)
            f_track = f_track * np.minimum(1.0, p.base_force_limit / np.maximum(mag, 1e-9))
            f_base = f_track - f_pd.sum(1) + f_base_box[:, 0] + base_noise

            f_box = -f_hand_box.sum(1) - f_base_box[:, 0]
            tau_box = -np.sum(rel_h[..., 0] * f_hand_box[..., 1] - rel_h[..., 1] * f_hand_box[..., 0], 1)
            tau_box -= rel_b[:, 0, 0] * f_base_box[:, 0, 1] - rel_b[:, 0, 1] * f_base_box[:, 0, 0]
            cap = mu * mo * G
            f_box = f_box + np.clip(-p.k_floor_slide * mo[:, None] * self.box_vel, -cap[:, None], cap[:, None])
            tau_box = tau_box + np.clip(-p.k_floor_slide * io * self.box_rate, -0.5 * cap * p.box_half, 0.5 * cap * p.box_half)

            hand_acc = (f_pd + f_hand_box) / mh[:, None, None]
            self.hand_vel = self.hand_vel + dt * hand_acc
            self.hand_pos = self.hand_pos + dt * self.hand_vel
            self.base_vel = self.base_vel + dt * f_base / mb[:, None]
            self.base_pos = self.base_pos + dt * self.base_vel
            self.yaw_rate = self.yaw_rate + dt * p.yaw_track_gain * (w_cmd - self.yaw_rate)
            self.yaw = self.yaw + dt * self.yaw_rate
            self.box_vel = self.box_vel + dt * f_box / mo[:, None]
            self.box_pos = self.box_pos + dt * self.box_vel
            self.box_rate = self.box_rate + dt * tau_box / io
            self.box_yaw = self.box_yaw + dt * self.box_rate

    # -- measurements ------------------------------------------------------

    def _to_body(self, pts):
        c, s = np.cos(self.yaw), np.sin(self.yaw)
        shape = (-1,) + (1,) * (pts.ndim - 2)
        return _rot_inv(pts - self.base_pos.reshape(shape + (2,)), c.reshape(shape), s.reshape(shape))

    def _vec_to_body(self, v):
        c, s = np.cos(self.yaw), np.sin(self.yaw)
        shape = (-1,) + (1,) * (v.ndim - 2)
        return _rot_inv(v, c.reshape(shape), s.reshape(shape))

    def _joint_state(self):
        rel = self._to_body(self.hand_pos)
        r = self.hand_pos - self.base_pos[:, None]
        dv = self.hand_vel - self.base_vel[:, None] - self.yaw_rate[:, None, None] * np.stack([-r[..., 1], r[..., 0]], -1)
        return rel.reshape(self.num_envs, -1), self._vec_to_body(dv).reshape(self.num_envs, -1)

    def _contacts(self):
        _, inside, _ = self._box_contact(self.hand_pos, self.hand_vel)
        return inside, self.hand_pos.copy()

    def _local_contact_points(self, points, stage_idx):
        c, s = np.cos(self.box_yaw)[:, None], np.sin(self.box_yaw)[:, None]
        in_obj = _rot_inv(points - self.box_pos[:, None], c, s)
        in_body = self._to_body(points)
        obj = self.object_frame[stage_idx][..., None]
        body = self.body_frame[stage_idx][..., None]
        return np.where(obj, in_obj, np.where(body, in_body, points))

    def _task(self, stage_idx):
        d_dest = np.linalg.norm(self.box_pos - self.dest, axis=1)
        f_task = ~self.transport[stage_idx] | (d_dest < self.threshold[stage_idx])
        heading = np.stack([np.cos(self.yaw), np.sin(self.yaw)], 1)
        to_dest = self.dest - self.base_pos
        to_box = self.box_pos - self.base_pos
        ang = lambda v: _wrap(np.arctan2(v[:, 1], v[:, 0]) - self.yaw)
        d_hands = np.linalg.norm(self.hand_pos - self.box_pos[:, None], axis=-1)
        return f_task, {
            "d_obj2dest": d_dest,
            "d_left2obj": d_hands[:, 0],
            "d_right2obj": d_hands[:, -1],
            "theta_dest": ang(to_dest),
            "theta_obj": ang(to_box),
            "ang_vel_z": self.yaw_rate.copy(),
            "heading": heading,
        }

    def task_reward(self, signals: dict, weights: dict):
        return rewards.task_reward_transport(
            signals["d_obj2dest"],
            signals["d_left2obj"],
            signals["d_right2obj"],
            signals["theta_dest"],
            signals["theta_obj"],
            signals["n_stage"],
            weights.get("w_box", 200.0),
            weights.get("w_hand", 100.0),
            angle_gates_enabled=self.two_hands,
        )

    def _extra_obs(self):
        c, s = np.cos(self.yaw), np.sin(self.yaw)
        v_body = _rot_inv(self.base_vel, c, s)
        box = self._to_body(self.box_pos[:, None])[:, 0]
        rel_yaw = self.box_yaw - self.yaw
        box_v = _rot_inv(self.box_vel, c, s)
        dest = self._to_body(self.dest[:, None])[:, 0]
        return np.concatenate(
            [v_body, self.yaw_rate[:, None], box, np.cos(rel_yaw)[:, None], np.sin(rel_yaw)[:, None], box_v, dest], 1
        )

    def _goal_obs(self):
        parts = []
        cb, sb = np.cos(self.box_yaw)[:, None], np.sin(self.box_yaw)[:, None]
        for k in range(2):
            idx = np.minimum(self.n_stage + k, self._S - 1)
            center = self.region_center[idx]
            world = np.where(
                self.object_frame[idx][..., None], self.box_pos[:, None] + _rot(center, cb, sb), center
            )
            local = np.where(self.body_frame[idx][..., None], center, self._to_body(world))
            parts.append(local.reshape(self.num_envs, -1))
            parts.append(self.transport[idx].astype(float)[:, None])
        return np.concatenate(parts, 1)

    def _fallen(self):
        a = self.p.arena
        return np.any(np.abs(self.base_pos) > a, axis=1) | np.any(np.abs(self.box_pos) > a, axis=1)

    def _state_finite(self):
        return (
            np.all(np.isfinite(self.base_pos), 1)
            & np.all(np.isfinite(self.hand_pos), (1, 2))
            & np.all(np.isfinite(self.box_pos), 1)
            & np.isfinite(self.yaw)
            & np.isfinite(self.box_yaw)
        )

    def _reg_signals(self, applied, contact):
        return {"ang_vel_z": self.yaw_rate.copy()}

    # -- curiosity ---------------------------------------------------------

    @property
    def CURIOSITY_LO(self):
        E = len(self.effectors)
        return np.r_[[-1.5, -2.0, -np.pi, -2.0, -2.0, -3.0, -1.0, -2.0, -np.pi, -2.0], [-0.6] * (2 * E), [0.0] * E]

    @property
    def CURIOSITY_HI(self):
        E = len(self.effectors)
        return np.r_[[3.0, 2.0, np.pi, 2.0, 2.0, 3.0, 3.0, 2.0, np.pi, 2.0], [0.6] * (2 * E), [1.0] * E]

    def curiosity_obs(self):
        """Base pose/velocity, box pose, hand offsets (body frame), hand contacts."""
        _, inside, _ = self._box_contact(self.hand_pos, self.hand_vel)
        rel = self._to_body(self.hand_pos).reshape(self.num_envs, -1)
        return np.concatenate(
            [
                self.base_pos,
                _wrap(self.yaw)[:, None],
                self.base_vel,
                self.yaw_rate[:, None],
                self.box_pos,
                _wrap(self.box_yaw)[:, None],
                np.linalg.norm(self.box_vel, axis=1, keepdims=True),
                rel,
                inside.astype(float),
            ],
            1,
        )

    def _mirror_spec_curiosity(self):
        E = len(self.effectors)
        perm = list(range(10))
        sign = [1, -1, -1, 1, -1, -1, 1, -1, -1, 1]
        hand = self._hand_perm()
        perm += [10 + 2 * h + i for h in hand for i in (0, 1)]
        sign += [1, -1] * E
        perm += [10 + 2 * E + h for h in hand]
        sign += [1] * E
        return np.array(perm), np.array(sign, dtype=float)

    def mirror_curiosity_obs(self, o):
        perm, sign = self._mirror_spec_curiosity()
        return np.asarray(o)[..., perm] * sign

    # -- symmetry ----------------------------------------------------------

    def _hand_perm(self):
        return [1, 0] if self.two_hands else [0]

    def _hand_block(self):
        """Permutation and signs for (E hands x (x, y)) blocks."""
        perm = [2 * h + i for h in self._hand_perm() for i in (0, 1)]
        sign = [1.0, -1.0] * len(self.effectors)
        return np.array(perm), np.array(sign)

    def _mirror_spec(self):
        hp, hs = self._hand_block()
        blocks, signs, off = [], [], 0

        def add(perm, sign):
            nonlocal off
            blocks.append(off + np.asarray(perm))
            signs.append(np.asarray(sign, dtype=float))
            off += len(perm)

        for _ in range(3):  # q stack
            add(hp, hs)
        for _ in range(3):  # qd stack
            add(hp, hs)
        for _ in range(3):  # action stack
            add(np.r_[0, 1, 2, 3 + hp], np.r_[1, -1, -1, hs])
        add(np.arange(11), [1, -1, -1, 1, -1, 1, -1, 1, -1, 1, -1])
        for _ in range(2):
            add(hp, hs)
            add([0], [1])
        return np.concatenate(blocks), np.concatenate(signs)

    def mirror_obs(self, o):
        perm, sign = self._mirror_spec()
        return np.asarray(o)[..., perm] * sign

    def mirror_act(self, a):
        hp, hs = self._hand_block()
        perm = np.r_[0, 1, 2, 3 + hp]
        sign = np.r_[1.0, -1.0, -1.0, hs]
        return np.asarray(a)[..., perm] * sign
