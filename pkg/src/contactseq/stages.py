"""Contact stages: goals, fulfillment checks and stage advancement.

A task is an ordered list of stages. Each stage pairs a contact goal (what
every end effector should be touching) with a task goal (an extra predicate
such as a posture or an object distance). A stage is fulfilled when both hold;
after they have held for ``dwell_steps`` consecutive control steps the episode
moves on to the next stage.

Scalar functions here are the reference semantics. The ``*_batch`` variants
are the array forms the vectorized environments call every step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence, Union

import numpy as np
import yaml


class ConfigError(ValueError):
    """Raised for malformed plans, goals or missing inputs."""


FRAMES = ("world", "body", "object")

# Integer codes for requirements in the array forms.
UNCONSTRAINED, IN_CONTACT, AIRBORNE = 0, 1, 2


@dataclass(frozen=True)
class Region:
    """Axis-aligned box. ``body``/``object`` regions move with that pose."""

    frame: str
    lo: tuple[float, float]
    hi: tuple[float, float]

    def __post_init__(self):
        if self.frame not in FRAMES:
            raise ConfigError(f"unknown region frame {self.frame!r}")
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != 2 or len(hi) != 2:
            raise ConfigError("region corners must be 2-vectors")
        if lo[0] > hi[0] or lo[1] > hi[1]:
            raise ConfigError(f"region lo {lo} exceeds hi {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def to_local(self, point, base_pose=None, object_pose=None) -> np.ndarray:
        p = np.asarray(point, dtype=float)
        if self.frame == "world":
            return p
        pose = base_pose if self.frame == "body" else object_pose
        if pose is None:
            raise ConfigError(f"{self.frame}-frame region needs a {self.frame} pose")
        return world_to_frame(p, pose)

    def contains(self, point, base_pose=None, object_pose=None) -> bool:
        q = self.to_local(point, base_pose, object_pose)
        return bool(self.lo[0] <= q[0] <= self.hi[0] and self.lo[1] <= q[1] <= self.hi[1])

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.lo) + np.asarray(self.hi))


def world_to_frame(point, pose) -> np.ndarray:
    """Express a world point in the frame of ``pose = (x, y, angle)``."""
    x, y, th = pose
    c, s = math.cos(th), math.sin(th)
    dx, dy = point[0] - x, point[1] - y
    return np.array([c * dx + s * dy, -s * dx + c * dy])


def frame_to_world(point, pose) -> np.ndarray:
    x, y, th = pose
    c, s = math.cos(th), math.sin(th)
    return np.array([x + c * point[0] - s * point[1], y + s * point[0] + c * point[1]])


@dataclass(frozen=True)
class InContactWithin:
    region: Region
    code = IN_CONTACT


@dataclass(frozen=True)
class Airborne:
    code = AIRBORNE


@dataclass(frozen=True)
class Unconstrained:
    code = UNCONSTRAINED


Requirement = Union[InContactWithin, Airborne, Unconstrained]


@dataclass(frozen=True)
class ContactGoal:
    requirements: Mapping[str, Requirement]

    def constrained(self) -> list[str]:
        return [k for k, r in self.requirements.items() if not isinstance(r, Unconstrained)]


TASK_KINDS = ("posture", "transport", "always")


@dataclass(frozen=True)
class TaskGoal:
    """Posture goals carry ``target`` and ``tolerance`` (per component) in
    the body frame; transport goals carry ``threshold`` in meters."""

    kind: str = "always"
    params: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ConfigError(f"unknown task goal kind {self.kind!r}")


@dataclass(frozen=True)
class Stage:
    contact: ContactGoal
    task: TaskGoal = TaskGoal()


@dataclass(frozen=True)
class StagePlan:
    stages: tuple[Stage, ...]
    dwell_steps: int = 5

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        if len(self.stages) < 1:
            raise ConfigError("a plan needs at least one stage")
        if self.dwell_steps < 1:
            raise ConfigError("dwell_steps must be >= 1")
        keys = set(self.stages[0].contact.requirements)
        for st in self.stages[1:]:
            if set(st.contact.requirements) != keys:
                raise ConfigError("every stage must cover the same end-effector set")

    def __len__(self):
        return len(self.stages)

    @property
    def effectors(self) -> list[str]:
        return list(self.stages[0].contact.requirements)

    @property
    def n_con(self) -> int:
        """Maximal number of end effectors constrained in any stage."""
        return max(1, max(len(st.contact.constrained()) for st in self.stages))

    def stage(self, index: int) -> Stage:
        """Stage ``index``; indices past the end repeat the final stage."""
        return self.stages[min(index, len(self.stages) - 1)]


@dataclass(frozen=True)
class StageStatus:
    n_stage: int = 0
    f_con: bool = False
    f_task: bool = False
    n_corr: int = 0
    n_wrong: int = 0
    dwell_counter: int = 0
    plan_complete: bool = False


@dataclass(frozen=True)
class ObservedContact:
    in_contact: bool
    position: tuple[float, float] = (0.0, 0.0)


def classify_effector(req: Requirement, contact: ObservedContact, base_pose=None, object_pose=None) -> int:
    """+1 correct, -1 wrong, 0 neither."""
    if isinstance(req, Unconstrained):
        return 0
    if isinstance(req, Airborne):
        return -1 if contact.in_contact else 1
    if not contact.in_contact:
        return 0
    return 1 if req.region.contains(contact.position, base_pose, object_pose) else -1


def evaluate_contacts(
    contacts: Mapping[str, ObservedContact | tuple],
    goal: ContactGoal,
    base_pose=None,
    object_pose=None,
) -> tuple[bool, int, int]:
    """Return ``(f_con, n_corr, n_wrong)`` for one stage's contact goal.

    An effector that is required in a region but is not touching anything is
    neither correct nor wrong.
    """
    n_corr = n_wrong = 0
    satisfied = True
    for name in contacts:
        if name not in goal.requirements:
            raise ConfigError(f"unknown end effector {name!r}")
    for name, req in goal.requirements.items():
        if name not in contacts:
            raise ConfigError(f"no contact observation for end effector {name!r}")
        c = contacts[name]
        if not isinstance(c, ObservedContact):
            c = ObservedContact(bool(c[0]), tuple(c[1]))
        verdict = classify_effector(req, c, base_pose, object_pose)
        n_corr += verdict == 1
        n_wrong += verdict == -1
        if not isinstance(req, Unconstrained) and verdict != 1:
            satisfied = False
    return satisfied, n_corr, n_wrong


def evaluate_task(snapshot: Mapping[str, object], goal: TaskGoal) -> bool:
    """Posture: every component of ``|pose - target|`` below tolerance.
    Transport: ``object_dest_distance < threshold``."""
    if goal.kind == "always":
        return True
    if goal.kind == "posture":
        if "pose" not in snapshot:
            raise ConfigError("posture goal needs a 'pose' snapshot field")
        pose = np.atleast_1d(np.asarray(snapshot["pose"], dtype=float))
        target = np.atleast_1d(np.asarray(goal.params.get("target", 0.0), dtype=float))
        tol = np.atleast_1d(np.asarray(goal.params.get("tolerance", 0.2), dtype=float))
        return bool(np.all(np.abs(pose - target) < tol))
    if "object_dest_distance" not in snapshot:
        raise ConfigError("transport goal needs an 'object_dest_distance' snapshot field")
    return float(snapshot["object_dest_distance"]) < float(goal.params.get("threshold", 0.1))


def advance(status: StageStatus, f_con: bool, f_task: bool, plan: StagePlan) -> StageStatus:
    """One control step of stage bookkeeping (dwell counting and advancement)."""
    if status.plan_complete:
        raise ConfigError("advance called on a completed plan")
    dwell = status.dwell_counter + 1 if (f_con and f_task) else 0
    n_stage = status.n_stage
    if dwell >= plan.dwell_steps:
        n_stage += 1
        dwell = 0
    return replace(
        status,
        n_stage=n_stage,
        f_con=bool(f_con),
        f_task=bool(f_task),
        dwell_counter=dwell,
        plan_complete=n_stage >= len(plan),
    )


# ---------------------------------------------------------------------------
# array forms


def evaluate_contacts_batch(in_contact, positions, req_code, lo, hi):
    """Vectorized ``evaluate_contacts`` for world-frame regions.

    Shapes: ``in_contact`` (N, E) bool, ``positions`` (N, E, 2), ``req_code``
    (N, E) int, ``lo``/``hi`` (N, E, 2). Returns ``f_con`` (N,), ``n_corr``
    (N,), ``n_wrong`` (N,).
    """
    in_contact = np.asarray(in_contact, dtype=bool)
    inside = np.all((positions >= lo) & (positions <= hi), axis=-1)
    want_in = req_code == IN_CONTACT
    want_air = req_code == AIRBORNE
    correct = (want_in & in_contact & inside) | (want_air & ~in_contact)
    wrong = (want_in & in_contact & ~inside) | (want_air & in_contact)
    constrained = want_in | want_air
    f_con = np.all(correct | ~constrained, axis=-1)
    return f_con, correct.sum(-1), wrong.sum(-1)


def advance_batch(n_stage, dwell, f_con, f_task, dwell_steps: int, plan_len):
    """Vectorized ``advance``; returns new ``(n_stage, dwell, plan_complete)``."""
    ok = np.asarray(f_con, bool) & np.asarray(f_task, bool)
    dwell = np.where(ok, dwell + 1, 0)
    step_up = dwell >= dwell_steps
    n_stage = n_stage + step_up
    dwell = np.where(step_up, 0, dwell)
    return n_stage, dwell, n_stage >= plan_len


# ---------------------------------------------------------------------------
# structured-text loading


def _requirement_from_dict(d) -> Requirement:
    if d is None or d == "unconstrained":
        return Unconstrained()
    if d == "airborne":
        return Airborne()
    if isinstance(d, Mapping):
        kind = d.get("kind", "contact")
        if kind == "airborne":
            return Airborne()
        if kind == "unconstrained":
            return Unconstrained()
        if kind == "contact":
            try:
                region = Region(d.get("frame", "world"), tuple(d["lo"]), tuple(d["hi"]))
            except KeyError as e:
                raise ConfigError(f"contact requirement missing {e}") from None
            return InContactWithin(region)
    raise ConfigError(f"cannot parse requirement {d!r}")


def plan_from_dict(d: Mapping) -> StagePlan:
    """Build a plan from ``{dwell_steps, stages: [{contacts: {...}, task: {...}}]}``."""
    if "stages" not in d:
        raise ConfigError("plan needs a 'stages' list")
    stages = []
    for raw in d["stages"]:
        reqs = {name: _requirement_from_dict(r) for name, r in (raw.get("contacts") or {}).items()}
        task = raw.get("task") or {}
        kind = task.get("kind", "always")
        params = {k: v for k, v in task.items() if k != "kind"}
        stages.append(Stage(ContactGoal(reqs), TaskGoal(kind, params)))
    return StagePlan(tuple(stages), int(d.get("dwell_steps", 5)))


def plan_to_dict(plan: StagePlan) -> dict:
    out = []
    for st in plan.stages:
        contacts = {}
        for name, r in st.contact.requirements.items():
            if isinstance(r, InContactWithin):
                contacts[name] = {
                    "kind": "contact",
                    "frame": r.region.frame,
                    "lo": list(r.region.lo),
                    "hi": list(r.region.hi),
                }
            else:
                contacts[name] = {"kind": "airborne" if isinstance(r, Airborne) else "unconstrained"}
        out.append({"contacts": contacts, "task": {"kind": st.task.kind, **dict(st.task.params)}})
    return {"dwell_steps": plan.dwell_steps, "stages": out}


def load_plan(path: str | Path) -> StagePlan:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"stage plan file not found: {path}")
    with open(path) as f:
        data = yaml.safe_load(f)
    return plan_from_dict(data.get("plan", data))


def requirement_arrays(plan: StagePlan, effectors: Sequence[str]):
    """Per-stage requirement codes (S, E) and world-frame region bounds (S, E, 2)."""
    S, E = len(plan), len(effectors)
    codes = np.zeros((S, E), dtype=np.int64)
    lo = np.zeros((S, E, 2))
    hi = np.zeros((S, E, 2))
    for i, st in enumerate(plan.stages):
        for j, name in enumerate(effectors):
            r = st.contact.requirements[name]
            codes[i, j] = r.code
            if isinstance(r, InContactWithin):
                lo[i, j], hi[i, j] = r.region.lo, r.region.hi
    return codes, lo, hi
