from ..stages import ConfigError
from .base import ContactSequenceEnv, StepResult
from .hopper import HopperEnv, hopper_plan
from .pusher import PusherEnv, pusher_plan
from .randomization import OFF, RandomizationConfig

ENV_CLASSES = {"hopper": HopperEnv, "pusher": PusherEnv}


def make_env(name: str, plan=None, options: dict | None = None, **kw) -> ContactSequenceEnv:
    """Construct an environment by name; ``options`` go to the environment class."""
    if name not in ENV_CLASSES:
        raise ConfigError(f"unknown environment {name!r}")
    options = dict(options or {})
    try:
        return ENV_CLASSES[name](plan, **options, **kw)
    except TypeError as exc:
        raise ConfigError(f"bad options for {name}: {exc}") from exc


__all__ = [
    "ContactSequenceEnv",
    "StepResult",
    "HopperEnv",
    "PusherEnv",
    "hopper_plan",
    "pusher_plan",
    "OFF",
    "RandomizationConfig",
    "make_env",
]
