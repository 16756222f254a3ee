from .curriculum import CurriculumConfig, CurriculumState, curriculum_tick, plateaued
from .gae import compute_gae
from .ppo import PpoConfig, ppo_update, surrogate_loss, symmetry_augment

__all__ = [
    "CurriculumConfig",
    "CurriculumState",
    "curriculum_tick",
    "plateaued",
    "compute_gae",
    "PpoConfig",
    "ppo_update",
    "surrogate_loss",
    "symmetry_augment",
]
