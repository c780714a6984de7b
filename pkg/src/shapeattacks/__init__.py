"""Adversarial shape perturbations on 3D point clouds.

A small max-pool point-cloud classifier, distributional and shape attacks
against it, point-removal defenses, and the computational geometry they need.
"""

from . import attacks, defenses, geometry, net
from .adam import AdamState, adam_step
from .attacks import AttackConfig, AttackResult, default_config, run_attack
from .defenses import DefenseConfig, apply_defense
from .net import ClassifierParams, load_params, save_params

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "AttackConfig",
    "AttackResult",
    "ClassifierParams",
    "DefenseConfig",
    "adam_step",
    "apply_defense",
    "attacks",
    "defenses",
    "geometry",
    "load_params",
    "net",
    "default_config",
    "run_attack",
    "save_params",
]
