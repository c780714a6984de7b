"""Untargeted attacks on the point-cloud classifier."""

from __future__ import annotations

import numpy as np

from .. import net
from ..geometry import TriangleIndex, TriangleMesh
from .common import (
    ATTACK_FIELDS,
    ATTACKS,
    AttackConfig,
    AttackResult,
    binary_search_lambda,
    finalize,
    l2_step,
    default_config,
)
from .distributional import chamfer_attack, clamp_to_surface_band, gradient_projection, iter_grad_l2
from .shape import (
    adversarial_sinks,
    adversarial_sticks,
    init_sinks,
    perturbation_resampling,
    sink_displacement,
    sinks_objective,
    stick_budget,
    stick_point_counts,
    stick_points,
)


def run_attack(
    params: net.ClassifierParams,
    cloud,
    y: int,
    cfg: AttackConfig,
    mesh: TriangleMesh | None = None,
    index: TriangleIndex | None = None,
    rng: np.random.Generator | None = None,
) -> AttackResult:
    """Dispatch on ``cfg.kind``. ``mesh`` is the benign surface, required by
    gradient projection and sticks and used for the Hausdorff metric otherwise."""
    x = np.asarray(cloud, dtype=float)
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    kind = cfg.kind
    if kind in ("gradient_projection", "adversarial_sticks"):
        if mesh is None:
            raise ValueError(f"{kind} needs the benign surface mesh")
        index = index or TriangleIndex(mesh)
    if kind == "none":
        return finalize(params, x, x.copy(), y, 0, mesh, index)
    if kind == "iter_grad_l2":
        return iter_grad_l2(params, x, y, cfg, rng, mesh)
    if kind == "chamfer":
        return chamfer_attack(params, x, y, cfg, mesh)
    if kind == "gradient_projection":
        return gradient_projection(params, x, mesh, y, cfg, index)
    if kind == "perturbation_resampling":
        return perturbation_resampling(params, x, y, cfg, rng, mesh)
    if kind == "adversarial_sticks":
        return adversarial_sticks(params, x, mesh, y, cfg, index)
    if kind == "adversarial_sinks":
        return adversarial_sinks(params, x, y, cfg, mesh)
    raise ValueError(f"unknown attack {kind!r}")


__all__ = [
    "ATTACKS", "ATTACK_FIELDS", "AttackConfig", "AttackResult", "default_config", "run_attack",
    "iter_grad_l2", "chamfer_attack", "gradient_projection", "perturbation_resampling",
    "adversarial_sticks", "adversarial_sinks", "binary_search_lambda", "finalize", "l2_step",
    "clamp_to_surface_band", "sink_displacement", "sinks_objective", "init_sinks",
    "stick_point_counts", "stick_budget", "stick_points",
]
