"""Point-removal defenses applied to a cloud before it is classified."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import net
from .geometry import build_index

DEFENSES = ("none", "random_remove", "outlier_remove", "salient_remove")


@dataclass(frozen=True)
class DefenseConfig:
    """``m`` points removed (random / salient), ``k`` neighbours and ``eps_std``
    threshold (outlier removal), ``seed`` for random removal."""

    kind: str = "none"
    m: int = 200
    k: int = 10
    eps_std: float = 1.0
    seed: int = 0
    label: str = ""

    def __post_init__(self):
        if self.kind not in DEFENSES:
            raise ValueError(f"unknown defense {self.kind!r}; choose from {DEFENSES}")
        if self.m < 0 or self.k < 1 or self.eps_std < 0:
            raise ValueError("need m >= 0, k >= 1 and eps_std >= 0")

    @property
    def name(self) -> str:
        return self.label or self.kind

    def with_(self, **changes) -> "DefenseConfig":
        return replace(self, **changes)


DEFENSE_FIELDS = ("m", "k", "eps_std")
OUTLIER_RTOL = 1e-12


def _check_removal(n: int, m: int):
    if not 0 <= m < n:
        raise ValueError(f"cannot remove {m} of {n} points")


def random_remove(cloud, m: int, rng: np.random.Generator) -> np.ndarray:
    """Drop a uniformly random m-subset; survivors keep their order."""
    cloud = np.asarray(cloud, dtype=float)
    _check_removal(len(cloud), m)
    keep = np.ones(len(cloud), dtype=bool)
    keep[rng.choice(len(cloud), m, replace=False)] = False
    return cloud[keep]


def outlier_scores(cloud, k: int) -> np.ndarray:
    """Mean distance from each point to its k nearest other points."""
    cloud = np.asarray(cloud, dtype=float)
    if not 1 <= k < len(cloud):
        raise ValueError(f"k={k} needs 1 <= k < {len(cloud)}")
    dist, _ = build_index(cloud).query(cloud, k, exclude=np.arange(len(cloud)))
    return dist.mean(axis=1)


def outlier_mask(cloud, k: int = 10, eps_std: float = 1.0) -> np.ndarray:
    """True for points kept: score <= mean + eps_std * population std.

    A relative slack of 1e-12 keeps rounding noise from splitting scores that
    are equal by construction (e.g. a regular lattice).
    """
    o = outlier_scores(cloud, k)
    mean = o.mean()
    return o <= mean + eps_std * o.std() + OUTLIER_RTOL * mean


def outlier_remove(cloud, k: int = 10, eps_std: float = 1.0) -> np.ndarray:
    cloud = np.asarray(cloud, dtype=float)
    return cloud[outlier_mask(cloud, k, eps_std)]


def salient_remove(params: net.ClassifierParams, cloud, m: int = 200) -> np.ndarray:
    """Drop the m points of highest class-probability saliency (ties: lower index first)."""
    cloud = np.asarray(cloud, dtype=float)
    _check_removal(len(cloud), m)
    sal = net.saliency(params, cloud, kind="probability")
    keep = np.ones(len(cloud), dtype=bool)
    keep[np.argsort(-sal, kind="stable")[:m]] = False
    return cloud[keep]


def apply_defense(
    cfg: DefenseConfig, cloud, params: net.ClassifierParams | None = None, rng: np.random.Generator | None = None
) -> np.ndarray:
    cloud = np.asarray(cloud, dtype=float)
    if cfg.kind == "none":
        return cloud.copy()
    if cfg.kind == "random_remove":
        return random_remove(cloud, cfg.m, rng if rng is not None else np.random.default_rng(cfg.seed))
    if cfg.kind == "outlier_remove":
        return outlier_remove(cloud, cfg.k, cfg.eps_std)
    if params is None:
        raise ValueError("salient_remove needs the model parameters")
    return salient_remove(params, cloud, cfg.m)
