"""Attack configuration, results, and the lambda binary search shared by attacks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Any, Callable

import numpy as np

from .. import net
from ..geometry import TriangleIndex, TriangleMesh, chamfer_distance, hausdorff_to_surface

ATTACKS = (
    "none",
    "iter_grad_l2",
    "chamfer",
    "gradient_projection",
    "perturbation_resampling",
    "adversarial_sticks",
    "adversarial_sinks",
)


@dataclass(frozen=True)
class AttackConfig:
    """Hyperparameters for one attack. Unused fields are ignored by an attack.

    ``eps`` total L2 budget, ``n_iter`` iterations, ``lr`` Adam learning rate,
    ``alpha``/``beta`` objective weights, ``mu`` density / falloff scale,
    ``sigma`` number of sticks or sinks, ``kappa`` resampled points, ``tau``
    Hausdorff bound, ``lambda_*`` binary-search settings, ``dropout`` points
    dropped per iteration (iterative L2 variant), ``resample_every`` alpha-shape
    refresh cadence for perturbation resampling.
    """

    kind: str = "iter_grad_l2"
    eps: float = 2.0
    n_iter: int = 100
    lr: float = 0.1
    alpha: float = 0.0
    beta: float = 0.0
    mu: float = 1.0
    sigma: int = 0
    kappa: int = 0
    tau: float = 0.0
    lambda_lo: float = 1e-3
    lambda_hi: float = 1e3
    lambda_steps: int = 10
    dropout: int = 0
    resample_every: int = 1
    sink_step: float = 0.05
    seed: int = 0
    label: str = ""

    def __post_init__(self):
        if self.kind not in ATTACKS:
            raise ValueError(f"unknown attack {self.kind!r}; choose from {ATTACKS}")
        if self.n_iter < 0 or self.eps < 0 or self.tau < 0:
            raise ValueError("n_iter, eps and tau must be non-negative")
        if not 0 < self.lambda_lo <= self.lambda_hi or self.lambda_steps < 1:
            raise ValueError("lambda search needs 0 < lo <= hi and at least one step")
        if self.sigma < 0 or self.kappa < 0 or self.dropout < 0 or self.resample_every < 1:
            raise ValueError("counts must be non-negative")

    @property
    def name(self) -> str:
        return self.label or self.kind

    def with_(self, **changes) -> "AttackConfig":
        return replace(self, **changes)


def default_config(kind: str, **overrides) -> AttackConfig:
    """Default hyperparameters of each attack at N = 1024."""
    defaults: dict[str, dict[str, Any]] = {
        "none": {},
        "iter_grad_l2": dict(eps=2.0, n_iter=100),
        "chamfer": dict(n_iter=20, lr=0.1, alpha=0.002),
        "gradient_projection": dict(eps=1.0, tau=0.05, n_iter=20),
        "perturbation_resampling": dict(eps=2.0, kappa=500, n_iter=100),
        "adversarial_sticks": dict(n_iter=20, lr=0.1, alpha=0.01, sigma=100, mu=2.0),
        "adversarial_sinks": dict(n_iter=20, lr=0.1, mu=7.0, alpha=5.0, beta=1.0, sigma=30),
    }
    if kind not in defaults:
        raise ValueError(f"unknown attack {kind!r}")
    return AttackConfig(kind=kind, **{**defaults[kind], **overrides})


ATTACK_FIELDS = tuple(f.name for f in fields(AttackConfig) if f.name not in ("kind", "label", "seed"))


@dataclass
class AttackResult:
    """Adversarial cloud plus bookkeeping.

    ``hausdorff`` is the one-sided distance to the benign surface and is None
    when no surface was supplied. ``extras`` holds attack-specific artifacts
    (resampled indices, sticks, sinks, final surface, ...).
    """

    cloud: np.ndarray
    success: bool
    predicted: int
    chamfer: float
    hausdorff: float | None
    l2: float
    iterations: int
    lam: float | None = None
    extras: dict[str, Any] = field(default_factory=dict)


def finalize(
    params: net.ClassifierParams,
    benign: np.ndarray,
    adv: np.ndarray,
    y: int,
    iterations: int,
    mesh: TriangleMesh | None = None,
    index: TriangleIndex | None = None,
    lam: float | None = None,
    **extras,
) -> AttackResult:
    """Classify ``adv`` afresh and compute perceptibility metrics."""
    pred = net.predict(params, adv)
    haus = hausdorff_to_surface(adv, mesh, index) if mesh is not None else None
    return AttackResult(
        cloud=adv,
        success=pred != y,
        predicted=pred,
        chamfer=chamfer_distance(adv, benign),
        hausdorff=haus,
        l2=float(np.linalg.norm(adv - benign)),
        iterations=iterations,
        lam=lam,
        extras=dict(extras),
    )


def binary_search_lambda(
    run: Callable[[float], AttackResult],
    lo: float = 1e-3,
    hi: float = 1e3,
    steps: int = 10,
    key: Callable[[AttackResult], float] = lambda r: r.chamfer,
) -> tuple[float, AttackResult]:
    """Bracketing search over the penalty weight in log space.

    Starts at the geometric mean of [lo, hi]. A success moves the lower end up
    (try a larger penalty, i.e. less perturbation); a failure moves the upper
    end down. Returns the least perceptible success (by ``key``; later probes
    win ties), otherwise the last failure.
    """
    if not 0 < lo <= hi or steps < 1:
        raise ValueError("need 0 < lo <= hi and steps >= 1")
    log_lo, log_hi = math.log(lo), math.log(hi)
    best: tuple[float, AttackResult] | None = None
    last: tuple[float, AttackResult] | None = None
    for _ in range(steps):
        lam = math.exp(0.5 * (log_lo + log_hi))
        result = run(lam)
        result.lam = lam
        last = (lam, result)
        if result.success:
            if best is None or key(result) <= key(best[1]):
                best = (lam, result)
            log_lo = math.log(lam)
        else:
            log_hi = math.log(lam)
    assert last is not None
    return best if best is not None else last


def l2_step(gradient: np.ndarray, length: float) -> np.ndarray:
    """``gradient`` rescaled to global L2 norm ``length`` (zero stays zero)."""
    norm = float(np.linalg.norm(gradient))
    if norm == 0.0 or length == 0.0:
        return np.zeros_like(gradient)
    return gradient * (length / norm)
