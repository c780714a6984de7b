"""Distributional attacks: iterative gradient L2, Chamfer, gradient projection."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .. import net
from ..adam import AdamState, adam_step
from ..geometry import TriangleIndex, TriangleMesh, chamfer_gradient
from .common import AttackConfig, AttackResult, binary_search_lambda, finalize, l2_step

Callback = Callable[[int, np.ndarray], None]


def iter_grad_l2(
    params: net.ClassifierParams,
    cloud,
    y: int,
    cfg: AttackConfig,
    rng: np.random.Generator | None = None,
    mesh: TriangleMesh | None = None,
) -> AttackResult:
    """``n_iter`` ascent steps on the loss, each of global L2 length eps / n_iter.

    With ``cfg.dropout`` > 0, each step's gradient is computed on a random
    subset of N - dropout points; dropped points do not move that step.
    """
    x = np.asarray(cloud, dtype=float)
    adv = x.copy()
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    n = len(x)
    if cfg.dropout >= n:
        raise ValueError("dropout must leave at least one point")
    step_len = cfg.eps / cfg.n_iter if cfg.n_iter else 0.0
    budget = 0.0
    for _ in range(cfg.n_iter if cfg.eps > 0 else 0):
        if cfg.dropout:
            keep = np.sort(rng.choice(n, n - cfg.dropout, replace=False))
            grad = np.zeros_like(adv)
            grad[keep] = net.input_gradient(params, adv[keep], y)
        else:
            grad = net.input_gradient(params, adv, y)
        step = l2_step(grad, step_len)
        budget += float(np.linalg.norm(step))
        adv = adv + step
    return finalize(params, x, adv, y, cfg.n_iter, mesh, step_norm_total=budget)


def _chamfer_objective_grad(params, x, adv, delta_p, y, lam, alpha):
    """Gradient of J(x + d') - lam * (C(x + d', x) + alpha * ||d'||) w.r.t. d'.

    Also returns the class probabilities and the Chamfer distance at ``adv``.
    """
    _, g_loss, probs = net.loss_and_input_gradient(params, adv, y)
    ch, g_ch = chamfer_gradient(adv, x)
    norm = float(np.linalg.norm(delta_p))
    g_l2 = delta_p / norm if norm > 0 else np.zeros_like(delta_p)
    return g_loss - lam * (g_ch + alpha * g_l2), probs, ch


def chamfer_attack(
    params: net.ClassifierParams,
    cloud,
    y: int,
    cfg: AttackConfig,
    mesh: TriangleMesh | None = None,
    callback: Callback | None = None,
) -> AttackResult:
    """Adam on J - lam (Chamfer + alpha L2) over d with d' = tanh(d).

    The penalty weight lam is binary searched; the least-Chamfer successful
    iterate is returned, else the final iterate of the last probe.
    """
    x = np.asarray(cloud, dtype=float)
    if cfg.n_iter == 0:
        return finalize(params, x, x.copy(), y, 0, mesh)

    def run(lam: float) -> AttackResult:
        delta = np.zeros_like(x)
        state = AdamState(lr=cfg.lr)
        best_adv, best_ch, best_t = None, np.inf, 0
        for t in range(cfg.n_iter + 1):
            dp = np.tanh(delta)
            if callback is not None:
                callback(t, dp)
            adv = x + dp
            grad, probs, ch = _chamfer_objective_grad(params, x, adv, dp, y, lam, cfg.alpha)
            if int(np.argmax(probs)) != y and ch < best_ch:
                best_adv, best_ch, best_t = adv, ch, t
            if t == cfg.n_iter:
                break
            delta = adam_step(state, delta, grad * (1.0 - dp * dp), ascend=True)
        if best_adv is None:
            return finalize(params, x, adv, y, cfg.n_iter)
        return finalize(params, x, best_adv, y, best_t)

    lam, result = binary_search_lambda(run, cfg.lambda_lo, cfg.lambda_hi, cfg.lambda_steps)
    return finalize(params, x, result.cloud, y, result.iterations, mesh, lam=lam)


def clamp_to_surface_band(points, index: TriangleIndex, tau: float) -> np.ndarray:
    """Pull every point farther than ``tau`` from the surface back to distance tau."""
    closest, dist, _ = index.nearest(points)
    out = np.array(points, dtype=float)
    far = dist > tau
    if tau == 0.0:
        out[far] = closest[far]
    else:
        out[far] = closest[far] + tau * (out[far] - closest[far]) / dist[far, None]
    return out


def gradient_projection(
    params: net.ClassifierParams,
    cloud,
    mesh: TriangleMesh,
    y: int,
    cfg: AttackConfig,
    index: TriangleIndex | None = None,
) -> AttackResult:
    """Plain L2-bounded gradient steps, each followed by a projection onto the
    set of points within ``tau`` of the benign surface (no momentum)."""
    x = np.asarray(cloud, dtype=float)
    index = index or TriangleIndex(mesh)
    adv = x.copy()
    step_len = cfg.eps / cfg.n_iter if cfg.n_iter else 0.0
    budget = 0.0
    for _ in range(cfg.n_iter):
        step = l2_step(net.input_gradient(params, adv, y), step_len)
        budget += float(np.linalg.norm(step))
        adv = clamp_to_surface_band(adv + step, index, cfg.tau)
    return finalize(params, x, adv, y, cfg.n_iter, mesh, index, step_norm_total=budget)
