"""Shape attacks: perturbation resampling, adversarial sticks, adversarial sinks."""

from __future__ import annotations

import logging
from typing import Callable

import numpy as np

from .. import net
from ..adam import AdamState, adam_step
from ..geometry import (
    DegenerateInputError,
    TriangleIndex,
    TriangleMesh,
    chamfer_gradient,
    estimate_surface,
    farthest_point_sample,
    mean_nn_distance,
    sample_on_mesh,
)
from .common import AttackConfig, AttackResult, binary_search_lambda, finalize, l2_step

log = logging.getLogger(__name__)

Callback = Callable[[int, np.ndarray], None]

# candidate surface samples per cloud point when resampling onto a surface
CANDIDATES_PER_POINT = 4


def _top_k(scores: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest scores; ties go to the lower index."""
    return np.argsort(-scores, kind="stable")[:k]


# -------------------------------------------------------- perturbation resampling
def resample_onto_surface(
    cloud: np.ndarray, keep: np.ndarray, surface: TriangleMesh, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Replace every point not in ``keep`` by farthest-point samples on ``surface``.

    Kept points seed the sampling; candidates are drawn area-uniformly (4 per
    cloud point). Returns the new cloud and the indices that were replaced.
    """
    n = len(cloud)
    replaced = np.setdiff1d(np.arange(n), keep)
    if len(replaced) == 0:
        return cloud.copy(), replaced
    candidates = sample_on_mesh(surface, CANDIDATES_PER_POINT * n, rng)
    pool = np.concatenate([cloud[keep], candidates])
    picked = farthest_point_sample(pool, n, seeds=np.arange(len(keep)))
    out = cloud.copy()
    out[replaced] = pool[picked[len(keep) :]]
    return out, replaced


def perturbation_resampling(
    params: net.ClassifierParams,
    cloud,
    y: int,
    cfg: AttackConfig,
    rng: np.random.Generator | None = None,
    mesh: TriangleMesh | None = None,
) -> AttackResult:
    """L2-bounded gradient steps interleaved with resampling onto the perturbed shape.

    After each step (or every ``cfg.resample_every`` steps, always including the
    last) the alpha shape of the perturbed cloud is computed and the ``kappa``
    points with the lowest loss saliency are resampled onto it by farthest
    point sampling, seeded with the points that stay.
    """
    x = np.asarray(cloud, dtype=float)
    n = len(x)
    if cfg.kappa > n:
        raise ValueError(f"kappa={cfg.kappa} exceeds the cloud size {n}")
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    adv = x.copy()
    step_len = cfg.eps / cfg.n_iter if cfg.n_iter else 0.0
    budget = 0.0
    surface, replaced, failed = None, np.zeros(0, dtype=np.intp), False
    for t in range(cfg.n_iter):
        step = l2_step(net.input_gradient(params, adv, y), step_len)
        budget += float(np.linalg.norm(step))
        adv = adv + step
        refresh = (t + 1) % cfg.resample_every == 0 or t == cfg.n_iter - 1
        if cfg.kappa == 0 or not refresh:
            continue
        try:
            surface, _ = estimate_surface(adv)
        except (DegenerateInputError, ValueError) as exc:
            log.warning("surface estimation failed at step %d: %s", t, exc)
            failed = True
            break
        sal = np.linalg.norm(net.input_gradient(params, adv, y), axis=1)
        keep = np.sort(_top_k(sal, n - cfg.kappa))
        adv, replaced = resample_onto_surface(adv, keep, surface, rng)
    result = finalize(
        params, x, adv, y, cfg.n_iter, mesh,
        step_norm_total=budget, surface=surface, resampled=replaced, triangulation_failed=failed,
    )
    if failed:
        result.success = False
    return result


# ---------------------------------------------------------------- adversarial sticks
def stick_point_counts(lengths, kappa: int) -> np.ndarray:
    """Split ``kappa`` points over sticks proportionally to their lengths.

    Largest-remainder rounding; remainder ties go to the lower stick index.
    """
    lengths = np.asarray(lengths, dtype=float)
    total = lengths.sum()
    if kappa <= 0 or total <= 0:
        return np.zeros(len(lengths), dtype=int)
    share = kappa * lengths / total
    counts = np.floor(share).astype(int)
    short = kappa - int(counts.sum())
    if short > 0:
        counts[np.argsort(-(share - counts), kind="stable")[:short]] += 1
    return counts


def stick_budget(lengths, mu_prime: float) -> int:
    """Number of points the sticks receive: floor(total length / mu')."""
    return int(np.floor(float(np.sum(lengths)) / mu_prime))


def stick_points(bases: np.ndarray, vectors: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Points evenly spaced along each stick, excluding the base, including the tip."""
    out = [
        base + (np.arange(1, c + 1) / c)[:, None] * vec
        for base, vec, c in zip(bases, vectors, counts)
        if c > 0
    ]
    return np.concatenate(out) if out else np.zeros((0, 3))


def build_sticks(x: np.ndarray, tips: np.ndarray, index: TriangleIndex, mu: float) -> tuple[np.ndarray, dict]:
    """Anchor sticks on the surface under ``tips`` and resample the cloud onto them.

    The N - kappa points kept from ``x`` are chosen by farthest point sampling
    and stay at their indices; the freed indices receive the stick points.
    """
    n = len(x)
    bases = index.nearest(tips)[0]
    vectors = tips - bases
    lengths = np.linalg.norm(vectors, axis=1)
    mu_prime = mean_nn_distance(x) / mu
    kappa = stick_budget(lengths, mu_prime)
    clamped = kappa > n
    kappa = min(kappa, n)
    counts = stick_point_counts(lengths, kappa)
    keep = np.sort(farthest_point_sample(x, n - kappa)) if kappa < n else np.zeros(0, dtype=np.intp)
    freed = np.setdiff1d(np.arange(n), keep)
    adv = x.copy()
    adv[freed] = stick_points(bases, vectors, counts)
    info = dict(
        stick_bases=bases, stick_vectors=vectors, stick_counts=counts,
        kappa=kappa, kappa_clamped=clamped, kept=keep, mu_prime=mu_prime,
    )
    return adv, info


def adversarial_sticks(
    params: net.ClassifierParams,
    cloud,
    mesh: TriangleMesh,
    y: int,
    cfg: AttackConfig,
    index: TriangleIndex | None = None,
    callback: Callback | None = None,
) -> AttackResult:
    """Perturb the ``sigma`` most salient points (masked Adam, d' = tanh(d) / 2)
    under a Chamfer + L2 penalty, then turn them into surface-anchored sticks."""
    x = np.asarray(cloud, dtype=float)
    n = len(x)
    if cfg.sigma > n:
        raise ValueError(f"sigma={cfg.sigma} exceeds the cloud size {n}")
    index = index or TriangleIndex(mesh)
    sal = net.saliency(params, x, y, kind="loss")
    chosen = np.sort(_top_k(sal, cfg.sigma))

    def run(lam: float) -> AttackResult:
        delta = np.zeros((len(chosen), 3))
        state = AdamState(lr=cfg.lr)
        for t in range(cfg.n_iter + 1):
            dp = 0.5 * np.tanh(delta)
            if callback is not None:
                callback(t, dp)
            if t == cfg.n_iter:
                break
            moved = x[chosen] + dp
            adv = x.copy()
            adv[chosen] = moved
            g_loss = net.input_gradient(params, adv, y)[chosen]
            _, g_ch = chamfer_gradient(moved, x)
            norm = float(np.linalg.norm(dp))
            g_l2 = dp / norm if norm > 0 else np.zeros_like(dp)
            grad = g_loss - lam * (g_ch + cfg.alpha * g_l2)
            delta = adam_step(state, delta, grad * 0.5 * (1.0 - 4.0 * dp * dp), ascend=True)
        adv, info = build_sticks(x, x[chosen] + dp, index, cfg.mu)
        return finalize(params, x, adv, y, cfg.n_iter, stick_points_from=chosen, **info)

    lam, result = binary_search_lambda(run, cfg.lambda_lo, cfg.lambda_hi, cfg.lambda_steps)
    return finalize(params, x, result.cloud, y, result.iterations, mesh, index, lam=lam, **result.extras)


# ---------------------------------------------------------------- adversarial sinks
def sink_falloff_scale(x: np.ndarray, mu: float) -> float:
    """mu' = mu * mean nearest-neighbour distance of the benign cloud."""
    return mu * mean_nn_distance(x)


def sink_weights(x: np.ndarray, s0: np.ndarray, mu_prime: float) -> np.ndarray:
    """Gaussian RBF weights exp(-(|s0_j - x_i| / mu')^2), shape (N, sigma)."""
    d = np.linalg.norm(x[:, None, :] - s0[None, :, :], axis=2)
    return np.exp(-((d / mu_prime) ** 2))


def sink_displacement(x, s, s0, mu_prime: float) -> np.ndarray:
    """Deformed cloud x_i + tanh(sum_j (s_j - x_i) phi(|s0_j - x_i|))."""
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float).reshape(-1, 3)
    w = sink_weights(x, np.asarray(s0, dtype=float).reshape(-1, 3), mu_prime)
    return x + np.tanh(w @ s - w.sum(axis=1)[:, None] * x)


def init_sinks(
    params: net.ClassifierParams, x: np.ndarray, y: int, sigma: int, step: float = 0.05, pool: int | None = None
) -> np.ndarray:
    """Initial sink positions.

    The ``pool`` (default 4 sigma) most salient points are nudged along their
    loss gradient by ``step * saliency / max saliency``; farthest point
    sampling, starting from the most salient, then picks ``sigma`` of them.
    """
    if sigma == 0:
        return np.zeros((0, 3))
    grad = net.input_gradient(params, x, y)
    sal = np.linalg.norm(grad, axis=1)
    pool = min(len(x), pool if pool is not None else 4 * sigma)
    top = _top_k(sal, max(pool, sigma))
    peak = sal[top[0]]
    with np.errstate(invalid="ignore", divide="ignore"):
        direction = np.where(sal[top, None] > 0, grad[top] / sal[top, None], 0.0)
    scale = step * (sal[top] / peak if peak > 0 else np.zeros(len(top)))
    nudged = x[top] + scale[:, None] * direction
    return nudged[farthest_point_sample(nudged, sigma)]


def sinks_objective(params, x, y, s, s0, weights, lam, alpha, beta) -> tuple[float, np.ndarray, np.ndarray]:
    """Value and s-gradient of
    J(x*) - lam (||x* - x|| + alpha max_i |s_i - s0_i| - beta min_{i!=j} |s_i - s_j|).

    Also returns the class probabilities at x*.
    """
    disp = np.tanh(weights @ s - weights.sum(axis=1)[:, None] * x)
    adv = x + disp
    loss, g_loss, probs = net.loss_and_input_gradient(params, adv, y)
    l2 = float(np.linalg.norm(disp))
    g_adv = g_loss - lam * (disp / l2 if l2 > 0 else 0.0)
    grad = weights.T @ (g_adv * (1.0 - disp * disp))
    value = loss - lam * l2

    if len(s):
        drift = np.linalg.norm(s - s0, axis=1)
        k = int(np.argmax(drift))
        value -= lam * alpha * drift[k]
        if drift[k] > 0:
            grad[k] -= lam * alpha * (s[k] - s0[k]) / drift[k]
    if len(s) >= 2:
        d = np.linalg.norm(s[:, None, :] - s[None, :, :], axis=2)
        d[np.diag_indices(len(s))] = np.inf
        i, j = np.unravel_index(int(np.argmin(d)), d.shape)
        value += lam * beta * d[i, j]
        if d[i, j] > 0:
            u = (s[i] - s[j]) / d[i, j]
            grad[i] += lam * beta * u
            grad[j] -= lam * beta * u
    return value, grad, probs


def adversarial_sinks(
    params: net.ClassifierParams,
    cloud,
    y: int,
    cfg: AttackConfig,
    mesh: TriangleMesh | None = None,
    callback: Callback | None = None,
) -> AttackResult:
    """Move ``sigma`` sink points with Adam; each pulls nearby points through a
    Gaussian falloff around its initial position. The penalty weight is binary
    searched; the least-L2 successful iterate wins."""
    x = np.asarray(cloud, dtype=float)
    s0 = init_sinks(params, x, y, cfg.sigma, cfg.sink_step)
    mu_prime = sink_falloff_scale(x, cfg.mu)
    weights = sink_weights(x, s0, mu_prime)

    def run(lam: float) -> AttackResult:
        s = s0.copy()
        state = AdamState(lr=cfg.lr)
        best_s, best_l2, best_t = None, np.inf, 0
        for t in range(cfg.n_iter + 1):
            _, grad, probs = sinks_objective(params, x, y, s, s0, weights, lam, cfg.alpha, cfg.beta)
            disp = np.tanh(weights @ s - weights.sum(axis=1)[:, None] * x)
            if callback is not None:
                callback(t, disp)
            l2 = float(np.linalg.norm(disp))
            if int(np.argmax(probs)) != y and l2 < best_l2:
                best_s, best_l2, best_t = s.copy(), l2, t
            if t == cfg.n_iter or len(s) == 0:
                break
            s = adam_step(state, s, grad, ascend=True)
        final_s = best_s if best_s is not None else s
        adv = x + np.tanh(weights @ final_s - weights.sum(axis=1)[:, None] * x)
        return finalize(params, x, adv, y, best_t if best_s is not None else cfg.n_iter, sinks=final_s)

    lam, result = binary_search_lambda(
        run, cfg.lambda_lo, cfg.lambda_hi, cfg.lambda_steps, key=lambda r: r.l2
    )
    return finalize(
        params, x, result.cloud, y, result.iterations, mesh, lam=lam,
        sinks=result.extras["sinks"], sinks_initial=s0, mu_prime=mu_prime,
    )
