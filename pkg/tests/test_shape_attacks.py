import numpy as np
import pytest

from shapeattacks import net
from shapeattacks.attacks import (
    AttackConfig,
    adversarial_sinks,
    adversarial_sticks,
    default_config,
    perturbation_resampling,
    sink_displacement,
    sinks_objective,
    stick_budget,
    stick_point_counts,
    stick_points,
)
from shapeattacks.attacks.shape import build_sticks, init_sinks, sink_falloff_scale, sink_weights
from shapeattacks.geometry import TriangleIndex, estimate_surface, farthest_point_sample, mean_nn_distance, surface_distance

from oracles import central_difference, relative_error


# ------------------------------------------------------------------ sticks
def test_stick_budget_and_split():
    lengths = [0.3, 0.5]
    kappa = stick_budget(lengths, 0.1)
    assert kappa == 8
    assert stick_point_counts(lengths, kappa).tolist() == [3, 5]


def test_stick_split_sums_and_is_proportional():
    rng = np.random.default_rng(0)
    for _ in range(50):
        lengths = rng.uniform(0, 1, size=rng.integers(1, 20))
        kappa = int(rng.integers(0, 100))
        counts = stick_point_counts(lengths, kappa)
        assert counts.sum() == (kappa if lengths.sum() > 0 else 0)
        share = kappa * lengths / lengths.sum()
        assert np.all(np.abs(counts - share) < 1.0)


def test_stick_points_exclude_base_include_tip():
    pts = stick_points(np.zeros((1, 3)), np.array([[0.0, 0, 1.0]]), np.array([4]))
    np.testing.assert_allclose(pts[:, 2], [0.25, 0.5, 0.75, 1.0])


def test_build_sticks_structure(correct_sample):
    x, _, _ = correct_sample
    mesh, _ = estimate_surface(x)
    index = TriangleIndex(mesh)
    tips = x[:5] + np.array([0.3, 0.0, 0.0])
    adv, info = build_sticks(x, tips, index, mu=2.0)
    assert adv.shape == x.shape
    assert surface_distance(info["stick_bases"], mesh, index).max() < 1e-6
    kappa = info["kappa"]
    assert kappa == stick_budget(np.linalg.norm(info["stick_vectors"], axis=1), mean_nn_distance(x) / 2.0)
    # kept points are the FPS selection of the benign cloud, at their original indices
    kept = info["kept"]
    assert len(kept) == len(x) - kappa
    assert set(kept.tolist()) == set(farthest_point_sample(x, len(x) - kappa).tolist())
    assert np.array_equal(adv[kept], x[kept])


def test_build_sticks_clamps_kappa(correct_sample):
    x, _, _ = correct_sample
    index = TriangleIndex(estimate_surface(x)[0])
    tips = x[:3] + 50.0
    adv, info = build_sticks(x, tips, index, mu=2.0)
    assert info["kappa_clamped"] and info["kappa"] == len(x)
    assert adv.shape == x.shape


def test_sticks_attack_invariants(small_model, correct_sample):
    x, y, _ = correct_sample
    mesh, _ = estimate_surface(x)
    index = TriangleIndex(mesh)
    bounds = []
    cfg = default_config("adversarial_sticks", sigma=20, n_iter=6, lambda_steps=3)
    res = adversarial_sticks(small_model, x, mesh, y, cfg, index, callback=lambda t, dp: bounds.append(np.abs(dp).max()))
    assert max(bounds) < 0.5
    assert len(res.cloud) == len(x)
    assert np.all(np.abs(res.extras["stick_vectors"]) < 0.5 + 1e-6)
    assert surface_distance(res.extras["stick_bases"], mesh, index).max() < 1e-6
    assert res.success == (net.predict(small_model, res.cloud) != y)
    again = adversarial_sticks(small_model, x, mesh, y, cfg, index)
    assert np.array_equal(res.cloud, again.cloud)


def test_sticks_sigma_too_large(small_model, correct_sample):
    x, y, mesh = correct_sample
    with pytest.raises(ValueError):
        adversarial_sticks(small_model, x, mesh, y, default_config("adversarial_sticks", sigma=len(x) + 1))


# ------------------------------------------------------------------- sinks
def test_sinks_zero_sigma_identity(small_model, correct_sample):
    x, y, _ = correct_sample
    res = adversarial_sinks(small_model, x, y, default_config("adversarial_sinks", sigma=0, lambda_steps=2))
    assert np.array_equal(res.cloud, x)
    np.testing.assert_array_equal(sink_displacement(x, np.zeros((0, 3)), np.zeros((0, 3)), 0.1), x)


def test_sink_displacement_reproduces_result(small_model, correct_sample):
    x, y, _ = correct_sample
    bounds = []
    cfg = default_config("adversarial_sinks", sigma=8, n_iter=6, lambda_steps=3)
    res = adversarial_sinks(small_model, x, y, cfg, callback=lambda t, d: bounds.append(np.abs(d).max()))
    assert max(bounds) < 1.0
    rebuilt = sink_displacement(x, res.extras["sinks"], res.extras["sinks_initial"], res.extras["mu_prime"])
    assert np.abs(rebuilt - res.cloud).max() < 1e-12
    assert res.extras["mu_prime"] == pytest.approx(7.0 * mean_nn_distance(x))
    assert res.success == (net.predict(small_model, res.cloud) != y)


def test_sink_initialisation(small_model, correct_sample):
    x, y, _ = correct_sample
    s0 = init_sinks(small_model, x, y, 6, step=0.05)
    assert s0.shape == (6, 3)
    # each sink is a salient point nudged by at most the step size
    d = np.linalg.norm(x[:, None] - s0[None], axis=2).min(axis=0)
    assert np.all(d <= 0.05 + 1e-12)
    sal = np.linalg.norm(net.input_gradient(small_model, x, y), axis=1)
    top = np.argmax(sal)
    g = net.input_gradient(small_model, x, y)[top]
    np.testing.assert_allclose(s0[0], x[top] + 0.05 * g / np.linalg.norm(g))


@pytest.mark.parametrize("case", range(4))
def test_sinks_objective_gradient(case):
    rng = np.random.default_rng(case)
    params = net.init_params(4, rng)
    x = rng.normal(size=(40, 3)) * 0.5
    s0 = x[rng.choice(40, 5, replace=False)] + rng.normal(scale=0.05, size=(5, 3))
    s = s0 + rng.normal(scale=0.1, size=(5, 3))
    mu = sink_falloff_scale(x, 3.0)
    w = sink_weights(x, s0, mu)
    lam, alpha, beta = 0.7, 2.0, 1.5
    _, grad, _ = sinks_objective(params, x, case % 4, s, s0, w, lam, alpha, beta)
    fd = central_difference(lambda z: sinks_objective(params, x, case % 4, z, s0, w, lam, alpha, beta)[0], s)
    for e, v in fd.items():
        assert relative_error(grad.reshape(-1)[e], v) < 1e-4


# ------------------------------------------------------------ resampling
def test_resampling_invariants(small_model, correct_sample):
    x, y, _ = correct_sample
    cfg = default_config("perturbation_resampling", kappa=100, n_iter=6, eps=1.0)
    res = perturbation_resampling(small_model, x, y, cfg, np.random.default_rng(0))
    assert res.cloud.shape == x.shape
    surf = res.extras["surface"]
    idx = res.extras["resampled"]
    assert len(idx) == 100
    assert surface_distance(res.cloud[idx], surf).max() < 1e-6
    assert res.extras["step_norm_total"] <= cfg.eps + 1e-9
    again = perturbation_resampling(small_model, x, y, cfg, np.random.default_rng(0))
    assert np.array_equal(res.cloud, again.cloud)


def test_resampling_keeps_high_saliency_points(small_model, correct_sample):
    x, y, _ = correct_sample
    cfg = AttackConfig("perturbation_resampling", eps=0.0, n_iter=1, kappa=50)
    res = perturbation_resampling(small_model, x, y, cfg, np.random.default_rng(0))
    sal = np.linalg.norm(net.input_gradient(small_model, x, y), axis=1)
    low = set(np.argsort(-sal, kind="stable")[len(x) - 50 :].tolist())
    assert set(res.extras["resampled"].tolist()) == low
    kept = np.setdiff1d(np.arange(len(x)), res.extras["resampled"])
    assert np.array_equal(res.cloud[kept], x[kept])


def test_resampling_kappa_bounds(small_model, correct_sample):
    x, y, _ = correct_sample
    with pytest.raises(ValueError):
        perturbation_resampling(small_model, x, y, AttackConfig("perturbation_resampling", kappa=len(x) + 1))
    res = perturbation_resampling(small_model, x, y, AttackConfig("perturbation_resampling", kappa=0, n_iter=3, eps=0.3))
    assert res.extras["surface"] is None and len(res.extras["resampled"]) == 0
