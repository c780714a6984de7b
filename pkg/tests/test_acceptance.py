"""Acceptance gate: ten criteria on the synthetic bench, one PASS/FAIL line each.

Run alone with ``pytest -m acceptance -s``; the lines are also repeated in
the terminal summary of any pytest run. The full gate takes about an hour on
one CPU core, most of it in the defended-trend and blending runs and their
determinism reruns.
"""

import time

import numpy as np
import pytest
from scipy.spatial import cKDTree

from shapeattacks import net
from shapeattacks.attacks import (
    AttackConfig,
    adversarial_sinks,
    adversarial_sticks,
    chamfer_attack,
    gradient_projection,
    default_config,
)
from shapeattacks.bench.datasets import icosphere, synthetic_splits
from shapeattacks.bench.experiment import ExperimentConfig, run_experiment, run_sweep
from shapeattacks.defenses import DefenseConfig, outlier_mask
from shapeattacks.geometry import (
    TriangleIndex,
    VPTree,
    delaunay_3d,
    estimate_surface,
    hausdorff_to_surface,
    project_to_surface,
)

from acceptance_log import report
from oracles import (
    central_difference,
    dense_mesh_samples,
    insphere_violations,
    knn_scan,
    outlier_survivors,
    relative_error,
)

pytestmark = pytest.mark.acceptance

SAMPLES = 100
DEFENSES = [DefenseConfig("none"), DefenseConfig("random_remove"), DefenseConfig("outlier_remove"), DefenseConfig("salient_remove")]
RESAMPLE = default_config("perturbation_resampling", resample_every=5)


@pytest.fixture(scope="module")
def bench():
    return synthetic_splits(seed=0)


@pytest.fixture(scope="module")
def trained(bench):
    train, _ = bench
    start = time.perf_counter()
    params, _ = net.train(train.clouds, train.labels, len(train.class_names), rng=np.random.default_rng(0))
    return params, time.perf_counter() - start


@pytest.fixture(scope="module")
def model(trained):
    return trained[0]


@pytest.fixture(scope="module")
def correct(bench, model):
    """Up to SAMPLES correctly classified test samples: (cloud, label) pairs."""
    _, test = bench
    idx = np.flatnonzero(net.predict_batch(model, test.clouds) == test.labels)[:SAMPLES]
    return [(test.clouds[i], int(test.labels[i])) for i in idx]


# The experiment runs of criteria 5-8, keyed by name, so criterion 10 can repeat them.
def _undefended_strength(model, test):
    cfg = ExperimentConfig(
        attacks=[AttackConfig("none"), default_config("iter_grad_l2"), default_config("adversarial_sinks")],
        defenses=DEFENSES,
        sample_limit=SAMPLES,
    )
    return run_experiment(cfg, model, test)


def _defended_trend(model, test):
    cfg = ExperimentConfig(
        attacks=[default_config("iter_grad_l2"), RESAMPLE, default_config("adversarial_sticks")],
        defenses=[DefenseConfig("none"), DefenseConfig("outlier_remove"), DefenseConfig("salient_remove")],
        sample_limit=SAMPLES,
    )
    return run_experiment(cfg, model, test)


def _eps_sweep(model, test):
    cfg = ExperimentConfig(attacks=[default_config("iter_grad_l2")], sample_limit=SAMPLES)
    return run_sweep(cfg, "eps", [1.0, 2.0, 3.0], model, test)


def _kappa_sweep(model, test):
    cfg = ExperimentConfig(attacks=[RESAMPLE], defenses=[DefenseConfig("outlier_remove")], sample_limit=SAMPLES)
    return run_sweep(cfg, "kappa", [0, 250, 500], model, test)


RUNS = {
    "undefended_strength": _undefended_strength,
    "defended_trend": _defended_trend,
    "eps_sweep": _eps_sweep,
    "kappa_sweep": _kappa_sweep,
}
TABLES: dict = {}
SECONDS: dict = {}


def _table(name, model, test):
    if name not in TABLES:
        start = time.perf_counter()
        TABLES[name] = RUNS[name](model, test)
        SECONDS[name] = time.perf_counter() - start
    return TABLES[name]


# ---------------------------------------------------------------------------
def test_criterion_01_gradients_match_finite_differences():
    start = time.perf_counter()
    worst_input = worst_param = 0.0
    for case in range(10):
        rng = np.random.default_rng(1000 + case)
        params = net.init_params(4, rng)
        params = net.ClassifierParams(params.weights, [rng.normal(scale=0.1, size=b.shape) for b in params.biases])
        x = rng.normal(size=(16, 3))
        y = case % 4
        g = net.input_gradient(params, x, y)
        fd = central_difference(lambda c: net.cross_entropy(net.forward(params, c).probs, y), x)
        worst_input = max(worst_input, max(relative_error(g.reshape(-1)[e], v) for e, v in fd.items()))

        clouds, labels = rng.normal(size=(3, 12, 3)), np.array([0, 1, 3])
        _, dw, db, _ = net.loss_and_param_gradients(params, clouds, labels)
        for layer in range(len(params.weights)):
            for grads, which in ((dw, 0), (db, 1)):
                arr = (params.weights, params.biases)[which][layer]
                entries = rng.choice(arr.size, size=min(6, arr.size), replace=False)

                def loss(a, layer=layer, which=which):
                    ws, bs = list(params.weights), list(params.biases)
                    (ws, bs)[which][layer] = a
                    return net.loss_and_param_gradients(net.ClassifierParams(ws, bs), clouds, labels)[0]

                fd = central_difference(loss, arr, entries=entries)
                worst_param = max(worst_param, max(relative_error(grads[layer].reshape(-1)[e], v) for e, v in fd.items()))
    seconds = time.perf_counter() - start
    ok = worst_input < 1e-4 and worst_param < 1e-4 and seconds < 30
    report(1, ok, f"worst relative error input {worst_input:.1e}, params {worst_param:.1e}; {seconds:.1f}s")
    assert ok


def test_criterion_02_geometry_oracles():
    start = time.perf_counter()
    rng = np.random.default_rng(2)

    pts = rng.normal(size=(500, 3))
    queries = rng.normal(size=(100, 3))
    tree = VPTree(pts)
    knn_ok = all(
        tree.query(queries, k)[1][q].tolist() == knn_scan(pts, queries[q], k)[0] for k in (1, 5, 10) for q in range(100)
    )

    violations = 0
    for trial in range(20):
        cloud = np.random.default_rng(200 + trial).uniform(-1, 1, size=(20, 3))
        violations += insphere_violations(cloud, delaunay_3d(cloud), tol=1e-9)

    mesh = icosphere(1)
    dense = cKDTree(dense_mesh_samples(mesh.vertices, mesh.faces, 300))  # grid spacing ~0.002
    probes = rng.normal(size=(200, 3)) * 0.8
    ours = np.linalg.norm(project_to_surface(probes, mesh) - probes, axis=1)
    projection_gap = float(np.max(np.abs(ours - dense.query(probes)[0])))

    outlier_ok = True
    for trial in range(4):
        r = np.random.default_rng(300 + trial)
        cloud = np.concatenate([r.normal(size=(200, 3)), r.normal(scale=4, size=(10, 3))])
        outlier_ok &= np.flatnonzero(outlier_mask(cloud, 10, 1.0)).tolist() == outlier_survivors(cloud, 10, 1.0)

    seconds = time.perf_counter() - start
    ok = knn_ok and violations == 0 and projection_gap <= 1e-3 and outlier_ok and seconds < 60
    report(
        2, ok,
        f"kNN exact {knn_ok}, insphere violations {violations}, projection vs dense {projection_gap:.1e}, "
        f"outlier oracle {outlier_ok}; {seconds:.1f}s",
    )
    assert ok


def test_criterion_03_constraints_hold(model, correct):
    worst_excess = -np.inf
    cfg = default_config("gradient_projection")
    for cloud, label in correct:
        mesh, _ = estimate_surface(cloud)
        index = TriangleIndex(mesh)
        res = gradient_projection(model, cloud, mesh, label, cfg, index)
        worst_excess = max(worst_excess, hausdorff_to_surface(res.cloud, mesh, index) - cfg.tau)

    bounds = {"chamfer": 0.0, "sticks": 0.0, "sinks": 0.0}

    def track(name):
        def cb(t, quantity):
            bounds[name] = max(bounds[name], float(np.abs(quantity).max()))
        return cb

    for cloud, label in correct[:10]:
        chamfer_attack(model, cloud, label, default_config("chamfer"), callback=track("chamfer"))
        mesh, _ = estimate_surface(cloud)
        adversarial_sticks(model, cloud, mesh, label, default_config("adversarial_sticks"), callback=track("sticks"))
        adversarial_sinks(model, cloud, label, default_config("adversarial_sinks"), callback=track("sinks"))
    # chamfer and sinks perturbations lie in (-1, 1); sticks in (-mu/4, mu/4) = (-0.5, 0.5)
    ok = worst_excess <= 1e-6 and bounds["chamfer"] < 1 and bounds["sinks"] < 1 and bounds["sticks"] < 0.5
    report(
        3, ok,
        f"max H(x*,S) - tau over {len(correct)} samples {worst_excess:.1e}; "
        f"largest tanh-bounded coordinate chamfer {bounds['chamfer']:.3f}, sinks {bounds['sinks']:.3f}, "
        f"sticks {bounds['sticks']:.3f}",
    )
    assert ok


def test_criterion_04_model_quality(bench, trained):
    params, seconds = trained
    _, test = bench
    acc = float(np.mean(net.predict_batch(params, test.clouds) == test.labels))
    ok = acc >= 0.90 and seconds < 300
    report(4, ok, f"held-out accuracy {acc:.4f} on {len(test)} clouds; training {seconds:.0f}s")
    assert ok


def test_criterion_05_undefended_strength(bench, model):
    table = _table("undefended_strength", model, bench[1])
    n = table.rows[0]["n_samples"]
    l2, sinks = table.success("iter_grad_l2"), table.success("adversarial_sinks")
    seconds = SECONDS["undefended_strength"]
    ok = n >= 100 and l2 >= 0.85 and sinks >= 0.85 and seconds < 600
    report(5, ok, f"n={n}: iter_grad_l2 {l2:.1%}, adversarial_sinks {sinks:.1%} (floor 85%); {seconds:.0f}s")
    assert ok


def test_criterion_06_shape_attacks_survive_defenses(bench, model):
    table = _table("defended_trend", model, bench[1])
    parts, ok = [], True
    for defense in ("outlier_remove", "salient_remove"):
        base = table.success("iter_grad_l2", defense)
        parts.append(f"{defense}: iter_grad_l2 {base:.1%}")
        for attack in ("perturbation_resampling", "adversarial_sticks"):
            rate = table.success(attack, defense)
            ok &= rate - base >= 0.10
            parts.append(f"{attack} {rate:.1%}")
    seconds = SECONDS["defended_trend"]
    ok &= seconds < 1200
    report(6, ok, f"n={table.rows[0]['n_samples']}; " + ", ".join(parts) + f"; {seconds:.0f}s")
    assert ok


def test_criterion_07_eps_monotone(bench, model):
    table = _table("eps_sweep", model, bench[1])
    rates = [r["success_rate"] for r in table.rows]
    ok = len(rates) == 3 and rates[0] <= rates[1] <= rates[2]
    report(7, ok, "iter_grad_l2 undefended at eps 1/2/3: " + " / ".join(f"{r:.1%}" for r in rates))
    assert ok


def test_criterion_08_blending_trend(bench, model):
    table = _table("kappa_sweep", model, bench[1])
    rates = [r["success_rate"] for r in table.rows]
    drops = [a - b for a, b in zip(rates, rates[1:]) if b < a]
    ok = len(rates) == 3 and len(drops) <= 1 and all(d <= 0.02 + 1e-12 for d in drops)
    report(8, ok, "resampling under outlier removal at kappa 0/250/500: " + " / ".join(f"{r:.1%}" for r in rates))
    assert ok


def test_criterion_09_benign_cost_of_defenses(bench, model):
    table = _table("undefended_strength", model, bench[1])
    costs = {d.name: 1.0 - table.cell("none", d.name)["benign_accuracy"] for d in DEFENSES if d.kind != "none"}
    ok = all(c <= 0.12 for c in costs.values())
    report(9, ok, "benign misclassification " + ", ".join(f"{k} {v:.1%}" for k, v in costs.items()) + " (ceiling 12%)")
    assert ok


def test_criterion_10_determinism(bench, model):
    same = {}
    for name in RUNS:
        first = _table(name, model, bench[1]).to_csv()
        same[name] = RUNS[name](model, bench[1]).to_csv() == first
    ok = all(same.values())
    report(10, ok, "byte-identical CSV on rerun: " + ", ".join(f"{k} {v}" for k, v in same.items()))
    assert ok

