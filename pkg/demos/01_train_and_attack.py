# Train a small point-cloud classifier on synthetic shapes, then attack one
# correctly classified cloud with every attack and compare how visible each
# perturbation is.
#
# Runs in under a minute on one CPU core:  python3 demos/01_train_and_attack.py

import numpy as np

from shapeattacks import net
from shapeattacks.attacks import default_config, run_attack
from shapeattacks.bench.datasets import synthetic_splits
from shapeattacks.bench.io import export_cloud
from shapeattacks.geometry import estimate_surface

# Five shape classes (sphere, box, cylinder, cone, torus), randomly stretched and rotated.
# 512 points per cloud keeps the demo quick; the benchmark uses 1024.
train, test = synthetic_splits(train_per_class=80, test_per_class=10, n_points=512, seed=0)
print("train", train.clouds.shape, "test", test.clouds.shape, "classes", train.class_names)

params, history = net.train(train.clouds, train.labels, 5, epochs=40, rng=np.random.default_rng(0))
accuracy = np.mean(net.predict_batch(params, test.clouds) == test.labels)
print(f"held-out accuracy {accuracy:.3f}")

# pick the first test cloud the model gets right
i = int(np.flatnonzero(net.predict_batch(params, test.clouds) == test.labels)[0])
cloud, label = test.clouds[i], int(test.labels[i])
print("attacking sample", i, "of class", test.class_names[label])

# gradient projection and sticks need the object's surface, estimated here with an alpha shape
mesh, alpha = estimate_surface(cloud)
print(f"alpha shape: {len(mesh.faces)} triangles at alpha={alpha:.3f}")

rows = []
for kind in (
    "iter_grad_l2",
    "chamfer",
    "gradient_projection",
    "perturbation_resampling",
    "adversarial_sticks",
    "adversarial_sinks",
):
    # shorter runs than the defaults, to keep the demo fast
    cfg = default_config(kind, lambda_steps=5, resample_every=5)
    if kind in ("iter_grad_l2", "perturbation_resampling"):
        cfg = cfg.with_(n_iter=30)
    res = run_attack(params, cloud, label, cfg, mesh, rng=np.random.default_rng(0))
    rows.append((kind, res.success, test.class_names[res.predicted], res.chamfer, res.hausdorff, res.l2))
    export_cloud(res.cloud, f"adv_{kind}.xyz")

print(f"\n{'attack':26s} {'fooled':>6s} {'predicted':>10s} {'chamfer':>9s} {'hausdorff':>9s} {'l2':>7s}")
for kind, ok, pred, ch, ha, l2 in rows:
    print(f"{kind:26s} {str(ok):>6s} {pred:>10s} {ch:9.5f} {ha:9.4f} {l2:7.3f}")

# the adversarial clouds were written as adv_<attack>.xyz for any point-cloud viewer
