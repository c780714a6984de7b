# Parameter sweeps: a larger L2 budget buys more success, and resampling more
# points onto the shape's surface buys more robustness to outlier removal.
#
#   python3 demos/04_sweeps.py

import numpy as np

from shapeattacks import net
from shapeattacks.attacks import default_config
from shapeattacks.bench.datasets import synthetic_splits
from shapeattacks.bench.experiment import ExperimentConfig, run_sweep
from shapeattacks.defenses import DefenseConfig

train, test = synthetic_splits(train_per_class=60, test_per_class=6, seed=2)
params, _ = net.train(train.clouds, train.labels, 5, epochs=25, rng=np.random.default_rng(2))

# budget sweep, no defense
config = ExperimentConfig(attacks=[default_config("iter_grad_l2", n_iter=50)], sample_limit=25)
eps_table = run_sweep(config, "eps", [0.25, 0.5, 1.0, 2.0], params, test)
for row in eps_table.rows:
    print(f"eps={row['value']:<5} success {row['success_rate']:.1%}  mean L2 of successes {row['mean_l2']:.3f}")

# blending sweep: how many points are replaced by surface samples, judged after outlier removal
config = ExperimentConfig(
    attacks=[default_config("perturbation_resampling", n_iter=50, resample_every=5)],
    defenses=[DefenseConfig("outlier_remove")],
    sample_limit=15,
)
kappa_table = run_sweep(config, "kappa", [0, 250, 500], params, test)
for row in kappa_table.rows:
    print(f"kappa={row['value']:<4} success under outlier removal {row['success_rate']:.1%}")

# long-format CSV, one row per (value, attack, defense), ready for any plotting tool
print()
print(kappa_table.to_csv())
