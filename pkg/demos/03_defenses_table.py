# Attack x defense success table on a small synthetic bench, the same kind of
# table the `eval` subcommand writes.
#
# Takes a few minutes:  python3 demos/03_defenses_table.py

import numpy as np

from shapeattacks import net
from shapeattacks.attacks import AttackConfig, default_config
from shapeattacks.bench.datasets import synthetic_splits
from shapeattacks.bench.experiment import ExperimentConfig, run_experiment
from shapeattacks.defenses import DefenseConfig

train, test = synthetic_splits(train_per_class=60, test_per_class=6, seed=1)
params, _ = net.train(train.clouds, train.labels, 5, epochs=25, rng=np.random.default_rng(1))

config = ExperimentConfig(
    attacks=[
        AttackConfig("none"),
        default_config("iter_grad_l2"),
        default_config("perturbation_resampling", resample_every=5),
        default_config("adversarial_sticks"),
        default_config("adversarial_sinks"),
    ],
    defenses=[
        DefenseConfig("none"),
        DefenseConfig("random_remove"),
        DefenseConfig("outlier_remove"),
        DefenseConfig("salient_remove"),
    ],
    sample_limit=20,
    seed=0,
    output_dir="demo_table",
)
table = run_experiment(config, params, test)

# success rate per cell; the "none" attack row is the defense's own error on benign clouds
defenses = [d.name for d in config.defenses]
print(f"{'':26s}" + "".join(f"{d:>16s}" for d in defenses))
for attack in config.attacks:
    rates = [table.success(attack.name, d) for d in defenses]
    print(f"{attack.name:26s}" + "".join(f"{r:16.1%}" for r in rates))

# the full table, with perceptibility metrics, is in demo_table/results.csv
print("\nseconds per attack:", {k: round(v, 1) for k, v in table.timings.items()})
