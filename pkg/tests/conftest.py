import numpy as np
import pytest

from shapeattacks import net
from shapeattacks.bench.datasets import synthetic_splits


@pytest.fixture(scope="session")
def small_splits():
    """Tiny synthetic bench: 5 classes, 256-point clouds."""
    return synthetic_splits(train_per_class=24, test_per_class=6, n_points=256, seed=11)


@pytest.fixture(scope="session")
def small_model(small_splits):
    train, _ = small_splits
    params, _ = net.train(train.clouds, train.labels, 5, epochs=12, rng=np.random.default_rng(0))
    return params


@pytest.fixture(scope="session")
def correct_sample(small_model, small_splits):
    """First test sample the small model gets right: (cloud, label, mesh)."""
    _, test = small_splits
    for i in range(len(test)):
        if net.predict(small_model, test.clouds[i]) == test.labels[i]:
            return test.clouds[i], int(test.labels[i]), test.meshes[i]
    pytest.fail("small model misclassifies every test sample")


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
