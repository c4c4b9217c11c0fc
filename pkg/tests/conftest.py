import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from plugins.bounds_finite.problems import identity_problem  # noqa: E402
from plugins.model_zoo.data import SyntheticBlobs  # noqa: E402
from plugins.model_zoo.model_zoo import LogisticRegression, MLP  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def identity():
    """W = Z on a fair bit with the 0-1 loss."""
    return identity_problem(n=1, z_card=2)


@pytest.fixture
def blobs():
    return SyntheticBlobs(means=[[1.0, 0.0], [-1.0, 0.0]], scale=1.0, seed=7)


@pytest.fixture
def logistic():
    return LogisticRegression(input_dim=2, n_classes=2)


@pytest.fixture
def small_mlp():
    return MLP(input_dim=2, n_classes=3, hidden=[4], activation="tanh")


@pytest.fixture
def tiny_experiment(tmp_path):
    """A config that simulates in well under a second."""
    return {
        "source": {"kind": "blobs", "input_dim": 2, "n_classes": 2, "separation": 1.0, "scale": 1.0, "seed": 0},
        "model": {"kind": "logistic"},
        "n": 4,
        "schedule": {"T": 12, "eta": 0.05, "beta": 100.0},
        "repetitions": 4,
        "master_seed": 11,
        "eval_size": 20,
        "threads": 2,
        "noise_replicates": 2,
        "theta_grid": {"a_min": 0.01, "a_max": 100.0, "points": 5},
        "out_dir": str(tmp_path / "results"),
    }
