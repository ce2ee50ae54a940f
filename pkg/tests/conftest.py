"""Shared fixtures: toy datasets and small simulation configs."""

import numpy as np
import pytest

from app.core.features import Dataset, extract_features
from app.core.settings import build_config
from app.core.sim.engine import run_simulation


def make_dataset(X, y):
    """Dataset from an (n, k) matrix with k <= 6; missing columns are zero."""
    X = np.asarray(X, dtype=np.float64)
    full = np.zeros((X.shape[0], 6), dtype=np.float64)
    full[:, : X.shape[1]] = X
    return Dataset(full, np.asarray(y, dtype=np.int64))


def blobs(n_per_class=60, seed=0, spread=0.6):
    """Three Gaussian blobs, one per class, over all six columns."""
    rng = np.random.default_rng(seed)
    centres = np.array(
        [
            [0.0, 1448.0, 60.0, 55.0, 2.0, 4.0],
            [0.0, 1448.0, 30.0, 30.0, 0.5, 20.0],
            [0.0, 1448.0, 35.0, 34.0, 1.0, 12.0],
        ]
    )
    X, y = [], []
    for code, centre in enumerate(centres):
        scale = np.array([1.0, 0.0, 5.0, 5.0, 0.5, 3.0]) * spread
        X.append(centre + rng.normal(size=(n_per_class, 6)) * scale)
        y.append(np.full(n_per_class, code))
    X = np.vstack(X)
    X[:, 0] = np.arange(X.shape[0]) * 0.001
    return Dataset(np.abs(X), np.concatenate(y))


@pytest.fixture
def blob_dataset():
    return blobs()


@pytest.fixture
def small_config():
    """Short lossy run that produces all three labels."""
    return build_config(
        {
            "seed": 3,
            "target_packets": 3000,
            "wired_rate_mbps": 4.0,
            "queue_capacity_pkts": 5,
            "channel": {"variant": "bernoulli", "p_loss": 0.01},
        }
    )


@pytest.fixture
def lossless_config():
    return build_config(
        {
            "seed": 1,
            "target_packets": 500,
            "queue_capacity_pkts": 1_000_000_000,
            "channel": {"variant": "bernoulli", "p_loss": 0.0},
        }
    )


@pytest.fixture
def small_trace(small_config):
    return run_simulation(small_config)


@pytest.fixture
def sim_dataset(small_trace):
    return extract_features(small_trace)
