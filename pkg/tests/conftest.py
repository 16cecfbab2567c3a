"""Shared fixtures and helpers for the metriclab test suite."""

import numpy as np
import pytest

import metriclab as ml


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_batch(rng):
    """A P=3, Q=3 batch with well-spread unit-ish features in 5-D."""
    labels = np.repeat(np.arange(3), 3)
    X = rng.normal(size=(9, 5))
    X += 4.0 * np.eye(5)[labels % 5] * np.sign(rng.normal(size=(9, 1)))
    batch = ml.SampledBatch(indices=np.arange(9), labels=labels, P=3, Q=3)
    return X, batch


def toy_dataset(n_classes=4, per_class=12, dim=6, seed=0):
    spec = ml.SyntheticSpec(
        n_classes=n_classes,
        samples_per_class=per_class,
        input_dim=dim,
        sigma=0.4,
        modes_per_class=1,
        seed=seed,
    )
    return ml.generate_synthetic(spec)


@pytest.fixture
def tiny_dataset():
    return toy_dataset()
