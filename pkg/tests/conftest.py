import numpy as np
import pytest

from edgeqc.features import FeatureVector, LabeledSample
from edgeqc.forest import Forest, SoftTree


def labeled(values, label, sample_id="s"):
    return LabeledSample(FeatureVector(np.asarray(values, dtype=float), sample_id=sample_id), label)


def random_forest(dimension, n_trees=3, depth=3, seed=0, sharp_leaves=True):
    """Seeded forest with random routing and (optionally) non-uniform leaves."""
    rng = np.random.default_rng(seed)
    n_internal, n_leaves = 2 ** depth - 1, 2 ** depth
    trees = []
    for _ in range(n_trees):
        weights = rng.normal(0.0, 0.8, size=(n_internal, dimension))
        biases = rng.normal(0.0, 0.3, size=n_internal)
        if sharp_leaves:
            leaves = rng.dirichlet([1.5, 1.5], size=n_leaves)
        else:
            leaves = np.full((n_leaves, 2), 0.5)
        trees.append(SoftTree(depth, weights, biases, leaves))
    return Forest(tuple(trees), dimension, version=1, seed=seed)


def random_batch(dimension, n, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(0.0, 1.0, size=(n, dimension))
    y = rng.integers(0, 2, size=n)
    return X, y


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
