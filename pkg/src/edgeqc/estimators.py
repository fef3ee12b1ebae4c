"""Scikit-learn estimator facades over the forest training pipeline.

These wrap the functional core so the model composes with pipelines, grid
search, and friends: parameters live in ``__init__``, state learned by
``fit`` lands in trailing-underscore attributes, inputs pass through the
sklearn validation helpers.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .features import FeatureVector, LabeledSample
from .training import TrainConfig, TrainedModel, train_incremental, train_initial


def _as_samples(X: np.ndarray, y: np.ndarray) -> list[LabeledSample]:
    return [LabeledSample(FeatureVector(row, sample_id=str(i)), int(label))
            for i, (row, label) in enumerate(zip(X, y))]


def _check_binary(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=int)
    bad = set(np.unique(y)) - {0, 1}
    if bad:
        raise ValueError(f"labels must be in {{0, 1}}, got extra {sorted(bad)}")
    return y


class ContinualForestClassifier(BaseEstimator, ClassifierMixin):
    """Soft decision forest with prototype-memory pseudo-rehearsal.

    ``fit`` performs the initial (plain) training and seeds the prototype
    memory; ``partial_fit`` retrains incrementally from new labels, mixing in
    synthetic rehearsal samples so earlier data keeps its influence.
    Features are standardized internally from the memory's running
    statistics, so inputs stay in original units.
    """

    def __init__(self, n_trees=5, depth=4, epochs=40, learning_rate=2.0,
                 leaf_iterations=10, batch_size=32, rehearsal_ratio=1.0,
                 noise_scale=0.05, capacity=200, insertion_kappa=1.5,
                 decision_threshold=0.5, seed=0):
        self.n_trees = n_trees
        self.depth = depth
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.leaf_iterations = leaf_iterations
        self.batch_size = batch_size
        self.rehearsal_ratio = rehearsal_ratio
        self.noise_scale = noise_scale
        self.capacity = capacity
        self.insertion_kappa = insertion_kappa
        self.decision_threshold = decision_threshold
        self.seed = seed

    def _config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs, learning_rate=self.learning_rate,
            leaf_iterations=self.leaf_iterations,
            rehearsal_ratio=self.rehearsal_ratio, noise_scale=self.noise_scale,
            seed=self.seed, batch_size=self.batch_size)

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        y = _check_binary(y)
        model, report = train_initial(
            _as_samples(X, y), self._config(),
            n_trees=self.n_trees, depth=self.depth,
            capacity=self.capacity, insertion_kappa=self.insertion_kappa)
        self.model_ = model
        self.train_report_ = report
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        return self

    def partial_fit(self, X, y):
        """Incremental retrain with rehearsal; requires a prior ``fit``."""
        check_is_fitted(self, "model_")
        X, y = check_X_y(X, y)
        y = _check_binary(y)
        model: TrainedModel = self.model_
        forest, report = train_incremental(
            model.forest, model.memory, _as_samples(X, y), self._config())
        self.model_ = TrainedModel(forest, model.memory)
        self.train_report_ = report
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X)
        return self.model_.predict_proba(X)

    def predict(self, X):
        proba = self.predict_proba(X)
        return (proba[:, 1] > self.decision_threshold).astype(int)

    @property
    def version_(self) -> int:
        check_is_fitted(self, "model_")
        return self.model_.forest.version


class SoftDecisionForestClassifier(ContinualForestClassifier):
    """Plain soft decision forest: same trainer, rehearsal disabled."""

    def __init__(self, n_trees=5, depth=4, epochs=40, learning_rate=2.0,
                 leaf_iterations=10, batch_size=32, decision_threshold=0.5,
                 seed=0):
        super().__init__(
            n_trees=n_trees, depth=depth, epochs=epochs,
            learning_rate=learning_rate, leaf_iterations=leaf_iterations,
            batch_size=batch_size, rehearsal_ratio=0.0, noise_scale=0.0,
            decision_threshold=decision_threshold, seed=seed)
