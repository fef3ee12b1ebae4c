import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.model_selection import cross_val_score

from edgeqc.estimators import ContinualForestClassifier, SoftDecisionForestClassifier


def blobs(n=200, d=4, seed=0, shift=0.0):
    rng = np.random.default_rng(seed)
    X = rng.normal(0.0, 1.0, size=(n, d)) + shift
    y = (X @ np.array([1.5, -2.0, 1.0, 0.5][:d]) + 0.3 > 0).astype(int)
    return X, y


class TestSklearnContract:
    def test_get_params_round_trip(self):
        est = ContinualForestClassifier(n_trees=3, epochs=2, seed=7)
        params = est.get_params()
        assert params["n_trees"] == 3 and params["seed"] == 7
        rebuilt = ContinualForestClassifier(**params)
        assert rebuilt.get_params() == params

    def test_clone(self):
        est = ContinualForestClassifier(depth=3, learning_rate=0.1)
        cloned = clone(est)
        assert cloned.get_params() == est.get_params()

    def test_not_fitted_raises(self):
        with pytest.raises(NotFittedError):
            ContinualForestClassifier().predict(np.zeros((1, 4)))

    def test_fit_predict_shapes(self):
        X, y = blobs(150)
        est = ContinualForestClassifier(epochs=4, seed=0).fit(X, y)
        proba = est.predict_proba(X)
        assert proba.shape == (150, 2)
        np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-9)
        assert set(est.predict(X)) <= {0, 1}
        assert est.version_ == 1
        assert est.n_features_in_ == 4

    def test_rejects_nonbinary_labels(self):
        X, _ = blobs(20)
        with pytest.raises(ValueError):
            ContinualForestClassifier(epochs=1).fit(X, np.full(20, 2))

    def test_accuracy_on_separable_data(self):
        X, y = blobs(300, seed=3)
        est = ContinualForestClassifier(epochs=10, seed=1).fit(X, y)
        assert est.score(X, y) > 0.85

    def test_cross_val_integration(self):
        X, y = blobs(150, seed=5)
        est = SoftDecisionForestClassifier(epochs=10, learning_rate=0.2, seed=0)
        scores = cross_val_score(est, X, y, cv=3)
        assert scores.shape == (3,)
        assert scores.mean() > 0.7


class TestPartialFit:
    def test_partial_fit_bumps_version(self):
        X, y = blobs(120, seed=6)
        est = ContinualForestClassifier(epochs=3, seed=2).fit(X, y)
        X2, y2 = blobs(40, seed=7)
        est.partial_fit(X2, y2)
        assert est.version_ == 2

    def test_partial_fit_requires_fit(self):
        X, y = blobs(20, seed=8)
        with pytest.raises(NotFittedError):
            ContinualForestClassifier().partial_fit(X, y)

    def test_plain_variant_has_no_rehearsal_params_exposed(self):
        params = SoftDecisionForestClassifier().get_params()
        assert "rehearsal_ratio" not in params
        assert params["epochs"] == 40
