import numpy as np
import pytest

from edgeqc.errors import RehearsalUnavailableError
from edgeqc.forest import forest_nll, init_forest, predict_proba
from edgeqc.ilvq import PrototypeMemory
from edgeqc.metrics import evaluate
from edgeqc.training import TrainConfig, TrainedModel, train_incremental, train_initial

from conftest import labeled


def toy_problem(n=120, d=4, seed=0, shift=0.0):
    """Two Gaussian blobs; label 1 iff the latent score is positive."""
    rng = np.random.default_rng(seed)
    X = rng.normal(0.0, 1.0, size=(n, d)) + shift
    score = X @ np.array([1.5, -2.0, 1.0, 0.5][:d]) + 0.3
    y = (score > 0).astype(int)
    return [labeled(x, int(t), sample_id=str(i)) for i, (x, t) in enumerate(zip(X, y))]


class TestTrainInitial:
    def test_learns_separable_data(self):
        samples = toy_problem(240, seed=1)
        cfg = TrainConfig(epochs=10, seed=5)
        model, report = train_initial(samples, cfg)
        assert model.forest.version == 1
        assert report.accuracy > 0.85
        assert len(model.memory) > 0
        assert model.memory.stats.count == len(samples)

    def test_deterministic_serialization(self):
        samples = toy_problem(100, seed=2)
        texts = []
        for _ in range(2):
            model, _ = train_initial(samples, TrainConfig(epochs=3, seed=9))
            texts.append(model.to_text())
        assert texts[0] == texts[1]

    def test_epoch_callback_runs_per_epoch(self):
        samples = toy_problem(60, seed=3)
        seen = []
        train_initial(samples, TrainConfig(epochs=4, seed=0),
                      on_epoch=lambda e, m: seen.append((e, sorted(m))))
        assert [e for e, _ in seen] == [0, 1, 2, 3]
        assert all(keys == ["accuracy", "f1", "nll", "precision", "recall"]
                   for _, keys in seen)


class TestTrainIncremental:
    def test_version_bumps(self):
        samples = toy_problem(80, seed=4)
        model, _ = train_initial(samples, TrainConfig(epochs=2, seed=1))
        new = toy_problem(40, seed=5)
        forest, _ = train_incremental(model.forest, model.memory, new,
                                      TrainConfig(epochs=2, seed=1))
        assert forest.version == 2

    def test_noop_without_data(self):
        samples = toy_problem(80, seed=4)
        model, _ = train_initial(samples, TrainConfig(epochs=2, seed=1))
        forest, report = train_incremental(
            model.forest, model.memory, [],
            TrainConfig(epochs=2, seed=1, rehearsal_ratio=0.0))
        assert forest is model.forest
        assert report.total == 0

    def test_rehearsal_requires_memory(self):
        forest = init_forest(4, seed=0)
        memory = PrototypeMemory(4)
        with pytest.raises(RehearsalUnavailableError):
            train_incremental(forest, memory, toy_problem(10), TrainConfig(seed=0))

    def test_rehearsal_ratio_zero_allowed_with_empty_memory(self):
        forest = init_forest(4, seed=0)
        memory = PrototypeMemory(4)
        new = toy_problem(30, seed=6)
        updated, _ = train_incremental(forest, memory, new,
                                       TrainConfig(seed=0, rehearsal_ratio=0.0))
        assert updated.version == forest.version + 1
        assert len(memory) > 0  # new samples were absorbed

    def test_holdout_metrics_used_when_supplied(self):
        train = toy_problem(150, seed=7)
        holdout = toy_problem(60, seed=8)
        cfg = TrainConfig(epochs=8, seed=2, rehearsal_ratio=0.0, holdout=holdout)
        model, report = train_initial(train, cfg)
        X = np.stack([s.features.values for s in holdout])
        y = np.array([s.label for s in holdout])
        direct = evaluate(model.forest, model.standardizer().transform(X), y)
        assert report.as_dict() == direct.as_dict()

    def test_training_reduces_nll(self):
        samples = toy_problem(200, seed=9)
        model, _ = train_initial(samples, TrainConfig(epochs=10, seed=3))
        X = np.stack([s.features.values for s in samples])
        y = np.array([s.label for s in samples])
        Xs = model.standardizer().transform(X)
        trained_nll = forest_nll(model.forest, Xs, y)
        fresh = init_forest(4, seed=3)
        assert trained_nll < forest_nll(fresh, Xs, y) - 0.05


class TestTrainedModel:
    def test_text_round_trip_predicts_identically(self):
        model, _ = train_initial(toy_problem(80, seed=10), TrainConfig(epochs=3, seed=4))
        clone = TrainedModel.from_text(model.to_text())
        X = np.random.default_rng(0).normal(size=(50, 4))
        np.testing.assert_array_equal(model.predict_proba(X), clone.predict_proba(X))
        assert clone.to_text() == model.to_text()

    def test_standardizer_comes_from_memory_stats(self):
        model, _ = train_initial(toy_problem(80, seed=11), TrainConfig(epochs=2, seed=4))
        s = model.standardizer()
        np.testing.assert_array_equal(s.mean, model.memory.stats.mean)
