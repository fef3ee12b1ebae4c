import numpy as np
import pytest

from edgeqc.errors import ProtocolError
from edgeqc.forest import predict_proba
from edgeqc.ilvq import PrototypeMemory
from edgeqc.serialize import MODEL_MAGIC, dumps_model, loads_model

from conftest import labeled, random_forest


def build_memory(dimension=4, n=25, seed=0):
    mem = PrototypeMemory(dimension, capacity=10)
    rng = np.random.default_rng(seed)
    for i in range(n):
        scale = 10.0 ** np.arange(dimension)
        mem.learn(labeled(rng.normal(size=dimension) * scale, int(i % 2)))
    return mem


class TestRoundTrip:
    def test_text_round_trip_is_exact(self):
        forest = random_forest(4, n_trees=3, depth=3, seed=42)
        memory = build_memory()
        text = dumps_model(forest, memory)
        assert text.startswith(MODEL_MAGIC)
        f2, m2 = loads_model(text)
        assert dumps_model(f2, m2) == text

    def test_loaded_model_predicts_identically(self):
        forest = random_forest(5, n_trees=4, depth=4, seed=7)
        memory = build_memory(5)
        f2, _ = loads_model(dumps_model(forest, memory))
        X = np.random.default_rng(1).normal(size=(100, 5))
        np.testing.assert_array_equal(predict_proba(forest, X), predict_proba(f2, X))

    def test_memory_state_restored(self):
        memory = build_memory()
        forest = random_forest(4)
        _, m2 = loads_model(dumps_model(forest, memory))
        assert m2.capacity == memory.capacity
        assert m2.step == memory.step
        assert m2.stats.count == memory.stats.count
        np.testing.assert_array_equal(m2.stats.mean, memory.stats.mean)
        np.testing.assert_array_equal(m2.stats.m2, memory.stats.m2)
        assert len(m2) == len(memory)
        for a, b in zip(m2.prototypes, memory.prototypes):
            np.testing.assert_array_equal(a.w, b.w)
            assert (a.label, a.win_count, a.created_at) == (b.label, b.win_count, b.created_at)

    def test_version_and_seed_survive(self):
        forest = random_forest(3, seed=5)
        f2, _ = loads_model(dumps_model(forest, build_memory(3)))
        assert f2.version == forest.version
        assert f2.seed == forest.seed


class TestBadInput:
    def test_wrong_magic(self):
        with pytest.raises(ProtocolError):
            loads_model("NOT-A-MODEL 1\n")

    def test_truncated_tree_section(self):
        text = dumps_model(random_forest(3), build_memory(3))
        truncated = "\n".join(text.splitlines()[:10])
        with pytest.raises(ProtocolError):
            loads_model(truncated)

    def test_missing_stats(self):
        forest = random_forest(3)
        text = dumps_model(forest, build_memory(3))
        lines = [ln for ln in text.splitlines() if not ln.startswith("stats_mean")]
        with pytest.raises(ProtocolError):
            loads_model("\n".join(lines))
