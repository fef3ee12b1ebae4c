import numpy as np
import pytest
from dataclasses import replace

from edgeqc.errors import DimensionMismatchError, EmptyBatchError
from edgeqc.forest import (
    Forest,
    SoftTree,
    forest_nll,
    grad_step,
    init_forest,
    per_tree_nll,
    predict_proba,
    update_leaves,
)

from conftest import random_batch, random_forest


def single_tree_forest(depth, weights, biases, leaves, dimension):
    tree = SoftTree(depth, np.asarray(weights, float), np.asarray(biases, float),
                    np.asarray(leaves, float))
    return Forest((tree,), dimension, version=1, seed=0)


class TestPredictProba:
    def test_uniform_leaves_give_half(self):
        forest = random_forest(4, n_trees=3, depth=3, seed=1, sharp_leaves=False)
        X = np.random.default_rng(0).normal(size=(20, 4))
        np.testing.assert_allclose(predict_proba(forest, X), 0.5, atol=1e-12)

    def test_depth_one_zero_score_routes_half(self):
        forest = single_tree_forest(1, [[0.0, 0.0]], [0.0], [[1.0, 0.0], [0.0, 1.0]], 2)
        p = predict_proba(forest, np.array([3.0, -7.0]))
        np.testing.assert_allclose(p, [[0.5, 0.5]], atol=1e-12)

    def test_depth_one_bias_ten(self):
        # Left-routing probability sigmoid(10); left leaf is pure class 0.
        forest = single_tree_forest(1, [[0.0, 0.0]], [10.0], [[1.0, 0.0], [0.0, 1.0]], 2)
        p = predict_proba(forest, np.zeros(2))[0]
        assert p[0] == pytest.approx(0.9999546021312976, abs=1e-12)
        assert p[1] == pytest.approx(4.5397868702434395e-05, abs=1e-12)

    def test_rows_sum_to_one(self):
        forest = random_forest(6, n_trees=4, depth=4, seed=3)
        X = np.random.default_rng(5).normal(size=(10000, 6))
        p = predict_proba(forest, X)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)
        assert np.all(p >= 0)

    def test_dimension_mismatch(self):
        forest = random_forest(4)
        with pytest.raises(DimensionMismatchError):
            predict_proba(forest, np.zeros(5))

    def test_deterministic(self):
        a = random_forest(4, seed=9)
        b = random_forest(4, seed=9)
        X = np.random.default_rng(1).normal(size=(17, 4))
        np.testing.assert_array_equal(predict_proba(a, X), predict_proba(b, X))


class TestGradStep:
    def test_zero_rate_keeps_parameters(self):
        forest = random_forest(3, seed=2)
        X, y = random_batch(3, 32, seed=4)
        updated, nll = grad_step(forest, X, y, 0.0)
        assert nll == pytest.approx(forest_nll(forest, X, y), abs=1e-12)
        for t0, t1 in zip(forest.trees, updated.trees):
            np.testing.assert_array_equal(t0.weights, t1.weights)
            np.testing.assert_array_equal(t0.biases, t1.biases)

    def test_uniform_leaves_zero_gradient(self):
        forest = random_forest(3, seed=2, sharp_leaves=False)
        X, y = random_batch(3, 16, seed=4)
        updated, _ = grad_step(forest, X, y, 5.0)
        for t0, t1 in zip(forest.trees, updated.trees):
            np.testing.assert_allclose(t0.weights, t1.weights, atol=1e-15)
            np.testing.assert_allclose(t0.biases, t1.biases, atol=1e-15)

    def test_leaves_untouched(self):
        forest = random_forest(3, seed=2)
        X, y = random_batch(3, 16, seed=4)
        updated, _ = grad_step(forest, X, y, 0.5)
        for t0, t1 in zip(forest.trees, updated.trees):
            np.testing.assert_array_equal(t0.leaf_probs, t1.leaf_probs)

    def test_empty_batch_rejected(self):
        forest = random_forest(3)
        with pytest.raises(EmptyBatchError):
            grad_step(forest, np.zeros((0, 3)), np.zeros(0, dtype=int), 0.1)

    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
    def test_gradient_matches_finite_differences(self, seed):
        # Central-difference oracle over every routing weight and bias.
        d = 3 + seed % 2
        forest = random_forest(d, n_trees=2, depth=2, seed=seed)
        X, y = random_batch(d, 24, seed=seed + 100)
        eta = 1.0
        updated, _ = grad_step(forest, X, y, eta)
        h = 1e-5
        checked = 0
        for t_idx, tree in enumerate(forest.trees):
            analytic_w = (tree.weights - updated.trees[t_idx].weights) / eta
            analytic_b = (tree.biases - updated.trees[t_idx].biases) / eta
            for n in range(tree.n_internal):
                for j in range(d):
                    fd = _fd_weight(forest, t_idx, n, j, h, X, y)
                    _assert_close(analytic_w[n, j], fd)
                    checked += 1
                fd = _fd_bias(forest, t_idx, n, h, X, y)
                _assert_close(analytic_b[n], fd)
                checked += 1
        assert checked == len(forest.trees) * forest.trees[0].n_internal * (d + 1)


def _assert_close(analytic, fd):
    scale = max(abs(analytic), abs(fd), 1e-8)
    assert abs(analytic - fd) / scale < 1e-4


def _perturbed(forest, t_idx, mutate):
    trees = list(forest.trees)
    tree = trees[t_idx]
    weights, biases = tree.weights.copy(), tree.biases.copy()
    mutate(weights, biases)
    trees[t_idx] = replace(tree, weights=weights, biases=biases)
    return replace(forest, trees=tuple(trees))


def _fd_weight(forest, t_idx, n, j, h, X, y):
    def bump(sign):
        def mutate(w, b):
            w[n, j] += sign * h
        return forest_nll(_perturbed(forest, t_idx, mutate), X, y)
    return (bump(+1) - bump(-1)) / (2 * h)


def _fd_bias(forest, t_idx, n, h, X, y):
    def bump(sign):
        def mutate(w, b):
            b[n] += sign * h
        return forest_nll(_perturbed(forest, t_idx, mutate), X, y)
    return (bump(+1) - bump(-1)) / (2 * h)


class TestUpdateLeaves:
    def test_depth_zero_single_leaf_fixed_point(self):
        # mu = 1 everywhere: one iteration lands on the class frequencies.
        forest = single_tree_forest(0, np.zeros((0, 2)), np.zeros(0), [[0.5, 0.5]], 2)
        X = np.zeros((3, 2))
        y = np.array([0, 0, 1])
        updated = update_leaves(forest, X, y, 1)
        np.testing.assert_allclose(updated.trees[0].leaf_probs, [[2 / 3, 1 / 3]], atol=1e-12)
        again = update_leaves(updated, X, y, 1)
        np.testing.assert_allclose(again.trees[0].leaf_probs, [[2 / 3, 1 / 3]], atol=1e-12)

    def test_single_class_batch_monotone_mass(self):
        forest = random_forest(3, n_trees=2, depth=3, seed=6)
        X = np.random.default_rng(2).normal(size=(20, 3))
        y = np.zeros(20, dtype=int)
        current = forest
        prev = [t.leaf_probs[:, 0].copy() for t in current.trees]
        for _ in range(5):
            current = update_leaves(current, X, y, 1)
            now = [t.leaf_probs[:, 0] for t in current.trees]
            for a, b in zip(prev, now):
                assert np.all(b >= a - 1e-12)
            prev = [v.copy() for v in now]

    def test_zero_iterations_no_change(self):
        forest = random_forest(3, seed=1)
        X, y = random_batch(3, 8, seed=2)
        updated = update_leaves(forest, X, y, 0)
        for t0, t1 in zip(forest.trees, updated.trees):
            np.testing.assert_array_equal(t0.leaf_probs, t1.leaf_probs)

    @pytest.mark.parametrize("seed", [10, 11, 12, 13])
    def test_simplex_preserved(self, seed):
        forest = random_forest(4, n_trees=3, depth=4, seed=seed)
        X, y = random_batch(4, 40, seed=seed)
        updated = update_leaves(forest, X, y, 25)
        for tree in updated.trees:
            np.testing.assert_allclose(tree.leaf_probs.sum(axis=1), 1.0, atol=1e-12)
            assert np.all(tree.leaf_probs >= 0)

    @pytest.mark.parametrize("seed", [20, 21, 22, 23, 24])
    def test_per_tree_nll_never_increases(self, seed):
        forest = random_forest(4, n_trees=3, depth=3, seed=seed)
        X, y = random_batch(4, 50, seed=seed)
        current = forest
        for _ in range(8):
            before = per_tree_nll(current, X, y)
            current = update_leaves(current, X, y, 1)
            after = per_tree_nll(current, X, y)
            assert after <= before + 1e-8

    def test_empty_batch_rejected(self):
        forest = random_forest(3)
        with pytest.raises(EmptyBatchError):
            update_leaves(forest, np.zeros((0, 3)), np.zeros(0, dtype=int), 1)


class TestInit:
    def test_seeded_init_reproducible(self):
        a = init_forest(5, n_trees=4, depth=3, seed=77)
        b = init_forest(5, n_trees=4, depth=3, seed=77)
        for t0, t1 in zip(a.trees, b.trees):
            np.testing.assert_array_equal(t0.weights, t1.weights)

    def test_shapes_and_uniform_leaves(self):
        f = init_forest(7, n_trees=2, depth=4, seed=0)
        assert f.dimension == 7 and len(f) == 2
        for tree in f.trees:
            assert tree.weights.shape == (15, 7)
            assert tree.biases.shape == (15,)
            np.testing.assert_array_equal(tree.leaf_probs, np.full((16, 2), 0.5))
