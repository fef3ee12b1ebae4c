"""Soft decision forest with linear sigmoid routing.

Each tree is a complete binary tree of fixed depth. Internal node n holds a
linear score f_n(x) = w_n . x + b_n; sigmoid(f_n) is the probability of
routing left. A leaf holds a distribution over the two classes, and the tree
output is the leaf mixture sum_l mu_l(x) pi_l, where mu_l is the product of
routing probabilities along the path to leaf l. The forest predicts the mean
over its trees.

Training alternates two moves, both exposed as pure functions that return a
new forest: a gradient step on the routing parameters against the mixture
negative log-likelihood, and a fixed-point re-estimation of the leaf
distributions with routing held fixed.

Forests are treated as immutable values: every update constructs fresh
arrays, so a published forest is safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionMismatchError, EmptyBatchError

_PROB_FLOOR = 1e-12


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(frozen=True)
class SoftTree:
    """One routing tree: (2^depth - 1) internal nodes, 2^depth leaves."""

    depth: int
    weights: np.ndarray   # (n_internal, d)
    biases: np.ndarray    # (n_internal,)
    leaf_probs: np.ndarray  # (n_leaves, 2), rows on the simplex

    @property
    def n_internal(self) -> int:
        return 2 ** self.depth - 1

    @property
    def n_leaves(self) -> int:
        return 2 ** self.depth

    def reach_probabilities(self, X: np.ndarray) -> np.ndarray:
        """Per-sample probability of reaching every leaf; shape (B, n_leaves)."""
        B = X.shape[0]
        total = 2 ** (self.depth + 1) - 1
        reach = np.zeros((B, total))
        reach[:, 0] = 1.0
        if self.n_internal:
            sig = _sigmoid(X @ self.weights.T + self.biases)
            for n in range(self.n_internal):
                reach[:, 2 * n + 1] = reach[:, n] * sig[:, n]
                reach[:, 2 * n + 2] = reach[:, n] * (1.0 - sig[:, n])
        return reach[:, self.n_internal:]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.reach_probabilities(X) @ self.leaf_probs


@dataclass(frozen=True)
class Forest:
    """Ensemble of soft trees over a fixed input dimension; binary classes."""

    trees: tuple[SoftTree, ...]
    dimension: int
    version: int
    seed: int

    @property
    def depth(self) -> int:
        return self.trees[0].depth

    def __len__(self) -> int:
        return len(self.trees)


WEIGHT_INIT_SCALE = 0.3
BIAS_INIT_SCALE = 0.5


def init_forest(dimension: int, n_trees: int = 5, depth: int = 4,
                seed: int = 0, version: int = 1,
                weight_scale: float = WEIGHT_INIT_SCALE,
                bias_scale: float = BIAS_INIT_SCALE) -> Forest:
    """Seeded initialization: random routing weights and biases (off-center
    split surfaces so class structure away from the data mean is reachable),
    uniform leaves."""
    rng = np.random.default_rng(seed)
    n_internal = 2 ** depth - 1
    n_leaves = 2 ** depth
    trees = []
    for _ in range(n_trees):
        weights = rng.normal(0.0, weight_scale, size=(n_internal, dimension))
        biases = rng.normal(0.0, bias_scale, size=n_internal)
        leaves = np.full((n_leaves, 2), 0.5)
        trees.append(SoftTree(depth, weights, biases, leaves))
    return Forest(tuple(trees), dimension, version, seed)


def _check_inputs(forest: Forest, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != forest.dimension:
        raise DimensionMismatchError(
            f"expected dimension {forest.dimension}, got {X.shape[1]}")
    return X


def predict_proba(forest: Forest, X: np.ndarray) -> np.ndarray:
    """Class distribution per row: mean over trees of the leaf mixtures."""
    X = _check_inputs(forest, X)
    acc = np.zeros((X.shape[0], 2))
    for tree in forest.trees:
        acc += tree.predict_proba(X)
    return acc / len(forest.trees)


def forest_nll(forest: Forest, X: np.ndarray, y: np.ndarray) -> float:
    """Mean negative log-likelihood of the forest mixture."""
    X = _check_inputs(forest, X)
    proba = predict_proba(forest, X)
    p_true = np.maximum(proba[np.arange(len(y)), y], _PROB_FLOOR)
    return float(-np.mean(np.log(p_true)))


def per_tree_nll(forest: Forest, X: np.ndarray, y: np.ndarray) -> float:
    """Mean over trees of each tree's own mean negative log-likelihood.

    This is the quantity the leaf fixed-point update provably does not
    increase (the update is an independent bound-optimization step per tree).
    """
    X = _check_inputs(forest, X)
    idx = np.arange(len(y))
    total = 0.0
    for tree in forest.trees:
        p = np.maximum(tree.predict_proba(X)[idx, y], _PROB_FLOOR)
        total += float(-np.mean(np.log(p)))
    return total / len(forest.trees)


def grad_step(forest: Forest, X: np.ndarray, y: np.ndarray,
              learning_rate: float) -> tuple[Forest, float]:
    """One full-batch gradient step on the routing parameters.

    Returns the updated forest and the mean negative log-likelihood measured
    before the step. Leaf distributions are left untouched.
    """
    X = _check_inputs(forest, X)
    if X.shape[0] == 0:
        raise EmptyBatchError("gradient step requires a non-empty batch")
    y = np.asarray(y, dtype=int)
    B = X.shape[0]
    T = len(forest.trees)

    per_tree = []  # (sig, subtree_sums) per tree
    mix = np.zeros(B)
    for tree in forest.trees:
        total = 2 ** (tree.depth + 1) - 1
        reach = np.zeros((B, total))
        reach[:, 0] = 1.0
        sig = _sigmoid(X @ tree.weights.T + tree.biases) if tree.n_internal else np.zeros((B, 0))
        for n in range(tree.n_internal):
            reach[:, 2 * n + 1] = reach[:, n] * sig[:, n]
            reach[:, 2 * n + 2] = reach[:, n] * (1.0 - sig[:, n])
        mu = reach[:, tree.n_internal:]
        leaf_val = mu * tree.leaf_probs[:, y].T  # (B, L): mu_l * pi_l[y_i]
        # Sum leaf contributions bottom-up so s[n] covers the subtree below n.
        s = np.zeros((B, total))
        s[:, tree.n_internal:] = leaf_val
        for n in range(tree.n_internal - 1, -1, -1):
            s[:, n] = s[:, 2 * n + 1] + s[:, 2 * n + 2]
        mix += s[:, 0]
        per_tree.append((sig, s))

    mix /= T
    mix_safe = np.maximum(mix, _PROB_FLOOR)
    nll_before = float(-np.mean(np.log(mix_safe)))

    coef = -1.0 / (B * T * mix_safe)  # dL/dP_t per sample
    new_trees = []
    for tree, (sig, s) in zip(forest.trees, per_tree):
        if tree.n_internal == 0:
            new_trees.append(tree)
            continue
        left = np.array([2 * n + 1 for n in range(tree.n_internal)])
        right = left + 1
        df = (1.0 - sig) * s[:, left] - sig * s[:, right]  # dP_t/df_n, (B, n_internal)
        g = coef[:, None] * df
        grad_w = g.T @ X
        grad_b = g.sum(axis=0)
        new_trees.append(replace(
            tree,
            weights=tree.weights - learning_rate * grad_w,
            biases=tree.biases - learning_rate * grad_b,
        ))
    return replace(forest, trees=tuple(new_trees)), nll_before


def update_leaves(forest: Forest, X: np.ndarray, y: np.ndarray,
                  iterations: int) -> Forest:
    """Fixed-point re-estimation of leaf distributions, routing held fixed.

    Per tree and iteration:
        pi_l[c] <- (1/Z_l) * pi_l[c] * sum_{i: y_i = c} mu_l(x_i) / P_tree(y_i | x_i)

    Leaves whose normalizer vanishes keep their previous distribution. Each
    iteration cannot increase that tree's training negative log-likelihood.
    """
    X = _check_inputs(forest, X)
    if X.shape[0] == 0:
        raise EmptyBatchError("leaf update requires a non-empty batch")
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    y = np.asarray(y, dtype=int)
    idx = np.arange(len(y))
    masks = [y == c for c in (0, 1)]

    new_trees = []
    for tree in forest.trees:
        mu = tree.reach_probabilities(X)
        pi = tree.leaf_probs.copy()
        for _ in range(iterations):
            p_true = np.maximum((mu @ pi)[idx, y], _PROB_FLOOR)
            ratio = mu / p_true[:, None]  # (B, L)
            numer = np.stack([pi[:, c] * ratio[masks[c]].sum(axis=0) for c in (0, 1)], axis=1)
            z = numer.sum(axis=1)
            ok = z > 0
            pi = np.where(ok[:, None], numer / np.where(ok, z, 1.0)[:, None], pi)
        new_trees.append(replace(tree, leaf_probs=pi))
    return replace(forest, trees=tuple(new_trees))
