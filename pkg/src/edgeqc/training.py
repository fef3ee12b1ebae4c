"""Incremental training loop: rehearsal synthesis, routing SGD, leaf updates.

The deployable unit is a :class:`TrainedModel`: the forest plus the prototype
memory whose running statistics define the input standardization. Training
consumes samples in original sensor units and standardizes internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from . import forest as forest_ops
from .errors import DimensionMismatchError, RehearsalUnavailableError
from .features import LabeledSample, samples_to_arrays
from .forest import Forest, init_forest
from .ilvq import DEFAULT_CAPACITY, DEFAULT_INSERTION_KAPPA, PrototypeMemory
from .metrics import MetricsReport, evaluate, report_from_counts
from .serialize import dumps_model, loads_model
from .stats import Standardizer


@dataclass
class TrainConfig:
    epochs: int = 40
    learning_rate: float = 2.0
    leaf_iterations: int = 10
    rehearsal_ratio: float = 1.0
    noise_scale: float = 0.05
    seed: int = 0
    batch_size: int = 32
    holdout: Sequence[LabeledSample] | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.leaf_iterations < 1:
            raise ValueError("leaf_iterations must be >= 1")
        if self.rehearsal_ratio < 0:
            raise ValueError("rehearsal_ratio must be >= 0")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class TrainedModel:
    """Forest plus the memory that owns its input standardization."""

    forest: Forest
    memory: PrototypeMemory

    def standardizer(self) -> Standardizer:
        return self.memory.stats.standardizer()

    def predict_proba(self, X_raw: np.ndarray) -> np.ndarray:
        return forest_ops.predict_proba(self.forest, self.standardizer().transform(X_raw))

    def to_text(self) -> str:
        return dumps_model(self.forest, self.memory)

    @classmethod
    def from_text(cls, text: str) -> "TrainedModel":
        forest, memory = loads_model(text)
        return cls(forest, memory)


EpochCallback = Callable[[int, dict[str, float]], None]


def train_incremental(forest: Forest, memory: PrototypeMemory,
                      new_samples: Sequence[LabeledSample], cfg: TrainConfig,
                      on_epoch: EpochCallback | None = None) -> tuple[Forest, MetricsReport]:
    """Retrain the forest from new labels plus synthesized rehearsal data.

    Synthetic samples are drawn from the memory as it stood before the new
    samples are absorbed, so rehearsal reflects past data only. Every new
    sample is then fed to the prototype memory, the combined set is
    standardized against the updated running statistics, and the forest runs
    ``epochs`` rounds of mini-batched routing SGD followed by a leaf
    fixed-point update. Deterministic for a fixed config seed.

    Returns the retrained forest (version + 1) and metrics on the config
    holdout (falling back to the training set). With nothing to train on the
    input forest is returned unchanged, version bump suppressed.
    """
    for s in new_samples:
        if s.features.values.shape != (forest.dimension,):
            raise DimensionMismatchError(
                f"sample dimension {s.features.values.shape} != model {forest.dimension}")
    if memory.dimension != forest.dimension:
        raise DimensionMismatchError("memory dimension does not match forest")

    rng = np.random.default_rng(cfg.seed)
    n_synthetic = math.ceil(cfg.rehearsal_ratio * len(new_samples))
    if n_synthetic > 0 and len(memory) == 0:
        raise RehearsalUnavailableError(
            "rehearsal requested but prototype memory is empty; set rehearsal_ratio=0")

    memory.noise_scale = cfg.noise_scale
    synthetic = memory.generate_synthetic(n_synthetic, rng) if n_synthetic else []
    for s in new_samples:
        memory.learn(s)

    train_set = list(new_samples) + synthetic
    if not train_set:
        return forest, _holdout_report(forest, memory, cfg)

    scaler = memory.standardizer()
    X_raw, y = samples_to_arrays(train_set)
    X = scaler.transform(X_raw)

    current = forest
    for epoch in range(cfg.epochs):
        perm = rng.permutation(len(train_set))
        for start in range(0, len(train_set), cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            current, _ = forest_ops.grad_step(current, X[idx], y[idx], cfg.learning_rate)
        current = forest_ops.update_leaves(current, X, y, cfg.leaf_iterations)
        if on_epoch is not None:
            report = _epoch_report(current, memory, cfg, X, y)
            report["nll"] = forest_ops.forest_nll(current, X, y)
            on_epoch(epoch, report)

    current = replace(current, version=forest.version + 1)
    return current, _holdout_report(current, memory, cfg, fallback=(X, y))


def _epoch_report(forest: Forest, memory: PrototypeMemory, cfg: TrainConfig,
                  X_train: np.ndarray, y_train: np.ndarray) -> dict[str, float]:
    if cfg.holdout:
        Xh, yh = samples_to_arrays(list(cfg.holdout))
        rep = evaluate(forest, memory.standardizer().transform(Xh), yh)
    else:
        rep = evaluate(forest, X_train, y_train)
    return {"accuracy": rep.accuracy, "precision": rep.precision,
            "recall": rep.recall, "f1": rep.f1}


def _holdout_report(forest: Forest, memory: PrototypeMemory, cfg: TrainConfig,
                    fallback: tuple[np.ndarray, np.ndarray] | None = None) -> MetricsReport:
    if cfg.holdout:
        Xh, yh = samples_to_arrays(list(cfg.holdout))
        return evaluate(forest, memory.standardizer().transform(Xh), yh)
    if fallback is not None:
        return evaluate(forest, fallback[0], fallback[1])
    return report_from_counts(0, 0, 0, 0)


def train_initial(samples: Sequence[LabeledSample], cfg: TrainConfig,
                  n_trees: int = 5, depth: int = 4,
                  capacity: int = DEFAULT_CAPACITY,
                  insertion_kappa: float = DEFAULT_INSERTION_KAPPA,
                  on_epoch: EpochCallback | None = None) -> tuple[TrainedModel, MetricsReport]:
    """Version-1 training from a labeled file: plain (no rehearsal), but the
    memory absorbs every sample so later retrains can rehearse."""
    if not samples:
        raise ValueError("initial training requires at least one sample")
    dimension = samples[0].features.values.shape[0]
    memory = PrototypeMemory(dimension, capacity=capacity,
                             insertion_kappa=insertion_kappa,
                             noise_scale=cfg.noise_scale)
    forest = init_forest(dimension, n_trees=n_trees, depth=depth,
                         seed=cfg.seed, version=0)
    initial_cfg = replace(cfg, rehearsal_ratio=0.0)
    forest, report = train_incremental(forest, memory, samples, initial_cfg, on_epoch)
    return TrainedModel(forest, memory), report
