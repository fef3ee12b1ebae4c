"""Incremental prototype memory with rehearsal-sample synthesis.

Prototypes are labeled reference vectors updated online toward incoming
samples. The memory doubles as the generative source for pseudo-rehearsal:
past knowledge is replayed by sampling prototypes (weighted by win count)
and adding per-feature Gaussian noise scaled to the running stream spread.

Prototype vectors are stored in original feature units; all distance
computations (winner search, insertion threshold, neighbor queries) run in
standardized coordinates derived from the memory's running statistics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, EmptyMemoryError
from .features import FeatureVector, LabeledSample
from .stats import RunningStats, Standardizer

DEFAULT_CAPACITY = 200
DEFAULT_INSERTION_KAPPA = 1.5


@dataclass(eq=False)
class Prototype:
    w: np.ndarray
    label: int
    win_count: int = 1
    created_at: int = 0

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float).copy()
        if self.win_count < 1:
            raise ValueError("win_count must be >= 1")


class PrototypeMemory:
    """Bounded set of labeled prototypes plus running feature statistics."""

    def __init__(self, dimension: int, capacity: int = DEFAULT_CAPACITY,
                 insertion_kappa: float = DEFAULT_INSERTION_KAPPA,
                 noise_scale: float = 0.05):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        if noise_scale < 0:
            raise ValueError("noise scale must be >= 0")
        self.dimension = dimension
        self.capacity = capacity
        self.insertion_kappa = insertion_kappa
        self.noise_scale = noise_scale
        self.prototypes: list[Prototype] = []
        self.stats = RunningStats(dimension)
        self.step = 0

    def __len__(self) -> int:
        return len(self.prototypes)

    def labels_present(self) -> set[int]:
        return {p.label for p in self.prototypes}

    def standardizer(self) -> Standardizer:
        return self.stats.standardizer()

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,):
            raise DimensionMismatchError(
                f"expected dimension {self.dimension}, got {x.shape}")
        return x

    def _distances(self, x: np.ndarray) -> np.ndarray:
        scale = self.stats.safe_std()
        W = np.stack([p.w for p in self.prototypes])
        return np.sqrt(np.sum(((W - x) / scale) ** 2, axis=1))

    def nearest(self, x: np.ndarray | FeatureVector, k: int = 1) -> list[tuple[Prototype, float]]:
        """k nearest prototypes by standardized Euclidean distance, ascending;
        ties broken by lower created_at."""
        if isinstance(x, FeatureVector):
            x = x.values
        x = self._check(x)
        if not self.prototypes:
            raise EmptyMemoryError("prototype memory is empty")
        if k < 1:
            raise ValueError("k must be >= 1")
        dist = self._distances(x)
        order = sorted(range(len(dist)), key=lambda i: (dist[i], self.prototypes[i].created_at))
        return [(self.prototypes[i], float(dist[i])) for i in order[:k]]

    def insertion_threshold(self) -> float:
        """kappa times the mean nearest-neighbor distance among prototypes;
        infinite with fewer than two prototypes."""
        if len(self.prototypes) < 2:
            return np.inf
        scale = self.stats.safe_std()
        W = np.stack([p.w for p in self.prototypes]) / scale
        diff = W[:, None, :] - W[None, :, :]
        dist = np.sqrt(np.sum(diff ** 2, axis=2))
        np.fill_diagonal(dist, np.inf)
        return self.insertion_kappa * float(np.mean(dist.min(axis=1)))

    def learn(self, sample: LabeledSample) -> None:
        """Absorb one labeled sample: insert a prototype or move the winner.

        The winner moves by (1/M)(x - w) after its win count M is incremented;
        the second-nearest prototype of the same class drifts along at rate
        1/(100 M). A sample farther than the insertion threshold from the
        winner, or with a different label, becomes a new prototype.
        """
        x = self._check(sample.features.values)
        y = sample.label
        self.stats.update(x)
        self.step += 1

        if not self.prototypes:
            self._insert(x, y)
            return

        threshold = self.insertion_threshold()
        dist = self._distances(x)
        order = sorted(range(len(dist)), key=lambda i: (dist[i], self.prototypes[i].created_at))
        winner = self.prototypes[order[0]]

        if winner.label != y or dist[order[0]] > threshold:
            self._insert(x, y)
            return

        winner.win_count += 1
        winner.w += (x - winner.w) / winner.win_count
        for i in order[1:]:
            p = self.prototypes[i]
            if p.label == y:
                p.w += (x - p.w) / (100.0 * p.win_count)
                break

    def _insert(self, x: np.ndarray, y: int) -> None:
        self.prototypes.append(Prototype(x, y, win_count=1, created_at=self.step))
        self.prune()

    def prune(self) -> None:
        """Drop lowest-win-count prototypes (ties: oldest) down to capacity,
        never removing the last prototype of a class present in memory."""
        while len(self.prototypes) > self.capacity:
            class_counts: dict[int, int] = {}
            for p in self.prototypes:
                class_counts[p.label] = class_counts.get(p.label, 0) + 1
            removable = [p for p in self.prototypes if class_counts[p.label] > 1]
            if not removable:
                break
            victim = min(removable, key=lambda p: (p.win_count, p.created_at))
            self.prototypes.remove(victim)

    def generate_synthetic(self, n: int, rng: np.random.Generator) -> list[LabeledSample]:
        """Draw n rehearsal samples: pick prototypes with probability
        proportional to win count, then jitter each feature with
        Normal(0, (noise_scale * running_std)^2) noise.
        """
        if n < 0:
            raise ValueError("n must be >= 0")
        if n == 0:
            return []
        if not self.prototypes:
            raise EmptyMemoryError("cannot synthesize from an empty memory")
        weights = np.array([p.win_count for p in self.prototypes], dtype=float)
        weights /= weights.sum()
        idx = rng.choice(len(self.prototypes), size=n, p=weights)
        noise = rng.standard_normal((n, self.dimension)) * (self.noise_scale * self.stats.std)
        samples = []
        for i, j in enumerate(idx):
            proto = self.prototypes[j]
            fv = FeatureVector(proto.w + noise[i], batch_id="synthetic",
                               sample_id=f"synthetic-{i}")
            samples.append(LabeledSample(fv, proto.label))
        return samples
