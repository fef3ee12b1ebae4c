"""Online per-feature statistics and the frozen standardizer derived from them."""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatchError

# Features with (near-)zero variance are passed through unscaled.
_MIN_STD = 1e-12


class RunningStats:
    """Single-pass per-feature mean/variance (Welford update).

    State is (count, mean, m2) where m2 is the sum of squared deviations;
    population variance = m2 / count.
    """

    def __init__(self, dimension: int, count: int = 0,
                 mean: np.ndarray | None = None, m2: np.ndarray | None = None):
        self.dimension = dimension
        self.count = count
        self.mean = np.zeros(dimension) if mean is None else np.asarray(mean, dtype=float).copy()
        self.m2 = np.zeros(dimension) if m2 is None else np.asarray(m2, dtype=float).copy()
        if self.mean.shape != (dimension,) or self.m2.shape != (dimension,):
            raise DimensionMismatchError("running stats state does not match dimension")

    def update(self, x: np.ndarray) -> None:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,):
            raise DimensionMismatchError(f"expected dimension {self.dimension}, got {x.shape}")
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)

    @property
    def variance(self) -> np.ndarray:
        if self.count == 0:
            return np.zeros(self.dimension)
        return self.m2 / self.count

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.variance)

    def safe_std(self) -> np.ndarray:
        s = self.std
        return np.where(s > _MIN_STD, s, 1.0)

    def copy(self) -> "RunningStats":
        return RunningStats(self.dimension, self.count, self.mean, self.m2)

    def standardizer(self) -> "Standardizer":
        """Freeze the current mean/std into an immutable transform."""
        return Standardizer(self.mean.copy(), self.safe_std())


class Standardizer:
    """Frozen affine z-score transform: z = (x - mean) / std."""

    def __init__(self, mean: np.ndarray, std: np.ndarray):
        self.mean = np.asarray(mean, dtype=float)
        self.std = np.asarray(std, dtype=float)
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise DimensionMismatchError("mean/std shape mismatch")
        if np.any(self.std <= 0):
            raise ValueError("standardizer std must be positive")

    @property
    def dimension(self) -> int:
        return self.mean.shape[0]

    @classmethod
    def identity(cls, dimension: int) -> "Standardizer":
        return cls(np.zeros(dimension), np.ones(dimension))

    def transform(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dimension:
            raise DimensionMismatchError(f"expected dimension {self.dimension}, got {x.shape[-1]}")
        return (x - self.mean) / self.std

    def inverse(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.shape[-1] != self.dimension:
            raise DimensionMismatchError(f"expected dimension {self.dimension}, got {z.shape[-1]}")
        return z * self.std + self.mean
