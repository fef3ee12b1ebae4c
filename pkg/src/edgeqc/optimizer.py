"""Grid search over the five adjustable process covariates.

The grid is specified in original sensor units over manifest slots; every
candidate is standardized with the serving model's scaler and scored by the
forest. The returned assignment maximizes the predicted probability of good
quality, with ties broken by the smallest standardized deviation from the
current operating point, then by grid order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatchError, GridSpecError
from .features import FeatureManifest, FeatureVector
from .forest import Forest, predict_proba
from .stats import Standardizer

N_SEARCH_DIMS = 5
DEFAULT_CAP = 100_000
DEFAULT_POINTS_PER_DIM = 7


@dataclass(frozen=True)
class GridDim:
    slot: int      # index into the feature manifest
    lower: float   # bounds in original units
    upper: float
    points: int


@dataclass(frozen=True)
class CovariateGrid:
    dims: tuple[GridDim, ...]

    def __post_init__(self):
        if len(self.dims) != N_SEARCH_DIMS:
            raise GridSpecError(f"grid needs exactly {N_SEARCH_DIMS} dims, got {len(self.dims)}")
        slots = [d.slot for d in self.dims]
        if len(set(slots)) != len(slots):
            raise GridSpecError("grid slots must be distinct")
        for d in self.dims:
            if d.points < 1:
                raise GridSpecError(f"slot {d.slot}: points must be >= 1")
            if d.lower > d.upper:
                raise GridSpecError(f"slot {d.slot}: lower {d.lower} > upper {d.upper}")

    @property
    def total_points(self) -> int:
        n = 1
        for d in self.dims:
            n *= d.points
        return n

    @property
    def slots(self) -> tuple[int, ...]:
        return tuple(d.slot for d in self.dims)

    def to_json(self) -> str:
        dims = [{"slot": d.slot, "lower": d.lower, "upper": d.upper, "points": d.points}
                for d in self.dims]
        return json.dumps({"dims": dims}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "CovariateGrid":
        raw = json.loads(text)
        return cls(tuple(GridDim(int(d["slot"]), float(d["lower"]),
                                 float(d["upper"]), int(d["points"]))
                         for d in raw["dims"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "CovariateGrid":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class OptimizationResult:
    slots: tuple[int, ...]
    best_assignment: tuple[float, ...]  # standardized (model-space) values
    p_good: float
    p_base: float
    evaluations: int
    base_sample_id: str
    model_version: int


@dataclass(frozen=True)
class Correction:
    variable: str
    current: float
    suggested: float
    delta: float


def build_grid(grid: CovariateGrid, cap: int = DEFAULT_CAP) -> np.ndarray:
    """All grid points as an (N, 5) array in original units, ordered
    lexicographically: first dim slowest, values ascending."""
    if grid.total_points > cap:
        raise GridSpecError(f"grid has {grid.total_points} points, cap is {cap}")
    axes = [np.linspace(d.lower, d.upper, d.points) for d in grid.dims]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack(mesh, axis=-1).reshape(-1, N_SEARCH_DIMS)


def optimize(forest: Forest, scaler: Standardizer, base: FeatureVector,
             grid: CovariateGrid, cap: int = DEFAULT_CAP) -> OptimizationResult:
    """Exhaustively score every grid point against the forest.

    Deterministic: the winner maximizes p(good); exact ties prefer the
    candidate closest (standardized Euclidean) to the base values at the
    searched slots, then the earliest point in grid order.
    """
    if base.values.shape[0] != forest.dimension:
        raise DimensionMismatchError(
            f"base dimension {base.values.shape[0]} != model {forest.dimension}")
    for d in grid.dims:
        if not 0 <= d.slot < forest.dimension:
            raise GridSpecError(f"slot {d.slot} outside model dimension {forest.dimension}")

    points = build_grid(grid, cap)
    slots = list(grid.slots)
    z_base = scaler.transform(base.values)
    z_points = (points - scaler.mean[slots]) / scaler.std[slots]

    candidates = np.tile(z_base, (len(points), 1))
    candidates[:, slots] = z_points
    p_good = predict_proba(forest, candidates)[:, 0]
    p_base = float(predict_proba(forest, z_base[None, :])[0, 0])

    best_p = p_good.max()
    tied = np.flatnonzero(p_good == best_p)
    deviations = np.sqrt(np.sum((z_points[tied] - z_base[slots]) ** 2, axis=1))
    winner = tied[int(np.argmin(deviations))]

    return OptimizationResult(
        slots=grid.slots,
        best_assignment=tuple(float(v) for v in z_points[winner]),
        p_good=float(best_p),
        p_base=p_base,
        evaluations=len(points),
        base_sample_id=base.sample_id,
        model_version=forest.version,
    )


def suggest_correction(result: OptimizationResult, base: FeatureVector,
                       manifest: FeatureManifest,
                       scaler: Standardizer) -> list[Correction]:
    """Per-variable corrections in original units, largest move first."""
    entries = []
    for slot, z in zip(result.slots, result.best_assignment):
        suggested = z * scaler.std[slot] + scaler.mean[slot]
        current = float(base.values[slot])
        entries.append(Correction(
            variable=manifest.slots[slot].name,
            current=current,
            suggested=float(suggested),
            delta=float(suggested - current),
        ))
    entries.sort(key=lambda c: (-abs(c.delta), c.variable))
    return entries


def grid_from_observations(manifest: FeatureManifest, X_raw: np.ndarray,
                           points_per_dim: int = DEFAULT_POINTS_PER_DIM) -> CovariateGrid:
    """Default search space: the manifest's five dynamic slots bounded by the
    observed minima/maxima of a reference dataset."""
    dynamic = manifest.dynamic_indices()
    if len(dynamic) != N_SEARCH_DIMS:
        raise GridSpecError(
            f"default grid expects {N_SEARCH_DIMS} dynamic slots, manifest has {len(dynamic)}")
    X_raw = np.asarray(X_raw, dtype=float)
    dims = tuple(
        GridDim(slot, float(X_raw[:, slot].min()), float(X_raw[:, slot].max()), points_per_dim)
        for slot in dynamic)
    return CovariateGrid(dims)
