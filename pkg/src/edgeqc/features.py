"""Feature vocabulary, manifest, and sample containers.

A manifest fixes the layout of the model input vector: an ordered list of
slots, each either the static per-phase mean of a variable (phases 1-3) or
the latest dynamic phase-5 reading of a variable.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DimensionMismatchError

#: Controlled vocabulary of sensor variables.
VARIABLES = (
    "temperature",
    "pressure",
    "pH",
    "hardness",
    "fat_ratio",
    "protein_ratio",
    "lactose",
    "flow_rate",
    "viscosity",
    "frequency",
)

STATIC_PHASES = (1, 2, 3)
DYNAMIC_PHASE = 5


@dataclass(frozen=True)
class FeatureSlot:
    """One position of the model input vector."""

    phase: int
    variable: str
    source: str  # "static" (phase mean) or "dynamic" (latest phase-5 value)

    def __post_init__(self):
        if self.variable not in VARIABLES:
            raise ConfigError(f"unknown variable {self.variable!r}")
        if self.source == "static":
            if self.phase not in STATIC_PHASES:
                raise ConfigError(f"static slot phase must be in {STATIC_PHASES}")
        elif self.source == "dynamic":
            if self.phase != DYNAMIC_PHASE:
                raise ConfigError("dynamic slots must come from phase 5")
        else:
            raise ConfigError(f"unknown slot source {self.source!r}")

    @property
    def name(self) -> str:
        return f"p{self.phase}_{self.variable}"


class FeatureManifest:
    """Ordered, unique feature slots; defines the model dimension d."""

    def __init__(self, slots: Sequence[FeatureSlot]):
        slots = tuple(slots)
        if len(set(slots)) != len(slots):
            raise ConfigError("manifest slots must be unique")
        if not any(s.source == "dynamic" for s in slots):
            raise ConfigError("manifest needs at least one dynamic slot")
        self.slots = slots

    @property
    def dimension(self) -> int:
        return len(self.slots)

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.slots]

    def dynamic_indices(self) -> list[int]:
        return [i for i, s in enumerate(self.slots) if s.source == "dynamic"]

    def index_of(self, phase: int, variable: str) -> int:
        for i, s in enumerate(self.slots):
            if s.phase == phase and s.variable == variable:
                return i
        raise KeyError((phase, variable))

    def __len__(self) -> int:
        return len(self.slots)

    def __eq__(self, other) -> bool:
        return isinstance(other, FeatureManifest) and self.slots == other.slots

    def to_json(self) -> str:
        return json.dumps(
            [{"phase": s.phase, "variable": s.variable, "source": s.source} for s in self.slots],
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "FeatureManifest":
        raw = json.loads(text)
        return cls([FeatureSlot(r["phase"], r["variable"], r["source"]) for r in raw])

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "FeatureManifest":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def default_manifest() -> FeatureManifest:
    """Stock layout: phases 1-3 static means of {temperature, pH, fat_ratio},
    phase 5 dynamic {temperature, pH, fat_ratio, flow_rate, viscosity}; d = 14.
    """
    slots = [
        FeatureSlot(phase, var, "static")
        for phase in STATIC_PHASES
        for var in ("temperature", "pH", "fat_ratio")
    ]
    slots += [
        FeatureSlot(DYNAMIC_PHASE, var, "dynamic")
        for var in ("temperature", "pH", "fat_ratio", "flow_rate", "viscosity")
    ]
    return FeatureManifest(slots)


@dataclass
class FeatureVector:
    """One assembled model input, in original sensor units."""

    values: np.ndarray
    batch_id: str = ""
    sample_id: str = ""
    timestamp: datetime = field(default_factory=lambda: datetime.now(timezone.utc))

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1:
            raise DimensionMismatchError("feature vector must be one-dimensional")
        if not np.all(np.isfinite(self.values)):
            raise DimensionMismatchError("feature vector entries must be finite")


@dataclass
class LabeledSample:
    """Feature vector plus ground-truth class (0 = good, 1 = defective)."""

    features: FeatureVector
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")


def check_dimension(values: np.ndarray, d: int) -> None:
    if values.shape[-1] != d:
        raise DimensionMismatchError(f"expected dimension {d}, got {values.shape[-1]}")


def samples_to_arrays(samples: Sequence[LabeledSample]) -> tuple[np.ndarray, np.ndarray]:
    X = np.stack([s.features.values for s in samples])
    y = np.array([s.label for s in samples], dtype=int)
    return X, y


def write_labeled_csv(path: str | Path, manifest: FeatureManifest, samples: Iterable[LabeledSample]) -> int:
    """Write the labeled-data CSV (manifest slot names + ``label`` header)."""
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(manifest.names + ["label"])
        for s in samples:
            check_dimension(s.features.values, manifest.dimension)
            writer.writerow([repr(float(v)) for v in s.features.values] + [s.label])
            n += 1
    return n


def read_labeled_csv(path: str | Path, manifest: FeatureManifest) -> list[LabeledSample]:
    """Read a labeled-data CSV, validating the header against the manifest."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path}: empty labeled-data file") from None
        expected = manifest.names + ["label"]
        if header != expected:
            raise ConfigError(f"{path}: header mismatch; expected {expected}, got {header}")
        samples = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(expected):
                raise ConfigError(f"{path}:{lineno}: expected {len(expected)} columns")
            values = np.array([float(v) for v in row[:-1]])
            label = int(row[-1])
            fv = FeatureVector(values, sample_id=f"{path.name}:{lineno}")
            samples.append(LabeledSample(fv, label))
    if not samples:
        raise ConfigError(f"{path}: no data rows")
    return samples
