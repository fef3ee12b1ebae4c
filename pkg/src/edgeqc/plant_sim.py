"""Six-stage process simulator: protocol streams with hidden quality labels.

Each batch draws a per-(phase, variable) setpoint (between-batch variation),
then scatters sensor readings around it (within-batch noise). The hidden
quality score is linear in the batch-level feature vector - the same slots
the ingest pipeline assembles - plus Gaussian noise; a batch is defective
when the score leaves the valid band. Everything is deterministic given the
config and seed, and the per-batch defect probability has a closed normal
form the tests check Monte Carlo estimates against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from datetime import datetime, timedelta, timezone
from statistics import NormalDist
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import EmptyInputError
from .features import (
    VARIABLES,
    FeatureManifest,
    FeatureVector,
    LabeledSample,
    default_manifest,
)
from .ingest import EndOfBatch, SensorReading, format_end_of_batch, format_reading

_NORMAL = NormalDist()

DEFAULT_START = datetime(2024, 5, 1, 8, 0, 0, tzinfo=timezone.utc)


@dataclass(frozen=True)
class VariableParams:
    """Generative parameters for one (phase, variable) signal."""

    mean: float
    batch_std: float   # between-batch setpoint spread
    sensor_std: float  # within-batch reading noise

    def __post_init__(self):
        if self.batch_std < 0 or self.sensor_std < 0:
            raise ValueError("stds must be >= 0")

    @property
    def reading_std(self) -> float:
        """Marginal std of a single reading (pooled)."""
        return math.sqrt(self.batch_std ** 2 + self.sensor_std ** 2)


@dataclass
class PlantConfig:
    variables: dict[tuple[int, str], VariableParams]
    manifest: FeatureManifest
    beta: np.ndarray           # hidden hardness coefficients per manifest slot
    intercept: float
    band: tuple[float, float]  # valid hardness range [lo, hi]
    hardness_noise: float
    static_readings: int = 6   # readings per (phase 1-4/6, variable)
    dynamic_ticks: int = 30    # phase-5 emission ticks per batch
    emission_period_s: float = 30.0  # two samples per minute
    phase_gap_s: float = 60.0
    static_period_s: float = 10.0

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        if self.beta.shape != (self.manifest.dimension,):
            raise ValueError("beta must match the manifest dimension")
        if self.band[0] >= self.band[1]:
            raise ValueError("band must satisfy lo < hi")
        if self.hardness_noise < 0:
            raise ValueError("hardness noise must be >= 0")
        if self.dynamic_ticks < 1 or self.static_readings < 1:
            raise ValueError("reading counts must be >= 1")
        if self.emission_period_s <= 0:
            raise ValueError("emission rate must be positive")
        for phase, var in self.variables:
            if var not in VARIABLES:
                raise ValueError(f"unknown variable {var!r}")
            if not 1 <= phase <= 6:
                raise ValueError(f"phase {phase} outside [1, 6]")
        for slot in self.manifest.slots:
            if (slot.phase, slot.variable) not in self.variables:
                raise ValueError(f"manifest slot {slot.name} has no generative params")

    # -- analytic quality distribution ---------------------------------

    def slot_params(self) -> list[tuple[VariableParams, int]]:
        """(params, readings averaged into the slot value) per manifest slot."""
        out = []
        for slot in self.manifest.slots:
            vp = self.variables[(slot.phase, slot.variable)]
            n = self.static_readings if slot.source == "static" else self.dynamic_ticks
            out.append((vp, n))
        return out

    def hardness_distribution(self) -> tuple[float, float]:
        """Exact (mean, std) of the hidden score across batches."""
        mean = self.intercept
        var = self.hardness_noise ** 2
        for beta_j, (vp, n) in zip(self.beta, self.slot_params()):
            mean += beta_j * vp.mean
            var += beta_j ** 2 * (vp.batch_std ** 2 + vp.sensor_std ** 2 / n)
        return mean, math.sqrt(var)

    def analytic_defect_rate(self) -> float:
        mean, std = self.hardness_distribution()
        lo, hi = self.band
        inside = _NORMAL.cdf((hi - mean) / std) - _NORMAL.cdf((lo - mean) / std)
        return 1.0 - inside


@dataclass
class SimulatedBatch:
    batch_id: str
    readings: list[SensorReading]
    end_marker: EndOfBatch
    features: np.ndarray      # batch-level manifest vector (slot means)
    true_hardness: float
    true_label: int

    def labeled_sample(self) -> LabeledSample:
        fv = FeatureVector(self.features, batch_id=self.batch_id,
                           sample_id=self.batch_id,
                           timestamp=self.end_marker.timestamp)
        return LabeledSample(fv, self.true_label)


def default_config() -> PlantConfig:
    """Well-separated stock process: strong feature-driven quality signal,
    defect prevalence about 48%."""
    manifest = default_manifest()
    variables = {
        (1, "temperature"): VariableParams(68.0, 1.5, 0.5),
        (1, "pH"): VariableParams(6.6, 0.12, 0.04),
        (1, "fat_ratio"): VariableParams(28.0, 1.2, 0.4),
        (2, "temperature"): VariableParams(74.0, 1.2, 0.4),
        (2, "pH"): VariableParams(6.4, 0.10, 0.04),
        (2, "fat_ratio"): VariableParams(31.0, 1.0, 0.35),
        (2, "pressure"): VariableParams(2.4, 0.12, 0.06),
        (3, "temperature"): VariableParams(38.0, 0.9, 0.3),
        (3, "pH"): VariableParams(5.6, 0.14, 0.05),
        (3, "fat_ratio"): VariableParams(30.0, 1.1, 0.35),
        (4, "frequency"): VariableParams(50.0, 0.8, 0.3),
        (4, "pressure"): VariableParams(3.1, 0.15, 0.08),
        (5, "temperature"): VariableParams(41.0, 1.4, 0.5),
        (5, "pH"): VariableParams(5.1, 0.16, 0.05),
        (5, "fat_ratio"): VariableParams(33.0, 1.5, 0.5),
        (5, "flow_rate"): VariableParams(1250.0, 90.0, 30.0),
        (5, "viscosity"): VariableParams(2900.0, 240.0, 80.0),
        (6, "temperature"): VariableParams(12.0, 0.6, 0.25),
    }
    # Effect sizes are fixed per slot in units of slot std, then divided out
    # so the hidden score variance decomposes predictably. The adjustable
    # phase-5 covariates carry most of the signal: that keeps the task
    # learnable from a few hundred batches and makes corrective settings and
    # phase-5 drift consequential.
    gammas = {
        "p1_temperature": 4.0, "p1_pH": -2.0, "p1_fat_ratio": 5.0,
        "p2_temperature": 3.0, "p2_pH": -2.0, "p2_fat_ratio": 4.0,
        "p3_temperature": -4.0, "p3_pH": 5.0, "p3_fat_ratio": 3.0,
        "p5_temperature": 30.0, "p5_pH": -24.0, "p5_fat_ratio": 30.0,
        "p5_flow_rate": -22.0, "p5_viscosity": 34.0,
    }
    static_readings, dynamic_ticks = 6, 30
    beta = np.zeros(manifest.dimension)
    for j, slot in enumerate(manifest.slots):
        vp = variables[(slot.phase, slot.variable)]
        n = static_readings if slot.source == "static" else dynamic_ticks
        slot_std = math.sqrt(vp.batch_std ** 2 + vp.sensor_std ** 2 / n)
        beta[j] = gammas[slot.name] / slot_std
    hardness_noise = 6.0
    target_center = 1800.0
    intercept = target_center - sum(
        beta[j] * variables[(s.phase, s.variable)].mean
        for j, s in enumerate(manifest.slots))
    signal_std = math.sqrt(sum(g * g for g in gammas.values()) + hardness_noise ** 2)
    half_width = signal_std * _NORMAL.inv_cdf((1 + 0.52) / 2)  # 48% defects
    band = (target_center - half_width, target_center + half_width)
    return PlantConfig(variables, manifest, beta, intercept, band, hardness_noise,
                       static_readings=static_readings, dynamic_ticks=dynamic_ticks)


def simulate_batch(cfg: PlantConfig, rng: np.random.Generator, batch_id: str,
                   start: datetime = DEFAULT_START) -> SimulatedBatch:
    """Generate one batch: readings across phases 1-6 in timestamp order,
    the hidden quality score, and its label."""
    ordered = sorted(cfg.variables)
    setpoints = {}
    for key in ordered:
        vp = cfg.variables[key]
        setpoints[key] = vp.mean + vp.batch_std * rng.standard_normal()

    readings: list[SensorReading] = []
    reading_values: dict[tuple[int, str], np.ndarray] = {}
    cursor = start
    for phase in (1, 2, 3, 4, 5, 6):
        phase_vars = [key for key in ordered if key[0] == phase]
        if not phase_vars:
            continue
        n = cfg.dynamic_ticks if phase == 5 else cfg.static_readings
        period = cfg.emission_period_s if phase == 5 else cfg.static_period_s
        draws = {key: setpoints[key]
                 + cfg.variables[key].sensor_std * rng.standard_normal(n)
                 for key in phase_vars}
        for k in range(n):
            ts = cursor + timedelta(seconds=k * period)
            for key in phase_vars:
                readings.append(SensorReading(ts, batch_id, phase, key[1],
                                              float(draws[key][k])))
        for key in phase_vars:
            reading_values[key] = draws[key]
        cursor += timedelta(seconds=n * period + cfg.phase_gap_s)

    features = np.array([
        reading_values[(slot.phase, slot.variable)].mean()
        for slot in cfg.manifest.slots])
    hardness = float(features @ cfg.beta + cfg.intercept
                     + cfg.hardness_noise * rng.standard_normal())
    label = int(not cfg.band[0] <= hardness <= cfg.band[1])
    end_marker = EndOfBatch(cursor, batch_id)
    return SimulatedBatch(batch_id, readings, end_marker, features, hardness, label)


def simulate_batches(cfg: PlantConfig, n: int, seed: int,
                     start: datetime = DEFAULT_START,
                     id_prefix: str = "B") -> Iterable[SimulatedBatch]:
    """Sequential batches with stable ids; batch k starts after batch k-1 ends."""
    if n < 1:
        raise ValueError("need at least one batch")
    rng = np.random.default_rng(seed)
    cursor = start
    for k in range(n):
        batch = simulate_batch(cfg, rng, f"{id_prefix}{k + 1:04d}", cursor)
        cursor = batch.end_marker.timestamp + timedelta(seconds=cfg.phase_gap_s)
        yield batch


def emit(batch: SimulatedBatch, sink: IO[str]) -> int:
    """Write a batch as protocol lines, EOB-terminated; returns line count."""
    n = 0
    for reading in batch.readings:
        sink.write(format_reading(reading) + "\n")
        n += 1
    sink.write(format_end_of_batch(batch.end_marker) + "\n")
    return n + 1


def inject_drift(cfg: PlantConfig, shifts: dict[tuple[int, str], float]) -> PlantConfig:
    """New config with setpoint means offset; everything else unchanged."""
    variables = dict(cfg.variables)
    for key, offset in shifts.items():
        if key not in variables:
            raise ValueError(f"unknown variable {key!r}")
        variables[key] = replace(variables[key], mean=variables[key].mean + offset)
    return replace(cfg, variables=variables)


def phase5_drift(cfg: PlantConfig, n_stds: float = 2.0) -> dict[tuple[int, str], float]:
    """Benchmark drift: every phase-5 mean moves by n pooled reading stds."""
    return {key: n_stds * vp.reading_std
            for key, vp in cfg.variables.items() if key[0] == 5}


@dataclass(frozen=True)
class ConfusionReport:
    alarm_defect: int
    no_alarm_defect: int
    alarm_good: int
    no_alarm_good: int

    @property
    def total(self) -> int:
        return self.alarm_defect + self.no_alarm_defect + self.alarm_good + self.no_alarm_good

    @property
    def alarm_precision(self) -> float | None:
        fired = self.alarm_defect + self.alarm_good
        return self.alarm_defect / fired if fired else None

    @property
    def no_alarm_correctness(self) -> float | None:
        quiet = self.no_alarm_defect + self.no_alarm_good
        return self.no_alarm_good / quiet if quiet else None


def score_alarms(outcomes: Sequence[tuple[int, bool]]) -> ConfusionReport:
    """Tally (true_label, alarm_fired) pairs into the alarm confusion matrix."""
    if not outcomes:
        raise EmptyInputError("no outcomes to score")
    ad = nd = ag = ng = 0
    for label, fired in outcomes:
        if label == 1:
            ad, nd = (ad + 1, nd) if fired else (ad, nd + 1)
        else:
            ag, ng = (ag + 1, ng) if fired else (ag, ng + 1)
    return ConfusionReport(ad, nd, ag, ng)


def batch_samples(cfg: PlantConfig, n: int, seed: int,
                  id_prefix: str = "B") -> list[LabeledSample]:
    """Batch-level labeled samples (one row per batch) for training files."""
    return [b.labeled_sample() for b in simulate_batches(cfg, n, seed, id_prefix=id_prefix)]
