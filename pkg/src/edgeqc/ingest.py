"""Wire protocol and the per-batch feature assembly session.

Line grammar (newline-delimited UTF-8, pipe separated):

    v1|<RFC3339 UTC>|<batch_id>|<phase 1-6>|<variable>|<decimal value>
    v1|<RFC3339 UTC>|<batch_id>|0|EOB|0          end-of-batch marker

Formatting is canonical (shortest float spelling, `Z`-suffixed timestamps);
parsing is liberal in numeric spellings, and ``format(parse(line)) == line``
holds on canonical lines such as everything the simulator emits.

The session aggregates phases 1-3 into running means, tracks the latest
phase-5 values, and emits one feature vector per phase-5 reading once every
manifest slot has data. Phases 4 and 6 are counted but unused. Readings more
than the tolerance window older than the newest one seen for their batch are
dropped with a counter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

from .errors import ProtocolError, UnknownBatchError
from .features import VARIABLES, FeatureManifest, FeatureVector

PROTOCOL_VERSION = "v1"
EOB_VARIABLE = "EOB"
DEFAULT_TOLERANCE = timedelta(seconds=60)


@dataclass(frozen=True)
class SensorReading:
    timestamp: datetime
    batch_id: str
    phase: int
    variable: str
    value: float


@dataclass(frozen=True)
class EndOfBatch:
    timestamp: datetime
    batch_id: str


@dataclass
class BatchSummary:
    batch_id: str
    readings_per_phase: dict[int, int]
    dropped: int
    vectors_emitted: int

    @property
    def total_readings(self) -> int:
        return sum(self.readings_per_phase.values())


def format_timestamp(ts: datetime) -> str:
    if ts.tzinfo is None:
        raise ValueError("timestamps must be timezone-aware UTC")
    return ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def parse_timestamp(text: str) -> datetime:
    try:
        ts = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        raise ProtocolError("timestamp", f"not an RFC3339 instant: {text!r}") from None
    if ts.tzinfo is None or ts.utcoffset() != timedelta(0):
        raise ProtocolError("timestamp", f"must be UTC: {text!r}")
    return ts


def parse_line(line: str) -> SensorReading | EndOfBatch:
    """Decode one protocol line; raises ProtocolError naming the bad field."""
    parts = line.rstrip("\r\n").split("|")
    if len(parts) != 6:
        raise ProtocolError("format", f"expected 6 pipe-separated fields, got {len(parts)}")
    version, ts_text, batch_id, phase_text, variable, value_text = parts
    if version != PROTOCOL_VERSION:
        raise ProtocolError("version", f"unsupported version {version!r}")
    ts = parse_timestamp(ts_text)
    if not batch_id:
        raise ProtocolError("batch_id", "empty batch id")

    try:
        phase = int(phase_text)
    except ValueError:
        raise ProtocolError("phase", f"not an integer: {phase_text!r}") from None
    if phase == 0:
        if variable != EOB_VARIABLE:
            raise ProtocolError("variable", "phase 0 is reserved for the EOB marker")
        return EndOfBatch(ts, batch_id)
    if not 1 <= phase <= 6:
        raise ProtocolError("phase", f"phase {phase} outside [1, 6]")

    if variable not in VARIABLES:
        raise ProtocolError("variable", f"unknown variable {variable!r}")
    try:
        value = float(value_text)
    except ValueError:
        raise ProtocolError("value", f"not a decimal value: {value_text!r}") from None
    if not math.isfinite(value):
        raise ProtocolError("value", f"non-finite value: {value_text!r}")
    return SensorReading(ts, batch_id, phase, variable, value)


def format_reading(reading: SensorReading) -> str:
    return "|".join([
        PROTOCOL_VERSION,
        format_timestamp(reading.timestamp),
        reading.batch_id,
        str(reading.phase),
        reading.variable,
        repr(float(reading.value)),
    ])


def format_end_of_batch(marker: EndOfBatch) -> str:
    return "|".join([
        PROTOCOL_VERSION, format_timestamp(marker.timestamp),
        marker.batch_id, "0", EOB_VARIABLE, "0",
    ])


@dataclass
class _BatchState:
    aggregates: dict[tuple[int, str], tuple[int, float]] = field(default_factory=dict)
    latest_dynamic: dict[str, float] = field(default_factory=dict)
    counts: dict[int, int] = field(default_factory=dict)
    max_ts: datetime | None = None
    dropped: int = 0
    emitted: int = 0


class IngestSession:
    """Single-threaded assembly state for one transport connection."""

    def __init__(self, manifest: FeatureManifest,
                 tolerance: timedelta = DEFAULT_TOLERANCE):
        self.manifest = manifest
        self.tolerance = tolerance
        self._batches: dict[str, _BatchState] = {}

    def active_batches(self) -> list[str]:
        return list(self._batches)

    def _state(self, batch_id: str) -> _BatchState:
        return self._batches.setdefault(batch_id, _BatchState())

    def observe(self, reading: SensorReading) -> FeatureVector | None:
        """Route one reading; returns a feature vector when one is ready."""
        state = self._state(reading.batch_id)
        if state.max_ts is not None and reading.timestamp < state.max_ts - self.tolerance:
            state.dropped += 1
            return None
        if state.max_ts is None or reading.timestamp > state.max_ts:
            state.max_ts = reading.timestamp
        state.counts[reading.phase] = state.counts.get(reading.phase, 0) + 1
        if reading.phase in (1, 2, 3):
            self._aggregate_static(state, reading)
            return None
        if reading.phase == 5:
            return self._observe_dynamic(state, reading)
        return None  # phases 4 and 6: counted, unused

    def aggregate_static(self, reading: SensorReading) -> None:
        """Fold one phase-1..3 reading into the running batch means."""
        if reading.phase not in (1, 2, 3):
            raise ValueError(f"static aggregation is for phases 1-3, got {reading.phase}")
        self.observe(reading)

    def static_mean(self, batch_id: str, phase: int, variable: str) -> float:
        state = self._batches[batch_id]
        return state.aggregates[(phase, variable)][1]

    def _aggregate_static(self, state: _BatchState, reading: SensorReading) -> None:
        key = (reading.phase, reading.variable)
        count, mean = state.aggregates.get(key, (0, 0.0))
        count += 1
        mean += (reading.value - mean) / count
        state.aggregates[key] = (count, mean)

    def _observe_dynamic(self, state: _BatchState, reading: SensorReading) -> FeatureVector | None:
        state.latest_dynamic[reading.variable] = reading.value
        values = []
        for slot in self.manifest.slots:
            if slot.source == "static":
                entry = state.aggregates.get((slot.phase, slot.variable))
                if entry is None:
                    return None
                values.append(entry[1])
            else:
                if slot.variable not in state.latest_dynamic:
                    return None
                values.append(state.latest_dynamic[slot.variable])
        vector = FeatureVector(
            values,
            batch_id=reading.batch_id,
            sample_id=f"{reading.batch_id}/{state.emitted}",
            timestamp=reading.timestamp,
        )
        state.emitted += 1
        return vector

    def end_batch(self, batch_id: str) -> BatchSummary:
        """Release all state for a batch and report its reading counts."""
        state = self._batches.pop(batch_id, None)
        if state is None:
            raise UnknownBatchError(f"no active batch {batch_id!r}")
        return BatchSummary(batch_id, dict(state.counts), state.dropped, state.emitted)
