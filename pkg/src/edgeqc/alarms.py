"""Per-batch defect-rate alarms with latching semantics.

An alarm fires for a batch once at least ``min_count`` predictions exist and
the defect fraction strictly exceeds the threshold; it then stays latched
until the batch ends. Acknowledgment marks operator awareness without
unlatching.
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .errors import PreconditionError

DEFAULT_THRESHOLD = 0.5
DEFAULT_MIN_COUNT = 10
HISTORY_LIMIT = 256


@dataclass
class AlarmState:
    batch_id: str
    threshold: float = DEFAULT_THRESHOLD
    min_count: int = DEFAULT_MIN_COUNT
    total_predictions: int = 0
    defect_predictions: int = 0
    latched: bool = False
    fired_at: datetime | None = None
    acknowledged: bool = False
    ended: bool = False

    def record(self, defective: bool, now: datetime | None = None) -> None:
        self.total_predictions += 1
        if defective:
            self.defect_predictions += 1
        if (not self.latched
                and self.total_predictions >= self.min_count
                and self.defect_predictions / self.total_predictions > self.threshold):
            self.latched = True
            self.fired_at = now or datetime.now(timezone.utc)

    def as_dict(self) -> dict:
        return {
            "batch_id": self.batch_id,
            "threshold": self.threshold,
            "min_count": self.min_count,
            "total_predictions": self.total_predictions,
            "defect_predictions": self.defect_predictions,
            "latched": self.latched,
            "fired_at": self.fired_at.isoformat() if self.fired_at else None,
            "acknowledged": self.acknowledged,
            "ended": self.ended,
        }


class AlarmEngine:
    """Thread-safe registry of per-batch alarm states."""

    def __init__(self, threshold: float = DEFAULT_THRESHOLD,
                 min_count: int = DEFAULT_MIN_COUNT,
                 history_limit: int = HISTORY_LIMIT):
        if not 0 < threshold <= 1:
            raise ValueError("threshold must be in (0, 1]")
        if min_count < 1:
            raise ValueError("min_count must be >= 1")
        self.threshold = threshold
        self.min_count = min_count
        self._active: dict[str, AlarmState] = {}
        self._history: deque[AlarmState] = deque(maxlen=history_limit)
        self._lock = threading.Lock()

    def record_prediction(self, batch_id: str, defective: bool,
                          now: datetime | None = None) -> AlarmState:
        with self._lock:
            state = self._active.get(batch_id)
            if state is None:
                state = AlarmState(batch_id, self.threshold, self.min_count)
                self._active[batch_id] = state
            state.record(defective, now)
            return state

    def acknowledge(self, batch_id: str) -> AlarmState:
        """Mark a latched alarm as seen; idempotent."""
        with self._lock:
            state = self._active.get(batch_id)
            if state is None:
                state = next((s for s in reversed(self._history)
                              if s.batch_id == batch_id), None)
            if state is None or not state.latched:
                raise PreconditionError(f"no latched alarm for batch {batch_id!r}")
            state.acknowledged = True
            return state

    def end_batch(self, batch_id: str) -> AlarmState | None:
        """Move a batch to history; returns its final state (None if unseen)."""
        with self._lock:
            state = self._active.pop(batch_id, None)
            if state is not None:
                state.ended = True
                self._history.append(state)
            return state

    def status(self) -> list[AlarmState]:
        """Active batches first (insertion order), then recent history."""
        with self._lock:
            return list(self._active.values()) + list(self._history)

    def latched_batches(self) -> set[str]:
        with self._lock:
            active = {b for b, s in self._active.items() if s.latched}
            return active | {s.batch_id for s in self._history if s.latched}
