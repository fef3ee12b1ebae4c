"""File-backed run registry: parameters, step metrics, model artifacts.

Layout under one root directory:

    runs.log             newline-delimited JSON events (runs, metrics, artifacts)
    artifacts/<run>/<name>   raw artifact bytes
    .lock                single-writer lock file (flock)

Writers append with flush+fsync under the lock; readers replay the log and
skip a torn trailing line, so a restarted process sees every committed
record. Metric entries and artifacts are append-only.
"""

from __future__ import annotations

import fcntl
import hashlib
import json
import os
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .errors import ConflictError, ImmutableRunError, NotFoundError, StorageError
from .training import TrainedModel

MODEL_ARTIFACT = "model.txt"
GRID_ARTIFACT = "grid.json"

RUNNING = "running"
FINISHED = "finished"
FAILED = "failed"


@dataclass
class Run:
    run_id: int
    created_at: str
    params: dict[str, str]
    status: str = RUNNING

    def as_dict(self) -> dict:
        return {"run_id": self.run_id, "created_at": self.created_at,
                "params": self.params, "status": self.status}


@dataclass(frozen=True)
class MetricEntry:
    run_id: int
    name: str
    step: int
    value: float
    timestamp: str


@dataclass(frozen=True)
class ArtifactRef:
    run_id: int
    name: str
    path: str  # relative to the registry root
    size: int
    sha256: str


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class Registry:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "artifacts").mkdir(exist_ok=True)
        self._log_path = self.root / "runs.log"
        self._lock_path = self.root / ".lock"
        self._runs: dict[int, Run] = {}
        self._metrics: dict[int, list[MetricEntry]] = {}
        self._artifacts: dict[int, dict[str, ArtifactRef]] = {}
        self._replay()

    @contextmanager
    def _writer_lock(self):
        with open(self._lock_path, "w") as fh:
            fcntl.flock(fh, fcntl.LOCK_EX)
            try:
                yield
            finally:
                fcntl.flock(fh, fcntl.LOCK_UN)

    def _append(self, event: dict) -> None:
        try:
            with open(self._log_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(event, separators=(",", ":")) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as err:
            raise StorageError(f"cannot append to {self._log_path}: {err}") from err

    def _replay(self) -> None:
        if not self._log_path.exists():
            return
        for line in self._log_path.read_text(encoding="utf-8").splitlines():
            try:
                event = json.loads(line)
            except json.JSONDecodeError:
                continue  # torn tail from an interrupted write
            self._apply(event)

    def _apply(self, event: dict) -> None:
        kind = event["event"]
        if kind == "run_start":
            run = Run(event["run_id"], event["created_at"], event["params"])
            self._runs[run.run_id] = run
            self._metrics.setdefault(run.run_id, [])
            self._artifacts.setdefault(run.run_id, {})
        elif kind == "run_end":
            self._runs[event["run_id"]].status = event["status"]
        elif kind == "metric":
            entry = MetricEntry(event["run_id"], event["name"], event["step"],
                                event["value"], event["ts"])
            self._metrics[entry.run_id].append(entry)
        elif kind == "artifact":
            ref = ArtifactRef(event["run_id"], event["name"], event["path"],
                              event["size"], event["sha256"])
            self._artifacts[ref.run_id][ref.name] = ref

    # -- runs ------------------------------------------------------------

    def start_run(self, params: dict[str, str] | None = None) -> Run:
        with self._writer_lock():
            run_id = max(self._runs, default=0) + 1
            run = Run(run_id, _now(), dict(params or {}))
            self._append({"event": "run_start", "run_id": run_id,
                          "created_at": run.created_at, "params": run.params})
            self._apply({"event": "run_start", "run_id": run_id,
                         "created_at": run.created_at, "params": run.params})
            return run

    def finish_run(self, run_id: int, status: str = FINISHED) -> Run:
        if status not in (FINISHED, FAILED):
            raise ValueError(f"invalid terminal status {status!r}")
        with self._writer_lock():
            run = self._require_running(run_id)
            self._append({"event": "run_end", "run_id": run_id, "status": status})
            run.status = status
            return run

    def get_run(self, run_id: int) -> Run:
        run = self._runs.get(run_id)
        if run is None:
            raise NotFoundError(f"no run {run_id}")
        return run

    def list_runs(self) -> list[Run]:
        return [self._runs[k] for k in sorted(self._runs)]

    def _require_running(self, run_id: int) -> Run:
        run = self.get_run(run_id)
        if run.status != RUNNING:
            raise ImmutableRunError(f"run {run_id} is {run.status}")
        return run

    # -- metrics ---------------------------------------------------------

    def log_metric(self, run_id: int, name: str, step: int, value: float) -> None:
        if step < 0:
            raise ValueError("step must be >= 0")
        with self._writer_lock():
            self._require_running(run_id)
            if any(m.name == name and m.step == step for m in self._metrics[run_id]):
                raise ConflictError(f"metric ({name}, step {step}) already logged for run {run_id}")
            event = {"event": "metric", "run_id": run_id, "name": name,
                     "step": step, "value": float(value), "ts": _now()}
            self._append(event)
            self._apply(event)

    def metrics(self, run_id: int, name: str | None = None) -> list[MetricEntry]:
        self.get_run(run_id)
        entries = self._metrics[run_id]
        if name is not None:
            entries = [m for m in entries if m.name == name]
        return sorted(entries, key=lambda m: (m.name, m.step))

    # -- artifacts -------------------------------------------------------

    def store_artifact(self, run_id: int, name: str, data: bytes) -> ArtifactRef:
        if "/" in name or name in ("", ".", ".."):
            raise ValueError(f"invalid artifact name {name!r}")
        with self._writer_lock():
            self.get_run(run_id)
            if name in self._artifacts[run_id]:
                raise ConflictError(f"artifact {name!r} already stored for run {run_id}")
            rel = f"artifacts/{run_id}/{name}"
            target = self.root / rel
            target.parent.mkdir(parents=True, exist_ok=True)
            digest = hashlib.sha256(data).hexdigest()
            try:
                with open(target, "wb") as fh:
                    fh.write(data)
                    fh.flush()
                    os.fsync(fh.fileno())
            except OSError as err:
                raise StorageError(f"cannot write {target}: {err}") from err
            event = {"event": "artifact", "run_id": run_id, "name": name,
                     "path": rel, "size": len(data), "sha256": digest}
            self._append(event)
            self._apply(event)
            return self._artifacts[run_id][name]

    def fetch_artifact(self, run_id: int, name: str, verify: bool = True) -> bytes:
        ref = self.artifact_ref(run_id, name)
        try:
            data = (self.root / ref.path).read_bytes()
        except OSError as err:
            raise StorageError(f"cannot read {ref.path}: {err}") from err
        if verify:
            digest = hashlib.sha256(data).hexdigest()
            if digest != ref.sha256:
                raise StorageError(
                    f"digest mismatch for {ref.path}: {digest} != {ref.sha256}")
        return data

    def artifact_ref(self, run_id: int, name: str) -> ArtifactRef:
        self.get_run(run_id)
        ref = self._artifacts[run_id].get(name)
        if ref is None:
            raise NotFoundError(f"no artifact {name!r} for run {run_id}")
        return ref

    def artifacts(self, run_id: int) -> list[ArtifactRef]:
        self.get_run(run_id)
        return list(self._artifacts[run_id].values())

    # -- models ----------------------------------------------------------

    def latest_model(self) -> tuple[TrainedModel, ArtifactRef]:
        """Model with the greatest version among finished runs."""
        best: tuple[int, int, ArtifactRef] | None = None
        for run in self.list_runs():
            if run.status != FINISHED:
                continue
            ref = self._artifacts[run.run_id].get(MODEL_ARTIFACT)
            if ref is None:
                continue
            text = self.fetch_artifact(run.run_id, MODEL_ARTIFACT).decode("utf-8")
            version = _peek_version(text)
            if best is None or (version, run.run_id) > best[:2]:
                best = (version, run.run_id, ref)
        if best is None:
            raise NotFoundError("no finished run holds a model artifact")
        ref = best[2]
        model = TrainedModel.from_text(
            self.fetch_artifact(ref.run_id, MODEL_ARTIFACT).decode("utf-8"))
        return model, ref


def _peek_version(text: str) -> int:
    for line in text.splitlines():
        if line.startswith("version "):
            return int(line.split()[1])
    raise StorageError("model artifact has no version line")
