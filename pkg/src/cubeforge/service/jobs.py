"""Crash-consistent render job lifecycle: FIFO queue, worker threads, JSON state.

Each job persists as one JSON file under jobs_dir, rewritten atomically on
every transition, so a restarted process recovers the queue: done/failed jobs
reload as-is, queued jobs re-enqueue, jobs caught mid-run restart as queued.
State may only move queued -> running -> done | failed.
"""

from __future__ import annotations

import json
import os
import queue
import threading
import uuid
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

from ..raster import RenderSpec

STATES = ("queued", "running", "done", "failed")
_ALLOWED = {"queued": {"running"}, "running": {"done", "failed"}}


class InvalidTransition(Exception):
    pass


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass(frozen=True)
class JobRecord:
    job_id: str
    owner: str
    volume_ref: str  # reduced artifact sha256
    spec: RenderSpec
    state: str = "queued"
    submitted_at: str = ""
    finished_at: str | None = None
    result_ref: str | None = None
    error: str | None = None

    def __post_init__(self):
        if self.state not in STATES:
            raise ValueError(f"unknown state {self.state!r}")
        if (self.result_ref is not None) != (self.state == "done"):
            raise ValueError("result_ref must be present exactly when done")

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "owner": self.owner,
            "volume_ref": self.volume_ref,
            "spec": self.spec.to_dict(),
            "state": self.state,
            "submitted_at": self.submitted_at,
            "finished_at": self.finished_at,
            "result_ref": self.result_ref,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "JobRecord":
        return cls(
            job_id=str(d["job_id"]),
            owner=str(d["owner"]),
            volume_ref=str(d["volume_ref"]),
            spec=RenderSpec.from_dict(d["spec"]),
            state=str(d["state"]),
            submitted_at=str(d["submitted_at"]),
            finished_at=d.get("finished_at"),
            result_ref=d.get("result_ref"),
            error=d.get("error"),
        )


def spec_key(volume_ref: str, owner: str, spec: RenderSpec) -> str:
    """Canonical identity of a submission, for in-flight deduplication."""
    return json.dumps(
        {"owner": owner, "volume_ref": volume_ref, "spec": spec.to_dict()},
        sort_keys=True,
        separators=(",", ":"),
    )


class JobStore:
    """Thread-safe persistent registry of job records."""

    def __init__(self, jobs_dir):
        self.jobs_dir = Path(jobs_dir)
        self.jobs_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._records: dict[str, JobRecord] = {}
        self._inflight: dict[str, str] = {}  # spec_key -> job_id
        for path in sorted(self.jobs_dir.glob("*.json")):
            record = JobRecord.from_dict(json.loads(path.read_text()))
            if record.state == "running":  # interrupted by a previous shutdown
                record = replace(record, state="queued")
                self._write(record)
            self._records[record.job_id] = record
            if record.state == "queued":
                self._inflight[spec_key(record.volume_ref, record.owner, record.spec)] = (
                    record.job_id
                )

    def _write(self, record: JobRecord) -> None:
        path = self.jobs_dir / f"{record.job_id}.json"
        tmp = path.with_name(path.name + f".tmp.{os.getpid()}")
        tmp.write_text(json.dumps(record.to_dict(), sort_keys=True, indent=1))
        os.replace(tmp, path)

    def pending(self) -> list[JobRecord]:
        with self._lock:
            records = [r for r in self._records.values() if r.state == "queued"]
        return sorted(records, key=lambda r: (r.submitted_at, r.job_id))

    def submit(self, owner: str, volume_ref: str, spec: RenderSpec) -> tuple[JobRecord, bool]:
        """Create a queued job, or return the in-flight duplicate for the
        same (owner, volume, spec). Second element is True for duplicates."""
        key = spec_key(volume_ref, owner, spec)
        with self._lock:
            existing = self._inflight.get(key)
            if existing is not None:
                return self._records[existing], True
            record = JobRecord(
                job_id=uuid.uuid4().hex,
                owner=owner,
                volume_ref=volume_ref,
                spec=spec,
                state="queued",
                submitted_at=_now(),
            )
            self._write(record)
            self._records[record.job_id] = record
            self._inflight[key] = record.job_id
            return record, False

    def get(self, job_id: str) -> JobRecord | None:
        with self._lock:
            return self._records.get(job_id)

    def transition(self, job_id: str, state: str, result_ref=None, error=None) -> JobRecord:
        with self._lock:
            record = self._records[job_id]
            if state not in _ALLOWED.get(record.state, set()):
                raise InvalidTransition(f"{record.state} -> {state}")
            record = replace(
                record,
                state=state,
                result_ref=result_ref,
                error=error,
                finished_at=_now() if state in ("done", "failed") else None,
            )
            self._write(record)
            self._records[job_id] = record
            if state in ("done", "failed"):
                self._inflight.pop(spec_key(record.volume_ref, record.owner, record.spec), None)
            return record


class JobRunnerPool:
    """FIFO worker threads executing ``runner(record) -> result path``."""

    def __init__(self, store: JobStore, runner, workers: int = 1):
        self.store = store
        self.runner = runner
        self._queue: queue.Queue = queue.Queue()
        self._threads = [
            threading.Thread(target=self._work, name=f"render-worker-{i}", daemon=True)
            for i in range(workers)
        ]
        self._started = False

    def start(self) -> None:
        if self._started:
            return
        self._started = True
        for record in self.store.pending():  # recover jobs from a prior run
            self._queue.put(record.job_id)
        for t in self._threads:
            t.start()

    def stop(self) -> None:
        for _ in self._threads:
            self._queue.put(None)
        for t in self._threads:
            t.join(timeout=30)

    def enqueue(self, job_id: str) -> None:
        self._queue.put(job_id)

    def _work(self) -> None:
        while True:
            job_id = self._queue.get()
            if job_id is None:
                return
            try:
                self.store.transition(job_id, "running")
                result_ref = self.runner(self.store.get(job_id))
                self.store.transition(job_id, "done", result_ref=str(result_ref))
            except Exception as exc:
                record = self.store.get(job_id)
                if record is not None and record.state == "running":
                    self.store.transition(job_id, "failed", error=str(exc))
