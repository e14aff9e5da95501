"""Append-only provenance store linking reduced artifacts to their originals.

One JSON object per line, keyed by content hash. Records rewrite the file to
a temp path and rename over the original, so a crash mid-record leaves the
previous manifest intact; prior lines are carried over byte-for-byte. A
sibling .lock file serializes writers; readers never lock (rename is atomic,
they see the old or the new file, both parseable).
"""

from __future__ import annotations

import fcntl
import hashlib
import json
import os
import re
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path

from .reduce import ReductionParams, ReductionReport

_SHA256_RE = re.compile(r"^[0-9a-f]{64}$")
_HASH_CHUNK = 1 << 20


class ManifestError(Exception):
    pass


class FileMissing(ManifestError):
    pass


class NotFound(ManifestError):
    pass


class UnknownEntry(ManifestError):
    pass


class VerifyStatus(str, Enum):
    ok = "ok"
    original_missing = "original_missing"
    original_modified = "original_modified"
    reduced_missing = "reduced_missing"
    reduced_modified = "reduced_modified"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        while True:
            block = fh.read(_HASH_CHUNK)
            if not block:
                return h.hexdigest()
            h.update(block)


@dataclass(frozen=True)
class FileStamp:
    path: str
    sha256: str
    bytes: int

    def __post_init__(self):
        if not _SHA256_RE.match(self.sha256):
            raise ValueError(f"sha256 must be 64 lowercase hex chars, got {self.sha256!r}")
        if self.bytes < 0:
            raise ValueError("byte count must be >= 0")

    def to_dict(self) -> dict:
        return {"path": self.path, "sha256": self.sha256, "bytes": self.bytes}

    @classmethod
    def from_dict(cls, d: dict) -> "FileStamp":
        return cls(path=str(d["path"]), sha256=str(d["sha256"]), bytes=int(d["bytes"]))

    @classmethod
    def of(cls, path) -> "FileStamp":
        p = Path(path)
        if not p.is_file():
            raise FileMissing(str(p))
        return cls(path=str(p), sha256=sha256_file(p), bytes=p.stat().st_size)


@dataclass(frozen=True)
class ManifestEntry:
    entry_id: str
    proposal_id: str
    original: FileStamp
    reduced: FileStamp
    params: ReductionParams
    report: ReductionReport
    created_at: str  # RFC3339 UTC

    def to_dict(self) -> dict:
        return {
            "entry_id": self.entry_id,
            "proposal_id": self.proposal_id,
            "original": self.original.to_dict(),
            "reduced": self.reduced.to_dict(),
            "params": self.params.to_dict(),
            "report": self.report.to_dict(),
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ManifestEntry":
        return cls(
            entry_id=str(d["entry_id"]),
            proposal_id=str(d["proposal_id"]),
            original=FileStamp.from_dict(d["original"]),
            reduced=FileStamp.from_dict(d["reduced"]),
            params=ReductionParams.from_dict(d["params"]),
            report=ReductionReport.from_dict(d["report"]),
            created_at=str(d["created_at"]),
        )


@dataclass(frozen=True)
class RecordOutcome:
    entry: ManifestEntry
    duplicate: bool  # reduced hash was already recorded; entry is the prior one


class ManifestStore:
    """JSON-lines manifest at ``path``; missing file means empty store."""

    def __init__(self, path):
        self.path = Path(path)
        self.lock_path = self.path.with_name(self.path.name + ".lock")

    def _raw_lines(self) -> list[bytes]:
        try:
            data = self.path.read_bytes()
        except FileNotFoundError:
            return []
        return [ln for ln in data.split(b"\n") if ln.strip()]

    def entries(self) -> list[ManifestEntry]:
        return [ManifestEntry.from_dict(json.loads(ln)) for ln in self._raw_lines()]

    def __len__(self) -> int:
        return len(self._raw_lines())

    def _append_locked(self, entry: ManifestEntry) -> None:
        """Rewrite prior bytes verbatim plus one new line, then rename."""
        line = json.dumps(entry.to_dict(), separators=(",", ":"), sort_keys=True)
        old = b""
        try:
            old = self.path.read_bytes()
        except FileNotFoundError:
            pass
        if old and not old.endswith(b"\n"):
            old += b"\n"
        tmp = self.path.with_name(self.path.name + f".tmp.{os.getpid()}")
        with open(tmp, "wb") as fh:
            fh.write(old)
            fh.write(line.encode() + b"\n")
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, self.path)

    def record_reduction(
        self,
        orig_path,
        reduced_path,
        params: ReductionParams,
        report: ReductionReport,
        proposal_id: str,
    ) -> RecordOutcome:
        """Hash both files and append an entry under the writer lock.

        A reduced hash that already exists returns the existing entry with
        the duplicate flag set; nothing is written in that case.
        """
        original = FileStamp.of(orig_path)
        reduced = FileStamp.of(reduced_path)
        self.lock_path.touch(exist_ok=True)
        with open(self.lock_path, "rb") as lock:
            fcntl.flock(lock, fcntl.LOCK_EX)
            try:
                for entry in self.entries():
                    if entry.reduced.sha256 == reduced.sha256:
                        return RecordOutcome(entry=entry, duplicate=True)
                entry = ManifestEntry(
                    entry_id=uuid.uuid4().hex,
                    proposal_id=proposal_id,
                    original=original,
                    reduced=reduced,
                    params=params,
                    report=report,
                    created_at=datetime.now(timezone.utc).isoformat(),
                )
                self._append_locked(entry)
                return RecordOutcome(entry=entry, duplicate=False)
            finally:
                fcntl.flock(lock, fcntl.LOCK_UN)

    def get_entry(self, entry_id: str) -> ManifestEntry:
        for entry in self.entries():
            if entry.entry_id == entry_id:
                return entry
        raise UnknownEntry(entry_id)

    def lookup_original(self, reduced_sha256: str) -> ManifestEntry:
        """Entry whose reduced artifact has this hash, else NotFound."""
        for entry in self.entries():
            if entry.reduced.sha256 == reduced_sha256:
                return entry
        raise NotFound(f"no entry with reduced sha256 {reduced_sha256}")

    def latest_for_original(self, proposal_id: str, orig_path) -> ManifestEntry | None:
        """Most recent entry recorded for this proposal and original path."""
        hit = None
        for entry in self.entries():
            if entry.proposal_id == proposal_id and entry.original.path == str(orig_path):
                hit = entry
        return hit

    def verify_entry(self, entry_id: str) -> VerifyStatus:
        """Recompute hashes; report the first failure in declaration order."""
        entry = self.get_entry(entry_id)
        if not Path(entry.original.path).is_file():
            return VerifyStatus.original_missing
        if sha256_file(entry.original.path) != entry.original.sha256:
            return VerifyStatus.original_modified
        if not Path(entry.reduced.path).is_file():
            return VerifyStatus.reduced_missing
        if sha256_file(entry.reduced.path) != entry.reduced.sha256:
            return VerifyStatus.reduced_modified
        return VerifyStatus.ok


def record_reduction(store: ManifestStore, orig_path, reduced_path, params, report, proposal_id) -> RecordOutcome:
    return store.record_reduction(orig_path, reduced_path, params, report, proposal_id)


def lookup_original(store: ManifestStore, reduced_sha256: str) -> ManifestEntry:
    return store.lookup_original(reduced_sha256)


def verify_entry(store: ManifestStore, entry_id: str) -> VerifyStatus:
    return store.verify_entry(entry_id)
