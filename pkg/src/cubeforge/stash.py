"""Verified transfer of selected files from a volatile tree to permanent storage.

plan_stash is a pure dry-run: match include globs under the source root and
decide destination paths. execute_stash copies each file through a temp name,
checks the destination hash against the source, renames into place, and only
then (in move mode) deletes the source. Existing identical destinations are
skipped; differing ones are conflicts and the source is left untouched.
"""

from __future__ import annotations

import json
import os
import shutil
from dataclasses import dataclass, field
from pathlib import Path

from .manifest import sha256_file

MODES = ("copy", "move")


class StashError(Exception):
    pass


class SourceMissing(StashError):
    pass


class GlobSyntaxError(StashError):
    pass


class DestinationUnwritable(StashError):
    pass


@dataclass(frozen=True)
class StashPolicy:
    source_root: str
    dest_root: str
    include_globs: tuple[str, ...]
    mode: str = "copy"
    verify: bool = True  # move mode always verifies, whatever this says
    preserve_tree: bool = True

    def __post_init__(self):
        object.__setattr__(self, "include_globs", tuple(self.include_globs))
        if not self.include_globs:
            raise ValueError("at least one include glob is required")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        src = Path(self.source_root).resolve()
        dst = Path(self.dest_root).resolve()
        if src == dst or src in dst.parents or dst in src.parents:
            raise ValueError("source and destination roots must be distinct and non-nested")

    @property
    def must_verify(self) -> bool:
        return self.verify or self.mode == "move"

    def to_dict(self) -> dict:
        return {
            "source_root": self.source_root,
            "dest_root": self.dest_root,
            "include_globs": list(self.include_globs),
            "mode": self.mode,
            "verify": self.verify,
            "preserve_tree": self.preserve_tree,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StashPolicy":
        missing = [k for k in ("source_root", "dest_root", "include_globs") if k not in d]
        if missing:
            raise ValueError(f"policy is missing required keys: {', '.join(missing)}")
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        known["include_globs"] = tuple(known["include_globs"])
        return cls(**known)

    @classmethod
    def from_file(cls, path) -> "StashPolicy":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class PlanItem:
    source_path: str
    dest_path: str
    bytes: int

    def to_dict(self) -> dict:
        return {"source_path": self.source_path, "dest_path": self.dest_path, "bytes": self.bytes}


@dataclass(frozen=True)
class StashPlan:
    items: tuple[PlanItem, ...]

    def __len__(self) -> int:
        return len(self.items)

    def to_dict(self) -> dict:
        return {"items": [i.to_dict() for i in self.items]}


@dataclass(frozen=True)
class ItemResult:
    source_path: str
    dest_path: str
    bytes: int
    outcome: str  # copied | verified | moved | skipped_exists | failed:<reason>

    def to_dict(self) -> dict:
        return {
            "source_path": self.source_path,
            "dest_path": self.dest_path,
            "bytes": self.bytes,
            "outcome": self.outcome,
        }


@dataclass(frozen=True)
class StashReport:
    results: tuple[ItemResult, ...]  # one per plan item, sorted by dest path
    totals: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"results": [r.to_dict() for r in self.results], "totals": dict(self.totals)}


class Transport:
    """Storage backend operations execute_stash needs; local disk built in.

    Other backends (or fault hooks in tests) subclass and override.
    """

    def exists(self, path: Path) -> bool:
        raise NotImplementedError

    def size(self, path: Path) -> int:
        raise NotImplementedError

    def copy(self, src: Path, dst: Path) -> None:
        raise NotImplementedError

    def hash(self, path: Path) -> str:
        raise NotImplementedError

    def replace(self, src: Path, dst: Path) -> None:
        raise NotImplementedError

    def remove(self, path: Path) -> None:
        raise NotImplementedError

    def makedirs(self, path: Path) -> None:
        raise NotImplementedError


class LocalTransport(Transport):
    def exists(self, path: Path) -> bool:
        return Path(path).exists()

    def size(self, path: Path) -> int:
        return Path(path).stat().st_size

    def copy(self, src: Path, dst: Path) -> None:
        with open(src, "rb") as fin, open(dst, "wb") as fout:
            shutil.copyfileobj(fin, fout)
            fout.flush()
            os.fsync(fout.fileno())

    def hash(self, path: Path) -> str:
        return sha256_file(path)

    def replace(self, src: Path, dst: Path) -> None:
        os.replace(src, dst)

    def remove(self, path: Path) -> None:
        os.unlink(path)

    def makedirs(self, path: Path) -> None:
        Path(path).mkdir(parents=True, exist_ok=True)


def _check_glob(pattern: str) -> None:
    if not pattern or pattern.startswith(("/", "\\")) or ".." in pattern.split("/"):
        raise GlobSyntaxError(f"invalid include glob {pattern!r}")


def plan_stash(policy: StashPolicy) -> StashPlan:
    """Deterministic dry-run: sorted files matching any include glob.

    Destinations mirror the relative path under dest_root when preserve_tree,
    else collapse to the basename (colliding basenames are an error).
    """
    src_root = Path(policy.source_root)
    if not src_root.is_dir():
        raise SourceMissing(str(src_root))
    matches: set[Path] = set()
    for pattern in policy.include_globs:
        _check_glob(pattern)
        try:
            matches.update(p for p in src_root.glob(pattern) if p.is_file())
        except (ValueError, NotImplementedError) as exc:
            raise GlobSyntaxError(f"invalid include glob {pattern!r}: {exc}") from None
    dest_root = Path(policy.dest_root)
    items = []
    seen_dest = {}
    for path in sorted(matches, key=lambda p: str(p.relative_to(src_root))):
        rel = path.relative_to(src_root)
        dest = dest_root / (rel if policy.preserve_tree else rel.name)
        if str(dest) in seen_dest:
            raise StashError(
                f"plan maps {path} and {seen_dest[str(dest)]} to the same destination {dest}"
            )
        seen_dest[str(dest)] = path
        items.append(
            PlanItem(source_path=str(path), dest_path=str(dest), bytes=path.stat().st_size)
        )
    return StashPlan(items=tuple(items))


def _stash_one(item: PlanItem, policy: StashPolicy, transport: Transport) -> ItemResult:
    src = Path(item.source_path)
    dest = Path(item.dest_path)
    if transport.exists(dest):
        if not src.is_file():
            # a finished move leaves exactly this shape; size-check the dest
            if transport.size(dest) == item.bytes:
                return ItemResult(item.source_path, item.dest_path, item.bytes, "skipped_exists")
            return ItemResult(item.source_path, item.dest_path, item.bytes, "failed:conflict")
        if transport.hash(dest) == transport.hash(src):
            return ItemResult(item.source_path, item.dest_path, item.bytes, "skipped_exists")
        return ItemResult(item.source_path, item.dest_path, item.bytes, "failed:conflict")
    if not src.is_file():
        return ItemResult(item.source_path, item.dest_path, item.bytes, "failed:source_missing")
    src_hash = transport.hash(src) if policy.must_verify else None
    transport.makedirs(dest.parent)
    tmp = dest.with_name(dest.name + f".stash-tmp-{os.getpid()}")
    try:
        transport.copy(src, tmp)
        if policy.must_verify and transport.hash(tmp) != src_hash:
            transport.remove(tmp)
            return ItemResult(
                item.source_path, item.dest_path, item.bytes, "failed:verify_mismatch"
            )
        transport.replace(tmp, dest)
    except OSError as exc:
        if transport.exists(tmp):
            transport.remove(tmp)
        return ItemResult(item.source_path, item.dest_path, item.bytes, f"failed:{exc}")
    if policy.mode == "move":
        transport.remove(src)  # source leaves only after the verified rename
        return ItemResult(item.source_path, item.dest_path, item.bytes, "moved")
    return ItemResult(
        item.source_path, item.dest_path, item.bytes,
        "verified" if policy.must_verify else "copied",
    )


def execute_stash(
    plan: StashPlan, policy: StashPolicy, transport: Transport | None = None
) -> StashReport:
    """Transfer every plan item; per-file failures never abort the batch.

    An unwritable destination root aborts before any file is touched.
    """
    transport = transport or LocalTransport()
    dest_root = Path(policy.dest_root)
    try:
        transport.makedirs(dest_root)
        probe = dest_root / f".stash-probe-{os.getpid()}"
        with open(probe, "wb"):
            pass
        os.unlink(probe)
    except OSError as exc:
        raise DestinationUnwritable(f"{dest_root}: {exc}") from None
    results = [_stash_one(item, policy, transport) for item in plan.items]
    results.sort(key=lambda r: r.dest_path)
    totals: dict[str, int] = {}
    for r in results:
        totals[r.outcome] = totals.get(r.outcome, 0) + 1
    return StashReport(results=tuple(results), totals=totals)
