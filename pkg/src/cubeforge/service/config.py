"""Service configuration: bearer tokens, proposal grants, data and work roots.

The access model is a many-to-many map: tokens name users, users hold grants
to proposal ids, proposals are directories under data_root. Grants may name
proposals that do not exist on disk; listing just shows them empty. The
grants source is pluggable so a remote provider can replace the static map.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from ..reduce import ReductionParams

ENV_CONFIG = "CUBEFORGE_CONFIG"


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class AccessConfig:
    tokens: dict[str, str]  # bearer token -> user_id
    grants: dict[str, frozenset[str]]  # user_id -> proposal ids
    data_root: str

    def __post_init__(self):
        # dict keys already force token uniqueness; several tokens may share a user
        object.__setattr__(
            self, "grants", {u: frozenset(ps) for u, ps in self.grants.items()}
        )
        if any(not t for t in self.tokens):
            raise ConfigError("empty bearer token")


class GrantsProvider:
    """Answers which proposals a user may read."""

    def proposals_for(self, user_id: str) -> frozenset[str]:
        raise NotImplementedError


class StaticGrantsProvider(GrantsProvider):
    def __init__(self, grants: dict[str, frozenset[str]]):
        self._grants = grants

    def proposals_for(self, user_id: str) -> frozenset[str]:
        return self._grants.get(user_id, frozenset())


@dataclass(frozen=True)
class ServiceConfig:
    access: AccessConfig
    work_root: str
    workers: int = 1
    reduction: ReductionParams = field(default_factory=ReductionParams)

    def __post_init__(self):
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "ServiceConfig":
        try:
            access = AccessConfig(
                tokens=dict(d["tokens"]),
                grants={u: frozenset(ps) for u, ps in d["grants"].items()},
                data_root=str(d["data_root"]),
            )
            return cls(
                access=access,
                work_root=str(d["work_root"]),
                workers=int(d.get("workers", 1)),
                reduction=ReductionParams.from_dict(d.get("reduction", {})),
            )
        except KeyError as exc:
            raise ConfigError(f"missing config key {exc}") from None

    @classmethod
    def from_file(cls, path) -> "ServiceConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    @classmethod
    def from_env(cls, explicit_path=None) -> "ServiceConfig":
        path = explicit_path or os.environ.get(ENV_CONFIG)
        if not path:
            raise ConfigError(
                f"no config path given and {ENV_CONFIG} is not set"
            )
        return cls.from_file(path)

    @property
    def data_root(self) -> Path:
        return Path(self.access.data_root)

    @property
    def work_path(self) -> Path:
        return Path(self.work_root)
