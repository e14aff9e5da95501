"""HTTP service: proposal-scoped read-only volume API with async render jobs."""

from .app import ApiError, authorize, create_app
from .config import (
    ENV_CONFIG,
    AccessConfig,
    ConfigError,
    GrantsProvider,
    ServiceConfig,
    StaticGrantsProvider,
)
from .jobs import InvalidTransition, JobRecord, JobRunnerPool, JobStore, spec_key

__all__ = [
    "ApiError",
    "AccessConfig",
    "ConfigError",
    "ENV_CONFIG",
    "GrantsProvider",
    "InvalidTransition",
    "JobRecord",
    "JobRunnerPool",
    "JobStore",
    "ServiceConfig",
    "StaticGrantsProvider",
    "authorize",
    "create_app",
    "spec_key",
]
