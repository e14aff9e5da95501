"""HTTP API: proposal-scoped volume listings, reduced previews, render jobs.

Every route authenticates a bearer token and authorizes against the grants
provider. Proposal data is only ever opened for reading; all derived
artifacts (reduced files, job state, images) live under the work root.
Denial responses carry no filesystem information.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from ..cubefile import CubeError, read_cube, scan_header, write_cube
from ..manifest import ManifestStore, NotFound, VerifyStatus
from ..raster import ImageTooLarge, RenderSpec
from ..reduce import reduce_cube, reduced_write_params
from ..render import render_cube
from .config import GrantsProvider, ServiceConfig, StaticGrantsProvider
from .jobs import JobRecord, JobRunnerPool, JobStore

_SAFE_NAME = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _unauthenticated() -> ApiError:
    return ApiError(401, "unauthenticated", "unknown or missing bearer token")


def _forbidden() -> ApiError:
    return ApiError(403, "forbidden", "proposal not granted")


def _not_found(what: str = "resource") -> ApiError:
    return ApiError(404, "not_found", f"{what} not found")


def authorize(config: ServiceConfig, provider: GrantsProvider, token: str | None, proposal_id: str) -> str:
    """Token + grant check; returns the user id or raises 401/403."""
    user = config.access.tokens.get(token or "")
    if user is None:
        raise _unauthenticated()
    if proposal_id not in provider.proposals_for(user):
        raise _forbidden()
    return user


def _bearer(request: Request) -> str | None:
    header = request.headers.get("authorization", "")
    scheme, _, token = header.partition(" ")
    if scheme.lower() != "bearer" or not token.strip():
        return None
    return token.strip()


def create_app(
    config: ServiceConfig, grants_provider: GrantsProvider | None = None
) -> FastAPI:
    provider = grants_provider or StaticGrantsProvider(config.access.grants)
    work = config.work_path
    reduced_dir = work / "reduced"
    results_dir = work / "results"
    for d in (work, reduced_dir, results_dir):
        d.mkdir(parents=True, exist_ok=True)
    manifest = ManifestStore(work / "manifest.jsonl")
    store = JobStore(work / "jobs")

    def run_render(record: JobRecord) -> str:
        # render always reads the full-resolution original named by the
        # manifest, never the reduced preview artifact
        entry = manifest.lookup_original(record.volume_ref)
        doc = read_cube(entry.original.path)
        image, _ = render_cube(doc, record.spec)
        out = results_dir / f"{record.job_id}.ppm"
        tmp = out.with_name(out.name + f".tmp.{os.getpid()}")
        tmp.write_bytes(image.to_ppm())
        os.replace(tmp, out)
        return str(out)

    pool = JobRunnerPool(store, run_render, workers=config.workers)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        pool.start()
        yield
        pool.stop()

    app = FastAPI(title="cubeforge", lifespan=lifespan)

    @app.exception_handler(ApiError)
    async def _api_error(_request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status, content={"error": exc.code, "message": exc.message}
        )

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_request, exc):
        return JSONResponse(
            status_code=422,
            content={"error": "invalid_request", "message": "request body is invalid"},
        )

    def current_user(request: Request) -> str:
        user = config.access.tokens.get(_bearer(request) or "")
        if user is None:
            raise _unauthenticated()
        return user

    def require_proposal(user: str, proposal_id: str) -> None:
        if proposal_id not in provider.proposals_for(user):
            raise _forbidden()

    def safe_name(name: str) -> str:
        if not _SAFE_NAME.match(name) or ".." in name:
            raise _not_found()
        return name

    @app.get("/v1/volumes")
    def list_volumes(request: Request):
        user = current_user(request)
        proposals = []
        for proposal_id in sorted(provider.proposals_for(user)):
            volumes = []
            pdir = config.data_root / proposal_id
            if pdir.is_dir():
                for path in sorted(pdir.glob("*.cube")):
                    try:
                        with open(path, "rb") as fh:
                            summary = scan_header(fh)
                    except (CubeError, OSError):
                        continue
                    volumes.append(
                        {
                            "file": path.name,
                            "bytes": path.stat().st_size,
                            "dims": list(summary.dims),
                            "natoms": summary.natoms,
                            "nval": summary.nval,
                            "value_count": summary.value_count,
                        }
                    )
            proposals.append({"proposal_id": proposal_id, "volumes": volumes})
        return {"proposals": proposals}

    def _fresh_entry(proposal_id: str, original: Path):
        cached = manifest.latest_for_original(proposal_id, original)
        if cached is not None and manifest.verify_entry(cached.entry_id) == VerifyStatus.ok:
            return cached
        try:
            doc = read_cube(original)
            out_doc, report = reduce_cube(doc, config.reduction)
            payload = write_cube(out_doc, reduced_write_params(config.reduction))
        except (CubeError, ValueError, OSError) as exc:
            raise ApiError(502, "reduction_failed", f"reduction failed: {type(exc).__name__}")
        sha = hashlib.sha256(payload).hexdigest()
        reduced_path = reduced_dir / f"{sha}.cube"
        tmp = reduced_path.with_name(reduced_path.name + f".tmp.{os.getpid()}")
        tmp.write_bytes(payload)
        os.replace(tmp, reduced_path)
        outcome = manifest.record_reduction(
            original, reduced_path, config.reduction, report, proposal_id
        )
        return outcome.entry

    @app.get("/v1/volumes/{proposal_id}/{file_name}/reduced")
    def get_reduced(proposal_id: str, file_name: str, request: Request):
        user = current_user(request)
        require_proposal(user, proposal_id)
        original = config.data_root / safe_name(proposal_id) / safe_name(file_name)
        if not original.is_file():
            raise _not_found("volume")
        entry = _fresh_entry(proposal_id, original)
        payload = Path(entry.reduced.path).read_bytes()
        return Response(
            content=payload,
            media_type="application/octet-stream",
            headers={
                "X-Content-SHA256": entry.reduced.sha256,
                "X-Reduction-Report": json.dumps(
                    entry.report.to_dict(), sort_keys=True, separators=(",", ":")
                ),
                "X-Entry-Id": entry.entry_id,
            },
        )

    @app.post("/v1/render")
    async def submit_render(request: Request):
        user = current_user(request)
        try:
            body = await request.json()
        except ValueError:
            raise ApiError(422, "invalid_spec", "request body is not valid JSON")
        if not isinstance(body, dict):
            raise ApiError(422, "invalid_spec", "request body must be a JSON object")
        sha = body.get("reduced_sha256")
        raw_spec = body.get("spec")
        if not isinstance(sha, str) or not isinstance(raw_spec, dict):
            raise ApiError(422, "invalid_spec", "need reduced_sha256 and spec")
        try:
            spec = RenderSpec.from_dict(raw_spec)
        except (ValueError, TypeError, KeyError, ImageTooLarge) as exc:
            raise ApiError(422, "invalid_spec", f"invalid render spec: {exc}")
        try:
            entry = manifest.lookup_original(sha)
        except NotFound:
            raise _not_found("reduced artifact")
        require_proposal(user, entry.proposal_id)
        record, duplicate = store.submit(user, sha, spec)
        if not duplicate:
            pool.enqueue(record.job_id)
        return {"job_id": record.job_id, "state": record.state, "duplicate": duplicate}

    def _owned_job(request: Request, job_id: str) -> JobRecord:
        user = current_user(request)
        record = store.get(job_id)
        if record is None or record.owner != user:  # existence stays private
            raise _not_found("job")
        return record

    @app.get("/v1/jobs/{job_id}")
    def poll_job(job_id: str, request: Request):
        return _owned_job(request, job_id).to_dict()

    @app.get("/v1/jobs/{job_id}/image")
    def fetch_image(job_id: str, request: Request):
        record = _owned_job(request, job_id)
        if record.state != "done":
            raise ApiError(409, "not_ready", f"job is {record.state}")
        data = Path(record.result_ref).read_bytes()
        return Response(
            content=data,
            media_type="image/x-portable-pixmap",
            headers={"X-Content-SHA256": hashlib.sha256(data).hexdigest()},
        )

    return app
