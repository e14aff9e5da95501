"""Command-line interface covering every capability without the HTTP service.

Machine-readable JSON goes to stdout; diagnostics go to stderr. Exit codes:
0 success, 1 usage error, 2 data error (malformed or inconsistent content),
3 I/O error (missing files, unwritable destinations).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import manifest as manifest_mod
from . import stash as stash_mod
from .service.config import ConfigError
from .cubefile import CubeError, read_cube, write_cube
from .raster import Camera, ImageTooLarge, RenderSpec
from .reduce import ReductionParams, reduce_cube, reduced_write_params
from .render import render_cube
from .volume import ShapeMismatch, VolumeError, compare

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_IO = 3

DATA_ERRORS = (
    CubeError,
    VolumeError,
    ShapeMismatch,
    manifest_mod.NotFound,
    manifest_mod.UnknownEntry,
    stash_mod.GlobSyntaxError,
    ImageTooLarge,
    ValueError,
)
IO_ERRORS = (
    OSError,
    manifest_mod.FileMissing,
    stash_mod.SourceMissing,
    stash_mod.DestinationUnwritable,
)


class UsageError(Exception):
    pass


def _emit(payload, pretty: bool, indent_keys=()) -> None:
    if not pretty:
        print(json.dumps(payload, indent=2, sort_keys=True))
        return
    def walk(obj, prefix=""):
        if isinstance(obj, dict):
            for key in sorted(obj):
                walk(obj[key], f"{prefix}{key}.")
        elif isinstance(obj, list):
            for i, item in enumerate(obj):
                walk(item, f"{prefix}{i}.")
        else:
            print(f"{prefix[:-1]:<40} {obj}")
    walk(payload)


def _parse_stride(text: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) == 1:
        parts = parts * 3
    if len(parts) != 3:
        raise UsageError(f"stride must be one integer or three, got {text!r}")
    try:
        return tuple(int(p) for p in parts)
    except ValueError:
        raise UsageError(f"stride must be integers, got {text!r}") from None


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise UsageError(f"size must look like 640x480, got {text!r}") from None


def _cmd_inspect(args) -> int:
    doc = read_cube(args.file)
    stats = []
    for c in range(doc.nval):
        lo, hi, mean, rms = doc.volume.stats(c)
        stats.append({"component": c, "min": lo, "max": hi, "mean": mean, "rms": rms})
    _emit(
        {
            "file": str(args.file),
            "dims": list(doc.dims),
            "origin": [float(x) for x in doc.origin],
            "axes": [
                {"count": a.count, "vector": list(a.vector), "sign_flag": a.sign_flag}
                for a in doc.axes
            ],
            "natoms": len(doc.atoms),
            "nval": doc.nval,
            "value_count": doc.volume.values.size,
            "comment1": doc.comment1,
            "comment2": doc.comment2,
            "stats": stats,
        },
        args.pretty,
    )
    return EXIT_OK


def _cmd_reduce(args) -> int:
    if bool(args.manifest) != bool(args.proposal):
        raise UsageError("--manifest and --proposal must be used together")
    params = ReductionParams(
        stride=_parse_stride(args.stride),
        method=args.method,
        sig_digits=args.digits,
        zero_threshold=args.threshold,
        measure_reconstruction=args.measure_reconstruction,
    )
    doc = read_cube(args.file)
    out_doc, report = reduce_cube(doc, params)
    out_path = Path(args.output)
    with open(out_path, "wb") as fh:
        write_cube(out_doc, reduced_write_params(params), sink=fh)
    payload = report.to_dict()
    payload["output"] = str(out_path)
    if args.report:
        Path(args.report).write_text(json.dumps(payload, indent=2, sort_keys=True))
    if args.manifest:
        store = manifest_mod.ManifestStore(args.manifest)
        outcome = store.record_reduction(args.file, out_path, params, report, args.proposal)
        payload["entry_id"] = outcome.entry.entry_id
        payload["duplicate"] = outcome.duplicate
    _emit(payload, args.pretty)
    return EXIT_OK


def _cmd_diff(args) -> int:
    a = read_cube(args.file_a)
    b = read_cube(args.file_b)
    metrics = compare(a.volume, b.volume, eps_floor=args.eps_floor)
    _emit(metrics.to_dict(), args.pretty)
    return EXIT_OK


def _cmd_render(args) -> int:
    doc = read_cube(args.file)
    spec = RenderSpec(
        isovalue=args.iso,
        camera=Camera(azimuth=args.azimuth, elevation=args.elevation, zoom=args.zoom),
        image_size=_parse_size(args.size),
        component=args.component,
    )
    if args.mesh:
        from .isosurface import marching_cubes

        mesh = marching_cubes(doc.volume, spec.isovalue, spec.component)
        Path(args.mesh).write_text(mesh.to_obj())
    image, stats = render_cube(doc, spec)
    Path(args.output).write_bytes(image.to_ppm())
    payload = stats.to_dict()
    payload["output"] = str(args.output)
    _emit(payload, args.pretty)
    return EXIT_OK


def _cmd_stash(args) -> int:
    policy = stash_mod.StashPolicy.from_file(args.policy)
    plan = stash_mod.plan_stash(policy)
    if args.dry_run:
        _emit(plan.to_dict(), args.pretty)
        return EXIT_OK
    report = stash_mod.execute_stash(plan, policy)
    _emit(report.to_dict(), args.pretty)
    return EXIT_OK


def _cmd_verify(args) -> int:
    store = manifest_mod.ManifestStore(args.manifest)
    if args.entry:
        status = store.verify_entry(args.entry)
        _emit({"entry_id": args.entry, "status": status.value}, args.pretty)
        return EXIT_OK
    results = [
        {"entry_id": e.entry_id, "status": store.verify_entry(e.entry_id).value}
        for e in store.entries()
    ]
    _emit({"entries": results}, args.pretty)
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    config = ServiceConfig.from_env(args.config)
    app = create_app(config)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cubeforge",
        description="Volumetric cube-file toolkit: inspect, reduce, render, stash, serve.",
    )
    parser.add_argument("--pretty", action="store_true", help="human-readable output")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inspect", help="header summary and per-component stats")
    p.add_argument("file")
    p.set_defaults(func=_cmd_inspect)

    p = sub.add_parser("reduce", help="downsample and quantize a cube file")
    p.add_argument("file")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--stride", default="4,4,4", help="per-axis stride, e.g. 4,4,4")
    p.add_argument("--method", choices=("point", "mean"), default="mean")
    p.add_argument("--digits", type=int, default=3)
    p.add_argument("--threshold", type=float, default=1e-12)
    p.add_argument("--measure-reconstruction", action="store_true")
    p.add_argument("--report", help="also write the report JSON here")
    p.add_argument("--manifest", help="record the reduction in this manifest")
    p.add_argument("--proposal", help="proposal id for the manifest entry")
    p.set_defaults(func=_cmd_reduce)

    p = sub.add_parser("diff", help="pointwise error metrics between two cube files")
    p.add_argument("file_a")
    p.add_argument("file_b")
    p.add_argument("--eps-floor", type=float, default=1e-30)
    p.set_defaults(func=_cmd_diff)

    p = sub.add_parser("render", help="render an isosurface to a PPM image")
    p.add_argument("file")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--iso", type=float, required=True)
    p.add_argument("--azimuth", type=float, default=0.0)
    p.add_argument("--elevation", type=float, default=0.0)
    p.add_argument("--zoom", type=float, default=1.0)
    p.add_argument("--size", default="640x480")
    p.add_argument("--component", type=int, default=0)
    p.add_argument("--mesh", help="also export the mesh as OBJ here")
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("stash", help="plan or execute a policy-driven transfer")
    p.add_argument("--policy", required=True)
    p.add_argument("--dry-run", action="store_true")
    p.set_defaults(func=_cmd_stash)

    p = sub.add_parser("verify", help="recheck manifest entries against the filesystem")
    p.add_argument("--manifest", required=True)
    p.add_argument("--entry")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config", help="config JSON (falls back to CUBEFORGE_CONFIG)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage problems
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except IO_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
