"""cubeforge: read, shrink, track, render, and serve volumetric cube files."""

from .cubefile import (
    AtomCountMismatch,
    AtomRecord,
    AxisSpec,
    CubeDocument,
    CubeError,
    CubeHeaderSummary,
    MalformedHeader,
    MalformedValue,
    NonFiniteValue,
    ValueCountMismatch,
    WriteParams,
    canonical_digest,
    parse_cube,
    read_cube,
    scan_header,
    write_cube,
)
from .isosurface import Mesh, marching_cubes
from .manifest import (
    FileMissing,
    FileStamp,
    ManifestEntry,
    ManifestError,
    ManifestStore,
    NotFound,
    RecordOutcome,
    UnknownEntry,
    VerifyStatus,
    lookup_original,
    record_reduction,
    sha256_file,
    verify_entry,
)
from .raster import Camera, Image, ImageTooLarge, RenderSpec, rasterize
from .reduce import (
    ReductionParams,
    ReductionReport,
    downsample,
    quantize,
    quantize_values,
    reduce_cube,
    reduced_write_params,
)
from .render import RenderStats, render_cube
from .stash import (
    DestinationUnwritable,
    GlobSyntaxError,
    ItemResult,
    LocalTransport,
    PlanItem,
    SourceMissing,
    StashError,
    StashPlan,
    StashPolicy,
    StashReport,
    Transport,
    execute_stash,
    plan_stash,
)
from .volume import (
    ErrorMetrics,
    ShapeMismatch,
    Volume,
    VolumeError,
    compare,
    compare_arrays,
)

__version__ = "0.1.0"

__all__ = [
    "AtomCountMismatch",
    "AtomRecord",
    "AxisSpec",
    "Camera",
    "CubeDocument",
    "CubeError",
    "CubeHeaderSummary",
    "DestinationUnwritable",
    "ErrorMetrics",
    "FileMissing",
    "FileStamp",
    "GlobSyntaxError",
    "Image",
    "ImageTooLarge",
    "ItemResult",
    "LocalTransport",
    "MalformedHeader",
    "MalformedValue",
    "ManifestEntry",
    "ManifestError",
    "ManifestStore",
    "Mesh",
    "NonFiniteValue",
    "NotFound",
    "PlanItem",
    "RecordOutcome",
    "ReductionParams",
    "ReductionReport",
    "RenderSpec",
    "RenderStats",
    "ShapeMismatch",
    "SourceMissing",
    "StashError",
    "StashPlan",
    "StashPolicy",
    "StashReport",
    "Transport",
    "UnknownEntry",
    "ValueCountMismatch",
    "VerifyStatus",
    "Volume",
    "VolumeError",
    "WriteParams",
    "canonical_digest",
    "compare",
    "compare_arrays",
    "downsample",
    "execute_stash",
    "lookup_original",
    "marching_cubes",
    "parse_cube",
    "plan_stash",
    "quantize",
    "quantize_values",
    "rasterize",
    "read_cube",
    "record_reduction",
    "reduce_cube",
    "reduced_write_params",
    "render_cube",
    "scan_header",
    "sha256_file",
    "verify_entry",
    "write_cube",
    "__version__",
]
