"""Full-resolution render pipeline: isosurface extraction plus rasterization."""

from __future__ import annotations

from dataclasses import dataclass

from .cubefile import CubeDocument
from .isosurface import Mesh, marching_cubes
from .raster import Camera, Image, ImageTooLarge, RenderSpec, rasterize

__all__ = [
    "Camera",
    "Image",
    "ImageTooLarge",
    "RenderSpec",
    "RenderStats",
    "marching_cubes",
    "rasterize",
    "render_cube",
]


@dataclass(frozen=True)
class RenderStats:
    triangles: int
    vertices: int
    empty: bool

    def to_dict(self) -> dict:
        return {"triangles": self.triangles, "vertices": self.vertices, "empty": self.empty}


def render_cube(doc: CubeDocument, spec: RenderSpec) -> tuple[Image, RenderStats]:
    """Render one component of a document to an image, deterministically.

    Always runs on the document as given; callers deciding between a preview
    artifact and its source must resolve that before calling.
    """
    if not 0 <= spec.component < doc.nval:
        raise ValueError(
            f"component {spec.component} out of range for nval {doc.nval}"
        )
    mesh = marching_cubes(doc.volume, spec.isovalue, spec.component)
    image = rasterize(mesh, spec)
    stats = RenderStats(
        triangles=mesh.triangle_count,
        vertices=mesh.vertex_count,
        empty=mesh.triangle_count == 0,
    )
    return image, stats
