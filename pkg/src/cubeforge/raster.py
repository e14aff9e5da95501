"""Deterministic software rasterizer: orthographic camera, z-buffer, flat shading.

The camera orbits the model: azimuth rotates about +z, elevation tilts toward
+z, zoom scales the orthographic footprint. The model is centered on its
bounding box and scaled so the box diagonal fits 90% of the shorter image
side at zoom 1. Output is raw RGB, exportable as binary PPM (P6).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .isosurface import Mesh

MAX_PIXELS = 1 << 26
MAX_SIDE = 8192
MIN_SHADE = 0.15


class ImageTooLarge(Exception):
    pass


@dataclass(frozen=True)
class Camera:
    azimuth: float = 0.0  # degrees about +z
    elevation: float = 0.0  # degrees toward +z
    zoom: float = 1.0

    def __post_init__(self):
        for name in ("azimuth", "elevation", "zoom"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"camera {name} must be finite")
        if self.zoom <= 0:
            raise ValueError(f"zoom must be positive, got {self.zoom}")

    def basis(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(view, right, up): view points from the model toward the camera."""
        az = math.radians(self.azimuth)
        el = math.radians(self.elevation)
        view = np.array(
            [math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), math.sin(el)]
        )
        right = np.array([-math.sin(az), math.cos(az), 0.0])
        return view, right, np.cross(view, right)

    def to_dict(self) -> dict:
        return {"azimuth": self.azimuth, "elevation": self.elevation, "zoom": self.zoom}

    @classmethod
    def from_dict(cls, d: dict) -> "Camera":
        return cls(
            azimuth=float(d.get("azimuth", 0.0)),
            elevation=float(d.get("elevation", 0.0)),
            zoom=float(d.get("zoom", 1.0)),
        )


def _rgb(value, what: str) -> tuple[int, int, int]:
    c = tuple(int(x) for x in value)
    if len(c) != 3 or any(not 0 <= x <= 255 for x in c):
        raise ValueError(f"{what} must be an RGB triple in 0..255, got {value!r}")
    return c


@dataclass(frozen=True)
class RenderSpec:
    isovalue: float
    camera: Camera = field(default_factory=Camera)
    image_size: tuple[int, int] = (640, 480)
    component: int = 0
    light_dir: tuple[float, float, float] | None = None  # None: camera-aligned
    background: tuple[int, int, int] = (0, 0, 0)
    foreground: tuple[int, int, int] = (255, 255, 255)

    def __post_init__(self):
        if not math.isfinite(self.isovalue):
            raise ValueError("isovalue must be finite")
        w, h = (int(x) for x in self.image_size)
        if w < 1 or h < 1 or w > MAX_SIDE or h > MAX_SIDE or w * h > MAX_PIXELS:
            raise ImageTooLarge(f"image size {w}x{h} outside limits")
        object.__setattr__(self, "image_size", (w, h))
        if self.component < 0:
            raise ValueError("component must be >= 0")
        if self.light_dir is not None:
            ld = tuple(float(x) for x in self.light_dir)
            norm = math.sqrt(sum(x * x for x in ld))
            if abs(norm - 1.0) > 1e-9:
                raise ValueError(f"light_dir must be a unit vector, |v| = {norm}")
            object.__setattr__(self, "light_dir", ld)
        object.__setattr__(self, "background", _rgb(self.background, "background"))
        object.__setattr__(self, "foreground", _rgb(self.foreground, "foreground"))

    def to_dict(self) -> dict:
        return {
            "isovalue": self.isovalue,
            "camera": self.camera.to_dict(),
            "image_size": list(self.image_size),
            "component": self.component,
            "light_dir": None if self.light_dir is None else list(self.light_dir),
            "background": list(self.background),
            "foreground": list(self.foreground),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RenderSpec":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        if "camera" in known:
            known["camera"] = Camera.from_dict(known["camera"])
        if "image_size" in known:
            known["image_size"] = tuple(known["image_size"])
        for key in ("light_dir", "background", "foreground"):
            if known.get(key) is not None:
                known[key] = tuple(known[key])
        return cls(**known)


@dataclass(frozen=True)
class Image:
    width: int
    height: int
    pixels: bytes  # row-major RGB

    def __post_init__(self):
        if len(self.pixels) != self.width * self.height * 3:
            raise ValueError(
                f"pixel buffer is {len(self.pixels)} bytes, "
                f"expected {self.width * self.height * 3}"
            )

    def to_ppm(self) -> bytes:
        return b"P6\n%d %d\n255\n" % (self.width, self.height) + self.pixels

    @classmethod
    def from_ppm(cls, data: bytes) -> "Image":
        if not data.startswith(b"P6"):
            raise ValueError("not a binary PPM stream")
        fields: list[bytes] = []
        pos = 2
        while len(fields) < 3:
            while pos < len(data) and data[pos : pos + 1].isspace():
                pos += 1
            if data[pos : pos + 1] == b"#":  # comment runs to end of line
                pos = data.index(b"\n", pos) + 1
                continue
            start = pos
            while pos < len(data) and not data[pos : pos + 1].isspace():
                pos += 1
            fields.append(data[start:pos])
        w, h, maxval = (int(f) for f in fields)
        if maxval != 255:
            raise ValueError(f"unsupported maxval {maxval}")
        return cls(width=w, height=h, pixels=data[pos + 1 :])


def rasterize(mesh: Mesh, spec: RenderSpec) -> Image:
    """Project, depth-test, and flat-shade a mesh into an RGB image.

    A pure function of (mesh, spec): triangles paint in index order into a
    z-buffer where strictly greater depth wins, so depth ties keep the lower
    triangle index and the output bytes are reproducible everywhere.
    """
    w, h = spec.image_size
    frame = np.empty((h, w, 3), dtype=np.uint8)
    frame[:] = np.array(spec.background, dtype=np.uint8)
    if mesh.triangle_count == 0:
        return Image(width=w, height=h, pixels=frame.tobytes())

    view, right, up = spec.camera.basis()
    light = np.array(spec.light_dir) if spec.light_dir is not None else view

    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    center = (lo + hi) / 2.0
    diag = float(np.linalg.norm(hi - lo))
    scale = 0.9 * min(w, h) * spec.camera.zoom / max(diag, 1e-12)

    rel = mesh.vertices - center
    px = rel @ right * scale + w / 2.0
    py = h / 2.0 - rel @ up * scale
    pz = rel @ view  # larger = nearer the camera

    tri = mesh.triangles
    normals = np.cross(
        mesh.vertices[tri[:, 1]] - mesh.vertices[tri[:, 0]],
        mesh.vertices[tri[:, 2]] - mesh.vertices[tri[:, 0]],
    )
    lengths = np.linalg.norm(normals, axis=1)
    lengths[lengths == 0.0] = 1.0
    # two-sided flat shading: orientation of the surface must not matter
    intensity = np.clip(np.abs(normals @ light) / lengths, MIN_SHADE, 1.0)
    shades = (intensity[:, None] * np.array(spec.foreground) + 0.5).astype(np.uint8)

    zbuf = np.full((h, w), -np.inf)
    for t in range(len(tri)):
        ia, ib, ic = tri[t]
        xa, ya, za = px[ia], py[ia], pz[ia]
        xb, yb, zb = px[ib], py[ib], pz[ib]
        xc, yc, zc = px[ic], py[ic], pz[ic]
        area = (xb - xa) * (yc - ya) - (yb - ya) * (xc - xa)
        if area == 0.0:  # edge-on in projection
            continue
        x0 = max(int(math.floor(min(xa, xb, xc) - 0.5)), 0)
        x1 = min(int(math.ceil(max(xa, xb, xc) - 0.5)), w - 1)
        y0 = max(int(math.floor(min(ya, yb, yc) - 0.5)), 0)
        y1 = min(int(math.ceil(max(ya, yb, yc) - 0.5)), h - 1)
        if x1 < x0 or y1 < y0:
            continue
        xs = np.arange(x0, x1 + 1) + 0.5
        ys = (np.arange(y0, y1 + 1) + 0.5)[:, None]
        # barycentric weights, normalized by the signed area
        wa = ((xb - xs) * (yc - ys) - (yb - ys) * (xc - xs)) / area
        wb = ((xc - xs) * (ya - ys) - (yc - ys) * (xa - xs)) / area
        wc = 1.0 - wa - wb
        depth = wa * za + wb * zb + wc * zc
        window = zbuf[y0 : y1 + 1, x0 : x1 + 1]
        hit = (wa >= 0.0) & (wb >= 0.0) & (wc >= 0.0) & (depth > window)
        if not hit.any():
            continue
        window[hit] = depth[hit]
        frame[y0 : y1 + 1, x0 : x1 + 1][hit] = shades[t]
    return Image(width=w, height=h, pixels=frame.tobytes())
