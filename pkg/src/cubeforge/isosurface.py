"""Isosurface extraction: 256-case marching cubes with shared-edge welding."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mc_tables import CORNER_OFFSETS, EDGE_CORNERS, EDGE_TABLE, TRI_TABLE
from .volume import Volume

DEGENERATE_AREA = 1e-12


@dataclass(frozen=True)
class Mesh:
    """Triangle mesh in world coordinates (grid transform already applied)."""

    vertices: np.ndarray  # (V, 3) float64
    triangles: np.ndarray  # (T, 3) int64 indices into vertices
    iso_out_of_range: bool = False  # isovalue missed [min, max] of the field

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        t = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise ValueError("triangle index out of range")
        v.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    @property
    def triangle_count(self) -> int:
        return len(self.triangles)

    def to_obj(self) -> str:
        """Wavefront OBJ text: "v x y z" lines then 1-based "f a b c" lines."""
        out = []
        for x, y, z in self.vertices:
            out.append(f"v {x:.9g} {y:.9g} {z:.9g}\n")
        for a, b, c in self.triangles + 1:
            out.append(f"f {a} {b} {c}\n")
        return "".join(out)


def _case_indices(comp: np.ndarray, isovalue: float) -> np.ndarray:
    """Per-cell case index over the (n1-1, n2-1, n3-1) cell lattice.

    Corner bit i is set when the corner value is <= iso ("inside"); ties at
    the isovalue count as inside so case selection never needs an epsilon.
    """
    inside = comp <= isovalue
    case = np.zeros(tuple(d - 1 for d in comp.shape), dtype=np.uint8)
    for bit, (di, dj, dk) in enumerate(CORNER_OFFSETS):
        n1, n2, n3 = case.shape
        case |= (
            inside[di : di + n1, dj : dj + n2, dk : dk + n3].astype(np.uint8) << bit
        )
    return case


def marching_cubes(v: Volume, isovalue: float, component: int = 0) -> Mesh:
    """Extract the isovalue level set of one component as a triangle mesh.

    Vertices on edges shared between cells are welded (keyed by the global
    corner-node pair), so the surface is manifold wherever the field crosses
    the isovalue transversally. Triangles whose area collapses below 1e-12
    are dropped. Deterministic: cells scan in index order, vertex ids are
    assigned on first use.
    """
    if any(d < 2 for d in v.dims):
        raise ValueError(f"marching cubes needs dims >= 2 per axis, got {v.dims}")
    if not (0 <= component < v.nval):
        raise ValueError(f"component {component} out of range for nval {v.nval}")
    isovalue = float(isovalue)
    comp = np.ascontiguousarray(v.grid[..., component])
    fmin, fmax = float(comp.min()), float(comp.max())
    out_of_range = not (fmin <= isovalue <= fmax)

    case = _case_indices(comp, isovalue)
    active = np.argwhere((case != 0) & (case != 255))

    n2, n3 = v.dims[1], v.dims[2]
    edge_vertex: dict[tuple[int, int], int] = {}
    verts: list[tuple[float, float, float]] = []
    tris: list[tuple[int, int, int]] = []

    def corner_node(i: int, j: int, k: int, c: int) -> tuple[int, int, int]:
        di, dj, dk = CORNER_OFFSETS[c]
        return i + di, j + dj, k + dk

    for i, j, k in active:
        idx = case[i, j, k]
        edges = EDGE_TABLE[idx]
        local: dict[int, int] = {}
        for e in range(12):
            if not edges >> e & 1:
                continue
            na = corner_node(i, j, k, EDGE_CORNERS[e][0])
            nb = corner_node(i, j, k, EDGE_CORNERS[e][1])
            ga = (na[0] * n2 + na[1]) * n3 + na[2]
            gb = (nb[0] * n2 + nb[1]) * n3 + nb[2]
            key = (ga, gb) if ga < gb else (gb, ga)
            vid = edge_vertex.get(key)
            if vid is None:
                va = comp[na]
                vb = comp[nb]
                t = (isovalue - va) / (vb - va)  # corners straddle, vb != va
                pos = (
                    na[0] + t * (nb[0] - na[0]),
                    na[1] + t * (nb[1] - na[1]),
                    na[2] + t * (nb[2] - na[2]),
                )
                vid = len(verts)
                verts.append(pos)
                edge_vertex[key] = vid
            local[e] = vid
        row = TRI_TABLE[idx]
        for t0 in range(0, len(row), 3):
            tris.append((local[row[t0]], local[row[t0 + 1]], local[row[t0 + 2]]))

    if not verts:
        return Mesh(
            vertices=np.empty((0, 3)),
            triangles=np.empty((0, 3), dtype=np.int64),
            iso_out_of_range=out_of_range,
        )

    world = v.origin + np.asarray(verts) @ v.axes
    tri_arr = np.asarray(tris, dtype=np.int64)
    a = world[tri_arr[:, 0]]
    area2 = np.linalg.norm(
        np.cross(world[tri_arr[:, 1]] - a, world[tri_arr[:, 2]] - a), axis=1
    )
    keep = area2 > 2.0 * DEGENERATE_AREA
    tri_arr = tri_arr[keep]
    if not keep.all():
        # drop vertices only degenerate triangles referenced
        used = np.unique(tri_arr)
        remap = np.full(len(world), -1, dtype=np.int64)
        remap[used] = np.arange(len(used))
        world = world[used]
        tri_arr = remap[tri_arr]
    return Mesh(
        vertices=world,
        triangles=tri_arr,
        iso_out_of_range=out_of_range,
    )
