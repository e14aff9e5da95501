"""Synthetic volumetric documents for fixtures, benchmarks, and demos."""

from __future__ import annotations

import numpy as np

from .cubefile import AtomRecord, CubeDocument
from .volume import Volume


def _node_coords(dims, origin, axes) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """World x/y/z arrays of every grid node, shaped (n1, n2, n3)."""
    i = np.arange(dims[0])[:, None, None]
    j = np.arange(dims[1])[None, :, None]
    k = np.arange(dims[2])[None, None, :]
    coords = []
    for axis in range(3):
        coords.append(
            origin[axis] + i * axes[0][axis] + j * axes[1][axis] + k * axes[2][axis]
        )
    return tuple(coords)


def _doc(values: np.ndarray, dims, origin, axes, comment: str, atoms=()) -> CubeDocument:
    volume = Volume(
        dims=tuple(dims),
        origin=np.asarray(origin, dtype=np.float64),
        axes=np.asarray(axes, dtype=np.float64),
        values=values.reshape(-1),
        nval=1,
    )
    return CubeDocument(
        comment1=comment,
        comment2="synthetic field",
        natoms_raw=len(atoms),
        atoms=tuple(atoms),
        volume=volume,
    )


def gaussian_cube(
    n: int = 160,
    sigma: float = 2.0,
    extent: float = 8.0,
    amplitude: float = 1.0,
) -> CubeDocument:
    """Single isotropic Gaussian blob on an n^3 grid spanning [-extent, extent].

    With the defaults the smallest value is about 4e-11, so every node stays
    above a 1e-12 zero threshold and reduction ratios measure formatting, not
    zero-collapsing.
    """
    if n < 2:
        raise ValueError("grid must be at least 2 per axis")
    step = 2.0 * extent / (n - 1)
    origin = (-extent, -extent, -extent)
    axes = ((step, 0.0, 0.0), (0.0, step, 0.0), (0.0, 0.0, step))
    x, y, z = _node_coords((n, n, n), origin, axes)
    r2 = x * x + y * y + z * z
    values = amplitude * np.exp(-r2 / (2.0 * sigma * sigma))
    atoms = (AtomRecord(atomic_number=2, charge=2.0, position=(0.0, 0.0, 0.0)),)
    return _doc(values, (n, n, n), origin, axes, f"gaussian blob sigma={sigma}", atoms)


def sphere_cube(
    n: int = 32,
    radius: float = 0.6,
    bump: float = 0.0,
) -> CubeDocument:
    """Signed sphere field f = r^2 - radius^2 on [-1, 1]^3; iso 0 is the shell.

    A nonzero bump adds an off-center Gaussian dent so the field loses its
    rotational symmetry (views from different azimuths must differ).
    """
    if n < 2:
        raise ValueError("grid must be at least 2 per axis")
    step = 2.0 / (n - 1)
    origin = (-1.0, -1.0, -1.0)
    axes = ((step, 0.0, 0.0), (0.0, step, 0.0), (0.0, 0.0, step))
    x, y, z = _node_coords((n, n, n), origin, axes)
    values = x * x + y * y + z * z - radius * radius
    if bump:
        dx = x - radius
        values = values - bump * np.exp(-(dx * dx + y * y + z * z) / 0.02)
    return _doc(values, (n, n, n), origin, axes, f"sphere field r={radius}")


def indexed_cube(dims=(4, 4, 4)) -> CubeDocument:
    """Volume whose value at (i,j,k) is its own linear index; nails index laws."""
    n1, n2, n3 = dims
    values = np.arange(n1 * n2 * n3, dtype=np.float64)
    axes = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))
    return _doc(values, dims, (0.0, 0.0, 0.0), axes, "linear index field")
