"""Dense scalar grids with origin/axis metadata, plus the numerics shared by
reduction and rendering: indexing, trilinear sampling, statistics, and
error metrics between equally shaped grids.

Values are stored as one flat float64 array in the cube-file storage order:
axis 1 is the outer loop, axis 3 the innermost, components interleaved last,
so ``value(i, j, k, c)`` lives at linear index
``((i*n2 + j)*n3 + k)*nval + c``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Relative error is meaningless below physical noise; electron densities
# legitimately reach tiny magnitudes, so the default floor is far below them.
DEFAULT_EPS_FLOOR = 1e-30


class VolumeError(Exception):
    pass


class IndexOutOfRange(VolumeError):
    pass


class CoordinateOutOfRange(VolumeError):
    pass


class ShapeMismatch(VolumeError):
    pass


@dataclass(frozen=True)
class Volume:
    """Immutable dense grid of ``n1*n2*n3*nval`` finite float64 values."""

    dims: tuple[int, int, int]
    origin: np.ndarray
    axes: np.ndarray  # 3x3, row d = step vector of grid axis d
    values: np.ndarray  # flat, length n1*n2*n3*nval
    nval: int = 1

    def __post_init__(self):
        n1, n2, n3 = self.dims
        if n1 < 1 or n2 < 1 or n3 < 1:
            raise ValueError(f"dims must be positive, got {self.dims}")
        if self.nval < 1:
            raise ValueError(f"nval must be positive, got {self.nval}")
        origin = np.asarray(self.origin, dtype=np.float64).reshape(3)
        axes = np.asarray(self.axes, dtype=np.float64).reshape(3, 3)
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        expected = n1 * n2 * n3 * self.nval
        if values.size != expected:
            raise ValueError(
                f"value count {values.size} != n1*n2*n3*nval = {expected}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("volume values must be finite")
        for name, arr in (("origin", origin), ("axes", axes), ("values", values)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def grid(self) -> np.ndarray:
        """Read-only (n1, n2, n3, nval) view of the flat value array."""
        return self.values.reshape(*self.dims, self.nval)

    def value_at(self, i: int, j: int, k: int, c: int = 0) -> float:
        n1, n2, n3 = self.dims
        if not (0 <= i < n1 and 0 <= j < n2 and 0 <= k < n3):
            raise IndexOutOfRange(f"index ({i},{j},{k}) outside dims {self.dims}")
        if not 0 <= c < self.nval:
            raise IndexOutOfRange(f"component {c} outside nval {self.nval}")
        return float(self.values[((i * n2 + j) * n3 + k) * self.nval + c])

    def trilinear_sample(self, g1: float, g2: float, g3: float, c: int = 0) -> float:
        """Trilinear blend of the 8 grid values surrounding fractional grid
        coordinates (g1, g2, g3). Exact at integer coordinates."""
        if not 0 <= c < self.nval:
            raise IndexOutOfRange(f"component {c} outside nval {self.nval}")
        coords = (g1, g2, g3)
        base = []
        frac = []
        for g, n in zip(coords, self.dims):
            if not 0.0 <= g <= n - 1:  # also rejects NaN
                raise CoordinateOutOfRange(
                    f"coordinate {coords} outside grid {self.dims}"
                )
            i0 = int(math.floor(g))
            if i0 > n - 2:  # g == n-1 lands on the last cell's far corner
                i0 = max(n - 2, 0)
            base.append(i0)
            frac.append(g - i0)
        g4 = self.grid
        n1, n2, n3 = self.dims
        i0, j0, k0 = base
        t1, t2, t3 = frac
        i1 = min(i0 + 1, n1 - 1)
        j1 = min(j0 + 1, n2 - 1)
        k1 = min(k0 + 1, n3 - 1)
        c000 = g4[i0, j0, k0, c]
        c100 = g4[i1, j0, k0, c]
        c010 = g4[i0, j1, k0, c]
        c110 = g4[i1, j1, k0, c]
        c001 = g4[i0, j0, k1, c]
        c101 = g4[i1, j0, k1, c]
        c011 = g4[i0, j1, k1, c]
        c111 = g4[i1, j1, k1, c]
        c00 = c000 * (1 - t1) + c100 * t1
        c10 = c010 * (1 - t1) + c110 * t1
        c01 = c001 * (1 - t1) + c101 * t1
        c11 = c011 * (1 - t1) + c111 * t1
        c0 = c00 * (1 - t2) + c10 * t2
        c1 = c01 * (1 - t2) + c11 * t2
        return float(c0 * (1 - t3) + c1 * t3)

    def component(self, c: int) -> np.ndarray:
        if not 0 <= c < self.nval:
            raise IndexOutOfRange(f"component {c} outside nval {self.nval}")
        return self.values[c :: self.nval]

    def stats(self, c: int = 0) -> tuple[float, float, float, float]:
        """(min, max, mean, rms) of one component, mean/rms via compensated
        summation (math.fsum) so 1e7-value grids stay deterministic and exact."""
        comp = self.component(c)
        n = comp.size
        mean = math.fsum(comp) / n
        rms = math.sqrt(math.fsum(comp * comp) / n)
        return float(comp.min()), float(comp.max()), mean, rms


@dataclass(frozen=True)
class ErrorMetrics:
    """Pointwise difference metrics between two equally shaped volumes."""

    max_abs: float
    max_rel: float
    rms: float
    compared_points: int

    def __post_init__(self):
        if self.compared_points <= 0:
            raise ValueError("compared_points must be positive")
        if min(self.max_abs, self.max_rel, self.rms) < 0:
            raise ValueError("error metrics must be non-negative")

    def to_dict(self) -> dict:
        return {
            "max_abs": self.max_abs,
            "max_rel": self.max_rel,
            "rms": self.rms,
            "compared_points": self.compared_points,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ErrorMetrics":
        return cls(
            max_abs=float(d["max_abs"]),
            max_rel=float(d["max_rel"]),
            rms=float(d["rms"]),
            compared_points=int(d["compared_points"]),
        )


def compare_arrays(a: np.ndarray, b: np.ndarray, eps_floor: float = DEFAULT_EPS_FLOOR) -> ErrorMetrics:
    """Error metrics of b against a. max_rel divides by max(|a|, eps_floor)."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size != b.size:
        raise ShapeMismatch(f"cannot compare {a.size} values with {b.size}")
    diff = np.abs(a - b)
    denom = np.maximum(np.abs(a), eps_floor)
    n = diff.size
    return ErrorMetrics(
        max_abs=float(diff.max()),
        max_rel=float((diff / denom).max()),
        rms=math.sqrt(math.fsum(diff * diff) / n),
        compared_points=n,
    )


def compare(a: Volume, b: Volume, eps_floor: float = DEFAULT_EPS_FLOOR) -> ErrorMetrics:
    """Error metrics of volume b against a, shapes must match."""
    if a.dims != b.dims or a.nval != b.nval:
        raise ShapeMismatch(
            f"cannot compare dims {a.dims} nval {a.nval} "
            f"with dims {b.dims} nval {b.nval}"
        )
    return compare_arrays(a.values, b.values, eps_floor)
