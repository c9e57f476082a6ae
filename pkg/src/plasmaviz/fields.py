"""Regular-grid field containers shared by all processing pipelines.

Layout contract (used by every module in the package):

* node values are stored in a flat array, x-fastest row-major order, so
  node (i, j, k) lives at flat index ``i + nx * (j + ny * k)``;
* node (i, j, k) sits at world position ``origin + (i*dx, j*dy, k*dz)``;
* off-node evaluation is trilinear over the eight enclosing nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class DomainExit(Exception):
    """Signals that a sample point left the grid bounding box."""


def _as_field_array(values, n, what):
    arr = np.asarray(values)
    if arr.dtype not in (np.float32, np.float64):
        arr = arr.astype(np.float64)
    arr = arr.reshape(-1)
    if arr.size != n:
        raise ValueError(f"{what}: expected {n} values, got {arr.size}")
    # min/max double as the finiteness check (NaN poisons min) without
    # allocating an isfinite mask for large frames.
    if arr.size and not (np.isfinite(arr.min()) and np.isfinite(arr.max())):
        raise ValueError(f"{what}: non-finite values present")
    return arr


@dataclass(frozen=True)
class GridDims:
    """Node counts, spacing, and origin of a regular grid."""

    nx: int
    ny: int
    nz: int
    dx: float = 1.0
    dy: float = 1.0
    dz: float = 1.0
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if min(self.nx, self.ny, self.nz) < 2:
            raise ValueError(f"grid needs >=2 nodes per axis, got {(self.nx, self.ny, self.nz)}")
        if min(self.dx, self.dy, self.dz) <= 0:
            raise ValueError(f"grid spacing must be positive, got {(self.dx, self.dy, self.dz)}")
        if len(self.origin) != 3:
            raise ValueError("origin must have 3 components")

    @property
    def node_count(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def spacing(self) -> tuple[float, float, float]:
        return (self.dx, self.dy, self.dz)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """World-space axis-aligned bounding box (lo, hi) of the node lattice."""
        lo = np.asarray(self.origin, dtype=np.float64)
        hi = lo + np.array([(self.nx - 1) * self.dx,
                            (self.ny - 1) * self.dy,
                            (self.nz - 1) * self.dz])
        return lo, hi

    def node_position(self, i: int, j: int, k: int) -> np.ndarray:
        ox, oy, oz = self.origin
        return np.array([ox + i * self.dx, oy + j * self.dy, oz + k * self.dz])


def linear_index(dims: GridDims, i: int, j: int, k: int) -> int:
    """Flat index of node (i, j, k) under the x-fastest layout."""
    if not (0 <= i < dims.nx and 0 <= j < dims.ny and 0 <= k < dims.nz):
        raise IndexError(f"node ({i}, {j}, {k}) outside grid {(dims.nx, dims.ny, dims.nz)}")
    return i + dims.nx * (j + dims.ny * k)


@dataclass
class ScalarField:
    """One scalar value per grid node (charge density and friends)."""

    dims: GridDims
    values: np.ndarray

    def __post_init__(self):
        self.values = _as_field_array(self.values, self.dims.node_count, "scalar field")

    def as_3d(self) -> np.ndarray:
        """View shaped (nz, ny, nx) so that ``a[k, j, i]`` is node (i, j, k)."""
        return self.values.reshape(self.dims.nz, self.dims.ny, self.dims.nx)

    def at(self, i: int, j: int, k: int) -> float:
        return float(self.values[linear_index(self.dims, i, j, k)])


@dataclass
class VectorField:
    """One 3-vector per grid node, stored as three scalar-layout component arrays."""

    dims: GridDims
    vx: np.ndarray
    vy: np.ndarray
    vz: np.ndarray

    def __post_init__(self):
        n = self.dims.node_count
        self.vx = _as_field_array(self.vx, n, "vector field vx")
        self.vy = _as_field_array(self.vy, n, "vector field vy")
        self.vz = _as_field_array(self.vz, n, "vector field vz")

    def at(self, i: int, j: int, k: int) -> np.ndarray:
        f = linear_index(self.dims, i, j, k)
        return np.array([self.vx[f], self.vy[f], self.vz[f]])

    def magnitudes(self) -> np.ndarray:
        return np.sqrt(self.vx ** 2 + self.vy ** 2 + self.vz ** 2)


def field_minmax(field: ScalarField) -> tuple[float, float]:
    """Exact extrema over all nodes of the current frame."""
    v = field.values
    return float(v.min()), float(v.max())


def _cell_of(dims: GridDims, p) -> tuple[int, int, int, float, float, float]:
    """Locate p's enclosing cell; returns (i, j, k, fx, fy, fz) with fractions in [0, 1].

    Raises DomainExit when p is outside the node bounding box.
    """
    ox, oy, oz = dims.origin
    gx = (float(p[0]) - ox) / dims.dx
    gy = (float(p[1]) - oy) / dims.dy
    gz = (float(p[2]) - oz) / dims.dz
    if not (0.0 <= gx <= dims.nx - 1 and 0.0 <= gy <= dims.ny - 1 and 0.0 <= gz <= dims.nz - 1):
        raise DomainExit(f"point {tuple(float(c) for c in p)} outside grid bounds")
    i = min(int(gx), dims.nx - 2)
    j = min(int(gy), dims.ny - 2)
    k = min(int(gz), dims.nz - 2)
    return i, j, k, gx - i, gy - j, gz - k


def _trilerp(arr: np.ndarray, base: int, sx: int, sy: int, sz: int,
             fx: float, fy: float, fz: float) -> float:
    # Nested lerps: x, then y, then z.
    c000 = arr[base]
    c100 = arr[base + sx]
    c010 = arr[base + sy]
    c110 = arr[base + sx + sy]
    c001 = arr[base + sz]
    c101 = arr[base + sx + sz]
    c011 = arr[base + sy + sz]
    c111 = arr[base + sx + sy + sz]
    c00 = c000 + (c100 - c000) * fx
    c10 = c010 + (c110 - c010) * fx
    c01 = c001 + (c101 - c001) * fx
    c11 = c011 + (c111 - c011) * fx
    c0 = c00 + (c10 - c00) * fy
    c1 = c01 + (c11 - c01) * fy
    return float(c0 + (c1 - c0) * fz)


def sample_vector(field: VectorField, p) -> np.ndarray:
    """Trilinear interpolation of the field vector at world position p.

    Raises DomainExit for points outside the grid bounding box; the
    streamline tracer consumes that signal to terminate traces.
    """
    dims = field.dims
    i, j, k, fx, fy, fz = _cell_of(dims, p)
    sx, sy, sz = 1, dims.nx, dims.nx * dims.ny
    base = i + dims.nx * (j + dims.ny * k)
    return np.array([
        _trilerp(field.vx, base, sx, sy, sz, fx, fy, fz),
        _trilerp(field.vy, base, sx, sy, sz, fx, fy, fz),
        _trilerp(field.vz, base, sx, sy, sz, fx, fy, fz),
    ])


def sample_scalar(field: ScalarField, p) -> float:
    """Trilinear interpolation of a scalar field at world position p."""
    dims = field.dims
    i, j, k, fx, fy, fz = _cell_of(dims, p)
    sx, sy, sz = 1, dims.nx, dims.nx * dims.ny
    base = i + dims.nx * (j + dims.ny * k)
    return _trilerp(field.values, base, sx, sy, sz, fx, fy, fz)


@dataclass
class FrameSeries:
    """Per-timestep payload handles with an eager or lazy loading policy.

    Loaders are callables ``k -> payload``; under the eager policy every
    frame is materialized up front (trading memory for instant playback),
    under the lazy policy frames are loaded on first access and memoized.
    """

    frame_count: int
    loaders: dict[str, Callable[[int], object]]
    policy: str = "lazy"
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.frame_count < 1:
            raise ValueError("frame_count must be >= 1")
        if self.policy not in ("eager", "lazy"):
            raise ValueError(f"unknown loading policy {self.policy!r}")
        if self.policy == "eager":
            for modality in self.loaders:
                for k in range(self.frame_count):
                    self.get(modality, k)

    @property
    def modalities(self) -> tuple[str, ...]:
        return tuple(sorted(self.loaders))

    def get(self, modality: str, k: int):
        if modality not in self.loaders:
            raise KeyError(f"modality {modality!r} not present")
        if not 0 <= k < self.frame_count:
            raise IndexError(f"frame {k} out of range 0..{self.frame_count - 1}")
        key = (modality, k)
        if key not in self._cache:
            self._cache[key] = self.loaders[modality](k)
        return self._cache[key]
