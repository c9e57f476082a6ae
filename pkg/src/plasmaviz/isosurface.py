"""Isovalue surface extraction from scalar fields.

Two extractors share one 256-case triangulation convention:

* :func:`flying_edges` — the production path.  Edge-parallel multi-pass
  contouring: classify x-edges row by row, count per-row outputs, prefix-sum
  into exact allocations, then fill vertices and triangles into
  pre-allocated arrays with no dynamic growth.
* :func:`marching_cubes_reference` — a deliberately naive cube-by-cube
  implementation kept as an independent check of the fast path.

Classification is strict: a node value exactly equal to the isovalue counts
as below it, so zero-length crossings cannot occur.  Emitted triangles wind
counter-clockwise when seen from the side the field increases toward.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from .fields import DomainExit, GridDims, ScalarField
from .mc_tables import CORNER_OFFSETS, CORNER_PAIRS, TRI_COUNT, TRI_TABLE, TRI_TABLE_PADDED

UV_MODES = ("zero", "planar_xy")


@dataclass
class TriangleMesh:
    """Indexed triangle mesh with per-vertex normals and UVs."""

    vertices: np.ndarray   # (n, 3) float64
    normals: np.ndarray    # (n, 3) float64, unit length
    uvs: np.ndarray        # (n, 2) float64
    triangles: np.ndarray  # (m, 3) int64

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.normals = np.asarray(self.normals, dtype=np.float64).reshape(-1, 3)
        self.uvs = np.asarray(self.uvs, dtype=np.float64).reshape(-1, 2)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)

    @classmethod
    def empty(cls) -> "TriangleMesh":
        return cls(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros((0, 2)), np.zeros((0, 3), int))

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    @property
    def triangle_count(self) -> int:
        return len(self.triangles)

    def validate(self) -> None:
        """Raise ValueError if any structural invariant is broken."""
        n = self.vertex_count
        if not (len(self.normals) == n and len(self.uvs) == n):
            raise ValueError("normals/uvs length must match vertex count")
        if self.triangle_count:
            t = self.triangles
            if t.min() < 0 or t.max() >= n:
                raise ValueError("triangle index out of range")
            if (t[:, 0] == t[:, 1]).any() or (t[:, 1] == t[:, 2]).any() or (t[:, 0] == t[:, 2]).any():
                raise ValueError("triangle repeats a vertex index")
        if n:
            lens = np.linalg.norm(self.normals, axis=1)
            if np.abs(lens - 1.0).max() > 1e-6:
                raise ValueError("normals must be unit length")


@dataclass(frozen=True)
class IsoRequest:
    """Parameters of one isosurface extraction."""

    isovalue: float
    target_ratio: float | None = None
    uv_mode: str = "zero"

    def __post_init__(self):
        if not np.isfinite(self.isovalue):
            raise ValueError("isovalue must be finite")
        if self.target_ratio is not None and not 0.0 < self.target_ratio <= 1.0:
            raise ValueError(f"target_ratio must be in (0, 1], got {self.target_ratio}")
        if self.uv_mode not in UV_MODES:
            raise ValueError(f"uv_mode must be one of {UV_MODES}")


def _finish_mesh(vertices, triangles, field, uv_mode):
    mesh = TriangleMesh(
        vertices=vertices,
        normals=np.tile([0.0, 0.0, 1.0], (len(vertices), 1)),
        uvs=_make_uvs(vertices, field.dims, uv_mode),
        triangles=triangles,
    )
    if mesh.vertex_count:
        mesh = compute_normals(mesh, field)
    return mesh


def _make_uvs(vertices, dims: GridDims, uv_mode: str) -> np.ndarray:
    if uv_mode not in UV_MODES:
        raise ValueError(f"uv_mode must be one of {UV_MODES}")
    n = len(vertices)
    if uv_mode == "zero" or n == 0:
        return np.zeros((n, 2))
    lo, hi = dims.bounds()
    span = np.maximum(hi[:2] - lo[:2], 1e-300)
    return (np.asarray(vertices)[:, :2] - lo[:2]) / span


# ---------------------------------------------------------------------------
# Flying Edges


class _FlyingEdges:
    """One extraction run; keeps the pass products for instrumentation."""

    def __init__(self, field: ScalarField, isovalue: float, workers: int = 1,
                 uv_mode: str = "zero"):
        self.field = field
        self.iso = float(isovalue)
        self.workers = max(1, int(workers))
        self.uv_mode = uv_mode
        self.dims = field.dims
        self.counted_vertices = 0
        self.counted_triangles = 0

    def _plane_chunks(self, nplanes: int):
        step = -(-nplanes // self.workers)
        return [(s, min(s + step, nplanes)) for s in range(0, nplanes, step)]

    def _run(self, fn, nplanes: int):
        chunks = self._plane_chunks(nplanes)
        if len(chunks) == 1:
            fn(*chunks[0])
            return
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            list(pool.map(lambda c: fn(*c), chunks))

    def extract(self) -> TriangleMesh:
        a = self.field.as_3d()
        nz, ny, nx = a.shape

        self.below = a <= self.iso
        self.xcase = np.empty((nz, ny, nx - 1), dtype=np.uint8)
        self.mx = np.empty((nz, ny, nx - 1), dtype=bool)
        self.my = np.empty((nz, ny - 1, nx), dtype=bool)
        self.mz = np.empty((nz - 1, ny, nx), dtype=bool)
        self.case = np.empty((nz - 1, ny - 1, nx - 1), dtype=np.uint8)
        self.xcnt = np.empty((nz, ny), dtype=np.int64)
        self.ycnt = np.empty((nz, ny - 1), dtype=np.int64)
        self.zcnt = np.empty((nz - 1, ny), dtype=np.int64)
        self.tri_row = np.empty((nz - 1, ny - 1), dtype=np.int64)

        # Pass 1: classify x-edges row by row (2-bit case per edge), plus the
        # y/x crossing masks and their per-row counts; slabs touch disjoint
        # node planes.
        self._run(self._pass_classify, nz)
        # Pass 2: per-row output sizes for cells.  Cell cases derive purely
        # from the x-edge classification of the four rows bounding each cell
        # row; slabs touch disjoint cell planes and only read plane k+1.
        self._run(self._pass_count_cells, nz - 1)

        # Pass 3: prefix sums over rows fix every output offset and make the
        # allocations exact.  Vertex ids come in three blocks: x, y, z edges.
        nxv = int(self.xcnt.sum())
        nyv = int(self.ycnt.sum())
        nzv = int(self.zcnt.sum())
        ntri = int(self.tri_row.sum())
        self.counted_vertices = nxv + nyv + nzv
        self.counted_triangles = ntri
        if ntri == 0:
            return TriangleMesh.empty()

        self.x_plane_base = self._plane_bases(self.xcnt, 0)
        self.y_plane_base = self._plane_bases(self.ycnt, nxv)
        self.z_plane_base = self._plane_bases(self.zcnt, nxv + nyv)
        self.tri_plane_base = self._plane_bases(self.tri_row, 0)

        self.verts = np.empty((self.counted_vertices, 3), dtype=np.float64)
        self.tris = np.empty((ntri, 3), dtype=np.int64)

        # Pass 4: fill pre-allocated storage.
        self._run(self._fill_x_vertices, nz)
        self._run(self._fill_y_vertices, nz)
        self._run(self._fill_z_vertices, nz - 1)
        self._run(self._fill_triangles, nz - 1)

        return _finish_mesh(self.verts, self.tris, self.field, self.uv_mode)

    @staticmethod
    def _plane_bases(row_counts, base):
        per_plane = row_counts.sum(axis=1, dtype=np.int64)
        starts = np.concatenate([[0], np.cumsum(per_plane)]) + base
        return starts  # length nplanes+1; starts[-1] - base == total

    def _pass_classify(self, k0, k1):
        b = self.below[k0:k1]
        self.xcase[k0:k1] = b[:, :, :-1].astype(np.uint8) | (b[:, :, 1:].astype(np.uint8) << 1)
        self.mx[k0:k1] = b[:, :, :-1] != b[:, :, 1:]
        self.my[k0:k1] = b[:, :-1, :] != b[:, 1:, :]
        self.xcnt[k0:k1] = self.mx[k0:k1].sum(axis=2, dtype=np.int64)
        self.ycnt[k0:k1] = self.my[k0:k1].sum(axis=2, dtype=np.int64)

    def _pass_count_cells(self, k0, k1):
        self.mz[k0:k1] = self.below[k0:k1] != self.below[k0 + 1:k1 + 1]
        self.zcnt[k0:k1] = self.mz[k0:k1].sum(axis=2, dtype=np.int64)
        lo = self.xcase[k0:k1]
        hi = self.xcase[k0 + 1:k1 + 1]
        b0lo, b1lo = lo & 1, lo >> 1
        b0hi, b1hi = hi & 1, hi >> 1
        self.case[k0:k1] = (
            b0lo[:, :-1]
            | (b1lo[:, :-1] << 1)
            | (b1lo[:, 1:] << 2)
            | (b0lo[:, 1:] << 3)
            | (b0hi[:, :-1] << 4)
            | (b1hi[:, :-1] << 5)
            | (b1hi[:, 1:] << 6)
            | (b0hi[:, 1:] << 7)
        )
        self.tri_row[k0:k1] = TRI_COUNT[self.case[k0:k1]].sum(axis=2, dtype=np.int64)

    # -- vertex fills: crossings enumerate in (k, j, i) row-major order,
    #    matching the pass-2/3 offsets exactly.

    def _fill_x_vertices(self, k0, k1):
        a = self.field.as_3d()
        d = self.dims
        kk, jj, ii = np.nonzero(self.mx[k0:k1])
        if not len(kk):
            return
        f0 = a[kk + k0, jj, ii]
        f1 = a[kk + k0, jj, ii + 1]
        t = (self.iso - f0) / (f1 - f0)
        out = self.verts[self.x_plane_base[k0]:self.x_plane_base[k1]]
        ox, oy, oz = d.origin
        out[:, 0] = ox + (ii + t) * d.dx
        out[:, 1] = oy + jj * d.dy
        out[:, 2] = oz + (kk + k0) * d.dz

    def _fill_y_vertices(self, k0, k1):
        a = self.field.as_3d()
        d = self.dims
        kk, jj, ii = np.nonzero(self.my[k0:k1])
        if not len(kk):
            return
        f0 = a[kk + k0, jj, ii]
        f1 = a[kk + k0, jj + 1, ii]
        t = (self.iso - f0) / (f1 - f0)
        out = self.verts[self.y_plane_base[k0]:self.y_plane_base[k1]]
        ox, oy, oz = d.origin
        out[:, 0] = ox + ii * d.dx
        out[:, 1] = oy + (jj + t) * d.dy
        out[:, 2] = oz + (kk + k0) * d.dz

    def _fill_z_vertices(self, k0, k1):
        a = self.field.as_3d()
        d = self.dims
        kk, jj, ii = np.nonzero(self.mz[k0:k1])
        if not len(kk):
            return
        f0 = a[kk + k0, jj, ii]
        f1 = a[kk + k0 + 1, jj, ii]
        t = (self.iso - f0) / (f1 - f0)
        out = self.verts[self.z_plane_base[k0]:self.z_plane_base[k1]]
        ox, oy, oz = d.origin
        out[:, 0] = ox + ii * d.dx
        out[:, 1] = oy + jj * d.dy
        out[:, 2] = oz + (kk + k0 + t) * d.dz

    def _edge_ids_2d(self, mask_plane, base):
        ids = np.cumsum(mask_plane.ravel()).reshape(mask_plane.shape) - 1 + base
        return ids

    def _fill_triangles(self, k0, k1):
        ids_cache: dict = {}

        def plane_ids(k):
            # consecutive cell planes share their boundary edge planes
            if ids_cache.get("k") != k:
                ids_cache["k"] = k
                ids_cache["x"] = self._edge_ids_2d(self.mx[k], self.x_plane_base[k])
                ids_cache["y"] = self._edge_ids_2d(self.my[k], self.y_plane_base[k])
            return ids_cache["x"], ids_cache["y"]

        for k in range(k0, k1):
            plane_tris = self.tri_plane_base[k + 1] - self.tri_plane_base[k]
            if plane_tris == 0:
                continue
            xid0, yid0 = plane_ids(k)
            xid1, yid1 = plane_ids(k + 1)
            zid = self._edge_ids_2d(self.mz[k], self.z_plane_base[k])

            case = self.case[k]
            cnt = TRI_COUNT[case]
            jj, ii = np.nonzero(cnt)
            acase = case[jj, ii]
            acnt = cnt[jj, ii]
            # Cell-local edge numbers 0..11 resolved to global vertex ids.
            edge_ids = np.stack([
                xid0[jj, ii],
                yid0[jj, ii + 1],
                xid0[jj + 1, ii],
                yid0[jj, ii],
                xid1[jj, ii],
                yid1[jj, ii + 1],
                xid1[jj + 1, ii],
                yid1[jj, ii],
                zid[jj, ii],
                zid[jj, ii + 1],
                zid[jj + 1, ii + 1],
                zid[jj + 1, ii],
            ], axis=1)
            starts = np.cumsum(acnt) - acnt + self.tri_plane_base[k]
            for t in range(int(acnt.max())):
                rows = np.nonzero(acnt > t)[0]
                local = TRI_TABLE_PADDED[acase[rows], 3 * t:3 * t + 3]
                self.tris[starts[rows] + t] = np.take_along_axis(edge_ids[rows], local, axis=1)


def flying_edges(field: ScalarField, isovalue: float, *, uv_mode: str = "zero",
                 workers: int = 1) -> TriangleMesh:
    """Extract the isovalue surface of a scalar field.

    Vertices are the linear crossings of the isovalue along grid edges,
    shared between adjacent cells; triangles follow the 256-case table.
    Fields entirely above or below the isovalue yield an empty mesh.
    ``workers`` splits the passes over plane slabs; the output is identical
    for any worker count.
    """
    if not np.isfinite(isovalue):
        raise ValueError("isovalue must be finite")
    return _FlyingEdges(field, isovalue, workers, uv_mode).extract()


def flying_edges_instrumented(field: ScalarField, isovalue: float, *,
                              uv_mode: str = "zero", workers: int = 1):
    """Like flying_edges but also returns the counting-pass totals."""
    fe = _FlyingEdges(field, isovalue, workers, uv_mode)
    mesh = fe.extract()
    return mesh, fe.counted_vertices, fe.counted_triangles


# ---------------------------------------------------------------------------
# Naive reference


def marching_cubes_reference(field: ScalarField, isovalue: float, *,
                             uv_mode: str = "zero") -> TriangleMesh:
    """Cube-by-cube contouring with the same crossing and table semantics
    as flying_edges.  Slow on purpose; used to cross-check the fast path.
    """
    if not np.isfinite(isovalue):
        raise ValueError("isovalue must be finite")
    d = field.dims
    a = field.as_3d()
    iso = float(isovalue)
    ox, oy, oz = d.origin

    vert_ids: dict[tuple, int] = {}
    verts: list[tuple] = []
    tris: list[tuple] = []

    def edge_vertex(i, j, k, e):
        ca, cb = CORNER_PAIRS[e]
        ax, ay, az = CORNER_OFFSETS[ca]
        bx, by, bz = CORNER_OFFSETS[cb]
        # canonical key: lower node plus axis, so shared edges dedupe
        n0 = (i + min(ax, bx), j + min(ay, by), k + min(az, bz))
        axis = 0 if ax != bx else (1 if ay != by else 2)
        key = (axis, *n0)
        vid = vert_ids.get(key)
        if vid is None:
            i0, j0, k0 = n0
            f0 = a[k0, j0, i0]
            if axis == 0:
                f1 = a[k0, j0, i0 + 1]
                t = (iso - f0) / (f1 - f0)
                pos = (ox + (i0 + t) * d.dx, oy + j0 * d.dy, oz + k0 * d.dz)
            elif axis == 1:
                f1 = a[k0, j0 + 1, i0]
                t = (iso - f0) / (f1 - f0)
                pos = (ox + i0 * d.dx, oy + (j0 + t) * d.dy, oz + k0 * d.dz)
            else:
                f1 = a[k0 + 1, j0, i0]
                t = (iso - f0) / (f1 - f0)
                pos = (ox + i0 * d.dx, oy + j0 * d.dy, oz + (k0 + t) * d.dz)
            vid = len(verts)
            vert_ids[key] = vid
            verts.append(pos)
        return vid

    for k in range(d.nz - 1):
        for j in range(d.ny - 1):
            for i in range(d.nx - 1):
                case = 0
                for c, (cx, cy, cz) in enumerate(CORNER_OFFSETS):
                    if a[k + cz, j + cy, i + cx] <= iso:
                        case |= 1 << c
                if case == 0 or case == 255:
                    continue
                row = TRI_TABLE[case]
                for t in range(0, len(row), 3):
                    tris.append((edge_vertex(i, j, k, row[t]),
                                 edge_vertex(i, j, k, row[t + 1]),
                                 edge_vertex(i, j, k, row[t + 2])))

    if not tris:
        return TriangleMesh.empty()
    return _finish_mesh(np.array(verts), np.array(tris, dtype=np.int64), field, uv_mode)


# ---------------------------------------------------------------------------
# Normals


def compute_normals(mesh: TriangleMesh, field: ScalarField) -> TriangleMesh:
    """Per-vertex normals from the field gradient at each vertex.

    Normals are the normalized central-difference gradient, oriented toward
    increasing field values.  Zero-gradient vertices fall back to the
    area-weighted normal of their incident faces, then to +z.
    """
    if mesh.vertex_count == 0:
        return mesh
    d = field.dims
    lo, hi = d.bounds()
    pts = mesh.vertices
    grad = np.empty_like(pts)
    for axis, h in enumerate(d.spacing):
        p_hi = pts.copy()
        p_lo = pts.copy()
        p_hi[:, axis] = np.minimum(pts[:, axis] + h, hi[axis])
        p_lo[:, axis] = np.maximum(pts[:, axis] - h, lo[axis])
        gap = p_hi[:, axis] - p_lo[:, axis]
        grad[:, axis] = (_sample_batch(field, p_hi) - _sample_batch(field, p_lo)) / gap

    norms = np.linalg.norm(grad, axis=1)
    ok = norms > 1e-20
    normals = np.zeros_like(grad)
    normals[ok] = grad[ok] / norms[ok, None]

    if not ok.all():
        face = _area_weighted_vertex_normals(mesh)
        fn = np.linalg.norm(face, axis=1)
        use_face = ~ok & (fn > 1e-20)
        normals[use_face] = face[use_face] / fn[use_face, None]
        normals[~ok & ~use_face] = (0.0, 0.0, 1.0)

    return TriangleMesh(mesh.vertices, normals, mesh.uvs, mesh.triangles)


def _area_weighted_vertex_normals(mesh: TriangleMesh) -> np.ndarray:
    acc = np.zeros((mesh.vertex_count, 3))
    if mesh.triangle_count:
        t = mesh.triangles
        v = mesh.vertices
        fn = np.cross(v[t[:, 1]] - v[t[:, 0]], v[t[:, 2]] - v[t[:, 0]])  # 2x area weighting
        for c in range(3):
            np.add.at(acc, t[:, c], fn)
    return acc


def _sample_batch(field: ScalarField, pts: np.ndarray) -> np.ndarray:
    """Vectorized trilinear sampling; pts must lie inside the domain."""
    d = field.dims
    lo, _ = d.bounds()
    g = (pts - lo) / d.spacing
    if (g < -1e-9).any() or (g > np.array([d.nx, d.ny, d.nz]) - 1 + 1e-9).any():
        raise DomainExit("batch sample point outside grid bounds")
    g = np.clip(g, 0.0, np.array([d.nx, d.ny, d.nz], dtype=np.float64) - 1)
    cell = np.minimum(g.astype(np.int64), [d.nx - 2, d.ny - 2, d.nz - 2])
    f = g - cell
    a = field.as_3d()
    i, j, k = cell[:, 0], cell[:, 1], cell[:, 2]
    fx, fy, fz = f[:, 0], f[:, 1], f[:, 2]
    c00 = a[k, j, i] * (1 - fx) + a[k, j, i + 1] * fx
    c10 = a[k, j + 1, i] * (1 - fx) + a[k, j + 1, i + 1] * fx
    c01 = a[k + 1, j, i] * (1 - fx) + a[k + 1, j, i + 1] * fx
    c11 = a[k + 1, j + 1, i] * (1 - fx) + a[k + 1, j + 1, i + 1] * fx
    c0 = c00 * (1 - fy) + c10 * fy
    c1 = c01 * (1 - fy) + c11 * fy
    return c0 * (1 - fz) + c1 * fz
