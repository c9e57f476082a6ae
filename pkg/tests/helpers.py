"""Shared fixtures-in-spirit: analytic fields, mesh oracles, dataset builders."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from plasmaviz.fields import GridDims, ScalarField, VectorField
from plasmaviz.isosurface import TriangleMesh


def make_scalar(values_kji: np.ndarray, **dims_kw) -> ScalarField:
    """Scalar field from an array indexed [k, j, i]."""
    values_kji = np.asarray(values_kji, dtype=np.float64)
    nz, ny, nx = values_kji.shape
    return ScalarField(GridDims(nx, ny, nz, **dims_kw), values_kji.ravel())


def sphere_field(n: int = 32, radius: float = 10.0) -> tuple[ScalarField, np.ndarray, float]:
    """f = R - |p - c| on an n^3 unit-spaced grid; returns (field, center, R)."""
    g = np.mgrid[0:n, 0:n, 0:n].astype(np.float64)
    c = (n - 1) / 2.0
    dist = np.sqrt(((g - c) ** 2).sum(axis=0))
    field = make_scalar(radius - dist)
    return field, np.array([c, c, c]), radius


def circular_vector_field(n: int = 9, span: float = 4.0) -> VectorField:
    """v = (-y, x, 0): linear per axis, so trilinear sampling is exact."""
    d = span / (n - 1)
    dims = GridDims(n, n, n, d, d, d, (-span / 2, -span / 2, -span / 2))
    ax = np.linspace(-span / 2, span / 2, n)
    X, Y = np.meshgrid(ax, ax, indexing="xy")       # X[j, i], Y[j, i]
    vx = np.tile(-Y[None, :, :], (n, 1, 1))
    vy = np.tile(X[None, :, :], (n, 1, 1))
    return VectorField(dims, vx.ravel(), vy.ravel(), np.zeros(n ** 3))


def constant_vector_field(v, nx=11, ny=2, nz=2) -> VectorField:
    dims = GridDims(nx, ny, nz)
    n = dims.node_count
    return VectorField(dims, np.full(n, v[0], float), np.full(n, v[1], float),
                       np.full(n, v[2], float))


def simple_mesh(verts, tris) -> TriangleMesh:
    verts = np.asarray(verts, dtype=np.float64)
    return TriangleMesh(verts, np.tile([0.0, 0.0, 1.0], (len(verts), 1)),
                        np.zeros((len(verts), 2)), np.asarray(tris, dtype=np.int64))


def flat_grid_mesh(n: int = 8) -> TriangleMesh:
    """n x n vertex grid in z=0: (n-1)^2 * 2 coplanar triangles."""
    verts = [(i, j, 0.0) for j in range(n) for i in range(n)]
    tris = []
    for j in range(n - 1):
        for i in range(n - 1):
            a = j * n + i
            tris.append((a, a + 1, a + n + 1))
            tris.append((a, a + n + 1, a + n))
    return simple_mesh(verts, tris)


def icosphere(subdiv: int = 2) -> TriangleMesh:
    phi = (1 + 5 ** 0.5) / 2
    vs = [(-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
          (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
          (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1)]
    vs = [np.asarray(v) / np.linalg.norm(v) for v in vs]
    fs = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
          (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
          (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
          (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    for _ in range(subdiv):
        cache = {}
        out = []

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = vs[a] + vs[b]
                cache[key] = len(vs)
                vs.append(m / np.linalg.norm(m))
            return cache[key]

        for a, b, c in fs:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            out += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
        fs = out
    return simple_mesh(vs, fs)


# -- mesh oracles


def triangle_multiset(mesh: TriangleMesh, decimals: int = 6) -> list:
    """Order-independent canonical form: sorted rounded corner triples."""
    tv = np.round(mesh.vertices[mesh.triangles], decimals)
    return sorted(tuple(sorted(map(tuple, tri))) for tri in tv)


def undirected_edges(mesh: TriangleMesh) -> tuple[np.ndarray, np.ndarray]:
    t = mesh.triangles
    e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    e = np.sort(e, axis=1)
    return np.unique(e, axis=0, return_counts=True)


def euler_characteristic(mesh: TriangleMesh) -> int:
    edges, _ = undirected_edges(mesh)
    return mesh.vertex_count - len(edges) + mesh.triangle_count


def is_closed(mesh: TriangleMesh) -> bool:
    _, counts = undirected_edges(mesh)
    return bool((counts == 2).all())


def sample_surface(mesh: TriangleMesh, n: int, rng) -> np.ndarray:
    """Area-weighted random points on the surface."""
    tv = mesh.vertices[mesh.triangles]
    areas = 0.5 * np.linalg.norm(np.cross(tv[:, 1] - tv[:, 0], tv[:, 2] - tv[:, 0]), axis=1)
    idx = rng.choice(len(tv), size=n, p=areas / areas.sum())
    r1, r2 = rng.random(n), rng.random(n)
    s = np.sqrt(r1)
    a, b, c = tv[idx, 0], tv[idx, 1], tv[idx, 2]
    return a * (1 - s)[:, None] + b * (s * (1 - r2))[:, None] + c * (s * r2)[:, None]


def point_triangle_distance(p, a, b, c) -> float:
    """Exact distance from point to triangle (region classification)."""
    ab, ac, ap = b - a, c - a, p - a
    d1, d2 = ab @ ap, ac @ ap
    if d1 <= 0 and d2 <= 0:
        return float(np.linalg.norm(p - a))
    bp = p - b
    d3, d4 = ab @ bp, ac @ bp
    if d3 >= 0 and d4 <= d3:
        return float(np.linalg.norm(p - b))
    vc = d1 * d4 - d3 * d2
    if vc <= 0 and d1 >= 0 and d3 <= 0:
        t = d1 / (d1 - d3)
        return float(np.linalg.norm(p - (a + t * ab)))
    cp = p - c
    d5, d6 = ab @ cp, ac @ cp
    if d6 >= 0 and d5 <= d6:
        return float(np.linalg.norm(p - c))
    vb = d5 * d2 - d1 * d6
    if vb <= 0 and d2 >= 0 and d6 <= 0:
        t = d2 / (d2 - d6)
        return float(np.linalg.norm(p - (a + t * ac)))
    va = d3 * d6 - d5 * d4
    if va <= 0 and (d4 - d3) >= 0 and (d5 - d6) >= 0:
        t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return float(np.linalg.norm(p - (b + t * (c - b))))
    denom = va + vb + vc
    v = vb / denom
    w = vc / denom
    return float(np.linalg.norm(p - (a + ab * v + ac * w)))


def distance_to_mesh(points: np.ndarray, mesh: TriangleMesh,
                     chunk: int = 128) -> np.ndarray:
    """Exact point-to-surface distance, vectorized over triangle chunks.

    Same region classification as point_triangle_distance (which remains
    the scalar cross-check for this implementation).
    """
    points = np.asarray(points, dtype=np.float64)
    tv = mesh.vertices[mesh.triangles]
    best = np.full(len(points), np.inf)
    p = points[:, None, :]
    for s in range(0, len(tv), chunk):
        a, b, c = tv[s:s + chunk, 0], tv[s:s + chunk, 1], tv[s:s + chunk, 2]
        ab, ac, bc = b - a, c - a, c - b
        ap, bp, cp = p - a[None], p - b[None], p - c[None]
        d1 = (ab[None] * ap).sum(-1)
        d2 = (ac[None] * ap).sum(-1)
        d3 = (ab[None] * bp).sum(-1)
        d4 = (ac[None] * bp).sum(-1)
        d5 = (ab[None] * cp).sum(-1)
        d6 = (ac[None] * cp).sum(-1)
        vc = d1 * d4 - d3 * d2
        vb = d5 * d2 - d1 * d6
        va = d3 * d6 - d5 * d4

        dist = np.full(d1.shape, np.inf)

        def put(mask, value):
            nonlocal dist
            use = mask & np.isinf(dist)
            dist = np.where(use, value, dist)

        put((d1 <= 0) & (d2 <= 0), np.linalg.norm(ap, axis=-1))
        put((d3 >= 0) & (d4 <= d3), np.linalg.norm(bp, axis=-1))
        put((d6 >= 0) & (d5 <= d6), np.linalg.norm(cp, axis=-1))
        with np.errstate(divide="ignore", invalid="ignore"):
            t = d1 / (d1 - d3)
            put((vc <= 0) & (d1 >= 0) & (d3 <= 0),
                np.linalg.norm(ap - t[..., None] * ab[None], axis=-1))
            t = d2 / (d2 - d6)
            put((vb <= 0) & (d2 >= 0) & (d6 <= 0),
                np.linalg.norm(ap - t[..., None] * ac[None], axis=-1))
            t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
            put((va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0),
                np.linalg.norm(bp - t[..., None] * bc[None], axis=-1))
            denom = va + vb + vc
            v = vb / denom
            w = vc / denom
            put(np.isfinite(denom) & (denom != 0),
                np.linalg.norm(ap - v[..., None] * ab[None] - w[..., None] * ac[None],
                               axis=-1))
        best = np.minimum(best, dist.min(axis=1))
    return best


def sampled_hausdorff(m1: TriangleMesh, m2: TriangleMesh, n: int, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    d12 = distance_to_mesh(sample_surface(m1, n, rng), m2).max()
    d21 = distance_to_mesh(sample_surface(m2, n, rng), m1).max()
    return float(max(d12, d21))


# -- independent minimal OBJ reader (kept separate from the package parser)


def parse_obj_text(data: bytes):
    verts, faces, lines = [], [], []
    for raw in data.decode().splitlines():
        f = raw.split()
        if not f:
            continue
        if f[0] == "v":
            verts.append(tuple(float(x) for x in f[1:4]))
        elif f[0] == "f":
            faces.append(tuple(int(t.split("/")[0]) for t in f[1:]))
        elif f[0] == "l":
            lines.append(tuple(int(t) for t in f[1:]))
    return verts, faces, lines


# -- dataset builders


def write_dataset(root: Path, *, frames: int = 3, n: int = 8,
                  scalar=True, vector=True, particles=(20, 15, 10),
                  seed: int = 0) -> Path:
    """Synthesize an all-modality dataset: drifting sphere scalar field,
    circulating vector field, random particles."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    man: dict = {"name": "testset", "frame_count": frames}
    if scalar:
        man["scalar"] = {"dims": [n, n, n], "pattern": "scalar_%04d.f32"}
    if vector:
        man["vector"] = {"dims": [n, n, n], "pattern": "vector_%04d.f32"}
    if particles is not None:
        counts = list(particles)[:frames]
        counts += [counts[-1]] * (frames - len(counts))
        man["particles"] = {"counts": counts, "pattern": "particles_%04d.f32"}
    (root / "manifest.json").write_text(json.dumps(man, indent=1))

    g = np.mgrid[0:n, 0:n, 0:n].astype(np.float64)
    c = (n - 1) / 2.0
    for k in range(frames):
        if scalar:
            vals = (n / 3.0 + 0.2 * k) - np.sqrt(((g - c) ** 2).sum(axis=0))
            (root / f"scalar_{k:04d}.f32").write_bytes(
                vals.astype("<f4").ravel().tobytes())
        if vector:
            vx = -(g[1] - c)
            vy = g[2] - c
            vz = np.full_like(vx, 0.1)
            (root / f"vector_{k:04d}.f32").write_bytes(
                vx.astype("<f4").ravel().tobytes()
                + vy.astype("<f4").ravel().tobytes()
                + vz.astype("<f4").ravel().tobytes())
        if particles is not None:
            cnt = man["particles"]["counts"][k]
            rec = np.hstack([rng.uniform(0, n - 1, (cnt, 3)), rng.random((cnt, 1))])
            (root / f"particles_{k:04d}.f32").write_bytes(rec.astype("<f4").tobytes())
    return root
