"""Dataset layout parsing and geometry/image serialization.

A dataset is a directory with a ``manifest.json`` plus one raw ``.f32``
blob per frame and modality, all little-endian float32:

* scalar frame: nx*ny*nz values, x-fastest;
* vector frame: three contiguous component planes (vx, vy, vz), each in
  scalar layout;
* particle frame: 4 interleaved floats per particle (x, y, z, scalar).

manifest.json schema::

    { "name": str, "frame_count": int,
      "scalar":   {"dims": [nx,ny,nz], "spacing": [dx,dy,dz],
                   "origin": [x,y,z], "pattern": "scalar_%04d.f32"},
      "vector":   { same shape as scalar },
      "particles": {"counts": [n0, ...], "pattern": "particles_%04d.f32"} }

spacing and origin are optional (unit spacing, zero origin).  Frame file
sizes are validated against the declared dims on load.

Also here: OBJ export/import (v/vt/vn/f for meshes, v/l for line sets,
fixed 6-decimal formatting), a minimal deterministic PNG writer, the
particle-texture blob format, and the length-prefixed binary framings the
exploration service streams to viewers.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fields import GridDims, ScalarField, VectorField
from .isosurface import TriangleMesh
from .particles import ParticleFrame, ParticleTexture
from .streamline import Streamline

MESH_MAGIC = b"MSH1"
LINES_MAGIC = b"LNS1"


class DatasetError(Exception):
    """Problem with a dataset layout or a frame payload."""


@dataclass(frozen=True)
class GridSpec:
    dims: GridDims
    pattern: str

    def frame_name(self, k: int) -> str:
        return self.pattern % k


@dataclass(frozen=True)
class ParticleSpec:
    counts: tuple[int, ...]
    pattern: str

    def frame_name(self, k: int) -> str:
        return self.pattern % k


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    frame_count: int
    root: Path
    scalar: GridSpec | None = None
    vector: GridSpec | None = None
    particles: ParticleSpec | None = None

    @property
    def modalities(self) -> tuple[str, ...]:
        return tuple(m for m in ("particles", "scalar", "vector")
                     if getattr(self, m) is not None)


def _parse_grid_spec(doc: dict, modality: str) -> GridSpec:
    try:
        nx, ny, nz = (int(v) for v in doc["dims"])
        dx, dy, dz = (float(v) for v in doc.get("spacing", (1.0, 1.0, 1.0)))
        ox, oy, oz = (float(v) for v in doc.get("origin", (0.0, 0.0, 0.0)))
        pattern = str(doc["pattern"])
        dims = GridDims(nx, ny, nz, dx, dy, dz, (ox, oy, oz))
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"bad {modality} declaration in manifest: {exc}") from exc
    if "%" not in pattern:
        raise DatasetError(f"{modality} pattern {pattern!r} has no frame placeholder")
    return GridSpec(dims=dims, pattern=pattern)


def read_manifest(path) -> DatasetManifest:
    """Load and validate a dataset manifest.

    Checks frame_count, modality declarations, and that every declared
    frame file exists with exactly the byte size its dims imply.
    """
    root = Path(path)
    manifest_path = root / "manifest.json" if root.is_dir() else root
    root = manifest_path.parent
    if not manifest_path.exists():
        raise DatasetError(f"manifest not found at {manifest_path}")
    try:
        doc = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise DatasetError(f"manifest is not valid JSON: {exc}") from exc

    known = {"name", "frame_count", "scalar", "vector", "particles"}
    unknown = set(doc) - known
    if unknown:
        raise DatasetError(f"unknown manifest keys (unsupported modality?): {sorted(unknown)}")
    try:
        name = str(doc["name"])
        frame_count = int(doc["frame_count"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"manifest needs name and frame_count: {exc}") from exc
    if frame_count < 1:
        raise DatasetError(f"frame_count must be >= 1, got {frame_count}")

    scalar = _parse_grid_spec(doc["scalar"], "scalar") if "scalar" in doc else None
    vector = _parse_grid_spec(doc["vector"], "vector") if "vector" in doc else None
    particles = None
    if "particles" in doc:
        try:
            counts = tuple(int(n) for n in doc["particles"]["counts"])
            pattern = str(doc["particles"]["pattern"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DatasetError(f"bad particles declaration in manifest: {exc}") from exc
        if len(counts) != frame_count:
            raise DatasetError(
                f"particles counts has {len(counts)} entries for {frame_count} frames")
        if any(n < 0 for n in counts):
            raise DatasetError("particle counts must be nonnegative")
        if "%" not in pattern:
            raise DatasetError(f"particles pattern {pattern!r} has no frame placeholder")
        particles = ParticleSpec(counts=counts, pattern=pattern)

    if scalar is None and vector is None and particles is None:
        raise DatasetError("manifest declares no modality")

    manifest = DatasetManifest(name=name, frame_count=frame_count, root=root,
                               scalar=scalar, vector=vector, particles=particles)
    _check_files(manifest)
    return manifest


def _check_files(m: DatasetManifest) -> None:
    def expect(spec_name, fname, expected):
        p = m.root / fname
        if not p.exists():
            raise DatasetError(f"{spec_name}: file missing: {p}")
        size = p.stat().st_size
        if size != expected:
            raise DatasetError(f"{spec_name}: file {p} is {size} bytes, expected {expected}")

    for k in range(m.frame_count):
        if m.scalar:
            expect(f"scalar frame {k}", m.scalar.frame_name(k),
                   m.scalar.dims.node_count * 4)
        if m.vector:
            expect(f"vector frame {k}", m.vector.frame_name(k),
                   3 * m.vector.dims.node_count * 4)
        if m.particles:
            expect(f"particle frame {k}", m.particles.frame_name(k),
                   m.particles.counts[k] * 16)


def _frame_array(m: DatasetManifest, spec, k: int, what: str,
                 expected: int) -> np.ndarray:
    if spec is None:
        raise DatasetError(f"dataset has no {what} modality")
    if not 0 <= k < m.frame_count:
        raise IndexError(f"frame {k} out of range 0..{m.frame_count - 1}")
    # fromfile lands directly in the target buffer; no transient bytes copy,
    # which matters for 500^3 frames.
    values = np.fromfile(m.root / spec.frame_name(k), dtype="<f4")
    if values.size != expected:
        raise DatasetError(
            f"{what} frame {k} file {m.root / spec.frame_name(k)} holds "
            f"{values.size} values, expected {expected}")
    return values


def _reject_nonfinite(values: np.ndarray, dims: GridDims, what: str) -> None:
    if values.size and not (np.isfinite(values.min()) and np.isfinite(values.max())):
        flat = int(np.argmin(np.isfinite(values)))
        i = flat % dims.nx
        j = (flat // dims.nx) % dims.ny
        k = flat // (dims.nx * dims.ny)
        raise DatasetError(
            f"{what} contains non-finite value {values[flat]!r} at node "
            f"({i}, {j}, {k}) (flat index {flat})")


def read_scalar_frame(m: DatasetManifest, k: int) -> ScalarField:
    if m.scalar is None:
        raise DatasetError("dataset has no scalar modality")
    values = _frame_array(m, m.scalar, k, "scalar", m.scalar.dims.node_count)
    _reject_nonfinite(values, m.scalar.dims, f"scalar frame {k}")
    return ScalarField(m.scalar.dims, values)


def read_vector_frame(m: DatasetManifest, k: int) -> VectorField:
    if m.vector is None:
        raise DatasetError("dataset has no vector modality")
    n = m.vector.dims.node_count
    values = _frame_array(m, m.vector, k, "vector", 3 * n)
    comps = []
    for c, cname in enumerate("xyz"):
        plane = values[c * n:(c + 1) * n]
        _reject_nonfinite(plane, m.vector.dims, f"vector frame {k} component v{cname}")
        comps.append(plane)
    return VectorField(m.vector.dims, *comps)


def read_particle_frame(m: DatasetManifest, k: int) -> ParticleFrame:
    if m.particles is None:
        raise DatasetError("dataset has no particles modality")
    rec = _frame_array(m, m.particles, k, "particles",
                       4 * m.particles.counts[k]).reshape(-1, 4)
    try:
        return ParticleFrame(rec[:, :3].copy(), rec[:, 3].copy())
    except ValueError as exc:
        raise DatasetError(f"particle frame {k}: {exc}") from exc


def write_scalar_frame(field: ScalarField) -> bytes:
    return field.values.astype("<f4").tobytes()


def write_vector_frame(field: VectorField) -> bytes:
    return b"".join(c.astype("<f4").tobytes() for c in (field.vx, field.vy, field.vz))


def write_particle_frame(frame: ParticleFrame) -> bytes:
    rec = np.concatenate([frame.positions, frame.scalar[:, None]], axis=1)
    return rec.astype("<f4").tobytes()


# ---------------------------------------------------------------------------
# OBJ


def write_obj(payload) -> bytes:
    """Serialize a TriangleMesh or a line set to OBJ text bytes.

    Meshes emit v/vt/vn records then f records with 1-based v/vt/vn index
    triples; line sets (any iterable of (n, >=3) point arrays) emit v then
    l records.  Formatting is fixed 6-decimal, so identical geometry gives
    identical bytes.
    """
    out = ["# plasmaviz OBJ export"]
    if isinstance(payload, TriangleMesh):
        mesh = payload
        for x, y, z in mesh.vertices:
            out.append(f"v {x:.6f} {y:.6f} {z:.6f}")
        for u, v in mesh.uvs:
            out.append(f"vt {u:.6f} {v:.6f}")
        for x, y, z in mesh.normals:
            out.append(f"vn {x:.6f} {y:.6f} {z:.6f}")
        for a, b, c in mesh.triangles + 1:
            out.append(f"f {a}/{a}/{a} {b}/{b}/{b} {c}/{c}/{c}")
    else:
        base = 1
        vlines, llines = [], []
        for line in payload:
            pts = np.asarray(line, dtype=np.float64)
            for x, y, z in pts[:, :3]:
                vlines.append(f"v {x:.6f} {y:.6f} {z:.6f}")
            llines.append("l " + " ".join(str(base + i) for i in range(len(pts))))
            base += len(pts)
        out += vlines + llines
    return ("\n".join(out) + "\n").encode("ascii")


def read_obj(data: bytes):
    """Parse OBJ bytes written by write_obj.

    Returns a TriangleMesh when f records are present, else a list of
    polyline arrays from l records.
    """
    verts, uvs, norms, faces, lines = [], [], [], [], []
    for rawline in data.decode("ascii").splitlines():
        parts = rawline.split()
        if not parts or parts[0] == "#":
            continue
        tag = parts[0]
        if tag == "v":
            verts.append([float(x) for x in parts[1:4]])
        elif tag == "vt":
            uvs.append([float(x) for x in parts[1:3]])
        elif tag == "vn":
            norms.append([float(x) for x in parts[1:4]])
        elif tag == "f":
            idx = [int(p.split("/")[0]) - 1 for p in parts[1:]]
            if len(idx) != 3:
                raise DatasetError("only triangular faces are supported")
            faces.append(idx)
        elif tag == "l":
            lines.append([int(p) - 1 for p in parts[1:]])
    if faces or not lines:
        n = len(verts)
        mesh = TriangleMesh(
            vertices=np.array(verts, dtype=np.float64).reshape(n, 3),
            normals=(np.array(norms, dtype=np.float64).reshape(n, 3)
                     if len(norms) == n else np.tile([0.0, 0.0, 1.0], (n, 1))),
            uvs=(np.array(uvs, dtype=np.float64).reshape(n, 2)
                 if len(uvs) == n else np.zeros((n, 2))),
            triangles=np.array(faces, dtype=np.int64).reshape(-1, 3),
        )
        return mesh
    pts = np.array(verts, dtype=np.float64)
    return [pts[idx] for idx in lines]


# ---------------------------------------------------------------------------
# PNG (RGB8, no filtering; deterministic bytes for identical images)


def write_png(image: np.ndarray) -> bytes:
    image = np.asarray(image, dtype=np.uint8)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError("expected an (h, w, 3) uint8 RGB image")
    h, w = image.shape[:2]

    def chunk(tag: bytes, payload: bytes) -> bytes:
        return (struct.pack(">I", len(payload)) + tag + payload
                + struct.pack(">I", zlib.crc32(tag + payload) & 0xFFFFFFFF))

    ihdr = struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0)
    raw = b"".join(b"\x00" + image[r].tobytes() for r in range(h))
    return (b"\x89PNG\r\n\x1a\n"
            + chunk(b"IHDR", ihdr)
            + chunk(b"IDAT", zlib.compress(raw, 6))
            + chunk(b"IEND", b""))


# ---------------------------------------------------------------------------
# Particle texture blob: header (R, occupancy) + 4 channel planes


def pack_texture(tex: ParticleTexture) -> bytes:
    planes = tex.texels.reshape(-1, 4).T  # (4, R*R): x, y, z, scalar planes
    return (struct.pack("<II", tex.resolution, tex.occupancy)
            + np.ascontiguousarray(planes).astype("<f4").tobytes())


def unpack_texture(data: bytes) -> ParticleTexture:
    if len(data) < 8:
        raise DatasetError("texture blob shorter than its header")
    r, occupancy = struct.unpack_from("<II", data)
    expected = 8 + r * r * 4 * 4
    if len(data) != expected:
        raise DatasetError(f"texture blob is {len(data)} bytes, expected {expected}")
    planes = np.frombuffer(data, dtype="<f4", offset=8).reshape(4, r * r)
    texels = np.ascontiguousarray(planes.T.reshape(r, r, 4))
    return ParticleTexture(resolution=r, occupancy=occupancy, texels=texels)


# ---------------------------------------------------------------------------
# Service payload framings (little-endian, length-prefixed)


def pack_mesh(mesh: TriangleMesh) -> bytes:
    head = MESH_MAGIC + struct.pack("<II", mesh.vertex_count, mesh.triangle_count)
    return (head
            + mesh.vertices.astype("<f4").tobytes()
            + mesh.normals.astype("<f4").tobytes()
            + mesh.uvs.astype("<f4").tobytes()
            + mesh.triangles.astype("<u4").tobytes())


def unpack_mesh(data: bytes) -> TriangleMesh:
    if data[:4] != MESH_MAGIC:
        raise DatasetError("not a mesh payload")
    nv, nt = struct.unpack_from("<II", data, 4)
    off = 12

    def take(count, dtype, shape):
        nonlocal off
        arr = np.frombuffer(data, dtype=dtype, count=count, offset=off).reshape(shape)
        off += arr.nbytes
        return arr

    verts = take(nv * 3, "<f4", (nv, 3)).astype(np.float64)
    norms = take(nv * 3, "<f4", (nv, 3)).astype(np.float64)
    uvs = take(nv * 2, "<f4", (nv, 2)).astype(np.float64)
    tris = take(nt * 3, "<u4", (nt, 3)).astype(np.int64)
    return TriangleMesh(verts, norms, uvs, tris)


def pack_streamlines(lines: list[Streamline]) -> bytes:
    parts = [LINES_MAGIC, struct.pack("<I", len(lines))]
    for sl in lines:
        parts.append(struct.pack("<I", len(sl.points)))
        parts.append(sl.points.astype("<f4").tobytes())
    return b"".join(parts)


def unpack_streamlines(data: bytes) -> list[np.ndarray]:
    """Decode to raw (n, 4) float arrays; termination reasons do not travel."""
    if data[:4] != LINES_MAGIC:
        raise DatasetError("not a streamline payload")
    (count,) = struct.unpack_from("<I", data, 4)
    off = 8
    out = []
    for _ in range(count):
        (n,) = struct.unpack_from("<I", data, off)
        off += 4
        pts = np.frombuffer(data, dtype="<f4", count=n * 4, offset=off).reshape(n, 4)
        off += pts.nbytes
        out.append(pts.astype(np.float64))
    return out
