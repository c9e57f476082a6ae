"""Quadric-error mesh simplification by greedy edge collapse.

Each vertex accumulates a 4x4 quadric summing squared distances to the
planes of its incident faces; collapsing an edge merges the endpoint
quadrics and places the merged vertex at the minimizer of the combined
error.  Collapses are applied cheapest-first through a lazy-invalidation
heap: entries carry version stamps and stale ones are skipped at pop time
instead of being removed.

Boundary edges get an extra high-weight constraint plane perpendicular to
their face so open borders do not erode.  Collapses that would flip a
surviving face normal past 90 degrees, or that touch a non-manifold edge,
are skipped.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .isosurface import TriangleMesh, _area_weighted_vertex_normals

BOUNDARY_WEIGHT = 1e3
DEFAULT_TARGET_RATIO = 0.25
_DET_EPS = 1e-10


@dataclass
class CollapseCandidate:
    """A scored edge collapse: contract edge onto the optimal position."""

    edge: tuple[int, int]
    cost: float
    position: np.ndarray

    def __post_init__(self):
        u, v = self.edge
        if u == v:
            raise ValueError("collapse edge endpoints must be distinct")
        if self.cost < -1e-12:
            raise ValueError(f"collapse cost must be nonnegative, got {self.cost}")


def _plane_quadric(normal, point) -> np.ndarray:
    d = -float(normal @ point)
    p = np.array([normal[0], normal[1], normal[2], d])
    return np.outer(p, p)


def build_quadrics(mesh: TriangleMesh) -> np.ndarray:
    """Per-vertex quadrics: sum of unit-normalized incident face planes.

    Zero-area faces contribute nothing.  Returns an (n, 4, 4) array.
    """
    n = mesh.vertex_count
    quadrics = np.zeros((n, 4, 4))
    if mesh.triangle_count == 0:
        return quadrics
    v = mesh.vertices
    t = mesh.triangles
    fn = np.cross(v[t[:, 1]] - v[t[:, 0]], v[t[:, 2]] - v[t[:, 0]])
    mag = np.linalg.norm(fn, axis=1)
    ok = mag > 1e-14
    unit = np.zeros_like(fn)
    unit[ok] = fn[ok] / mag[ok, None]
    d = -(unit * v[t[:, 0]]).sum(axis=1)
    p = np.concatenate([unit, d[:, None]], axis=1)
    p[~ok] = 0.0
    k = p[:, :, None] * p[:, None, :]
    for c in range(3):
        np.add.at(quadrics, t[:, c], k)
    return quadrics


def quadric_error(q: np.ndarray, position) -> float:
    h = np.array([position[0], position[1], position[2], 1.0])
    return float(h @ q @ h)


def collapse_cost(q1: np.ndarray, q2: np.ndarray, v1, v2,
                  edge: tuple[int, int] = (0, 1)) -> CollapseCandidate:
    """Score collapsing the edge (v1, v2) under the combined quadric.

    Solves the 3x3 normal system for the optimal position when it is well
    conditioned (scaled determinant above 1e-10); otherwise picks the best
    of the two endpoints and their midpoint.
    """
    q = q1 + q2
    a = q[:3, :3]
    b = -q[:3, 3]
    v1 = np.asarray(v1, dtype=np.float64)
    v2 = np.asarray(v2, dtype=np.float64)
    scale = float(np.abs(a).max())
    position = None
    if scale > 0.0:
        if abs(np.linalg.det(a / scale)) > _DET_EPS:
            position = np.linalg.solve(a, b)
    if position is None:
        options = (v1, v2, 0.5 * (v1 + v2))
        errors = [quadric_error(q, o) for o in options]
        position = options[int(np.argmin(errors))]
    cost = max(quadric_error(q, position), 0.0)
    return CollapseCandidate(edge=edge, cost=cost, position=position)


def _boundary_quadrics(mesh: TriangleMesh, weight: float) -> np.ndarray:
    """Constraint quadrics for boundary edges: a plane through the edge,
    perpendicular to the single incident face, scaled by `weight`."""
    n = mesh.vertex_count
    out = np.zeros((n, 4, 4))
    t = mesh.triangles
    if not len(t):
        return out
    v = mesh.vertices
    edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    face_of = np.tile(np.arange(len(t)), 3)
    key = np.sort(edges, axis=1)
    order = np.lexsort((key[:, 1], key[:, 0]))
    key = key[order]
    edges = edges[order]
    face_of = face_of[order]
    uniq, start, counts = np.unique(key, axis=0, return_index=True, return_counts=True)
    boundary = counts == 1
    for (u, w), s in zip(uniq[boundary], start[boundary]):
        f = t[face_of[s]]
        fn = np.cross(v[f[1]] - v[f[0]], v[f[2]] - v[f[0]])
        mag = np.linalg.norm(fn)
        if mag < 1e-14:
            continue
        edge_dir = v[w] - v[u]
        cn = np.cross(edge_dir, fn / mag)
        cmag = np.linalg.norm(cn)
        if cmag < 1e-14:
            continue
        kq = weight * _plane_quadric(cn / cmag, v[u])
        out[u] += kq
        out[w] += kq
    return out


class DecimationState:
    """Mutable collapse machinery; drive it yourself or via decimate_qem."""

    def __init__(self, mesh: TriangleMesh, boundary_weight: float = BOUNDARY_WEIGHT):
        mesh.validate()
        self.positions = mesh.vertices.copy()
        self.quadrics = build_quadrics(mesh) + _boundary_quadrics(mesh, boundary_weight)
        self.faces = mesh.triangles.copy()
        self.face_alive = np.ones(len(self.faces), dtype=bool)
        self.triangle_count = len(self.faces)
        self.vertex_alive = np.ones(len(self.positions), dtype=bool)
        self.version = np.zeros(len(self.positions), dtype=np.int64)
        self.vertex_faces = [set() for _ in range(len(self.positions))]
        for f, tri in enumerate(self.faces):
            for vi in tri:
                self.vertex_faces[vi].add(f)
        self._heap: list = []
        self._deferred: list = []
        self._seq = 0
        for u, w in self._all_edges():
            self._push(u, w)

    def _all_edges(self):
        edges = set()
        for tri in self.faces:
            a, b, c = int(tri[0]), int(tri[1]), int(tri[2])
            edges.add((min(a, b), max(a, b)))
            edges.add((min(b, c), max(b, c)))
            edges.add((min(a, c), max(a, c)))
        return sorted(edges)

    def _push(self, u, w):
        u, w = (u, w) if u < w else (w, u)
        cand = collapse_cost(self.quadrics[u], self.quadrics[w],
                             self.positions[u], self.positions[w], edge=(u, w))
        self._seq += 1
        heapq.heappush(self._heap, (cand.cost, u, w, int(self.version[u]),
                                    int(self.version[w]), self._seq, cand.position))

    def _shared_faces(self, u, w):
        return self.vertex_faces[u] & self.vertex_faces[w]

    def pop_valid(self):
        """Next applicable candidate, skipping stale/illegal entries.

        Flip-rejected entries are deferred rather than dropped: a later
        collapse can change the neighborhood that blocked them, so they are
        re-queued after every applied collapse.  Returns (u, w, cost,
        position) or None when no legal collapse is left.
        """
        while self._heap:
            entry = heapq.heappop(self._heap)
            cost, u, w, ver_u, ver_w, _, position = entry
            if not (self.vertex_alive[u] and self.vertex_alive[w]):
                continue
            if ver_u != self.version[u] or ver_w != self.version[w]:
                continue
            shared = self._shared_faces(u, w)
            if not shared:
                continue  # edge no longer exists
            if len(shared) > 2 or self._would_flip(u, w, position):
                self._deferred.append(entry)
                continue
            return u, w, cost, position
        return None

    def _would_flip(self, u, w, position):
        dying = self._shared_faces(u, w)
        v = self.positions
        for f in (self.vertex_faces[u] | self.vertex_faces[w]) - dying:
            tri = self.faces[f]
            old = np.cross(v[tri[1]] - v[tri[0]], v[tri[2]] - v[tri[0]])
            corners = [position if x in (u, w) else v[x] for x in tri]
            new = np.cross(corners[1] - corners[0], corners[2] - corners[0])
            if old @ new < 0 or np.linalg.norm(new) < 1e-14:
                return True
        return False

    def apply(self, u, w, position):
        """Collapse w into u at the given position and refresh candidates."""
        dying = self._shared_faces(u, w)
        for f in dying:
            self.face_alive[f] = False
            for vi in self.faces[f]:
                self.vertex_faces[vi].discard(f)
        self.triangle_count -= len(dying)

        for f in list(self.vertex_faces[w]):
            tri = self.faces[f]
            self.faces[f] = np.where(tri == w, u, tri)
            self.vertex_faces[w].discard(f)
            self.vertex_faces[u].add(f)

        self.positions[u] = position
        self.quadrics[u] = self.quadrics[u] + self.quadrics[w]
        self.vertex_alive[w] = False
        self.version[u] += 1
        self.version[w] += 1

        neighbors = set()
        for f in self.vertex_faces[u]:
            neighbors.update(int(x) for x in self.faces[f])
        neighbors.discard(u)
        for nb in sorted(neighbors):
            self._push(u, nb)

        # The applied collapse may have unblocked previously rejected edges.
        for entry in self._deferred:
            heapq.heappush(self._heap, entry)
        self._deferred.clear()

    def valid_candidates(self):
        """Current legal collapses, rescored; for audits and tests."""
        out = []
        for u, w in self._all_live_edges():
            shared = self._shared_faces(u, w)
            if not shared or len(shared) > 2:
                continue
            cand = collapse_cost(self.quadrics[u], self.quadrics[w],
                                 self.positions[u], self.positions[w])
            if self._would_flip(u, w, cand.position):
                continue
            out.append((cand.cost, u, w))
        return sorted(out)

    def _all_live_edges(self):
        edges = set()
        for f in np.nonzero(self.face_alive)[0]:
            a, b, c = (int(x) for x in self.faces[f])
            edges.add((min(a, b), max(a, b)))
            edges.add((min(b, c), max(b, c)))
            edges.add((min(a, c), max(a, c)))
        return sorted(edges)

    def to_mesh(self) -> TriangleMesh:
        live = self.faces[self.face_alive]
        used = np.zeros(len(self.positions), dtype=bool)
        used[live.ravel()] = True
        remap = np.cumsum(used) - 1
        verts = self.positions[used]
        tris = remap[live]
        mesh = TriangleMesh(
            vertices=verts,
            normals=np.tile([0.0, 0.0, 1.0], (len(verts), 1)),
            uvs=np.zeros((len(verts), 2)),
            triangles=tris,
        )
        if mesh.triangle_count:
            acc = _area_weighted_vertex_normals(mesh)
            mag = np.linalg.norm(acc, axis=1)
            ok = mag > 1e-20
            mesh.normals[ok] = acc[ok] / mag[ok, None]
        return mesh


def decimate_qem(mesh: TriangleMesh, target_ratio: float = DEFAULT_TARGET_RATIO) -> TriangleMesh:
    """Greedily collapse cheapest edges until the triangle count is at most
    floor(target_ratio * original) or no legal collapse remains."""
    if not 0.0 < target_ratio <= 1.0:
        raise ValueError(f"target_ratio must be in (0, 1], got {target_ratio}")
    target = math.floor(target_ratio * mesh.triangle_count)
    if mesh.triangle_count <= target:
        return TriangleMesh(mesh.vertices.copy(), mesh.normals.copy(),
                            mesh.uvs.copy(), mesh.triangles.copy())
    state = DecimationState(mesh)
    while state.triangle_count > target:
        nxt = state.pop_valid()
        if nxt is None:
            break
        u, w, _, position = nxt
        state.apply(u, w, position)
    return state.to_mesh()
