"""Exploration session: loaded dataset, derived-payload caches, playback.

The session is the single source of truth the viewer talks to.  Raw frames
load lazily (or eagerly on request) and every derived artifact - meshes,
streamline sets, particle textures, slice heatmaps, frame extrema - is
cached under its full parameter key.  Identical concurrent requests share
one computation; mutations (load, playback commands, annotation writes)
serialize through a single writer lock.
"""

from __future__ import annotations

import threading
import time
from pathlib import Path

import numpy as np

from . import io_formats
from .annotate import AnnotationStore
from .decimate import decimate_qem
from .fields import FrameSeries, field_minmax
from .isosurface import flying_edges
from .particles import encode_texture, subsample
from .slicer import DEFAULT_GRADIENT, SlicePlaneState, extract_slice, render_heatmap
from .streamline import TraceConfig, seed_lattice, trace_batch

ANNOTATION_FILE = "annotations.json"
DEFAULT_FPS = 5.0


class NoDatasetError(Exception):
    """An operation needed a loaded dataset and none is present."""


def slice_png(field, axis: str, index: int, vmin: float, vmax: float,
              gradient=DEFAULT_GRADIENT) -> bytes:
    """Heatmap PNG for one plane; the CLI and service share these bytes."""
    values = extract_slice(field, SlicePlaneState(axis, index))
    hm = render_heatmap(values, gradient, vmin, vmax, axis=axis, index=index)
    return io_formats.write_png(hm.image)


class PlaybackClock:
    """Playback state machine over injectable monotonic time.

    While playing, the current frame advances at the configured rate and
    wraps at frame_count; pause freezes it, seek jumps while preserving the
    playing flag.  Frames are materialized from elapsed time on read, so
    the sequence between commands is nondecreasing modulo wraparound.
    """

    def __init__(self, frame_count: int, fps: float = DEFAULT_FPS, now=time.monotonic):
        self.frame_count = frame_count
        self.fps = float(fps)
        self._now = now
        self.playing = False
        self._anchor_frame = 0
        self._anchor_time = now()

    def current_frame(self) -> int:
        if not self.playing:
            return self._anchor_frame
        elapsed = self._now() - self._anchor_time
        steps = int(elapsed * self.fps)
        return (self._anchor_frame + steps) % self.frame_count

    def state(self) -> dict:
        return {
            "frame": self.current_frame(),
            "playing": self.playing,
            "fps": self.fps,
            "frame_count": self.frame_count,
        }

    def _rebase(self):
        self._anchor_frame = self.current_frame()
        self._anchor_time = self._now()

    def play(self) -> dict:
        if not self.playing:
            self._anchor_time = self._now()
            self.playing = True
        return self.state()

    def pause(self) -> dict:
        if self.playing:
            self._rebase()
            self.playing = False
        return self.state()

    def seek(self, frame: int) -> dict:
        if not 0 <= frame < self.frame_count:
            raise IndexError(f"seek target {frame} out of range 0..{self.frame_count - 1}")
        self._anchor_frame = int(frame)
        self._anchor_time = self._now()
        return self.state()

    def set_rate(self, fps: float) -> dict:
        if not fps > 0:
            raise ValueError(f"fps must be positive, got {fps}")
        self._rebase()
        self.fps = float(fps)
        return self.state()


class _SingleFlight:
    """Per-key computation dedup: identical in-flight requests share one run."""

    def __init__(self):
        self._lock = threading.Lock()
        self._inflight: dict = {}

    def get(self, key, cache: dict, compute):
        """Returns (value, was_cached)."""
        while True:
            with self._lock:
                if key in cache:
                    return cache[key], True
                event = self._inflight.get(key)
                if event is None:
                    event = threading.Event()
                    self._inflight[key] = event
                    break
            event.wait()
        try:
            value = compute()
            with self._lock:
                cache[key] = value
        finally:
            with self._lock:
                self._inflight.pop(key, None)
            event.set()
        return value, False


class ExplorerSession:
    """One loaded dataset plus everything derived from it."""

    def __init__(self, path, *, policy: str = "lazy", fps: float = DEFAULT_FPS,
                 now=time.monotonic, verify_cache: bool = False,
                 norm_scope: str = "frame"):
        if norm_scope not in ("frame", "global"):
            raise ValueError(f"norm_scope must be 'frame' or 'global', got {norm_scope!r}")
        self.norm_scope = norm_scope
        self.manifest = io_formats.read_manifest(path)
        m = self.manifest
        loaders = {}
        if m.scalar:
            loaders["scalar"] = lambda k: io_formats.read_scalar_frame(m, k)
        if m.vector:
            loaders["vector"] = lambda k: io_formats.read_vector_frame(m, k)
        if m.particles:
            loaders["particles"] = lambda k: io_formats.read_particle_frame(m, k)
        self.frames = FrameSeries(m.frame_count, loaders, policy=policy)
        self.playback = PlaybackClock(m.frame_count, fps=fps, now=now)
        self.verify_cache = verify_cache

        self._writer_lock = threading.RLock()
        self._flight = _SingleFlight()
        self._caches: dict[str, dict] = {
            "minmax": {}, "mesh": {}, "lines": {}, "particles": {}, "slice": {},
        }

        self._annotation_path = m.root / ANNOTATION_FILE
        if self._annotation_path.exists():
            self.annotations = AnnotationStore.load(self._annotation_path, m.frame_count)
        else:
            self.annotations = AnnotationStore(m.frame_count)

    # -- summary

    def summary(self) -> dict:
        m = self.manifest
        out = {
            "name": m.name,
            "frame_count": m.frame_count,
            "modalities": list(m.modalities),
            "normalization": self.norm_scope,
            "playback": self.playback.state(),
        }
        for mod in ("scalar", "vector"):
            spec = getattr(m, mod)
            if spec:
                d = spec.dims
                out[mod] = {
                    "dims": [d.nx, d.ny, d.nz],
                    "spacing": [d.dx, d.dy, d.dz],
                    "origin": list(d.origin),
                }
        if m.particles:
            out["particles"] = {"counts": list(m.particles.counts)}
        return out

    # -- derived payloads (cached, deduplicated, deterministic bytes)

    def _cached(self, cache_name: str, key, compute):
        value, cached = self._flight.get(key, self._caches[cache_name], compute)
        if cached and self.verify_cache:
            fresh = compute()
            if fresh != value:
                raise AssertionError(
                    f"cache verify failed for {cache_name} key {key!r}")
        return value, cached

    def frame_minmax(self, k: int) -> tuple[float, float]:
        value, _ = self._cached("minmax", k,
                                lambda: field_minmax(self.frames.get("scalar", k)))
        return value

    def dataset_minmax(self) -> tuple[float, float]:
        """Extrema over every scalar frame (for global normalization)."""

        def compute():
            pairs = [self.frame_minmax(k) for k in range(self.manifest.frame_count)]
            return min(p[0] for p in pairs), max(p[1] for p in pairs)

        value, _ = self._cached("minmax", "global", compute)
        return value

    def heatmap_range(self, k: int) -> tuple[float, float]:
        if self.norm_scope == "global":
            return self.dataset_minmax()
        return self.frame_minmax(k)

    def mesh_payload(self, k: int, isovalue: float, target_ratio: float | None = None,
                     workers: int = 1) -> tuple[bytes, bool]:
        if not np.isfinite(isovalue):
            raise ValueError("isovalue must be finite")
        if target_ratio is not None and not 0.0 < target_ratio <= 1.0:
            raise ValueError(f"target_ratio must be in (0, 1], got {target_ratio}")

        def compute():
            mesh = flying_edges(self.frames.get("scalar", k), isovalue, workers=workers)
            if target_ratio is not None and target_ratio < 1.0:
                mesh = decimate_qem(mesh, target_ratio)
            return io_formats.pack_mesh(mesh)

        return self._cached("mesh", (k, float(isovalue), target_ratio), compute)

    def streamline_payload(self, k: int, stride: int = 4, h: float | None = None,
                           max_steps: int = 2000, direction: str = "both") -> tuple[bytes, bool]:
        field = self.frames.get("vector", k)
        cfg = TraceConfig.for_dims(
            field.dims, max_steps=max_steps, direction=direction,
            **({"h": h} if h is not None else {}))
        if stride < 1:
            raise ValueError("stride must be >= 1")

        def compute():
            seeds = seed_lattice(field.dims, (stride, stride, stride))
            lines = trace_batch(field, seeds, cfg)
            return io_formats.pack_streamlines(lines)

        key = (k, stride, cfg.h, cfg.max_steps, cfg.direction)
        return self._cached("lines", key, compute)

    def particles_payload(self, k: int, fraction: float = 1.0, resolution: int = 512,
                          seed: int = 0) -> tuple[bytes, bool]:
        if not 0.0 <= fraction <= 1.0:
            raise ValueError(f"fraction must be in [0, 1], got {fraction}")

        def compute():
            frame = self.frames.get("particles", k)
            # per-frame rng stream so every timestep resamples independently
            thinned = subsample(frame, fraction, seed + k)
            return io_formats.pack_texture(encode_texture(thinned, resolution))

        return self._cached("particles", (k, float(fraction), resolution, seed), compute)

    def slice_payload(self, k: int, axis: str, index: int) -> tuple[bytes, bool]:
        def compute():
            field = self.frames.get("scalar", k)
            vmin, vmax = self.heatmap_range(k)
            return slice_png(field, axis, index, vmin, vmax)

        # validate before touching the cache so errors never get cached
        field = self.frames.get("scalar", k)
        SlicePlaneState(axis, index).validate_for(field)
        return self._cached("slice", (k, axis, index), compute)

    def precompute_meshes(self, isovalue: float, target_ratio: float | None = None,
                          workers: int = 1) -> int:
        """Eagerly derive the isosurface for every frame (import-then-swap)."""
        for k in range(self.manifest.frame_count):
            self.mesh_payload(k, isovalue, target_ratio, workers=workers)
        return self.manifest.frame_count

    # -- playback (single-writer)

    def playback_control(self, command: str, *, frame: int | None = None,
                         fps: float | None = None) -> dict:
        with self._writer_lock:
            if command == "play":
                return self.playback.play()
            if command == "pause":
                return self.playback.pause()
            if command == "seek":
                if frame is None:
                    raise ValueError("seek needs a frame")
                return self.playback.seek(frame)
            if command == "set_rate":
                if fps is None:
                    raise ValueError("set_rate needs fps")
                return self.playback.set_rate(fps)
            raise ValueError(f"unknown playback command {command!r}")

    # -- annotations (single-writer, flushed after each mutation)

    def annotation_create(self, **kwargs):
        with self._writer_lock:
            ann = self.annotations.create(**kwargs)
            self.annotations.save(self._annotation_path)
            return ann

    def annotation_update(self, ann_id: int, patch: dict) -> int:
        with self._writer_lock:
            rev = self.annotations.update(ann_id, patch)
            self.annotations.save(self._annotation_path)
            return rev

    def annotation_delete(self, ann_id: int) -> int:
        with self._writer_lock:
            rev = self.annotations.delete(ann_id)
            self.annotations.save(self._annotation_path)
            return rev
