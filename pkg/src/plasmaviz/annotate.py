"""Grouped, colored 3D stroke annotations with frame-interval visibility.

Annotations live in dataset world coordinates and are visible on every
frame of their closed [frame_start, frame_end] interval.  The store is
single-writer / multi-reader: mutations serialize on a lock and bump a
revision counter, reads work on consistent snapshots.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, replace

import numpy as np


class AnnotationNotFound(KeyError):
    pass


@dataclass(frozen=True)
class Annotation:
    id: int
    group: str
    color: tuple[int, int, int]
    frame_start: int
    frame_end: int
    strokes: tuple[tuple[tuple[float, float, float], ...], ...]

    def validate(self, frame_count: int) -> None:
        if not 0 <= self.frame_start <= self.frame_end < frame_count:
            raise ValueError(
                f"frame interval [{self.frame_start}, {self.frame_end}] invalid "
                f"for {frame_count} frames")
        if len(self.color) != 3 or any(not 0 <= c <= 255 for c in self.color):
            raise ValueError(f"bad color {self.color}")
        if not self.strokes:
            raise ValueError("annotation needs at least one stroke")
        for s in self.strokes:
            if len(s) < 2:
                raise ValueError("each stroke needs at least 2 points")
            for p in s:
                if len(p) != 3 or not all(np.isfinite(c) for c in p):
                    raise ValueError(f"bad stroke point {p}")


def _freeze_strokes(strokes) -> tuple:
    return tuple(tuple((float(x), float(y), float(z)) for x, y, z in s) for s in strokes)


class AnnotationStore:
    """CRUD over annotations keyed by id, with JSON persistence."""

    _PATCHABLE = ("group", "color", "frame_start", "frame_end", "strokes")

    def __init__(self, frame_count: int):
        if frame_count < 1:
            raise ValueError("frame_count must be >= 1")
        self.frame_count = frame_count
        self.revision = 0
        self._items: dict[int, Annotation] = {}
        self._next_id = 1
        self._lock = threading.RLock()

    def create(self, *, group: str, color, frame_start: int, frame_end: int,
               strokes) -> Annotation:
        with self._lock:
            ann = Annotation(
                id=self._next_id,
                group=str(group),
                color=tuple(int(c) for c in color),
                frame_start=int(frame_start),
                frame_end=int(frame_end),
                strokes=_freeze_strokes(strokes),
            )
            ann.validate(self.frame_count)
            self._next_id += 1
            self._items[ann.id] = ann
            self.revision += 1
            return ann

    def update(self, ann_id: int, patch: dict) -> int:
        with self._lock:
            if ann_id not in self._items:
                raise AnnotationNotFound(ann_id)
            unknown = set(patch) - set(self._PATCHABLE)
            if unknown:
                raise ValueError(f"unknown annotation fields {sorted(unknown)}")
            kwargs = dict(patch)
            if "color" in kwargs:
                kwargs["color"] = tuple(int(c) for c in kwargs["color"])
            if "strokes" in kwargs:
                kwargs["strokes"] = _freeze_strokes(kwargs["strokes"])
            for k in ("frame_start", "frame_end"):
                if k in kwargs:
                    kwargs[k] = int(kwargs[k])
            updated = replace(self._items[ann_id], **kwargs)
            updated.validate(self.frame_count)
            self._items[ann_id] = updated
            self.revision += 1
            return self.revision

    def delete(self, ann_id: int) -> int:
        with self._lock:
            if ann_id not in self._items:
                raise AnnotationNotFound(ann_id)
            del self._items[ann_id]
            self.revision += 1
            return self.revision

    def get(self, ann_id: int) -> Annotation:
        with self._lock:
            if ann_id not in self._items:
                raise AnnotationNotFound(ann_id)
            return self._items[ann_id]

    def list(self, group: str | None = None) -> list[Annotation]:
        with self._lock:
            items = sorted(self._items.values(), key=lambda a: a.id)
        if group is None:
            return items
        return [a for a in items if a.group == group]

    def visible_at(self, frame: int) -> list[Annotation]:
        """Annotations whose closed interval contains the frame."""
        if not 0 <= frame < self.frame_count:
            raise IndexError(f"frame {frame} out of range 0..{self.frame_count - 1}")
        with self._lock:
            items = sorted(self._items.values(), key=lambda a: a.id)
        return [a for a in items if a.frame_start <= frame <= a.frame_end]

    # -- persistence: one JSON document per dataset session

    def to_json(self) -> str:
        with self._lock:
            doc = {
                "revision": self.revision,
                "annotations": [
                    {
                        "id": a.id,
                        "group": a.group,
                        "color": list(a.color),
                        "frame_start": a.frame_start,
                        "frame_end": a.frame_end,
                        "strokes": [[list(p) for p in s] for s in a.strokes],
                    }
                    for a in sorted(self._items.values(), key=lambda x: x.id)
                ],
            }
        return json.dumps(doc, indent=1)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path, frame_count: int) -> "AnnotationStore":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        store = cls(frame_count)
        for rec in doc["annotations"]:
            ann = Annotation(
                id=int(rec["id"]),
                group=rec["group"],
                color=tuple(int(c) for c in rec["color"]),
                frame_start=int(rec["frame_start"]),
                frame_end=int(rec["frame_end"]),
                strokes=_freeze_strokes(rec["strokes"]),
            )
            ann.validate(frame_count)
            store._items[ann.id] = ann
            store._next_id = max(store._next_id, ann.id + 1)
        store.revision = int(doc["revision"])
        return store
