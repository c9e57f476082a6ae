"""HTTP facade over ExplorerSession.

JSON for metadata and annotations, documented little-endian binary
framings for meshes/streamlines/particle textures, PNG for heatmaps.
Binary responses carry an ``X-Cache: hit|miss`` header so clients can
observe the caching contract without the payload bytes changing.

Error responses are ``{"error": {"code": ..., "message": ...}}`` with
machine-readable codes: invalid_argument, out_of_range, capacity_exceeded,
not_found, data_error, no_dataset.
"""

from __future__ import annotations

import asyncio
import json
import os
from pathlib import Path

from fastapi import FastAPI, Response
from fastapi.responses import JSONResponse, StreamingResponse
from pydantic import BaseModel

from .annotate import AnnotationNotFound
from .io_formats import DatasetError
from .particles import CapacityError
from .session import ExplorerSession, NoDatasetError

DATASET_ROOT_ENV = "PLASMAVIZ_ROOT"


class LoadRequest(BaseModel):
    path: str
    policy: str = "lazy"
    norm: str = "frame"


class PlaybackRequest(BaseModel):
    command: str
    frame: int | None = None
    fps: float | None = None


class AnnotationIn(BaseModel):
    group: str
    color: tuple[int, int, int]
    frame_start: int
    frame_end: int
    strokes: list[list[tuple[float, float, float]]]


class AnnotationPatch(BaseModel):
    group: str | None = None
    color: tuple[int, int, int] | None = None
    frame_start: int | None = None
    frame_end: int | None = None
    strokes: list[list[tuple[float, float, float]]] | None = None


def _annotation_json(ann) -> dict:
    return {
        "id": ann.id,
        "group": ann.group,
        "color": list(ann.color),
        "frame_start": ann.frame_start,
        "frame_end": ann.frame_end,
        "strokes": [[list(p) for p in s] for s in ann.strokes],
    }


def resolve_dataset_path(path: str) -> Path:
    p = Path(path)
    root = os.environ.get(DATASET_ROOT_ENV)
    if not p.is_absolute() and root:
        return Path(root) / p
    return p


def create_app(session: ExplorerSession | None = None) -> FastAPI:
    app = FastAPI(title="plasmaviz explorer", docs_url=None, redoc_url=None)
    # the viewer may be served from a dev server on another port
    from fastapi.middleware.cors import CORSMiddleware

    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"],
                       expose_headers=["X-Cache", "X-Vmin", "X-Vmax"])
    state = {"session": session}

    def current() -> ExplorerSession:
        if state["session"] is None:
            raise NoDatasetError("no dataset loaded; POST /session/load first")
        return state["session"]

    def error_handler(code: str, status: int):
        def handle(request, exc):
            return JSONResponse(status_code=status,
                                content={"error": {"code": code, "message": str(exc)}})
        return handle

    app.add_exception_handler(NoDatasetError, error_handler("no_dataset", 409))
    app.add_exception_handler(DatasetError, error_handler("data_error", 400))
    app.add_exception_handler(CapacityError, error_handler("capacity_exceeded", 400))
    app.add_exception_handler(AnnotationNotFound, error_handler("not_found", 404))
    app.add_exception_handler(IndexError, error_handler("out_of_range", 400))
    app.add_exception_handler(KeyError, error_handler("invalid_argument", 400))
    app.add_exception_handler(ValueError, error_handler("invalid_argument", 400))

    def binary(payload: bytes, cached: bool, media="application/octet-stream") -> Response:
        return Response(content=payload, media_type=media,
                        headers={"X-Cache": "hit" if cached else "miss"})

    @app.get("/session")
    def session_summary():
        return current().summary()

    @app.post("/session/load")
    def session_load(req: LoadRequest):
        state["session"] = ExplorerSession(resolve_dataset_path(req.path),
                                           policy=req.policy, norm_scope=req.norm)
        return state["session"].summary()

    @app.get("/frames/{k}/mesh")
    def frame_mesh(k: int, iso: float, ratio: float | None = None, workers: int = 1):
        payload, cached = current().mesh_payload(k, iso, ratio, workers=workers)
        return binary(payload, cached)

    @app.get("/frames/{k}/streamlines")
    def frame_streamlines(k: int, stride: int = 4, h: float | None = None,
                          max_steps: int = 2000, direction: str = "both"):
        payload, cached = current().streamline_payload(
            k, stride=stride, h=h, max_steps=max_steps, direction=direction)
        return binary(payload, cached)

    @app.get("/frames/{k}/particles")
    def frame_particles(k: int, fraction: float = 1.0, res: int = 512, seed: int = 0):
        payload, cached = current().particles_payload(k, fraction, res, seed)
        return binary(payload, cached)

    @app.get("/frames/{k}/slice/{axis}/{index}")
    def frame_slice(k: int, axis: str, index: int):
        sess = current()
        payload, cached = sess.slice_payload(k, axis.lower(), index)
        vmin, vmax = sess.heatmap_range(k)
        resp = binary(payload, cached, media="image/png")
        resp.headers["X-Vmin"] = repr(vmin)
        resp.headers["X-Vmax"] = repr(vmax)
        return resp

    @app.get("/annotations")
    def annotations_list(group: str | None = None):
        return [_annotation_json(a) for a in current().annotations.list(group)]

    @app.get("/annotations/visible")
    def annotations_visible(frame: int):
        return [_annotation_json(a) for a in current().annotations.visible_at(frame)]

    @app.get("/annotations/{ann_id}")
    def annotation_get(ann_id: int):
        return _annotation_json(current().annotations.get(ann_id))

    @app.post("/annotations", status_code=201)
    def annotation_create(body: AnnotationIn):
        ann = current().annotation_create(
            group=body.group, color=body.color, frame_start=body.frame_start,
            frame_end=body.frame_end, strokes=body.strokes)
        return _annotation_json(ann)

    @app.patch("/annotations/{ann_id}")
    def annotation_update(ann_id: int, body: AnnotationPatch):
        patch = {k: v for k, v in body.model_dump().items() if v is not None}
        revision = current().annotation_update(ann_id, patch)
        return {"revision": revision, "annotation": _annotation_json(
            current().annotations.get(ann_id))}

    @app.delete("/annotations/{ann_id}")
    def annotation_delete(ann_id: int):
        revision = current().annotation_delete(ann_id)
        return {"revision": revision}

    @app.get("/playback")
    def playback_state():
        return current().playback.state()

    @app.post("/playback")
    def playback_command(req: PlaybackRequest):
        return current().playback_control(req.command, frame=req.frame, fps=req.fps)

    @app.get("/playback/events")
    async def playback_events(limit: int | None = None):
        """Server-sent playback ticks; the viewer mirrors whatever frame
        the server reports."""
        sess = current()

        async def gen():
            sent = 0
            while limit is None or sent < limit:
                st = sess.playback.state()
                yield f"data: {json.dumps(st)}\n\n"
                sent += 1
                interval = 1.0 / st["fps"] if st["playing"] else 0.25
                await asyncio.sleep(min(interval, 1.0))

        return StreamingResponse(gen(), media_type="text/event-stream")

    return app


def run(session: ExplorerSession | None, host: str = "127.0.0.1", port: int = 8765):
    import uvicorn

    uvicorn.run(create_app(session), host=host, port=port, log_level="warning")
