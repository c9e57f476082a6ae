"""Batch front-end for the processing pipelines.

Every command is a thin wrapper over the library modules: outputs are
byte-identical to direct module calls.  Progress goes to stderr, data to
files; exit codes are 0 (success), 1 (user error), 2 (data error).
Failures print a single machine-parsable line: ``error: <code>: <message>``.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import io_formats
from .decimate import decimate_qem
from .fields import field_minmax
from .io_formats import DatasetError, read_manifest
from .isosurface import flying_edges
from .particles import encode_texture, subsample
from .service import DATASET_ROOT_ENV, resolve_dataset_path
from .session import ExplorerSession, slice_png
from .streamline import TraceConfig, seed_lattice, trace_batch

EXIT_OK = 0
EXIT_USER = 1
EXIT_DATA = 2


def _fail(code: str, message: str) -> None:
    line = str(message).replace("\n", " ")
    print(f"error: {code}: {line}", file=sys.stderr)


def _progress(message: str) -> None:
    print(message, file=sys.stderr)


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _parse_frames(spec: str | None, frame_count: int) -> range:
    if spec is None:
        return range(frame_count)
    text = spec.strip()
    if ".." in text:
        a_s, b_s = text.split("..", 1)
        a, b = int(a_s), int(b_s)
    else:
        a = b = int(text)
    if not (0 <= a <= b < frame_count):
        raise ValueError(f"frame range {text!r} outside 0..{frame_count - 1}")
    return range(a, b + 1)


def _run_frames(frames, jobs: int, work) -> None:
    if jobs <= 1:
        for k in frames:
            work(k)
        return
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        list(pool.map(work, frames))


def _dataset(args) -> io_formats.DatasetManifest:
    return read_manifest(resolve_dataset_path(args.dataset))


def cmd_validate(args) -> int:
    m = _dataset(args)
    print(f"name: {m.name}")
    print(f"frames: {m.frame_count}")
    print(f"modalities: {' '.join(m.modalities)}")
    for mod in ("scalar", "vector"):
        spec = getattr(m, mod)
        if spec:
            d = spec.dims
            print(f"{mod}: dims {d.nx}x{d.ny}x{d.nz} spacing "
                  f"({d.dx}, {d.dy}, {d.dz}) origin {d.origin}")
    if m.particles:
        print(f"particles: counts {list(m.particles.counts)}")
    return EXIT_OK


def cmd_iso(args) -> int:
    m = _dataset(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    frames = _parse_frames(args.frames, m.frame_count)

    def work(k: int) -> None:
        field = io_formats.read_scalar_frame(m, k)
        mesh = flying_edges(field, args.isovalue, uv_mode=args.uv_mode)
        if args.ratio is not None and args.ratio < 1.0:
            mesh = decimate_qem(mesh, args.ratio)
        path = out / f"iso_{k:04d}.obj"
        _atomic_write(path, io_formats.write_obj(mesh))
        _progress(f"wrote {path} ({mesh.triangle_count} triangles)")

    _run_frames(frames, args.jobs, work)
    return EXIT_OK


def cmd_decimate(args) -> int:
    mesh = io_formats.read_obj(Path(args.input).read_bytes())
    mesh.validate()
    dec = decimate_qem(mesh, args.ratio)
    path = Path(args.out)
    _atomic_write(path, io_formats.write_obj(dec))
    _progress(f"wrote {path} ({mesh.triangle_count} -> {dec.triangle_count} triangles)")
    return EXIT_OK


def cmd_streamlines(args) -> int:
    m = _dataset(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    frames = _parse_frames(args.frames, m.frame_count)

    def work(k: int) -> None:
        field = io_formats.read_vector_frame(m, k)
        cfg = TraceConfig.for_dims(
            field.dims, max_steps=args.max_steps, direction=args.direction,
            **({"h": args.step} if args.step is not None else {}))
        seeds = seed_lattice(field.dims, (args.stride, args.stride, args.stride))
        lines = trace_batch(field, seeds, cfg)
        path = out / f"streamlines_{k:04d}.obj"
        _atomic_write(path, io_formats.write_obj([sl.positions for sl in lines]))
        _progress(f"wrote {path} ({len(lines)} lines)")

    _run_frames(frames, args.jobs, work)
    return EXIT_OK


def cmd_particles(args) -> int:
    m = _dataset(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    frames = _parse_frames(args.frames, m.frame_count)

    def work(k: int) -> None:
        frame = io_formats.read_particle_frame(m, k)
        thinned = subsample(frame, args.fraction, args.seed + k)
        tex = encode_texture(thinned, args.res)
        path = out / f"particles_{k:04d}.ptex"
        _atomic_write(path, io_formats.pack_texture(tex))
        _progress(f"wrote {path} (occupancy {tex.occupancy})")

    _run_frames(frames, args.jobs, work)
    return EXIT_OK


def cmd_slice(args) -> int:
    m = _dataset(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = args.frames if args.frames is not None else (
        str(args.frame) if args.frame is not None else None)
    frames = _parse_frames(spec, m.frame_count)
    axis = args.axis.lower()

    global_range = None
    if args.norm == "global":
        pairs = [field_minmax(io_formats.read_scalar_frame(m, k))
                 for k in range(m.frame_count)]
        global_range = (min(p[0] for p in pairs), max(p[1] for p in pairs))

    def work(k: int) -> None:
        field = io_formats.read_scalar_frame(m, k)
        vmin, vmax = global_range or field_minmax(field)
        png = slice_png(field, axis, args.index, vmin, vmax)
        path = out / f"slice_{axis}{args.index:03d}_{k:04d}.png"
        _atomic_write(path, png)
        _progress(f"wrote {path}")

    _run_frames(frames, args.jobs, work)
    return EXIT_OK


def cmd_serve(args) -> int:
    from . import service

    session = ExplorerSession(resolve_dataset_path(args.dataset), policy=args.policy,
                              fps=args.fps, norm_scope=args.norm)
    if args.precompute_iso is not None:
        _progress(f"precomputing isosurfaces at {args.precompute_iso} ...")
        session.precompute_meshes(args.precompute_iso, args.ratio)
    _progress(f"serving {args.dataset} on {args.host}:{args.port}")
    service.run(session, host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="plasmaviz",
        description="Process and explore time-varying plasma simulation datasets.",
        epilog=f"Relative dataset paths resolve against ${DATASET_ROOT_ENV} when set.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(fn=fn)
        return sp

    sp = add("validate", cmd_validate, "check a dataset layout and print a summary")
    sp.add_argument("dataset")

    sp = add("iso", cmd_iso, "extract per-frame isosurfaces to OBJ")
    sp.add_argument("dataset")
    sp.add_argument("--isovalue", type=float, required=True)
    sp.add_argument("--ratio", type=float, default=None,
                    help="decimation target ratio in (0, 1]; omit to skip decimation")
    sp.add_argument("--uv-mode", choices=("zero", "planar_xy"), default="zero")
    sp.add_argument("--frames", help="inclusive range a..b or single index (default: all)")
    sp.add_argument("--out", default=".")
    sp.add_argument("--jobs", type=int, default=1)

    sp = add("decimate", cmd_decimate, "simplify an OBJ mesh with quadric error metrics")
    sp.add_argument("input")
    sp.add_argument("--ratio", type=float, required=True)
    sp.add_argument("--out", required=True)

    sp = add("streamlines", cmd_streamlines, "trace field lines to OBJ line sets")
    sp.add_argument("dataset")
    sp.add_argument("--stride", type=int, default=4)
    sp.add_argument("--step", type=float, default=None, help="arc-length step h")
    sp.add_argument("--max-steps", type=int, default=2000)
    sp.add_argument("--direction", choices=("forward", "backward", "both"), default="both")
    sp.add_argument("--frames")
    sp.add_argument("--out", default=".")
    sp.add_argument("--jobs", type=int, default=1)

    sp = add("particles", cmd_particles, "subsample and encode particle textures")
    sp.add_argument("dataset")
    sp.add_argument("--fraction", type=float, default=1.0)
    sp.add_argument("--res", type=int, default=512)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--frames")
    sp.add_argument("--out", default=".")
    sp.add_argument("--jobs", type=int, default=1)

    sp = add("slice", cmd_slice, "render slice heatmaps to PNG")
    sp.add_argument("dataset")
    sp.add_argument("--axis", choices=("x", "y", "z", "X", "Y", "Z"), required=True)
    sp.add_argument("--index", type=int, required=True)
    sp.add_argument("--frame", type=int, default=None)
    sp.add_argument("--frames")
    sp.add_argument("--norm", choices=("frame", "global"), default="frame",
                    help="normalize against frame extrema or whole-dataset extrema")
    sp.add_argument("--out", default=".")
    sp.add_argument("--jobs", type=int, default=1)

    sp = add("serve", cmd_serve, "start the exploration service")
    sp.add_argument("dataset")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8765)
    sp.add_argument("--policy", choices=("lazy", "eager"), default="lazy")
    sp.add_argument("--norm", choices=("frame", "global"), default="frame")
    sp.add_argument("--fps", type=float, default=5.0)
    sp.add_argument("--precompute-iso", type=float, default=None,
                    help="derive every frame's isosurface before serving")
    sp.add_argument("--ratio", type=float, default=None,
                    help="decimation ratio for --precompute-iso")

    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USER
    try:
        return args.fn(args)
    except DatasetError as exc:
        _fail("data_error", str(exc))
        return EXIT_DATA
    except OSError as exc:
        _fail("io_error", str(exc))
        return EXIT_DATA
    except (ValueError, IndexError, KeyError) as exc:
        _fail("invalid_argument", str(exc))
        return EXIT_USER
    except KeyboardInterrupt:
        _fail("interrupted", "interrupted")
        return EXIT_USER


if __name__ == "__main__":
    sys.exit(main())
