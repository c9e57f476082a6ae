#!/usr/bin/env python3
"""Synthesize a small demo dataset: a pulsing charge blob, a swirling
field, and random particles riding it."""

import argparse
import json
import math
from pathlib import Path

import numpy as np


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out")
    ap.add_argument("--frames", type=int, default=8)
    ap.add_argument("--size", type=int, default=32)
    ap.add_argument("--particles", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    n = args.size
    root = Path(args.out)
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)

    manifest = {
        "name": root.name or "demo",
        "frame_count": args.frames,
        "scalar": {"dims": [n, n, n], "pattern": "scalar_%04d.f32"},
        "vector": {"dims": [n, n, n], "pattern": "vector_%04d.f32"},
        "particles": {"counts": [args.particles] * args.frames,
                      "pattern": "particles_%04d.f32"},
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=1))

    g = np.mgrid[0:n, 0:n, 0:n].astype(np.float64)  # [k, j, i] planes
    c = (n - 1) / 2.0
    for k in range(args.frames):
        phase = 2 * math.pi * k / args.frames
        wobble = 1.0 + 0.25 * math.sin(phase)
        r = np.sqrt((g[2] - c) ** 2 + ((g[1] - c) / wobble) ** 2 + (g[0] - c) ** 2)
        scalar = (n / 3.0) - r + 0.5 * np.sin(g[2] * 0.7 + phase)
        (root / f"scalar_{k:04d}.f32").write_bytes(
            scalar.astype("<f4").ravel().tobytes())

        vx = -(g[1] - c) + 0.3 * math.cos(phase)
        vy = (g[2] - c)
        vz = 0.2 * np.sin(g[1] * 0.5 + phase)
        (root / f"vector_{k:04d}.f32").write_bytes(
            vx.astype("<f4").ravel().tobytes()
            + vy.astype("<f4").ravel().tobytes()
            + vz.astype("<f4").ravel().tobytes())

        theta = rng.uniform(0, 2 * math.pi, args.particles)
        rad = rng.normal(n / 4.0, n / 12.0, args.particles)
        pos = np.stack([
            c + rad * np.cos(theta + phase),
            c + rad * np.sin(theta + phase),
            rng.uniform(0.2 * n, 0.8 * n, args.particles),
        ], axis=1)
        pos = np.clip(pos, 0, n - 1)
        energy = np.abs(rng.normal(1.0, 0.4, args.particles))
        rec = np.hstack([pos, energy[:, None]]).astype("<f4")
        (root / f"particles_{k:04d}.f32").write_bytes(rec.tobytes())

    print(f"wrote {args.frames}-frame dataset to {root}")


if __name__ == "__main__":
    main()
