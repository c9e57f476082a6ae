"""Field-line tracing through vector fields.

Lines are integrated with classic fixed-step fourth-order Runge-Kutta over
the *normalized* field direction, so the step size is an arc-length step
and sampling stays uniform along the polyline regardless of field
strength.  Each emitted point carries the interpolated field magnitude for
intensity coloring.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import DomainExit, GridDims, VectorField, sample_vector

DIRECTIONS = ("forward", "backward", "both")

# Magnitudes below this cannot be normalized into a direction.
_ZERO_MAG = 1e-30


class Stagnation(Exception):
    """Signals a (near-)zero field vector: the direction is undefined."""


@dataclass(frozen=True)
class TraceConfig:
    """Integration parameters; h is the arc-length step in world units."""

    h: float
    max_steps: int = 2000
    stagnation_eps: float = 1e-12
    direction: str = "both"

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("step h must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.stagnation_eps < 0:
            raise ValueError("stagnation_eps must be nonnegative")
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}")

    @classmethod
    def for_dims(cls, dims: GridDims, **overrides) -> "TraceConfig":
        """Default configuration: half-cell steps, capped trace length."""
        kw = dict(h=min(dims.spacing) / 2.0, max_steps=2000,
                  stagnation_eps=1e-12, direction="both")
        kw.update(overrides)
        return cls(**kw)


@dataclass
class Streamline:
    """Traced polyline: (x, y, z, |field|) per point plus why it stopped."""

    points: np.ndarray           # (n, 4) float64: position + magnitude
    termination_reason: str      # domain_exit | max_steps | stagnation

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 4)
        if len(self.points) < 1:
            raise ValueError("streamline needs at least one point")
        if self.termination_reason not in ("domain_exit", "max_steps", "stagnation"):
            raise ValueError(f"unknown termination reason {self.termination_reason!r}")

    @property
    def positions(self) -> np.ndarray:
        return self.points[:, :3]

    @property
    def magnitudes(self) -> np.ndarray:
        return self.points[:, 3]


def _direction(field: VectorField, p, sign: float) -> np.ndarray:
    v = sample_vector(field, p)
    mag = float(np.linalg.norm(v))
    if mag < _ZERO_MAG:
        raise Stagnation(f"zero field vector at {tuple(p)}")
    return (sign / mag) * v


def rk4_step(field: VectorField, p, h: float, sign: float = 1.0) -> np.ndarray:
    """One classic RK4 step of arc length h along the unit field direction.

    Raises DomainExit when any stage evaluation point leaves the grid and
    Stagnation when the field vanishes at a stage point.
    """
    p = np.asarray(p, dtype=np.float64)
    k1 = _direction(field, p, sign)
    k2 = _direction(field, p + (h / 2.0) * k1, sign)
    k3 = _direction(field, p + (h / 2.0) * k2, sign)
    k4 = _direction(field, p + h * k3, sign)
    return p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _trace_one_way(field, seed, cfg, sign, seed_mag):
    """Points after the seed in one direction, plus the termination reason."""
    pts = []
    p = np.asarray(seed, dtype=np.float64)
    mag = seed_mag
    reason = "max_steps"
    for _ in range(cfg.max_steps):
        if mag < cfg.stagnation_eps or mag < _ZERO_MAG:
            reason = "stagnation"
            break
        try:
            p = rk4_step(field, p, cfg.h, sign)
        except DomainExit:
            reason = "domain_exit"
            break
        except Stagnation:
            reason = "stagnation"
            break
        mag = float(np.linalg.norm(sample_vector(field, p)))
        pts.append((p[0], p[1], p[2], mag))
    return pts, reason


def trace(field: VectorField, seed, cfg: TraceConfig) -> Streamline:
    """Trace a streamline from a seed point.

    Stepping continues until domain exit, the step cap, or the field
    magnitude dropping to stagnation_eps.  Direction "both" traces against
    the field first, reverses, then appends the forward half, so the seed
    appears exactly once and magnitudes color the whole line coherently.
    """
    seed = np.asarray(seed, dtype=np.float64)
    try:
        v = sample_vector(field, seed)
    except DomainExit:
        raise ValueError(f"seed {tuple(seed)} outside field domain") from None
    seed_mag = float(np.linalg.norm(v))
    seed_pt = (seed[0], seed[1], seed[2], seed_mag)

    fwd: list = []
    bwd: list = []
    reason = "max_steps"
    if cfg.direction in ("forward", "both"):
        fwd, reason = _trace_one_way(field, seed, cfg, +1.0, seed_mag)
    if cfg.direction in ("backward", "both"):
        bwd, breason = _trace_one_way(field, seed, cfg, -1.0, seed_mag)
        if cfg.direction == "backward":
            reason = breason

    points = list(reversed(bwd)) + [seed_pt] + fwd if cfg.direction == "both" else (
        [seed_pt] + fwd if cfg.direction == "forward" else [seed_pt] + bwd)
    if len(points) == 1 and reason == "max_steps":
        # no motion at all: the seed itself stagnated
        reason = "stagnation"
    return Streamline(np.array(points, dtype=np.float64), reason)


def seed_lattice(dims: GridDims, stride: tuple[int, int, int]) -> np.ndarray:
    """World seed positions on a strided node lattice.

    Nodes at (i, j, k) with each index a multiple of its stride, nudged at
    least half a cell inward from the bounding box so seeds do not start on
    the stagnating boundary.  Returns an (n, 3) array in (k, j, i) scan order.
    """
    sx, sy, sz = (int(s) for s in stride)
    if min(sx, sy, sz) < 1:
        raise ValueError("strides must be >= 1")
    lo, hi = dims.bounds()

    def axis_coords(n, step, d, a0, a1):
        coords = a0 + np.arange(0, n, step) * d
        half = d / 2.0
        lo_lim, hi_lim = a0 + half, a1 - half
        if lo_lim > hi_lim:
            mid = (a0 + a1) / 2.0
            return np.full(len(coords), mid)
        return np.clip(coords, lo_lim, hi_lim)

    xs = axis_coords(dims.nx, sx, dims.dx, lo[0], hi[0])
    ys = axis_coords(dims.ny, sy, dims.dy, lo[1], hi[1])
    zs = axis_coords(dims.nz, sz, dims.dz, lo[2], hi[2])
    out = np.empty((len(zs) * len(ys) * len(xs), 3))
    idx = 0
    for z in zs:
        for y in ys:
            for x in xs:
                out[idx] = (x, y, z)
                idx += 1
    return out


def trace_batch(field: VectorField, seeds, cfg: TraceConfig) -> list[Streamline]:
    """Trace independent streamlines for every seed."""
    return [trace(field, s, cfg) for s in np.asarray(seeds, dtype=np.float64)]
