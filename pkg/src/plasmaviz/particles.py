"""Particle subsampling and four-channel float texture encoding.

GPU particle rendering reads one texel per particle: (x, y, z, scalar) in
single precision.  A frame is first thinned by seeded Bernoulli sampling,
then packed row-major into an R x R texture; texels past the occupancy
carry an all-NaN sentinel that cannot collide with finite particle data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_RESOLUTION = 512


class CapacityError(ValueError):
    """Frame does not fit the texture: n particles > R*R texels."""

    def __init__(self, n: int, resolution: int):
        self.n = n
        self.resolution = resolution
        super().__init__(
            f"{n} particles exceed texture capacity {resolution * resolution} "
            f"({resolution}x{resolution}); subsample the frame first")


@dataclass
class ParticleFrame:
    """Positions plus one imported scalar (energy etc.) per particle."""

    positions: np.ndarray  # (n, 3) float32
    scalar: np.ndarray     # (n,) float32

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float32).reshape(-1, 3)
        self.scalar = np.asarray(self.scalar, dtype=np.float32).reshape(-1)
        if len(self.scalar) != len(self.positions):
            raise ValueError("positions and scalar lengths differ")
        if len(self.positions) and not (
                np.isfinite(self.positions).all() and np.isfinite(self.scalar).all()):
            raise ValueError("particle data must be finite")

    @property
    def n(self) -> int:
        return len(self.positions)

    @classmethod
    def empty(cls) -> "ParticleFrame":
        return cls(np.zeros((0, 3), np.float32), np.zeros(0, np.float32))


@dataclass
class ParticleTexture:
    """R x R x 4 float32 atlas; texel (i mod R, i div R) holds particle i."""

    resolution: int
    occupancy: int
    texels: np.ndarray  # (R, R, 4) float32, [row, col, channel]

    def __post_init__(self):
        r = self.resolution
        if r < 1:
            raise ValueError("resolution must be positive")
        if not 0 <= self.occupancy <= r * r:
            raise ValueError(f"occupancy {self.occupancy} outside 0..{r * r}")
        self.texels = np.asarray(self.texels, dtype=np.float32).reshape(r, r, 4)


def subsample(frame: ParticleFrame, fraction: float, rng_seed: int) -> ParticleFrame:
    """Keep each particle independently with probability `fraction`.

    Deterministic for a given seed; relative particle order is preserved.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must be in [0, 1], got {fraction}")
    if frame.n == 0 or fraction == 1.0:
        return ParticleFrame(frame.positions.copy(), frame.scalar.copy())
    rng = np.random.default_rng(rng_seed)
    keep = rng.random(frame.n) < fraction
    return ParticleFrame(frame.positions[keep], frame.scalar[keep])


def encode_texture(frame: ParticleFrame, resolution: int = DEFAULT_RESOLUTION) -> ParticleTexture:
    """Pack a frame into a single-precision four-channel texture.

    Particle i lands at texel (i mod R, i div R); unused texels are NaN in
    all four channels.  Frames beyond R*R capacity are rejected, not
    truncated.
    """
    r = int(resolution)
    if r < 1:
        raise ValueError("resolution must be positive")
    if frame.n > r * r:
        raise CapacityError(frame.n, r)
    flat = np.full((r * r, 4), np.nan, dtype=np.float32)
    flat[:frame.n, :3] = frame.positions
    flat[:frame.n, 3] = frame.scalar
    return ParticleTexture(resolution=r, occupancy=frame.n, texels=flat.reshape(r, r, 4))


def decode_texture(tex: ParticleTexture) -> ParticleFrame:
    """Recover the occupancy-many particles in their original order."""
    flat = tex.texels.reshape(-1, 4)[:tex.occupancy]
    return ParticleFrame(flat[:, :3].copy(), flat[:, 3].copy())
