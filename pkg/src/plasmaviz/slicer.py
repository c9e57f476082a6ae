"""Axis-aligned slice extraction and min/max-normalized heatmap rendering.

A slice is one plane of grid values; its heatmap normalizes each value by
the *frame-wide* extrema (cached upstream, so moving a plane only reads
the plane itself) and maps the normalized value through a piecewise-linear
color gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import ScalarField

AXES = ("x", "y", "z")


@dataclass(frozen=True)
class SlicePlaneState:
    """One slicing plane: the axis it bisects and its node index."""

    axis: str
    index: int

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}, got {self.axis!r}")

    def validate_for(self, field: ScalarField) -> None:
        n = {"x": field.dims.nx, "y": field.dims.ny, "z": field.dims.nz}[self.axis]
        if not 0 <= self.index < n:
            raise IndexError(f"slice index {self.index} out of range 0..{n - 1} on axis {self.axis}")


@dataclass(frozen=True)
class ColorGradient:
    """Ordered color stops (t, (r, g, b)) with t strictly increasing 0 -> 1."""

    stops: tuple[tuple[float, tuple[int, int, int]], ...]

    def __post_init__(self):
        if len(self.stops) < 2:
            raise ValueError("gradient needs at least 2 stops")
        ts = [t for t, _ in self.stops]
        if ts[0] != 0.0 or ts[-1] != 1.0:
            raise ValueError("gradient must start at t=0 and end at t=1")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("gradient stop positions must strictly increase")
        for _, rgb in self.stops:
            if len(rgb) != 3 or any(not 0 <= c <= 255 for c in rgb):
                raise ValueError(f"bad rgb stop {rgb}")

    @property
    def ts(self) -> np.ndarray:
        return np.array([t for t, _ in self.stops])

    @property
    def colors(self) -> np.ndarray:
        return np.array([rgb for _, rgb in self.stops], dtype=np.float64)


# Dark-to-bright 5-stop ramp with monotone luminance.
DEFAULT_GRADIENT = ColorGradient((
    (0.00, (68, 1, 84)),
    (0.25, (59, 82, 139)),
    (0.50, (33, 145, 140)),
    (0.75, (94, 201, 98)),
    (1.00, (253, 231, 37)),
))


@dataclass
class SliceHeatmap:
    """Slice values plus their color-mapped 8-bit RGB image."""

    axis: str
    index: int
    width: int
    height: int
    values: np.ndarray  # (height, width) float
    vmin: float
    vmax: float
    image: np.ndarray   # (height, width, 3) uint8


def extract_slice(field: ScalarField, plane: SlicePlaneState) -> np.ndarray:
    """Plane of node values; rows/columns keep the storage (fast, slow) order.

    axis z -> values[j][i]; axis y -> values[k][i]; axis x -> values[k][j].
    Returns a copy so heatmaps never alias frame storage.
    """
    plane.validate_for(field)
    a = field.as_3d()
    if plane.axis == "z":
        return a[plane.index, :, :].copy()
    if plane.axis == "y":
        return a[:, plane.index, :].copy()
    return a[:, :, plane.index].copy()


def gradient_lookup(gradient: ColorGradient, t: float) -> tuple[int, int, int]:
    """Piecewise-linear color at t in [0, 1], rounded half-up per channel."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must be in [0, 1], got {t}")
    rgb = _interp_colors(gradient, np.array([t]))[0]
    return tuple(int(c) for c in rgb)


def _interp_colors(gradient: ColorGradient, t: np.ndarray) -> np.ndarray:
    ts = gradient.ts
    colors = gradient.colors
    out = np.empty(t.shape + (3,), dtype=np.float64)
    for c in range(3):
        out[..., c] = np.interp(t, ts, colors[:, c])
    # round half-up, matching the scalar contract
    return np.floor(out + 0.5).astype(np.uint8)


def render_heatmap(values: np.ndarray, gradient: ColorGradient,
                   vmin: float, vmax: float, *, axis: str = "z",
                   index: int = 0) -> SliceHeatmap:
    """Color-map a slice against the frame extrema.

    t = (v - vmin) / (vmax - vmin) clamped to [0, 1]; a degenerate range
    (vmin == vmax) maps everything to the t=0 stop.
    """
    if vmin > vmax:
        raise ValueError(f"vmin {vmin} > vmax {vmax}")
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError("slice values must be 2D")
    if vmax > vmin:
        t = np.clip((values - vmin) / (vmax - vmin), 0.0, 1.0)
    else:
        t = np.zeros_like(values)
    image = _interp_colors(gradient, t)
    h, w = values.shape
    return SliceHeatmap(axis=axis, index=index, width=w, height=h,
                        values=values, vmin=float(vmin), vmax=float(vmax), image=image)
