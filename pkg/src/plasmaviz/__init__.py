"""Processing engine and exploration service for time-varying plasma
simulation datasets: particle texture encoding, flying-edges isosurfacing
with quadric-error decimation, Runge-Kutta streamline tracing, multiaxial
slice heatmaps, time-ranged 3D annotations, and timeline playback."""

from .fields import (DomainExit, FrameSeries, GridDims, ScalarField, VectorField,
                     field_minmax, linear_index, sample_scalar, sample_vector)
from .isosurface import (IsoRequest, TriangleMesh, compute_normals, flying_edges,
                         marching_cubes_reference)
from .decimate import CollapseCandidate, build_quadrics, collapse_cost, decimate_qem
from .streamline import Stagnation, Streamline, TraceConfig, rk4_step, seed_lattice, trace
from .particles import (CapacityError, ParticleFrame, ParticleTexture, decode_texture,
                        encode_texture, subsample)
from .slicer import (ColorGradient, DEFAULT_GRADIENT, SliceHeatmap, SlicePlaneState,
                     extract_slice, gradient_lookup, render_heatmap)
from .annotate import Annotation, AnnotationNotFound, AnnotationStore
from .io_formats import DatasetError, DatasetManifest, read_manifest, write_obj, write_png
from .session import ExplorerSession, PlaybackClock
from .service import create_app

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
