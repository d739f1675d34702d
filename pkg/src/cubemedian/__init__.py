"""Median-graph machinery for CAT(0) cube complexes.

Finite complexes as median graphs, wallspace cubulation, cubical quotients,
lattice-periodic complexes with affine symmetries, isometry classification,
and median-set product decompositions with verifiable certificates.
"""

__version__ = "0.1.0"

from .complex import (
    CubeComplex,
    build_complex,
    convex_hull,
    distance,
    gate_project,
    interval,
    is_convex,
    is_median_graph,
    median,
    median_hull,
    separating_walls,
)
from .errors import (
    CubemedianError,
    InputError,
    InvariantViolation,
    PreconditionError,
    UnsupportedHost,
)
from .kernels import BACKEND as KERNEL_BACKEND

__all__ = [
    "CubeComplex",
    "build_complex",
    "convex_hull",
    "distance",
    "gate_project",
    "interval",
    "is_convex",
    "is_median_graph",
    "median",
    "median_hull",
    "separating_walls",
    "CubemedianError",
    "InputError",
    "InvariantViolation",
    "PreconditionError",
    "UnsupportedHost",
    "KERNEL_BACKEND",
]
