"""Numerical laboratory for self-expander curves, monotonicity formulas and
blow-down cone limits of discrete varifolds."""

from .geometry import (
    DegenerateEdgeError,
    PolylineCurve,
    VertexGeometry,
    compute_vertex_geometry,
    discrete_laplacian,
    expander_defect,
    growth_condition_estimate,
    is_expander_type,
)

__all__ = [
    "DegenerateEdgeError",
    "PolylineCurve",
    "VertexGeometry",
    "compute_vertex_geometry",
    "discrete_laplacian",
    "expander_defect",
    "growth_condition_estimate",
    "is_expander_type",
]

__version__ = "0.1.0"
