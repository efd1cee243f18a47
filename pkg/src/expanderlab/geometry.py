"""Discrete immersed plane curves: mean curvature, normal/tangential splitting
of the position vector, and the expander defect.

The mean curvature vector is the dual-length weighted second difference of
the position map (the discrete Laplace-Beltrami operator on a polyline), so
it is the *vector* H, never a signed scalar. Vertex tangents are the
normalized sum of the two adjacent unit edge vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

DEGENERATE_EDGE_RTOL = 1e-14


class DegenerateEdgeError(ValueError):
    """An edge is too short relative to the curve diameter."""

    def __init__(self, index: int, length: float, diameter: float):
        self.index = int(index)
        self.length = float(length)
        super().__init__(
            f"degenerate edge {index}: length {length:.3e} < "
            f"{DEGENERATE_EDGE_RTOL:.0e} * diameter ({diameter:.3e})"
        )


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PolylineCurve:
    """Immersed discrete curve in the plane with basepoint ``p0`` and the
    expander constant ``mu``.

    ``corners`` lists vertex indices where the curve is not smooth (e.g. the
    apex of a two-ray cone); they are skipped by residual checks.
    """

    vertices: np.ndarray
    closed: bool = False
    p0: np.ndarray = field(default_factory=lambda: np.zeros(2))
    mu: float = 0.0
    corners: tuple[int, ...] = ()

    def __post_init__(self):
        v = _frozen(self.vertices)
        if v.ndim != 2 or v.shape[1] != 2:
            raise ValueError(f"vertices must have shape (N, 2), got {v.shape}")
        if len(v) < 3:
            raise ValueError("a curve needs at least 3 vertices")
        if not np.all(np.isfinite(v)):
            raise ValueError("vertices must be finite")
        p0 = _frozen(self.p0)
        if p0.shape != (2,):
            raise ValueError("p0 must be a point in R^2")
        if not self.mu >= 0:
            raise ValueError(f"mu must be nonnegative, got {self.mu}")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "p0", p0)
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "closed", bool(self.closed))
        object.__setattr__(self, "corners", tuple(int(c) for c in self.corners))

        lengths = self.edge_lengths
        diam = self.diameter
        bad = np.flatnonzero(lengths < DEGENERATE_EDGE_RTOL * diam)
        if len(bad) or diam == 0.0:
            i = int(bad[0]) if len(bad) else 0
            raise DegenerateEdgeError(i, float(lengths[i]), diam)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def edges(self) -> np.ndarray:
        """Edge vectors e_i = x_{i+1} - x_i (wrapping for closed curves)."""
        v = self.vertices
        if self.closed:
            return np.roll(v, -1, axis=0) - v
        return v[1:] - v[:-1]

    @property
    def edge_starts(self) -> np.ndarray:
        return self.vertices if self.closed else self.vertices[:-1]

    @property
    def edge_lengths(self) -> np.ndarray:
        return np.linalg.norm(self.edges, axis=1)

    @property
    def diameter(self) -> float:
        # bounding-box diagonal; within a factor sqrt(2) of the true diameter
        span = self.vertices.max(axis=0) - self.vertices.min(axis=0)
        return float(np.hypot(*span))

    @property
    def length(self) -> float:
        return float(self.edge_lengths.sum())

    @property
    def interior_mask(self) -> np.ndarray:
        """Vertices with two neighbors."""
        mask = np.ones(self.n_vertices, dtype=bool)
        if not self.closed:
            mask[0] = mask[-1] = False
        return mask

    @property
    def smooth_mask(self) -> np.ndarray:
        """Interior vertices that are not declared corners."""
        mask = self.interior_mask.copy()
        mask[list(self.corners)] = False
        return mask

    def with_vertices(self, vertices, **changes) -> "PolylineCurve":
        return replace(self, vertices=vertices, **changes)

    def dilate(self, factor: float, mu: float | None = None) -> "PolylineCurve":
        """Dilation about ``p0``: p0 + factor * (x - p0)."""
        v = self.p0 + factor * (self.vertices - self.p0)
        return replace(self, vertices=v, mu=self.mu if mu is None else mu)


@dataclass(frozen=True, eq=False)
class VertexGeometry:
    """Per-vertex discrete geometry. Rows for open-curve endpoints use the
    incident edge as tangent and carry zero curvature."""

    prev_length: np.ndarray
    next_length: np.ndarray
    tangent: np.ndarray
    H: np.ndarray
    x_tan: np.ndarray
    x_perp: np.ndarray
    interior: np.ndarray

    @property
    def normal(self) -> np.ndarray:
        """+90 degree rotation of the tangent."""
        return np.column_stack([-self.tangent[:, 1], self.tangent[:, 0]])

    @property
    def perp_sq(self) -> np.ndarray:
        return np.einsum("ij,ij->i", self.x_perp, self.x_perp)


def _neighbor_edges(curve: PolylineCurve):
    """Incoming and outgoing edge vectors per vertex (endpoints reuse their
    single edge)."""
    e = curve.edges
    if curve.closed:
        return np.roll(e, 1, axis=0), e
    e_in = np.vstack([e[:1], e])
    e_out = np.vstack([e, e[-1:]])
    return e_in, e_out


def compute_vertex_geometry(curve: PolylineCurve) -> VertexGeometry:
    e_in, e_out = _neighbor_edges(curve)
    l_in = np.linalg.norm(e_in, axis=1)
    l_out = np.linalg.norm(e_out, axis=1)
    u_in = e_in / l_in[:, None]
    u_out = e_out / l_out[:, None]

    H = (2.0 / (l_in + l_out))[:, None] * (u_out - u_in)
    t = u_in + u_out
    t_norm = np.linalg.norm(t, axis=1)
    # a cusp (edge reversal) has no bisector; fall back to the outgoing edge
    cusp = t_norm < 1e-12
    t[cusp] = u_out[cusp]
    t_norm[cusp] = 1.0
    T = t / t_norm[:, None]

    interior = curve.interior_mask
    H[~interior] = 0.0

    rel = curve.vertices - curve.p0
    x_tan = np.einsum("ij,ij->i", rel, T)[:, None] * T
    x_perp = rel - x_tan
    return VertexGeometry(
        prev_length=l_in,
        next_length=l_out,
        tangent=T,
        H=H,
        x_tan=x_tan,
        x_perp=x_perp,
        interior=interior,
    )


def expander_defect(curve: PolylineCurve, geometry: VertexGeometry | None = None) -> np.ndarray:
    """d_i = <H_i, x_i - p0> - mu |(x_i - p0)^perp|^2.

    Entries for endpoints and declared corners are NaN; they carry no
    curvature information.
    """
    g = compute_vertex_geometry(curve) if geometry is None else geometry
    rel = curve.vertices - curve.p0
    d = np.einsum("ij,ij->i", g.H, rel) - curve.mu * g.perp_sq
    d[~curve.smooth_mask] = np.nan
    return d


def default_defect_tolerance(curve: PolylineCurve) -> float:
    return 1e-6 * (1.0 + curve.mu * curve.diameter**2)


def is_expander_type(curve: PolylineCurve, tol: float | None = None) -> bool:
    """Generalized self-expander type: min defect >= -tol."""
    tol = default_defect_tolerance(curve) if tol is None else tol
    d = expander_defect(curve)
    return bool(np.nanmin(d) >= -tol)


def discrete_laplacian(curve: PolylineCurve, f) -> np.ndarray:
    """Dual-length weighted second difference of a vertex field.

    Open-curve endpoints get 0.
    """
    f = np.asarray(f, dtype=float)
    if f.shape != (curve.n_vertices,):
        raise ValueError(
            f"field has {f.size} values but the curve has {curve.n_vertices} vertices"
        )
    lengths = curve.edge_lengths
    if curve.closed:
        df = (np.roll(f, -1) - f) / lengths
        lap = (2.0 / (np.roll(lengths, 1) + lengths)) * (df - np.roll(df, 1))
        return lap
    df = np.diff(f) / lengths
    lap = np.zeros_like(f)
    lap[1:-1] = (2.0 / (lengths[:-1] + lengths[1:])) * (df[1:] - df[:-1])
    return lap


def growth_condition_estimate(curve: PolylineCurve, delta: float) -> float:
    """Smallest c with <x, nu>^2 <= c (1 + |x|^2)^(1 - delta) on the interior
    vertices, nu the +90 degree rotation of the vertex tangent.

    Positions are taken relative to the origin, not ``p0``.
    """
    if not 0 < delta <= 1:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    g = compute_vertex_geometry(curve)
    x = curve.vertices
    pair = np.einsum("ij,ij->i", x, g.normal)
    ratio = pair**2 / (1.0 + np.einsum("ij,ij->i", x, x)) ** (1.0 - delta)
    return float(ratio[curve.interior_mask].max())


def field_on(curve: PolylineCurve, values) -> np.ndarray:
    """Validate a nonnegative per-vertex scalar field."""
    f = np.asarray(values, dtype=float)
    if np.ndim(f) == 0:
        f = np.full(curve.n_vertices, float(f))
    if f.shape != (curve.n_vertices,):
        raise ValueError(
            f"field has {f.size} values but the curve has {curve.n_vertices} vertices"
        )
    if np.any(f < 0) or not np.all(np.isfinite(f)):
        raise ValueError("field values must be finite and nonnegative")
    return f
