"""Explicit mean curvature flow of polylines, the exact dilation trajectory of
a self-expander, and the normalized-flow rescaling."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .geometry import PolylineCurve, compute_vertex_geometry

BOUNDARY_POLICIES = ("pinned_exact", "pinned_fixed")
MAX_CFL = 0.25


class FlowError(RuntimeError):
    pass


def exact_selfsimilar(curve: PolylineCurve, mu: float | None = None, p0=None, t: float = 0.5) -> PolylineCurve:
    """Image of the expander ``curve`` (taken as the time 1/(2 mu) slice) at
    time t: p0 + sqrt(2 mu t) (x - p0).

    The returned curve carries the expander constant of the dilated curve,
    1 / (2 t).
    """
    mu = curve.mu if mu is None else float(mu)
    p0 = curve.p0 if p0 is None else np.asarray(p0, float)
    if not mu > 0:
        raise ValueError("mu must be positive")
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    scale = math.sqrt(1.0 + 2.0 * mu * (t - 1.0 / (2.0 * mu)))
    v = p0 + scale * (curve.vertices - p0)
    return replace(curve, vertices=v, p0=p0, mu=mu / scale**2)


@dataclass(frozen=True)
class ExactTrajectory:
    """Reference expander M (the slice at t = 1/(2 mu)) used to pin boundary
    vertices on the exact self-similar solution."""

    reference: PolylineCurve
    mu: float

    def at(self, t: float) -> PolylineCurve:
        return exact_selfsimilar(self.reference, self.mu, self.reference.p0, t)

    def endpoints(self, t: float) -> np.ndarray:
        p0 = self.reference.p0
        scale = math.sqrt(2.0 * self.mu * t)
        return p0 + scale * (self.reference.vertices[[0, -1]] - p0)


@dataclass(frozen=True)
class FlowState:
    curve: PolylineCurve
    t: float
    dt: float
    boundary: str = "pinned_fixed"
    cfl: float = MAX_CFL
    trajectory: ExactTrajectory | None = None

    def __post_init__(self):
        if self.boundary not in BOUNDARY_POLICIES:
            raise ValueError(f"unknown boundary policy {self.boundary!r}")
        if not 0 < self.cfl <= MAX_CFL:
            raise ValueError(f"cfl must lie in (0, {MAX_CFL}]")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.boundary == "pinned_exact" and self.trajectory is None and not self.curve.closed:
            raise ValueError("pinned_exact needs an exact trajectory")


def cfl_time_step(curve: PolylineCurve, cfl: float = 0.2) -> float:
    return cfl * float(curve.edge_lengths.min()) ** 2


def mcf_step(state: FlowState) -> FlowState:
    """One forward Euler step x_i <- x_i + dt H_i (Jacobi update)."""
    curve, dt = state.curve, state.dt
    lengths = curve.edge_lengths
    limit = state.cfl * lengths.min() ** 2
    if dt > limit * (1 + 1e-12):
        raise FlowError(f"CFL violation: dt={dt:.3e} > cfl * h_min^2 = {limit:.3e}")
    g = compute_vertex_geometry(curve)
    v = curve.vertices + dt * g.H
    t_new = state.t + dt
    if not curve.closed:
        if state.boundary == "pinned_exact":
            v[[0, -1]] = state.trajectory.endpoints(t_new)
        else:
            v[[0, -1]] = curve.vertices[[0, -1]]
    new_lengths = np.linalg.norm(np.diff(v, axis=0), axis=1)
    if curve.closed:
        new_lengths = np.append(new_lengths, np.linalg.norm(v[0] - v[-1]))
    span = v.max(axis=0) - v.min(axis=0)
    i = int(np.argmin(new_lengths))
    if new_lengths[i] < 1e-10 * np.hypot(*span):
        raise FlowError(f"edge {i} collapsed at t={t_new:.6g} (length {new_lengths[i]:.3e})")
    return replace(state, curve=curve.with_vertices(v), t=t_new)


@dataclass
class FlowRun:
    final: FlowState
    snapshots: list[tuple[float, PolylineCurve]]
    steps: int


def run_flow(state: FlowState, t_end: float, snapshot_every: int | None = None) -> FlowRun:
    """Advance to ``t_end`` in equal steps of at most ``state.dt``, the last
    landing on t_end exactly.

    Vertices drift tangentially under a purely normal flow, so edges can
    shrink below the size ``dt`` was chosen for; such a step is split into
    the fewest equal substeps that respect the CFL limit.
    """
    if t_end <= state.t:
        raise ValueError("t_end must exceed the current time")
    n = max(1, math.ceil((t_end - state.t) / state.dt - 1e-9))
    dt = (t_end - state.t) / n
    t0 = state.t
    state = replace(state, dt=dt)
    snaps = [(state.t, state.curve)] if snapshot_every else []
    substeps = 0
    for k in range(1, n + 1):
        limit = state.cfl * float(state.curve.edge_lengths.min()) ** 2
        m = max(1, math.ceil(dt / limit - 1e-12))
        t_start = state.t
        for j in range(1, m + 1):
            state = mcf_step(replace(state, dt=dt / m))
            state = replace(state, t=t_start + j * dt / m)
        substeps += m
        state = replace(state, dt=dt, t=t_end if k == n else t0 + k * dt)
        if snapshot_every and (k % snapshot_every == 0 or k == n):
            snaps.append((state.t, state.curve))
    return FlowRun(state, snaps, substeps)


def point_polyline_distance(points, polyline: PolylineCurve, chunk: int = 256) -> np.ndarray:
    """Distance from each point to the nearest edge of ``polyline``."""
    points = np.atleast_2d(np.asarray(points, float))
    a = polyline.edge_starts
    d = polyline.edges
    dd = np.einsum("ij,ij->i", d, d)
    out = np.empty(len(points))
    for s in range(0, len(points), chunk):
        p = points[s:s + chunk, None, :]
        t = np.clip(np.einsum("pij,ij->pi", p - a, d) / dd, 0.0, 1.0)
        diff = p - (a + t[..., None] * d)
        out[s:s + chunk] = np.sqrt(np.min(np.einsum("pij,pij->pi", diff, diff), axis=1))
    return out


def window_hausdorff(curve: PolylineCurve, exact: PolylineCurve, window: float = 0.8) -> float:
    """Largest distance from the central ``window`` fraction (by vertex index)
    of ``curve`` to the exact polyline."""
    n = curve.n_vertices
    cut = int(round(0.5 * (1.0 - window) * n))
    pts = curve.vertices[cut:n - cut]
    return float(point_polyline_distance(pts, exact).max())


def normalized_flow_residual(curve: PolylineCurve) -> float:
    """Largest normal speed |<H - (x - p0), N>| of the normalized flow;
    vanishes on mu = 1 expanders centered at p0 = 0."""
    if curve.mu != 1.0 or np.any(curve.p0 != 0.0):
        raise ValueError("the normalized-flow residual needs mu = 1 and p0 = 0")
    g = compute_vertex_geometry(curve)
    speed = np.einsum("ij,ij->i", g.H - (curve.vertices - curve.p0), g.normal)
    return float(np.abs(speed[curve.smooth_mask]).max())


def rescale_map(x, t: float):
    """(x / sqrt(2t + 1), log(2t + 1) / 2)."""
    if not t > -0.5:
        raise ValueError(f"rescaling needs t > -1/2, got {t}")
    x = np.asarray(x, dtype=float)
    return x / math.sqrt(2.0 * t + 1.0), 0.5 * math.log(2.0 * t + 1.0)
