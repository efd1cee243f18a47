"""Self-expander curves by RK4 shooting, and analytic fixture curves.

A symmetric expander through (0, b) with horizontal tangent solves, in
arclength, x' = (cos th, sin th), th' = mu <x, N> with N = (-sin th, cos th).
Only the s > 0 branch is integrated; the other half is its mirror image
across the y-axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import PolylineCurve


class StepRejected(ValueError):
    """The arclength step is too coarse for the local curvature."""


class BracketError(ValueError):
    """The shooting bracket does not straddle the target angle."""


@dataclass(frozen=True)
class ExpanderShootingProblem:
    mu: float
    b: float
    ds: float = 1e-3
    s_max: float = 20.0

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not self.b > 0:
            raise ValueError(f"initial height b must be positive, got {self.b}")
        if not self.ds > 0:
            raise ValueError(f"ds must be positive, got {self.ds}")
        need = 10.0 * max(1.0, 1.0 / math.sqrt(self.mu))
        if self.s_max < need * (1 - 1e-12):
            raise ValueError(f"s_max={self.s_max} below the minimum {need:.6g}")

    @property
    def n_steps(self) -> int:
        return int(round(self.s_max / self.ds))


def _branch(mu: float, b: float, ds: float, n_steps: int, max_turn: float = 0.5) -> np.ndarray:
    """Classical RK4 on (x1, x2, th) from (0, b, 0); returns (n_steps+1, 3)."""
    sin, cos = math.sin, math.cos

    def rhs(x1, x2, th):
        s, c = sin(th), cos(th)
        return c, s, mu * (-x1 * s + x2 * c)

    out = np.empty((n_steps + 1, 3))
    x1, x2, th = 0.0, b, 0.0
    out[0] = x1, x2, th
    h2 = 0.5 * ds
    for k in range(n_steps):
        a1, a2, a3 = rhs(x1, x2, th)
        if abs(a3) * ds > max_turn:
            raise StepRejected(
                f"|theta'| * ds = {abs(a3) * ds:.3g} > {max_turn} at step {k}; refine ds"
            )
        b1, b2, b3 = rhs(x1 + h2 * a1, x2 + h2 * a2, th + h2 * a3)
        c1, c2, c3 = rhs(x1 + h2 * b1, x2 + h2 * b2, th + h2 * b3)
        d1, d2, d3 = rhs(x1 + ds * c1, x2 + ds * c2, th + ds * c3)
        x1 += ds / 6.0 * (a1 + 2.0 * b1 + 2.0 * c1 + d1)
        x2 += ds / 6.0 * (a2 + 2.0 * b2 + 2.0 * c2 + d2)
        th += ds / 6.0 * (a3 + 2.0 * b3 + 2.0 * c3 + d3)
        out[k + 1] = x1, x2, th
    return out


def integrate_expander(problem: ExpanderShootingProblem) -> PolylineCurve:
    """Symmetric expander polyline with p0 = 0, vertices ordered by arclength
    from -s_max to s_max."""
    half = _branch(problem.mu, problem.b, problem.ds, problem.n_steps)[:, :2]
    left = half[:0:-1] * np.array([-1.0, 1.0])
    vertices = np.vstack([left, half])
    return PolylineCurve(vertices, closed=False, p0=np.zeros(2), mu=problem.mu)


def _edge_angles(curve: PolylineCurve) -> np.ndarray:
    e = curve.edges
    return np.unwrap(np.arctan2(e[:, 1], e[:, 0]))


def asymptotic_angle(curve: PolylineCurve, window: float = 0.1) -> tuple[float, float]:
    """Mean tangent angle over the last ``window`` fraction of arclength of the
    s > 0 branch (the second half of the curve by arclength), and the spread
    (max - min) of the angle there."""
    if curve.closed:
        raise ValueError("asymptotic angle needs an open curve")
    lengths = curve.edge_lengths
    s_end = np.cumsum(lengths)
    total = s_end[-1]
    start = total - 0.5 * window * total
    sel = s_end - lengths >= start
    if sel.sum() + 1 < 10:
        raise ValueError(f"window holds only {sel.sum() + 1} vertices (need 10)")
    ang = _edge_angles(curve)[sel]
    w = lengths[sel]
    return float(np.sum(w * ang) / w.sum()), float(ang.max() - ang.min())


def _theta_inf(mu: float, b: float, ds: float, s_max: float) -> float:
    """Asymptotic angle from the s > 0 branch alone (same window rule as
    :func:`asymptotic_angle` applied to the mirrored curve)."""
    problem = ExpanderShootingProblem(mu, b, ds, s_max)
    curve = integrate_expander(problem)
    return asymptotic_angle(curve)[0]


@dataclass(frozen=True)
class ShootingResult:
    b: float
    mismatch: float
    iterations: int


def shoot_for_cone_angle(
    mu: float,
    target: float,
    bracket: tuple[float, float],
    *,
    ds: float = 1e-2,
    s_max: float | None = None,
    atol: float = 1e-6,
    max_iter: int = 80,
) -> ShootingResult:
    """Bisection on the initial height b until the asymptotic angle matches
    ``target`` within ``atol``."""
    b_lo, b_hi = map(float, bracket)
    if not (0 < b_lo < b_hi):
        raise ValueError(f"invalid bracket {bracket}: need 0 < b_lo < b_hi")
    if s_max is None:
        s_max = 10.0 * max(1.0, 1.0 / math.sqrt(mu))
    f_lo = _theta_inf(mu, b_lo, ds, s_max) - target
    f_hi = _theta_inf(mu, b_hi, ds, s_max) - target
    if f_lo == 0.0:
        return ShootingResult(b_lo, 0.0, 0)
    if f_hi == 0.0:
        return ShootingResult(b_hi, 0.0, 0)
    if np.sign(f_lo) == np.sign(f_hi):
        raise BracketError(
            f"asymptotic angle minus target has the same sign at b={b_lo} "
            f"({f_lo:+.3e}) and b={b_hi} ({f_hi:+.3e})"
        )
    b_mid, f_mid = b_lo, f_lo
    for it in range(1, max_iter + 1):
        b_mid = 0.5 * (b_lo + b_hi)
        f_mid = _theta_inf(mu, b_mid, ds, s_max) - target
        if abs(f_mid) <= atol:
            return ShootingResult(b_mid, abs(f_mid), it)
        if np.sign(f_mid) == np.sign(f_lo):
            b_lo, f_lo = b_mid, f_mid
        else:
            b_hi = b_mid
    return ShootingResult(b_mid, abs(f_mid), max_iter)


def make_fixture(
    kind: str,
    *,
    n: int = 2001,
    extent: float = 10.0,
    angle: float = 0.0,
    b: float = 1.0,
    r: float = 1.0,
    center=(0.0, 0.0),
    angle1: float = math.pi / 4,
    angle2: float = 3 * math.pi / 4,
    mu: float = 0.0,
    p0=(0.0, 0.0),
) -> PolylineCurve:
    """Exactly sampled analytic curves.

    ``line_through_origin`` and ``offset_line`` are sampled uniformly on
    [-extent, extent]; ``circle`` is closed and counterclockwise;
    ``two_ray_cone`` runs in from distance ``extent`` along ``angle1`` to the
    origin and out along ``angle2``, with the apex registered as a corner.
    """
    if n < 3:
        raise ValueError("need at least 3 vertices")
    if kind == "line_through_origin":
        if not extent > 0:
            raise ValueError("extent must be positive")
        u = np.linspace(-extent, extent, n)
        d = np.array([math.cos(angle), math.sin(angle)])
        if angle == 0.0:
            d = np.array([1.0, 0.0])
        v = u[:, None] * d
        return PolylineCurve(v, closed=False, p0=p0, mu=mu)
    if kind == "offset_line":
        if not extent > 0:
            raise ValueError("extent must be positive")
        u = np.linspace(-extent, extent, n)
        v = np.column_stack([u, np.full(n, float(b))])
        return PolylineCurve(v, closed=False, p0=p0, mu=mu)
    if kind == "circle":
        if not r > 0:
            raise ValueError("radius must be positive")
        phi = 2 * np.pi * np.arange(n) / n
        v = np.asarray(center, dtype=float) + r * np.column_stack([np.cos(phi), np.sin(phi)])
        return PolylineCurve(v, closed=True, p0=p0, mu=mu)
    if kind == "two_ray_cone":
        if not extent > 0:
            raise ValueError("extent must be positive")
        m = n // 2
        u = np.linspace(0.0, extent, m + 1)
        d1 = np.array([math.cos(angle1), math.sin(angle1)])
        d2 = np.array([math.cos(angle2), math.sin(angle2)])
        v = np.vstack([u[::-1, None] * d1, u[1:, None] * d2])
        return PolylineCurve(v, closed=False, p0=p0, mu=mu, corners=(m,))
    raise ValueError(f"unknown fixture kind {kind!r}")
