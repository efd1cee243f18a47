"""Discrete n-rectifiable varifolds as weighted atoms (position, n-plane,
weight), the density-ratio monotonicity check and blow-down cone detection.

The plane at each atom is an orthonormal n-frame; projections onto its
orthogonal complement give |grad_{omega^perp} r|^2 = |P x|^2 / |x|^2 for
r = |x|. All balls and annuli are centered at the origin.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .geometry import PolylineCurve, compute_vertex_geometry

SYNTHETIC_KINDS = ("plane", "cone", "sphere")


class VarifoldError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RectifiableVarifold:
    """``positions`` (K, d), ``frames`` (K, n, d), ``weights`` (K,).

    ``hx`` optionally carries <H, x> per atom for the generating surface,
    which is what the monotonicity hypothesis is about.
    """

    positions: np.ndarray
    frames: np.ndarray
    weights: np.ndarray
    hx: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.positions, float)
        fr = np.asarray(self.frames, float)
        w = np.asarray(self.weights, float)
        if x.ndim != 2 or fr.ndim != 3 or w.ndim != 1:
            raise VarifoldError("positions (K,d), frames (K,n,d) and weights (K,) expected")
        if fr.shape[0] != len(x) or len(w) != len(x) or fr.shape[2] != x.shape[1]:
            raise VarifoldError("inconsistent atom array shapes")
        if fr.shape[1] > x.shape[1]:
            raise VarifoldError("plane dimension exceeds ambient dimension")
        if not (np.all(np.isfinite(w)) and np.all(w > 0)):
            raise VarifoldError("weights must be positive and finite")
        gram = np.einsum("kid,kjd->kij", fr, fr)
        if len(x) and np.abs(gram - np.eye(fr.shape[1])).max() > 1e-10:
            raise VarifoldError("frames must be orthonormal")
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "frames", fr)
        object.__setattr__(self, "weights", w)
        if self.hx is not None:
            object.__setattr__(self, "hx", np.asarray(self.hx, float))

    @property
    def n(self) -> int:
        return self.frames.shape[1]

    @property
    def ambient_dim(self) -> int:
        return self.positions.shape[1]

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    @property
    def radii(self) -> np.ndarray:
        return np.linalg.norm(self.positions, axis=1)

    def transverse_sq(self) -> np.ndarray:
        """|P_{omega^perp} x|^2 per atom."""
        coeff = np.einsum("kid,kd->ki", self.frames, self.positions)
        tangential = np.einsum("ki,kid->kd", coeff, self.frames)
        perp = self.positions - tangential
        return np.einsum("kd,kd->k", perp, perp)

    def rotate(self, Q) -> "RectifiableVarifold":
        Q = np.asarray(Q, float)
        return replace(self, positions=self.positions @ Q.T, frames=self.frames @ Q.T)

    def to_csv(self) -> str:
        d, n = self.ambient_dim, self.n
        header = [f"x{i + 1}" for i in range(d)]
        header += [f"f{a + 1}_{i + 1}" for a in range(n) for i in range(d)]
        header.append("w")
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(header)
        flat = self.frames.reshape(len(self.weights), -1)
        for x, f, w in zip(self.positions, flat, self.weights):
            wr.writerow([repr(float(v)) for v in (*x, *f, w)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "RectifiableVarifold":
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
        d = sum(1 for h in header if h.startswith("x"))
        n = (len(header) - d - 1) // d
        return cls(body[:, :d], body[:, d:d + n * d].reshape(-1, n, d), body[:, -1])


def varifold_from_curve(curve: PolylineCurve, split_radii=()) -> RectifiableVarifold:
    """One atom per edge (midpoint, unit tangent line, edge length), with
    positions taken relative to ``curve.p0``.

    Edges crossing one of ``split_radii`` are cut at the crossing first, so no
    atom straddles those spheres and ball masses there are exact.
    """
    v = curve.vertices - curve.p0
    hx_vertex = np.einsum("ij,ij->i", compute_vertex_geometry(curve).H, v)
    hx_vertex[~curve.smooth_mask] = 0.0
    start = v if curve.closed else v[:-1]
    edge = curve.edges
    nxt = (np.arange(len(edge)) + 1) % curve.n_vertices
    pieces = [np.zeros(len(edge)), np.ones(len(edge))]
    for R in split_radii:
        A = np.einsum("ij,ij->i", edge, edge)
        B = 2 * np.einsum("ij,ij->i", start, edge)
        C = np.einsum("ij,ij->i", start, start) - R * R
        disc = B * B - 4 * A * C
        ok = disc > 0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        for sgn in (-1.0, 1.0):
            t = (-B + sgn * sq) / (2 * A)
            pieces.append(np.where(ok & (t > 0) & (t < 1), t, np.nan))
    cuts = np.sort(np.column_stack(pieces), axis=1)
    lo, hi = cuts[:, :-1], cuts[:, 1:]
    valid = np.isfinite(hi) & (hi > lo)
    e_idx = np.broadcast_to(np.arange(len(edge))[:, None], lo.shape)[valid]
    lo, hi = lo[valid], hi[valid]
    tm = 0.5 * (lo + hi)
    lengths = np.linalg.norm(edge, axis=1)
    pos = start[e_idx] + tm[:, None] * edge[e_idx]
    frames = (edge[e_idx] / lengths[e_idx, None])[:, None, :]
    weights = (hi - lo) * lengths[e_idx]
    hx = (1 - tm) * hx_vertex[e_idx] + tm * hx_vertex[nxt[e_idx]]
    return RectifiableVarifold(pos, frames, weights, hx)


def sample_synthetic(kind: str, *, resolution: int = 200, radius: float = 2.0, beta: float = math.pi / 4,
                     extent: float = 2.0, seed: int | None = 0) -> RectifiableVarifold:
    """Stratified samples of surfaces in R^3 (n = 2): one atom per cell of a
    product grid, placed uniformly at random inside the cell (cell center
    when ``seed`` is None), weighted by the exact cell area.

    ``plane``: disc of ``radius`` in the x1x2-plane; ``cone``: half-angle
    ``beta`` about the x3-axis, |x| <= ``extent``; ``sphere``: unit sphere.
    """
    rng = None if seed is None else np.random.default_rng(seed)
    nr = resolution
    nphi = 2 * resolution

    def jitter(shape):
        return np.full(shape, 0.5) if rng is None else rng.random(shape)

    if kind == "plane":
        edges = np.linspace(0.0, radius, nr + 1)
        pe = np.linspace(0.0, 2 * np.pi, nphi + 1)
        u, w = jitter((nr, nphi)), jitter((nr, nphi))
        # uniform in area inside each annular cell
        r0, r1 = edges[:-1, None], edges[1:, None]
        r = np.sqrt(r0**2 + u * (r1**2 - r0**2))
        phi = pe[:-1][None, :] + w * (2 * np.pi / nphi)
        area = 0.5 * (r1**2 - r0**2) * (2 * np.pi / nphi) * np.ones_like(r)
        x = np.stack([r * np.cos(phi), r * np.sin(phi), np.zeros_like(r)], -1).reshape(-1, 3)
        e1 = np.array([1.0, 0.0, 0.0])
        e2 = np.array([0.0, 1.0, 0.0])
        frames = np.broadcast_to(np.stack([e1, e2]), (len(x), 2, 3)).copy()
        return RectifiableVarifold(x, frames, area.ravel(), np.zeros(len(x)))
    if kind == "cone":
        if not 0 < beta < math.pi / 2:
            raise VarifoldError(f"cone half-angle must lie in (0, pi/2), got {beta}")
        edges = np.linspace(0.0, extent, nr + 1)
        pe = np.linspace(0.0, 2 * np.pi, nphi + 1)
        u, w = jitter((nr, nphi)), jitter((nr, nphi))
        r0, r1 = edges[:-1, None], edges[1:, None]
        rho = np.sqrt(r0**2 + u * (r1**2 - r0**2))
        phi = pe[:-1][None, :] + w * (2 * np.pi / nphi)
        area = 0.5 * (r1**2 - r0**2) * math.sin(beta) * (2 * np.pi / nphi) * np.ones_like(rho)
        sb, cb = math.sin(beta), math.cos(beta)
        radial = np.stack([sb * np.cos(phi), sb * np.sin(phi), cb * np.ones_like(phi)], -1)
        circ = np.stack([-np.sin(phi), np.cos(phi), np.zeros_like(phi)], -1)
        x = (rho[..., None] * radial).reshape(-1, 3)
        frames = np.stack([radial.reshape(-1, 3), circ.reshape(-1, 3)], axis=1)
        return RectifiableVarifold(x, frames, area.ravel(), np.zeros(len(x)))
    if kind == "sphere":
        ze = np.linspace(-1.0, 1.0, nr + 1)
        pe = np.linspace(0.0, 2 * np.pi, nphi + 1)
        u, w = jitter((nr, nphi)), jitter((nr, nphi))
        z = ze[:-1, None] + u * (2.0 / nr)
        phi = pe[:-1][None, :] + w * (2 * np.pi / nphi)
        # Archimedes: area is uniform in z
        area = (2.0 / nr) * (2 * np.pi / nphi) * np.ones_like(z)
        s = np.sqrt(np.clip(1 - z**2, 0.0, None))
        x = np.stack([s * np.cos(phi), s * np.sin(phi), z], -1).reshape(-1, 3)
        e_phi = np.stack([-np.sin(phi), np.cos(phi), np.zeros_like(phi)], -1).reshape(-1, 3)
        e_th = np.cross(e_phi, x)
        e_th /= np.linalg.norm(e_th, axis=1)[:, None]
        frames = np.stack([e_phi, e_th], axis=1)
        # unit sphere: H = -2 x, so <H, x> = -2
        return RectifiableVarifold(x, frames, area.ravel(), np.full(len(x), -2.0))
    raise VarifoldError(f"unknown synthetic kind {kind!r}; expected one of {SYNTHETIC_KINDS}")


def mass_in_ball(T: RectifiableVarifold, t: float) -> float:
    """Total weight of atoms with |x| < t."""
    return float(T.weights[T.radii < t].sum())


def density_ratio(T: RectifiableVarifold, t: float) -> float:
    if not t > 0:
        raise VarifoldError("radius must be positive")
    return mass_in_ball(T, t) / t**T.n


def _annulus(T: RectifiableVarifold, s: float, t: float) -> np.ndarray:
    r = T.radii
    return (r >= s) & (r < t)


def transverse_energy(T: RectifiableVarifold, s: float, t: float) -> float:
    """Sum over s <= |x| < t of w |P x|^2 / |x|^(n+2)."""
    sel = _annulus(T, s, t)
    r = T.radii[sel]
    return float(np.sum(T.weights[sel] * T.transverse_sq()[sel] / r ** (T.n + 2)))


def monotonicity_check(T: RectifiableVarifold, s: float, t: float) -> float:
    """[ratio(t) - ratio(s)] minus the transverse energy of the annulus;
    nonnegative when the generating surface has <H, x> >= 0."""
    if not 0 < s < t:
        raise VarifoldError(f"need 0 < s < t, got s={s}, t={t}")
    return density_ratio(T, t) - density_ratio(T, s) - transverse_energy(T, s, t)


def hypothesis_holds(T: RectifiableVarifold, t: float, tol: float = 1e-6) -> bool | None:
    """Whether <H, x> >= -tol on atoms inside B_t; None when unknown."""
    if T.hx is None:
        return None
    sel = T.radii < t
    return bool(np.all(T.hx[sel] >= -tol))


def cone_deviation(T: RectifiableVarifold, s: float, t: float) -> float:
    """Mass-averaged |P x|^2 / |x|^2 over the annulus s <= |x| < t."""
    sel = _annulus(T, s, t)
    w = T.weights[sel]
    if not len(w):
        raise VarifoldError(f"annulus [{s}, {t}) carries no mass")
    return float(np.sum(w * T.transverse_sq()[sel] / T.radii[sel] ** 2) / w.sum())


def rescale(T: RectifiableVarifold, lam: float) -> RectifiableVarifold:
    """Push-forward under x -> lam x: weights scale by lam^n."""
    if not lam > 0:
        raise VarifoldError("scale must be positive")
    return replace(T, positions=lam * T.positions, weights=T.weights * lam**T.n)


def fit_rays(T: RectifiableVarifold, s: float, t: float, merge: float = 0.05) -> list[float]:
    """Mass-weighted circular means of clusters of atom directions x/|x| in
    the annulus (planar varifolds only); clusters are split where the
    angular gap exceeds ``merge``."""
    if T.ambient_dim != 2:
        raise VarifoldError("ray fitting is defined for varifolds in the plane")
    sel = _annulus(T, s, t)
    if not sel.any():
        raise VarifoldError("annulus carries no mass")
    ang = np.mod(np.arctan2(T.positions[sel, 1], T.positions[sel, 0]), 2 * np.pi)
    w = T.weights[sel]
    order = np.argsort(ang)
    ang, w = ang[order], w[order]
    gap_before = ang - np.roll(ang, 1)
    gap_before[0] += 2 * np.pi
    starts = gap_before > merge
    if not starts.any():
        return [float(np.mod(np.angle(np.sum(w * np.exp(1j * ang))), 2 * np.pi))]
    walk = np.roll(np.arange(len(ang)), -int(np.argmax(starts)))
    label = np.cumsum(starts[walk]) - 1
    rays = []
    for c in range(label[-1] + 1):
        k = walk[label == c]
        rays.append(float(np.mod(np.angle(np.sum(w[k] * np.exp(1j * ang[k]))), 2 * np.pi)))
    return sorted(rays)


@dataclass
class ConeReport:
    scale: float
    annulus: tuple[float, float]
    ratio_s: float
    ratio_t: float
    slack: float
    deviation: float
    is_cone: bool
    hypothesis_ok: bool | None
    rays: list[float] = field(default_factory=list)


def cone_report(T: RectifiableVarifold, s: float = 1.0, t: float = 2.0, tol_cone: float = 1e-3,
                merge: float = 0.05, scale: float = 1.0) -> ConeReport:
    ratio_s, ratio_t = density_ratio(T, s), density_ratio(T, t)
    dev = cone_deviation(T, s, t)
    is_cone = dev <= tol_cone and abs(ratio_t - ratio_s) <= tol_cone * ratio_s
    rays = fit_rays(T, s, t, merge) if T.ambient_dim == 2 else []
    return ConeReport(scale, (s, t), ratio_s, ratio_t, monotonicity_check(T, s, t), dev,
                      bool(is_cone), hypothesis_holds(T, t), rays)


@dataclass
class BlowDownResult:
    reports: list[ConeReport]
    limit_rays: list[float]

    @property
    def deviations(self) -> np.ndarray:
        return np.array([r.deviation for r in self.reports])

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def flow_scales(mu: float, times) -> list[float]:
    """Dilation factors sqrt(2 mu t) realizing the expander flow slices M(t)."""
    return [math.sqrt(2.0 * mu * t) for t in times]


def blow_down_pipeline(curve: PolylineCurve, scales, annulus=(1.0, 2.0), tol_cone: float = 1e-3,
                       merge: float = 0.05) -> BlowDownResult:
    """Cone reports of lam_j (M - p0) on a fixed reference annulus for
    decreasing scales lam_j; the limit rays are fitted at the last scale."""
    scales = [float(x) for x in scales]
    if not scales or any(x <= 0 for x in scales):
        raise VarifoldError("scales must be positive")
    if any(b >= a for a, b in zip(scales[:-1], scales[1:])):
        raise VarifoldError("scales must be strictly decreasing")
    s, t = annulus
    rel = curve.vertices - curve.p0
    reach = np.linalg.norm(rel, axis=1).max() if curve.closed else np.linalg.norm(rel[[0, -1]], axis=1).min()
    if reach < t / scales[-1]:
        raise VarifoldError(
            f"insufficient extent: curve reaches {reach:.4g} but the last annulus needs {t / scales[-1]:.4g}"
        )
    split = sorted({r / lam for lam in scales for r in (s, t)})
    base = varifold_from_curve(curve, split_radii=split)
    reports = []
    for lam in scales:
        T = rescale(base, lam)
        reports.append(cone_report(T, s, t, tol_cone, merge, scale=lam))
    return BlowDownResult(reports, reports[-1].rays)
