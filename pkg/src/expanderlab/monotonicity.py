"""Radius-grid verification of the mean value inequality and its two
monotonicity corollaries.

Everything is checked in integrated form between consecutive grid radii
R1 < R2, so each annulus row carries

    lhs   = Theta_f(R2) - Theta_f(R1),           Theta_f = F / R^n
    term1 = int_{annulus} f |x^perp|^2 / |x - p0|^(n+2)
    term2 = int_{R1}^{R2} (2 R^(n+1))^-1 int_{B_R} (R^2 - |x - p0|^2) lap f  dR
    term3 = int_{R1}^{R2} mu R^-(n+1) int_{B_R} |x^perp|^2 f  dR

and slack = lhs - (term1 + term2 + term3). In the continuum the slack equals
int_{R1}^{R2} R^-(n+1) int_{B_R} (<H, x - p0> - mu |x^perp|^2) f dR, which is
reported alongside as ``defect_term``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .ballcalc import WEIGHTING_NOTE, BallIntegrator, _check_grid, clip_to_ball, radial_quadrature
from .geometry import PolylineCurve, default_defect_tolerance, expander_defect, field_on

VERDICTS = ("holds", "equality", "violated", "hypothesis_unmet")
DEFAULT_SLACK_CONSTANT = 0.1
COR22_NOTE = (
    "The corollary's statement (monotonicity of g) is verified directly; intermediate "
    "steps of its derivation are not."
)


class VerificationError(ValueError):
    pass


@dataclass
class AnnulusRow:
    R1: float
    R2: float
    lhs: float
    term1: float
    term2: float
    term3: float
    slack: float
    defect_term: float = 0.0


@dataclass
class VerificationReport:
    claim: str
    radii: list[float]
    rows: list[AnnulusRow]
    hypothesis: dict
    tol_slack: float
    tol_eq: float
    worst_slack: float
    verdict: str
    notes: list[str] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def slacks(self) -> np.ndarray:
        return np.array([r.slack for r in self.rows])

    @property
    def hypothesis_ok(self) -> bool:
        return bool(self.hypothesis.get("satisfied", True))

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_json_default)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["R1", "R2", "lhs", "term1", "term2", "term3", "slack"])
        for r in self.rows:
            w.writerow([repr(float(v)) for v in (r.R1, r.R2, r.lhs, r.term1, r.term2, r.term3, r.slack)])
        return buf.getvalue()


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o)}")


def decide_verdict(slacks, hypothesis_ok: bool, tol_slack: float, tol_eq: float) -> str:
    slacks = np.asarray(slacks, dtype=float)
    if not hypothesis_ok:
        return "hypothesis_unmet"
    if len(slacks) and slacks.min() < -tol_slack:
        return "violated"
    if np.all(np.abs(slacks) <= tol_eq):
        return "equality"
    return "holds"


def _mesh_size(curve: PolylineCurve, p0, R: float) -> float:
    start = curve.edge_starts
    near = np.linalg.norm(start - p0, axis=1) <= R + curve.edge_lengths
    lengths = curve.edge_lengths[near]
    return float(lengths.max()) if len(lengths) else float(curve.edge_lengths.max())


def default_slack_tolerance(curve: PolylineCurve, grid) -> float:
    """C (h + grid_step h), h the largest edge meeting the outer ball."""
    h = _mesh_size(curve, curve.p0, grid[-1])
    step = float(np.max(np.diff(grid))) if len(grid) > 1 else 0.0
    return DEFAULT_SLACK_CONSTANT * (h + step * h)


def defect_hypothesis(curve: PolylineCurve, tol_defect: float | None = None) -> dict:
    tol = default_defect_tolerance(curve) if tol_defect is None else tol_defect
    d = expander_defect(curve)
    dmin = float(np.nanmin(d)) if np.any(np.isfinite(d)) else 0.0
    return {"defect_min": dmin, "tol_defect": tol, "expander_type": dmin >= -tol}


def verify_theorem13(
    curve: PolylineCurve,
    values=1.0,
    grid=(1.0, 2.0),
    tol_slack: float | None = None,
    tol_eq: float | None = None,
    *,
    tol_defect: float | None = None,
    subnodes: int = 65,
    claim: str = "thm13",
) -> VerificationReport:
    """Check the mean value inequality on every annulus of ``grid``.

    A failed hypothesis never aborts the computation; it only changes the
    verdict to ``hypothesis_unmet``.
    """
    grid = _check_grid(grid)
    if len(grid) < 2:
        raise VerificationError("the grid needs at least two radii")
    n = 1
    p0, mu = curve.p0, curve.mu
    tol_slack = default_slack_tolerance(curve, grid) if tol_slack is None else tol_slack
    tol_eq = tol_slack if tol_eq is None else tol_eq

    bi = BallIntegrator(curve, values)
    defect = np.nan_to_num(expander_defect(curve), nan=0.0)
    data = dict(bi.data, d=defect)

    def terms(R):
        s = clip_to_ball(curve, p0, R, data)
        r2 = np.sum((s.midpoint - p0) ** 2, axis=1)
        f = s.data["f"]
        L = np.sum((R * R - r2) * s.data["lap_f"] * s.length)
        A = np.sum(s.data["perp_sq"] * f * s.length)
        D = np.sum(s.data["d"] * f * s.length)
        return np.array([L / (2 * R ** (n + 1)), mu * A / R ** (n + 1), D / R ** (n + 1)])

    theta = np.array([bi.F(R) for R in grid]) / grid**n
    eps = 1e-8 * grid[-1]
    rows, dropped = [], 0.0
    for k, (R1, R2) in enumerate(zip(grid[:-1], grid[1:])):
        w, dl = bi.W(R1, R2, n=n, eps=eps)
        dropped += dl
        nodes, weights = radial_quadrature(R1, R2, bi.events, subnodes)
        t2, t3, dt = sum(wt * terms(R) for R, wt in zip(nodes, weights))
        lhs = theta[k + 1] - theta[k]
        slack = lhs - (w + t2 + t3)
        rows.append(AnnulusRow(float(R1), float(R2), float(lhs), w, float(t2), float(t3), float(slack), float(dt)))

    hyp = defect_hypothesis(curve, tol_defect)
    hyp["satisfied"] = bool(hyp["expander_type"])
    slacks = [r.slack for r in rows]
    verdict = decide_verdict(slacks, hyp["satisfied"], tol_slack, tol_eq)
    return VerificationReport(
        claim=claim,
        radii=[float(R) for R in grid],
        rows=rows,
        hypothesis=hyp,
        tol_slack=float(tol_slack),
        tol_eq=float(tol_eq),
        worst_slack=float(min(slacks)),
        verdict=verdict,
        notes=[WEIGHTING_NOTE],
        extra={"dropped_length": dropped, "mu": mu, "p0": [float(v) for v in p0], "subnodes": subnodes},
    )


def verify_corollary23(curve: PolylineCurve, grid=(1.0, 2.0), tol: float | None = None, **kwargs) -> VerificationReport:
    """Density-ratio monotonicity: the f = 1 case (the Laplacian term is 0)."""
    return verify_theorem13(curve, 1.0, grid, tol, tol, claim="cor23", **kwargs)


def verify_corollary22(
    curve: PolylineCurve,
    values=1.0,
    lambda_: float = 0.0,
    R0: float = 1.0,
    tol: float = 1e-10,
    grid=None,
    *,
    tol_defect: float | None = None,
    tol_laplacian: float = 1e-9,
) -> VerificationReport:
    """Monotonicity of g(R) = exp(lambda R / (2 R0)) F(R) / R^n on (0, R0]."""
    if not R0 > 0:
        raise VerificationError("R0 must be positive")
    if not lambda_ >= 0:
        raise VerificationError("lambda must be nonnegative")
    grid = np.linspace(R0 / 20, R0, 20) if grid is None else _check_grid(grid)
    if len(grid) < 2:
        raise VerificationError("the grid needs at least two radii")
    if grid[-1] > R0 * (1 + 1e-12):
        raise VerificationError(f"grid exceeds R0={R0}")
    n = 1
    bi = BallIntegrator(curve, values)
    f = bi.f
    lap = bi.data["lap_f"]
    inside = (np.linalg.norm(curve.vertices - curve.p0, axis=1) < R0) & curve.smooth_mask
    bound = -(lambda_ + 2 * curve.mu * bi.data["perp_sq"]) * f / R0**2
    margin = lap - bound
    lap_min = float(margin[inside].min()) if inside.any() else 0.0
    scale = float(np.max(np.abs(bound[inside]), initial=0.0)) + 1.0
    lap_ok = lap_min >= -tol_laplacian * scale

    hyp = defect_hypothesis(curve, tol_defect)
    hyp.update(laplacian_margin_min=lap_min, laplacian_condition=bool(lap_ok))
    hyp["satisfied"] = bool(hyp["expander_type"] and lap_ok)

    g = np.array([math.exp(lambda_ * R / (2 * R0)) * bi.F(R) / R**n for R in grid])
    rows = [
        AnnulusRow(float(R1), float(R2), float(g2 - g1), 0.0, 0.0, 0.0, float(g2 - g1))
        for R1, R2, g1, g2 in zip(grid[:-1], grid[1:], g[:-1], g[1:])
    ]
    slacks = [r.slack for r in rows]
    return VerificationReport(
        claim="cor22",
        radii=[float(R) for R in grid],
        rows=rows,
        hypothesis=hyp,
        tol_slack=float(tol),
        tol_eq=float(tol),
        worst_slack=float(min(slacks)),
        verdict=decide_verdict(slacks, hyp["satisfied"], tol, tol),
        notes=[COR22_NOTE],
        extra={"g": g.tolist(), "lambda": lambda_, "R0": R0, "nondecreasing": bool(min(slacks) >= -tol)},
    )


@dataclass(frozen=True)
class MeanValueBound:
    bound: float
    f_at_p0: float
    satisfied: bool


def mean_value_bound(
    curve: PolylineCurve, values, R0: float, lambda_: float = 0.0, tol: float = 1e-12
) -> MeanValueBound:
    """f(p0) <= exp(lambda/2) F(R0) / (omega_n R0^n), omega_1 = 2, for p0 on
    the curve."""
    if not R0 > 0:
        raise VerificationError("R0 must be positive")
    f = field_on(curve, values)
    dist = np.linalg.norm(curve.vertices - curve.p0, axis=1)
    i = int(np.argmin(dist))
    if dist[i] > 1e-8 * R0:
        raise VerificationError(f"p0 is not on the curve (nearest vertex at distance {dist[i]:.3e})")
    omega_1 = 2.0
    F = BallIntegrator(curve, f).F(R0)
    bound = math.exp(lambda_ / 2) * F / (omega_1 * R0)
    return MeanValueBound(float(bound), float(f[i]), bool(f[i] <= bound + tol))
