"""Declarative scenarios: build a curve or varifold from a JSON config, run
one kind of check, and write a JSON report, CSV tables and a text summary.

Exit codes: 0 every verdict holds, 1 a claim failed although its hypotheses
held, 2 bad input or config, 3 a hypothesis was unmet somewhere.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .ballcalc import WEIGHTING_NOTE, build_radial_profile
from .curveio import read_curve, write_curve
from .expanders import (
    BracketError,
    ExpanderShootingProblem,
    StepRejected,
    asymptotic_angle,
    integrate_expander,
    make_fixture,
    shoot_for_cone_angle,
)
from .flow import ExactTrajectory, FlowError, FlowState, normalized_flow_residual, run_flow, window_hausdorff
from .geometry import DegenerateEdgeError, PolylineCurve, default_defect_tolerance, expander_defect, growth_condition_estimate
from .monotonicity import (
    default_slack_tolerance,
    mean_value_bound,
    verify_corollary22,
    verify_theorem13,
)
from .varifold import (
    blow_down_pipeline,
    cone_deviation,
    density_ratio,
    flow_scales,
    hypothesis_holds,
    monotonicity_check,
    sample_synthetic,
    transverse_energy,
    varifold_from_curve,
)

log = logging.getLogger(__name__)

SCENARIO_KINDS = (
    "gen-expander",
    "verify-thm13",
    "verify-cor22",
    "verify-cor23",
    "flow",
    "blow-down",
    "varifold-check",
)
EXIT_OK, EXIT_VIOLATED, EXIT_INPUT, EXIT_HYPOTHESIS = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def combine_exit_codes(codes) -> int:
    codes = set(codes)
    for c in (EXIT_INPUT, EXIT_VIOLATED, EXIT_HYPOTHESIS):
        if c in codes:
            return c
    return EXIT_OK


def validate(config: dict) -> dict:
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object")
    kind = config.get("scenario")
    if kind not in SCENARIO_KINDS:
        raise ConfigError(f"unknown scenario kind {kind!r}; expected one of {SCENARIO_KINDS}")
    for name, tol in (config.get("tolerances") or {}).items():
        if tol is not None and not (isinstance(tol, (int, float)) and tol > 0):
            raise ConfigError(f"tolerance {name!r} must be positive")
    for key in ("grid", "scales"):
        if key in config:
            g = np.asarray(config[key], dtype=float)
            if g.ndim != 1 or len(g) < 2:
                raise ConfigError(f"{key} needs at least two entries")
            diffs = np.diff(g) if key == "grid" else -np.diff(g)
            if np.any(diffs <= 0) or np.any(g <= 0):
                raise ConfigError(f"{key} must be positive and strictly monotone")
    seed = config.get("seed", 0)
    if seed is not None and not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    return config


def _tol(config: dict, name: str, default=None):
    val = (config.get("tolerances") or {}).get(name, default)
    if val is None:
        return None
    return float(val) * float(config.get("tol_scale", 1.0))


def build_curve(config: dict, base: Path | None = None) -> PolylineCurve:
    """Curve from ``input`` (CSV path), ``expander`` or ``fixture``; top-level
    ``mu`` and ``p0`` override."""
    if "input" in config:
        path = Path(config["input"])
        if base is not None and not path.is_absolute():
            path = base / path
        curve = read_curve(path)
    elif "expander" in config:
        e = dict(config["expander"])
        if "target_angle" in e:
            res = shoot_for_cone_angle(
                e["mu"], e["target_angle"], tuple(e.get("bracket", (0.5, 2.0))),
                ds=e.get("shoot_ds", 1e-2), atol=e.get("atol", 1e-6),
            )
            e["b"] = res.b
        curve = integrate_expander(
            ExpanderShootingProblem(e["mu"], e["b"], e.get("ds", 1e-3), e.get("s_max", 20.0))
        )
    elif "fixture" in config:
        fx = dict(config["fixture"])
        kind = fx.pop("kind")
        if "center" in fx:
            fx["center"] = tuple(fx["center"])
        curve = make_fixture(kind, **fx)
    else:
        raise ConfigError("config needs one of 'input', 'expander' or 'fixture'")
    changes = {}
    if "mu" in config:
        changes["mu"] = float(config["mu"])
    if "p0" in config:
        changes["p0"] = np.asarray(config["p0"], float)
    return curve.with_vertices(curve.vertices, **changes) if changes else curve


def build_field(config: dict, curve: PolylineCurve) -> np.ndarray:
    choice = config.get("field", "one")
    r2 = np.sum((curve.vertices - curve.p0) ** 2, axis=1)
    named = {"one": np.ones(curve.n_vertices), "r2": r2, "one_plus_r2": 1.0 + r2}
    if isinstance(choice, str) and choice in named:
        return named[choice]
    if isinstance(choice, list):
        return np.asarray(choice, dtype=float)
    raise ConfigError(f"unknown field {choice!r}; use one of {sorted(named)} or an explicit list")


def _verdict_code(verdict: str) -> int:
    return {"violated": EXIT_VIOLATED, "hypothesis_unmet": EXIT_HYPOTHESIS}.get(verdict, EXIT_OK)


def _run_gen_expander(config, out: Path, base):
    curve = build_curve(config, base)
    write_curve(out / "curve.csv", curve)
    theta, unc = asymptotic_angle(curve)
    d = expander_defect(curve)
    result = {
        "n_vertices": curve.n_vertices,
        "mu": curve.mu,
        "b": float(curve.vertices[curve.n_vertices // 2, 1]),
        "theta_inf": theta,
        "theta_uncertainty": unc,
        "defect_max_abs": float(np.nanmax(np.abs(d))),
        "normalized_flow_residual": normalized_flow_residual(curve) if curve.mu == 1.0 else None,
        "growth_c_half": growth_condition_estimate(curve, 0.5),
    }
    return result, EXIT_OK, {}


def _run_verify(config, out: Path, base):
    curve = build_curve(config, base)
    kind = config["scenario"]
    grid = config.get("grid", [1.0, 1.5, 2.0])
    tol_defect = _tol(config, "defect") or default_defect_tolerance(curve) * float(config.get("tol_scale", 1.0))
    if kind == "verify-cor22":
        R0 = float(config.get("R0", grid[-1]))
        rep = verify_corollary22(
            curve, build_field(config, curve), float(config.get("lambda", 0.0)), R0,
            tol=_tol(config, "slack", 1e-10), grid=grid, tol_defect=tol_defect,
        )
        if config.get("mean_value"):
            mv = mean_value_bound(curve, build_field(config, curve), R0, float(config.get("lambda", 0.0)))
            rep.extra["mean_value_bound"] = asdict(mv)
    else:
        fn_kwargs = dict(tol_defect=tol_defect, subnodes=int(config.get("subnodes", 65)))
        tol_slack = _tol(config, "slack")
        if tol_slack is None:
            tol_slack = default_slack_tolerance(curve, np.asarray(grid, float)) * float(config.get("tol_scale", 1.0))
        tol_eq = _tol(config, "eq") or tol_slack
        if kind == "verify-cor23":
            rep = verify_theorem13(curve, 1.0, grid, tol_slack, tol_eq, claim="cor23", **fn_kwargs)
        else:
            rep = verify_theorem13(curve, build_field(config, curve), grid, tol_slack, tol_eq, **fn_kwargs)
        profile = build_radial_profile(curve, build_field(config, curve) if kind == "verify-thm13" else 1.0, grid=grid)
        (out / "profile.csv").write_text(profile.to_csv())
    (out / "annuli.csv").write_text(rep.to_csv())
    return rep.to_dict(), _verdict_code(rep.verdict), {"slack": rep}


def _run_flow(config, out: Path, base):
    curve = build_curve(config, base)
    fl = dict(config.get("flow") or {})
    boundary = fl.get("boundary", "pinned_exact" if "expander" in config else "pinned_fixed")
    t0 = float(fl.get("t0", 0.5 / curve.mu if curve.mu > 0 else 0.0))
    t1 = float(fl.get("t1", 2 * t0 if t0 > 0 else 0.1))
    cfl = float(fl.get("cfl", 0.2))
    trajectory = None
    reference = None
    if boundary == "pinned_exact" or curve.mu > 0:
        if curve.mu > 0 and t0 > 0:
            trajectory = ExactTrajectory(curve, curve.mu)
            curve = trajectory.at(t0)
            reference = trajectory
    dt = float(fl.get("dt", cfl * float(curve.edge_lengths.min()) ** 2))
    state = FlowState(curve, t0, dt, boundary, trajectory=trajectory)
    every = fl.get("snapshot_every")
    run = run_flow(state, t1, snapshot_every=int(every) if every else None)
    series = []
    snap_dir = out / "snapshots"
    for k, (t, c) in enumerate(run.snapshots):
        write_curve(snap_dir / f"snap_{k:04d}.csv", c, t=t)
        if reference is not None:
            series.append((t, window_hausdorff(c, reference.at(t))))
    final_err = window_hausdorff(run.final.curve, reference.at(t1)) if reference is not None else None
    write_curve(out / "final.csv", run.final.curve, t=run.final.t)
    result = {"t0": t0, "t1": t1, "dt": dt, "steps": run.steps, "boundary": boundary, "hausdorff_final": final_err}
    code = EXIT_OK
    tol = _tol(config, "flow")
    if tol is not None and final_err is not None and final_err > tol:
        code = EXIT_VIOLATED
    return result, code, {"hausdorff": series}


def _run_blow_down(config, out: Path, base):
    curve = build_curve(config, base)
    if "times" in config:
        scales = flow_scales(curve.mu, config["times"])
    else:
        scales = config.get("scales", [2.0**-j for j in range(7)])
    res = blow_down_pipeline(curve, scales, tuple(config.get("annulus", (1.0, 2.0))),
                             tol_cone=_tol(config, "cone", 1e-3), merge=float(config.get("merge", 0.05)))
    tol = _tol(config, "slack", 1e-6)
    code = EXIT_OK
    if any(r.hypothesis_ok is False for r in res.reports):
        code = EXIT_HYPOTHESIS
    elif any(r.slack < -tol for r in res.reports):
        code = EXIT_VIOLATED
    result = json.loads(res.to_json())
    try:
        result["theta_inf"] = list(asymptotic_angle(curve))
    except ValueError:
        pass
    return result, code, {"deviation": [(r.scale, r.deviation) for r in res.reports]}


def _run_varifold_check(config, out: Path, base):
    vc = dict(config.get("varifold") or {})
    s, t = float(vc.get("s", 1.0)), float(vc.get("t", 2.0))
    if "synthetic" in vc:
        T = sample_synthetic(vc["synthetic"], seed=config.get("seed", 0),
                             **{k: vc[k] for k in ("resolution", "radius", "beta", "extent") if k in vc})
    else:
        curve = build_curve(config, base)
        T = varifold_from_curve(curve, split_radii=(s, t))
    (out / "varifold.csv").write_text(T.to_csv())
    slack = monotonicity_check(T, s, t)
    hyp = hypothesis_holds(T, t)
    result = {
        "s": s, "t": t, "n": T.n, "ambient_dim": T.ambient_dim, "mass": T.mass,
        "ratio_s": density_ratio(T, s), "ratio_t": density_ratio(T, t),
        "transverse": transverse_energy(T, s, t), "slack": slack, "hypothesis_ok": hyp,
    }
    try:
        result["cone_deviation"] = cone_deviation(T, s, t)
    except ValueError:
        result["cone_deviation"] = None
    tol = _tol(config, "slack", 1e-6)
    if hyp is False:
        code = EXIT_HYPOTHESIS
        if slack < 0:
            result["warning"] = "negative monotonicity slack on a varifold whose generating surface has <H, x> < 0"
    else:
        code = EXIT_VIOLATED if slack < -tol else EXIT_OK
    return result, code, {}


RUNNERS = {
    "gen-expander": _run_gen_expander,
    "verify-thm13": _run_verify,
    "verify-cor22": _run_verify,
    "verify-cor23": _run_verify,
    "flow": _run_flow,
    "blow-down": _run_blow_down,
    "varifold-check": _run_varifold_check,
}


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])


def emit_plots(report: dict, out_dir) -> list[Path]:
    """CSV series for external plotting: R vs slack, lambda vs deviation, t vs
    Hausdorff error. Series absent from the report produce header-only files
    for the scenario kind's expected series."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = report.get("result") or {}
    kind = report.get("scenario", "")
    written = []
    if kind.startswith("verify") or "rows" in result:
        rows = [(r["R1"], r["R2"], r["slack"]) for r in result.get("rows", [])]
        p = out_dir / "series_slack.csv"
        _write_csv(p, ["R1", "R2", "slack"], rows)
        written.append(p)
    if kind == "blow-down" or "reports" in result:
        rows = [(r["scale"], r["deviation"]) for r in result.get("reports", [])]
        p = out_dir / "series_deviation.csv"
        _write_csv(p, ["lambda", "deviation"], rows)
        written.append(p)
    if kind == "flow":
        rows = report.get("series", {}).get("hausdorff", [])
        p = out_dir / "series_hausdorff.csv"
        _write_csv(p, ["t", "hausdorff"], rows)
        written.append(p)
    return written


def _summary(report: dict) -> str:
    res = report.get("result") or {}
    lines = [
        f"scenario: {report['scenario']}",
        f"config_hash: {report['config_hash']}",
        f"exit_code: {report['exit_code']}",
    ]
    if "verdict" in res:
        lines.append(f"verdict: {res['verdict']}  worst_slack: {res['worst_slack']:.6e}")
    if report.get("error"):
        lines.append(f"error: {report['error']}")
    return "\n".join(lines) + "\n"


def run_single(config: dict, out_dir, base: Path | None = None) -> int:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = {"config": config, "config_hash": config_hash(config), "weighting_note": WEIGHTING_NOTE}
    try:
        validate(config)
        report["scenario"] = config["scenario"]
        report["tolerances"] = dict(config.get("tolerances") or {}, tol_scale=config.get("tol_scale", 1.0))
        result, code, series = RUNNERS[config["scenario"]](config, out, base)
        report["result"] = result
        report["series"] = {k: v for k, v in series.items() if k == "hausdorff"}
    except (ConfigError, ValueError, KeyError, TypeError, OSError, StepRejected, BracketError,
            DegenerateEdgeError, FlowError) as exc:
        log.error("scenario failed: %s", exc)
        report.setdefault("scenario", str(config.get("scenario")) if isinstance(config, dict) else "?")
        report["error"] = f"{type(exc).__name__}: {exc}"
        code = EXIT_INPUT
    report["exit_code"] = code
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True, default=_jsonable) + "\n")
    (out / "summary.txt").write_text(_summary(report))
    if code != EXIT_INPUT:
        emit_plots(report, out)
    return code


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, float) and math.isnan(o):
        return None
    raise TypeError(f"not JSON serializable: {type(o)}")


def run(config: dict, out_dir, threads: int = 1, base: Path | None = None) -> int:
    """Run one scenario, or a batch under ``{"scenarios": [...]}`` with one
    subdirectory per entry (named by its ``name`` key or index)."""
    if isinstance(config, dict) and "scenarios" in config:
        entries = config["scenarios"]
        if not isinstance(entries, list) or not entries:
            Path(out_dir).mkdir(parents=True, exist_ok=True)
            return EXIT_INPUT
        shared = {k: v for k, v in config.items() if k != "scenarios"}
        jobs = []
        for i, entry in enumerate(entries):
            cfg = dict(shared, **entry)
            name = str(cfg.pop("name", f"{i:03d}_{cfg.get('scenario', 'scenario')}"))
            jobs.append((cfg, Path(out_dir) / name))
        with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
            codes = list(pool.map(lambda job: run_single(job[0], job[1], base), jobs))
        return combine_exit_codes(codes)
    return run_single(config, out_dir, base)
