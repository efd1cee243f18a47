"""Command line front end for the scenario runner.

Every subcommand builds a scenario config, from ``--config`` when given,
with command-line flags layered on top, and hands it to ``scenarios.run``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import scenarios
from .scenarios import EXIT_INPUT, emit_plots


def _parse_floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON scenario config (single or batch)")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--threads", type=int, default=1, help="worker threads for batch configs")
    common.add_argument("--tol-scale", type=float, default=None, help="multiply every tolerance by FACTOR")
    common.add_argument("-v", "--verbose", action="store_true")

    curve = argparse.ArgumentParser(add_help=False)
    curve.add_argument("--input", help="curve CSV (x,y) with optional JSON sidecar")
    curve.add_argument("--fixture", help="fixture kind, e.g. offset_line or circle")
    curve.add_argument("--mu", type=float)
    curve.add_argument("--b", type=float, help="expander height at s = 0")
    curve.add_argument("--ds", type=float)
    curve.add_argument("--s-max", type=float)

    p = argparse.ArgumentParser(prog="expanderlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-expander", parents=[common, curve], help="shoot and write an expander curve")
    g.add_argument("--target-angle", type=float, help="shoot for this asymptotic angle instead of --b")

    v = sub.add_parser("verify", parents=[common, curve], help="check a monotonicity claim on a radius grid")
    v.add_argument("--claim", choices=("thm13", "cor22", "cor23"), default="thm13")
    v.add_argument("--grid", type=_parse_floats, help="comma-separated radii")
    v.add_argument("--field", help="one, r2 or one_plus_r2")
    v.add_argument("--lambda", dest="lambda_", type=float)
    v.add_argument("--R0", type=float)

    f = sub.add_parser("flow", parents=[common, curve], help="explicit mean curvature flow")
    f.add_argument("--t0", type=float)
    f.add_argument("--t1", type=float)
    f.add_argument("--dt", type=float)
    f.add_argument("--cfl", type=float)
    f.add_argument("--boundary", choices=("pinned_exact", "pinned_fixed"))
    f.add_argument("--snapshot-every", type=int)

    b = sub.add_parser("blow-down", parents=[common, curve], help="cone deviation under rescaling")
    b.add_argument("--scales", type=_parse_floats)

    vc = sub.add_parser("varifold-check", parents=[common, curve], help="varifold density monotonicity")
    vc.add_argument("--synthetic", choices=("plane", "cone", "sphere"))
    vc.add_argument("--annulus", type=_parse_floats, help="s,t")
    vc.add_argument("--seed", type=int)

    r = sub.add_parser("report", parents=[common], help="re-emit CSV series and summary from a report.json")
    r.add_argument("report", type=Path, help="report.json written by an earlier run")
    return p


def _load_config(path: Path | None) -> dict:
    if path is None:
        return {}
    return json.loads(path.read_text())


def config_from_args(args) -> dict:
    cfg = _load_config(args.config)
    if "scenarios" in cfg:
        if args.tol_scale is not None:
            cfg["tol_scale"] = args.tol_scale
        return cfg
    kind = {
        "gen-expander": "gen-expander",
        "verify": f"verify-{args.claim}" if args.command == "verify" else None,
        "flow": "flow",
        "blow-down": "blow-down",
        "varifold-check": "varifold-check",
    }[args.command]
    cfg.setdefault("scenario", kind)
    if args.input:
        cfg["input"] = str(Path(args.input).resolve())
    if args.fixture:
        cfg["fixture"] = {"kind": args.fixture}
    if args.b is not None or args.command == "gen-expander" and "expander" not in cfg and "input" not in cfg:
        e = cfg.setdefault("expander", {})
        e.setdefault("mu", args.mu if args.mu is not None else 1.0)
        e.setdefault("b", 1.0)
        if args.b is not None:
            e["b"] = args.b
    if "expander" in cfg:
        for key, val in (("ds", args.ds), ("s_max", args.s_max), ("mu", args.mu)):
            if val is not None:
                cfg["expander"][key] = val
        if getattr(args, "target_angle", None) is not None:
            cfg["expander"]["target_angle"] = args.target_angle
    elif args.mu is not None:
        cfg["mu"] = args.mu
    if args.tol_scale is not None:
        cfg["tol_scale"] = args.tol_scale
    if args.command == "verify":
        for key, val in (("grid", args.grid), ("field", args.field), ("lambda", args.lambda_), ("R0", args.R0)):
            if val is not None:
                cfg[key] = val
    elif args.command == "flow":
        fl = cfg.setdefault("flow", {})
        for key in ("t0", "t1", "dt", "cfl", "boundary", "snapshot_every"):
            val = getattr(args, key)
            if val is not None:
                fl[key] = val
    elif args.command == "blow-down" and args.scales is not None:
        cfg["scales"] = args.scales
    elif args.command == "varifold-check":
        vc = cfg.setdefault("varifold", {})
        if args.synthetic:
            vc["synthetic"] = args.synthetic
        if args.annulus:
            vc["s"], vc["t"] = args.annulus
        if args.seed is not None:
            cfg["seed"] = args.seed
    return cfg


def _report_command(args) -> int:
    report = json.loads(args.report.read_text())
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    for path in emit_plots(report, out):
        print(path)
    print(scenarios._summary(report), end="")
    return int(report.get("exit_code", 0))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "report":
            return _report_command(args)
        cfg = config_from_args(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        args.out.mkdir(parents=True, exist_ok=True)
        return EXIT_INPUT
    base = args.config.parent if args.config else None
    code = scenarios.run(cfg, args.out, threads=args.threads, base=base)
    summary = args.out / "summary.txt"
    if summary.exists():
        print(summary.read_text(), end="")
    return code


if __name__ == "__main__":
    sys.exit(main())
