"""Curve exchange: CSV with header ``x,y`` plus a JSON sidecar holding
``closed``, ``p0`` and ``mu`` (and ``t`` for flow snapshots)."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .geometry import PolylineCurve


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def write_curve(path, curve: PolylineCurve, **extra) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y"])
        for x, y in curve.vertices:
            w.writerow([repr(float(x)), repr(float(y))])
    meta = {"closed": curve.closed, "p0": [float(v) for v in curve.p0], "mu": curve.mu}
    if curve.corners:
        meta["corners"] = list(curve.corners)
    meta.update(extra)
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def read_curve(path) -> PolylineCurve:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0]] != ["x", "y"]:
        raise ValueError(f"{path}: expected a CSV header 'x,y'")
    v = np.array([[float(a), float(b)] for a, b in rows[1:]])
    meta = {}
    side = sidecar_path(path)
    if side.exists():
        meta = json.loads(side.read_text())
    return PolylineCurve(
        v,
        closed=bool(meta.get("closed", False)),
        p0=meta.get("p0", (0.0, 0.0)),
        mu=float(meta.get("mu", 0.0)),
        corners=tuple(meta.get("corners", ())),
    )
