"""Canonical JSON and CSV emission.

Reports must be byte-identical across reruns, so every float goes through
one formatter (17 significant digits) and object keys are sorted. Non-finite
floats are written as the strings ``"inf"``, ``"-inf"`` and ``"nan"`` so
that the output stays strict JSON.
"""

from __future__ import annotations

import csv
import io
import json
import math
from importlib import resources

import numpy as np


def format_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0.0:
        return "0.0"  # also folds -0.0
    s = format(x, ".17g")
    if "e" not in s and "." not in s:
        s += ".0"
    return s


def _emit(obj, indent: int, level: int, out: list) -> None:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        out.append({None: "null", True: "true", False: "false"}[None if obj is None else bool(obj)])
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        s = format_float(obj)
        out.append(s if math.isfinite(obj) else json.dumps(s))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, np.ndarray):
        _emit(obj.tolist(), indent, level, out)
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        items = sorted(obj.items())
        for i, (k, v) in enumerate(items):
            out.append(f"{pad}{json.dumps(str(k))}: ")
            _emit(v, indent, level + 1, out)
            out.append(",\n" if i < len(items) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            parts = []
            for v in obj:
                sub = []
                _emit(v, indent, level + 1, sub)
                parts.append("".join(sub))
            out.append("[" + ", ".join(parts) + "]")
            return
        out.append("[\n")
        for i, v in enumerate(obj):
            out.append(pad)
            _emit(v, indent, level + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def canonical_json(obj, indent: int = 2) -> str:
    out: list = []
    _emit(obj, indent, 0, out)
    return "".join(out) + "\n"


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def samples_csv(cloud) -> str:
    p = cloud.points.shape[1] if len(cloud) else cloud.instance.p
    header = [f"x{i + 1}" for i in range(p)] + ["fgap", "sdist", "cdist", "rnorm"]
    rows = (
        [*map(float, x), float(a), float(b), float(c), float(d)]
        for x, a, b, c, d in zip(cloud.points, cloud.fgap, cloud.sdist, cloud.cdist, cloud.rnorm)
    )
    return csv_text(header, rows)


def kl_fit_csv(cloud) -> str:
    """Two-column log-log data behind the exponent fit."""
    mask = (cloud.fgap > 1e-12) & (cloud.sdist > 0) & np.isfinite(cloud.sdist)
    lg, ls = np.log(cloud.fgap[mask]), np.log(cloud.sdist[mask])
    order = np.lexsort((ls, lg))
    return csv_text(["log_gap", "log_sdist"], zip(lg[order], ls[order]))


def solver_csv(record) -> str:
    return csv_text(["k", "dist", "rnorm"],
                    ((k, float(d), float(r)) for k, (d, r) in enumerate(zip(record.distances, record.residuals))))


def trajectory_csv(traj) -> str:
    p = traj.states.shape[1]
    steps = np.concatenate([[0.0], traj.step_norms])
    header = ["k"] + [f"x{i + 1}" for i in range(p)] + ["f", "step_norm"]
    rows = ([k, *map(float, x), float(f), float(s)] for k, (x, f, s) in enumerate(zip(traj.states, traj.values, steps)))
    return csv_text(header, rows)


def load_schema() -> dict:
    return json.loads(resources.files("regmod").joinpath("data", "report.schema.json").read_text())
