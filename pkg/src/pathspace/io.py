"""Reading curve/field files and writing homotopies, reports and fields.

Curve file::

    {"manifold": "sphere:2:1" | {inline config},
     "chart": 0 | "north",            # or "charts": [per-sample ids]
     "samples": [[t, x1, ..., xn], ...]}

Field files have the same layout with vector components in place of
coordinates. Output documents are written with sorted keys and shortest
round-trip float formatting, so equal results give byte-equal files, and
they are written atomically (a temporary file renamed into place).
"""
from __future__ import annotations

import csv
import io as _io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from . import manifold as mf
from .errors import (
    ConfigError,
    DomainError,
    InputError,
    NotInOverlap,
    OutOfDomain,
    TooFewSamples,
    WrongManifold,
)
from .manifold import ManifoldSpec
from .paths import DEFAULT_N, DiscretePath, PathTangent, resample_path

FORMAT_VERSION = 1
GRID_MATCH = 1e-12


# ---------------------------------------------------------------------------
# generic helpers
# ---------------------------------------------------------------------------

def read_json(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(doc, dict):
        raise InputError(f"{path}: top level must be an object")
    return doc


def to_jsonable(obj):
    """numpy -> plain Python, with non-finite floats mapped to ``None``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(doc) -> str:
    return json.dumps(to_jsonable(doc), sort_keys=True, indent=1, allow_nan=False) + "\n"


def write_atomic(path, text: str) -> Path:
    """Write ``text`` to ``path`` via a temporary file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def manifold_source(m: ManifoldSpec):
    """A ``"manifold"`` value that :func:`pathspace.manifold.manifold_from_json` reads back."""
    kind = m.kind
    if kind == "sphere":
        return f"sphere:{m.dim}:{m.radius!r}"
    if kind in ("euclidean", "hyperbolic"):
        return f"{kind}:{m.dim}"
    if kind == "flat-torus":
        return {"builtin": {"name": "flat-torus", "dim": m.dim, "period": m.params["period"]}}
    if m.hash == mf.open_disk().hash:
        return "open-disk"
    raise ValueError(f"manifold {m.name} has no compact source; keep its config file")


def manifold_info(m: ManifoldSpec) -> dict:
    return {"name": m.name, "dim": m.dim, "hash": m.hash}


def _float(v) -> str:
    v = float(v)
    return repr(v) if math.isfinite(v) else ""


# ---------------------------------------------------------------------------
# curves and fields
# ---------------------------------------------------------------------------

def _resolve_manifold(doc: dict, where, manifold: ManifoldSpec | None) -> ManifoldSpec:
    if "manifold" in doc:
        try:
            m = mf.manifold_from_json(doc["manifold"])
        except ConfigError as exc:
            raise InputError(f"{where}: {exc}") from None
        if manifold is not None and m.hash != manifold.hash:
            raise WrongManifold(f"{where}: file is on {m.name}, expected {manifold.name}")
        return m
    if manifold is None:
        raise InputError(f"{where}: no 'manifold' given in the file or on the command line")
    return manifold


def _samples(doc: dict, where, dim: int):
    try:
        a = np.asarray(doc["samples"], float)
    except KeyError:
        raise InputError(f"{where}: missing 'samples'") from None
    except (TypeError, ValueError):
        raise InputError(f"{where}: 'samples' must be a list of numeric rows") from None
    if a.ndim != 2 or a.shape[1] != dim + 1:
        raise InputError(f"{where}: every sample needs t and {dim} components")
    if not np.all(np.isfinite(a)):
        raise InputError(f"{where}: samples must be finite")
    return a[:, 0], a[:, 1:]


def _charts(doc: dict, where, m: ManifoldSpec, k: int, default=None):
    try:
        if "charts" in doc:
            ids = [m.chart_index(c) for c in doc["charts"]]
            if len(ids) != k:
                raise InputError(f"{where}: 'charts' needs one entry per sample")
            return np.array(ids, int)
        if "chart" in doc:
            return np.full(k, m.chart_index(doc["chart"]), int)
    except ConfigError as exc:
        raise InputError(f"{where}: {exc}") from None
    if default is not None:
        return default
    return np.zeros(k, int)


def _on_grid(t, N) -> bool:
    return len(t) == N + 1 and np.max(np.abs(t - np.linspace(0.0, 1.0, N + 1))) <= GRID_MATCH


def load_curve(path, manifold: ManifoldSpec | None = None, N: int = DEFAULT_N) -> DiscretePath:
    """Read a curve file onto the uniform ``N``-grid.

    Samples already on the grid are used as they are, chart labels included
    (finite-difference derivatives); anything else is spline-resampled,
    which needs a single chart.
    """
    doc = read_json(path)
    m = _resolve_manifold(doc, path, manifold)
    t, x = _samples(doc, path, m.dim)
    charts = _charts(doc, path, m, len(t))
    try:
        if _on_grid(t, N):
            # keep the file's chart labels; they are checked, not rewritten
            return DiscretePath.from_samples(m, charts, x)
        if np.any(charts != charts[0]):
            raise InputError(f"{path}: multi-chart samples must already lie on the {N}-grid")
        return resample_path(m, x, N, int(charts[0]), t)
    except (OutOfDomain, TooFewSamples, NotInOverlap, DomainError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from None


def load_field(path, curve: DiscretePath) -> PathTangent:
    """Read a field file and express it along ``curve``.

    Components are read in the declared chart(s) (default: the curve's chart
    at each sample). Off-grid samples are spline-interpolated first.
    """
    doc = read_json(path)
    m = curve.manifold
    _resolve_manifold(doc, path, m)
    t, u = _samples(doc, path, m.dim)
    on_grid = _on_grid(t, curve.N)
    charts = _charts(doc, path, m, len(t), curve.charts.copy() if on_grid else None)
    if not on_grid:
        if np.any(charts != charts[0]):
            raise InputError(f"{path}: multi-chart fields must lie on the curve's grid")
        if len(t) < 4 or np.any(np.diff(t) <= 0) or t[0] != 0.0 or t[-1] != 1.0:
            raise InputError(f"{path}: off-grid field samples need >= 4 increasing t from 0 to 1")
        u = CubicSpline(t, u, axis=0)(curve.t)
        charts = np.full(len(curve), charts[0])
    v = np.empty_like(curve.x)
    try:
        for i, (c, y) in enumerate(zip(curve.charts, curve.x)):
            c, fc = int(c), int(charts[i])
            if fc == c:
                v[i] = u[i]
            else:
                y_f = m.to_chart(c, y, fc)
                v[i] = m.push_vector(fc, y_f, u[i], c)[1]
        return PathTangent.from_samples(curve, v)
    except (NotInOverlap, DomainError, ValueError) as exc:
        raise InputError(f"{path}: field is not along the curve: {exc}") from None


def curve_document(path: DiscretePath, source=None) -> dict:
    """Curve-file structure for ``path`` (grid samples, per-sample charts)."""
    m = path.manifold
    return {
        "manifold": manifold_source(m) if source is None else source,
        "charts": path.charts,
        "samples": np.column_stack([path.t, path.x]),
    }


def field_document(X: PathTangent, source=None, extra: dict | None = None) -> dict:
    p = X.path
    doc = {
        "format": "pathspace-field",
        "version": FORMAT_VERSION,
        "manifold": manifold_source(p.manifold) if source is None else source,
        "manifold_hash": p.manifold.hash,
        "N": p.N,
        "charts": p.charts,
        "samples": np.column_stack([p.t, X.v]),
    }
    doc.update(extra or {})
    return doc


# ---------------------------------------------------------------------------
# homotopies and reports
# ---------------------------------------------------------------------------

def homotopy_document(H, residual: np.ndarray | None = None, summary: dict | None = None) -> dict:
    return {
        "format": "pathspace-homotopy",
        "version": FORMAT_VERSION,
        "manifold": manifold_info(H.manifold),
        "N": H.N,
        "M": H.M,
        "s": H.s,
        "t": H.t,
        "charts": H.charts,
        "points": H.x,
        "velocities": H.v,
        "diagnostics": H.diagnostics,
        "warnings": H.warnings,
        "residual": residual,
        "summary": summary or {},
    }


def homotopy_csv(H, residual: np.ndarray | None = None) -> str:
    """One row per grid sample: ``s, t, chart, x1..xn, speed, residual``."""
    n = H.manifold.dim
    sp = H.speeds()
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["s", "t", "chart"] + [f"x{k + 1}" for k in range(n)] + ["speed", "residual"])
    for j in range(H.M + 1):
        for i in range(H.N + 1):
            r = math.nan if residual is None else residual[j, i]
            w.writerow([_float(H.s[j]), _float(H.t[i]), int(H.charts[j, i])]
                       + [_float(c) for c in H.x[j, i]] + [_float(sp[j, i]), _float(r)])
    return buf.getvalue()


def obstruction_document(rep, m: ManifoldSpec, t=None) -> dict:
    return {
        "format": "pathspace-obstruction",
        "version": FORMAT_VERSION,
        "manifold": manifold_info(m),
        "feasible": rep.feasible,
        "cause": rep.cause,
        "offending": list(rep.offending),
        "margins": rep.margins,
        "margin": rep.margin,
        "message": rep.message,
        "warnings": rep.warnings,
        "t": t,
    }


def obstruction_csv(rep, t) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "t", "margin", "offending"])
    bad = set(rep.offending)
    for i, (ti, mg) in enumerate(zip(t, rep.margins)):
        w.writerow([i, _float(ti), _float(mg), int(i in bad)])
    return buf.getvalue()


def table_csv(header, rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()
