"""Invariant suites run by ``pathspace verify``.

Each check measures one quantity on seeded random data and compares it
with a threshold; a suite is a list of such checks for one manifold.
Results are plain dictionaries, ready for JSON output.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from . import manifold as mf
from .errors import AntipodalDegeneracy, PathSpaceError
from .fixtures import equatorial_band_path, random_field, random_smooth_path, polar_paths
from .geodesic import TangentVector, exp_map, log_map
from .homotopy import (
    ObstructionReport,
    antipodal_obstruction_scan,
    completeness_probe,
    pathspace_geodesic_bvp,
    pathspace_geodesic_ivp,
    sup_residual,
)
from .paths import (
    ChartCover,
    PathTangent,
    c1_norm,
    chart_change_field,
    norm_equivalence_bound,
    transition_derivative_check,
)

SUITES = ("euclidean", "sphere", "hyperbolic", "open-disk")


@dataclass
class CheckResult:
    suite: str
    name: str
    value: float
    threshold: float
    relation: str
    passed: bool
    detail: str = ""

    def as_dict(self) -> dict:
        return asdict(self)


def _compare(value: float, threshold: float, relation: str) -> bool:
    if not math.isfinite(value):
        return False
    return value <= threshold if relation == "<=" else value >= threshold


class _Suite:
    def __init__(self, name: str):
        self.name = name
        self.results: list[CheckResult] = []

    def check(self, name: str, fn: Callable[[], float], threshold: float, relation: str = "<="):
        try:
            value = float(fn())
            detail = ""
        except PathSpaceError as exc:  # a failed computation is a failed check
            value, detail = math.nan, f"{type(exc).__name__}: {exc}"
        self.results.append(CheckResult(self.name, name, value, threshold, relation,
                                        _compare(value, threshold, relation), detail))


def _random_tangent(m, rng, max_norm):
    """Random (p, v) with metric norm of v below ``max_norm``."""
    x = rng.uniform(-0.6, 0.6, size=m.dim)
    v = rng.normal(size=m.dim)
    v *= rng.uniform(0.05, 1.0) * max_norm / mf.norm(m, 0, x, v)
    return TangentVector(0, x, v)


def _round_trip(m, rng, samples):
    cap = 0.9 * m.epsilon if math.isfinite(m.epsilon) else 2.0
    worst = 0.0
    for _ in range(samples):
        tv = _random_tangent(m, rng, cap)
        q = exp_map(m, tv)
        back = log_map(m, tv.point, q)
        worst = max(worst, float(np.max(np.abs(back.v - tv.v))))
    return worst


def _sectional_error(m, rng, samples, expected):
    worst = 0.0
    for _ in range(samples):
        x = rng.uniform(-0.6, 0.6, size=m.dim)
        X, Y = rng.normal(size=(2, m.dim))
        worst = max(worst, abs(mf.sectional_curvature(m, 0, x, X, Y) - expected))
    return worst


def _scaled_field(path, rng, top):
    X = random_field(path, rng)
    sp = max(mf.norm(path.manifold, int(c), x, v) for c, x, v in zip(path.charts, path.x, X.v))
    return (top / sp) * X


def suite_euclidean(rng, N: int, M: int) -> list:
    m = mf.euclidean(2)
    s = _Suite("euclidean")
    s.check("exp_log_round_trip", lambda: _round_trip(m, rng, 200), 1e-7)
    s.check("sectional_curvature_zero", lambda: _sectional_error(m, rng, 50, 0.0), 1e-6)
    a, b = random_smooth_path(m, rng, N), random_smooth_path(m, rng, N)

    def linear_bvp():
        H = pathspace_geodesic_bvp(a, b, M)
        ss = H.s[:, None, None]
        return max(float(np.max(np.abs(H.x - ((1 - ss) * a.x + ss * b.x)))), sup_residual(m, H))

    s.check("bvp_linear_interpolation", linear_bvp, 1e-12)
    X = random_field(a, rng)

    def affine_ivp():
        H = pathspace_geodesic_ivp(a, X, 1.0, M)
        return float(np.max(np.abs(H.x - (a.x + H.s[:, None, None] * X.v))))

    s.check("ivp_affine_sweep", affine_ivp, 1e-12)
    s.check("identity_equivalence_constant", lambda: abs(norm_equivalence_bound(m, a, 0, 0) - 1.0), 0.0)
    s.check("transition_derivative_gap", lambda: transition_derivative_check(a, b, X, random_field(a, rng),
                                                                             1e-2)[2], 1e-12)
    s.check("probe_reaches_S100", lambda: min(completeness_probe(m, a, X, 100.0, M=256).s_reached),
            100.0, ">=")
    return s.results


def suite_sphere(rng, N: int, M: int) -> list:
    m = mf.sphere(2)
    s = _Suite("sphere")
    s.check("exp_log_round_trip", lambda: _round_trip(m, rng, 200), 1e-7)
    s.check("sectional_curvature_plus_one", lambda: _sectional_error(m, rng, 50, 1.0), 1e-6)

    def tensor_identity():
        worst = 0.0
        for _ in range(50):
            x = rng.uniform(-0.6, 0.6, size=2)
            X, Y, Z = rng.normal(size=(3, 2))
            R = mf.curvature_tensor(m, 0, x, X, Y, Z)
            ip = lambda a, b: mf.inner(m, 0, x, a, b)  # noqa: E731
            worst = max(worst, float(np.max(np.abs(R - (ip(Y, Z) * X - ip(X, Z) * Y)))))
        return worst

    s.check("curvature_tensor_identity", tensor_identity, 1e-6)
    a, b = random_smooth_path(m, rng, N), random_smooth_path(m, rng, N)

    def bvp_residual():
        H = pathspace_geodesic_bvp(a, b, M)
        if isinstance(H, ObstructionReport):
            raise AntipodalDegeneracy(H.message)
        return sup_residual(m, H)

    s.check("bvp_geodesic_residual", bvp_residual, 1e-5)
    X = _scaled_field(a, rng, 1.5)
    s.check("ivp_speed_drift", lambda: float(np.nanmax(np.abs(
        (sp := pathspace_geodesic_ivp(a, X, 1.0, M).speeds()) - sp[0]))), 1e-7)
    s.check("ivp_geodesic_residual", lambda: sup_residual(m, pathspace_geodesic_ivp(a, X, 1.0, M)), 1e-5)

    def polar():
        g1, g2 = polar_paths(m, N if N % 2 == 0 else N + 1)
        scan = antipodal_obstruction_scan(g1, g2)
        rep = pathspace_geodesic_bvp(g1, g2, M)
        mid = len(g1) // 2
        ok = (isinstance(rep, ObstructionReport) and rep.offending == scan.offending == (mid,)
              and rep.exit_code == 3)
        return 0.0 if ok else 1.0

    s.check("polar_obstruction_index", polar, 0.0)

    def slope():
        Y, h = random_field(a, rng, 0.2), random_field(a, rng, 0.3)
        g1 = transition_derivative_check(a, b, Y, h, 1e-2)[2]
        g2 = transition_derivative_check(a, b, Y, h, 1e-3)[2]
        return abs(math.log10(g1 / g2) - 2.0)

    s.check("transition_derivative_slope", slope, 0.2)

    def equivalence():
        p = equatorial_band_path(m, rng, N)
        c = norm_equivalence_bound(m, p, 0, 1)
        cp = norm_equivalence_bound(m, p, 1, 0)
        in0, in1 = ChartCover(((0, p.N, 0),)), ChartCover(((0, p.N, 1),))
        worst = -math.inf
        for _ in range(100):
            U = random_field(p, rng)
            V = chart_change_field(U, 0, 1)
            nu = c1_norm(U, in0)
            nv = c1_norm(V, in1)
            worst = max(worst, nv - c * nu, nu - cp * nv)
        return worst

    s.check("norm_equivalence_margin", equivalence, 0.0)
    return s.results


def suite_hyperbolic(rng, N: int, M: int) -> list:
    m = mf.hyperbolic(2)
    s = _Suite("hyperbolic")
    s.check("exp_log_round_trip", lambda: _round_trip(m, rng, 200), 1e-7)
    s.check("sectional_curvature_minus_one", lambda: _sectional_error(m, rng, 50, -1.0), 1e-6)
    a, b = random_smooth_path(m, rng, N), random_smooth_path(m, rng, N)
    H = {}

    def bvp():
        H["bvp"] = pathspace_geodesic_bvp(a, b, M)
        return H["bvp"].summary["endpoint_residual"]

    s.check("bvp_endpoint_residual", bvp, 1e-8)
    s.check("bvp_geodesic_residual", lambda: sup_residual(m, H["bvp"]), 1e-5)

    def consistency():
        V = PathTangent.from_samples(a, H["bvp"].v[0])
        return float(np.max(np.abs(pathspace_geodesic_ivp(a, V, 1.0, M).x - H["bvp"].x)))

    s.check("ivp_bvp_consistency", consistency, 1e-7)
    X = _scaled_field(a, rng, 0.9)
    s.check("probe_reaches_S20", lambda: min(completeness_probe(m, a, X, 20.0).s_reached), 20.0, ">=")
    return s.results


def disk_exit_time(p, V) -> float:
    """First s > 0 with |p + s V| = 1, for a point p inside the unit disk."""
    pv, vv, pp = float(p @ V), float(V @ V), float(p @ p)
    return (-pv + math.sqrt(pv * pv + vv * (1.0 - pp))) / vv


def suite_open_disk(rng, N: int, M: int) -> list:
    m = mf.open_disk()
    s = _Suite("open-disk")
    p = random_smooth_path(m, rng, N, radius=0.5)
    phase = rng.uniform(0, 2 * math.pi)
    V = PathTangent.from_function(p, lambda t: np.array([math.cos(3 * t + phase), math.sin(3 * t + phase)]))
    rep = {}

    def exit_error():
        rep["r"] = completeness_probe(m, p, V, 3.0)
        expect = np.array([disk_exit_time(p.x[i], V.v[i]) for i in range(len(p))])
        return float(np.max(np.abs(rep["r"].s_reached - expect)))

    s.check("probe_exit_time", exit_error, 1e-6)
    s.check("probe_reports_incomplete", lambda: float(len(rep["r"].failed)), float(len(p)), ">=")
    s.check("partial_geodesic_residual", lambda: sup_residual(m, rep["r"].homotopy), 1e-5)
    return s.results


_RUNNERS = {
    "euclidean": suite_euclidean,
    "sphere": suite_sphere,
    "hyperbolic": suite_hyperbolic,
    "open-disk": suite_open_disk,
}


def run_suites(names=SUITES, seed: int = 0, N: int = 64, M: int = 64) -> dict:
    """Run the named suites; returns ``{"passed": bool, "checks": [...]}``."""
    results = []
    for name in names:
        if name not in _RUNNERS:
            raise ValueError(f"unknown suite {name!r}; known: {', '.join(SUITES)}")
        # one stream per suite, so a suite gives the same numbers alone or in a batch
        rng = np.random.default_rng([seed, SUITES.index(name)])
        results.extend(_RUNNERS[name](rng, N, M))
    return {"passed": all(r.passed for r in results), "seed": seed, "N": N, "M": M,
            "checks": [r.as_dict() for r in results]}


def suite_for(m: mf.ManifoldSpec) -> str | None:
    """The suite matching a manifold, if any."""
    if m.kind in ("euclidean", "sphere", "hyperbolic") and m.dim == 2:
        if m.kind == "sphere" and m.radius != 1.0:
            return None
        return m.kind
    if m.hash == mf.open_disk().hash:
        return "open-disk"
    return None

