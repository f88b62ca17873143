"""Acceptance suite: one printed PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v``; each test prints a line
``[criterion k] PASS|FAIL <measured values>`` and then asserts. Grids are
N = 100, M = 64 with fixed seeds throughout.
"""
import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from pathspace import cli, fd
from pathspace import io as pio
from pathspace import manifold as M
from pathspace.closed_form import preferred_chart, unit_to_stereo
from pathspace.fixtures import equatorial_band_path, random_field, random_smooth_path, polar_paths
from pathspace.geodesic import TangentVector, exp_map, log_map
from pathspace.homotopy import (
    ObstructionReport,
    PathHomotopy,
    antipodal_obstruction_scan,
    completeness_probe,
    geodesic_residual,
    pathspace_geodesic_bvp,
    pathspace_geodesic_ivp,
)
from pathspace.paths import (
    ChartCover,
    PathTangent,
    c1_norm,
    chart_change_field,
    covariant_derivative_grid,
    induced_covariant_derivative,
    induced_curvature,
    norm_equivalence_bound,
    pointwise_equivalence_bounds,
    transition_derivative_check,
)
from pathspace.verify import disk_exit_time

N, MM = 100, 64
E2, S2, H2 = M.euclidean(2), M.sphere(2, 1.0), M.hyperbolic(2)

SPHERE_EXPR = {
    "name": "sphere-expr", "dim": 2,
    "charts": [{"name": "north", "g": [["4/((1+x1^2+x2^2)^2)", "0"], ["0", "4/((1+x1^2+x2^2)^2)"]],
                "domain": [[-2, 2], [-2, 2]]}],
}
HYPERBOLIC_EXPR = {
    "name": "poincare-expr", "dim": 2,
    "charts": [{"name": "ball", "g": [["4/((1-x1^2-x2^2)^2)", "0"], ["0", "4/((1-x1^2-x2^2)^2)"]],
                "domain": {"ball": {"center": [0, 0], "radius": 1}}}],
}
FLAT_EXPR = {
    "name": "flat-expr", "dim": 2,
    "charts": [{"name": "R2", "g": [["1", "0"], ["0", "1"]], "domain": [[-5, 5], [-5, 5]]}],
}


def report(capsys, k, ok, detail):
    with capsys.disabled():
        print(f"\n[criterion {k}] {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, f"criterion {k}: {detail}"


def nanmax_abs(a):
    a = np.abs(np.asarray(a, float))
    return float(np.nanmax(a)) if np.any(np.isfinite(a)) else 0.0


# ---------------------------------------------------------------------------
# 1. exp/log round trip
# ---------------------------------------------------------------------------

def _tangent_at(m, rng, x, chart, top):
    v = rng.normal(size=m.dim)
    v *= rng.uniform(0.0, 1.0) * top / M.norm(m, chart, x, v)
    return TangentVector(chart, x, v)


def _round_trip_samples(m, rng, k=1000):
    """Base points: uniform on the sphere, within distance 2 of the origin on
    the hyperbolic plane, in [-10, 10]^2 on the plane. |v| <= 0.9 eps, or <= 5
    where eps is infinite."""
    top = 0.9 * m.epsilon if math.isfinite(m.epsilon) else 5.0
    for _ in range(k):
        if m.kind == "sphere":
            p = rng.normal(size=3)
            p /= np.linalg.norm(p)
            c = preferred_chart(p)
            yield _tangent_at(m, rng, unit_to_stereo(c, p), c, top)
        elif m.kind == "hyperbolic":
            d = rng.uniform(0.0, 2.0)
            u = rng.normal(size=2)
            yield _tangent_at(m, rng, math.tanh(d / 2) * u / np.linalg.norm(u), 0, top)
        else:
            yield _tangent_at(m, rng, rng.uniform(-10, 10, size=2), 0, top)


def test_criterion_1_exp_log_round_trip(capsys):
    rng = np.random.default_rng(101)
    worst = {}
    for m in (E2, S2, H2):
        errs = []
        for tv in _round_trip_samples(m, rng):
            back = log_map(m, tv.point, exp_map(m, tv))
            assert back.chart == tv.chart
            errs.append(M.norm(m, tv.chart, tv.base, back.v - tv.v))
        worst[m.name] = max(errs)
    ok = all(w <= 1e-7 for w in worst.values())
    report(capsys, 1, ok, "max |log(exp v) - v| over 1000 samples: "
           + ", ".join(f"{k} {v:.2e}" for k, v in worst.items()) + " (<= 1e-7)")


# ---------------------------------------------------------------------------
# 2. constant-curvature oracles
# ---------------------------------------------------------------------------

def _points(m, rng, k):
    """Uniform in a disk inside chart 0: radius 0.9 (ball models), 1.5 otherwise."""
    top = 0.9 if m.kind == "hyperbolic" or m.name == "poincare-expr" else 1.5
    r = top * np.sqrt(rng.uniform(0, 1, size=k))
    a = rng.uniform(0, 2 * np.pi, size=k)
    return np.column_stack([r * np.cos(a), r * np.sin(a)])


def test_criterion_2_constant_curvature(capsys):
    rng = np.random.default_rng(102)
    cases = [(E2, 0.0), (S2, 1.0), (H2, -1.0), (M.from_config(FLAT_EXPR), 0.0),
             (M.from_config(SPHERE_EXPR), 1.0), (M.from_config(HYPERBOLIC_EXPR), -1.0)]
    worst = {}
    for m, K in cases:
        err = 0.0
        for x in _points(m, rng, 100):
            X, Y = rng.normal(size=(2, 2))
            err = max(err, abs(M.sectional_curvature(m, 0, x, X, Y) - K))
        worst[m.name] = err
    tensor = 0.0
    for m in (S2, M.from_config(SPHERE_EXPR)):
        for x in _points(m, rng, 100):
            X, Y, Z = rng.normal(size=(3, 2))
            g = M.metric_at(m, 0, x)
            expect = (Y @ g @ Z) * X - (X @ g @ Z) * Y
            tensor = max(tensor, float(np.max(np.abs(M.curvature_tensor(m, 0, x, X, Y, Z) - expect))))
    ok = all(w <= 1e-6 for w in worst.values()) and tensor <= 1e-6
    report(capsys, 2, ok, "max |K - K0|: " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
           + f"; sphere tensor identity {tensor:.1e} (<= 1e-6)")


# ---------------------------------------------------------------------------
# 3. chart-norm equivalence on the stereographic pair
# ---------------------------------------------------------------------------

def _inversion(x, dx, u, du):
    """Independent product-rule oracle for y = x/|x|^2 acting on (u, u')."""
    q = np.sum(x * x, axis=-1)[..., None, None]
    dq = 2 * np.sum(x * dx, axis=-1)[..., None, None]
    I = np.eye(2)
    xx = x[..., :, None] * x[..., None, :]
    J = I / q - 2 * xx / q ** 2
    dxx = dx[..., :, None] * x[..., None, :] + x[..., :, None] * dx[..., None, :]
    dJ = -I * dq / q ** 2 - 2 * dxx / q ** 2 + 4 * xx * dq / q ** 3
    y = x / q[..., 0]
    dy = np.einsum("...ij,...j->...i", J, dx)
    v = np.einsum("...ij,...j->...i", J, u)
    dv = np.einsum("...ij,...j->...i", J, du) + np.einsum("...ij,...j->...i", dJ, u)
    return y, dy, v, dv


def _fields(rng, t, F, K=4):
    k = np.pi * np.arange(1, K + 1)
    amp = 10.0 ** rng.uniform(-1, 1, size=(F, 1, 1)) / np.arange(1, K + 1)[None, :, None]
    A, B = rng.normal(size=(2, F, K, 2)) * amp
    C = rng.normal(size=(F, 2)) * amp[:, 0]
    S, Cs = np.sin(np.outer(k, t)), np.cos(np.outer(k, t))
    u = C[:, None, :] + np.einsum("kt,fkd->ftd", S, A) + np.einsum("kt,fkd->ftd", Cs, B)
    du = np.einsum("kt,fkd->ftd", k[:, None] * Cs, A) - np.einsum("kt,fkd->ftd", k[:, None] * S, B)
    return u, du


def _c1(u, du):
    return np.maximum(np.linalg.norm(u, axis=-1).max(axis=-1), np.linalg.norm(du, axis=-1).max(axis=-1))


def test_criterion_3_norm_equivalence(capsys):
    rng = np.random.default_rng(103)
    worst_fwd = worst_bwd = worst_pt = -np.inf
    dual = 0.0
    for _ in range(20):
        p = equatorial_band_path(S2, rng, N)
        c, cp = norm_equivalence_bound(S2, p, 0, 1), norm_equivalence_bound(S2, p, 1, 0)
        b01, b10 = pointwise_equivalence_bounds(S2, p, 0, 1), pointwise_equivalence_bounds(S2, p, 1, 0)
        u, du = _fields(rng, p.t, 1000)
        _, _, v, dv = _inversion(p.x, p.dx, u, du)
        nu, nv = _c1(u, du), _c1(v, dv)
        worst_fwd = max(worst_fwd, float(np.max(nv / (c * nu))))
        worst_bwd = max(worst_bwd, float(np.max(nu / (cp * nv))))
        su = np.maximum(np.linalg.norm(u, axis=-1), np.linalg.norm(du, axis=-1))
        sv = np.maximum(np.linalg.norm(v, axis=-1), np.linalg.norm(dv, axis=-1))
        worst_pt = max(worst_pt, float(np.max(sv / (b01 * su))), float(np.max(su / (b10 * sv))))
        # the library's chart change and C1 norm agree with the oracle
        for f in range(3):
            U = PathTangent.from_samples(p, u[f], du[f])
            V = chart_change_field(U, 0, 1)
            scale = max(1.0, float(np.max(np.abs(v[f]))), float(np.max(np.abs(dv[f]))))
            dual = max(dual, float(np.max(np.abs(V.v - v[f]))) / scale,
                       float(np.max(np.abs(V.dv - dv[f]))) / scale,
                       abs(c1_norm(V, ChartCover(((0, N, 1),))) - nv[f]) / scale,
                       abs(c1_norm(U, ChartCover(((0, N, 0),))) - nu[f]) / max(1.0, nu[f]))
    ok = worst_fwd <= 1.0 and worst_bwd <= 1.0 and worst_pt <= 1.0 and dual <= 1e-10
    report(capsys, 3, ok, f"20 paths x 1000 fields: max |v|/(c|u|) {worst_fwd:.3f}, "
           f"max |u|/(c'|v|) {worst_bwd:.3f}, max per-sample ratio {worst_pt:.3f} (<= 1); "
           f"library vs oracle {dual:.1e}")


# ---------------------------------------------------------------------------
# 4. derivative law of the transition operator
# ---------------------------------------------------------------------------

def test_criterion_4_transition_derivative(capsys):
    rng = np.random.default_rng(104)
    slopes = []
    for _ in range(5):
        a, b = random_smooth_path(S2, rng, N), random_smooth_path(S2, rng, N)
        Y, h = random_field(a, rng, 0.2), random_field(a, rng, 0.3)
        g1 = transition_derivative_check(a, b, Y, h, 1e-2)[2]
        g2 = transition_derivative_check(a, b, Y, h, 1e-3)[2]
        slopes.append(math.log10(g1 / g2))
    a, b = random_smooth_path(E2, rng, N), random_smooth_path(E2, rng, N)
    Y, h = random_field(a, rng), random_field(a, rng)
    gap = max(transition_derivative_check(a, b, Y, h, s)[2] for s in (1e-2, 1e-3))
    ok = all(abs(s - 2.0) <= 0.2 for s in slopes) and gap <= 1e-12
    report(capsys, 4, ok, "sphere slopes " + " ".join(f"{s:.3f}" for s in slopes)
           + f" (2 +- 0.2); euclidean gap {gap:.1e} (<= 1e-12)")


# ---------------------------------------------------------------------------
# 5. boundary-value problem on the hyperbolic plane
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def hyperbolic_pairs():
    rng = np.random.default_rng(105)
    return [(random_smooth_path(H2, rng, N, radius=0.5), random_smooth_path(H2, rng, N, radius=0.5))
            for _ in range(50)]


@pytest.fixture(scope="module")
def hyperbolic_bvps(hyperbolic_pairs):
    return [pathspace_geodesic_bvp(a, b, MM) for a, b in hyperbolic_pairs]


def test_criterion_5_hyperbolic_bvp(capsys, hyperbolic_pairs, hyperbolic_bvps):
    ok_count = sum(isinstance(H, PathHomotopy) and H.complete for H in hyperbolic_bvps)
    endpoint = max(H.summary["endpoint_residual"] for H in hyperbolic_bvps if isinstance(H, PathHomotopy))
    sup, ratios = [], []
    for (a, b), H in zip(hyperbolic_pairs, hyperbolic_bvps):
        r64 = nanmax_abs(geodesic_residual(H2, H))
        r128 = nanmax_abs(geodesic_residual(H2, pathspace_geodesic_bvp(a, b, 2 * MM)))
        sup.append(r64)
        ratios.append(r64 / r128)
    ok = ok_count == 50 and endpoint <= 1e-8 and max(sup) <= 1e-5 and min(ratios) >= 10
    report(capsys, 5, ok, f"{ok_count}/50 succeeded; endpoint {endpoint:.1e} (<= 1e-8); "
           f"sup residual {max(sup):.1e} (<= 1e-5); min M-doubling ratio {min(ratios):.1f} (>= 10)")


# ---------------------------------------------------------------------------
# 6. the two-polar-paths obstruction
# ---------------------------------------------------------------------------

def test_criterion_6_polar_obstruction(capsys, tmp_path):
    g1, g2 = polar_paths(S2, N)
    scan = antipodal_obstruction_scan(g1, g2)
    rep = pathspace_geodesic_bvp(g1, g2, MM)
    files = []
    for name, g in (("g1.json", g1), ("g2.json", g2)):
        f = tmp_path / name
        f.write_text(pio.dumps(pio.curve_document(g)))
        files.append(str(f))
    with capsys.disabled(), open(os.devnull, "w") as devnull:
        old = sys.stdout
        sys.stdout = devnull
        try:
            code = cli.main(["interpolate", *files, "--grid-n", str(N), "--grid-m", str(MM)])
        finally:
            sys.stdout = old
    ok = (isinstance(rep, ObstructionReport) and rep.offending == scan.offending == (N // 2,)
          and rep.exit_code == 3 and code == 3)
    report(capsys, 6, ok, f"offending {getattr(rep, 'offending', None)}, scan {scan.offending}; "
           f"exit status {getattr(rep, 'exit_code', None)}, CLI {code} (expected (50,), 3)")


# ---------------------------------------------------------------------------
# 7. completeness probes
# ---------------------------------------------------------------------------

def _scaled_field(path, rng, top):
    X = random_field(path, rng)
    sp = max(M.norm(path.manifold, int(c), x, v) for c, x, v in zip(path.charts, path.x, X.v))
    return (top / sp) * X


def _disk_setup():
    rng = np.random.default_rng(1072)
    m = M.open_disk()
    p = random_smooth_path(m, rng, N, radius=0.5)
    phase = rng.uniform(0, 2 * math.pi)
    V = PathTangent.from_function(p, lambda t: np.array([math.cos(3 * t + phase), math.sin(3 * t + phase)]))
    return m, p, V


@pytest.fixture(scope="module")
def probe_inputs():
    rng = np.random.default_rng(107)
    out = {}
    for m in (E2, H2):
        p = random_smooth_path(m, rng, N)
        out[m.name] = (m, p, _scaled_field(p, rng, 0.9), 20.0)
    m, p, V = _disk_setup()
    out[m.name] = (m, p, V, 3.0)
    return out


@pytest.fixture(scope="module")
def probes(probe_inputs):
    return {k: completeness_probe(m, p, V, S) for k, (m, p, V, S) in probe_inputs.items()}


def test_criterion_7_completeness_probe(capsys, probe_inputs, probes):
    full = {k: float(np.min(probes[k].s_reached)) for k in (E2.name, H2.name)}
    m, p, V, _ = probe_inputs[M.open_disk().name]
    expect = np.array([disk_exit_time(p.x[i], V.v[i]) for i in range(len(p))])
    rep = probes[m.name]
    exit_err = float(np.max(np.abs(rep.s_reached - expect)))
    ok = all(v >= 20.0 for v in full.values()) and exit_err <= 1e-6 and len(rep.failed) == len(p)
    report(capsys, 7, ok, "min s reached: " + ", ".join(f"{k} {v:g}" for k, v in full.items())
           + f" (>= 20); open-disk exit-time error {exit_err:.1e} (<= 1e-6), "
           f"{len(rep.failed)}/{len(p)} samples stop")


# ---------------------------------------------------------------------------
# 8. pointwise principle: residuals and integrator-baseline independence
# ---------------------------------------------------------------------------

def test_criterion_8_pointwise_principle(capsys, hyperbolic_pairs, hyperbolic_bvps, probe_inputs, probes):
    worst_res, worst_gap = 0.0, 0.0
    for (a, b), H in zip(hyperbolic_pairs, hyperbolic_bvps):
        worst_res = max(worst_res, nanmax_abs(geodesic_residual(H2, H)))
        H5 = pathspace_geodesic_bvp(a, b, MM, h_base=1 / 256)
        worst_gap = max(worst_gap, float(np.max(np.abs(H5.x - H.x))))
    mask_ok = True
    for k, (m, p, V, S) in probe_inputs.items():
        H = probes[k].homotopy
        worst_res = max(worst_res, nanmax_abs(geodesic_residual(m, H)))
        H5 = completeness_probe(m, p, V, S, h_base=1 / 256).homotopy
        mask_ok &= bool(np.array_equal(H.charts, H5.charts))
        worst_gap = max(worst_gap, nanmax_abs(H5.x - H.x))
    ok = worst_res <= 1e-5 and worst_gap <= 1e-7 and mask_ok
    report(capsys, 8, ok, f"sup residual over 53 homotopies {worst_res:.1e} (<= 1e-5); "
           f"h_base 1/16 vs 1/256 gap {worst_gap:.1e} (<= 1e-7)")


# ---------------------------------------------------------------------------
# 9. induced connection: Leibniz, metric compatibility, curvature
# ---------------------------------------------------------------------------

def _sphere_homotopy(rng):
    """IVP homotopy from a gentle random path (one Fourier mode, amplitude
    0.2) with a field of top speed 1."""
    p = random_smooth_path(S2, rng, N, modes=1, amplitude=0.2)
    X = random_field(p, rng, modes=1)
    sp = max(M.norm(S2, 0, x, v) for x, v in zip(p.x, X.v))
    return pathspace_geodesic_ivp(p, (1.0 / sp) * X, 1.0, MM)


def _test_field(H, rng):
    S, T = np.meshgrid(H.s, H.t, indexing="ij")
    k = rng.normal(size=(3, 2))
    return k[0] + np.sin(S + 2 * T)[..., None] * k[1] + (S * T)[..., None] * k[2]


def test_criterion_9_induced_connection(capsys):
    rng = np.random.default_rng(109)
    leib = compat = comm_err = 0.0
    for _ in range(20):
        H = _sphere_homotopy(rng)
        V = _test_field(H, rng)
        W = np.roll(V, 1, axis=-1) * [1.0, -1.0] + 0.3
        hs, ht = H.s[1] - H.s[0], H.t[1] - H.t[0]
        a, da = np.cos(H.s) + H.s ** 2, -np.sin(H.s) + 2 * H.s
        DV, DW = induced_covariant_derivative(H, V), induced_covariant_derivative(H, W)
        DaV = induced_covariant_derivative(H, a[:, None, None] * V)
        leib = max(leib, float(np.max(np.abs(DaV - (da[:, None, None] * V + a[:, None, None] * DV)))))
        g = np.array([[M.metric_at(S2, int(c), x) for c, x in zip(cr, xr)] for cr, xr in zip(H.charts, H.x)])
        ip = np.einsum("sti,stij,stj->st", V, g, W)
        rhs = np.einsum("sti,stij,stj->st", DV, g, W) + np.einsum("sti,stij,stj->st", V, g, DW)
        compat = max(compat, float(np.max(np.abs(fd.diff(ip, hs) - rhs))))

        def Dt(F):
            return covariant_derivative_grid(S2, H.charts, H.x, F, ht, axis=1)

        comm = induced_covariant_derivative(H, Dt(V)) - Dt(DV)
        R = np.empty_like(V)
        for j in range(H.M + 1):
            pj = H.path_at(j)
            R[j] = induced_curvature(S2, pj, H.velocity_at(j), PathTangent(pj, pj.dx, np.zeros_like(pj.dx)),
                                     PathTangent.from_samples(pj, V[j])).v
        comm_err = max(comm_err, float(np.max(np.abs(comm - R))))
    ok = leib <= 1e-5 and compat <= 1e-5 and comm_err <= 1e-4
    report(capsys, 9, ok, f"20 sphere homotopies: Leibniz {leib:.1e}, metric compatibility {compat:.1e} "
           f"(<= 1e-5); commutator vs curvature {comm_err:.1e} (<= 1e-4)")


# ---------------------------------------------------------------------------
# 10. determinism of the CLI
# ---------------------------------------------------------------------------

def test_criterion_10_determinism(capsys, tmp_path):
    rng = np.random.default_rng(110)
    files = []
    for name in ("a.json", "b.json"):
        f = tmp_path / name
        f.write_text(pio.dumps(pio.curve_document(random_smooth_path(H2, rng, N))))
        files.append(str(f))
    outputs = []
    for k, threads in enumerate(("1", "1", "0", "0")):
        out = tmp_path / f"run{k}"
        env = dict(os.environ, PATHSPACE_THREADS=threads)
        proc = subprocess.run([sys.executable, "-m", "pathspace.cli", "interpolate", *files,
                               "--manifold", "hyperbolic:2", "--out", str(out)],
                              env=env, capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outputs.append((out / "homotopy.json").read_bytes())
    same = all(o == outputs[0] for o in outputs)
    doc = json.loads(outputs[0])
    ok = same and doc["N"] == N and doc["M"] == MM
    report(capsys, 10, ok, f"homotopy.json byte-identical across 4 runs (PATHSPACE_THREADS 1,1,auto,auto): "
           f"{same}; {len(outputs[0])} bytes")
