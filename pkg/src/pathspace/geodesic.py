"""Geodesics, exponential and logarithm maps, parallel transport."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import closed_form as cf
from . import integrator, kernels
from .errors import (
    AntipodalDegeneracy,
    DomainError,
    LeftAtlas,
    NoConvergence,
    NotInOverlap,
    RadiusExceeded,
    StepUnderflow,
)
from .manifold import ConformalMetric, ManifoldSpec, chart_transition, metric_at, norm

DEFAULT_TOL = integrator.DEFAULT_TOL
DEFAULT_H_BASE = integrator.DEFAULT_H_BASE


@dataclass(frozen=True, eq=False)
class Point:
    chart: int
    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, float))


@dataclass(frozen=True, eq=False)
class TangentVector:
    chart: int
    base: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base", np.asarray(self.base, float))
        object.__setattr__(self, "v", np.asarray(self.v, float))

    @property
    def point(self) -> Point:
        return Point(self.chart, self.base)

    def norm(self, m: ManifoldSpec) -> float:
        return norm(m, self.chart, self.base, self.v)


@dataclass(eq=False)
class GeodesicArc:
    """Geodesic sampled at output nodes, with the accepted integrator steps as dense output."""

    manifold: ManifoldSpec
    s: np.ndarray
    charts: np.ndarray
    x: np.ndarray
    v: np.ndarray
    status: str = "ok"
    s_reached: float = 0.0
    stats: dict = field(default_factory=dict)

    @property
    def start(self) -> TangentVector:
        return TangentVector(int(self.charts[0]), self.x[0], self.v[0])

    @property
    def end(self) -> Point:
        return Point(int(self.charts[-1]), self.x[-1])

    @property
    def s_max(self) -> float:
        return float(self.s[-1])

    def speeds(self) -> np.ndarray:
        m = self.manifold
        return np.array([norm(m, int(c), x, v) for c, x, v in zip(self.charts, self.x, self.v)])

    def at(self, s: float) -> Point:
        """Cubic Hermite interpolation between the bracketing output nodes."""
        if not self.s[0] <= s <= self.s[-1]:
            raise ValueError(f"s={s} outside [{self.s[0]}, {self.s[-1]}]")
        j = min(int(np.searchsorted(self.s, s, side="right")) - 1, len(self.s) - 2)
        c = int(self.charts[j])
        x1, v1 = self.x[j + 1], self.v[j + 1]
        if int(self.charts[j + 1]) != c:
            x1, v1 = self.manifold.push_vector(int(self.charts[j + 1]), x1, v1, c)
        h = self.s[j + 1] - self.s[j]
        return Point(c, _hermite(self.x[j], self.v[j], x1, v1, h, (s - self.s[j]) / h))


def _hermite(x0, d0, x1, d1, h, u):
    h00 = 2 * u ** 3 - 3 * u ** 2 + 1
    h10 = u ** 3 - 2 * u ** 2 + u
    h01 = -2 * u ** 3 + 3 * u ** 2
    h11 = u ** 3 - u ** 2
    return h00 * x0 + h10 * h * d0 + h01 * x1 + h11 * h * d1


# ---------------------------------------------------------------------------
# integration dispatch
# ---------------------------------------------------------------------------

def _conformal_params(m: ManifoldSpec):
    """Kernel parameters when every chart carries the same conformal metric, else None."""
    metrics = {id(c.metric) for c in m.charts}
    met = m.charts[0].metric
    if len(metrics) != 1 or not isinstance(met, ConformalMetric):
        return None
    kind = m.kind
    if kind == "sphere":
        return met.sigma, True, 1.9, math.inf
    if kind == "hyperbolic":
        return met.sigma, False, math.inf, 1.0
    if kind in ("euclidean", "flat-torus"):
        return met.sigma, False, math.inf, math.inf
    return None


def _generic_hooks(m: ManifoldSpec, nvec: int = 0):
    n = m.dim

    def rhs(chart, y):
        x, v = y[:n], y[n:2 * n]
        met = m.charts[chart].metric
        if nvec == 0:
            return np.concatenate((v, met.accel(x, v)))
        gam = met.christoffel(x)
        parts = [v, -np.einsum("kij,i,j->k", gam, v, v)]
        for r in range(nvec):
            w = y[(2 + r) * n:(3 + r) * n]
            parts.append(-np.einsum("kij,i,j->k", gam, v, w))
        return np.concatenate(parts)

    def inside(chart, y):
        return m.contains(chart, y[:n])

    switch = None
    if m.transitions:
        def switch(chart, y):
            x = y[:n]
            if m.safety(chart, x) <= m.switch_ratio:
                return None
            new_chart, _ = m.rechart(chart, x)
            if new_chart == chart:
                return None
            img, jac, _ = chart_transition(m, chart, new_chart, x)
            vecs = [jac @ y[(1 + r) * n:(2 + r) * n] for r in range(1 + nvec)]
            return new_chart, np.concatenate([img] + vecs)

    return rhs, inside, switch


def integrate_geodesic(m: ManifoldSpec, chart: int, x, v, nodes, tol=DEFAULT_TOL,
                       h_base=DEFAULT_H_BASE, extra=(), backend=None, record_dense=False):
    """Low-level driver; returns a :class:`pathspace.integrator.GridRun`.

    State rows are ``(x, v, w_1, ..., w_k)`` where the ``w`` are the vectors
    in ``extra``, parallel-transported along the way.
    """
    x = np.asarray(x, float)
    v = np.asarray(v, float)
    nodes = np.asarray(nodes, float)
    span = float(nodes[-1] - nodes[0]) if len(nodes) > 1 else 0.0
    h_min = 1e-13 * max(1.0, abs(span))
    params = _conformal_params(m)
    if params is not None and not extra and not record_dense:
        sigma, inversion, switch_r, domain_r = params
        return kernels.integrate_conformal(sigma, inversion, chart, x, v, nodes, tol, h_base,
                                           h_min, switch_r, domain_r, backend=backend)
    rhs, inside, switch = _generic_hooks(m, len(extra))
    if params is not None and params[1]:
        inside = None  # stereographic charts cover every finite point
    y0 = np.concatenate([x, v] + [np.asarray(w, float) for w in extra])
    return integrator.integrate_grid(rhs, chart, y0, nodes, tol=tol, h_base=h_base, h_min=h_min,
                                     inside=inside, switch=switch, record_dense=record_dense)


def _raise_for(run, what="geodesic"):
    if run.status == integrator.LEFT_DOMAIN:
        raise LeftAtlas(f"{what} left the atlas at s={run.s_reached:.12g}", run.s_reached)
    if run.status in (integrator.UNDERFLOW, integrator.MAX_STEPS):
        raise StepUnderflow(f"{what}: step size underflow at s={run.s_reached:.12g}", run.s_reached)


def geodesic_ivp(m: ManifoldSpec, tv: TangentVector, s_max: float, tol: float = DEFAULT_TOL,
                 n_out: int = 64, h_base: float = DEFAULT_H_BASE, dense: bool = False) -> GeodesicArc:
    """Integrate the geodesic with initial velocity ``tv`` on [0, s_max].

    Raises :class:`LeftAtlas` or :class:`StepUnderflow` (both carrying
    ``s_reached``) when the geodesic cannot be continued.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if s_max < 0:
        raise ValueError("s_max must be non-negative")
    n = m.dim
    nodes = np.linspace(0.0, s_max, n_out + 1)
    run = integrate_geodesic(m, tv.chart, tv.base, tv.v, nodes, tol, h_base, record_dense=dense)
    _raise_for(run)
    stats = {"nsteps": run.nsteps, "nrejects": run.nrejects, "nswitches": run.nswitches,
             "min_h": run.min_h, "backend": kernels.BACKEND if not dense else "python"}
    if dense:
        stats["dense"] = run.dense
    return GeodesicArc(m, nodes, run.charts.copy(), run.states[:, :n].copy(),
                       run.states[:, n:2 * n].copy(), "ok", run.s_reached, stats)


def _check_radius(m: ManifoldSpec, tv: TangentVector):
    r = tv.norm(m)
    if not r < m.epsilon:
        raise RadiusExceeded(f"|v| = {r:.6g} is not below the exponential-chart radius {m.epsilon:.6g}")
    return r


def exp_map(m: ManifoldSpec, tv: TangentVector, tol: float = DEFAULT_TOL,
            h_base: float = DEFAULT_H_BASE, backend=None) -> Point:
    """End point at s = 1 of the geodesic with initial velocity ``tv``.

    Flat builtins use ``x + v`` directly; everything else is integrated.
    """
    _check_radius(m, tv)
    if m.kind in ("euclidean", "flat-torus"):
        return Point(tv.chart, tv.base + tv.v)
    run = integrate_geodesic(m, tv.chart, tv.base, tv.v, (0.0, 1.0), tol, h_base, backend=backend)
    _raise_for(run, "exp")
    return Point(int(run.charts[-1]), run.states[-1, :m.dim])


# ---------------------------------------------------------------------------
# logarithm
# ---------------------------------------------------------------------------

LOG_FD_STEP = 1e-6
LOG_MAX_ITER = 50
LOG_RESIDUAL = 1e-10


def sphere_angle(m: ManifoldSpec, p: Point, q: Point) -> float:
    return cf.sphere_angle(cf.stereo_to_unit(p.chart, p.x), cf.stereo_to_unit(q.chart, q.x))


def log_map(m: ManifoldSpec, p: Point, q: Point, antipodal_tol: float = cf.ANTIPODAL_TOL) -> TangentVector:
    """Minimal tangent vector at ``p`` whose exponential is ``q``, in p's chart.

    Closed form on builtins; damped Newton shooting otherwise. On the
    sphere, points within ``antipodal_tol`` of antipodal raise
    :class:`AntipodalDegeneracy`.
    """
    if p.chart == q.chart and np.array_equal(p.x, q.x):
        return TangentVector(p.chart, p.x, np.zeros_like(p.x))
    kind = m.kind
    if kind in ("euclidean", "flat-torus"):
        return TangentVector(p.chart, p.x, q.x - p.x)
    if kind == "hyperbolic":
        return TangentVector(p.chart, p.x, cf.poincare_log(p.x, q.x))
    if kind == "sphere":
        r = m.radius
        pu = cf.stereo_to_unit(p.chart, p.x)
        qu = cf.stereo_to_unit(q.chart, q.x)
        w, theta = cf.sphere_log_unit(pu, qu)
        if theta >= math.pi - antipodal_tol:
            raise AntipodalDegeneracy(
                f"points are antipodal (angle {theta:.12g}); the minimising geodesic is not unique",
                angle=theta)
        return TangentVector(p.chart, p.x, cf.vector_from_ambient(p.chart, p.x, r * w, r))
    return _log_shooting(m, p, q)


def _log_shooting(m: ManifoldSpec, p: Point, q: Point) -> TangentVector:
    target_chart = q.chart
    try:
        guess = m.to_chart(q.chart, q.x, p.chart) - p.x
    except NotInOverlap:
        guess = np.zeros(m.dim)

    def residual(v):
        end = exp_map(m, TangentVector(p.chart, p.x, v))
        y = end.x if end.chart == target_chart else m.to_chart(end.chart, end.x, target_chart)
        return y - q.x

    def safe_residual(v):
        try:
            return residual(v)
        except (RadiusExceeded, LeftAtlas, StepUnderflow, NotInOverlap, DomainError):
            return None

    v = guess
    F = safe_residual(v)
    if F is None:
        raise NoConvergence("shooting: initial guess is not admissible")
    n = m.dim
    for _ in range(LOG_MAX_ITER):
        fn = float(np.max(np.abs(F)))
        if fn <= LOG_RESIDUAL:
            return TangentVector(p.chart, p.x, v)
        J = np.empty((n, n))
        for k in range(n):
            e = np.zeros(n)
            e[k] = LOG_FD_STEP
            fp, fm = safe_residual(v + e), safe_residual(v - e)
            if fp is None or fm is None:
                raise NoConvergence("shooting: Jacobian probe left the admissible set", residual=fn)
            J[:, k] = (fp - fm) / (2 * LOG_FD_STEP)
        try:
            dv = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            raise NoConvergence("shooting: singular Jacobian (conjugate point?)", residual=fn) from None
        lam = 1.0
        while lam > 1e-6:
            F_new = safe_residual(v + lam * dv)
            if F_new is not None and float(np.max(np.abs(F_new))) < fn:
                v, F = v + lam * dv, F_new
                break
            lam *= 0.5
        else:
            raise NoConvergence("shooting: damping failed to reduce the residual", residual=fn)
    fn = float(np.max(np.abs(F)))
    if fn <= LOG_RESIDUAL:
        return TangentVector(p.chart, p.x, v)
    raise NoConvergence(f"shooting did not converge in {LOG_MAX_ITER} iterations", residual=fn)


def distance(m: ManifoldSpec, p: Point, q: Point) -> float:
    """Riemannian distance on builtins; chart-coordinate distance on other manifolds."""
    if p.chart == q.chart and np.array_equal(p.x, q.x):
        return 0.0
    kind = m.kind
    if kind in ("euclidean", "flat-torus"):
        return float(np.linalg.norm(q.x - p.x))
    if kind == "hyperbolic":
        return cf.poincare_distance(p.x, q.x)
    if kind == "sphere":
        return m.radius * sphere_angle(m, p, q)
    y = q.x if q.chart == p.chart else m.to_chart(q.chart, q.x, p.chart)
    return float(np.linalg.norm(y - p.x))


# ---------------------------------------------------------------------------
# parallel transport
# ---------------------------------------------------------------------------

def parallel_transport(m: ManifoldSpec, arc: GeodesicArc, *ws, tol: float = DEFAULT_TOL,
                       h_base: float = DEFAULT_H_BASE):
    """Transport vectors given at the start of ``arc`` to its end.

    Returns one :class:`TangentVector` per input vector (a single one when a
    single vector is passed).
    """
    start = arc.start
    vecs = [np.asarray(w.v if isinstance(w, TangentVector) else w, float) for w in ws]
    for w in ws:
        if isinstance(w, TangentVector) and (w.chart != start.chart or not np.allclose(w.base, start.base)):
            raise ValueError("transported vector must be based at the start of the arc")
    n = m.dim
    run = integrate_geodesic(m, start.chart, start.base, start.v, (0.0, arc.s_max), tol, h_base,
                             extra=vecs)
    _raise_for(run, "parallel transport")
    c = int(run.charts[-1])
    x_end = run.states[-1, :n]
    out = [TangentVector(c, x_end, run.states[-1, (2 + r) * n:(3 + r) * n]) for r in range(len(vecs))]
    return out[0] if len(out) == 1 else out
