"""Riemannian manifolds given by chart atlases.

A :class:`ManifoldSpec` is a list of charts (each with a domain and a metric
provider) plus transition maps between overlapping charts. Builtins use
closed-form conformal metrics; config-defined manifolds use expression trees
that are differentiated symbolically.

Index conventions used throughout the package::

    g[i, j]            metric
    dg[m, i, j]        d_m g_ij
    gamma[k, i, j]     Christoffel symbol Gamma^k_ij
    dgamma[m, k, i, j] d_m Gamma^k_ij
    riemann[k, l, i, j] with R(d_i, d_j) d_l = R^k_lij d_k
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import expr as mexpr
from .errors import (
    ConfigError,
    DegeneratePlane,
    DomainError,
    NotInOverlap,
    OutOfDomain,
)

FD_STEP_FIRST = 1e-6
FD_STEP_SECOND = 1e-5


# ---------------------------------------------------------------------------
# domains
# ---------------------------------------------------------------------------

class Domain:
    def contains(self, x) -> bool:
        return self.safety(x) < 1.0 or (self.closed and self.safety(x) <= 1.0)

    closed = False

    def safety(self, x) -> float:
        """0 at the centre, 1 on the boundary."""
        raise NotImplementedError

    def sample(self, rng, k):
        raise NotImplementedError

    def describe(self):
        raise NotImplementedError


@dataclass(frozen=True)
class Everywhere(Domain):
    dim: int

    def safety(self, x):
        return 0.0 if np.all(np.isfinite(x)) else math.inf

    def sample(self, rng, k):
        return rng.uniform(-1.0, 1.0, size=(k, self.dim))

    def describe(self):
        return "everywhere"


@dataclass(frozen=True)
class Ball(Domain):
    center: tuple
    radius: float
    closed: bool = False

    def safety(self, x):
        d = np.asarray(x, float) - np.asarray(self.center)
        r = float(np.sqrt(d @ d))
        return r / self.radius if math.isfinite(r) else math.inf

    def sample(self, rng, k):
        n = len(self.center)
        u = rng.normal(size=(k, n))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        rad = self.radius * 0.9 * rng.uniform(size=(k, 1)) ** (1.0 / n)
        return np.asarray(self.center) + rad * u

    def describe(self):
        return {"ball": {"center": list(self.center), "radius": self.radius}}


@dataclass(frozen=True)
class Box(Domain):
    lo: tuple
    hi: tuple

    def safety(self, x):
        worst = 0.0
        for xi, a, b in zip(np.asarray(x, float), self.lo, self.hi):
            if not math.isfinite(xi):
                return math.inf
            if math.isfinite(a) and math.isfinite(b):
                r = abs(xi - 0.5 * (a + b)) / (0.5 * (b - a))
            elif math.isfinite(a):
                r = 1.0 if xi <= a else 0.0
            elif math.isfinite(b):
                r = 1.0 if xi >= b else 0.0
            else:
                r = 0.0
            worst = max(worst, r)
        return worst

    def sample(self, rng, k):
        lo = np.array([a if math.isfinite(a) else -1.0 for a in self.lo])
        hi = np.array([b if math.isfinite(b) else 1.0 for b in self.hi])
        lo = np.where(np.isfinite(self.lo), lo, np.minimum(lo, hi - 2.0))
        hi = np.where(np.isfinite(self.hi), hi, np.maximum(hi, lo + 2.0))
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        return mid + 0.9 * half * rng.uniform(-1.0, 1.0, size=(k, len(lo)))

    def describe(self):
        return [[a, b] for a, b in zip(self.lo, self.hi)]


# ---------------------------------------------------------------------------
# metric providers
# ---------------------------------------------------------------------------

class ConformalMetric:
    """g = f(x)^2 * I with f = 2*scale/(1 - sigma*|x|^2), or f = scale when sigma = 0.

    sigma = -1 is the stereographic sphere of radius ``scale``, sigma = +1
    the Poincare ball, sigma = 0 a flat metric. Writing f = exp(phi), the
    gradient of phi is ``c(x) * x`` with ``c = 2*sigma/(1 - sigma*|x|^2)``.
    """

    symbolic = True

    def __init__(self, sigma: int, scale: float = 1.0):
        self.sigma = int(sigma)
        self.scale = float(scale)

    def factor(self, x):
        if self.sigma == 0:
            return self.scale
        q = float(np.dot(x, x))
        return 2.0 * self.scale / (1.0 - self.sigma * q)

    def _c(self, x):
        if self.sigma == 0:
            return 0.0
        return 2.0 * self.sigma / (1.0 - self.sigma * float(np.dot(x, x)))

    def metric(self, x):
        n = len(x)
        return self.factor(x) ** 2 * np.eye(n)

    def christoffel(self, x):
        x = np.asarray(x, float)
        n = len(x)
        phi = self._c(x) * x
        eye = np.eye(n)
        return (np.einsum("ki,j->kij", eye, phi) + np.einsum("kj,i->kij", eye, phi)
                - np.einsum("ij,k->kij", eye, phi))

    def christoffel_derivative(self, x):
        x = np.asarray(x, float)
        n = len(x)
        c = self._c(x)
        hess = c * np.eye(n) + c * c * np.outer(x, x)  # d_i d_m phi
        eye = np.eye(n)
        # d_m Gamma^k_ij = d_ki phi_jm + d_kj phi_im - d_ij phi_km
        return (np.einsum("ki,jm->mkij", eye, hess) + np.einsum("kj,im->mkij", eye, hess)
                - np.einsum("ij,km->mkij", eye, hess))

    def accel(self, x, v):
        c = self._c(x)
        return c * (float(np.dot(v, v)) * x - 2.0 * float(np.dot(x, v)) * v)

    def describe(self):
        return {"conformal": {"sigma": self.sigma, "scale": self.scale}}


class ExprMetric:
    """Metric whose entries are expression trees; derivatives are symbolic."""

    symbolic = True

    def __init__(self, entries, dim: int):
        self.dim = n = dim
        self.source = [[mexpr.serialize(entries[i][j]) for j in range(n)] for i in range(n)]
        self.pairs = [(i, j) for i in range(n) for j in range(i, n)]
        g = [entries[i][j] for i, j in self.pairs]
        dg = [mexpr.diff_expr(e, m + 1) for m in range(n) for e in g]
        ddg = [mexpr.diff_expr(d, a + 1) for m in range(n) for a in range(n)
               for d in dg[m * len(g):(m + 1) * len(g)]]
        self.trees = g
        self.constant = all(isinstance(d, mexpr.Num) and d.value == 0.0 for d in dg)
        self._g = mexpr.compile_exprs(g)
        self._dg = mexpr.compile_exprs(dg)
        self._ddg = mexpr.compile_exprs(ddg)

    def _unpack(self, flat, lead):
        n = self.dim
        out = np.empty(lead + (n, n))
        vals = np.asarray(flat, float).reshape(lead + (len(self.pairs),))
        for p, (i, j) in enumerate(self.pairs):
            out[..., i, j] = vals[..., p]
            out[..., j, i] = vals[..., p]
        return out

    def metric(self, x):
        return self._unpack(self._g(list(x)), ())

    def metric_grad(self, x):
        return self._unpack(self._dg(list(x)), (self.dim,))

    def metric_hess(self, x):
        return self._unpack(self._ddg(list(x)), (self.dim, self.dim))

    def christoffel(self, x):
        if self.constant:
            return np.zeros((self.dim,) * 3)
        return _christoffel_from(self.metric(x), self.metric_grad(x))

    def christoffel_derivative(self, x):
        if self.constant:
            return np.zeros((self.dim,) * 4)
        return _christoffel_derivative_from(self.metric(x), self.metric_grad(x), self.metric_hess(x))

    def accel(self, x, v):
        if self.constant:
            return np.zeros(self.dim)
        return -np.einsum("kij,i,j->k", self.christoffel(x), v, v)

    def describe(self):
        return {"g": self.source}


class CallableMetric:
    """Metric from a plain function; derivatives by central finite differences."""

    symbolic = False

    def __init__(self, fn: Callable, dim: int, name: str = "custom"):
        self.fn = fn
        self.dim = dim
        self.name = name

    def metric(self, x):
        return np.asarray(self.fn(np.asarray(x, float)), float)

    def christoffel(self, x):
        return christoffel_fd(self.metric, x)

    def christoffel_derivative(self, x):
        x = np.asarray(x, float)
        return _christoffel_derivative_from(self.metric(x), _metric_grad_fd(self.metric, x),
                                            _metric_hess_fd(self.metric, x))

    def accel(self, x, v):
        return -np.einsum("kij,i,j->k", self.christoffel(x), v, v)

    def describe(self):
        return {"callable": self.name}


def _christoffel_from(g, dg):
    ginv = np.linalg.inv(g)
    first = 0.5 * (np.einsum("ilj->lij", dg) + np.einsum("jli->lij", dg) - dg)
    return np.einsum("kl,lij->kij", ginv, first)


def _christoffel_derivative_from(g, dg, ddg):
    ginv = np.linalg.inv(g)
    first = 0.5 * (np.einsum("ilj->lij", dg) + np.einsum("jli->lij", dg) - dg)
    dginv = -np.einsum("ka,mab,bl->mkl", ginv, dg, ginv)
    # ddg[m, a, i, j] = d_m d_a g_ij
    dfirst = 0.5 * (np.einsum("milj->mlij", ddg) + np.einsum("mjli->mlij", ddg) - ddg)
    return np.einsum("mkl,lij->mkij", dginv, first) + np.einsum("kl,mlij->mkij", ginv, dfirst)


def _metric_grad_fd(metric, x, h=FD_STEP_FIRST):
    x = np.asarray(x, float)
    n = len(x)
    out = np.empty((n, n, n))
    for m in range(n):
        e = np.zeros(n)
        e[m] = h
        out[m] = (metric(x + e) - metric(x - e)) / (2 * h)
    return out


def _metric_hess_fd(metric, x, h=FD_STEP_SECOND):
    x = np.asarray(x, float)
    n = len(x)
    out = np.empty((n, n, n, n))
    g0 = metric(x)
    for m in range(n):
        em = np.zeros(n)
        em[m] = h
        out[m, m] = (metric(x + em) - 2 * g0 + metric(x - em)) / (h * h)
        for a in range(m + 1, n):
            ea = np.zeros(n)
            ea[a] = h
            val = (metric(x + em + ea) - metric(x + em - ea) - metric(x - em + ea)
                   + metric(x - em - ea)) / (4 * h * h)
            out[m, a] = out[a, m] = val
    return out


def christoffel_fd(metric: Callable, x, h=FD_STEP_FIRST):
    """Christoffel symbols with metric derivatives from central differences."""
    x = np.asarray(x, float)
    return _christoffel_from(metric(x), _metric_grad_fd(metric, x, h))


# ---------------------------------------------------------------------------
# charts and transitions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Chart:
    name: str
    domain: Domain
    metric: object


class Transition:
    """Coordinate change lambda between two charts, with first and second derivatives."""

    def __call__(self, x):
        """Return ``(image, d_lambda, d2_lambda)``; d2_lambda[k, i, j] = d_i d_j lambda^k."""
        raise NotImplementedError

    def image(self, x):
        return self(x)[0]


class InversionTransition(Transition):
    """x -> x/|x|^2, the stereographic north/south coordinate change."""

    def __call__(self, x):
        x = np.asarray(x, float)
        n = len(x)
        q = float(x @ x)
        if q == 0.0:
            raise NotInOverlap("inversion is undefined at the origin")
        eye = np.eye(n)
        img = x / q
        jac = eye / q - 2.0 * np.outer(x, x) / (q * q)
        hess = (-2.0 * (np.einsum("kj,i->kij", eye, x) + np.einsum("ki,j->kij", eye, x)
                        + np.einsum("ij,k->kij", eye, x)) / (q * q)
                + 8.0 * np.einsum("i,j,k->kij", x, x, x) / q ** 3)
        return img, jac, hess

    def image(self, x):
        x = np.asarray(x, float)
        q = float(x @ x)
        if q == 0.0:
            raise NotInOverlap("inversion is undefined at the origin")
        return x / q

    def describe(self):
        return "inversion"


class AffineTransition(Transition):
    def __init__(self, A, b=None):
        self.A = np.asarray(A, float)
        self.b = np.zeros(len(self.A)) if b is None else np.asarray(b, float)

    def __call__(self, x):
        n = len(self.A)
        return self.A @ np.asarray(x, float) + self.b, self.A.copy(), np.zeros((n, n, n))

    def describe(self):
        return {"A": self.A.tolist(), "b": self.b.tolist()}


class ExprTransition(Transition):
    def __init__(self, components, dim):
        self.dim = n = dim
        self.source = [mexpr.serialize(c) for c in components]
        jac = [mexpr.diff_expr(c, i + 1) for c in components for i in range(n)]
        hess = [mexpr.diff_expr(d, j + 1) for d in jac for j in range(n)]
        self._f = mexpr.compile_exprs(components)
        self._j = mexpr.compile_exprs(jac)
        self._h = mexpr.compile_exprs(hess)

    def __call__(self, x):
        n = self.dim
        xs = list(map(float, x))
        return (np.array(self._f(xs)), np.array(self._j(xs)).reshape(n, n),
                np.array(self._h(xs)).reshape(n, n, n))

    def image(self, x):
        return np.array(self._f(list(map(float, x))))

    def describe(self):
        return self.source


# ---------------------------------------------------------------------------
# the manifold
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ManifoldSpec:
    name: str
    dim: int
    charts: tuple
    transitions: dict = field(default_factory=dict)
    injectivity_radius: float = math.inf
    epsilon: float = 1.0
    params: dict = field(default_factory=dict)
    # when a point's domain safety exceeds this, try to move it to another chart
    switch_ratio: float = 0.95

    @property
    def kind(self) -> str:
        return self.params.get("kind", "custom")

    @property
    def radius(self) -> float:
        return self.params.get("radius", 1.0)

    def chart_index(self, chart) -> int:
        if isinstance(chart, (int, np.integer)):
            if not 0 <= chart < len(self.charts):
                raise ConfigError(f"no chart with index {chart}")
            return int(chart)
        for i, c in enumerate(self.charts):
            if c.name == chart:
                return i
        raise ConfigError(f"no chart named {chart!r}")

    def describe(self) -> dict:
        return {
            "name": self.name,
            "dim": self.dim,
            "params": {k: v for k, v in sorted(self.params.items())},
            "epsilon": self.epsilon if math.isfinite(self.epsilon) else "inf",
            "charts": [{"name": c.name, "domain": c.domain.describe(), "metric": c.metric.describe()}
                       for c in self.charts],
            "transitions": [{"from": a, "to": b, "map": t.describe()}
                            for (a, b), t in sorted(self.transitions.items())],
        }

    @property
    def hash(self) -> str:
        blob = json.dumps(self.describe(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    # -- chart bookkeeping -------------------------------------------------

    def contains(self, chart: int, x) -> bool:
        return self.charts[chart].domain.contains(x)

    def safety(self, chart: int, x) -> float:
        return self.charts[chart].domain.safety(x)

    def to_chart(self, chart: int, x, target: int, strict: bool = True):
        """Coordinates of the point ``(chart, x)`` in ``target``."""
        x = np.asarray(x, float)
        if chart == target:
            return x
        try:
            img = _transition(self, chart, target).image(x)
        except (DomainError, ZeroDivisionError) as exc:
            raise NotInOverlap(str(exc)) from None
        if not strict:
            return img
        if not (self.contains(chart, x) and self.contains(target, img)):
            raise NotInOverlap(f"point {x} of chart {chart} is not in the overlap with chart {target}")
        return img

    def push_vector(self, chart: int, x, v, target: int):
        """Return ``(image, dlambda @ v)`` for the coordinate change chart -> target."""
        x = np.asarray(x, float)
        if chart == target:
            return x, np.asarray(v, float)
        img, jac, _ = chart_transition(self, chart, target, x)
        return img, jac @ np.asarray(v, float)

    def rechart(self, chart: int, x):
        """Move ``(chart, x)`` to a safer chart when it is near the edge of its domain."""
        s = self.safety(chart, x)
        if s <= self.switch_ratio:
            return chart, np.asarray(x, float)
        best = (s, chart, np.asarray(x, float))
        for (a, b), tr in self.transitions.items():
            if a != chart:
                continue
            try:
                img = tr.image(x)
            except (NotInOverlap, DomainError, ZeroDivisionError):
                continue
            sb = self.safety(b, img)
            if sb < best[0]:
                best = (sb, b, img)
        return best[1], best[2]

    def best_chart(self, chart: int, x):
        """Chart in which ``(chart, x)`` sits deepest inside the domain."""
        best = (self.safety(chart, x), chart, np.asarray(x, float))
        for (a, b), tr in self.transitions.items():
            if a != chart:
                continue
            try:
                img = tr.image(x)
            except (NotInOverlap, DomainError, ZeroDivisionError):
                continue
            sb = self.safety(b, img)
            if sb < best[0]:
                best = (sb, b, img)
        return best[1], best[2]


def _transition(m: ManifoldSpec, a: int, b: int) -> Transition:
    try:
        return m.transitions[(a, b)]
    except KeyError:
        raise NotInOverlap(f"{m.name}: no transition from chart {a} to chart {b}") from None


def _check_domain(m: ManifoldSpec, chart: int, x):
    if not m.contains(chart, x):
        raise OutOfDomain(f"{m.name}: point {np.asarray(x).tolist()} outside chart {m.charts[chart].name!r}")


# ---------------------------------------------------------------------------
# pointwise geometry
# ---------------------------------------------------------------------------

def metric_at(m: ManifoldSpec, chart: int, x) -> np.ndarray:
    """Metric matrix at ``x`` in ``chart``."""
    x = np.asarray(x, float)
    _check_domain(m, chart, x)
    return m.charts[chart].metric.metric(x)


def inner(m: ManifoldSpec, chart: int, x, a, b) -> float:
    return float(np.asarray(a) @ metric_at(m, chart, x) @ np.asarray(b))


def norm(m: ManifoldSpec, chart: int, x, v) -> float:
    return math.sqrt(max(inner(m, chart, x, v, v), 0.0))


def christoffel(m: ManifoldSpec, chart: int, x, method: str = "auto") -> np.ndarray:
    """Christoffel symbols ``gamma[k, i, j]`` of the Levi-Civita connection.

    ``method="fd"`` forces central differences of the metric (step 1e-6),
    which is what charts without symbolic derivatives use anyway.
    """
    x = np.asarray(x, float)
    _check_domain(m, chart, x)
    prov = m.charts[chart].metric
    if method == "fd":
        return christoffel_fd(prov.metric, x)
    return prov.christoffel(x)


def christoffel_derivative(m: ManifoldSpec, chart: int, x) -> np.ndarray:
    x = np.asarray(x, float)
    _check_domain(m, chart, x)
    return m.charts[chart].metric.christoffel_derivative(x)


def riemann(m: ManifoldSpec, chart: int, x) -> np.ndarray:
    """Riemann tensor ``R[k, l, i, j]`` with R(d_i, d_j) d_l = R^k_lij d_k."""
    gam = christoffel(m, chart, x)
    dgam = christoffel_derivative(m, chart, x)
    # d_i Gamma^k_jl - d_j Gamma^k_il + Gamma^k_im Gamma^m_jl - Gamma^k_jm Gamma^m_il
    return (np.einsum("ikjl->klij", dgam) - np.einsum("jkil->klij", dgam)
            + np.einsum("kim,mjl->klij", gam, gam) - np.einsum("kjm,mil->klij", gam, gam))


def curvature_tensor(m: ManifoldSpec, chart: int, x, X, Y, Z) -> np.ndarray:
    """Components of R(X, Y)Z at ``x``."""
    return np.einsum("klij,i,j,l->k", riemann(m, chart, x), X, Y, Z)


def sectional_curvature(m: ManifoldSpec, chart: int, x, X, Y) -> float:
    g = metric_at(m, chart, x)
    X = np.asarray(X, float)
    Y = np.asarray(Y, float)
    gram = (X @ g @ X) * (Y @ g @ Y) - (X @ g @ Y) ** 2
    if gram <= 1e-12:
        raise DegeneratePlane(f"X and Y span a degenerate plane (Gram determinant {gram:.3g})")
    RXYY = curvature_tensor(m, chart, x, X, Y, Y)
    return float(RXYY @ g @ X) / gram


def chart_transition(m: ManifoldSpec, src: int, dst: int, x, strict: bool = True):
    """``(image, dlambda, d2lambda)`` of the coordinate change src -> dst at ``x``.

    With ``strict=False`` the chart domains are not enforced, only the
    transition formula itself; finite-difference stencils that straddle a
    chart edge use this.
    """
    x = np.asarray(x, float)
    if src == dst:
        n = m.dim
        return x.copy(), np.eye(n), np.zeros((n, n, n))
    tr = _transition(m, src, dst)
    if strict and not m.contains(src, x):
        raise NotInOverlap(f"point {x.tolist()} outside chart {src}")
    try:
        img, jac, hess = tr(x)
    except (DomainError, ZeroDivisionError) as exc:
        raise NotInOverlap(str(exc)) from None
    if not np.all(np.isfinite(img)):
        raise NotInOverlap(f"transition undefined at {x.tolist()}")
    if strict and not m.contains(dst, img):
        raise NotInOverlap(f"image {img.tolist()} outside chart {dst}")
    return img, jac, hess


# ---------------------------------------------------------------------------
# builtins
# ---------------------------------------------------------------------------

def euclidean(n: int = 2) -> ManifoldSpec:
    chart = Chart("R%d" % n, Everywhere(n), ConformalMetric(0, 1.0))
    return ManifoldSpec(f"euclidean({n})", n, (chart,), {}, math.inf, math.inf,
                        {"kind": "euclidean"})


def flat_torus(n: int = 2, period: float = 2 * math.pi) -> ManifoldSpec:
    """Flat torus seen through its covering chart R^n (coordinates are lifts)."""
    chart = Chart("cover", Everywhere(n), ConformalMetric(0, 1.0))
    return ManifoldSpec(f"flat-torus({n})", n, (chart,), {}, math.inf, math.inf,
                        {"kind": "flat-torus", "period": float(period)})


def hyperbolic(n: int = 2) -> ManifoldSpec:
    chart = Chart("poincare", Ball(tuple([0.0] * n), 1.0), ConformalMetric(+1, 1.0))
    return ManifoldSpec(f"hyperbolic({n})", n, (chart,), {}, math.inf, math.inf,
                        {"kind": "hyperbolic"})


SPHERE_CHART_RADIUS = 2.0
SPHERE_SWITCH_RADIUS = 1.9


def sphere(n: int = 2, radius: float = 1.0) -> ManifoldSpec:
    """Round sphere of the given radius with two stereographic charts.

    Chart 0 ("north") has the north pole at its origin, chart 1 ("south")
    the south pole; both are related by x -> x/|x|^2.
    """
    dom = Ball(tuple([0.0] * n), SPHERE_CHART_RADIUS, closed=True)
    met = ConformalMetric(-1, radius)
    charts = (Chart("north", dom, met), Chart("south", dom, met))
    inv = InversionTransition()
    inj = math.pi * radius
    return ManifoldSpec(f"sphere({n},{radius:g})", n, charts, {(0, 1): inv, (1, 0): inv},
                        inj, 0.9 * inj, {"kind": "sphere", "radius": float(radius)},
                        switch_ratio=SPHERE_SWITCH_RADIUS / SPHERE_CHART_RADIUS)


def open_disk() -> ManifoldSpec:
    """Open unit disk with the flat metric: the standard incomplete example."""
    return from_config({
        "name": "open-disk",
        "dim": 2,
        "charts": [{"name": "disk", "g": [["1", "0"], ["0", "1"]],
                    "domain": {"ball": {"center": [0, 0], "radius": 1}}}],
    })


def from_metric_function(fn: Callable, dim: int, domain: Optional[Domain] = None,
                         name: str = "custom", epsilon: float = 1.0) -> ManifoldSpec:
    """Single-chart manifold from a Python metric function (finite-difference derivatives)."""
    chart = Chart(name, domain or Everywhere(dim), CallableMetric(fn, dim, name))
    return ManifoldSpec(name, dim, (chart,), {}, math.inf, epsilon, {"kind": "custom"})


# ---------------------------------------------------------------------------
# config files
# ---------------------------------------------------------------------------

_BUILTINS = {
    "euclidean": lambda dim=2, **kw: euclidean(dim),
    "sphere": lambda dim=2, radius=1.0, **kw: sphere(dim, radius),
    "hyperbolic": lambda dim=2, **kw: hyperbolic(dim),
    "flat-torus": lambda dim=2, period=2 * math.pi, **kw: flat_torus(dim, period),
    "open-disk": lambda **kw: open_disk(),
}


def builtin(name: str, **params) -> ManifoldSpec:
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise ConfigError(f"unknown builtin manifold {name!r}; known: {sorted(_BUILTINS)}") from None
    return factory(**params)


def _parse_domain(spec, dim):
    if spec is None or spec == "everywhere":
        return Everywhere(dim)
    if isinstance(spec, dict) and "ball" in spec:
        b = spec["ball"]
        center = tuple(float(c) for c in b.get("center", [0.0] * dim))
        if len(center) != dim:
            raise ConfigError("ball centre has wrong dimension")
        return Ball(center, float(b["radius"]))
    if isinstance(spec, dict) and "box" in spec:
        spec = spec["box"]
    if isinstance(spec, list) and len(spec) == dim:
        lo = tuple(float(a) if a is not None else -math.inf for a, _ in spec)
        hi = tuple(float(b) if b is not None else math.inf for _, b in spec)
        if any(a >= b for a, b in zip(lo, hi)):
            raise ConfigError("empty box domain")
        return Box(lo, hi)
    raise ConfigError(f"cannot read chart domain {spec!r}")


def _parse_entry(src, dim, where):
    try:
        e = mexpr.parse_expr(str(src))
    except Exception as exc:
        raise ConfigError(f"{where}: {exc}") from None
    if mexpr.max_var(e) > dim:
        raise ConfigError(f"{where}: uses x{mexpr.max_var(e)} in dimension {dim}")
    return e


def from_config(cfg: dict, validate: bool = True, seed: int = 0) -> ManifoldSpec:
    """Build a manifold from the JSON config structure.

    Either ``{"builtin": {"name": ..., params...}}`` or
    ``{"dim": n, "charts": [...], "transitions": [...], "epsilon": eps}``.
    """
    if "builtin" in cfg:
        b = dict(cfg["builtin"])
        return builtin(b.pop("name"), **b)
    try:
        dim = int(cfg["dim"])
        chart_specs = cfg["charts"]
    except (KeyError, TypeError, ValueError):
        raise ConfigError("manifold config needs 'dim' and 'charts'") from None
    if dim < 1 or not chart_specs:
        raise ConfigError("manifold config needs dim >= 1 and at least one chart")
    charts = []
    names = []
    for ci, cs in enumerate(chart_specs):
        name = cs.get("name", f"chart{ci}")
        g = cs.get("g")
        if not isinstance(g, list) or len(g) != dim or any(len(row) != dim for row in g):
            raise ConfigError(f"chart {name!r}: 'g' must be a {dim}x{dim} array")
        entries = [[_parse_entry(g[i][j], dim, f"chart {name!r} g[{i}][{j}]") for j in range(dim)]
                   for i in range(dim)]
        for i in range(dim):
            for j in range(i + 1, dim):
                if entries[i][j] != entries[j][i]:
                    raise ConfigError(f"chart {name!r}: metric is not symmetric at ({i},{j})")
        charts.append(Chart(name, _parse_domain(cs.get("domain"), dim), ExprMetric(entries, dim)))
        names.append(name)
    transitions = {}
    for ts in cfg.get("transitions", []):
        try:
            a, b = names.index(ts["from"]), names.index(ts["to"])
        except (KeyError, ValueError):
            raise ConfigError(f"transition {ts!r} refers to unknown charts") from None
        comps = ts.get("map")
        if not isinstance(comps, list) or len(comps) != dim:
            raise ConfigError(f"transition {ts['from']}->{ts['to']}: 'map' needs {dim} expressions")
        transitions[(a, b)] = ExprTransition(
            [_parse_entry(c, dim, f"transition {ts['from']}->{ts['to']}") for c in comps], dim)
    eps = float(cfg.get("epsilon", 1.0))
    m = ManifoldSpec(cfg.get("name", "expr-manifold"), dim, tuple(charts), transitions,
                     math.inf, eps, {"kind": "expr"})
    if validate:
        validate_manifold(m, seed=seed)
    return m


def validate_manifold(m: ManifoldSpec, samples: int = 32, seed: int = 0):
    """Check metric positivity and transition round trips at sample points."""
    rng = np.random.default_rng(seed)
    for ci, chart in enumerate(m.charts):
        for x in chart.domain.sample(rng, samples):
            try:
                g = chart.metric.metric(x)
            except DomainError as exc:
                raise ConfigError(f"chart {chart.name!r}: metric undefined at {x.tolist()}: {exc}") from None
            if not np.allclose(g, g.T):
                raise ConfigError(f"chart {chart.name!r}: metric not symmetric")
            if np.linalg.eigvalsh(g).min() <= 1e-12:
                raise ConfigError(f"chart {chart.name!r}: metric not positive definite at {x.tolist()}")
    for (a, b), tr in m.transitions.items():
        back = m.transitions.get((b, a))
        if back is None:
            continue
        for x in m.charts[a].domain.sample(rng, samples):
            try:
                y = tr.image(x)
                if not m.contains(b, y):
                    continue
                z = back.image(y)
            except (DomainError, ZeroDivisionError, NotInOverlap):
                continue
            if np.max(np.abs(z - x)) > 1e-10:
                raise ConfigError(f"transitions {a}->{b}->{a} do not compose to the identity at {x.tolist()}")


def parse_manifold_arg(text: str) -> ManifoldSpec:
    """``sphere:2:1.0``, ``hyperbolic:2``, ``euclidean:3``, ``open-disk`` or a config path."""
    p = Path(text)
    if p.suffix == ".json" or p.exists():
        try:
            cfg = json.loads(p.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read manifold config {text}: {exc}") from None
        return from_config(cfg)
    name, *args = text.split(":")
    try:
        if name == "sphere":
            return sphere(int(args[0]) if args else 2, float(args[1]) if len(args) > 1 else 1.0)
        if name in ("euclidean", "hyperbolic", "flat-torus"):
            return builtin(name, dim=int(args[0]) if args else 2)
    except ValueError:
        raise ConfigError(f"bad manifold parameters in {text!r}") from None
    return builtin(name)


def manifold_from_json(obj) -> ManifoldSpec:
    """The ``"manifold"`` field of curve files: a name string or an inline config."""
    if isinstance(obj, str):
        return parse_manifold_arg(obj)
    if isinstance(obj, dict):
        return from_config(obj)
    raise ConfigError(f"cannot interpret manifold {obj!r}")
