"""Discretized path space.

A path is sampled on the uniform grid ``t_i = i/N``; every sample carries the
chart it is expressed in, its coordinates and its t-derivative. Vector
fields along a path store their components in the chart of the sample they
sit at, together with their t-derivatives, which is exactly the data the C1
sup-norm

    ||X|| = sup_t max(|mu(t)|, |mu'(t)|)

needs (``mu`` the chart representative, ``|.|`` the Euclidean norm of the
coordinate vector).

Changing chart along a path transforms a field as

    v  = dlambda u
    v' = dlambda u' + d2lambda(gamma', u)

which is what :func:`chart_change_field` implements and what
:func:`norm_equivalence_bound` bounds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from . import fd
from .errors import (
    AntipodalDegeneracy,
    ChartMismatch,
    CoverInvalid,
    DomainError,
    NoConvergence,
    NotInOverlap,
    OutOfDomain,
    RadiusExceeded,
    TooFewSamples,
)
from .expr import compile_exprs, diff_expr, parse_expr
from .geodesic import Point, TangentVector, exp_map, log_map
from .manifold import ManifoldSpec, chart_transition, christoffel, curvature_tensor, inner, norm
from .parallel import pmap

DEFAULT_N = 100
MIN_N = 16
COVER_SAFETY = 0.9
COVER_OVERLAP = 0.05
FIBER_STEP = 1e-3


# ---------------------------------------------------------------------------
# chart bookkeeping
# ---------------------------------------------------------------------------

def _best_chart(m: ManifoldSpec, chart: int, x):
    """(chart, coordinates) of the chart in which the point sits deepest."""
    return m.best_chart(chart, x)


def _rechart(m: ManifoldSpec, charts, x, dx=None):
    """Re-chart a sample sequence with hysteresis.

    A sample stays in the current chart while its domain safety is at most
    ``m.switch_ratio``; past that the sequence moves to the best chart and
    stays there until it, in turn, nears its edge.
    """
    charts = np.asarray(charts, dtype=np.int64).copy()
    x = np.array(x, float)
    dx = None if dx is None else np.array(dx, float)
    if len(m.charts) == 1:
        return charts, x, dx
    cur = _best_chart(m, int(charts[0]), x[0])[0]
    for i in range(len(charts)):
        c = int(charts[i])
        y = None
        if c == cur:
            y = x[i]
        else:
            try:
                y = m.to_chart(c, x[i], cur)
            except (NotInOverlap, DomainError, ZeroDivisionError):
                y = None
        if y is None or m.safety(cur, y) > m.switch_ratio:
            cur, y = _best_chart(m, c, x[i])
        if cur != c:
            if dx is not None:
                dx[i] = chart_transition(m, c, cur, x[i])[1] @ dx[i]
            x[i] = y
            charts[i] = cur
    return charts, x, dx


def _point_in(m: ManifoldSpec, c_from: int, x, c_to: int, strict: bool = True):
    return x if c_from == c_to else m.to_chart(c_from, x, c_to, strict=strict)


def _vector_in(m: ManifoldSpec, c_from: int, x, u, c_to: int, strict: bool = True):
    if c_from == c_to:
        return u
    return chart_transition(m, c_from, c_to, x, strict=strict)[1] @ u


def _field_sample_in(m, c_from, x, dx, u, du, c_to):
    """(x, dx, u, du) of one sample re-expressed in chart ``c_to``."""
    if c_from == c_to:
        return x, dx, u, du
    img, jac, hess = chart_transition(m, c_from, c_to, x)
    return (img, jac @ dx, jac @ u,
            jac @ du + np.einsum("kij,i,j->k", hess, dx, u))


def diff_along(m: ManifoldSpec, charts, x, h: float, vecs=None, deriv: int = 1):
    """t-derivatives of sampled positions (and vectors) along a chart-labelled line.

    Runs of samples sharing one chart use :func:`pathspace.fd.diff`
    directly; at samples whose stencil crosses a chart boundary the
    neighbours are first expressed in the sample's own chart (through the
    transition formula, even slightly past the chart's declared domain).

    Returns ``dx`` or ``(dx, dvecs)``; ``deriv`` selects first or second
    derivatives.
    """
    charts = np.asarray(charts)
    x = np.asarray(x, float)
    n = len(x)
    dx = fd.diff(x, h, deriv)
    dv = None if vecs is None else fd.diff(np.asarray(vecs, float), h, deriv)
    if np.all(charts == charts[0]):
        return dx if vecs is None else (dx, dv)
    for i in range(n):
        offs = fd.stencil(i, n, deriv)
        idx = [i + o for o in offs]
        if all(charts[j] == charts[i] for j in idx):
            continue
        c = int(charts[i])
        dx[i] = fd.diff_at([_point_in(m, int(charts[j]), x[j], c, False) for j in idx], h, offs, deriv)
        if vecs is not None:
            dv[i] = fd.diff_at([_vector_in(m, int(charts[j]), x[j], vecs[j], c, False) for j in idx],
                               h, offs, deriv)
    return dx if vecs is None else (dx, dv)


# ---------------------------------------------------------------------------
# paths and fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DiscretePath:
    """A path sampled at ``t_i = i/N``, ``i = 0..N``."""

    manifold: ManifoldSpec
    charts: np.ndarray
    x: np.ndarray
    dx: np.ndarray

    def __post_init__(self):
        charts = np.asarray(self.charts, dtype=np.int64)
        x = np.asarray(self.x, float)
        dx = np.asarray(self.dx, float)
        if x.ndim != 2 or x.shape[1] != self.manifold.dim:
            raise ValueError(f"samples must have shape (N+1, {self.manifold.dim})")
        if charts.shape != (len(x),) or dx.shape != x.shape:
            raise ValueError("charts, samples and derivative samples disagree in length")
        if len(x) < 5:
            raise TooFewSamples(f"a discrete path needs N >= 4, got {len(x) - 1}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(dx))):
            raise DomainError("path samples must be finite")
        for i, (c, y) in enumerate(zip(charts, x)):
            if not 0 <= c < len(self.manifold.charts) or not self.manifold.contains(int(c), y):
                raise OutOfDomain(f"sample {i} lies outside chart {c}")
        m = self.manifold
        for i in np.flatnonzero(charts[1:] != charts[:-1]):
            # consecutive samples in different charts must share one of the two charts
            a, b = int(charts[i]), int(charts[i + 1])
            try:
                m.to_chart(b, x[i + 1], a)
            except NotInOverlap:
                try:
                    m.to_chart(a, x[i], b)
                except NotInOverlap:
                    raise NotInOverlap(f"samples {i} and {i + 1} switch from chart {a} to {b} "
                                       "without a common chart") from None
        object.__setattr__(self, "charts", charts)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "dx", dx)

    # -- construction ---------------------------------------------------------

    @classmethod
    def from_samples(cls, m: ManifoldSpec, charts, x, dx=None, rechart: bool = False) -> "DiscretePath":
        """Path from grid samples; derivatives by fourth-order differences when not given."""
        x = np.atleast_2d(np.asarray(x, float))
        if len(x) < 5:
            raise TooFewSamples(f"a discrete path needs N >= 4, got {len(x) - 1}")
        charts = np.broadcast_to(np.asarray(charts, dtype=np.int64), (len(x),)).copy()
        if rechart:
            charts, x, dx = _rechart(m, charts, x, dx)
        if dx is None:
            dx = diff_along(m, charts, x, 1.0 / (len(x) - 1))
        return cls(m, charts, x, dx)

    @classmethod
    def from_function(cls, m: ManifoldSpec, f: Callable, N: int = DEFAULT_N, chart: int = 0,
                      df: Optional[Callable] = None, rechart: bool = True) -> "DiscretePath":
        """Sample ``f(t)`` (coordinates in ``chart``) and optionally its derivative ``df(t)``."""
        t = np.linspace(0.0, 1.0, N + 1)
        x = np.array([f(ti) for ti in t], float)
        dx = None if df is None else np.array([df(ti) for ti in t], float)
        return cls.from_samples(m, np.full(N + 1, chart), x, dx, rechart=rechart)

    # -- access ---------------------------------------------------------------

    @property
    def N(self) -> int:
        return len(self.x) - 1

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def t(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.N + 1)

    @property
    def dim(self) -> int:
        return self.manifold.dim

    def point(self, i: int) -> Point:
        return Point(int(self.charts[i]), self.x[i])

    def single_chart(self) -> Optional[int]:
        c = int(self.charts[0])
        return c if np.all(self.charts == c) else None

    def in_chart(self, chart: int) -> "DiscretePath":
        """The same path with every sample expressed in ``chart``."""
        m = self.manifold
        x = np.empty_like(self.x)
        dx = np.empty_like(self.dx)
        for i, (c, y, dy) in enumerate(zip(self.charts, self.x, self.dx)):
            if c == chart:
                x[i], dx[i] = y, dy
            else:
                img, jac, _ = chart_transition(m, int(c), chart, y)
                x[i], dx[i] = img, jac @ dy
        return DiscretePath(m, np.full(len(x), chart), x, dx)

    def __len__(self):
        return len(self.x)


@dataclass(frozen=True, eq=False)
class PathTangent:
    """A vector field along a :class:`DiscretePath` (components in each sample's chart)."""

    path: DiscretePath
    v: np.ndarray
    dv: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, float)
        dv = np.asarray(self.dv, float)
        if v.shape != self.path.x.shape or dv.shape != v.shape:
            raise ValueError(f"field samples must have shape {self.path.x.shape}")
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(dv))):
            raise DomainError("field samples must be finite")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "dv", dv)

    @classmethod
    def zeros(cls, path: DiscretePath) -> "PathTangent":
        return cls(path, np.zeros_like(path.x), np.zeros_like(path.x))

    @classmethod
    def from_samples(cls, path: DiscretePath, v, dv=None) -> "PathTangent":
        v = np.asarray(v, float)
        if dv is None:
            dv = diff_along(path.manifold, path.charts, path.x, path.h, v)[1]
        return cls(path, v, dv)

    @classmethod
    def from_function(cls, path: DiscretePath, f: Callable, df: Optional[Callable] = None) -> "PathTangent":
        """Field with components ``f(t)`` in the chart of each sample."""
        v = np.array([f(t) for t in path.t], float)
        dv = None if df is None else np.array([df(t) for t in path.t], float)
        return cls.from_samples(path, v, dv)

    def at(self, i: int) -> TangentVector:
        return TangentVector(int(self.path.charts[i]), self.path.x[i], self.v[i])

    def _check(self, other: "PathTangent"):
        if other.path is not self.path:
            raise ChartMismatch("fields live along different paths")

    def __add__(self, other: "PathTangent") -> "PathTangent":
        self._check(other)
        return PathTangent(self.path, self.v + other.v, self.dv + other.dv)

    def __sub__(self, other: "PathTangent") -> "PathTangent":
        self._check(other)
        return PathTangent(self.path, self.v - other.v, self.dv - other.dv)

    def __neg__(self) -> "PathTangent":
        return PathTangent(self.path, -self.v, -self.dv)

    def __mul__(self, a: float) -> "PathTangent":
        return PathTangent(self.path, a * self.v, a * self.dv)

    __rmul__ = __mul__

    def in_chart(self, chart: int) -> "PathTangent":
        """Field with every sample expressed in ``chart`` (along ``path.in_chart(chart)``)."""
        p = self.path
        m = p.manifold
        v = np.empty_like(self.v)
        dv = np.empty_like(self.dv)
        for i in range(len(p)):
            _, _, v[i], dv[i] = _field_sample_in(m, int(p.charts[i]), p.x[i], p.dx[i],
                                                 self.v[i], self.dv[i], chart)
        return PathTangent(p.in_chart(chart), v, dv)

    def sup(self) -> float:
        return float(np.max(np.abs(self.v)))


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------

def resample_path(m: ManifoldSpec, samples, N: int = DEFAULT_N, chart: int = 0,
                  t=None) -> DiscretePath:
    """Cubic-spline resampling of point samples onto the uniform grid.

    ``samples`` are coordinates in ``chart`` at parameters ``t`` (uniform on
    [0, 1] when omitted). Derivatives come from the spline.
    """
    x = np.atleast_2d(np.asarray(samples, float))
    if len(x) < 4:
        raise TooFewSamples(f"need at least 4 samples to resample, got {len(x)}")
    if N < MIN_N:
        raise TooFewSamples(f"grid size N must be at least {MIN_N}, got {N}")
    if x.shape[1] != m.dim:
        raise ValueError(f"samples must have {m.dim} coordinates")
    t = np.linspace(0.0, 1.0, len(x)) if t is None else np.asarray(t, float)
    if t.shape != (len(x),) or np.any(np.diff(t) <= 0) or t[0] != 0.0 or t[-1] != 1.0:
        raise ValueError("sample parameters must increase strictly from 0 to 1")
    for i, y in enumerate(x):
        if not m.contains(chart, y):
            raise OutOfDomain(f"sample {i} lies outside chart {chart}")
    spline = CubicSpline(t, x, axis=0)
    tt = np.linspace(0.0, 1.0, N + 1)
    return DiscretePath.from_samples(m, np.full(N + 1, chart), spline(tt), spline(tt, 1), rechart=True)


# ---------------------------------------------------------------------------
# covers and norms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChartCover:
    """Closed parameter intervals ``[t_lo, t_hi]`` (as grid indices) with a chart each."""

    intervals: tuple

    def describe(self, N: int) -> list:
        return [{"t": [lo / N, hi / N], "samples": [lo, hi], "chart": c} for lo, hi, c in self.intervals]

    def validate(self, path: DiscretePath):
        iv = self.intervals
        if not iv or iv[0][0] != 0 or iv[-1][1] != path.N:
            raise CoverInvalid("cover intervals must span [0, 1]")
        for (lo, hi, _), (lo2, _, _) in zip(iv, iv[1:]):
            if lo2 > hi:
                raise CoverInvalid(f"gap between samples {hi} and {lo2}")
        m = path.manifold
        for lo, hi, c in iv:
            if lo > hi:
                raise CoverInvalid("empty cover interval")
            for i in range(lo, hi + 1):
                try:
                    y = _point_in(m, int(path.charts[i]), path.x[i], c)
                except (NotInOverlap, DomainError, ZeroDivisionError):
                    raise CoverInvalid(f"sample {i} is not in chart {c}") from None
                if not m.contains(c, y):
                    raise CoverInvalid(f"sample {i} is not in chart {c}")


def build_cover(path: DiscretePath, safety: float = COVER_SAFETY,
                overlap: float = COVER_OVERLAP) -> ChartCover:
    """Greedy sweep in t.

    The current interval grows while samples keep domain safety at most
    ``safety`` in its chart; the next interval starts up to ``overlap`` (in t)
    before the break so consecutive intervals share samples.
    """
    m = path.manifold
    N = path.N

    def fits(i, c, thr=safety):
        try:
            y = _point_in(m, int(path.charts[i]), path.x[i], c)
        except (NotInOverlap, DomainError, ZeroDivisionError):
            return False
        return m.contains(c, y) and m.safety(c, y) <= thr

    if len(m.charts) == 1:
        return ChartCover(((0, N, int(path.charts[0])),))
    intervals = []
    start = 0
    chart = _best_chart(m, int(path.charts[0]), path.x[0])[0]
    while True:
        j = start
        while j < N and fits(j + 1, chart):
            j += 1
        if j == N:
            intervals.append((start, N, chart))
            return ChartCover(tuple(intervals))
        new = _best_chart(m, int(path.charts[j + 1]), path.x[j + 1])[0]
        thr = safety if fits(j + 1, new) else 1.0
        k0 = max(start + 1, int(math.ceil((j * path.h - overlap) * N - 1e-9)))
        k = next((k for k in range(k0, j + 1)
                  if all(fits(i, new, thr) for i in range(k, j + 2))), None)
        if k is None:
            raise CoverInvalid(f"no chart overlap around t={(j + 0.5) * path.h:.6g}")
        intervals.append((start, j, chart))
        start, chart = k, new


def _represent(X: PathTangent, lo: int, hi: int, chart: int):
    """(x, dx, u, du) arrays of samples lo..hi expressed in ``chart``."""
    p = X.path
    m = p.manifold
    rows = [_field_sample_in(m, int(p.charts[i]), p.x[i], p.dx[i], X.v[i], X.dv[i], chart)
            for i in range(lo, hi + 1)]
    return tuple(np.array(col) for col in zip(*rows))


def c1_norm(X: PathTangent, cover: Optional[ChartCover] = None, breakdown: bool = False):
    """C1 sup-norm of a field, summed over the intervals of ``cover``.

    With ``breakdown=True`` returns ``(total, per_interval_values, cover)``.
    """
    cover = cover or build_cover(X.path)
    cover.validate(X.path)
    parts = []
    for lo, hi, c in cover.intervals:
        _, _, u, du = _represent(X, lo, hi, c)
        parts.append(float(max(np.max(np.linalg.norm(u, axis=1)), np.max(np.linalg.norm(du, axis=1)))))
    total = float(sum(parts))
    return (total, parts, cover) if breakdown else total


def chart_change_field(X: PathTangent, src: int, dst: int) -> PathTangent:
    """Express ``X`` (read in chart ``src``) in chart ``dst`` by the product rule."""
    return X.in_chart(src).in_chart(dst)


def _bilinear_bound(hess: np.ndarray) -> float:
    """Upper bound of the bilinear operator norm of ``hess[k, i, j]``."""
    return float(math.sqrt(sum(np.linalg.norm(H, 2) ** 2 for H in hess)))


def pointwise_equivalence_bounds(m: ManifoldSpec, path: DiscretePath, src: int, dst: int) -> np.ndarray:
    """Per-sample ``|dlambda| + |gamma'| |d2lambda|`` for the change src -> dst.

    At every sample, ``max(|v|, |v'|) <= bound * max(|u|, |u'|)``.
    """
    p = path.in_chart(src)
    out = np.empty(len(p))
    for i, (y, dy) in enumerate(zip(p.x, p.dx)):
        _, jac, hess = chart_transition(m, src, dst, y)
        out[i] = np.linalg.norm(jac, 2) + np.linalg.norm(dy) * _bilinear_bound(hess)
    return out


def norm_equivalence_bound(m: ManifoldSpec, path: DiscretePath, src: int, dst: int) -> float:
    """Constant ``c`` with ``||v|| <= c ||u||`` for fields along ``path``.

    ``c = max(A, A + B C)`` where A, B, C are grid suprema of ``|dlambda|``,
    ``|gamma'|`` (in ``src`` coordinates) and ``|d2lambda|``.
    """
    p = path.in_chart(src)
    A = B = C = 0.0
    for y, dy in zip(p.x, p.dx):
        _, jac, hess = chart_transition(m, src, dst, y)
        A = max(A, float(np.linalg.norm(jac, 2)))
        B = max(B, float(np.linalg.norm(dy)))
        C = max(C, _bilinear_bound(hess))
    return max(A, A + B * C)


# ---------------------------------------------------------------------------
# exponential chart of path space
# ---------------------------------------------------------------------------

def path_exp_chart(gamma: DiscretePath, X: PathTangent, threads: Optional[int] = None) -> DiscretePath:
    """The path ``t_i -> exp_{gamma(t_i)} X(t_i)``."""
    m = gamma.manifold
    for i in range(len(gamma)):
        r = X.at(i).norm(m)
        if not r < m.epsilon:
            raise RadiusExceeded(f"|X(t_{i})| = {r:.6g} is not below the exponential-chart "
                                 f"radius {m.epsilon:.6g}", index=i)
    ends = pmap(lambda i: exp_map(m, TangentVector(int(gamma.charts[i]), gamma.x[i], X.v[i])),
                range(len(gamma)), threads)
    return DiscretePath.from_samples(m, [e.chart for e in ends], [e.x for e in ends])


def path_log_chart(gamma: DiscretePath, sigma: DiscretePath, threads: Optional[int] = None) -> PathTangent:
    """Field ``X`` along ``gamma`` with ``path_exp_chart(gamma, X) = sigma``."""
    m = gamma.manifold
    if len(sigma) != len(gamma):
        raise ValueError("paths must share the t-grid")

    def one(i):
        try:
            return log_map(m, gamma.point(i), sigma.point(i)).v
        except AntipodalDegeneracy as e:
            raise AntipodalDegeneracy(f"sample {i}: {e}", index=i, angle=e.angle) from None
        except NoConvergence as e:
            raise NoConvergence(f"sample {i}: {e}", index=i, residual=e.residual) from None

    return PathTangent.from_samples(gamma, np.array(pmap(one, range(len(gamma)), threads)))


def transition_operator(gamma1: DiscretePath, gamma2: DiscretePath, X: PathTangent,
                        threads: Optional[int] = None) -> PathTangent:
    """``Exp_{gamma2}^{-1} o Exp_{gamma1}`` applied to ``X``."""
    return path_log_chart(gamma2, path_exp_chart(gamma1, X, threads), threads)


def _fiber_map(m, g1: Point, g2: Point):
    def p(y):
        e = exp_map(m, TangentVector(g1.chart, g1.x, y))
        return log_map(m, g2, e).v
    return p


def transition_derivative_check(gamma1: DiscretePath, gamma2: DiscretePath, X: PathTangent,
                                h: PathTangent, step: float, fiber_step: float = FIBER_STEP,
                                threads: Optional[int] = None):
    """Compare a path-space difference quotient of the transition with its pointwise law.

    Returns ``(fd, analytic, max_gap)`` where ``fd`` is the centred quotient
    of the transition operator with step ``step`` and ``analytic`` is
    ``D_y p(t_i, X(t_i)) h(t_i)`` with the fibre Jacobian ``D_y p`` from
    fourth-order central differences (step ``fiber_step``) of
    ``p(t, y) = log_{gamma2(t)} exp_{gamma1(t)} y``.
    """
    m = gamma1.manifold
    plus = transition_operator(gamma1, gamma2, X + step * h, threads)
    minus = transition_operator(gamma1, gamma2, X - step * h, threads)
    fd_v = (plus.v - minus.v) / (2.0 * step)
    n = m.dim
    w = (1.0, -8.0, 8.0, -1.0)
    offs = (-2.0, -1.0, 1.0, 2.0)

    def one(i):
        p = _fiber_map(m, gamma1.point(i), gamma2.point(i))
        J = np.empty((n, n))
        for k in range(n):
            e = np.zeros(n)
            e[k] = fiber_step
            J[:, k] = sum(wk * p(X.v[i] + o * e) for wk, o in zip(w, offs)) / (12.0 * fiber_step)
        return J @ h.v[i]

    an_v = np.array(pmap(one, range(len(gamma1)), threads))
    fd_field = PathTangent.from_samples(gamma2, fd_v)
    an_field = PathTangent.from_samples(gamma2, an_v)
    return fd_field, an_field, float(np.max(np.abs(fd_v - an_v)))


# ---------------------------------------------------------------------------
# evaluation map and lifted fields
# ---------------------------------------------------------------------------

def _bracket(path: DiscretePath, t: float):
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t={t} outside [0, 1]")
    u = t * path.N
    k = round(u)
    if abs(u - k) <= 1e-9:
        # grid nodes are hit exactly despite rounding in t = i/N
        return (k, 0.0) if k < path.N else (path.N - 1, 1.0)
    i = min(int(math.floor(u)), path.N - 1)
    return i, u - i


def _hermite(a, da, b, db, h, u):
    return ((2 * u ** 3 - 3 * u ** 2 + 1) * a + (u ** 3 - 2 * u ** 2 + u) * h * da
            + (-2 * u ** 3 + 3 * u ** 2) * b + (u ** 3 - u ** 2) * h * db)


def evaluate_at(path: DiscretePath, t: float) -> Point:
    """``ev_t``: the path at ``t`` (cubic Hermite between grid nodes; exact on nodes)."""
    i, u = _bracket(path, t)
    if u == 0.0:
        return path.point(i)
    if u == 1.0:
        return path.point(i + 1)
    m = path.manifold
    c = int(path.charts[i])
    j = i + 1
    xb, dxb = path.x[j], path.dx[j]
    if path.charts[j] != c:
        img, jac, _ = chart_transition(m, int(path.charts[j]), c, xb)
        xb, dxb = img, jac @ dxb
    return Point(c, _hermite(path.x[i], path.dx[i], xb, dxb, path.h, u))


def d_evaluate_at(V: PathTangent, t: float) -> TangentVector:
    """Differential of ``ev_t``: the field ``V`` at ``t``, based at ``evaluate_at(V.path, t)``."""
    path = V.path
    i, u = _bracket(path, t)
    if u == 0.0 or u == 1.0:
        return V.at(i + int(u))
    m = path.manifold
    c = int(path.charts[i])
    j = i + 1
    _, _, vb, dvb = _field_sample_in(m, int(path.charts[j]), path.x[j], path.dx[j], V.v[j], V.dv[j], c)
    base = evaluate_at(path, t)
    return TangentVector(c, base.x, _hermite(V.v[i], V.dv[i], vb, dvb, path.h, u))


def _field_function(m: ManifoldSpec, K):
    """Normalize a field description to ``(F(chart, x), dF(chart, x) or None)``."""
    if callable(K):
        return K, None
    funcs, jacs = {}, {}
    for c, spec in dict(K).items():
        c = m.chart_index(c) if isinstance(c, str) else int(c)
        if callable(spec):
            funcs[c] = spec
            continue
        exprs = [parse_expr(s) if isinstance(s, str) else s for s in spec]
        if len(exprs) != m.dim:
            raise ValueError(f"field needs {m.dim} components per chart")
        f = compile_exprs(exprs)
        df = compile_exprs([diff_expr(e, k + 1) for e in exprs for k in range(m.dim)])
        funcs[c] = lambda x, f=f: np.array(f(list(x)), float)
        jacs[c] = lambda x, df=df: np.array(df(list(x)), float).reshape(m.dim, m.dim)

    def F(chart, x):
        if chart in funcs:
            return np.asarray(funcs[chart](x), float)
        for c, fc in funcs.items():
            try:
                y = m.to_chart(chart, x, c)
            except (NotInOverlap, DomainError, ZeroDivisionError):
                continue
            return _vector_in(m, c, y, np.asarray(fc(y), float), chart)
        raise DomainError(f"field is not defined in chart {chart}")

    def dF(chart, x):
        if chart in jacs:
            return jacs[chart](x)
        return None

    return F, dF


def _jacobian_fd(F, chart, x, h=1e-6):
    n = len(x)
    J = np.empty((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        J[:, k] = (F(chart, x + e) - F(chart, x - e)) / (2 * h)
    return J


def lift_vector_field(K, path: DiscretePath, dK: Optional[Callable] = None) -> PathTangent:
    """``K~(gamma)(t) = K(gamma(t))`` with derivative samples by the chain rule ``dK gamma'``.

    ``K`` is a callable ``K(chart, x)`` or a mapping ``chart -> components``
    (component expressions or a callable of ``x``).
    """
    m = path.manifold
    F, dF_sym = _field_function(m, K)
    v = np.empty_like(path.x)
    dv = np.empty_like(path.x)
    for i, (c, y, dy) in enumerate(zip(path.charts, path.x, path.dx)):
        c = int(c)
        try:
            v[i] = F(c, y)
            if dK is not None:
                J = dK(c, y)
            else:
                J = None if dF_sym is None else dF_sym(c, y)
            if J is None:
                J = _jacobian_fd(F, c, y)
        except (DomainError, ValueError, ZeroDivisionError, OverflowError) as e:
            raise DomainError(f"vector field undefined at sample {i}: {e}") from None
        dv[i] = np.asarray(J, float) @ dy
    return PathTangent(path, v, dv)


# ---------------------------------------------------------------------------
# induced connection and curvature
# ---------------------------------------------------------------------------

def covariant_derivative_grid(m: ManifoldSpec, charts, x, V, spacing: float, axis: int = 0,
                              velocity=None) -> np.ndarray:
    """Covariant derivative of a vector field sampled on a grid of points, along one grid axis.

    ``(nabla_a V) = d_a V + Gamma(x)(d_a x, V)`` pointwise; ``d_a`` by
    fourth-order differences along ``axis`` (grid spacing ``spacing``);
    ``velocity`` may supply ``d_a x`` exactly.
    """
    charts = np.moveaxis(np.asarray(charts), axis, 0)
    x = np.moveaxis(np.asarray(x, float), axis, 0)
    V = np.moveaxis(np.asarray(V, float), axis, 0)
    vel = None if velocity is None else np.moveaxis(np.asarray(velocity, float), axis, 0)
    L = x.shape[0]
    rest = x.shape[1:-1]
    n = x.shape[-1]
    cf = charts.reshape(L, -1)
    xf = x.reshape(L, -1, n)
    Vf = V.reshape(L, -1, n)
    velf = None if vel is None else vel.reshape(L, -1, n)
    out = np.empty_like(Vf)
    for line in range(xf.shape[1]):
        try:
            dx, dV = diff_along(m, cf[:, line], xf[:, line], spacing, Vf[:, line])
        except NotInOverlap as e:
            raise ChartMismatch(f"grid line {line}: {e}") from None
        if velf is not None:
            dx = velf[:, line]
        for j in range(L):
            gam = christoffel(m, int(cf[j, line]), xf[j, line])
            out[j, line] = dV[j] + np.einsum("kij,i,j->k", gam, dx[j], Vf[j, line])
    return np.moveaxis(out.reshape((L,) + rest + (n,)), 0, axis)


def induced_covariant_derivative(homotopy, V, s: Optional[int] = None):
    """Induced covariant derivative in s of a field ``V[s_j, t_i]`` along a homotopy.

    ``homotopy`` provides ``manifold``, ``s``, ``charts``, ``x`` and the
    transverse velocity ``v``. Returns the full grid, or the
    :class:`PathTangent` along ``Gamma(s_j, .)`` when ``s`` is an index.
    """
    m = homotopy.manifold
    hs = float(homotopy.s[1] - homotopy.s[0])
    D = covariant_derivative_grid(m, homotopy.charts, homotopy.x, V, hs, axis=0, velocity=homotopy.v)
    if s is None:
        return D
    return PathTangent.from_samples(homotopy.path_at(s), D[s])


def induced_curvature(m: ManifoldSpec, path: DiscretePath, X: PathTangent, Y: PathTangent,
                      Z: PathTangent) -> PathTangent:
    """``R~(X, Y)Z`` at every sample: the curvature of M applied pointwise along the path."""
    for F in (X, Y, Z):
        if F.path is not path and (len(F.path) != len(path) or not np.array_equal(F.path.charts, path.charts)):
            raise ChartMismatch("fields must live along the given path")
    out = np.array([curvature_tensor(m, int(c), y, X.v[i], Y.v[i], Z.v[i])
                    for i, (c, y) in enumerate(zip(path.charts, path.x))])
    return PathTangent.from_samples(path, out)


def metric_inner_along(path: DiscretePath, X: PathTangent, Y: PathTangent) -> np.ndarray:
    """Pointwise ``<X, Y>_g`` along a path."""
    m = path.manifold
    return np.array([inner(m, int(c), y, X.v[i], Y.v[i]) for i, (c, y) in enumerate(zip(path.charts, path.x))])


def speeds(path: DiscretePath) -> np.ndarray:
    """Metric norm of the derivative samples."""
    m = path.manifold
    return np.array([norm(m, int(c), y, dy) for c, y, dy in zip(path.charts, path.x, path.dx)])
