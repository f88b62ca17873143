"""Reproducible test configurations: random smooth paths and fields, and the
two-polar-paths sphere configuration whose pointwise geodesics break down.
"""
from __future__ import annotations

import math

import numpy as np

from .closed_form import preferred_chart, unit_to_stereo
from .manifold import ManifoldSpec
from .paths import DEFAULT_N, DiscretePath, PathTangent


def _fourier(rng, n, modes, scale):
    """Random trigonometric polynomial t -> R^n and its derivative."""
    a = rng.normal(size=(modes, n)) * scale / np.arange(1, modes + 1)[:, None]
    b = rng.normal(size=(modes, n)) * scale / np.arange(1, modes + 1)[:, None]
    k = np.pi * np.arange(1, modes + 1)

    def f(t):
        return np.sin(k * t) @ a + np.cos(k * t) @ b

    def df(t):
        return (k * np.cos(k * t)) @ a - (k * np.sin(k * t)) @ b

    return f, df


def random_smooth_path(m: ManifoldSpec, rng, N: int = DEFAULT_N, radius: float = 0.5,
                       modes: int = 3, chart: int = 0, amplitude: float = 1.0) -> DiscretePath:
    """Smooth random path inside the coordinate ball of ``radius`` of ``chart``.

    A random trigonometric polynomial is squashed radially by ``tanh`` so it
    never leaves the ball; derivatives are exact. A smaller ``amplitude``
    keeps the squash nearly linear, which gives gentler, lower-bandwidth
    paths.
    """
    n = m.dim
    f, df = _fourier(rng, n, modes, amplitude)
    c = rng.uniform(-0.3, 0.3, size=n)

    def raw(t):
        return c + f(t)

    def g(t):
        y = raw(t)
        r = np.linalg.norm(y)
        return y if r == 0 else radius * math.tanh(r) * y / r

    def dg(t):
        y, dy = raw(t), df(t)
        r = float(np.linalg.norm(y))
        if r == 0:
            return radius * dy
        u = y / r
        th = math.tanh(r)
        dr = float(u @ dy)
        du = (dy - dr * u) / r
        return radius * ((1 - th * th) * dr * u + th * du)

    return DiscretePath.from_function(m, g, N, chart, dg, rechart=False)


def random_field(path: DiscretePath, rng, scale: float = 1.0, modes: int = 3) -> PathTangent:
    """Smooth random field along ``path`` (components in each sample's chart)."""
    f, df = _fourier(rng, path.dim, modes, scale)
    c = rng.normal(size=path.dim) * scale
    return PathTangent.from_function(path, lambda t: c + f(t), df)


def equatorial_band_path(m: ManifoldSpec, rng, N: int = DEFAULT_N, lo: float = 0.7,
                         hi: float = 1.4) -> DiscretePath:
    """Sphere path in stereographic chart 0 staying in the band ``lo <= |x| <= hi``.

    The band lies inside the overlap of the two stereographic charts.
    """
    r0, r1 = rng.uniform(0.0, 2 * math.pi, size=2)
    w = rng.uniform(0.5, 3.0)
    a = rng.uniform(-2.0, 2.0)
    mid, amp = 0.5 * (lo + hi), 0.5 * (hi - lo)

    def g(t):
        r = mid + amp * math.sin(w * t + r0)
        phi = a * t + 0.3 * math.sin(2 * t + r1)
        return np.array([r * math.cos(phi), r * math.sin(phi)])

    def dg(t):
        r = mid + amp * math.sin(w * t + r0)
        dr = amp * w * math.cos(w * t + r0)
        phi = a * t + 0.3 * math.sin(2 * t + r1)
        dphi = a + 0.6 * math.cos(2 * t + r1)
        return np.array([dr * math.cos(phi) - r * math.sin(phi) * dphi,
                         dr * math.sin(phi) + r * math.cos(phi) * dphi])

    return DiscretePath.from_function(m, g, N, 0, dg, rechart=False)


def _flat_bump(u: float, width: float = 0.02) -> float:
    """exp(-width/|u|): smooth, with every derivative vanishing at 0."""
    return 0.0 if u == 0 else math.exp(-width / abs(u))


def polar_paths(m: ManifoldSpec, N: int = DEFAULT_N, theta_max: float = 1.0):
    """Two sphere paths that are antipodal exactly at the middle sample.

    ``gamma1`` runs along the meridian through the north pole and rests there
    (zero speed) at t = 1/2; ``gamma2`` runs along a perpendicular meridian
    through the south pole, resting there at t = 1/2. The polar angle
    ``theta(t) = theta_max b(t - 1/2) / b(1/2)`` with ``b(u) = sign(u) exp(-0.02/|u|)``
    is flat at t = 1/2, and the two points are antipodal only there.
    Returns ``(gamma1, gamma2)``; gamma1 lives in chart 0, gamma2 in chart 1.
    """
    if m.kind != "sphere" or m.dim != 2:
        raise ValueError("the polar configuration needs sphere(2, r)")
    if N % 2:
        raise ValueError("N must be even so that t = 1/2 is a grid node")
    norm = _flat_bump(0.5)

    def theta(t):
        u = t - 0.5
        return math.copysign(theta_max * _flat_bump(u) / norm, u)

    def dtheta(t):
        u = t - 0.5
        if u == 0:
            return 0.0
        return theta_max * _flat_bump(u) / norm * 0.02 / u ** 2

    # half-angle formula: stereographic radius of polar angle theta is tan(theta/2)
    def g1(t):
        return np.array([math.tan(theta(t) / 2), 0.0])

    def dg1(t):
        return np.array([0.5 * dtheta(t) / math.cos(theta(t) / 2) ** 2, 0.0])

    def g2(t):
        return np.array([0.0, math.tan(theta(t) / 2)])

    def dg2(t):
        return np.array([0.0, 0.5 * dtheta(t) / math.cos(theta(t) / 2) ** 2])

    gamma1 = DiscretePath.from_function(m, g1, N, 0, dg1, rechart=False)
    gamma2 = DiscretePath.from_function(m, g2, N, 1, dg2, rechart=False)
    return gamma1, gamma2


def antipodal_path(gamma: DiscretePath) -> DiscretePath:
    """Pointwise antipode of a sphere path (stereographic: x -> -x in the other chart)."""
    m = gamma.manifold
    return DiscretePath(m, 1 - gamma.charts, -gamma.x, -gamma.dx)


def ambient_to_path(m: ManifoldSpec, points) -> DiscretePath:
    """Sphere path from unit ambient points, each in its hemisphere's chart, then re-charted."""
    charts = [preferred_chart(p) for p in points]
    x = np.array([unit_to_stereo(c, p) for c, p in zip(charts, points)])
    return DiscretePath.from_samples(m, charts, x, rechart=True)
