"""Closed-form geometry of the builtin model spaces.

Sphere formulas go through the ambient embedding in R^{n+1}; hyperbolic
formulas use Moebius addition in the Poincare ball.
"""
from __future__ import annotations

import math

import numpy as np

ANTIPODAL_TOL = 1e-6


# -- sphere ------------------------------------------------------------------

def stereo_to_unit(chart: int, x) -> np.ndarray:
    """Unit-sphere point of stereographic coordinates (chart 0: north pole at 0)."""
    x = np.asarray(x, float)
    q = float(x @ x)
    last = (1.0 - q) / (1.0 + q)
    return np.append(2.0 * x / (1.0 + q), last if chart == 0 else -last)


def unit_to_stereo(chart: int, p) -> np.ndarray:
    p = np.asarray(p, float)
    den = 1.0 + p[-1] if chart == 0 else 1.0 - p[-1]
    return p[:-1] / den


def stereo_jacobian(chart: int, x) -> np.ndarray:
    """d(unit point)/dx, shape (n+1, n)."""
    x = np.asarray(x, float)
    n = len(x)
    q = float(x @ x)
    top = 2.0 * np.eye(n) / (1.0 + q) - 4.0 * np.outer(x, x) / (1.0 + q) ** 2
    bottom = -4.0 * x / (1.0 + q) ** 2
    return np.vstack((top, bottom if chart == 0 else -bottom))


def vector_to_ambient(chart: int, x, v, radius: float = 1.0) -> np.ndarray:
    return radius * stereo_jacobian(chart, x) @ np.asarray(v, float)


def vector_from_ambient(chart: int, x, w, radius: float = 1.0) -> np.ndarray:
    x = np.asarray(x, float)
    q = float(x @ x)
    # the Jacobian is conformal: its pseudo-inverse is (1+q)^2/4 times its transpose
    return (1.0 + q) ** 2 / 4.0 * stereo_jacobian(chart, x).T @ np.asarray(w, float) / radius


def preferred_chart(p) -> int:
    return 0 if p[-1] >= 0.0 else 1


def sphere_angle(p, q) -> float:
    """Angle between unit vectors, accurate near 0 and near pi."""
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    c = float(p @ q)
    s = float(np.linalg.norm(q - c * p))
    return math.atan2(s, c)


def sphere_log_unit(p, q):
    """Log map on the unit sphere in ambient coordinates; returns (vector, angle)."""
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    c = float(p @ q)
    perp = q - c * p
    s = float(np.linalg.norm(perp))
    theta = math.atan2(s, c)
    if s == 0.0:
        return np.zeros_like(p), theta
    return theta * perp / s, theta


def sphere_exp_unit(p, w) -> np.ndarray:
    p = np.asarray(p, float)
    w = np.asarray(w, float)
    t = float(np.linalg.norm(w))
    if t == 0.0:
        return p.copy()
    return math.cos(t) * p + math.sin(t) * w / t


# -- Poincare ball -------------------------------------------------------------

def mobius_add(a, b) -> np.ndarray:
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    ab = float(a @ b)
    aa = float(a @ a)
    bb = float(b @ b)
    return ((1.0 + 2.0 * ab + bb) * a + (1.0 - aa) * b) / (1.0 + 2.0 * ab + aa * bb)


def poincare_log(p, q) -> np.ndarray:
    p = np.asarray(p, float)
    w = mobius_add(-p, q)
    r = float(np.linalg.norm(w))
    if r == 0.0:
        return np.zeros_like(p)
    lam = 2.0 / (1.0 - float(p @ p))
    return (2.0 / lam) * math.atanh(r) * w / r


def poincare_exp(p, v) -> np.ndarray:
    p = np.asarray(p, float)
    v = np.asarray(v, float)
    r = float(np.linalg.norm(v))
    if r == 0.0:
        return p.copy()
    lam = 2.0 / (1.0 - float(p @ p))
    return mobius_add(p, math.tanh(0.5 * lam * r) * v / r)


def poincare_distance(p, q) -> float:
    return 2.0 * math.atanh(min(float(np.linalg.norm(mobius_add(-np.asarray(p, float), q))), 1.0))
