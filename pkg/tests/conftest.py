"""Independent oracles shared by the test modules.

These re-derive the model-space formulas directly (ambient great circles,
the hyperbolic half-plane distance) instead of calling the library.
"""
import math

import numpy as np
import pytest


def stereo_inv(chart, x):
    """Unit-sphere point for stereographic coordinates; chart 0 sends 0 to the north pole."""
    x = np.asarray(x, float)
    q = x @ x
    z = (1 - q) / (1 + q)
    return np.append(2 * x / (1 + q), z if chart == 0 else -z)


def stereo_fwd(chart, p):
    p = np.asarray(p, float)
    return p[:-1] / (1 + p[-1]) if chart == 0 else p[:-1] / (1 - p[-1])


def stereo_push(chart, x, v, h=1e-6):
    """Ambient velocity of a chart vector, by central differences of stereo_inv."""
    x = np.asarray(x, float)
    v = np.asarray(v, float)
    return (stereo_inv(chart, x + h * v) - stereo_inv(chart, x - h * v)) / (2 * h)


def stereo_pull(chart, x, w):
    """Chart components of an ambient tangent vector (least squares on the Jacobian)."""
    n = len(x)
    J = np.column_stack([stereo_push(chart, x, e) for e in np.eye(n)])
    return np.linalg.lstsq(J, w, rcond=None)[0]


def great_circle(P, W, s):
    """Point at parameter s of the unit-sphere geodesic with start P and velocity W."""
    speed = np.linalg.norm(W)
    if speed == 0:
        return P
    return math.cos(speed * s) * P + math.sin(speed * s) * W / speed


def ambient_angle(P, Q):
    return math.atan2(np.linalg.norm(np.cross(P, Q)), P @ Q)


def hyperbolic_distance(x, y):
    """Poincare-ball distance, written in the asinh form that stays accurate near 0."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    return 2 * math.asinh(np.linalg.norm(x - y) / math.sqrt((1 - x @ x) * (1 - y @ y)))


def half_plane_distance(p, q):
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    return math.acosh(1 + ((p - q) @ (p - q)) / (2 * p[1] * q[1]))


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)
