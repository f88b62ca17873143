"""Backend selection for the geodesic hot loop.

The compiled :mod:`pathspace._kernels` extension is used when it imports;
otherwise, or when ``PATHSPACE_PURE_PYTHON=1`` is set, the pure-Python
integrator runs the same algorithm. ``BACKEND`` names the active one.
"""
from __future__ import annotations

import math
import os

import numpy as np

from . import integrator

try:
    if os.environ.get("PATHSPACE_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure python requested")
    from . import _kernels
except ImportError:
    _kernels = None

BACKEND = "compiled" if _kernels is not None else "python"


def _conformal_hooks(n, sigma, inversion, switch_r, domain_r):
    def rhs(chart, y):
        x, v = y[:n], y[n:]
        q = float(x @ x)
        if sigma == 0:
            c = 0.0
        else:
            den = 1.0 - sigma * q
            if den <= 0.0:
                raise integrator.DomainError("outside the conformal chart")
            c = 2.0 * sigma / den
        return np.concatenate((v, c * (float(v @ v) * x - 2.0 * float(x @ v) * v)))

    inside = None
    if math.isfinite(domain_r):
        r2 = domain_r * domain_r

        def inside(chart, y):
            x = y[:n]
            return float(x @ x) < r2

    switch = None
    if inversion:
        s2 = switch_r * switch_r

        def switch(chart, y):
            x, v = y[:n], y[n:]
            q = float(x @ x)
            if q <= s2:
                return None
            xv = float(x @ v)
            return 1 - chart, np.concatenate((x / q, (q * v - 2.0 * xv * x) / (q * q)))

    return rhs, inside, switch


def integrate_conformal_py(sigma, inversion, chart, x0, v0, nodes, tol, h_base, h_min,
                           switch_r, domain_r, max_steps=10_000_000):
    n = len(x0)
    rhs, inside, switch = _conformal_hooks(n, sigma, inversion, switch_r, domain_r)
    run = integrator.integrate_grid(rhs, chart, np.concatenate((x0, v0)), nodes, tol=tol,
                                    h_base=h_base, h_min=h_min, inside=inside, switch=switch,
                                    max_steps=max_steps)
    return run


def integrate_conformal(sigma, inversion, chart, x0, v0, nodes, tol, h_base, h_min,
                        switch_r, domain_r, max_steps=10_000_000, backend=None):
    """Integrate a geodesic of a conformal builtin metric through ``nodes``.

    Returns a :class:`pathspace.integrator.GridRun` whose state rows are
    ``(x, v)``. ``backend`` overrides the import-time choice ("compiled" or
    "python"); benchmarks use it to compare both.
    """
    backend = backend or BACKEND
    x0 = np.ascontiguousarray(x0, float)
    v0 = np.ascontiguousarray(v0, float)
    nodes = np.ascontiguousarray(nodes, float)
    if backend == "python" or _kernels is None:
        return integrate_conformal_py(sigma, inversion, chart, x0, v0, nodes, tol, h_base, h_min,
                                      switch_r, domain_r, max_steps)
    n, K = len(x0), len(nodes)
    out_x = np.full((K, n), np.nan)
    out_v = np.full((K, n), np.nan)
    out_c = np.full(K, -1, dtype=np.int64)
    status, s, nsteps, nrej, nsw, min_h = _kernels.integrate_conformal(
        int(sigma), bool(inversion), int(chart), x0, v0, nodes, float(tol), float(h_base),
        float(h_min), float(switch_r), float(domain_r), int(max_steps), out_x, out_v, out_c)
    run = integrator.GridRun(out_c, np.concatenate((out_x, out_v), axis=1), status=status,
                             s_reached=s, nsteps=nsteps, nrejects=nrej, nswitches=nsw, min_h=min_h)
    return run
