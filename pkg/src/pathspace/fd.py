"""Fourth-order finite differences on uniform grids.

Interior samples use centred stencils; samples near either end use
one-sided stencils of the same order, so every sample of a grid gets a
derivative of equal formal accuracy.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import GridTooCoarse

ORDER = 4


@lru_cache(maxsize=None)
def fd_weights(offsets: tuple, deriv: int) -> np.ndarray:
    """Weights ``w`` with ``sum(w_k f(x + o_k h)) ~ h^deriv f^(deriv)(x)``.

    Solves the Vandermonde moment system; exact for polynomials of degree
    ``len(offsets) - 1``.
    """
    o = np.asarray(offsets, float)
    k = len(o)
    A = np.vander(o, k, increasing=True).T
    b = np.zeros(k)
    b[deriv] = float(np.prod(np.arange(1, deriv + 1)))
    w = np.linalg.solve(A, b)
    w.setflags(write=False)
    return w


def stencil(i: int, n: int, deriv: int = 1) -> tuple:
    """Offsets of the stencil used at sample ``i`` of an ``n``-sample grid.

    First derivatives use 5 points; second derivatives use 5 points centred
    and 6 points one-sided (the extra point keeps fourth order), falling
    back to 5 one-sided points when only 5 samples exist.
    """
    if n < 5:
        raise GridTooCoarse(f"fourth-order differences need at least 5 samples, got {n}")
    width = 5 if deriv == 1 or n < 6 else 6
    if 2 <= i <= n - 3:
        return (-2, -1, 0, 1, 2)
    lo = 0 if i < 2 else n - width
    return tuple(range(lo - i, lo - i + width))


def diff(f: np.ndarray, h: float, deriv: int = 1, axis: int = 0) -> np.ndarray:
    """Derivative of uniformly sampled ``f`` along ``axis`` (spacing ``h``)."""
    f = np.moveaxis(np.asarray(f, float), axis, 0)
    n = f.shape[0]
    out = np.empty_like(f)
    # the weights sum to zero, so differencing against the centre sample is
    # the same formula; it makes constant data give exactly zero
    if n >= 5:
        w = fd_weights((-2, -1, 0, 1, 2), deriv)
        mid = f[2:n - 2]
        out[2:n - 2] = sum(wk * (f[2 + o:n - 2 + o] - mid) for wk, o in zip(w, range(-2, 3)) if o)
    for i in list(range(min(2, n))) + list(range(max(2, n - 2), n)):
        offs = stencil(i, n, deriv)
        w = fd_weights(offs, deriv)
        out[i] = sum(wk * (f[i + o] - f[i]) for wk, o in zip(w, offs) if o)
    return np.moveaxis(out / h ** deriv, 0, axis)


def diff_at(values, h: float, offsets: tuple, deriv: int = 1) -> np.ndarray:
    """Apply the stencil ``offsets`` to ``values`` (one row per offset)."""
    offsets = tuple(offsets)
    w = fd_weights(offsets, deriv)
    values = np.asarray(values, float)
    ref = values[offsets.index(0)] if 0 in offsets else values[0]
    return np.tensordot(w, values - ref, axes=1) / h ** deriv
