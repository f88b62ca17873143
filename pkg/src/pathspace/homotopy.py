"""Geodesics of path space as pointwise geodesic families.

A path-space geodesic through ``gamma`` with initial velocity ``V`` is the
homotopy ``Gamma(s, t)`` whose transverse curves ``s -> Gamma(s, t)`` are
geodesics of M. Everything here is therefore solved independently per
sample ``t_i`` and assembled into an (s, t) grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import integrator
from .closed_form import ANTIPODAL_TOL
from .errors import (
    AntipodalDegeneracy,
    GeodesicFailure,
    GridTooCoarse,
    NoConvergence,
    WrongManifold,
)
from .geodesic import (
    DEFAULT_H_BASE,
    DEFAULT_TOL,
    Point,
    distance,
    integrate_geodesic,
    log_map,
    sphere_angle,
)
from .manifold import ManifoldSpec, norm
from .parallel import pmap
from .paths import DiscretePath, PathTangent, diff_along

DEFAULT_M = 64
CERTIFY_TOL = 1e-5
NEAR_ANTIPODAL = 1e-3
PROBE_STEPS_PER_UNIT = 64


@dataclass(eq=False)
class PathHomotopy:
    """Grid ``Gamma(s_j, t_i)`` with transverse velocities ``d_s Gamma``.

    Arrays are indexed ``[j, i]`` (s first). Samples a transverse geodesic
    never reached are NaN with chart -1.
    """

    manifold: ManifoldSpec
    s: np.ndarray
    t: np.ndarray
    charts: np.ndarray
    x: np.ndarray
    v: np.ndarray
    diagnostics: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    @property
    def M(self) -> int:
        return len(self.s) - 1

    @property
    def N(self) -> int:
        return len(self.t) - 1

    @property
    def complete(self) -> bool:
        return bool(np.all(self.charts >= 0))

    def path_at(self, j: int) -> DiscretePath:
        """The path ``Gamma(s_j, .)``."""
        return DiscretePath.from_samples(self.manifold, self.charts[j], self.x[j])

    def velocity_at(self, j: int) -> PathTangent:
        """The transverse velocity field ``d_s Gamma(s_j, .)`` along ``Gamma(s_j, .)``."""
        return PathTangent.from_samples(self.path_at(j), self.v[j])

    def speeds(self) -> np.ndarray:
        """Metric norm of the transverse velocity on the grid."""
        m = self.manifold
        out = np.full(self.charts.shape, np.nan)
        for j, i in zip(*np.nonzero(self.charts >= 0)):
            out[j, i] = norm(m, int(self.charts[j, i]), self.x[j, i], self.v[j, i])
        return out


@dataclass(eq=False)
class ObstructionReport:
    """Why two paths cannot be joined by the pointwise construction."""

    feasible: bool
    margins: np.ndarray
    offending: tuple
    message: str
    cause: str = "antipodal"
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        self.margins = np.asarray(self.margins, float)
        self.offending = tuple(int(i) for i in self.offending)
        if not self.feasible and not self.offending:
            raise ValueError("an infeasible report must name at least one offending index")

    @property
    def margin(self) -> float:
        finite = self.margins[np.isfinite(self.margins)]
        return float(finite.min()) if finite.size else math.nan

    @property
    def exit_code(self) -> int:
        return AntipodalDegeneracy.exit_code if self.cause == "antipodal" else NoConvergence.exit_code


@dataclass(eq=False)
class CompletenessReport:
    """Per-sample maximal geodesic parameter reached by a path-space geodesic."""

    S: float
    s_reached: np.ndarray
    status: list
    homotopy: PathHomotopy

    @property
    def complete(self) -> bool:
        return bool(np.all(self.s_reached >= self.S))

    @property
    def failed(self) -> tuple:
        return tuple(int(i) for i in np.flatnonzero(self.s_reached < self.S))


def _check_manifold(m: ManifoldSpec, *objs):
    for o in objs:
        if o.manifold.hash != m.hash:
            raise WrongManifold(f"object lives on {o.manifold.name}, expected {m.name}")


# ---------------------------------------------------------------------------
# initial-value problem
# ---------------------------------------------------------------------------

def pathspace_geodesic_ivp(gamma: DiscretePath, V: PathTangent, s_max: float = 1.0,
                           M: int = DEFAULT_M, tol: float = DEFAULT_TOL,
                           h_base: float = DEFAULT_H_BASE, threads: Optional[int] = None,
                           allow_failure: bool = False) -> PathHomotopy:
    """Path-space geodesic with ``Gamma(0) = gamma`` and ``d_s Gamma(0) = V``.

    Each transverse geodesic is integrated on its own. When some cannot
    reach ``s_max`` a :class:`GeodesicFailure` carrying the partial homotopy
    is raised, unless ``allow_failure`` is set.
    """
    if not s_max > 0:
        raise ValueError("s_max must be positive")
    if M < 4:
        raise GridTooCoarse(f"M must be at least 4, got {M}")
    if V.path is not gamma and len(V.path) != len(gamma):
        raise ValueError("field must live along the initial path")
    m = gamma.manifold
    n = m.dim
    s = np.linspace(0.0, s_max, M + 1)

    def one(i):
        return integrate_geodesic(m, int(gamma.charts[i]), gamma.x[i], V.v[i], s, tol, h_base)

    runs = pmap(one, range(len(gamma)), threads)
    charts = np.stack([r.charts for r in runs], axis=1)
    states = np.stack([r.states for r in runs], axis=1)
    H = PathHomotopy(m, s, gamma.t, charts, states[..., :n].copy(), states[..., n:2 * n].copy())
    speeds = H.speeds()
    for i, r in enumerate(runs):
        sp = speeds[:, i]
        sp = sp[np.isfinite(sp)]
        H.diagnostics.append({
            "status": integrator.STATUS_NAMES[r.status],
            "s_reached": float(r.s_reached),
            "nsteps": int(r.nsteps),
            "nrejects": int(r.nrejects),
            "chart_switches": int(r.nswitches),
            "speed_drift": float(np.max(np.abs(sp - sp[0]))) if sp.size else 0.0,
        })
    failed = [i for i, r in enumerate(runs) if not r.ok]
    if failed and not allow_failure:
        first = runs[failed[0]]
        raise GeodesicFailure(
            f"{len(failed)} transverse geodesic(s) stopped early; first at t index {failed[0]} "
            f"({integrator.STATUS_NAMES[first.status]} at s={first.s_reached:.12g})", H, failed)
    return H


# ---------------------------------------------------------------------------
# boundary-value problem
# ---------------------------------------------------------------------------

def pathspace_geodesic_bvp(gamma1: DiscretePath, gamma2: DiscretePath, M: int = DEFAULT_M,
                           tol: float = DEFAULT_TOL, h_base: float = DEFAULT_H_BASE,
                           threads: Optional[int] = None, antipodal_tol: float = ANTIPODAL_TOL,
                           near_tol: float = NEAR_ANTIPODAL):
    """Join two paths by ``Gamma(s, t) = exp_{gamma1(t)}(s V_t)`` with ``V_t = log_{gamma1(t)} gamma2(t)``.

    Returns a :class:`PathHomotopy`, or an :class:`ObstructionReport` when
    some ``log`` cannot be taken (antipodal points on the sphere, shooting
    failure elsewhere).
    """
    m = gamma1.manifold
    _check_manifold(m, gamma2)
    if len(gamma1) != len(gamma2):
        raise ValueError("paths must share the t-grid")
    sphere = m.kind == "sphere"

    def one(i):
        p, q = gamma1.point(i), gamma2.point(i)
        margin = math.pi - sphere_angle(m, p, q) if sphere else math.nan
        try:
            return log_map(m, p, q, antipodal_tol).v, margin, None
        except AntipodalDegeneracy:
            return None, margin, "antipodal"
        except NoConvergence as e:
            return None, margin, f"no-convergence (residual {e.residual})"

    res = pmap(one, range(len(gamma1)), threads)
    margins = np.array([r[1] for r in res])
    warnings = [f"t index {i}: near-antipodal, margin {mg:.3e}; the log map is ill-conditioned"
                for i, mg in enumerate(margins) if sphere and res[i][2] is None and mg < near_tol]
    bad = [i for i, r in enumerate(res) if r[2] is not None]
    if bad:
        cause = "antipodal" if any(res[i][2] == "antipodal" for i in bad) else "no-convergence"
        idx = ", ".join(str(i) for i in bad)
        what = "antipodal" if cause == "antipodal" else "log map failed"
        return ObstructionReport(False, margins, bad,
                                 f"no path-space geodesic: {what} at t indices [{idx}]",
                                 cause, warnings)
    V = PathTangent.from_samples(gamma1, np.array([r[0] for r in res]))
    H = pathspace_geodesic_ivp(gamma1, V, 1.0, M, tol, h_base, threads)
    H.warnings.extend(warnings)
    end = [distance(m, Point(int(H.charts[-1, i]), H.x[-1, i]), gamma2.point(i))
           for i in range(len(gamma2))]
    H.summary["endpoint_residual"] = float(max(end))
    H.summary["margins"] = margins
    return H


# ---------------------------------------------------------------------------
# certification and probes
# ---------------------------------------------------------------------------

def geodesic_residual(m: ManifoldSpec, H: PathHomotopy) -> np.ndarray:
    """Geodesic-equation residual on the grid.

    At every sample this is the larger of

    * ``|D_s v + Gamma(v, v)|``, the geodesic equation with the second
      s-derivative taken as the fourth-order s-difference of the stored
      transverse velocity ``v = d_s Gamma``, and
    * ``|D_s x - v|``, which ties the velocity grid to the positions.

    Norms are Euclidean norms of chart components. Differencing velocities
    rather than twice differencing positions keeps the rounding floor near
    ``eps |v| / h`` instead of ``eps |x| / h^2``. On a homotopy with
    unreached samples only the reached part of each transverse curve is
    checked (NaN elsewhere, and on curves with fewer than 5 samples).
    """
    _check_manifold(m, H)
    if len(H.s) < 5:
        raise GridTooCoarse(f"the residual needs at least 5 s-samples, got {len(H.s)}")
    hs = float(H.s[1] - H.s[0])
    out = np.full(H.charts.shape, np.nan)
    for i in range(H.N + 1):
        k = int(np.argmax(H.charts[:, i] < 0)) if np.any(H.charts[:, i] < 0) else H.M + 1
        if k < 5:
            continue
        c, x, v = H.charts[:k, i], H.x[:k, i], H.v[:k, i]
        dx, dv = diff_along(m, c, x, hs, v)
        for j in range(k):
            acc = m.charts[int(c[j])].metric.accel(x[j], v[j])
            out[j, i] = max(float(np.linalg.norm(dv[j] - acc)), float(np.linalg.norm(dx[j] - v[j])))
    return out


def sup_residual(m: ManifoldSpec, H: PathHomotopy) -> float:
    r = geodesic_residual(m, H)
    return float(np.nanmax(r)) if np.any(np.isfinite(r)) else math.nan


def certify(m: ManifoldSpec, H: PathHomotopy, threshold: float = CERTIFY_TOL):
    """``(certified, sup residual)``."""
    r = sup_residual(m, H)
    return bool(r <= threshold), r


def completeness_probe(m: ManifoldSpec, gamma: DiscretePath, V: PathTangent, S: float,
                       M: Optional[int] = None, tol: float = DEFAULT_TOL,
                       h_base: float = DEFAULT_H_BASE, threads: Optional[int] = None) -> CompletenessReport:
    """Try to continue the path-space geodesic to ``s = S``; report how far each sample got."""
    _check_manifold(m, gamma)
    if not S > 0:
        raise ValueError("S must be positive")
    M = M or max(8, int(math.ceil(PROBE_STEPS_PER_UNIT * S)))
    H = pathspace_geodesic_ivp(gamma, V, S, M, tol, h_base, threads, allow_failure=True)
    reached = np.array([d["s_reached"] for d in H.diagnostics])
    return CompletenessReport(float(S), reached, [d["status"] for d in H.diagnostics], H)


def antipodal_obstruction_scan(gamma1: DiscretePath, gamma2: DiscretePath,
                               antipodal_tol: float = ANTIPODAL_TOL,
                               near_tol: float = NEAR_ANTIPODAL) -> ObstructionReport:
    """Flag the samples where two sphere paths are antipodal (no unique log)."""
    m = gamma1.manifold
    if m.kind != "sphere":
        raise WrongManifold(f"the antipodal scan needs a sphere, got {m.name}")
    _check_manifold(m, gamma2)
    if len(gamma1) != len(gamma2):
        raise ValueError("paths must share the t-grid")
    angles = np.array([sphere_angle(m, gamma1.point(i), gamma2.point(i)) for i in range(len(gamma1))])
    margins = math.pi - angles
    bad = np.flatnonzero(angles >= math.pi - antipodal_tol)
    warnings = [f"t index {i}: near-antipodal, margin {margins[i]:.3e}"
                for i in np.flatnonzero((margins < near_tol) & (angles < math.pi - antipodal_tol))]
    if bad.size:
        msg = f"antipodal at t indices [{', '.join(str(i) for i in bad)}]"
    else:
        msg = f"feasible; margin {float(margins.min()):.6g}"
    return ObstructionReport(not bad.size, margins, bad, msg, "antipodal", warnings)
