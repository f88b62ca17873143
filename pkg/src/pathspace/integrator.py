"""Classical RK4 with Richardson step halving.

Every step is taken twice, once with ``h`` and once as two steps of ``h/2``.
The difference over 15 estimates the local error of the half-step result;
the step is halved until that estimate is at most ``tol`` and the accepted
state is the Richardson-extrapolated one. After an easy step the step size
grows back toward its baseline, so a run is fully determined by its inputs.

The integrator walks through a list of output nodes and lands on each of
them exactly. Charts are handled through two hooks: ``switch`` may move the
state to another chart after any accepted step, and ``inside`` reports
whether a state is still in its chart's domain. Leaving the domain stops the
run; the exit parameter is located by bisection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

OK = 0
LEFT_DOMAIN = 1
UNDERFLOW = 2
MAX_STEPS = 3

STATUS_NAMES = {OK: "ok", LEFT_DOMAIN: "left-atlas", UNDERFLOW: "step-underflow",
                MAX_STEPS: "max-steps"}

DEFAULT_TOL = 1e-10
DEFAULT_H_BASE = 1.0 / 16


@dataclass
class GridRun:
    """Result of integrating through a list of output nodes."""

    charts: np.ndarray          # (K,) chart per node, -1 where not reached
    states: np.ndarray          # (K, d) state per node, nan where not reached
    status: int = OK
    s_reached: float = 0.0
    nsteps: int = 0
    nrejects: int = 0
    nswitches: int = 0
    min_h: float = math.inf
    dense: list = field(default_factory=list)  # (s, chart, state) of accepted steps

    @property
    def ok(self) -> bool:
        return self.status == OK


def _rk4(rhs, chart, y, h):
    k1 = rhs(chart, y)
    k2 = rhs(chart, y + 0.5 * h * k1)
    k3 = rhs(chart, y + 0.5 * h * k2)
    k4 = rhs(chart, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _richardson(rhs, chart, y, h):
    """Return (extrapolated state, error estimate, half-step midpoint) or raise DomainError."""
    full = _rk4(rhs, chart, y, h)
    mid = _rk4(rhs, chart, y, 0.5 * h)
    two = _rk4(rhs, chart, mid, 0.5 * h)
    diff = two - full
    err = float(np.max(np.abs(diff))) / 15.0
    if not math.isfinite(err):
        raise DomainError("non-finite state")
    return two + diff / 15.0, err, mid


def integrate_grid(rhs, chart, y0, nodes, tol=DEFAULT_TOL, h_base=DEFAULT_H_BASE, h_min=None,
                   inside=None, switch=None, max_steps=10_000_000, record_dense=False) -> GridRun:
    """Integrate ``y' = rhs(chart, y)`` from ``nodes[0]`` through every node.

    Parameters
    ----------
    rhs : callable(chart, y) -> dy
        May raise :class:`DomainError`; that is treated like leaving the domain
        and answered with a smaller step.
    nodes : increasing sequence of parameter values, ``nodes[0]`` is the start.
    inside : callable(chart, y) -> bool, optional
    switch : callable(chart, y) -> (chart, y) or None, optional
    """
    nodes = np.asarray(nodes, float)
    y = np.array(y0, float)
    K = len(nodes)
    charts = np.full(K, -1, dtype=np.int64)
    states = np.full((K, len(y)), np.nan)
    charts[0] = chart
    states[0] = y
    run = GridRun(charts, states, s_reached=float(nodes[0]))
    span = float(nodes[-1] - nodes[0]) if K > 1 else 0.0
    if h_min is None:
        h_min = 1e-13 * max(1.0, abs(span))
    h = h_base
    s = float(nodes[0])
    if record_dense:
        run.dense.append((s, chart, y.copy()))

    for j in range(1, K):
        target = float(nodes[j])
        while s < target:
            if run.nsteps + run.nrejects >= max_steps:
                run.status = MAX_STEPS
                run.s_reached = s
                return run
            remaining = target - s
            last = h >= remaining * (1.0 - 1e-12)
            step = remaining if last else h
            try:
                y_new, err, _ = _richardson(rhs, chart, y, step)
                bad = err > tol or (inside is not None and not inside(chart, y_new)
                                    and _leaves(switch, inside, chart, y_new))
            except DomainError:
                err = math.inf
                bad = True
            if bad and err <= tol:
                # the step is accurate but ends outside the domain: locate the exit
                s_exit, y_exit = _bisect_exit(rhs, inside, chart, y, s, step)
                run.status = LEFT_DOMAIN
                run.s_reached = s_exit
                run.min_h = min(run.min_h, step)
                return run
            if bad:
                run.nrejects += 1
                h = 0.5 * step
                if h < h_min:
                    run.status = UNDERFLOW
                    run.s_reached = s
                    return run
                continue
            run.nsteps += 1
            run.min_h = min(run.min_h, step)
            s = target if last else s + step
            y = y_new
            if switch is not None:
                moved = switch(chart, y)
                if moved is not None:
                    chart, y = moved
                    y = np.array(y, float)
                    run.nswitches += 1
            if record_dense:
                run.dense.append((s, chart, y.copy()))
            if not last and err <= tol / 64.0 and step < h_base:
                h = min(2.0 * step, h_base)
            elif not last:
                h = step
        charts[j] = chart
        states[j] = y
        run.s_reached = s
    return run


def _leaves(switch, inside, chart, y):
    """True when y is outside its chart and no switch rescues it."""
    if switch is not None:
        moved = switch(chart, y)
        if moved is not None and inside(moved[0], np.asarray(moved[1])):
            return False
    return True


def _bisect_exit(rhs, inside, chart, y, s, step):
    lo, hi = 0.0, step
    y_lo = y
    while hi - lo > 1e-14 * max(1.0, abs(s)):
        mid = 0.5 * (lo + hi)
        try:
            y_mid, _, _ = _richardson(rhs, chart, y, mid)
            ok = inside(chart, y_mid)
        except DomainError:
            ok = False
        if ok:
            lo, y_lo = mid, y_mid
        else:
            hi = mid
    return s + lo, y_lo
