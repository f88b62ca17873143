# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled geodesic integrator for conformally flat builtin metrics.

Same algorithm as :func:`pathspace.integrator.integrate_grid` (RK4, Richardson
halving, local extrapolation, exit bisection), specialised to the
acceleration of g = f(x)^2 I with grad(log f) = c(x) x,
c = 2 sigma / (1 - sigma |x|^2). Runs without the GIL.
"""
from libc.math cimport fabs, INFINITY, isfinite

cdef enum:
    MAXD = 32

cdef int OK = 0
cdef int LEFT_DOMAIN = 1
cdef int UNDERFLOW = 2
cdef int MAX_STEPS = 3


cdef inline int rhs(int n, int sigma, const double* y, double* dy) noexcept nogil:
    cdef double q = 0.0, vv = 0.0, xv = 0.0, c, den
    cdef int i
    for i in range(n):
        q += y[i] * y[i]
        vv += y[n + i] * y[n + i]
        xv += y[i] * y[n + i]
    if sigma == 0:
        c = 0.0
    else:
        den = 1.0 - sigma * q
        if den <= 0.0:
            return 1
        c = 2.0 * sigma / den
    for i in range(n):
        dy[i] = y[n + i]
        dy[n + i] = c * (vv * y[i] - 2.0 * xv * y[n + i])
    return 0


cdef int rk4(int n, int sigma, const double* y, double h, double* out) noexcept nogil:
    cdef double k1[MAXD]
    cdef double k2[MAXD]
    cdef double k3[MAXD]
    cdef double k4[MAXD]
    cdef double tmp[MAXD]
    cdef int d = 2 * n, i
    if rhs(n, sigma, y, k1):
        return 1
    for i in range(d):
        tmp[i] = y[i] + 0.5 * h * k1[i]
    if rhs(n, sigma, tmp, k2):
        return 1
    for i in range(d):
        tmp[i] = y[i] + 0.5 * h * k2[i]
    if rhs(n, sigma, tmp, k3):
        return 1
    for i in range(d):
        tmp[i] = y[i] + h * k3[i]
    if rhs(n, sigma, tmp, k4):
        return 1
    for i in range(d):
        out[i] = y[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return 0


cdef int richardson(int n, int sigma, const double* y, double h, double* out, double* err) noexcept nogil:
    cdef double full[MAXD]
    cdef double mid[MAXD]
    cdef double two[MAXD]
    cdef int d = 2 * n, i
    cdef double e = 0.0, diff
    if rk4(n, sigma, y, h, full):
        return 1
    if rk4(n, sigma, y, 0.5 * h, mid):
        return 1
    if rk4(n, sigma, mid, 0.5 * h, two):
        return 1
    for i in range(d):
        diff = two[i] - full[i]
        if fabs(diff) > e:
            e = fabs(diff)
        out[i] = two[i] + diff / 15.0
    e = e / 15.0
    if not isfinite(e):
        return 1
    err[0] = e
    return 0


cdef inline double sqnorm(int n, const double* y) noexcept nogil:
    cdef double q = 0.0
    cdef int i
    for i in range(n):
        q += y[i] * y[i]
    return q


cdef inline bint inside(int n, const double* y, double domain_r2) noexcept nogil:
    return sqnorm(n, y) < domain_r2


cdef inline void invert(int n, double* y) noexcept nogil:
    # (x, v) -> (x/q, (q v - 2 (x.v) x)/q^2)
    cdef double q = sqnorm(n, y), xv = 0.0
    cdef int i
    for i in range(n):
        xv += y[i] * y[n + i]
    for i in range(n):
        y[n + i] = (q * y[n + i] - 2.0 * xv * y[i]) / (q * q)
        y[i] = y[i] / q


def integrate_conformal(int sigma, bint inversion, int chart, double[::1] x0, double[::1] v0,
                        double[::1] nodes, double tol, double h_base, double h_min,
                        double switch_r, double domain_r, long max_steps,
                        double[:, ::1] out_x, double[:, ::1] out_v, long[::1] out_chart):
    """Integrate one geodesic through ``nodes``; fills the output arrays in place.

    Returns ``(status, s_reached, nsteps, nrejects, nswitches, min_h)``.
    """
    cdef int n = x0.shape[0]
    cdef int d = 2 * n
    cdef Py_ssize_t K = nodes.shape[0], j
    cdef double y[MAXD]
    cdef double ynew[MAXD]
    cdef double ylo[MAXD]
    cdef double s, target, remaining, step, h, err, lo, hi, mid
    cdef double switch_r2 = switch_r * switch_r
    cdef double domain_r2 = domain_r * domain_r
    cdef long nsteps = 0, nrejects = 0, nswitches = 0
    cdef double min_h = INFINITY
    cdef int status = OK, i, failed
    cdef bint last, bad
    if n * 2 > MAXD:
        raise ValueError("dimension too large for the compiled kernel")
    for i in range(n):
        y[i] = x0[i]
        y[n + i] = v0[i]
        out_x[0, i] = x0[i]
        out_v[0, i] = v0[i]
    out_chart[0] = chart
    s = nodes[0]
    h = h_base
    with nogil:
        for j in range(1, K):
            target = nodes[j]
            while s < target:
                if nsteps + nrejects >= max_steps:
                    status = MAX_STEPS
                    break
                remaining = target - s
                last = h >= remaining * (1.0 - 1e-12)
                step = remaining if last else h
                failed = richardson(n, sigma, y, step, ynew, &err)
                if failed:
                    err = INFINITY
                    bad = True
                else:
                    bad = err > tol or not inside(n, ynew, domain_r2)
                if bad and err <= tol:
                    lo = 0.0
                    hi = step
                    for i in range(d):
                        ylo[i] = y[i]
                    while hi - lo > 1e-14 * (fabs(s) if fabs(s) > 1.0 else 1.0):
                        mid = 0.5 * (lo + hi)
                        if richardson(n, sigma, y, mid, ynew, &err) == 0 and inside(n, ynew, domain_r2):
                            lo = mid
                            for i in range(d):
                                ylo[i] = ynew[i]
                        else:
                            hi = mid
                    if step < min_h:
                        min_h = step
                    s = s + lo
                    status = LEFT_DOMAIN
                    break
                if bad:
                    nrejects += 1
                    h = 0.5 * step
                    if h < h_min:
                        status = UNDERFLOW
                        break
                    continue
                nsteps += 1
                if step < min_h:
                    min_h = step
                if last:
                    s = target
                else:
                    s = s + step
                for i in range(d):
                    y[i] = ynew[i]
                if inversion and sqnorm(n, y) > switch_r2:
                    invert(n, y)
                    chart = 1 - chart
                    nswitches += 1
                if not last and err <= tol / 64.0 and step < h_base:
                    h = 2.0 * step
                    if h > h_base:
                        h = h_base
                elif not last:
                    h = step
            if status != OK:
                break
            out_chart[j] = chart
            for i in range(n):
                out_x[j, i] = y[i]
                out_v[j, i] = y[n + i]
    return status, s, nsteps, nrejects, nswitches, min_h
