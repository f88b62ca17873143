"""Compiled vs pure-Python geodesic kernel.

Times the conformal-metric integrator on random sphere and hyperbolic
geodesics through both backends, checks that they agree, and prints a
table. Usage::

    python3 benchmarks/bench_kernels.py [--repeats 5] [--samples 200]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from pathspace import kernels
from pathspace import manifold as mf
from pathspace.geodesic import DEFAULT_H_BASE, DEFAULT_TOL, _conformal_params


def _cases(m, rng, samples):
    out = []
    for _ in range(samples):
        x = rng.uniform(-0.6, 0.6, size=m.dim)
        v = rng.normal(size=m.dim)
        v *= rng.uniform(0.2, 2.0) / mf.norm(m, 0, x, v)
        out.append((x, v))
    return out


def _run(m, cases, backend, nodes):
    sigma, inversion, switch_r, domain_r = _conformal_params(m)
    h_min = 1e-13
    return [kernels.integrate_conformal(sigma, inversion, 0, x, v, nodes, DEFAULT_TOL, DEFAULT_H_BASE,
                                        h_min, switch_r, domain_r, backend=backend)
            for x, v in cases]


def bench(m, samples, repeats, seed=0):
    rng = np.random.default_rng(seed)
    cases = _cases(m, rng, samples)
    nodes = np.linspace(0.0, 1.0, 65)
    timings = {}
    results = {}
    for backend in ("python", "compiled"):
        best = np.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            results[backend] = _run(m, cases, backend, nodes)
            best = min(best, time.perf_counter() - t0)
        timings[backend] = best
    gap = max(float(np.max(np.abs(a.states - b.states)))
              for a, b in zip(results["python"], results["compiled"]))
    return timings, gap


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=200)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args(argv)
    if kernels._kernels is None:
        raise SystemExit("compiled extension not available; build with pip install -e . --no-build-isolation")
    print(f"{'manifold':<16}{'python [s]':>12}{'compiled [s]':>14}{'speedup':>10}{'max gap':>12}")
    for m in (mf.sphere(2), mf.hyperbolic(2), mf.sphere(3)):
        t, gap = bench(m, args.samples, args.repeats)
        print(f"{m.name:<16}{t['python']:>12.4f}{t['compiled']:>14.4f}"
              f"{t['python'] / t['compiled']:>10.1f}{gap:>12.2e}")


if __name__ == "__main__":
    main()
