"""``pathspace`` command-line front end.

Subcommands: interpolate, geodesic, norm, curvature, verify,
probe-completeness. A summary goes to stdout; with ``--out DIR`` the full
result is also written to ``DIR`` (JSON, or CSV with ``--format csv``).
Errors print one ``pathspace: error: ...`` line to stderr and exit with

    0 success, 2 usage/input, 3 obstruction, 4 numeric failure, 5 verification failure.
"""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import io as pio
from . import manifold as mf
from .errors import (
    EXIT_NUMERIC,
    EXIT_OK,
    EXIT_USAGE,
    EXIT_VERIFY,
    DegeneratePlane,
    GeodesicFailure,
    NotInOverlap,
    PathSpaceError,
)
from .geodesic import DEFAULT_TOL, Point, distance
from .homotopy import (
    CERTIFY_TOL,
    DEFAULT_M,
    ObstructionReport,
    completeness_probe,
    geodesic_residual,
    pathspace_geodesic_bvp,
    pathspace_geodesic_ivp,
)
from .paths import DEFAULT_N, MIN_N, c1_norm, induced_curvature, norm_equivalence_bound
from .verify import SUITES, run_suites, suite_for

MIN_M = 8
PROG = "pathspace"


class UsageError(PathSpaceError):
    exit_code = EXIT_USAGE


@dataclass(frozen=True)
class RunConfig:
    """Options shared by every subcommand."""

    manifold: Optional[mf.ManifoldSpec]
    N: int = DEFAULT_N
    M: int = DEFAULT_M
    tol: float = DEFAULT_TOL
    seed: int = 0
    out: Optional[Path] = None
    format: str = "json"

    def __post_init__(self):
        if self.N < MIN_N:
            raise UsageError(f"--grid-n must be at least {MIN_N}")
        if self.M < MIN_M:
            raise UsageError(f"--grid-m must be at least {MIN_M}")
        if not self.tol > 0:
            raise UsageError("--tol must be positive")
        if self.format not in ("json", "csv"):
            raise UsageError("--format must be json or csv")

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        m = mf.parse_manifold_arg(args.manifold) if args.manifold else None
        return cls(m, args.grid_n, args.grid_m, args.tol, args.seed,
                   Path(args.out) if args.out else None, args.format)

    def emit(self, stem: str, json_doc, csv_text: Optional[str] = None) -> Optional[Path]:
        """Write the result file (only once the computation has finished)."""
        if self.out is None:
            return None
        if self.format == "csv" and csv_text is not None:
            return pio.write_atomic(self.out / f"{stem}.csv", csv_text)
        return pio.write_atomic(self.out / f"{stem}.json", pio.dumps(json_doc))


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and not math.isfinite(v)):
        return "-"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6e}"
    return str(v)


def _print_table(header, rows, out=None):
    out = out or sys.stdout
    rows = [[_fmt(v) for v in r] for r in rows]
    widths = [max(len(h), *(len(r[k]) for r in rows)) if rows else len(h) for k, h in enumerate(header)]
    print("  ".join(h.rjust(w) for h, w in zip(header, widths)), file=out)
    for r in rows:
        print("  ".join(v.rjust(w) for v, w in zip(r, widths)), file=out)


def _print_summary(summary: dict, out=None):
    out = out or sys.stdout
    for k, v in summary.items():
        if isinstance(v, (list, tuple, np.ndarray, dict)):
            continue
        print(f"{k}: {_fmt(v)}", file=out)


def _residual_summary(m, H) -> tuple:
    r = geodesic_residual(m, H)
    sup = float(np.nanmax(r)) if np.any(np.isfinite(r)) else math.nan
    return r, {"sup_geodesic_residual": sup, "certified": bool(sup <= CERTIFY_TOL),
               "certification_threshold": CERTIFY_TOL}


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_interpolate(cfg: RunConfig, args) -> int:
    a = pio.load_curve(args.curve1, cfg.manifold, cfg.N)
    b = pio.load_curve(args.curve2, a.manifold, cfg.N)
    m = a.manifold
    res = pathspace_geodesic_bvp(a, b, cfg.M, cfg.tol)
    if isinstance(res, ObstructionReport):
        cfg.emit("obstruction", pio.obstruction_document(res, m, a.t), pio.obstruction_csv(res, a.t))
        print(f"status: obstruction ({res.cause})")
        print(f"offending t indices: {list(res.offending)}")
        print(f"min margin: {_fmt(res.margin)}")
        print(f"{PROG}: error: {res.message}", file=sys.stderr)
        return res.exit_code
    r, summary = _residual_summary(m, res)
    summary = {"status": "ok", "endpoint_residual": res.summary["endpoint_residual"], **summary,
               "margins": res.summary["margins"]}
    cfg.emit("homotopy", pio.homotopy_document(res, r, summary), pio.homotopy_csv(res, r))
    _print_summary(summary)
    for w in res.warnings:
        print(f"{PROG}: warning: {w}", file=sys.stderr)
    ends = _endpoint_distances(res, b)
    _print_table(["i", "t", "endpoint_dist", "margin"],
                 [[i, float(t), ends[i], float(res.summary["margins"][i])] for i, t in enumerate(res.t)])
    return EXIT_OK


def _endpoint_distances(H, target):
    return [distance(H.manifold, Point(int(H.charts[-1, i]), H.x[-1, i]), target.point(i))
            for i in range(H.N + 1)]


def cmd_geodesic(cfg: RunConfig, args) -> int:
    gamma = pio.load_curve(args.curve, cfg.manifold, cfg.N)
    V = pio.load_field(args.field, gamma)
    m = gamma.manifold
    if not args.s_max > 0:
        raise UsageError("--s-max must be positive")
    try:
        H = pathspace_geodesic_ivp(gamma, V, args.s_max, cfg.M, cfg.tol)
    except GeodesicFailure as exc:
        raise GeodesicFailure(f"{exc}; use probe-completeness to map the reachable part") from None
    r, summary = _residual_summary(m, H)
    summary = {"status": "ok", "s_max": float(args.s_max), **summary,
               "max_speed_drift": max(d["speed_drift"] for d in H.diagnostics)}
    cfg.emit("homotopy", pio.homotopy_document(H, r, summary), pio.homotopy_csv(H, r))
    _print_summary(summary)
    return EXIT_OK


def _equivalence_constants(m, path):
    if len(m.charts) == 1:
        c = norm_equivalence_bound(m, path, 0, 0)
        return {"pair": [0, 0], "c": c, "c_prime": c}
    if (0, 1) in m.transitions and (1, 0) in m.transitions:
        try:
            return {"pair": [0, 1], "c": norm_equivalence_bound(m, path, 0, 1),
                    "c_prime": norm_equivalence_bound(m, path, 1, 0)}
        except NotInOverlap:
            return {"pair": [0, 1], "c": None, "c_prime": None,
                    "note": "the path leaves the overlap of charts 0 and 1"}
    return None


def cmd_norm(cfg: RunConfig, args) -> int:
    gamma = pio.load_curve(args.curve, cfg.manifold, cfg.N)
    X = pio.load_field(args.field, gamma)
    m = gamma.manifold
    total, parts, cover = c1_norm(X, breakdown=True)
    intervals = cover.describe(gamma.N)
    for iv, part in zip(intervals, parts):
        iv["contribution"] = part
    eq = _equivalence_constants(m, gamma)
    doc = {"format": "pathspace-norm", "manifold": pio.manifold_info(m), "N": gamma.N,
           "c1_norm": total, "cover": intervals, "equivalence": eq}
    rows = [[iv["chart"], iv["t"][0], iv["t"][1], iv["contribution"]] for iv in intervals]
    cfg.emit("norm", doc, pio.table_csv(["chart", "t_lo", "t_hi", "contribution"], rows))
    print(f"c1_norm: {_fmt(total)}")
    _print_table(["chart", "t_lo", "t_hi", "contribution"], rows)
    if eq is not None:
        print(f"equivalence charts {eq['pair'][0]}->{eq['pair'][1]}: c = {_fmt(eq['c'])}, "
              f"c' = {_fmt(eq['c_prime'])}")
    return EXIT_OK


def cmd_curvature(cfg: RunConfig, args) -> int:
    gamma = pio.load_curve(args.curve, cfg.manifold, cfg.N)
    X, Y, Z = (pio.load_field(f, gamma) for f in (args.X, args.Y, args.Z))
    m = gamma.manifold
    R = induced_curvature(m, gamma, X, Y, Z)
    K = []
    for i, (c, x) in enumerate(zip(gamma.charts, gamma.x)):
        try:
            K.append(mf.sectional_curvature(m, int(c), x, X.v[i], Y.v[i]))
        except DegeneratePlane:
            K.append(math.nan)
    K = np.array(K)
    try:
        source = pio.manifold_source(m)
    except ValueError:
        source = None
    doc = pio.field_document(R, source, {"sectional_curvature": K})
    if source is None:
        del doc["manifold"]
    n = m.dim
    rows = [[float(t), int(c), *map(float, v), float(k)]
            for t, c, v, k in zip(gamma.t, gamma.charts, R.v, K)]
    header = ["t", "chart"] + [f"R{k + 1}" for k in range(n)] + ["sectional"]
    cfg.emit("curvature", doc, pio.table_csv(header, rows))
    finite = K[np.isfinite(K)]
    print(f"max |R(X,Y)Z|: {_fmt(float(np.max(np.abs(R.v))))}")
    print(f"sectional curvature range: {_fmt(finite.min() if finite.size else None)} .. "
          f"{_fmt(finite.max() if finite.size else None)}")
    print(f"degenerate planes: {int(np.sum(~np.isfinite(K)))}")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, args) -> int:
    if args.suite:
        names = SUITES if "all" in args.suite else tuple(dict.fromkeys(args.suite))
    elif cfg.manifold is not None:
        name = suite_for(cfg.manifold)
        if name is None:
            raise UsageError(f"no verification suite for {cfg.manifold.name}")
        names = (name,)
    else:
        names = SUITES
    report = run_suites(names, cfg.seed, cfg.N, cfg.M)
    rows = [["PASS" if c["passed"] else "FAIL", c["suite"], c["name"], c["value"], c["relation"],
             c["threshold"]] for c in report["checks"]]
    cfg.emit("verify", {"format": "pathspace-verify", **report},
             pio.table_csv(["result", "suite", "check", "value", "relation", "threshold"], rows))
    _print_table(["result", "suite", "check", "value", "rel", "threshold"], rows)
    for c in report["checks"]:
        if c["detail"]:
            print(f"{PROG}: {c['suite']}/{c['name']}: {c['detail']}", file=sys.stderr)
    if not report["passed"]:
        print(f"{PROG}: error: verification failed", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_probe_completeness(cfg: RunConfig, args) -> int:
    gamma = pio.load_curve(args.curve, cfg.manifold, cfg.N)
    V = pio.load_field(args.field, gamma)
    m = gamma.manifold
    if not args.S > 0:
        raise UsageError("--S must be positive")
    rep = completeness_probe(m, gamma, V, args.S, tol=cfg.tol)
    r, res = _residual_summary(m, rep.homotopy)
    verdict = "complete" if rep.complete else "incomplete"
    rows = [[i, float(t), float(s), st] for i, (t, s, st) in enumerate(zip(gamma.t, rep.s_reached, rep.status))]
    doc = {"format": "pathspace-probe", "manifold": pio.manifold_info(m), "S": rep.S, "N": gamma.N,
           "M": rep.homotopy.M, "verdict": verdict, "failed": list(rep.failed),
           "s_reached": rep.s_reached, "status": rep.status, **res}
    cfg.emit("probe", doc, pio.table_csv(["i", "t", "s_reached", "status"], rows))
    print(f"verdict: {verdict} ({len(rep.failed)} of {len(gamma)} samples stop before S = {rep.S:g})")
    print(f"sup_geodesic_residual: {_fmt(res['sup_geodesic_residual'])}")
    _print_table(["i", "t", "s_reached", "status"], rows)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser and entry point
# ---------------------------------------------------------------------------

def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common options")
    g.add_argument("--manifold", help="builtin (sphere:2:1, hyperbolic:2, euclidean:2, open-disk) "
                                      "or manifold config file; must agree with the input files")
    g.add_argument("--grid-n", type=int, default=DEFAULT_N, help="t-grid intervals N (default %(default)s)")
    g.add_argument("--grid-m", type=int, default=DEFAULT_M, help="s-grid intervals M (default %(default)s)")
    g.add_argument("--tol", type=float, default=DEFAULT_TOL, help="integrator tolerance (default %(default)s)")
    g.add_argument("--seed", type=int, default=0, help="seed for random suites (default %(default)s)")
    g.add_argument("--out", help="directory for the result file")
    g.add_argument("--format", choices=("json", "csv"), default="json", help="result file format")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog=PROG, description="Geometry of spaces of paths on Riemannian manifolds.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("interpolate", parents=[common], help="join two curves by a path-space geodesic")
    p.add_argument("curve1")
    p.add_argument("curve2")
    p.set_defaults(func=cmd_interpolate)

    p = sub.add_parser("geodesic", parents=[common], help="path-space geodesic from a curve and a field")
    p.add_argument("curve")
    p.add_argument("field")
    p.add_argument("--s-max", type=float, default=1.0, help="geodesic parameter range (default %(default)s)")
    p.set_defaults(func=cmd_geodesic)

    p = sub.add_parser("norm", parents=[common], help="C1 norm of a field along a curve")
    p.add_argument("curve")
    p.add_argument("field")
    p.set_defaults(func=cmd_norm)

    p = sub.add_parser("curvature", parents=[common], help="induced curvature R(X,Y)Z along a curve")
    p.add_argument("curve")
    p.add_argument("X")
    p.add_argument("Y")
    p.add_argument("Z")
    p.set_defaults(func=cmd_curvature)

    p = sub.add_parser("verify", parents=[common], help="run the invariant suites")
    p.add_argument("--suite", action="append", choices=SUITES + ("all",),
                   help="suite to run (repeatable; default: all, or the one matching --manifold)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("probe-completeness", parents=[common],
                       help="how far a path-space geodesic can be continued")
    p.add_argument("curve")
    p.add_argument("field")
    p.add_argument("--S", type=float, default=20.0, help="target parameter (default %(default)s)")
    p.set_defaults(func=cmd_probe_completeness)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    try:
        cfg = RunConfig.from_args(args)
        return args.func(cfg, args)
    except PathSpaceError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"{PROG}: error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
