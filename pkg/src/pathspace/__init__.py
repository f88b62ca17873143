"""Numerical geometry of spaces of smooth paths on Riemannian manifolds.

Manifolds are chart atlases with expression or builtin metrics; paths and
vector fields along them are sampled on uniform t-grids; path-space
geodesics are computed as families of pointwise geodesics.
"""
from .errors import PathSpaceError
from .geodesic import Point, TangentVector, distance, exp_map, geodesic_ivp, log_map, parallel_transport
from .homotopy import (
    CompletenessReport,
    ObstructionReport,
    PathHomotopy,
    antipodal_obstruction_scan,
    certify,
    completeness_probe,
    geodesic_residual,
    pathspace_geodesic_bvp,
    pathspace_geodesic_ivp,
)
from .manifold import (
    ManifoldSpec,
    christoffel,
    curvature_tensor,
    euclidean,
    flat_torus,
    from_config,
    hyperbolic,
    open_disk,
    sectional_curvature,
    sphere,
)
from .paths import (
    ChartCover,
    DiscretePath,
    PathTangent,
    build_cover,
    c1_norm,
    chart_change_field,
    evaluate_at,
    induced_covariant_derivative,
    induced_curvature,
    lift_vector_field,
    norm_equivalence_bound,
    path_exp_chart,
    path_log_chart,
    resample_path,
    transition_derivative_check,
    transition_operator,
)

__version__ = "0.1.0"

__all__ = [
    "PathSpaceError",
    "Point", "TangentVector", "distance", "exp_map", "geodesic_ivp", "log_map", "parallel_transport",
    "CompletenessReport", "ObstructionReport", "PathHomotopy", "antipodal_obstruction_scan", "certify",
    "completeness_probe", "geodesic_residual", "pathspace_geodesic_bvp", "pathspace_geodesic_ivp",
    "ManifoldSpec", "christoffel", "curvature_tensor", "euclidean", "flat_torus", "from_config",
    "hyperbolic", "open_disk", "sectional_curvature", "sphere",
    "ChartCover", "DiscretePath", "PathTangent", "build_cover", "c1_norm", "chart_change_field",
    "evaluate_at", "induced_covariant_derivative", "induced_curvature", "lift_vector_field",
    "norm_equivalence_bound", "path_exp_chart", "path_log_chart", "resample_path",
    "transition_derivative_check", "transition_operator",
]
