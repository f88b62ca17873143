import json
import math

import numpy as np
import pytest

from pathspace import manifold as M
from pathspace.errors import ConfigError, DegeneratePlane, NotInOverlap, OutOfDomain

SPHERE_EXPR = {
    "name": "sphere-expr", "dim": 2,
    "charts": [{"name": "north", "g": [["4/((1+x1^2+x2^2)^2)", "0"], ["0", "4/((1+x1^2+x2^2)^2)"]],
                "domain": [[-2, 2], [-2, 2]]}],
}
HYPERBOLIC_EXPR = {
    "name": "poincare-expr", "dim": 2,
    "charts": [{"name": "ball", "g": [["4/((1-x1^2-x2^2)^2)", "0"], ["0", "4/((1-x1^2-x2^2)^2)"]],
                "domain": {"ball": {"center": [0, 0], "radius": 1}}}],
}
HALF_PLANE = {
    "name": "half-plane", "dim": 2, "epsilon": 5.0,
    "charts": [{"name": "H", "g": [["1/x2^2", "0"], ["0", "1/x2^2"]],
                "domain": [[-10, 10], [0.01, 10]]}],
}
FLAT_EXPR = {
    "name": "flat-expr", "dim": 2,
    "charts": [{"name": "R2", "g": [["1", "0"], ["0", "1"]], "domain": [[-5, 5], [-5, 5]]}],
}


def test_metric_examples():
    assert np.array_equal(M.metric_at(M.euclidean(2), 0, [3.0, -1.0]), np.eye(2))
    assert np.allclose(M.metric_at(M.sphere(2, 1.0), 0, [0.0, 0.0]), 4 * np.eye(2))
    assert np.allclose(M.metric_at(M.hyperbolic(2), 0, [0.0, 0.0]), 4 * np.eye(2))
    assert np.allclose(M.metric_at(M.from_config(SPHERE_EXPR), 0, [0.0, 0.0]), 4 * np.eye(2))


def test_metric_out_of_domain():
    with pytest.raises(OutOfDomain):
        M.metric_at(M.hyperbolic(2), 0, [1.0, 0.0])
    with pytest.raises(OutOfDomain):
        M.metric_at(M.sphere(2), 1, [2.5, 0.0])


def test_sphere_radius_scales_metric():
    m = M.sphere(2, 3.0)
    x = np.array([0.4, -0.2])
    assert np.allclose(M.metric_at(m, 0, x), 9 * M.metric_at(M.sphere(2, 1.0), 0, x))


def test_christoffel_examples():
    assert np.all(M.christoffel(M.euclidean(3), 0, [1.0, 2.0, 3.0]) == 0)
    assert np.allclose(M.christoffel(M.sphere(2), 0, [0.0, 0.0]), 0)
    hp = M.from_config(HALF_PLANE)
    gam = M.christoffel(hp, 0, [0.3, 1.0])
    # Gamma^1_12 = -1/x2 (indices shifted to 0-based)
    assert gam[0, 0, 1] == pytest.approx(-1.0, abs=1e-14)
    assert gam[0, 1, 0] == pytest.approx(-1.0, abs=1e-14)
    # the other nonzero symbols of the half plane: G^2_11 = 1/y, G^2_22 = -1/y
    assert gam[1, 0, 0] == pytest.approx(1.0, abs=1e-14)
    assert gam[1, 1, 1] == pytest.approx(-1.0, abs=1e-14)


@pytest.mark.parametrize("factory", [
    lambda: M.sphere(2, 1.3), lambda: M.hyperbolic(2), lambda: M.hyperbolic(3),
    lambda: M.from_config(SPHERE_EXPR), lambda: M.from_config(HALF_PLANE),
])
def test_christoffel_symmetric_and_matches_fd(factory, rng):
    m = factory()
    dom = m.charts[0].domain
    for x in dom.sample(rng, 20):
        gam = M.christoffel(m, 0, x)
        assert np.allclose(gam, np.swapaxes(gam, 1, 2), atol=0, rtol=0)
        fd = M.christoffel(m, 0, x, method="fd")
        assert np.max(np.abs(gam - fd)) <= 1e-5 * max(1.0, np.max(np.abs(gam)))


def test_builtin_closed_form_agrees_with_expression_metric(rng):
    sym = M.from_config(SPHERE_EXPR)
    clo = M.sphere(2, 1.0)
    for x in rng.uniform(-1.2, 1.2, size=(30, 2)):
        assert np.allclose(M.christoffel(sym, 0, x), M.christoffel(clo, 0, x), atol=1e-12)
        assert np.allclose(M.christoffel_derivative(sym, 0, x),
                           M.christoffel_derivative(clo, 0, x), atol=1e-11)


def test_callable_metric_uses_finite_differences(rng):
    m = M.from_metric_function(lambda x: 4 / (1 + x @ x) ** 2 * np.eye(2), 2,
                               M.Ball((0.0, 0.0), 2.0))
    ref = M.sphere(2)
    for x in rng.uniform(-1, 1, size=(10, 2)):
        assert np.allclose(M.christoffel(m, 0, x), M.christoffel(ref, 0, x), atol=1e-8)
        X, Y = rng.normal(size=2), rng.normal(size=2)
        assert M.sectional_curvature(m, 0, x, X, Y) == pytest.approx(1.0, abs=1e-4)


def _unit(m, x, rng):
    g = M.metric_at(m, 0, x)
    X, Y, Z = rng.normal(size=(3, m.dim))
    return g, X, Y, Z


@pytest.mark.parametrize("m,K", [
    (M.euclidean(2), 0.0), (M.sphere(2, 1.0), 1.0), (M.sphere(2, 2.0), 0.25),
    (M.sphere(3, 1.0), 1.0), (M.hyperbolic(2), -1.0), (M.hyperbolic(3), -1.0),
    (M.from_config(SPHERE_EXPR), 1.0), (M.from_config(HYPERBOLIC_EXPR), -1.0),
    (M.from_config(HALF_PLANE), -1.0), (M.from_config(FLAT_EXPR), 0.0),
])
def test_constant_curvature(m, K, rng):
    dom = m.charts[0].domain
    for x in dom.sample(rng, 15):
        g, X, Y, Z = _unit(m, x, rng)
        assert M.sectional_curvature(m, 0, x, X, Y) == pytest.approx(K, abs=1e-6)
        R = M.curvature_tensor(m, 0, x, X, Y, Z)
        expect = K * ((Y @ g @ Z) * X - (X @ g @ Z) * Y)
        assert np.allclose(R, expect, atol=1e-6 * max(1.0, np.abs(expect).max()))


def test_curvature_symmetries(rng):
    m = M.from_config({
        "dim": 2,
        "charts": [{"name": "c", "g": [["1+x1^2", "x1*x2/3"], ["x1*x2/3", "2+sin(x2)"]],
                    "domain": [[-1, 1], [-1, 1]]}],
    })
    for x in rng.uniform(-0.8, 0.8, size=(20, 2)):
        X, Y, Z = rng.normal(size=(3, 2))
        assert np.array_equal(M.curvature_tensor(m, 0, x, X, X, Z), np.zeros(2)) or \
            np.allclose(M.curvature_tensor(m, 0, x, X, X, Z), 0, atol=1e-14)
        a = M.curvature_tensor(m, 0, x, X, Y, Z)
        b = M.curvature_tensor(m, 0, x, Y, X, Z)
        assert np.allclose(a, -b, atol=1e-14)
        bianchi = a + M.curvature_tensor(m, 0, x, Y, Z, X) + M.curvature_tensor(m, 0, x, Z, X, Y)
        assert np.max(np.abs(bianchi)) <= 1e-6


def test_degenerate_plane():
    with pytest.raises(DegeneratePlane):
        M.sectional_curvature(M.sphere(2), 0, [0.1, 0.2], [1.0, 2.0], [2.0, 4.0])


def test_inversion_transition_example():
    m = M.sphere(2)
    img, jac, hess = M.chart_transition(m, 0, 1, [1.0, 0.0])
    assert np.allclose(img, [1.0, 0.0])
    assert np.allclose(jac, np.diag([-1.0, 1.0]))
    assert np.allclose(hess, np.swapaxes(hess, 1, 2))


def test_inversion_second_derivative_matches_fd(rng):
    m = M.sphere(3)
    h = 1e-5
    for x in rng.uniform(0.4, 1.2, size=(10, 3)):
        _, _, hess = M.chart_transition(m, 0, 1, x)
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            fd = (M.chart_transition(m, 0, 1, x + e)[1] - M.chart_transition(m, 0, 1, x - e)[1]) / (2 * h)
            # fd[k, j] = d_i d_j lambda^k
            assert np.allclose(hess[:, i, :], fd, atol=1e-7)


def test_transition_round_trip(rng):
    m = M.sphere(2)
    for x in rng.uniform(-1.5, 1.5, size=(50, 2)):
        if not 0.5 <= np.linalg.norm(x) <= 2.0:
            continue
        y = M.chart_transition(m, 0, 1, x)[0]
        assert np.max(np.abs(M.chart_transition(m, 1, 0, y)[0] - x)) <= 1e-10


def test_identity_and_linear_transitions():
    m = M.euclidean(2)
    img, jac, hess = M.chart_transition(m, 0, 0, [0.3, 0.4])
    assert np.array_equal(jac, np.eye(2)) and not hess.any()
    A = np.array([[2.0, 1.0], [0.0, 3.0]])
    tr = M.AffineTransition(A)
    img, jac, hess = tr([1.0, 1.0])
    assert np.allclose(img, [3.0, 3.0]) and np.array_equal(jac, A) and not hess.any()


def test_not_in_overlap():
    m = M.sphere(2)
    with pytest.raises(NotInOverlap):
        M.chart_transition(m, 0, 1, [0.1, 0.0])
    with pytest.raises(NotInOverlap):
        M.chart_transition(m, 0, 1, [0.0, 0.0])


TWO_CHART = {
    "name": "shifted", "dim": 2,
    "charts": [{"name": "a", "g": [["1", "0"], ["0", "1"]], "domain": [[-2, 1], [-2, 2]]},
               {"name": "b", "g": [["1", "0"], ["0", "1"]], "domain": [[-1, 2], [-2, 2]]}],
    "transitions": [{"from": "a", "to": "b", "map": ["x1 - 0", "x2"]},
                    {"from": "b", "to": "a", "map": ["x1", "x2"]}],
}


def test_expression_transition():
    m = M.from_config(TWO_CHART)
    img, jac, hess = M.chart_transition(m, 0, 1, [0.5, 0.3])
    assert np.allclose(img, [0.5, 0.3]) and np.allclose(jac, np.eye(2)) and not hess.any()


@pytest.mark.parametrize("cfg,msg", [
    ({"dim": 2}, "dim"),
    ({"dim": 2, "charts": [{"g": [["1"]]}]}, "2x2"),
    ({"dim": 2, "charts": [{"g": [["1", "x2"], ["0", "1"]]}]}, "symmetric"),
    ({"dim": 2, "charts": [{"g": [["1", "0"], ["0", "-1"]]}]}, "positive"),
    ({"dim": 2, "charts": [{"g": [["1", "0"], ["0", "y"]]}]}, "unknown identifier"),
    ({"dim": 1, "charts": [{"g": [["x2"]]}]}, "x2"),
    ({"dim": 2, "charts": [{"name": "a", "g": [["1", "0"], ["0", "1"]]}],
      "transitions": [{"from": "a", "to": "zz", "map": ["x1", "x2"]}]}, "unknown charts"),
    ({"dim": 1, "charts": [{"name": "a", "g": [["1"]]}, {"name": "b", "g": [["1"]]}],
      "transitions": [{"from": "a", "to": "b", "map": ["x1+1"]},
                      {"from": "b", "to": "a", "map": ["x1"]}]}, "identity"),
])
def test_config_errors(cfg, msg):
    with pytest.raises(ConfigError, match=msg):
        M.from_config(cfg)


def test_builtin_in_config_and_arg_parsing(tmp_path):
    assert M.from_config({"builtin": {"name": "sphere", "dim": 2, "radius": 2.0}}).radius == 2.0
    assert M.parse_manifold_arg("sphere:3:0.5").dim == 3
    assert M.parse_manifold_arg("hyperbolic").kind == "hyperbolic"
    p = tmp_path / "m.json"
    p.write_text(json.dumps(HALF_PLANE))
    assert M.parse_manifold_arg(str(p)).name == "half-plane"
    with pytest.raises(ConfigError):
        M.parse_manifold_arg("klein-bottle")


def test_epsilon_policy():
    assert M.sphere(2, 2.0).epsilon == pytest.approx(0.9 * math.pi * 2.0)
    assert M.euclidean(2).epsilon == math.inf
    assert M.hyperbolic(2).epsilon == math.inf
    assert M.from_config(FLAT_EXPR).epsilon == 1.0
    assert M.from_config(HALF_PLANE).epsilon == 5.0


def test_hash_is_stable():
    assert M.sphere(2).hash == M.sphere(2).hash
    assert M.sphere(2).hash != M.sphere(2, 2.0).hash
    assert M.from_config(HALF_PLANE).hash == M.from_config(HALF_PLANE).hash
