import numpy as np
import pytest
from hypothesis import given, strategies as st

from microloc.errors import OutOfDomain
from microloc.geometry import (
    ETA, CausalClass, MetricSpec, PhasePoint, christoffel, classify_covector, geodesic_connect,
    inverse_metric, metric, metric_at, metric_derivative, sigma_quadratic_distance,
    solve_geodesic_bvp, sqrt_minus_det, tetrad,
)

# frozen from a sympy evaluation of the Levi-Civita formula on the closed-form metrics
SCHWARZSCHILD_R10 = {(1, 0, 0): 1 / 125, (0, 0, 1): 1 / 80, (3, 1, 3): 1 / 10, (1, 2, 2): -8.0}
FRW_T2 = {(0, 1, 1): 2.0, (1, 0, 1): 0.5}
FRW_T2_SCALAR_CURVATURE = -1.5

finite = st.floats(-5, 5, allow_nan=False)


def _equatorial(r):
    return np.array([0.0, r, np.pi / 2, 0.0])


def test_minkowski_flat(minkowski):
    cache = metric_at(minkowski, [0.3, -1.0, 2.0, 0.5])
    assert np.all(cache.christoffel == 0)
    assert np.allclose(cache.riemann, 0)
    assert cache.scalar_curvature == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("idx,value", sorted(SCHWARZSCHILD_R10.items()))
def test_schwarzschild_christoffels(schwarzschild, idx, value):
    assert christoffel(schwarzschild, _equatorial(10.0))[idx] == pytest.approx(value, rel=1e-12)


def test_schwarzschild_gamma_r_tt_closed_form(schwarzschild):
    m, r = 1.0, 10.0
    assert christoffel(schwarzschild, _equatorial(r))[1, 0, 0] == pytest.approx(m * (r - 2 * m) / r**3)


@pytest.mark.parametrize("idx,value", sorted(FRW_T2.items()))
def test_frw_christoffels(frw, idx, value):
    assert christoffel(frw, [2.0, 0.1, -0.4, 0.7])[idx] == pytest.approx(value, rel=1e-12)


def test_frw_scalar_curvature(frw):
    assert metric_at(frw, [2.0, 0.0, 0.0, 0.0]).scalar_curvature == pytest.approx(
        FRW_T2_SCALAR_CURVATURE, rel=1e-6)


def test_schwarzschild_is_ricci_flat(schwarzschild):
    cache = metric_at(schwarzschild, [0.0, 7.0, 1.1, 0.4])
    assert np.max(np.abs(cache.ricci)) < 1e-6


def test_metric_derivative_matches_finite_difference(schwarzschild):
    x = np.array([0.0, 6.0, 1.0, 0.2])
    dg = metric_derivative(schwarzschild, x)
    h = 1e-6
    for l in range(4):
        e = np.zeros(4)
        e[l] = h
        fd = (metric(schwarzschild, x + e) - metric(schwarzschild, x - e)) / (2 * h)
        assert np.allclose(dg[l], fd, atol=1e-7)


def test_custom_metric_matches_builtin(frw):
    custom = MetricSpec.custom({(0, 0): "1", (1, 1): "-t^2", (2, 2): "-t^2", (3, 3): "-t^2"})
    x = np.array([2.0, 0.1, -0.4, 0.7])
    assert np.allclose(metric(custom, x), metric(frw, x))
    assert np.allclose(christoffel(custom, x), christoffel(frw, x), atol=1e-7)


def test_schwarzschild_domain(schwarzschild):
    with pytest.raises(OutOfDomain):
        metric_at(schwarzschild, [0.0, 1.5, 1.0, 0.0])


@given(st.floats(2.5, 30), st.floats(0.2, np.pi - 0.2), finite)
def test_tetrad_orthonormal(r, theta, phi):
    spec = MetricSpec.schwarzschild(1.0)
    x = np.array([0.0, r, theta, phi])
    e = tetrad(spec, x)
    assert np.allclose(e.T @ metric(spec, x) @ e, ETA, atol=1e-12)


@given(finite, finite, finite, st.floats(0.5, 5))
def test_inverse_metric_property(x1, x2, x3, t):
    spec = MetricSpec.frw_flat("power", a0=1.0, exponent=1.0)
    x = np.array([t, x1, x2, x3])
    ginv, _ = inverse_metric(spec, x)
    assert np.allclose(ginv @ metric(spec, x), np.eye(4), atol=1e-12)
    assert sqrt_minus_det(spec, x) == pytest.approx(t**3)


@pytest.mark.parametrize("xi,expected", [
    ([1, 0, 0, 0], CausalClass.TimelikeFuture),
    ([1, -1, 0, 0], CausalClass.NullFuture),
    ([0, 1, 0, 0], CausalClass.Spacelike),
    ([-1, 1, 0, 0], CausalClass.NullPast),
    ([0, 0, 0, 0], CausalClass.Zero),
])
def test_classify_covector(minkowski, xi, expected):
    assert classify_covector(metric_at(minkowski, np.zeros(4)), xi) is expected


def test_phase_point_rejects_zero_covector():
    with pytest.raises(ValueError):
        PhasePoint([0, 0, 0, 0], [0, 0, 0, 0])


def test_geodesic_connect_minkowski(minkowski):
    conn = geodesic_connect(minkowski, np.zeros(4), [1.0, 1.0, 0, 0])
    xi = conn.xi / conn.xi[0]
    assert np.allclose(xi, [1, -1, 0, 0])
    assert geodesic_connect(minkowski, np.zeros(4), [0.0, 1.0, 0, 0]) is None


def test_geodesic_connect_schwarzschild_radial(schwarzschild):
    # outgoing radial null ray from the tortoise coordinate t = r + 2M log(r/2M - 1)
    def tortoise(r):
        return r + 2 * np.log(r / 2 - 1)

    x = np.array([0.0, 6.0, np.pi / 2, 0.0])
    y = np.array([tortoise(10.0) - tortoise(6.0), 10.0, np.pi / 2, 0.0])
    conn = geodesic_connect(schwarzschild, x, y)
    assert conn is not None
    xi = conn.xi / conn.xi[0]
    assert np.allclose(xi, [1.0, -1.0 / (1 - 2 / 6.0), 0, 0], atol=1e-6)


@pytest.mark.parametrize("d,sigma", [([0, 1, 0, 0], -1.0), ([2, 1, 0, 0], 3.0)])
def test_sigma_minkowski(minkowski, d, sigma):
    assert sigma_quadratic_distance(minkowski, np.array(d, float), np.zeros(4)) == sigma


def test_sigma_schwarzschild_tighter_solve(schwarzschild):
    x = np.array([0.0, 8.0, 1.2, 0.3])
    y = np.array([0.5, 8.3, 1.25, 0.32])
    loose = sigma_quadratic_distance(schwarzschild, x, y)
    tight = solve_geodesic_bvp(schwarzschild, x, y, tol=1e-12, rtol=1e-13).sigma
    assert loose == pytest.approx(tight, rel=1e-6)
