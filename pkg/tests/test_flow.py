import numpy as np
import pytest

from microloc import flow
from microloc.errors import KernelViolation, NonNullStart
from microloc.geometry import PhasePoint, inverse_metric
from microloc.spin import FLAT_GAMMA, gammas_at, slash
from microloc.symbols import dirac, dirac_adjoint, maxwell_lorentz, null_covector, rpt_factorize

X0 = np.array([0.0, 8.0, 1.2, 0.3])
DIRECTION = [0.3, 0.5, -0.2]
SPINOR = np.array([1.0, 0.3j, -0.2, 0.5])


@pytest.fixture(scope="module")
def ray():
    from microloc.geometry import MetricSpec
    spec = MetricSpec.schwarzschild(1.0)
    start = PhasePoint(X0, null_covector(spec, X0, DIRECTION))
    return flow.integrate_bicharacteristic(spec, start, (0.0, 6.0), 61)


def _dencker(op, mode):
    return flow.DenckerSpec(op, rpt_factorize(op, n_samples=20), mode)


def test_minkowski_ray_is_straight(minkowski):
    strip = flow.integrate_bicharacteristic(
        minkowski, PhasePoint(np.zeros(4), [1.0, -1.0, 0, 0]), (0.0, 3.0), 31)
    assert np.allclose(strip.xs, strip.taus[:, None] * np.array([2.0, 2.0, 0, 0]), atol=1e-12)
    assert np.all(strip.xis == np.array([1.0, -1.0, 0, 0]))


def test_non_null_start_rejected(minkowski):
    with pytest.raises(NonNullStart):
        flow.integrate_bicharacteristic(minkowski, PhasePoint(np.zeros(4), [1.0, 0, 0, 0]), (0, 1))


def test_null_drift_bound(ray):
    assert ray.max_drift() < 1e-9 * float(ray.start.xi @ ray.start.xi)


def test_photon_sphere_persists(schwarzschild):
    start = flow.photon_sphere_start(schwarzschild)
    period = flow.angular_period(schwarzschild, start)
    strip = flow.integrate_bicharacteristic(schwarzschild, start, (0.0, 10 * period), 1001)
    assert np.max(np.abs(strip.xs[:, 1] - 3.0)) < 1e-6
    assert strip.xs[-1, 3] - strip.xs[0, 3] == pytest.approx(20 * np.pi, rel=1e-6)


def test_vector_transport_minkowski_constant(minkowski):
    strip = flow.integrate_bicharacteristic(
        minkowski, PhasePoint(np.zeros(4), [1.0, 0, -1.0, 0]), (0.0, 2.0), 11)
    pol = flow.transport_vector(strip, [0.1, 0.2, 0.3, 0.4])
    assert np.allclose(pol.fibres, [0.1, 0.2, 0.3, 0.4])


def test_tangent_is_self_parallel(ray):
    raise_ = [inverse_metric(ray.spec, x)[0] for x in ray.xs]
    pol = flow.transport_vector(ray, raise_[0] @ ray.start.xi)
    for k in range(len(ray.taus)):
        assert np.allclose(pol.fibres[k], raise_[k] @ ray.xis[k], atol=1e-7)


def test_vector_norm_conserved(ray):
    pol = flow.transport_vector(ray, [0.2, 1.0, 0.3, -0.1])
    norms = flow.metric_norm_along(ray, pol.fibres)
    assert np.max(np.abs(norms - norms[0])) < 1e-8


def test_spinor_transport_minkowski_identity(minkowski):
    strip = flow.integrate_bicharacteristic(
        minkowski, PhasePoint(np.zeros(4), [1.0, 0, 0, 1.0]), (0.0, 2.0), 11)
    pol = flow.transport_spinor(strip, minkowski, SPINOR)
    assert np.allclose(pol.fibres, SPINOR)


def test_slash_transported_on_both_indices(ray):
    w0 = slash(gammas_at(ray.spec, X0), ray.start.xi)
    pol = flow.transport_spinor(ray, ray.spec, w0, flow.SpinorSide.BISPINOR_BOTH)
    for k in range(len(ray.taus)):
        assert np.max(np.abs(pol.fibres[k] - slash(gammas_at(ray.spec, ray.xs[k]), ray.xis[k]))) < 1e-7


def test_dirac_adjoint_pairing_conserved(ray):
    pol = flow.transport_spinor(ray, ray.spec, SPINOR)
    bar = [np.conj(u) @ FLAT_GAMMA[0] @ u for u in pol.fibres]
    assert np.max(np.abs(np.array(bar) - bar[0])) < 1e-8


def test_dencker_dirac_spin(ray):
    op = dirac(ray.spec, 1.0)
    ds = _dencker(op, flow.TransportMode.SPIN)
    w0 = slash(gammas_at(ray.spec, X0), ray.start.xi) @ SPINOR
    orbit = flow.hamilton_orbit(ds, ray, w0)
    assert np.max(np.abs(flow.dencker_derivative(ds, ray, orbit))) < 1e-5


def test_dencker_maxwell_levi_civita(ray):
    ds = _dencker(maxwell_lorentz(ray.spec), flow.TransportMode.LEVI_CIVITA)
    orbit = flow.hamilton_orbit(ds, ray, np.array([0.2, 1.0, 0.3, -0.1]))
    assert np.max(np.abs(flow.dencker_derivative(ds, ray, orbit))) < 1e-5


def test_dencker_minkowski_constant_kernel(minkowski):
    xi = np.array([1.0, 0.0, 0.6, 0.8])
    strip = flow.integrate_bicharacteristic(minkowski, PhasePoint(np.zeros(4), xi), (0.0, 2.0), 21)
    op = dirac(minkowski, 2.5)
    w = slash(FLAT_GAMMA, xi) @ SPINOR
    d = flow.dencker_derivative(_dencker(op, flow.TransportMode.GENERIC), strip,
                                np.repeat(w[None], len(strip.taus), axis=0))
    assert np.max(np.abs(d)) < 1e-10


def test_dencker_rejects_non_kernel(ray):
    ds = _dencker(dirac(ray.spec), flow.TransportMode.SPIN)
    with pytest.raises(KernelViolation):
        flow.hamilton_orbit(ds, ray, SPINOR)


def test_dirac_orbit_of_slash_is_slash(ray):
    ds = _dencker(dirac(ray.spec), flow.TransportMode.SPIN)
    orbit = flow.hamilton_orbit(ds, ray, slash(gammas_at(ray.spec, X0), ray.start.xi))
    for k in range(len(ray.taus)):
        expected = slash(gammas_at(ray.spec, ray.xs[k]), ray.xis[k])
        assert flow.projective_deviation(orbit.fibres[k], expected) < 1e-6


def test_dirac_adjoint_orbit_of_slash(ray):
    ds = _dencker(dirac_adjoint(ray.spec), flow.TransportMode.SPIN)
    orbit = flow.hamilton_orbit(ds, ray, -slash(gammas_at(ray.spec, X0), ray.start.xi).T)
    for k in range(0, len(ray.taus), 10):
        expected = -slash(gammas_at(ray.spec, ray.xs[k]), ray.xis[k]).T
        assert flow.projective_deviation(orbit.fibres[k], expected) < 1e-6


def test_maxwell_orbit_minkowski_constant(minkowski):
    strip = flow.integrate_bicharacteristic(
        minkowski, PhasePoint(np.zeros(4), [1.0, 1.0, 0, 0]), (0.0, 2.0), 11)
    ds = _dencker(maxwell_lorentz(minkowski), flow.TransportMode.GENERIC)
    orbit = flow.hamilton_orbit(ds, strip, np.array([0.0, 0.0, 1.0, 0.0]))
    assert np.allclose(orbit.fibres, [0, 0, 1.0, 0], atol=1e-9)


def test_generic_matches_spin_transport(schwarzschild):
    start = PhasePoint(X0, null_covector(schwarzschild, X0, DIRECTION))
    strip = flow.integrate_bicharacteristic(schwarzschild, start, (0.0, 3.0), 16)
    op = dirac(schwarzschild, 1.0)
    w0 = slash(gammas_at(schwarzschild, X0), start.xi) @ SPINOR
    spin_orbit = flow.hamilton_orbit(_dencker(op, flow.TransportMode.SPIN), strip, w0)
    generic = flow.hamilton_orbit(_dencker(op, flow.TransportMode.GENERIC), strip, w0)
    dev = max(flow.projective_deviation(a, b) for a, b in zip(generic.fibres, spin_orbit.fibres))
    assert dev < 1e-5


def test_projective_deviation_ignores_phase():
    a = np.array([1.0, 2.0j, -0.5])
    assert flow.projective_deviation(a, (0.3 - 2j) * a) < 1e-15
    assert flow.projective_deviation(a, a + [0, 0, 1]) > 1e-2
