import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from microloc import hadamard as H
from microloc.errors import GridTooCoarse
from microloc.flow import integrate_bicharacteristic, transport_spinor, SpinorSide, projective_deviation
from microloc.geometry import PhasePoint
from microloc.spin import FLAT_GAMMA, bispinor_decompose, gammas_at, slash
from microloc.symbols import null_covector

ORIGIN = np.zeros(4)


def _mode_integral(m, r, eps):
    """Equal-time two-point function from its mode sum, via mpmath oscillatory quadrature."""
    def f(k):
        w = mpmath.sqrt(k * k + m * m)
        return k * mpmath.sin(k * r) * mpmath.exp(-w * eps) / w

    val = mpmath.quadosc(f, [0, mpmath.inf], omega=r)
    return float(val / (4 * mpmath.pi**2 * r))


def test_massless_spacelike_value():
    # frozen: mode integral at r = 1 tends to +1/(4 pi^2) as eps -> 0
    val = H.eval_minkowski_scalar(0.0, [0.0, 1.0, 0.0, 0.0], ORIGIN, 1e-6)
    assert val.real == pytest.approx(1 / (4 * np.pi**2), rel=1e-9)
    assert abs(val.imag) < 1e-12


@pytest.mark.parametrize("m,r", [(0.0, 1.0), (1.0, 0.7), (2.0, 1.5)])
def test_equal_time_matches_mode_integral(m, r):
    eps = 0.05
    oracle = _mode_integral(m, r, eps)
    val = H.eval_minkowski_scalar(m, [0.0, r, 0.0, 0.0], ORIGIN, eps)
    assert val.real == pytest.approx(oracle, rel=1e-8)


def test_bessel_form_matches_mpmath():
    m, eps = 1.3, 0.01
    x = np.array([0.4, 0.9, -0.3, 0.2])
    s = mpmath.mpc(x[1:] @ x[1:]) - mpmath.mpc(x[0], eps) ** 2
    oracle = complex(m * mpmath.besselk(1, m * mpmath.sqrt(s)) / (4 * mpmath.pi**2 * mpmath.sqrt(s)))
    assert H.eval_minkowski_scalar(m, x, ORIGIN, eps) == pytest.approx(oracle, rel=1e-12)


def test_radial_quadrature_matches_closed_form():
    x = np.array([0.3, 0.8, 0.1, -0.2])
    for m in (0.0, 1.0):
        a = H.eval_minkowski_scalar(m, x, ORIGIN, 0.05, method="bessel")
        b = H.eval_minkowski_scalar(m, x, ORIGIN, 0.05, method="radial")
        assert abs(a - b) < 1e-9 * abs(a)


@given(st.floats(0.5, 3.0), st.floats(0.0, 0.4), st.floats(0.0, 1.0))
def test_commutator_is_antisymmetric_at_timelike_separation(t, r, m):
    x = np.array([t, r, 0.0, 0.0])
    a = H.eval_minkowski_scalar(m, x, ORIGIN, 1e-3)
    b = H.eval_minkowski_scalar(m, ORIGIN, x, 1e-3)
    assert a.imag == pytest.approx(-b.imag, rel=1e-9, abs=1e-12)
    assert a.real == pytest.approx(b.real, rel=1e-9, abs=1e-12)


def test_spacelike_decay_rate_is_mass():
    m = 1.0
    f30, f40 = (H.eval_minkowski_scalar(m, [0, r, 0, 0], ORIGIN, 1e-6).real for r in (30.0, 40.0))
    rate = np.log(f30 / f40) / 10
    assert rate == pytest.approx(m + 1.5 * np.log(40 / 30) / 10, rel=2e-3)


def test_dirac_two_point_has_vector_and_scalar_parts_only():
    w = H.eval_minkowski_dirac(1.0, [0.4, 0.9, -0.3, 0.2], ORIGIN, 0.05).matrix
    d = bispinor_decompose(w, gammas_at(H.MetricSpec.minkowski(), ORIGIN))
    scale = np.max(np.abs(d.coefficients))
    assert np.max(np.abs(d.tensor)) < 1e-10 * scale
    assert abs(d.pseudoscalar) < 1e-10 * scale
    assert np.max(np.abs(d.axial)) < 1e-10 * scale


def test_massless_dirac_two_point_is_gradient():
    x = np.array([0.4, 0.9, -0.3, 0.2])
    w = H.eval_minkowski_dirac(0.0, x, ORIGIN, 0.05).matrix
    d = bispinor_decompose(w, gammas_at(H.MetricSpec.minkowski(), ORIGIN))
    assert abs(d.scalar) < 1e-12 * np.max(np.abs(d.vector))
    assert np.allclose(d.vector, 1j * H.lambda_gradient(0.0, x, ORIGIN, 0.05))


def test_dirac_two_point_solves_dirac_equation():
    m, eps = 1.0, 0.2
    x = np.array([0.4, 0.9, -0.3, 0.2])

    def residual(h):
        out = m * H.eval_minkowski_dirac(m, x, ORIGIN, eps).matrix
        for mu in range(4):
            e = np.zeros(4)
            e[mu] = h
            d = (H.eval_minkowski_dirac(m, x + e, ORIGIN, eps).matrix
                 - H.eval_minkowski_dirac(m, x - e, ORIGIN, eps).matrix) / (2 * h)
            out = out - 1j * FLAT_GAMMA[mu] @ d
        return np.max(np.abs(out))

    r1, r2 = residual(1e-2), residual(5e-3)
    assert r2 < 1e-3
    assert np.log2(r1 / r2) > 1.8


def test_fourier_support():
    m, k = 1.0, 0.75
    xi = np.array([np.sqrt(k * k + m * m), k, 0, 0])
    assert H.fourier_vacuum_scalar(m, xi, -xi).on_support
    assert not H.fourier_vacuum_scalar(m, -xi, xi).on_support
    assert not H.fourier_vacuum_scalar(m, xi, -xi + [0, 0.1, 0, 0]).on_support


def test_equivalence_minkowski(minkowski):
    a = PhasePoint(ORIGIN, [1.0, -1.0, 0, 0])
    b = PhasePoint([1.0, 1.0, 0, 0], [1.0, -1.0, 0, 0])
    assert H.equivalence_related(minkowski, a, b)
    assert not H.equivalence_related(minkowski, a, PhasePoint([0.0, 1.0, 0, 0], [1.0, -1.0, 0, 0]))


def test_equivalence_schwarzschild_flow(schwarzschild):
    x = np.array([0.0, 8.0, 1.2, 0.3])
    xi = null_covector(schwarzschild, x, [0.3, 0.5, -0.2])
    strip = integrate_bicharacteristic(schwarzschild, PhasePoint(x, xi), (0.0, 3.0), 2)
    assert H.equivalence_related(schwarzschild, PhasePoint(x, xi), PhasePoint(strip.xs[-1], strip.xis[-1]))


def test_hadamard_prediction_null_pair(minkowski):
    els = H.predict_wf_hadamard_scalar(minkowski, [1.0, 1.0, 0, 0], ORIGIN)
    assert len(els) == 1
    assert els[0].frequency_flag
    assert np.allclose(els[0].xi, [1, -1, 0, 0])
    assert H.predict_wf_hadamard_scalar(minkowski, [0.0, 1.0, 0, 0], ORIGIN) == []


def test_hadamard_prediction_past_pair_keeps_future_xi(minkowski):
    els = H.predict_wf_hadamard_scalar(minkowski, ORIGIN, [1.0, 1.0, 0, 0])
    assert len(els) == 1 and els[0].xi[0] > 0


def test_hadamard_diagonal_is_future_null_cone(minkowski):
    els = H.predict_wf_hadamard_scalar(minkowski, ORIGIN, ORIGIN)
    assert len(els) == H.DIAGONAL_DIRECTIONS
    for el in els:
        assert el.xi[0] > 0
        assert abs(el.xi[0] ** 2 - el.xi[1:] @ el.xi[1:]) < 1e-12
        assert np.allclose(el.eta, el.xi)


def test_pol_minkowski_is_slash(minkowski):
    (pe,) = H.predict_pol_dirac(minkowski, [1.0, 0, 1.0, 0], ORIGIN)
    expected = slash(FLAT_GAMMA, pe.element.xi)
    assert projective_deviation(pe.fibre.matrix, expected) < 1e-12


def test_pol_diagonal_is_slash(schwarzschild):
    x = np.array([0.0, 6.0, 1.0, 0.2])
    for pe in H.predict_pol_dirac(schwarzschild, x, x, 8):
        assert projective_deviation(pe.fibre.matrix, slash(gammas_at(schwarzschild, x), pe.element.xi)) < 1e-12


def test_pol_schwarzschild_matches_right_transport(schwarzschild):
    x = np.array([0.0, 8.0, 1.2, 0.3])
    xi = null_covector(schwarzschild, x, [0.3, 0.5, -0.2])
    strip = integrate_bicharacteristic(schwarzschild, PhasePoint(x, xi), (0.0, 3.0), 31)
    y = strip.xs[-1]
    (pe,) = H.predict_pol_dirac(schwarzschild, x, y)
    w = transport_spinor(strip, schwarzschild, slash(gammas_at(schwarzschild, x), xi),
                         SpinorSide.BISPINOR_RIGHT).fibres[-1]
    assert projective_deviation(pe.fibre.matrix, w) < 1e-5


@pytest.mark.parametrize("x,future", [([1.0, 1.0, 0, 0], True), ([-1.0, 1.0, 0, 0], False)])
def test_feynman_off_diagonal_sign(minkowski, x, future):
    (el,) = H.predict_wf_feynman(minkowski, x, ORIGIN)
    assert bool(el.xi[0] > 0) is future


def test_feynman_diagonal_family(minkowski):
    els = H.predict_wf_feynman(minkowski, ORIGIN, ORIGIN, 64)
    assert len(els) == 64
    assert any(e.xi[0] < 0 for e in els) and any(e.xi[0] > 0 for e in els)


def test_product_admissibility(minkowski):
    had = H.predict_wf_hadamard_scalar(minkowski, ORIGIN, ORIGIN)
    ok, bad = H.product_admissible(had, had)
    assert ok and bad == []
    feyn = H.predict_wf_feynman(minkowski, ORIGIN, ORIGIN)
    ok, bad = H.product_admissible(feyn, feyn)
    assert not ok and bad and all(a.diagonal for a, _ in bad)
    assert H.product_admissible([], feyn)[0]


def test_sample_delta_peak():
    x = np.linspace(-0.1, 0.1, 161)
    s = H.sample_examples("delta", x, 0.01)
    assert s.values[0, 80].real == pytest.approx((2 * np.pi * 1e-4) ** -0.5)


def test_sample_one_over_x():
    x = np.linspace(-0.1, 0.1, 161)
    s = H.sample_examples("one_over_x_plus_ieps", x, 0.01)
    assert s.values[0, 80] == pytest.approx(-1j / 0.01)


def test_sample_grad_delta_is_odd():
    ax = np.linspace(-0.05, 0.05, 51)
    s = H.sample_examples("grad_delta_2d", (ax, ax), 0.01)
    assert s.components == 2
    assert np.allclose(s.values[:, ::-1, ::-1], -s.values)


def test_sample_resolution_guard():
    with pytest.raises(GridTooCoarse):
        H.sample_examples("one_over_x_plus_ieps", np.linspace(-1, 1, 11), 0.01)


def test_lambda_slice_matches_evaluator():
    s_ax = np.linspace(-0.01, 0.01, 81)
    v_ax = np.linspace(-0.2, 0.2, 5)
    smp = H.sample_examples("minkowski_lambda_slice", (s_ax, v_ax), 0.002)
    s, v = s_ax[13], v_ax[3]
    x = np.array([3.0 + (s + v) / 2, 0, 0, 3.0 + (v - s) / 2])
    assert smp.values[0, 13, 3] == pytest.approx(H.eval_minkowski_scalar(0.0, x, ORIGIN, 0.002))
    assert np.allclose(H.slice_covector((1.0, 0.0)), [1.0, -1.0])
