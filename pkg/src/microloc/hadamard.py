"""Two-point functions on Minkowski space and wave-front-set predictors.

Conventions. Fourier transforms are ``u^(xi) = int exp(-i xi.x) u(x) dx``.
The vacuum two-point function is taken with positive-frequency support
``xi_0 > 0`` in the first argument, which fixes the i-epsilon rule
``sigma_eps = (t + i eps)^2 - |dx|^2`` with ``t = x^0 - y^0``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .errors import GridTooCoarse
from .flow import SpinorSide, integrate_bicharacteristic, transport_spinor
from .geometry import (ETA, MetricSpec, PhasePoint, classify_covector, geodesic_connect,
                       inverse_metric, metric_at)
from .spin import FLAT_GAMMA, BispinorMatrix, gammas_at, slash
from .symbols import null_covector

RAY_TOL = 1e-6
DIAGONAL_DIRECTIONS = 64


# --------------------------------------------------------------------------
# elements


@dataclass(frozen=True, eq=False)
class WFElement:
    """``(x, y; xi, -eta)``; ``eta`` is the raw covector at y (the transport of xi)."""

    x: np.ndarray
    y: np.ndarray
    xi: np.ndarray
    eta: np.ndarray
    frequency_flag: bool
    diagnostics: dict = field(default_factory=dict)

    @property
    def direction(self) -> np.ndarray:
        return np.concatenate([self.xi, -self.eta])

    @property
    def diagonal(self) -> bool:
        return bool(np.allclose(self.x, self.y, rtol=0, atol=1e-12))


@dataclass(frozen=True, eq=False)
class PolElement:
    element: WFElement
    fibre: BispinorMatrix
    diagnostics: dict = field(default_factory=dict)


def _normalized(spec: MetricSpec, x, xi, eta):
    """Scale so the raised time component of xi has modulus 1 (sign kept)."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    raised0 = float(inverse_metric(spec, x)[0][0] @ xi)
    scale = abs(raised0) if abs(raised0) > 1e-14 * np.linalg.norm(xi) else np.linalg.norm(xi)
    return xi / scale, eta / scale


def _element(spec, x, y, xi, eta, **diag) -> WFElement:
    xi, eta = _normalized(spec, x, xi, eta)
    flag = classify_covector(metric_at(spec, x, curvature=False), xi, tol=1e-6).is_future
    return WFElement(np.asarray(x, float), np.asarray(y, float), xi, eta, bool(flag), dict(diag))


def rays_match(a, b, tol: float = RAY_TOL) -> bool:
    """Same ray (positive multiple) within angular tolerance."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return na == nb
    c = float(np.clip(a @ b / (na * nb), -1.0, 1.0))
    return bool(np.arccos(c) < tol) or bool(np.linalg.norm(a / na - b / nb) < tol)


def sphere_directions(n: int) -> np.ndarray:
    """``n`` nearly uniform unit vectors in R^3 (Fibonacci lattice)."""
    k = np.arange(n) + 0.5
    z = 1 - 2 * k / n
    phi = np.pi * (1 + 5**0.5) * k
    rho = np.sqrt(1 - z * z)
    return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])


# --------------------------------------------------------------------------
# the equivalence relation


def _null(spec, x, xi, tol=1e-6) -> bool:
    cls = classify_covector(metric_at(spec, x, curvature=False), xi, tol=tol)
    return cls.is_null


def equivalence_related(spec: MetricSpec, a: PhasePoint, b: PhasePoint, tol: float = RAY_TOL) -> bool:
    """``(x, xi) ~ (y, eta)``: joined by a null geodesic with xi tangent and eta its transport.

    ``SolverDiverged`` from the geodesic solver propagates (undecided, not False).
    """
    if np.allclose(a.x, b.x, rtol=0, atol=1e-12):
        return _null(spec, a.x, a.xi) and rays_match(a.xi, b.xi, tol)
    conn = geodesic_connect(spec, a.x, b.x)
    if conn is None or not _null(spec, a.x, a.xi):
        return False
    lam = float(a.xi @ conn.xi / (conn.xi @ conn.xi))
    if lam == 0:
        return False
    if np.linalg.norm(a.xi - lam * conn.xi) > tol * np.linalg.norm(a.xi):
        return False
    return bool(np.linalg.norm(b.xi - lam * conn.eta) <= tol * np.linalg.norm(b.xi))


# --------------------------------------------------------------------------
# predictors


def _null_cone_family(spec, x, n_directions):
    out = []
    for n in sphere_directions(n_directions):
        xi = null_covector(spec, x, n)
        out.append(_element(spec, x, x, xi, xi, family="future null cone"))
    return out


def predict_wf_hadamard_scalar(spec: MetricSpec, x, y,
                               n_directions: int = DIAGONAL_DIRECTIONS) -> list[WFElement]:
    """Elements of the Hadamard two-point wave front set over (x, y).

    Off the diagonal: the null geodesic ray with future-pointing xi, or
    nothing. On the diagonal: the future null cone on a direction grid.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.allclose(x, y, rtol=0, atol=1e-12):
        return _null_cone_family(spec, x, n_directions)
    conn = geodesic_connect(spec, x, y)
    if conn is None:
        return []
    return [_element(spec, x, y, conn.xi, conn.eta, tau_end=conn.tau_end,
                     y_in_future=conn.y_in_future)]


def wf_hadamard_contains(spec: MetricSpec, x, y, xi, eta) -> bool:
    """Membership of ``(x, y; xi, -eta)`` in the Hadamard set, ``eta`` raw."""
    xi = np.asarray(xi, dtype=float)
    if not classify_covector(metric_at(spec, x, curvature=False), xi, tol=1e-6).is_future:
        return False
    return equivalence_related(spec, PhasePoint(x, xi), PhasePoint(y, eta))


def null_projection(spec: MetricSpec, x, xi) -> np.ndarray:
    """Adjust the time component of xi so that ``g^{mn} xi_m xi_n = 0`` exactly."""
    ginv, _ = inverse_metric(spec, x)
    xi = np.array(xi, dtype=float)
    a = ginv[0, 0]
    b = ginv[0, 1:] @ xi[1:]
    c = xi[1:] @ ginv[1:, 1:] @ xi[1:]
    disc = b * b - a * c
    if a == 0 or disc < 0:
        return xi
    roots = (-b + np.array([1.0, -1.0]) * np.sqrt(disc)) / a
    xi[0] = roots[np.argmin(np.abs(roots - xi[0]))]
    return xi


def dirac_fibre(spec: MetricSpec, x, xi, tau_end: float, steps: int = 41) -> BispinorMatrix:
    """Right-index spin transport of ``slash(xi)`` from x along the null ray for ``tau_end``."""
    x = np.asarray(x, dtype=float)
    xi = null_projection(spec, x, xi)
    strip = integrate_bicharacteristic(spec, PhasePoint(x, xi), (0.0, tau_end), steps)
    w0 = slash(gammas_at(spec, x), xi)
    pol = transport_spinor(strip, spec, w0, SpinorSide.BISPINOR_RIGHT)
    return BispinorMatrix(pol.fibres[-1], x, strip.xs[-1])


def predict_pol_dirac(spec: MetricSpec, x, y,
                      n_directions: int = DIAGONAL_DIRECTIONS) -> list[PolElement]:
    """Polarization set of the Dirac Hadamard two-point function over (x, y).

    The fibre solves ``(1 (x) J) w = slash(xi)``, i.e. it is slash(xi) with
    its cospinor index transported from x to y.
    """
    out = []
    for el in predict_wf_hadamard_scalar(spec, x, y, n_directions):
        if el.diagonal:
            fibre = BispinorMatrix(slash(gammas_at(spec, el.x), el.xi), el.x, el.y)
        else:
            tau = el.diagnostics["tau_end"]
            raw = dirac_fibre(spec, el.x, el.xi, tau)
            fibre = BispinorMatrix(raw.matrix, el.x, el.y)
            el.diagnostics["endpoint_error"] = float(np.max(np.abs(raw.y - el.y)))
        out.append(PolElement(el, fibre))
    return out


def _frame_covector(spec, x, k):
    cache = metric_at(spec, x, curvature=False)
    return np.asarray(k, dtype=float) @ cache.tetrad_inverse


def predict_wf_feynman(spec: MetricSpec, x, y, n_directions: int = DIAGONAL_DIRECTIONS,
                       seed: int = 0) -> list[WFElement]:
    """Feynman wave front set over (x, y).

    Off the diagonal xi is future-pointing when x lies to the future of y and
    past-pointing otherwise. On the diagonal every nonzero xi occurs; the
    family is sampled by ``n_directions // 2`` random frame directions on S^3
    together with their negatives. Polarization fibres are not predicted.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.allclose(x, y, rtol=0, atol=1e-12):
        rng = np.random.default_rng(seed)
        ks = rng.normal(size=(n_directions // 2, 4))
        ks /= np.linalg.norm(ks, axis=1, keepdims=True)
        out = []
        for k in np.concatenate([ks, -ks]):
            xi = _frame_covector(spec, x, k)
            out.append(_element(spec, x, x, xi, xi, family="all directions",
                                polarization="not predicted"))
        return out
    conn = geodesic_connect(spec, x, y)
    if conn is None:
        return []
    sign = -1.0 if conn.y_in_future else 1.0
    return [_element(spec, x, y, sign * conn.xi, sign * conn.eta, tau_end=conn.tau_end,
                     y_in_future=conn.y_in_future, polarization="not predicted")]


def product_admissible(wf_a, wf_b, tol: float = RAY_TOL) -> tuple[bool, list[tuple[WFElement, WFElement]]]:
    """Whether no two elements over the same base pair have opposite directions.

    Directions are the full ``(xi, -eta)``; opposite within angle ``tol``
    means they can add up to zero.
    """
    offending = []
    for a, b in itertools.product(list(wf_a), list(wf_b)):
        if not (np.allclose(a.x, b.x, rtol=0, atol=1e-12) and np.allclose(a.y, b.y, rtol=0, atol=1e-12)):
            continue
        if rays_match(a.direction, -b.direction, tol):
            offending.append((a, b))
    return not offending, offending


# --------------------------------------------------------------------------
# Minkowski evaluators


def _difference(x, y, eps):
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return d, d[0] + 1j * eps


def minus_sigma_eps(x, y, eps: float) -> complex:
    """``|dx|^2 - (t + i eps)^2``, i.e. minus the regularized quadratic distance."""
    d, t = _difference(x, y, eps)
    return complex(d[1:] @ d[1:] - t * t)


SMALL_MASS_ARGUMENT = 1e-6  # below this m*sqrt(s) the mass correction is < 1e-11 relative


def _profile(m: float, s: complex) -> complex:
    """Lambda as a function of ``s = -sigma_eps``."""
    if m * abs(np.sqrt(s)) < SMALL_MASS_ARGUMENT:
        return 1.0 / (4 * np.pi**2 * s)
    root = np.sqrt(s)
    return complex(m * special.kv(1, m * root) / (4 * np.pi**2 * root))


def _profile_derivative(m: float, s: complex) -> complex:
    if m * abs(np.sqrt(s)) < SMALL_MASS_ARGUMENT:
        return -1.0 / (4 * np.pi**2 * s * s)
    z = m * np.sqrt(s)
    return complex(-m * m * special.kv(2, z) / (8 * np.pi**2 * s))


def _radial_integral(m: float, x, y, eps: float) -> complex:
    """``1/(4 pi^2 r) int_0^inf k sin(kr) exp(i w (t + i eps)) / w dk``, w = sqrt(k^2 + m^2)."""
    d, _ = _difference(x, y, 0.0)
    t = d[0]
    r = float(np.linalg.norm(d[1:]))
    kmax = 60.0 / eps

    def integrand(k, part):
        w = np.sqrt(k * k + m * m)
        radial = np.sin(k * r) / r if r > 0 else k
        val = k * radial * np.exp(1j * w * t - w * eps) / w
        return val.real if part == 0 else val.imag

    limit = int(min(20000, 200 + 4 * kmax * (abs(t) + r) / np.pi))
    re = integrate.quad(integrand, 0, kmax, args=(0,), limit=limit, epsabs=1e-13, epsrel=1e-11)[0]
    im = integrate.quad(integrand, 0, kmax, args=(1,), limit=limit, epsabs=1e-13, epsrel=1e-11)[0]
    return (re + 1j * im) / (4 * np.pi**2)


def eval_minkowski_scalar(m: float, x, y, eps: float, method: str = "bessel") -> complex:
    """Regularized vacuum two-point function ``Lambda_eps(x, y)``.

    ``method="bessel"`` uses the closed form ``m K_1(m sqrt(s)) / (4 pi^2 sqrt(s))``
    (``1/(4 pi^2 s)`` for m = 0) with ``s = -sigma_eps``; ``method="radial"``
    evaluates the mode integral by quadrature.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if method == "bessel":
        return _profile(float(m), minus_sigma_eps(x, y, eps))
    if method == "radial":
        return _radial_integral(float(m), x, y, eps)
    raise ValueError(f"unknown method {method!r}")


def lambda_gradient(m: float, x, y, eps: float) -> np.ndarray:
    """``d Lambda_eps / d x^mu`` (lower index)."""
    d, t = _difference(x, y, eps)
    s = minus_sigma_eps(x, y, eps)
    ds = np.concatenate([[-2 * t], 2 * d[1:]])
    return _profile_derivative(float(m), s) * ds


def eval_minkowski_dirac(m: float, x, y, eps: float) -> BispinorMatrix:
    """``(i gamma^mu d_mu + m) Lambda_eps`` in the x variable, times the identity bispinor."""
    grad = lambda_gradient(m, x, y, eps)
    w = 1j * np.einsum("m,mij->ij", grad, FLAT_GAMMA) + m * eval_minkowski_scalar(m, x, y, eps) * np.eye(4)
    return BispinorMatrix(w, np.asarray(x, float), np.asarray(y, float))


@dataclass(frozen=True)
class FourierSupport:
    sum_vanishes: bool
    positive_frequency: bool
    on_shell: bool
    weight: float

    @property
    def on_support(self) -> bool:
        return self.sum_vanishes and self.positive_frequency and self.on_shell


def fourier_vacuum_scalar(m: float, xi, eta, tol: float = 1e-10) -> FourierSupport:
    """Support data of ``(2 pi)^-1 delta(xi + eta) theta(xi_0) delta(xi^2 - m^2)``.

    ``weight`` is the mass-shell density ``1 / (2 pi * 2 xi_0)`` on support.
    """
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    scale = max(1.0, float(np.linalg.norm(xi)))
    summed = bool(np.linalg.norm(xi + eta) <= tol * scale)
    positive = bool(xi[0] > 0)
    shell = bool(abs(xi @ ETA @ xi - m * m) <= tol * scale**2)
    ok = summed and positive and shell
    return FourierSupport(summed, positive, shell, 1.0 / (4 * np.pi * xi[0]) if ok else 0.0)


# --------------------------------------------------------------------------
# samplers


SAMPLES = ("delta", "one_over_x_plus_ieps", "v_delta_v", "grad_delta_2d",
           "smooth_gaussian", "minkowski_lambda_slice")
PER_EPS_SHARP = 8      # i-eps regularizations: exponential spectra
PER_EPS_GAUSS_2D = 2   # Gaussian regularizations in 2-d: Gaussian spectra


@dataclass(frozen=True, eq=False)
class TwoPointSample:
    """Values ``values[c, i0, i1, ...]`` of component c on the grid spanned by ``axes``."""

    name: str
    axes: tuple
    values: np.ndarray
    eps: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        for a in self.axes:
            if len(a) < 2 or np.any(np.diff(a) <= 0):
                raise ValueError("axes must be increasing with positive spacing")

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def components(self) -> int:
        return self.values.shape[0]

    @property
    def spacing(self) -> np.ndarray:
        return np.array([a[1] - a[0] for a in self.axes])

    def component(self, c: int) -> TwoPointSample:
        return TwoPointSample(self.name, self.axes, self.values[c:c + 1], self.eps, dict(self.meta))

    def mapped(self, matrix) -> TwoPointSample:
        """Apply a constant matrix to the component vector."""
        vals = np.einsum("ab,b...->a...", np.asarray(matrix), self.values)
        return TwoPointSample(self.name, self.axes, vals, self.eps, dict(self.meta))


def _check_resolution(axes, eps, per_eps, which=None):
    idx = range(len(axes)) if which is None else which
    for i in idx:
        h = axes[i][1] - axes[i][0]
        if h > eps / per_eps * (1 + 1e-9):
            raise GridTooCoarse(f"spacing {h:.3g} on axis {i} exceeds eps/{per_eps} = {eps / per_eps:.3g}")


def _gaussian(mesh, eps):
    d = len(mesh)
    r2 = sum(c * c for c in mesh)
    return (2 * np.pi * eps * eps) ** (-d / 2) * np.exp(-r2 / (2 * eps * eps)), r2


def sample_examples(name: str, grid, eps: float, **kw) -> TwoPointSample:
    """Regularized example distributions on a grid given by its axes.

    ``delta``, ``v_delta_v`` (1-d or 2-d), ``grad_delta_2d`` use a Gaussian of
    width eps; ``one_over_x_plus_ieps`` is exact; ``smooth_gaussian`` has
    width 1. ``minkowski_lambda_slice`` samples the massless (or ``m``)
    two-point function with y fixed at ``base_y`` and x on the plane
    ``base_x + ((s + v)/2, 0, 0, (v - s)/2)``, axes being offsets in
    light-cone coordinates ``s = t - z``, ``v = t + z``.
    """
    axes = tuple(np.asarray(a, dtype=float) for a in (grid if isinstance(grid, (tuple, list)) else (grid,)))
    if not eps > 0:
        raise ValueError("eps must be positive")
    mesh = np.meshgrid(*axes, indexing="ij")
    d = len(axes)
    gauss_per_eps = PER_EPS_SHARP if d == 1 else PER_EPS_GAUSS_2D
    meta = {"dim": d}
    if name == "delta":
        _check_resolution(axes, eps, gauss_per_eps)
        vals = _gaussian(mesh, eps)[0][None].astype(complex)
    elif name == "one_over_x_plus_ieps":
        if d != 1:
            raise ValueError("one_over_x_plus_ieps is one-dimensional")
        _check_resolution(axes, eps, PER_EPS_SHARP)
        vals = (1.0 / (mesh[0] + 1j * eps))[None]
    elif name == "v_delta_v":
        _check_resolution(axes, eps, gauss_per_eps)
        v, r2 = _gaussian(mesh, eps)
        lap = v * (r2 / eps**4 - d / eps**2)
        vals = np.array([v, lap], dtype=complex)
    elif name == "grad_delta_2d":
        if d != 2:
            raise ValueError("grad_delta_2d is two-dimensional")
        _check_resolution(axes, eps, PER_EPS_GAUSS_2D)
        v, _ = _gaussian(mesh, eps)
        vals = np.array([-mesh[0] / eps**2 * v, -mesh[1] / eps**2 * v], dtype=complex)
    elif name == "smooth_gaussian":
        vals = np.exp(-sum(c * c for c in mesh) / 2)[None].astype(complex)
    elif name == "minkowski_lambda_slice":
        if d != 2:
            raise ValueError("the two-point slice is two-dimensional (s, v)")
        _check_resolution(axes, eps, PER_EPS_SHARP, which=[0])
        m = float(kw.get("m", 0.0))
        bx = np.asarray(kw.get("base_x", [3.0, 0.0, 0.0, 3.0]), dtype=float)
        by = np.asarray(kw.get("base_y", [0.0, 0.0, 0.0, 0.0]), dtype=float)
        s, v = mesh
        dt = bx[0] - by[0] + (s + v) / 2
        dz = bx[3] - by[3] + (v - s) / 2
        dperp2 = (bx[1] - by[1]) ** 2 + (bx[2] - by[2]) ** 2
        msig = dz * dz + dperp2 - (dt + 1j * eps) ** 2
        if m == 0:
            vals = (1.0 / (4 * np.pi**2 * msig))[None]
        else:
            root = np.sqrt(msig)
            vals = (m * special.kv(1, m * root) / (4 * np.pi**2 * root))[None]
        meta.update(base_x=bx.tolist(), base_y=by.tolist(), m=m, coordinates="s=t-z, v=t+z")
    else:
        raise ValueError(f"unknown sample {name!r}; expected one of {SAMPLES}")
    return TwoPointSample(name, axes, np.ascontiguousarray(vals), float(eps), meta)


def slice_covector(direction_sv) -> np.ndarray:
    """Map a covector in light-cone slice coordinates (s, v) to (xi_t, xi_z)."""
    ks, kv = direction_sv
    return np.array([ks + kv, -ks + kv])
