"""Null bicharacteristics, parallel transport along them, and Dencker's connection."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .errors import KernelViolation, LeftDomain, NonNullStart, OutOfDomain, SolverDiverged
from .geometry import (MetricSpec, PhasePoint, check_domain, christoffel, hamilton_rhs,
                       inverse_metric, metric_at)
from .spin import spin_connection_at
from .symbols import (OperatorSpec, RPTFactorization, evaluate_term, poisson_bracket,
                      principal_symbol, subprincipal_symbol, symbol_gradients)

RTOL = 1e-10
ATOL = 1e-12
NULL_START_RTOL = 1e-10
DRIFT_RTOL = 1e-9
KERNEL_RTOL = 1e-6
MIN_RTOL = 1e-13


def _solve(rhs, span, y0, rtol, atol, t_eval=None):
    try:
        sol = solve_ivp(rhs, span, y0, method="RK45", rtol=rtol, atol=atol,
                        t_eval=t_eval, dense_output=True)
    except OutOfDomain as exc:
        raise LeftDomain(str(exc)) from None
    if sol.status != 0:
        raise SolverDiverged(sol.message)
    return sol


def hamiltonian_value(spec: MetricSpec, x, xi) -> float:
    ginv, _ = inverse_metric(spec, x)
    xi = np.asarray(xi, dtype=float)
    return float(xi @ ginv @ xi)


@dataclass(frozen=True, eq=False)
class BicharStrip:
    """Samples ``(tau_k, x_k, xi_k)`` of the flow of ``q = g^{mn} xi_m xi_n``."""

    spec: MetricSpec
    start: PhasePoint
    taus: np.ndarray
    xs: np.ndarray
    xis: np.ndarray
    qs: np.ndarray
    rtol: float
    atol: float
    dense: Callable[[float], np.ndarray]
    hamiltonian: str = "g^{mn} xi_m xi_n"

    @property
    def tau_span(self) -> tuple[float, float]:
        return float(self.taus[0]), float(self.taus[-1])

    def state(self, tau: float) -> tuple[np.ndarray, np.ndarray]:
        s = self.dense(tau)
        return s[:4], s[4:]

    def velocities(self) -> np.ndarray:
        return np.array([2.0 * inverse_metric(self.spec, x)[0] @ xi
                         for x, xi in zip(self.xs, self.xis)])

    def max_drift(self) -> float:
        return float(np.max(np.abs(self.qs)))


def integrate_bicharacteristic(spec: MetricSpec, start: PhasePoint, tau_span,
                               steps: int = 201, rtol: float = RTOL,
                               atol: float = ATOL) -> BicharStrip:
    """Integrate Hamilton's equations from a null phase point.

    The strip is accepted only when ``max |q| < 1e-9 ||xi_0||^2``; otherwise
    the tolerances are tightened (down to rtol 1e-13) before giving up.
    """
    check_domain(spec, start.x)
    scale = float(start.xi @ start.xi)
    q0 = hamiltonian_value(spec, start.x, start.xi)
    if abs(q0) > NULL_START_RTOL * scale:
        raise NonNullStart(f"|q| = {abs(q0):.3e} at the start exceeds {NULL_START_RTOL} ||xi||^2")
    t0, t1 = float(tau_span[0]), float(tau_span[1])
    taus = np.linspace(t0, t1, int(steps))
    y0 = np.concatenate([start.x, start.xi])
    while True:
        sol = _solve(hamilton_rhs(spec), (t0, t1), y0, rtol, atol, taus)
        qs = np.array([hamiltonian_value(spec, s[:4], s[4:]) for s in sol.y.T])
        if np.max(np.abs(qs)) < DRIFT_RTOL * scale:
            break
        if rtol <= MIN_RTOL:
            raise SolverDiverged(f"null-constraint drift {np.max(np.abs(qs)):.3e} above bound")
        rtol, atol = max(rtol / 100, MIN_RTOL), atol / 100
    return BicharStrip(spec, start, taus, sol.y[:4].T.copy(), sol.y[4:].T.copy(), qs,
                       rtol, atol, sol.sol)


# --------------------------------------------------------------------------
# photon sphere data


def _float_neighbours(value: float, count: int) -> list[float]:
    out = [value]
    up = down = value
    for _ in range(count):
        up = np.nextafter(up, np.inf)
        down = np.nextafter(down, -np.inf)
        out += [up, down]
    return out


def photon_sphere_start(spec: MetricSpec, energy: float = 1.0, search: int = 32) -> PhasePoint:
    """Circular null orbit data at r = 3M in the equatorial plane.

    The orbit is unstable (perturbations grow by e^{2 pi} per revolution), so
    ``(xi_t, xi_phi)`` are picked among floats near ``(E, -3 sqrt(3) M E)``
    such that the radial force evaluated by :func:`hamilton_rhs` is as small
    as rounding allows, preferring an exact zero.
    """
    if spec.kind != "schwarzschild":
        raise ValueError("photon sphere data needs a Schwarzschild metric")
    m = spec.mass
    x = np.array([0.0, 3.0 * m, np.pi / 2, 0.0])
    rhs = hamilton_rhs(spec)
    best, best_xi = None, None
    for E in _float_neighbours(float(energy), search):
        for L in _float_neighbours(3.0 * np.sqrt(3.0) * m * E, search):
            xi = np.array([E, 0.0, 0.0, -L])
            force = abs(rhs(0.0, np.concatenate([x, xi]))[5])
            key = (force, abs(hamiltonian_value(spec, x, xi)))
            if best is None or key < best:
                best, best_xi = key, xi
    return PhasePoint(x, best_xi)


def angular_period(spec: MetricSpec, start: PhasePoint) -> float:
    """Affine-parameter period of one revolution in phi at the start point."""
    ginv, _ = inverse_metric(spec, start.x)
    rate = abs(2.0 * ginv[3] @ start.xi)
    return float(2 * np.pi / rate)


# --------------------------------------------------------------------------
# transport


class SpinorSide(enum.Enum):
    SPINOR = "Spinor"
    COSPINOR = "Cospinor"
    BISPINOR_BOTH = "BispinorBoth"
    BISPINOR_RIGHT = "BispinorRightOnly"


@dataclass(frozen=True, eq=False)
class PolarizedStrip:
    """A strip with fibre values ``fibres[k]`` at ``strip.taus[k]``."""

    strip: BicharStrip
    fibres: np.ndarray
    kind: str
    dense: Callable[[float], np.ndarray]

    def fibre_at(self, tau: float) -> np.ndarray:
        return self.dense(tau)


Apply = Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def _transport(strip: BicharStrip, w0, apply: Apply, kind: str,
               rtol: float | None = None, atol: float | None = None,
               tau_end: float | None = None) -> PolarizedStrip:
    """Integrate ``dw/dtau = apply(x, xdot, xi, w)`` jointly with the geodesic."""
    w0 = np.asarray(w0, dtype=complex)
    shape, n = w0.shape, w0.size
    geo = hamilton_rhs(strip.spec)

    def rhs(t, s):
        d = geo(t, s[:8])
        W = (s[8:8 + n] + 1j * s[8 + n:]).reshape(shape)
        dW = apply(s[:4], d[:4], s[4:8], W)
        return np.concatenate([d, dW.real.ravel(), dW.imag.ravel()])

    y0 = np.concatenate([strip.start.x, strip.start.xi, w0.real.ravel(), w0.imag.ravel()])
    t0, t1 = strip.tau_span
    taus = strip.taus
    if tau_end is not None:
        t1, taus = float(tau_end), None
    sol = _solve(rhs, (t0, t1), y0, rtol or strip.rtol, atol or strip.atol, taus)

    def unpack(s):
        return (s[8:8 + n] + 1j * s[8 + n:]).reshape(shape)

    fibres = np.array([unpack(s) for s in sol.y.T])
    return PolarizedStrip(strip, fibres, kind, lambda t: unpack(sol.sol(t)))


def transport_vector(strip: BicharStrip, w0) -> PolarizedStrip:
    """Levi-Civita transport ``dw^n/dtau = -Gamma^n_rm xdot^r w^m`` (columns if w0 is a matrix)."""
    spec = strip.spec

    def apply(x, xdot, xi, W):
        G = np.einsum("nrm,r->nm", christoffel(spec, x), xdot)
        return -G @ W

    return _transport(strip, w0, apply, "vector")


def _spin_apply(spec: MetricSpec, side: SpinorSide) -> Apply:
    def apply(x, xdot, xi, W):
        sig = spin_connection_at(spec, x).along(xdot)
        if side is SpinorSide.SPINOR:
            return -sig @ W
        if side is SpinorSide.COSPINOR or side is SpinorSide.BISPINOR_RIGHT:
            return W @ sig
        return W @ sig - sig @ W

    return apply


def transport_spinor(strip: BicharStrip, spec: MetricSpec, w0,
                     side: SpinorSide = SpinorSide.SPINOR,
                     tau_end: float | None = None) -> PolarizedStrip:
    """Spin-connection transport of spinors, cospinors (rows) or bispinors.

    ``Spinor``: ``dw = -sigma(xdot) w``; ``Cospinor``: ``dw = w sigma(xdot)``;
    ``BispinorBoth`` acts on both indices, ``BispinorRightOnly`` on the
    cospinor index only. With ``tau_end`` the integration stops there and
    ``fibres`` holds the solver's own steps.
    """
    side = SpinorSide(side)
    return _transport(strip, w0, _spin_apply(spec, side), side.value, tau_end=tau_end)


# --------------------------------------------------------------------------
# Dencker's connection


class TransportMode(enum.Enum):
    GENERIC = "Generic"
    LEVI_CIVITA = "LeviCivita"
    SPIN = "Spin"


@dataclass(frozen=True, eq=False)
class DenckerSpec:
    operator: OperatorSpec
    factorization: RPTFactorization
    mode: TransportMode = TransportMode.GENERIC


def dencker_terms(dspec: DenckerSpec, x, xi) -> tuple[np.ndarray, float]:
    """``(1/2 {ptilde, p} + i ptilde p^s, lam)`` at a strip point.

    ``lam`` converts the strip parameter to the q-flow parameter: the x-part
    of ``H_q`` equals ``lam`` times the strip velocity ``2 g^{-1} xi``.
    """
    op, fac = dspec.operator, dspec.factorization
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)

    def p(a, b):
        return principal_symbol(op, a, b)

    bracket = poisson_bracket(fac.ptilde, p, x, xi)
    G = 0.5 * bracket + 1j * fac.ptilde(x, xi) @ subprincipal_symbol(op, x, xi)
    _, dq = symbol_gradients(lambda a, b: np.array(fac.q(a, b)), x, xi)
    v = 2.0 * inverse_metric(op.metric, x)[0] @ xi
    lam = float(dq @ v / (v @ v))
    return G, lam


def kernel_residual(op: OperatorSpec, x, xi, w) -> float:
    """``||p w||`` relative to ``||w||`` times the size of the terms making up p.

    The scale is ``sum_alpha ||c_alpha|| |xi^alpha|``, which stays meaningful
    where p itself vanishes (e.g. ``p = -xi^2 1`` on null covectors).
    """
    xi = np.asarray(xi, dtype=float)
    coeffs = op.coefficients(op.order, x)
    p = evaluate_term(coeffs, xi, op.size)
    scale = sum(np.max(np.abs(c)) * float(np.prod(np.abs(xi) ** np.asarray(a)))
                for a, c in coeffs.items())
    w = np.asarray(w, dtype=complex)
    denom = scale * np.linalg.norm(w)
    if denom == 0:
        return 0.0
    return float(np.linalg.norm(p @ w) / denom)


DERIVATIVE_STEP = 5e-5


def dencker_derivative(dspec: DenckerSpec, strip: BicharStrip, w) -> np.ndarray:
    """``D_P w`` at every strip sample for a fibre section along the strip.

    ``H_q w`` is ``lam dw/dtau``. For a :class:`PolarizedStrip` the
    tau-derivative is a centred difference of its dense output; for plain
    sample arrays it is a second-order difference of the samples.
    """
    if isinstance(w, PolarizedStrip):
        fibres = w.fibres
        span = strip.taus[-1] - strip.taus[0]
        h = DERIVATIVE_STEP * max(abs(span), 1e-300)
        lo, hi = sorted(strip.tau_span)
        f = w.fibre_at
        dw = []
        for t in strip.taus:
            if t - h < lo:
                d = (-3 * f(t) + 4 * f(t + h) - f(t + 2 * h)) / (2 * h)
            elif t + h > hi:
                d = (3 * f(t) - 4 * f(t - h) + f(t - 2 * h)) / (2 * h)
            else:
                d = (f(t + h) - f(t - h)) / (2 * h)
            dw.append(d)
        dw = np.array(dw)
    else:
        fibres = np.asarray(w, dtype=complex)
        dw = np.gradient(fibres, strip.taus, axis=0, edge_order=2)
    for k, (x, xi) in enumerate(zip(strip.xs, strip.xis)):
        r = kernel_residual(dspec.operator, x, xi, fibres[k])
        if r > KERNEL_RTOL:
            raise KernelViolation(f"fibre leaves ker p at sample {k} (relative {r:.2e})")
    out = np.empty_like(fibres)
    for k, (x, xi) in enumerate(zip(strip.xs, strip.xis)):
        G, lam = dencker_terms(dspec, x, xi)
        out[k] = lam * dw[k] + G @ fibres[k]
    return out


def hamilton_orbit(dspec: DenckerSpec, strip: BicharStrip, w0,
                   rtol: float = 1e-9, atol: float = 1e-11) -> PolarizedStrip:
    """Solve ``D_P w = 0`` along the strip from ``w0`` in ker p.

    Spin and LeviCivita modes use the lifted connections directly (a 4x4
    Dirac fibre is treated as a bispinor and transported on both indices);
    Generic integrates ``dw/dtau = -(1/lam)(1/2 {ptilde, p} + i ptilde p^s) w``.
    """
    op = dspec.operator
    r = kernel_residual(op, strip.start.x, strip.start.xi, w0)
    if r > KERNEL_RTOL:
        raise KernelViolation(f"initial fibre not in ker p (relative {r:.2e})")
    if dspec.mode is TransportMode.LEVI_CIVITA:
        return transport_vector(strip, w0)
    if dspec.mode is TransportMode.SPIN:
        spec = strip.spec
        if np.ndim(w0) == 2 and op.name == "dirac":
            # a 4x4 fibre is a bispinor; both of its indices follow the spin connection
            return transport_spinor(strip, spec, w0, SpinorSide.BISPINOR_BOTH)
        if np.ndim(w0) == 2:
            def apply(x, xdot, xi, W):
                sig_t = spin_connection_at(spec, x).along(xdot).T
                return sig_t @ W - W @ sig_t
            return _transport(strip, w0, apply, "bispinor-transposed")
        if op.name == "dirac-adjoint":
            def apply(x, xdot, xi, W):
                return spin_connection_at(spec, x).along(xdot).T @ W
            return _transport(strip, w0, apply, "cospinor")
        return transport_spinor(strip, spec, w0, SpinorSide.SPINOR)

    def apply(x, xdot, xi, W):
        G, lam = dencker_terms(dspec, x, xi)
        return -(G @ W) / lam

    return _transport(strip, w0, apply, "generic", rtol=rtol, atol=atol)


def projective_deviation(a, b) -> float:
    """Max-norm distance of the normalized outer products of two fibres."""
    a = np.asarray(a, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    return float(np.max(np.abs(np.outer(a, a.conj()) - np.outer(b, b.conj()))))


def metric_norm_along(strip: BicharStrip, fibres) -> np.ndarray:
    """``g(w, w)`` at each sample for vector fibres."""
    return np.array([np.real(np.conj(w) @ metric_at(strip.spec, x, curvature=False).g @ w)
                     for x, w in zip(strip.xs, fibres)])
