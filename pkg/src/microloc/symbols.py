"""Differential operators as coefficient data, and their symbols.

An operator ``P = sum_alpha c_alpha(x) d^alpha`` has full symbol
``sum_alpha c_alpha(x) (i xi)^alpha``; the principal part collects
``|alpha| = m``. Coefficients are grouped by degree so that the principal
and subprincipal symbols only evaluate what they need.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import FactorizationFailed, NotRecognized
from .geometry import (FD_STEP, MetricSpec, PhasePoint, christoffel, metric_at,
                       sqrt_minus_det)
from .spin import gamma_curved, spin_connection_at

Alpha = tuple[int, int, int, int]
Term = Callable[[np.ndarray], Mapping[Alpha, np.ndarray]]

FAMILIES = ("scalar-wave", "maxwell-lorentz", "dirac", "dirac-adjoint")
CHAR_SET_RTOL = 1e-8
FACTORIZATION_RTOL = 1e-12


def unit_alpha(*indices: int) -> Alpha:
    a = [0, 0, 0, 0]
    for i in indices:
        a[i] += 1
    return tuple(a)


@dataclass(frozen=True, eq=False)
class OperatorSpec:
    """Order-``order`` ``size x size`` differential operator.

    ``terms[d](x)`` returns ``{alpha: c_alpha(x)}`` for the multi-indices with
    ``|alpha| = d``. Missing degrees mean zero coefficients.
    """

    name: str
    order: int
    size: int
    terms: Mapping[int, Term]
    metric: MetricSpec | None = None
    mass: float = 0.0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.order not in self.terms:
            raise ValueError("operator needs a top-order coefficient term")

    def coefficients(self, degree: int, x) -> Mapping[Alpha, np.ndarray]:
        term = self.terms.get(degree)
        if term is None:
            return {}
        return term(np.asarray(x, dtype=float))


def _monomial(alpha: Alpha, xi: np.ndarray) -> complex:
    return complex(np.prod((1j * xi) ** np.asarray(alpha)))


def evaluate_term(coeffs: Mapping[Alpha, np.ndarray], xi, size: int) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    out = np.zeros((size, size), dtype=complex)
    for alpha, c in coeffs.items():
        out += c * _monomial(alpha, xi)
    return out


def evaluate_term_dxi(coeffs: Mapping[Alpha, np.ndarray], xi, size: int) -> np.ndarray:
    """``d/dxi_mu`` of ``sum c_alpha (i xi)^alpha``; shape (4, size, size)."""
    xi = np.asarray(xi, dtype=float)
    out = np.zeros((4, size, size), dtype=complex)
    for alpha, c in coeffs.items():
        for mu in range(4):
            if alpha[mu] == 0:
                continue
            lowered = list(alpha)
            lowered[mu] -= 1
            out[mu] += c * (1j * alpha[mu]) * _monomial(tuple(lowered), xi)
    return out


def principal_symbol(op: OperatorSpec, x, xi) -> np.ndarray:
    return evaluate_term(op.coefficients(op.order, x), xi, op.size)


def _x_steps(x) -> np.ndarray:
    return FD_STEP * np.maximum(1.0, np.abs(np.asarray(x, dtype=float)))


def mixed_trace_derivative(op: OperatorSpec, x, xi) -> np.ndarray:
    """``sum_mu d^2 p / dx^mu dxi_mu``: analytic in xi, central differences in x."""
    x = np.asarray(x, dtype=float)
    h = _x_steps(x)
    out = np.zeros((op.size, op.size), dtype=complex)
    for mu in range(4):
        e = np.zeros(4)
        e[mu] = h[mu]
        plus = evaluate_term_dxi(op.coefficients(op.order, x + e), xi, op.size)[mu]
        minus = evaluate_term_dxi(op.coefficients(op.order, x - e), xi, op.size)[mu]
        out += (plus - minus) / (2 * h[mu])
    return out


def subprincipal_symbol(op: OperatorSpec, x, xi) -> np.ndarray:
    """``p_{m-1} - (1/2i) sum_mu d^2 p / dx^mu dxi_mu``."""
    lower = evaluate_term(op.coefficients(op.order - 1, x), xi, op.size)
    return lower - mixed_trace_derivative(op, x, xi) / 2j


def homogeneity_residual(op: OperatorSpec, x, xi, t: float) -> float:
    p = principal_symbol(op, x, xi)
    pt = principal_symbol(op, x, t * np.asarray(xi, dtype=float))
    scale = max(np.max(np.abs(p)), np.finfo(float).tiny)
    return float(np.max(np.abs(pt - t**op.order * p)) / (abs(t) ** op.order * scale))


def char_set_membership(op: OperatorSpec, pp: PhasePoint) -> tuple[bool, complex]:
    """Whether ``det p(x, xi)`` vanishes relative to ``||p||_F^N``."""
    p = principal_symbol(op, pp.x, pp.xi)
    if op.size == 1:
        d = complex(p[0, 0])
        scale = np.linalg.norm(pp.xi) ** op.order
    else:
        d = complex(np.linalg.det(p))
        scale = np.linalg.norm(p) ** op.size
    if scale == 0:
        return True, d
    return bool(abs(d) < CHAR_SET_RTOL * scale), d


# --------------------------------------------------------------------------
# symbol derivatives for brackets


SymbolFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


def symbol_gradients(fn: SymbolFn, x, xi) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference ``(d_x fn, d_xi fn)``, each of shape (4, ...)."""
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    hx = _x_steps(x)
    hxi = 1e-4 * max(1.0, float(np.max(np.abs(xi))))
    dx, dxi = [], []
    for mu in range(4):
        e = np.zeros(4)
        e[mu] = hx[mu]
        dx.append((fn(x + e, xi) - fn(x - e, xi)) / (2 * hx[mu]))
        e = np.zeros(4)
        e[mu] = hxi
        dxi.append((fn(x, xi + e) - fn(x, xi - e)) / (2 * hxi))
    return np.array(dx), np.array(dxi)


def poisson_bracket(a: SymbolFn, b: SymbolFn, x, xi) -> np.ndarray:
    """``{a, b} = sum_mu da/dxi_mu db/dx^mu - da/dx^mu db/dxi_mu`` (matrix products)."""
    ax, axi = symbol_gradients(a, x, xi)
    bx, bxi = symbol_gradients(b, x, xi)
    return sum(np.dot(axi[m], bx[m]) - np.dot(ax[m], bxi[m]) for m in range(4))


# --------------------------------------------------------------------------
# operator families


def _second_order_metric_coeffs(ginv: np.ndarray, block: np.ndarray) -> dict[Alpha, np.ndarray]:
    out = {}
    for mu, nu in itertools.combinations_with_replacement(range(4), 2):
        weight = ginv[mu, nu] * (1 if mu == nu else 2)
        if weight != 0:
            out[unit_alpha(mu, nu)] = weight * block
    return out


def _as_field(value, default):
    if value is None:
        value = default
    if callable(value):
        return value
    return lambda x, v=value: v


def scalar_wave(spec: MetricSpec, f=None, a=None, b=None) -> OperatorSpec:
    """``f box + a^l d_l + b`` on scalars; ``f``, ``a``, ``b`` constants or callables of x."""
    f_fn = _as_field(f, 1.0)
    a_fn = _as_field(a, np.zeros(4))
    b_fn = _as_field(b, 0.0)
    one = np.ones((1, 1), dtype=complex)

    def second(x):
        cache = metric_at(spec, x, curvature=False)
        return _second_order_metric_coeffs(cache.g_inverse, f_fn(x) * one)

    def first(x):
        cache = metric_at(spec, x, curvature=False)
        contracted = np.einsum("mn,lmn->l", cache.g_inverse, cache.christoffel)
        vec = -f_fn(x) * contracted + np.asarray(a_fn(x), dtype=float)
        return {unit_alpha(l): vec[l] * one for l in range(4)}

    def zeroth(x):
        return {(0, 0, 0, 0): b_fn(x) * one}

    return OperatorSpec("scalar-wave", 2, 1, {2: second, 1: first, 0: zeroth}, spec)


def maxwell_lorentz(spec: MetricSpec) -> OperatorSpec:
    """``box_g A^n - R^n_m A^m`` on vector fields, index order [n, m]."""
    eye = np.eye(4, dtype=complex)

    def second(x):
        cache = metric_at(spec, x, curvature=False)
        return _second_order_metric_coeffs(cache.g_inverse, eye)

    def first(x):
        cache = metric_at(spec, x, curvature=False)
        G, gi = cache.christoffel, cache.g_inverse
        contracted = np.einsum("rk,srk->s", gi, G)
        out = {}
        for s in range(4):
            c = 2 * np.einsum("r,nrm->nm", gi[:, s], G) - contracted[s] * eye
            out[unit_alpha(s)] = c.astype(complex)
        return out

    def zeroth(x):
        cache = metric_at(spec, x)
        G, gi = cache.christoffel, cache.g_inverse
        h = _x_steps(x)
        dG = np.empty((4, 4, 4, 4))
        for r in range(4):
            e = np.zeros(4)
            e[r] = h[r]
            dG[r] = (christoffel(spec, x + e) - christoffel(spec, x - e)) / (2 * h[r])
        c = (np.einsum("rs,rnsm->nm", gi, dG)
             + np.einsum("rs,nrl,lsm->nm", gi, G, G)
             - np.einsum("rs,lrs,nlm->nm", gi, G, G)
             - gi @ cache.ricci)
        return {(0, 0, 0, 0): c.astype(complex)}

    return OperatorSpec("maxwell-lorentz", 2, 4, {2: second, 1: first, 0: zeroth}, spec)


def dirac(spec: MetricSpec, mass: float = 0.0) -> OperatorSpec:
    """``-i gamma^m (d_m + sigma_m) + mass`` on spinors."""

    def first(x):
        gam = gamma_curved(metric_at(spec, x, curvature=False)).gamma
        return {unit_alpha(m): -1j * gam[m] for m in range(4)}

    def zeroth(x):
        cache = metric_at(spec, x, curvature=False)
        gam = gamma_curved(cache).gamma
        sig = spin_connection_at(spec, x, cache).sigma
        c = -1j * np.einsum("mij,mjk->ik", gam, sig) + mass * np.eye(4)
        return {(0, 0, 0, 0): c}

    return OperatorSpec("dirac", 1, 4, {1: first, 0: zeroth}, spec, mass)


def dirac_adjoint(spec: MetricSpec, mass: float = 0.0) -> OperatorSpec:
    """Cospinor equation ``i (d_m psibar - psibar sigma_m) gamma^m + mass psibar``.

    Acts on the column ``v = psibar^T``.
    """

    def first(x):
        gam = gamma_curved(metric_at(spec, x, curvature=False)).gamma
        return {unit_alpha(m): 1j * gam[m].T for m in range(4)}

    def zeroth(x):
        cache = metric_at(spec, x, curvature=False)
        gam = gamma_curved(cache).gamma
        sig = spin_connection_at(spec, x, cache).sigma
        c = -1j * np.einsum("mij,mjk->ik", sig, gam).T + mass * np.eye(4)
        return {(0, 0, 0, 0): c}

    return OperatorSpec("dirac-adjoint", 1, 4, {1: first, 0: zeroth}, spec, mass)


def operator_family(name: str, spec: MetricSpec, mass: float = 0.0, **params) -> OperatorSpec:
    if name == "scalar-wave":
        return scalar_wave(spec, **params)
    if name == "maxwell-lorentz":
        return maxwell_lorentz(spec)
    if name == "dirac":
        return dirac(spec, mass)
    if name == "dirac-adjoint":
        return dirac_adjoint(spec, mass)
    raise NotRecognized(f"unknown operator family {name!r}; expected one of {FAMILIES}")


# --------------------------------------------------------------------------
# real-principal-type factorization


@dataclass(frozen=True, eq=False)
class RPTFactorization:
    """``ptilde(x, xi) p(x, xi) = q(x, xi) 1`` with q real."""

    family: str
    ptilde: SymbolFn
    q: SymbolFn
    validity: str
    max_residual: float
    samples: int

    def q_gradient(self, x, xi) -> tuple[np.ndarray, np.ndarray]:
        dx, dxi = symbol_gradients(lambda a, b: np.array(self.q(a, b)), x, xi)
        return dx, dxi


def sample_points(spec: MetricSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Random chart points in a region where every built-in metric is regular."""
    if spec.kind == "schwarzschild":
        m = spec.mass
        cols = [rng.uniform(-5, 5, n), rng.uniform(3 * m, 20 * m, n),
                rng.uniform(0.3, np.pi - 0.3, n), rng.uniform(0, 2 * np.pi, n)]
        return np.column_stack(cols)
    if spec.kind == "frw_flat":
        lo = 0.5 if spec.params.get("family", "power") == "power" else -2.0
        return np.column_stack([rng.uniform(lo, 5, n)] + [rng.uniform(-5, 5, n) for _ in range(3)])
    if spec.kind == "custom":
        return rng.uniform(-0.5, 0.5, (n, 4)) + np.array([1.0, 0.0, 0.0, 0.0])
    return rng.uniform(-5, 5, (n, 4))


def null_covector(spec: MetricSpec, x, direction) -> np.ndarray:
    """Future null covector at x whose frame components are ``(1, n)``, ``|n| = 1``."""
    n = np.asarray(direction, dtype=float)
    n = n / np.linalg.norm(n)
    cache = metric_at(spec, x, curvature=False)
    v = cache.tetrad @ np.concatenate([[1.0], n])
    return cache.lower_index(v)


def _family_factorization(op: OperatorSpec) -> tuple[SymbolFn, SymbolFn, str]:
    spec = op.metric
    if op.name == "scalar-wave":
        def ptilde(x, xi):
            return np.ones((1, 1), dtype=complex)

        def q(x, xi):
            return float(np.real(principal_symbol(op, x, xi)[0, 0]))
        return ptilde, q, "q = p (N = 1)"
    if op.name == "maxwell-lorentz":
        def ptilde(x, xi):
            return sqrt_minus_det(spec, x) * np.eye(4, dtype=complex)

        def q(x, xi):
            cache = metric_at(spec, x, curvature=False)
            return -sqrt_minus_det(spec, x) * cache.square(xi)
        return ptilde, q, "q = -sqrt(-g) xi^2 on the whole chart"
    if op.name in ("dirac", "dirac-adjoint"):
        sign = 1.0 if op.name == "dirac" else -1.0

        def ptilde(x, xi):
            gam = gamma_curved(metric_at(spec, x, curvature=False)).gamma
            s = np.einsum("m,mij->ij", np.asarray(xi, dtype=complex), gam)
            s = s if sign > 0 else -s.T
            return sqrt_minus_det(spec, x) * s

        def q(x, xi):
            cache = metric_at(spec, x, curvature=False)
            return sqrt_minus_det(spec, x) * cache.square(xi)
        return ptilde, q, "q = sqrt(-g) xi^2 on the whole chart"
    raise NotRecognized(f"no factorization known for operator {op.name!r}")


def rpt_factorize(op: OperatorSpec, candidate: SymbolFn | None = None,
                  n_samples: int = 200, seed: int = 0) -> RPTFactorization:
    """Return ``(ptilde, q)`` and verify it on random samples.

    Also checks that q is of real principal type on sampled null covectors:
    ``d q / d xi`` must not vanish there.
    """
    if op.metric is None:
        raise NotRecognized("operator carries no metric")
    if candidate is None:
        ptilde, q, validity = _family_factorization(op)
    else:
        ptilde = candidate

        def q(x, xi):
            return float(np.real(np.trace(ptilde(x, xi) @ principal_symbol(op, x, xi)))) / op.size
        validity = "user candidate"

    rng = np.random.default_rng(seed)
    xs = sample_points(op.metric, n_samples, rng)
    xis = rng.normal(size=(n_samples, 4))
    eye = np.eye(op.size)
    worst = 0.0
    for x, xi in zip(xs, xis):
        pt = ptilde(x, xi)
        p = principal_symbol(op, x, xi)
        qv = q(x, xi)
        res = np.max(np.abs(pt @ p - qv * eye))
        scale = max(1.0, np.max(np.abs(pt)) * np.max(np.abs(p)))
        worst = max(worst, float(res / scale))
        if res > FACTORIZATION_RTOL * scale:
            raise FactorizationFailed(f"ptilde p - q 1 residual {res:.3e} at x={x}, xi={xi}")

    for x in xs[: max(1, n_samples // 10)]:
        xi = null_covector(op.metric, x, rng.normal(size=3))
        _, dxi = symbol_gradients(lambda a, b: np.array(q(a, b)), x, xi)
        if np.linalg.norm(dxi) <= 1e-8 * np.linalg.norm(xi) * max(1.0, abs(sqrt_minus_det(op.metric, x))):
            raise FactorizationFailed(f"q has a radial or vanishing Hamiltonian field at x={x}")

    return RPTFactorization(op.name, ptilde, q, validity, worst, n_samples)


def factorization_residual(op: OperatorSpec, fac: RPTFactorization, x, xi) -> float:
    """Absolute max-norm of ``ptilde p - q 1``."""
    p = principal_symbol(op, x, xi)
    return float(np.max(np.abs(fac.ptilde(x, xi) @ p - fac.q(x, xi) * np.eye(op.size))))
