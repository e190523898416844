"""Dirac matrices on curved spacetime, the spin connection and bispinor algebra.

Flat matrices are in the Dirac representation (gamma^0 diagonal) with
``{gamma^a, gamma^b} = 2 eta^{ab}``, eta = diag(+1, -1, -1, -1).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import GridTooCoarse
from .geometry import ETA, GeometryCache, MetricSpec, metric_at, tetrad_derivative

_I2 = np.eye(2)
_Z2 = np.zeros((2, 2))
PAULI = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex)

FLAT_GAMMA = np.array(
    [np.block([[_I2, _Z2], [_Z2, -_I2]])]
    + [np.block([[_Z2, s], [-s, _Z2]]) for s in PAULI]
).astype(complex)
GAMMA5 = 1j * FLAT_GAMMA[0] @ FLAT_GAMMA[1] @ FLAT_GAMMA[2] @ FLAT_GAMMA[3]
IDENTITY = np.eye(4, dtype=complex)

RANK_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class GammaSet:
    """Curved Dirac matrices ``gamma[m] = e^m_a gamma^a`` at one point."""

    gamma: np.ndarray
    flat: np.ndarray
    tetrad: np.ndarray
    g_inverse: np.ndarray

    def anticommutator_residual(self) -> float:
        worst = 0.0
        for m, n in itertools.product(range(4), repeat=2):
            ac = self.gamma[m] @ self.gamma[n] + self.gamma[n] @ self.gamma[m]
            worst = max(worst, np.max(np.abs(ac - 2 * self.g_inverse[m, n] * IDENTITY)))
        return float(worst)


@dataclass(frozen=True, eq=False)
class SpinConnection:
    """``sigma[m]`` with ``nabla_m = d_m + sigma_m`` on spinors."""

    sigma: np.ndarray
    point: np.ndarray

    def along(self, velocity) -> np.ndarray:
        return np.einsum("m,mij->ij", np.asarray(velocity, dtype=float), self.sigma)


@dataclass(frozen=True, eq=False)
class BispinorMatrix:
    """A 4x4 matrix in the fibre D_x (x) D*_y; ``x`` and ``y`` tag the base points."""

    matrix: np.ndarray
    x: np.ndarray | None = None
    y: np.ndarray | None = None


def gamma_curved(cache: GeometryCache) -> GammaSet:
    gam = np.einsum("ma,aij->mij", cache.tetrad, FLAT_GAMMA)
    return GammaSet(gam, FLAT_GAMMA, cache.tetrad, cache.g_inverse)


def gammas_at(spec: MetricSpec, x) -> GammaSet:
    return gamma_curved(metric_at(spec, x, curvature=False))


def slash(gammas: GammaSet | np.ndarray, xi) -> np.ndarray:
    """``xi_m gamma^m`` as a 4x4 matrix."""
    gam = gammas.gamma if isinstance(gammas, GammaSet) else gammas
    return np.einsum("m,mij->ij", np.asarray(xi, dtype=complex), gam)


def singular_rank(matrix, rtol: float = RANK_RTOL) -> int:
    s = np.linalg.svd(np.asarray(matrix), compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def frame_connection(cache: GeometryCache, dtetrad: np.ndarray) -> np.ndarray:
    """``A[m, a, b] = e^a_n (d_m e^n_b + Gamma^n_ml e^l_b)``; antisymmetric after lowering a."""
    cov = dtetrad + np.einsum("nml,lb->mnb", cache.christoffel, cache.tetrad)
    return np.einsum("an,mnb->mab", cache.tetrad_inverse, cov)


def spin_connection_at(spec: MetricSpec, x, cache: GeometryCache | None = None) -> SpinConnection:
    """``sigma_m = 1/4 A_{m ab} gamma^a gamma^b`` from the tetrad connection.

    This choice makes ``d_m gamma^n + Gamma^n_ml gamma^l + [sigma_m, gamma^n] = 0``.
    """
    x = np.asarray(x, dtype=float)
    if cache is None:
        cache = metric_at(spec, x, curvature=False)
    A = frame_connection(cache, tetrad_derivative(spec, x))
    A_low = np.einsum("ac,mcb->mab", ETA, A)
    pairs = np.einsum("aij,bjk->abik", FLAT_GAMMA, FLAT_GAMMA)
    sigma = 0.25 * np.einsum("mab,abik->mik", A_low, pairs)
    return SpinConnection(sigma, x)


def gamma_derivative(spec: MetricSpec, x) -> np.ndarray:
    """``dgam[l, m] = d_l gamma^m`` from the tetrad derivative."""
    return np.einsum("lma,aij->lmij", tetrad_derivative(spec, np.asarray(x, float)), FLAT_GAMMA)


def nabla_gamma_residual(spec: MetricSpec, x, h: float = 1e-4) -> float:
    """Max-norm of ``d_m gamma^n + Gamma^n_ml gamma^l + [sigma_m, gamma^n]``.

    ``d_m gamma^n`` is taken by central differences with step ``h`` (scaled
    by coordinate magnitude), so the residual is O(h^2).
    """
    x = np.asarray(x, dtype=float)
    cache = metric_at(spec, x, curvature=False)
    gam = gamma_curved(cache).gamma
    sig = spin_connection_at(spec, x, cache).sigma
    steps = h * np.maximum(1.0, np.abs(x))
    worst = 0.0
    for m in range(4):
        e = np.zeros(4)
        e[m] = steps[m]
        dgam = (gammas_at(spec, x + e).gamma - gammas_at(spec, x - e).gamma) / (2 * steps[m])
        for n in range(4):
            res = (dgam[n] + np.einsum("l,lij->ij", cache.christoffel[n, m], gam)
                   + sig[m] @ gam[n] - gam[n] @ sig[m])
            worst = max(worst, float(np.max(np.abs(res))))
    return worst


# --------------------------------------------------------------------------
# bispinor basis


BASIS_LABELS = (
    ["1"]
    + [f"g{m}" for m in range(4)]
    + [f"s{m}{n}" for m, n in itertools.combinations(range(4), 2)]
    + ["g5"]
    + [f"g{m}g5" for m in range(4)]
)


def bispinor_basis(gammas: GammaSet) -> np.ndarray:
    """The 16 matrices ``1, gamma^m, sigma^{mn} (m<n), gamma^5, gamma^m gamma^5``.

    ``sigma^{mn} = i/2 [gamma^m, gamma^n]``; gamma^5 is the frame chirality
    matrix ``i gamma^0 gamma^1 gamma^2 gamma^3`` (flat).
    """
    g = gammas.gamma
    mats = [IDENTITY]
    mats += [g[m] for m in range(4)]
    mats += [0.5j * (g[m] @ g[n] - g[n] @ g[m]) for m, n in itertools.combinations(range(4), 2)]
    mats += [GAMMA5]
    mats += [g[m] @ GAMMA5 for m in range(4)]
    return np.array(mats)


@dataclass(frozen=True, eq=False)
class BispinorDecomposition:
    coefficients: np.ndarray  # 16 complex numbers in BASIS_LABELS order
    basis: np.ndarray

    @property
    def scalar(self) -> complex:
        return complex(self.coefficients[0])

    @property
    def vector(self) -> np.ndarray:
        return self.coefficients[1:5]

    @property
    def tensor(self) -> np.ndarray:
        return self.coefficients[5:11]

    @property
    def pseudoscalar(self) -> complex:
        return complex(self.coefficients[11])

    @property
    def axial(self) -> np.ndarray:
        return self.coefficients[12:16]

    def reconstruct(self) -> np.ndarray:
        return np.einsum("k,kij->ij", self.coefficients, self.basis)

    def as_dict(self) -> dict[str, complex]:
        return {lab: complex(c) for lab, c in zip(BASIS_LABELS, self.coefficients)}


def bispinor_decompose(w, gammas: GammaSet) -> BispinorDecomposition:
    """Coefficients of ``w`` on the Clifford basis built from ``gammas``.

    The basis is orthogonal under the trace pairing only for a flat frame,
    so the general case solves the 16x16 linear system directly.
    """
    w = w.matrix if isinstance(w, BispinorMatrix) else np.asarray(w, dtype=complex)
    basis = bispinor_basis(gammas)
    B = basis.reshape(16, 16).T
    coeffs = np.linalg.solve(B, w.reshape(16))
    return BispinorDecomposition(coeffs, basis)


@dataclass(frozen=True)
class KernelReport:
    dimension: int
    null_vectors: np.ndarray  # rows, each (alpha, beta_0..beta_3)
    singular_values: np.ndarray
    gap: float


def slash_kernel_on_vector_span(gammas: GammaSet, xi, rtol: float = RANK_RTOL) -> KernelReport:
    """Solutions ``(alpha, beta)`` of ``slash(xi) (alpha 1 + beta_n gamma^n) = 0``."""
    sx = slash(gammas, xi)
    cols = [sx @ IDENTITY] + [sx @ gammas.gamma[n] for n in range(4)]
    L = np.array([c.reshape(16) for c in cols]).T
    _, s, vh = np.linalg.svd(L)
    keep = s > rtol * s[0]
    dim = int(np.sum(~keep))
    nulls = vh[keep.sum():].conj()
    retained = s[keep]
    discarded = s[~keep]
    if discarded.size == 0:
        gap = 0.0
    else:
        gap = float(retained.min() / max(discarded.max(), np.finfo(float).tiny))
    return KernelReport(dim, nulls, s, gap)


# --------------------------------------------------------------------------
# sampled spinor fields and the Lichnerowicz identity


@dataclass(frozen=True, eq=False)
class SpinorField:
    """Values ``psi[i0, i1, i2, i3, :]`` at ``origin + index * spacing``."""

    origin: np.ndarray
    spacing: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        sp = np.broadcast_to(np.asarray(self.spacing, dtype=float), (4,)).copy()
        if np.any(sp <= 0):
            raise ValueError("grid spacing must be positive")
        object.__setattr__(self, "spacing", sp)
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float))
        if self.values.ndim != 5 or self.values.shape[-1] != 4:
            raise ValueError("values must have shape (n0, n1, n2, n3, 4)")

    @classmethod
    def sample(cls, func, center, spacing, n: int = 5) -> SpinorField:
        """Sample ``func(x) -> 4-spinor`` on an n^4 grid centred at ``center``."""
        center = np.asarray(center, dtype=float)
        spacing = np.broadcast_to(np.asarray(spacing, dtype=float), (4,))
        origin = center - spacing * (n - 1) / 2
        vals = np.empty((n, n, n, n, 4), dtype=complex)
        for idx in itertools.product(range(n), repeat=4):
            vals[idx] = func(origin + np.array(idx) * spacing)
        return cls(origin, spacing, vals)

    def point(self, idx) -> np.ndarray:
        return self.origin + np.asarray(idx) * self.spacing


@dataclass(frozen=True, eq=False)
class LichnerowiczReport:
    residual: float
    lhs: np.ndarray
    rhs: np.ndarray
    points: np.ndarray


def _central(arr, axis, h):
    """Central difference along ``axis`` of a (n0,n1,n2,n3,...) block, trimming 1 on all axes."""
    sl_p = [slice(1, -1)] * 4
    sl_m = [slice(1, -1)] * 4
    sl_p[axis] = slice(2, None)
    sl_m[axis] = slice(None, -2)
    return (arr[tuple(sl_p)] - arr[tuple(sl_m)]) / (2 * h)


def _trim(arr):
    return arr[1:-1, 1:-1, 1:-1, 1:-1]


def lichnerowicz_check(spec: MetricSpec, field: SpinorField, m: float) -> LichnerowiczReport:
    """Compare ``(-i Dslash + m)(i Dslash + m) psi`` with ``(box - R/4 + m^2) psi``.

    Both sides are evaluated with nested central differences on the grid,
    at every point whose radius-2 stencil fits. The residual is O(h^2).
    """
    psi = field.values
    shape = psi.shape[:4]
    if min(shape) < 5:
        raise GridTooCoarse("Lichnerowicz check needs at least 5 points per axis")
    h = field.spacing

    # geometry on the radius-1 interior
    inner = tuple(s - 2 for s in shape)
    gam = np.empty(inner + (4, 4, 4), dtype=complex)
    sig = np.empty(inner + (4, 4, 4), dtype=complex)
    chris = np.empty(inner + (4, 4, 4))
    ginv = np.empty(inner + (4, 4))
    for idx in itertools.product(*(range(s) for s in inner)):
        x = field.point(np.array(idx) + 1)
        cache = metric_at(spec, x, curvature=False)
        gam[idx] = gamma_curved(cache).gamma
        sig[idx] = spin_connection_at(spec, x, cache).sigma
        chris[idx] = cache.christoffel
        ginv[idx] = cache.g_inverse

    # covariant derivatives of psi on the radius-1 interior: Dpsi[..., m, i]
    dpsi = np.stack([_central(psi, a, h[a]) for a in range(4)], axis=-2)
    Dpsi = dpsi + np.einsum("...mij,...j->...mi", sig, _trim(psi))
    # chi = (i Dslash + m) psi
    chi = 1j * np.einsum("...mij,...mj->...i", gam, Dpsi) + m * _trim(psi)

    # second level on the radius-2 interior
    g2, s2, c2, gi2 = (_trim(a) for a in (gam, sig, chris, ginv))
    dchi = np.stack([_central(chi, a, h[a]) for a in range(4)], axis=-2)
    Dchi = dchi + np.einsum("...mij,...j->...mi", s2, _trim(chi))
    lhs = -1j * np.einsum("...mij,...mj->...i", g2, Dchi) + m * _trim(chi)

    # box psi = g^{mn} (d_m D_n psi + sigma_m D_n psi - Gamma^l_mn D_l psi)
    dD = np.stack([_central(Dpsi, a, h[a]) for a in range(4)], axis=-3)  # [..., m, n, i]
    DD = (dD + np.einsum("...mij,...nj->...mni", s2, _trim(Dpsi))
          - np.einsum("...lmn,...li->...mni", c2, _trim(Dpsi)))
    box = np.einsum("...mn,...mni->...i", gi2, DD)
    psi2 = psi[2:-2, 2:-2, 2:-2, 2:-2]

    curv = np.empty(psi2.shape[:4])
    pts = np.empty(psi2.shape[:4] + (4,))
    for idx in itertools.product(*(range(s) for s in psi2.shape[:4])):
        x = field.point(np.array(idx) + 2)
        pts[idx] = x
        curv[idx] = metric_at(spec, x).scalar_curvature
    rhs = box - 0.25 * curv[..., None] * psi2 + m * m * psi2
    res = float(np.max(np.abs(lhs - rhs)))
    return LichnerowiczReport(res, lhs, rhs, pts)
