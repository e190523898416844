"""Spacetime metrics, curvature, tetrads, causal classes and geodesics.

Signature is (+ - - -) throughout. Built-in charts:

* ``minkowski``     coordinates (t, x, y, z)
* ``schwarzschild`` coordinates (t, r, theta, phi), exterior region only
* ``frw_flat``      coordinates (t, x, y, z), g = diag(1, -a^2, -a^2, -a^2)
* ``custom``        component table of expressions in four named coordinates

Index conventions for arrays: ``dg[l, m, n] = d_l g_mn``,
``christoffel[l, m, n] = Gamma^l_mn``, ``riemann[r, s, m, n] = R^r_smn``,
``tetrad[m, a] = e^m_a`` (column ``a`` is the frame vector ``e_a``).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (
    DegenerateMetric,
    NotInNormalNeighbourhood,
    OutOfDomain,
    SolverDiverged,
)
from .exprs import Expression

ETA = np.diag([1.0, -1.0, -1.0, -1.0])

FD_STEP = 1e-5
CURVATURE_STEP = 1e-4
SCHWARZSCHILD_MARGIN = 1e-6
DET_THRESHOLD = 1e-12


# --------------------------------------------------------------------------
# scale-factor families for flat FRW


def _scale_power(t, a0=1.0, exponent=1.0):
    if t <= 0:
        raise OutOfDomain(f"power-law scale factor needs t > 0, got t={t}")
    a = a0 * t**exponent
    da = a0 * exponent * t ** (exponent - 1)
    dda = a0 * exponent * (exponent - 1) * t ** (exponent - 2)
    return a, da, dda


def _scale_exponential(t, a0=1.0, hubble=1.0):
    a = a0 * np.exp(hubble * t)
    return a, hubble * a, hubble**2 * a


SCALE_FACTORS: dict[str, Callable] = {
    "power": _scale_power,
    "exponential": _scale_exponential,
}


@dataclass(frozen=True, eq=False)
class MetricSpec:
    """A spacetime chart with its metric.

    ``params`` holds named reals (``mass`` for Schwarzschild; ``family`` plus
    family parameters for FRW). ``components`` maps index pairs ``(m, n)``
    with ``m <= n`` to expression strings for custom metrics.
    """

    kind: str
    params: Mapping[str, object] = field(default_factory=dict)
    components: Mapping[tuple[int, int], str] = field(default_factory=dict)
    coordinates: tuple[str, str, str, str] = ("t", "x", "y", "z")

    def __post_init__(self):
        if self.kind not in ("minkowski", "schwarzschild", "frw_flat", "custom"):
            raise ValueError(f"unknown metric kind {self.kind!r}")
        if self.kind == "schwarzschild" and not float(self.params.get("mass", 0)) > 0:
            raise ValueError("Schwarzschild mass must be positive")
        if self.kind == "frw_flat":
            family = self.params.get("family", "power")
            if family not in SCALE_FACTORS:
                raise ValueError(f"unknown scale-factor family {family!r}")
        if self.kind == "custom":
            comps = {}
            for (m, n), src in self.components.items():
                m, n = sorted((int(m), int(n)))
                comps[(m, n)] = Expression(src, self.coordinates)
            object.__setattr__(self, "_compiled", comps)

    @classmethod
    def minkowski(cls) -> MetricSpec:
        return cls("minkowski")

    @classmethod
    def schwarzschild(cls, mass: float = 1.0) -> MetricSpec:
        return cls("schwarzschild", {"mass": float(mass)},
                   coordinates=("t", "r", "theta", "phi"))

    @classmethod
    def frw_flat(cls, family: str = "power", **params: float) -> MetricSpec:
        return cls("frw_flat", {"family": family, **params})

    @classmethod
    def custom(cls, components: Mapping[tuple[int, int], str],
               coordinates=("t", "x", "y", "z")) -> MetricSpec:
        return cls("custom", components=dict(components), coordinates=tuple(coordinates))

    @property
    def label(self) -> str:
        return f"{self.kind}({','.join(self.coordinates)})"

    @property
    def mass(self) -> float:
        return float(self.params["mass"])

    @property
    def is_diagonal(self) -> bool:
        if self.kind == "custom":
            return all(m == n for (m, n) in self._compiled)
        return True

    def scale_factor(self, t: float) -> tuple[float, float, float]:
        """(a, da/dt, d2a/dt2) for FRW metrics."""
        params = dict(self.params)
        family = params.pop("family", "power")
        return SCALE_FACTORS[family](t, **{k: float(v) for k, v in params.items()})


# --------------------------------------------------------------------------
# metric components and first derivatives


def check_domain(spec: MetricSpec, x) -> None:
    x = np.asarray(x, dtype=float)
    if x.shape != (4,) or not np.all(np.isfinite(x)):
        raise OutOfDomain(f"point must be 4 finite coordinates, got {x!r}")
    if spec.kind == "schwarzschild":
        r, theta = x[1], x[2]
        if r <= 2 * spec.mass * (1 + SCHWARZSCHILD_MARGIN):
            raise OutOfDomain(f"r={r} not in the exterior region r > 2M")
        if abs(np.sin(theta)) < 1e-8:
            raise OutOfDomain("theta at a coordinate pole")
    elif spec.kind == "frw_flat":
        spec.scale_factor(x[0])


def _diag_values(spec: MetricSpec, x):
    """Diagonal metric entries and their gradients for the built-in charts."""
    d = np.zeros(4)
    dd = np.zeros((4, 4))  # dd[l, m] = d_l g_mm
    if spec.kind == "minkowski":
        d[:] = (1.0, -1.0, -1.0, -1.0)
    elif spec.kind == "schwarzschild":
        M = spec.mass
        r, th = x[1], x[2]
        f = 1.0 - 2.0 * M / r
        s = np.sin(th)
        d[:] = (f, -1.0 / f, -r * r, -r * r * s * s)
        df = 2.0 * M / (r * r)
        dd[1] = (df, df / (f * f), -2.0 * r, -2.0 * r * s * s)
        # sin(pi/2 - th) is exactly zero on the equator, unlike cos(th)
        dd[2, 3] = -2.0 * r * r * s * np.sin(np.pi / 2 - th)
    elif spec.kind == "frw_flat":
        a, da, _ = spec.scale_factor(x[0])
        d[:] = (1.0, -a * a, -a * a, -a * a)
        dd[0, 1:] = -2.0 * a * da
    return d, dd


def metric(spec: MetricSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if spec.kind == "custom":
        g = np.zeros((4, 4))
        for (m, n), expr in spec._compiled.items():
            g[m, n] = g[n, m] = expr(*x)
        return g
    d, _ = _diag_values(spec, x)
    return np.diag(d)


def _fd_step(x) -> np.ndarray:
    return FD_STEP * np.maximum(1.0, np.abs(x))


def metric_derivative(spec: MetricSpec, x) -> np.ndarray:
    """``dg[l, m, n] = d_l g_mn``; closed form for built-in charts."""
    x = np.asarray(x, dtype=float)
    if spec.kind != "custom":
        _, dd = _diag_values(spec, x)
        dg = np.zeros((4, 4, 4))
        for m in range(4):
            dg[:, m, m] = dd[:, m]
        return dg
    h = _fd_step(x)
    dg = np.empty((4, 4, 4))
    for l in range(4):
        e = np.zeros(4)
        e[l] = h[l]
        dg[l] = (metric(spec, x + e) - metric(spec, x - e)) / (2 * h[l])
    return dg


def inverse_metric(spec: MetricSpec, x) -> tuple[np.ndarray, np.ndarray]:
    """``(ginv, dginv)`` with ``dginv[l, m, n] = d_l g^mn``."""
    x = np.asarray(x, dtype=float)
    if spec.kind != "custom":
        d, dd = _diag_values(spec, x)
        ginv = np.diag(1.0 / d)
        dginv = np.zeros((4, 4, 4))
        for m in range(4):
            dginv[:, m, m] = -dd[:, m] / (d[m] * d[m])
        return ginv, dginv
    g = metric(spec, x)
    ginv = np.linalg.inv(g)
    dginv = -np.einsum("ma,lab,bn->lmn", ginv, metric_derivative(spec, x), ginv)
    return ginv, dginv


def christoffel(spec: MetricSpec, x) -> np.ndarray:
    """``Gamma^l_mn`` from the metric and its first derivatives."""
    ginv, _ = inverse_metric(spec, x)
    dg = metric_derivative(spec, x)
    # lowered[r, m, n] = Gamma_{r m n}
    lowered = 0.5 * (np.einsum("mrn->rmn", dg) + np.einsum("nrm->rmn", dg) - dg)
    return np.einsum("lr,rmn->lmn", ginv, lowered)


def sqrt_minus_det(spec: MetricSpec, x) -> float:
    return float(np.sqrt(-np.linalg.det(metric(spec, x))))


# --------------------------------------------------------------------------
# tetrads


def tetrad(spec: MetricSpec, x) -> np.ndarray:
    """Orthonormal frame ``e^m_a`` by Gram-Schmidt from d_t, d_1, d_2, d_3."""
    g = metric(spec, x)
    frame = np.zeros((4, 4))
    for a in range(4):
        v = np.zeros(4)
        v[a] = 1.0
        for b in range(a):
            v = v - ETA[b, b] * (v @ g @ frame[:, b]) * frame[:, b]
        norm = v @ g @ v
        if a == 0 and norm <= 0:
            raise DegenerateMetric("coordinate time direction is not timelike")
        if a > 0 and norm >= 0:
            raise DegenerateMetric("spatial coordinate direction is not spacelike")
        frame[:, a] = v / np.sqrt(abs(norm))
    return frame


def tetrad_derivative(spec: MetricSpec, x) -> np.ndarray:
    """``de[l, m, a] = d_l e^m_a``; closed form for diagonal metrics."""
    x = np.asarray(x, dtype=float)
    if spec.is_diagonal and spec.kind != "custom":
        d, dd = _diag_values(spec, x)
        de = np.zeros((4, 4, 4))
        for a in range(4):
            absd = abs(d[a])
            de[:, a, a] = -0.5 * np.sign(d[a]) * dd[:, a] / absd**1.5
        return de
    h = _fd_step(x)
    de = np.empty((4, 4, 4))
    for l in range(4):
        e = np.zeros(4)
        e[l] = h[l]
        de[l] = (tetrad(spec, x + e) - tetrad(spec, x - e)) / (2 * h[l])
    return de


# --------------------------------------------------------------------------
# geometry cache


@dataclass(frozen=True, eq=False)
class GeometryCache:
    point: np.ndarray
    g: np.ndarray
    g_inverse: np.ndarray
    christoffel: np.ndarray
    tetrad: np.ndarray
    tetrad_inverse: np.ndarray
    riemann: np.ndarray | None = None
    ricci: np.ndarray | None = None
    scalar_curvature: float | None = None

    def raise_index(self, xi) -> np.ndarray:
        return self.g_inverse @ np.asarray(xi, dtype=float)

    def lower_index(self, v) -> np.ndarray:
        return self.g @ np.asarray(v, dtype=float)

    def square(self, xi) -> float:
        """``g^{mn} xi_m xi_n``."""
        xi = np.asarray(xi, dtype=float)
        return float(xi @ self.g_inverse @ xi)


def riemann_tensor(spec: MetricSpec, x) -> np.ndarray:
    """``R^r_smn = d_m G^r_ns - d_n G^r_ms + G^r_ml G^l_ns - G^r_nl G^l_ms``.

    Christoffel derivatives by central differences.
    """
    x = np.asarray(x, dtype=float)
    G = christoffel(spec, x)
    h = CURVATURE_STEP * np.maximum(1.0, np.abs(x))
    dG = np.empty((4, 4, 4, 4))  # dG[m, r, n, s] = d_m G^r_ns
    for m in range(4):
        e = np.zeros(4)
        e[m] = h[m]
        dG[m] = (christoffel(spec, x + e) - christoffel(spec, x - e)) / (2 * h[m])
    R = (np.einsum("mrns->rsmn", dG) - np.einsum("nrms->rsmn", dG)
         + np.einsum("rml,lns->rsmn", G, G) - np.einsum("rnl,lms->rsmn", G, G))
    return R


def metric_at(spec: MetricSpec, x, curvature: bool = True) -> GeometryCache:
    """Assemble the metric, Christoffels, tetrad and (optionally) curvature at x.

    Ricci is ``R_sn = R^r_srn`` and ``R = g^{sn} R_sn``; with this sign
    convention the 2-sphere of radius 1 embedded spatially has R > 0 in
    the mostly-minus signature used here.
    """
    x = np.asarray(x, dtype=float)
    check_domain(spec, x)
    g = metric(spec, x)
    if not np.allclose(g, g.T, rtol=0, atol=1e-14):
        raise DegenerateMetric("metric is not symmetric")
    if abs(np.linalg.det(g)) < DET_THRESHOLD:
        raise DegenerateMetric(f"|det g| below {DET_THRESHOLD} at {x}")
    ginv, _ = inverse_metric(spec, x)
    e = tetrad(spec, x)
    e_inv = ETA @ e.T @ g  # e^a_m = eta^{ab} g_mn e^n_b
    riem = ric = scal = None
    if curvature:
        riem = riemann_tensor(spec, x)
        ric = np.einsum("rsrn->sn", riem)
        scal = float(np.einsum("sn,sn->", ginv, ric))
    return GeometryCache(x.copy(), g, ginv, christoffel(spec, x), e, e_inv,
                         riem, ric, scal)


# --------------------------------------------------------------------------
# causal classification


@dataclass(frozen=True, eq=False)
class PhasePoint:
    """A point (x, xi) of the cotangent bundle with xi != 0."""

    x: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).reshape(4)
        xi = np.asarray(self.xi, dtype=float).reshape(4)
        if not np.any(xi):
            raise ValueError("covector must be nonzero")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "xi", xi)


class CausalClass(enum.Enum):
    TimelikeFuture = "timelike_future"
    TimelikePast = "timelike_past"
    NullFuture = "null_future"
    NullPast = "null_past"
    Spacelike = "spacelike"
    Zero = "zero"

    @property
    def is_future(self) -> bool:
        return self in (CausalClass.TimelikeFuture, CausalClass.NullFuture)

    @property
    def is_null(self) -> bool:
        return self in (CausalClass.NullFuture, CausalClass.NullPast)


NULL_TOLERANCE = 1e-10


def classify_covector(cache: GeometryCache, xi, tol: float = NULL_TOLERANCE) -> CausalClass:
    """Causal type of a covector from the sign of xi^2 and of its raised time part."""
    xi = np.asarray(xi, dtype=float)
    if not np.any(xi):
        return CausalClass.Zero
    ginv = cache.g_inverse
    sq = xi @ ginv @ xi
    scale = np.abs(xi) @ np.abs(ginv) @ np.abs(xi)
    future = (ginv @ xi)[0] > 0
    if abs(sq) <= tol * scale:
        return CausalClass.NullFuture if future else CausalClass.NullPast
    if sq > 0:
        return CausalClass.TimelikeFuture if future else CausalClass.TimelikePast
    return CausalClass.Spacelike


# --------------------------------------------------------------------------
# geodesic flow of q = g^{mn} xi_m xi_n


def hamilton_rhs(spec: MetricSpec) -> Callable:
    """Right-hand side of Hamilton's equations for ``q = g^{mn} xi_m xi_n``.

    State is ``(x^0..x^3, xi_0..xi_3)``; ``dx/dtau = 2 g^{-1} xi``.
    """

    def rhs(tau, state):
        x, xi = state[:4], state[4:]
        check_domain(spec, x)
        ginv, dginv = inverse_metric(spec, x)
        return np.concatenate([2.0 * ginv @ xi, -np.einsum("lmn,m,n->l", dginv, xi, xi)])

    return rhs


def integrate_geodesic(spec: MetricSpec, x0, xi0, tau_end: float,
                       rtol: float = 1e-10, atol: float = 1e-12, method: str = "RK45"):
    """Integrate the cotangent geodesic flow; returns scipy's ODE result."""
    state0 = np.concatenate([np.asarray(x0, float), np.asarray(xi0, float)])
    try:
        sol = solve_ivp(hamilton_rhs(spec), (0.0, float(tau_end)), state0, method=method,
                        rtol=rtol, atol=atol, dense_output=True)
    except OutOfDomain as exc:
        from .errors import LeftDomain
        raise LeftDomain(str(exc)) from None
    if sol.status != 0:
        raise SolverDiverged(sol.message)
    return sol


@dataclass(frozen=True, eq=False)
class GeodesicSolution:
    """Solution of the two-point geodesic problem on the parameter interval [0, 1].

    ``velocity`` is the tangent vector at x; ``sigma = g(v, v)`` is the signed
    squared affine length. ``flow(s)`` returns the 8-component phase-space
    state ``(x(s), xi(s))`` with ``xi = g dx/ds / 2``.
    """

    x: np.ndarray
    y: np.ndarray
    velocity: np.ndarray
    sigma: float
    iterations: int
    residual: float
    flow: Callable[[float], np.ndarray]

    def path(self, s: float) -> np.ndarray:
        return self.flow(s)[:4]


BVP_MAX_ITER = 50
BVP_TOL = 1e-8


def solve_geodesic_bvp(spec: MetricSpec, x, y, max_iter: int = BVP_MAX_ITER,
                       tol: float = BVP_TOL, rtol: float = 1e-12) -> GeodesicSolution:
    """Newton shooting for the geodesic from x reaching y at parameter 1."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    check_domain(spec, x)
    check_domain(spec, y)
    if spec.kind == "minkowski":
        v = y - x
        xi = 0.5 * ETA @ v
        return GeodesicSolution(x, y, v, float(v @ ETA @ v), 0, 0.0,
                                lambda s: np.concatenate([x + s * v, xi]))

    def endpoint(v):
        g = metric(spec, x)
        sol = integrate_geodesic(spec, x, 0.5 * g @ v, 1.0, rtol=rtol, atol=1e-13)
        return sol.y[:4, -1], sol

    v = y - x
    for it in range(1, max_iter + 1):
        end, sol = endpoint(v)
        res = end - y
        err = float(np.max(np.abs(res)))
        if err < tol:
            g = metric(spec, x)
            return GeodesicSolution(x, y, v, float(v @ g @ v), it, err, sol.sol)
        J = np.empty((4, 4))
        h = 1e-6 * max(1.0, float(np.max(np.abs(v))))
        for k in range(4):
            dv = np.zeros(4)
            dv[k] = h
            J[:, k] = (endpoint(v + dv)[0] - endpoint(v - dv)[0]) / (2 * h)
        try:
            step = np.linalg.solve(J, res)
        except np.linalg.LinAlgError:
            raise SolverDiverged("singular shooting Jacobian (conjugate point?)") from None
        # damp large steps to stay inside the chart
        scale = min(1.0, 0.5 * max(1.0, float(np.max(np.abs(v)))) / max(float(np.max(np.abs(step))), 1e-300))
        v = v - scale * step
    raise SolverDiverged(f"shooting did not converge in {max_iter} iterations")


@dataclass(frozen=True, eq=False)
class NullConnection:
    """A null geodesic joining x to y.

    ``xi`` is the launch covector at x, future-pointing with raised time
    component 1. ``eta`` is the same covector field at y. Flowing
    ``(x, xi)`` under :func:`hamilton_rhs` for parameter ``tau_end`` (negative
    when y lies to the past of x) reaches ``(y, eta)``.
    """

    x: np.ndarray
    y: np.ndarray
    xi: np.ndarray
    eta: np.ndarray
    tau_end: float
    y_in_future: bool
    solution: GeodesicSolution


def geodesic_connect(spec: MetricSpec, x, y, null_tol: float = 1e-6) -> NullConnection | None:
    """The null geodesic from x to y, or ``None`` if the joining geodesic is not null.

    Raises :class:`SolverDiverged` when shooting fails, which is distinct
    from a ``None`` answer.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.allclose(x, y, rtol=0, atol=1e-14):
        raise ValueError("geodesic_connect needs x != y")
    sol = solve_geodesic_bvp(spec, x, y)
    v = sol.velocity
    gx = metric(spec, x)
    scale = np.abs(v) @ np.abs(gx) @ np.abs(v)
    if abs(sol.sigma) > null_tol * scale:
        return None
    future = v[0] > 0
    sign = 1.0 if future else -1.0
    xi_raw = gx @ v  # lowered tangent at x
    norm = abs(v[0])
    eta_raw = 2.0 * sol.flow(1.0)[4:]
    return NullConnection(x, y, sign * xi_raw / norm, sign * eta_raw / norm,
                          sign * norm / 2.0, bool(future), sol)


def sigma_quadratic_distance(spec: MetricSpec, x, y) -> float:
    """Signed squared geodesic distance, positive for timelike separation."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if spec.kind == "minkowski":
        d = x - y
        return float(d @ ETA @ d)
    if np.allclose(x, y, rtol=0, atol=0):
        return 0.0
    try:
        return solve_geodesic_bvp(spec, x, y).sigma
    except SolverDiverged as exc:
        raise NotInNormalNeighbourhood(str(exc)) from None
