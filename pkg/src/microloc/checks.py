"""Cross-module invariant suite run by ``microloc verify``.

Each check returns one :class:`CheckResult` per metric: the worst residual
found and the tolerance it was held to.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import flow, spin, symbols
from .geometry import MetricSpec, PhasePoint

DEFAULT_TOLERANCES = {
    "anticommutator": 1e-10,
    "nabla_gamma": 1e-5,
    "rpt": 1e-12,
    "null_drift": 1e-9,
    "dencker_transport": 1e-5,
    "lichnerowicz": 1e-4,
    "kernel_form": 1e-6,
}
CHECKS = tuple(DEFAULT_TOLERANCES)


@dataclass(frozen=True)
class CheckResult:
    check: str
    metric: str
    residual: float
    tolerance: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.residual) and self.residual < self.tolerance)

    def record(self) -> dict:
        return {"check": self.check, "metric": self.metric, "residual": self.residual,
                "tolerance": self.tolerance, "status": "PASS" if self.passed else "FAIL",
                "detail": self.detail}


def _points(spec: MetricSpec, n: int, seed: int = 0) -> np.ndarray:
    return symbols.sample_points(spec, n, np.random.default_rng(seed))


def _ray(spec: MetricSpec, seed: int = 1) -> PhasePoint:
    rng = np.random.default_rng(seed)
    x = _points(spec, 1, seed)[0]
    if spec.kind == "schwarzschild":
        x[1] = 8.0 * spec.mass
        x[2] = 1.2
    return PhasePoint(x, symbols.null_covector(spec, x, rng.normal(size=3)))


def check_anticommutator(spec: MetricSpec) -> tuple[float, str]:
    pts = _points(spec, 100)
    return max(spin.gammas_at(spec, x).anticommutator_residual() for x in pts), "100 points"


def check_nabla_gamma(spec: MetricSpec) -> tuple[float, str]:
    pts = _points(spec, 5)
    return max(spin.nabla_gamma_residual(spec, x, 1e-4) for x in pts), "5 points, h=1e-4"


def check_rpt(spec: MetricSpec) -> tuple[float, str]:
    rng = np.random.default_rng(2)
    pts = _points(spec, 200, 2)
    xis = rng.normal(size=(200, 4))
    worst = 0.0
    for fam in symbols.FAMILIES:
        op = symbols.operator_family(fam, spec, mass=1.0)
        fac = symbols.rpt_factorize(op, n_samples=20)
        worst = max(worst, max(symbols.factorization_residual(op, fac, x, xi)
                               for x, xi in zip(pts, xis)))
    return worst, f"{len(symbols.FAMILIES)} families x 200 samples"


def check_null_drift(spec: MetricSpec) -> tuple[float, str]:
    if spec.kind == "schwarzschild":
        start = flow.photon_sphere_start(spec)
        span = 10 * flow.angular_period(spec, start)
        strip = flow.integrate_bicharacteristic(spec, start, (0.0, span), 1001)
        r_dev = float(np.max(np.abs(strip.xs[:, 1] - 3 * spec.mass))) / spec.mass
        drift = strip.max_drift() / float(start.xi @ start.xi)
        return max(drift, r_dev * 1e-3), f"photon sphere, 10 periods, |r-3M|/M={r_dev:.2e}"
    start = _ray(spec)
    strip = flow.integrate_bicharacteristic(spec, start, (0.0, 5.0), 101)
    return strip.max_drift() / float(start.xi @ start.xi), "tau in [0, 5]"


def check_dencker_transport(spec: MetricSpec) -> tuple[float, str]:
    start = _ray(spec)
    strip = flow.integrate_bicharacteristic(spec, start, (0.0, 4.0), 41)
    op = symbols.dirac(spec, 1.0)
    ds = flow.DenckerSpec(op, symbols.rpt_factorize(op, n_samples=20), flow.TransportMode.SPIN)
    w0 = spin.slash(spin.gammas_at(spec, start.x), start.xi) @ np.array([1.0, 0.3j, -0.2, 0.5])
    orbit = flow.hamilton_orbit(ds, strip, w0)
    dirac_res = float(np.max(np.abs(flow.dencker_derivative(ds, strip, orbit))))
    opm = symbols.maxwell_lorentz(spec)
    dm = flow.DenckerSpec(opm, symbols.rpt_factorize(opm, n_samples=20), flow.TransportMode.LEVI_CIVITA)
    vorbit = flow.hamilton_orbit(dm, strip, np.array([0.2, 1.0, 0.3, -0.1]))
    maxwell_res = float(np.max(np.abs(flow.dencker_derivative(dm, strip, vorbit))))
    return max(dirac_res, maxwell_res), f"dirac {dirac_res:.2e}, maxwell {maxwell_res:.2e}"


def check_lichnerowicz(spec: MetricSpec) -> tuple[float, str]:
    x0 = _ray(spec).x
    amp = np.array([1.0, 0.5j, 0.2, -0.3])

    def psi(x):
        return np.exp(-np.sum((x - x0) ** 2)) * amp * (1 + 0.3 * x[1])

    field = spin.SpinorField.sample(psi, x0, 0.01, 5)
    return spin.lichnerowicz_check(spec, field, 0.7).residual, "gaussian packet, h=1e-2"


def check_kernel_form(spec: MetricSpec) -> tuple[float, str]:
    rng = np.random.default_rng(3)
    worst, dims = 0.0, set()
    for x in _points(spec, 20, 3):
        xi = symbols.null_covector(spec, x, rng.normal(size=3))
        rep = spin.slash_kernel_on_vector_span(spin.gammas_at(spec, x), xi)
        dims.add(rep.dimension)
        worst = max(worst, 1.0 / rep.gap if rep.dimension == 1 else np.inf)
    return worst, f"kernel dimensions {sorted(dims)}; residual is 1/gap"


RUNNERS = {
    "anticommutator": check_anticommutator,
    "nabla_gamma": check_nabla_gamma,
    "rpt": check_rpt,
    "null_drift": check_null_drift,
    "dencker_transport": check_dencker_transport,
    "lichnerowicz": check_lichnerowicz,
    "kernel_form": check_kernel_form,
}


def run_checks(metrics, names=CHECKS, tolerances=None, scale: float = 1.0) -> list[CheckResult]:
    tolerances = {**DEFAULT_TOLERANCES, **(tolerances or {})}
    unknown = [n for n in names if n not in RUNNERS]
    if unknown:
        raise ValueError(f"unknown checks {unknown}; available: {', '.join(CHECKS)}")
    out = []
    for spec in metrics:
        for name in names:
            residual, detail = RUNNERS[name](spec)
            out.append(CheckResult(name, spec.kind, float(residual), tolerances[name] * scale, detail))
    return out
