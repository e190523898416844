"""Wave front and polarization set estimates from windowed Fourier decay.

At each base point the sample is multiplied by a window, transformed with
an FFT and read off along rays ``k * omega`` for a geometric ladder of k.
A ray is Regular when the amplitude falls faster than ``k^s*`` (or sinks
below the noise floor), Singular when it decays slowly along a clean power
law, and Inconclusive otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import GridTooCoarse, WindowTooWide
from .hadamard import TwoPointSample, slice_covector

REGULAR = "Regular"
SINGULAR = "Singular"
INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class DetectorConfig:
    width: float
    k_min: float
    k_max: float
    n_k: int = 8
    directions: int = 64
    window: str = "gaussian"
    slope_threshold: float = -4.0
    residual_threshold: float = 0.5
    floor_rel: float = 1e-8
    sub_angles: int = 5
    support: float = 7.0
    pad: int = 2
    max_fft_elements: int = 1 << 22

    def __post_init__(self):
        if self.window not in ("gaussian", "bump"):
            raise ValueError(f"unknown window {self.window!r}")
        if not (self.width > 0 and 0 < self.k_min < self.k_max):
            raise ValueError("need width > 0 and 0 < k_min < k_max")
        if self.k_max / self.k_min < 16 * (1 - 1e-12):
            raise ValueError("frequency ladder must span a factor of at least 16")
        if self.n_k < 8:
            raise ValueError("at least 8 radial samples are required")

    @property
    def ladder(self) -> np.ndarray:
        return np.geomspace(self.k_min, self.k_max, self.n_k)

    @property
    def reach(self) -> float:
        """Half-width of the window support in coordinate units."""
        return self.width * (self.support if self.window == "gaussian" else 1.0)

    def window_values(self, r: np.ndarray) -> np.ndarray:
        if self.window == "gaussian":
            out = np.exp(-0.5 * (r / self.width) ** 2)
            out[r > self.reach] = 0.0
            return out
        x = np.clip(r / self.width, 0, 1)
        out = np.zeros_like(r)
        inside = x < 1
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - x[inside] ** 2))
        return out


@dataclass(frozen=True)
class WFEntry:
    base: tuple
    index: int
    direction: tuple
    slope: float
    residual: float
    verdict: str
    amplitudes: tuple
    reason: str = ""


@dataclass
class WFReport:
    entries: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def at(self, base) -> list[WFEntry]:
        base = tuple(float(b) for b in np.atleast_1d(base))
        return [e for e in self.entries if np.allclose(e.base, base, rtol=0, atol=1e-12)]

    def verdicts(self, base) -> list[str]:
        return [e.verdict for e in self.at(base)]

    def singular_indices(self, base) -> list[int]:
        return [e.index for e in self.at(base) if e.verdict == SINGULAR]


@dataclass(frozen=True)
class PolReportEntry:
    base: tuple
    index: int
    direction: tuple
    fibre: np.ndarray
    dominance: float


def direction_grid(dim: int, n: int) -> np.ndarray:
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        th = 2 * np.pi * np.arange(n) / n
        return np.column_stack([np.cos(th), np.sin(th)])
    from .hadamard import sphere_directions
    if dim == 3:
        return sphere_directions(n)
    raise ValueError("direction grids are provided for 1-3 dimensions")


def _sector_rays(dim: int, n: int, j: int, sub: int) -> np.ndarray:
    """Unit vectors sampling sector j (half-angle pi/n, neighbours share edges)."""
    if dim == 1:
        return direction_grid(1, n)[j:j + 1]
    if dim == 2:
        th = 2 * np.pi * j / n + np.linspace(-np.pi / n, np.pi / n, sub)
        return np.column_stack([np.cos(th), np.sin(th)])
    centre = direction_grid(dim, n)[j]
    spread = np.sqrt(4 * np.pi / n) / 2
    rng = np.random.default_rng(j)
    rays = [centre]
    for _ in range(sub - 1):
        v = centre + spread * rng.normal(size=dim) / np.sqrt(dim)
        rays.append(v / np.linalg.norm(v))
    return np.array(rays)


class _Transform:
    """Windowed FFT of every component of a sample around one base point."""

    def __init__(self, sample: TwoPointSample, cfg: DetectorConfig, base):
        base = np.atleast_1d(np.asarray(base, dtype=float))
        if base.size != sample.dim:
            raise ValueError("base point dimension does not match the sample")
        h = sample.spacing
        nyquist = np.pi / h
        if np.any(cfg.k_max > nyquist / 2 * (1 + 1e-9)):
            raise GridTooCoarse(f"k_max {cfg.k_max} exceeds half the Nyquist frequency {nyquist.min() / 2:.4g}")
        lo_idx, hi_idx, centre = [], [], []
        for a, b, hh in zip(sample.axes, base, h):
            if b - cfg.reach < a[0] - 1e-12 or b + cfg.reach > a[-1] + 1e-12:
                raise WindowTooWide(f"window around {b} reaches outside [{a[0]}, {a[-1]}]")
            lo_idx.append(int(np.searchsorted(a, b - cfg.reach - 1e-12)))
            hi_idx.append(int(np.searchsorted(a, b + cfg.reach + 1e-12, side="right")))
            centre.append(int(np.argmin(np.abs(a - b))))
        sl = tuple(slice(lo, hi) for lo, hi in zip(lo_idx, hi_idx))
        coords = np.meshgrid(*[a[s] for a, s in zip(sample.axes, sl)], indexing="ij")
        r = np.sqrt(sum((c - b) ** 2 for c, b in zip(coords, base)))
        win = cfg.window_values(r)
        block = sample.values[(slice(None),) + sl]
        f = block * win[None]
        shape = np.array(f.shape[1:])
        padded = shape.copy()
        for i in range(len(padded)):
            if np.prod(padded) * cfg.pad <= cfg.max_fft_elements:
                padded[i] = shape[i] * cfg.pad
        buf = np.zeros((f.shape[0],) + tuple(padded), dtype=complex)
        buf[(slice(None),) + tuple(slice(0, n) for n in shape)] = f
        shift = [-(c - lo) for c, lo in zip(centre, lo_idx)]
        buf = np.roll(buf, shift, axis=tuple(range(1, buf.ndim)))
        F = np.fft.fftshift(np.fft.fftn(buf, axes=tuple(range(1, buf.ndim))),
                            axes=tuple(range(1, buf.ndim))) * np.prod(h)
        self.dk = 2 * np.pi / (padded * h)
        self.mid = padded // 2
        self.offset = np.array([a[c] for a, c in zip(sample.axes, centre)]) - base
        # crop to the band needed for |k| <= k_max
        half = np.minimum(np.ceil(cfg.k_max / self.dk).astype(int) + 6, self.mid)
        crop = tuple(slice(m - hh, min(m + hh + 1, p)) for m, hh, p in zip(self.mid, half, padded))
        self.lo = np.array([c.start for c in crop]) - self.mid
        self.F = F[(slice(None),) + crop]
        self.re = [ndimage.spline_filter(c.real, order=3) for c in self.F]
        self.im = [ndimage.spline_filter(c.imag, order=3) for c in self.F]
        self.floor = cfg.floor_rel * float(np.max(np.abs(block))) * float(np.sum(win) * np.prod(h))
        self.floor = max(self.floor, np.finfo(float).tiny)

    def values(self, ks: np.ndarray) -> np.ndarray:
        """Transforms at wave vectors ``ks`` (rows); shape (components, len(ks))."""
        idx = (ks / self.dk - self.lo).T
        phase = np.exp(-1j * ks @ self.offset)
        out = []
        for re, im in zip(self.re, self.im):
            v = (ndimage.map_coordinates(re, idx, order=3, prefilter=False, mode="nearest")
                 + 1j * ndimage.map_coordinates(im, idx, order=3, prefilter=False, mode="nearest"))
            out.append(v * phase)
        return np.array(out)


def _classify(ladder, amps, floor, cfg: DetectorConfig):
    logk = np.log(ladder)
    upper = amps[len(amps) // 2:]
    if np.all(upper < floor):
        return -np.inf, 0.0, REGULAR, "below noise floor"
    usable = amps > floor
    la = np.log(np.maximum(amps, floor))
    slope, icpt = np.polyfit(logk[usable], la[usable], 1) if usable.sum() >= 2 else (-np.inf, 0.0)
    resid = float(np.sqrt(np.mean((la[usable] - (slope * logk[usable] + icpt)) ** 2))) if usable.sum() >= 2 else 0.0
    local = np.diff(la) / np.diff(logk)
    tail = float(local[-1])
    if slope <= cfg.slope_threshold:
        return float(slope), resid, REGULAR, "steep power law"
    if tail <= cfg.slope_threshold and np.all(local <= 0.5):
        return float(slope), resid, REGULAR, "accelerating decay"
    if resid < cfg.residual_threshold:
        return float(slope), resid, SINGULAR, "slow power law"
    return float(slope), resid, INCONCLUSIVE, "poor fit"


def _sector_amplitudes(tr: _Transform, cfg: DetectorConfig, dim: int, j: int):
    rays = _sector_rays(dim, cfg.directions, j, cfg.sub_angles)
    ladder = cfg.ladder
    ks = (ladder[:, None, None] * rays[None, :, :]).reshape(-1, dim)
    vals = tr.values(ks).reshape(-1, len(ladder), len(rays))
    return vals, rays


def wf_detect(sample: TwoPointSample, cfg: DetectorConfig, base_points) -> WFReport:
    """Classify every direction sector at every base point.

    Multi-component samples are judged by the Euclidean norm of the
    component transforms.
    """
    dim = sample.dim
    dirs = direction_grid(dim, cfg.directions)
    report = WFReport(meta={"sample": sample.name, "eps": sample.eps, "config": cfg})
    for b in base_points:
        b = np.atleast_1d(np.asarray(b, dtype=float))
        tr = _Transform(sample, cfg, b)
        for j, d in enumerate(dirs):
            vals, _ = _sector_amplitudes(tr, cfg, dim, j)
            amps = np.max(np.sqrt(np.sum(np.abs(vals) ** 2, axis=0)), axis=1)
            slope, resid, verdict, why = _classify(cfg.ladder, amps, tr.floor, cfg)
            report.entries.append(WFEntry(tuple(b.tolist()), j, tuple(d.tolist()), slope, resid,
                                          verdict, tuple(amps.tolist()), why))
    return report


def pol_detect(sample: TwoPointSample, cfg: DetectorConfig, base_points,
               report: WFReport | None = None) -> list[PolReportEntry]:
    """Dominant fibre direction in C^N for every Singular sector.

    Rows of the direction-resolved matrix are the component transforms at
    each ladder frequency and sub-angle, weighted by ``k / k_max``.
    """
    if report is None:
        report = wf_detect(sample, cfg, base_points)
    dim = sample.dim
    ladder = cfg.ladder
    out = []
    for b in base_points:
        b = np.atleast_1d(np.asarray(b, dtype=float))
        singular = report.singular_indices(b)
        if not singular:
            continue
        tr = _Transform(sample, cfg, b)
        dirs = direction_grid(dim, cfg.directions)
        for j in singular:
            vals, _ = _sector_amplitudes(tr, cfg, dim, j)
            weights = (ladder / ladder[-1])[:, None]
            rows = (vals * weights[None]).reshape(sample.components, -1).T
            _, s, vh = np.linalg.svd(rows, full_matrices=False)
            fibre = vh[0]
            k = int(np.argmax(np.abs(fibre)))
            fibre = fibre * np.exp(-1j * np.angle(fibre[k]))
            dominance = float(s[0] / s[1]) if len(s) > 1 and s[1] > 0 else float("inf")
            out.append(PolReportEntry(tuple(b.tolist()), j, tuple(dirs[j].tolist()), fibre, dominance))
    return out


def wf_detect_two_point(sample: TwoPointSample, cfg: DetectorConfig, base_points) -> WFReport:
    """Detector on a light-cone slice ``(s, v)`` of a two-point function.

    Each entry's diagnostics carry the direction mapped to ``(xi_t, xi_z)``
    and the corresponding pair direction ``(xi, -xi)`` in difference
    coordinates.
    """
    if sample.dim != 2:
        raise ValueError("two-point detection works on 2-d slices")
    rep = wf_detect(sample, cfg, base_points)
    mapped = []
    for e in rep.entries:
        tz = slice_covector(e.direction)
        tz = tz / np.linalg.norm(tz)
        xi = np.array([tz[0], 0.0, 0.0, tz[1]])
        mapped.append({"xi": xi.tolist(), "pair_direction": np.concatenate([xi, -xi]).tolist()})
    rep.meta["covectors"] = mapped
    return rep


def misclassified_fraction(report: WFReport, base, expected) -> float:
    """Fraction of sectors whose verdict differs from ``expected(direction) -> verdict``."""
    entries = report.at(base)
    bad = sum(1 for e in entries if e.verdict != expected(np.asarray(e.direction)))
    return bad / max(len(entries), 1)
