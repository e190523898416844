"""Bit-stable CSV and JSON writers and the CSV grid reader.

CSV: comma-separated, '.' decimal point, every real written as
``format(v, ".{p-1}e")`` (17 significant digits by default), one header row.

Trajectory header: ``tau,x0,x1,x2,x3,xi0,xi1,xi2,xi3,q``. Polarized strips
append ``f{i}_re,f{i}_im`` for each fibre entry; matrix fibres are
flattened row-major (``f{4*row+col}``).

Grid files: ``x0,..,x{d-1},re,im`` for scalar samples or
``x0,..,c0_re,c0_im,c1_re,...`` for several components, rows in C order
of the grid (last axis fastest).

JSON: UTF-8, sorted keys, two-space indent, floats via ``repr``.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .hadamard import TwoPointSample, WFElement, PolElement

TRAJECTORY_HEADER = ["tau", "x0", "x1", "x2", "x3", "xi0", "xi1", "xi2", "xi3", "q"]


def fmt(v: float, precision: int = 17) -> str:
    v = float(v)
    if math.isnan(v) or math.isinf(v):
        return repr(v)
    return format(v, f".{precision - 1}e")


def _write_rows(path: Path, header: list[str], rows, precision: int) -> None:
    buf = _io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v, precision) for v in row) + "\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="")


def trajectory_rows(strip, fibres=None):
    for k, tau in enumerate(strip.taus):
        row = [tau, *strip.xs[k], *strip.xis[k], strip.qs[k]]
        if fibres is not None:
            for z in np.asarray(fibres[k]).ravel():
                row += [z.real, z.imag]
        yield row


def fibre_header(size: int) -> list[str]:
    return [f"f{i}_{part}" for i in range(size) for part in ("re", "im")]


def write_trajectory(path, strip, fibres=None, precision: int = 17) -> None:
    header = list(TRAJECTORY_HEADER)
    if fibres is not None:
        header += fibre_header(np.asarray(fibres[0]).size)
    _write_rows(Path(path), header, trajectory_rows(strip, fibres), precision)


def write_grid(path, sample: TwoPointSample, precision: int = 17) -> None:
    d = sample.dim
    header = [f"x{i}" for i in range(d)]
    if sample.components == 1:
        header += ["re", "im"]
    else:
        header += [f"c{c}_{p}" for c in range(sample.components) for p in ("re", "im")]
    mesh = np.meshgrid(*sample.axes, indexing="ij")
    coords = np.column_stack([m.ravel() for m in mesh])
    vals = sample.values.reshape(sample.components, -1)

    def rows():
        for i in range(coords.shape[0]):
            row = list(coords[i])
            for c in range(sample.components):
                row += [vals[c, i].real, vals[c, i].imag]
            yield row

    _write_rows(Path(path), header, rows(), precision)


def read_grid(path, eps: float = 0.0, name: str = "loaded") -> TwoPointSample:
    """Load a grid file; the axes are recovered from the unique coordinates.

    Without ``eps`` the finest grid spacing is recorded as the sample's scale.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"input grid {str(path)!r} not found")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise ConfigError(f"{str(path)!r} is empty")
        data = np.array([[float(v) for v in row] for row in reader if row])
    d = sum(1 for h in header if h.startswith("x"))
    ncomp = (len(header) - d) // 2
    if d == 0 or ncomp == 0 or len(header) != d + 2 * ncomp:
        raise ConfigError(f"{str(path)!r}: header {header} is not a grid header")
    axes = tuple(np.unique(data[:, i]) for i in range(d))
    shape = tuple(len(a) for a in axes)
    if int(np.prod(shape)) != data.shape[0]:
        raise ConfigError(f"{str(path)!r}: rows do not form a full rectangular grid")
    vals = np.empty((ncomp,) + shape, dtype=complex)
    for c in range(ncomp):
        vals[c] = (data[:, d + 2 * c] + 1j * data[:, d + 2 * c + 1]).reshape(shape)
    if not eps > 0:
        # nominal regularization scale when the file does not state one
        eps = float(min(a[1] - a[0] for a in axes))
    return TwoPointSample(name, axes, vals, float(eps), {"source": str(path)})


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v + 0.0 if math.isfinite(v) else repr(v)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if hasattr(obj, "value") and hasattr(obj, "name"):
        return obj.value
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8", newline="")


def element_record(el: WFElement, fibre=None) -> dict:
    rec = {
        "x": el.x, "y": el.y, "xi": el.xi, "eta": el.eta,
        "frequency_flag": el.frequency_flag,
        "diagnostics": el.diagnostics,
    }
    if fibre is not None:
        m = np.asarray(fibre)
        rec["fibre_re"] = m.real
        rec["fibre_im"] = m.imag
    return rec


def pol_record(pe: PolElement) -> dict:
    rec = element_record(pe.element, pe.fibre.matrix)
    rec["diagnostics"] = {**pe.element.diagnostics, **pe.diagnostics}
    return rec
