"""Command-line front end.

    microloc {propagate,transport,predict,detect,verify} --config run.toml [--out DIR]

Exit codes: 0 success, 1 a verify check failed, 2 usage or config error,
3 numerical failure. Errors are written to stderr as one JSON object.
Data files carry no timestamps; run metadata goes to ``run_meta.json``.

Command tables (all keys optional unless marked):

``[propagate]``  ``x`` (required unless seeds or photon_sphere), ``xi`` or
``direction``, ``tau = [t0, t1]``, ``steps``, ``photon_sphere = true``
with ``periods``, ``seeds = N`` for a batch of random null starts.

``[transport]``  as propagate plus ``operator`` (dirac, dirac-adjoint,
maxwell-lorentz, scalar-wave), ``mode`` (spin, levi_civita, generic),
``mass``, ``fibre`` (slash, spinor, tangent) or ``fibre_re``/``fibre_im``,
``spinor`` (for fibre = "spinor"), ``side`` for slash fibres.

``[predict]``  ``kind`` (hadamard, pol_dirac, feynman), ``x``, ``y``,
``directions``, ``seed``, ``product = true`` adds a self-product check.

``[detect]``  ``sample`` (built-in name) or ``input`` (grid CSV),
``eps``, ``grid = [[lo, hi, step], ...]``, ``bases``, ``mode`` (wf, pol,
two_point), ``width``, ``k_min``, ``k_max``, ``n_k``, ``directions``,
``window``, ``floor_rel``, plus ``base_x``, ``base_y``, ``m`` for slices.

``[verify]``  ``metrics`` (names, default minkowski and schwarzschild),
``checks``; tolerances come from ``[tolerances]``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import replace
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, checks, flow, hadamard, io, spin, symbols, wfdetect
from .config import COMMANDS, RunConfig, load_config, parse_config, tolerance_scale
from .errors import ConfigError, MicrolocError
from .geometry import MetricSpec, PhasePoint, metric

DEFAULT_VERIFY_METRICS = ("minkowski", "schwarzschild")


# --------------------------------------------------------------------------
# helpers


def _vector(cfg: RunConfig, key: str, n: int | None = 4, required: bool = True):
    if key not in cfg.params:
        if required:
            cfg.require(key)
        return None
    try:
        v = np.asarray(cfg.params[key], dtype=float)
    except (TypeError, ValueError):
        raise cfg.error(key, f"{key!r} must be an array of numbers") from None
    if n is not None and v.shape != (n,):
        raise cfg.error(key, f"{key!r} must have {n} entries")
    return v


def _start(cfg: RunConfig) -> PhasePoint:
    spec = cfg.metric
    if cfg.get("photon_sphere", False):
        if spec.kind != "schwarzschild":
            raise cfg.error("photon_sphere", "photon_sphere needs the schwarzschild metric")
        return flow.photon_sphere_start(spec, float(cfg.get("energy", 1.0)))
    x = _vector(cfg, "x")
    if "xi" in cfg.params:
        return PhasePoint(x, _vector(cfg, "xi"))
    d = _vector(cfg, "direction", 3, required=False)
    if d is None:
        raise cfg.error(f"[{cfg.command}]", "give either 'xi' or 'direction'")
    return PhasePoint(x, symbols.null_covector(spec, x, d))


def _seed_start(spec: MetricSpec, seed: int) -> PhasePoint:
    rng = np.random.default_rng(seed)
    x = symbols.sample_points(spec, 1, rng)[0]
    n = rng.normal(size=3)
    if spec.kind == "schwarzschild":
        # outgoing from r >= 3M never falls below the start radius
        n[0] = abs(n[0])
    return PhasePoint(x, symbols.null_covector(spec, x, n))


def _span(cfg: RunConfig, start: PhasePoint) -> tuple[float, float]:
    if cfg.get("photon_sphere", False) and "tau" not in cfg.params:
        return 0.0, float(cfg.get("periods", 10)) * flow.angular_period(cfg.metric, start)
    tau = _vector(cfg, "tau", 2, required=False)
    return (0.0, 1.0) if tau is None else (float(tau[0]), float(tau[1]))


def _strip(cfg: RunConfig, start: PhasePoint):
    return flow.integrate_bicharacteristic(cfg.metric, start, _span(cfg, start),
                                           int(cfg.get("steps", 201)))


def _strip_record(strip, fibres=None) -> dict:
    rows = [list(r) for r in io.trajectory_rows(strip, fibres)]
    header = list(io.TRAJECTORY_HEADER)
    if fibres is not None:
        header += io.fibre_header(np.asarray(fibres[0]).size)
    return {"header": header, "rows": rows}


def _write_strip(cfg: RunConfig, path: Path, strip, fibres=None) -> Path:
    if cfg.output.format == "json":
        path = path.with_suffix(".json")
        io.write_json(path, _strip_record(strip, fibres))
    else:
        path = path.with_suffix(".csv")
        io.write_trajectory(path, strip, fibres, cfg.output.precision)
    return path


# --------------------------------------------------------------------------
# commands


def _propagate_seed(args) -> str:
    source, base_dir, seed, out = args
    cfg = parse_config(source, base_dir, "propagate")
    start = _seed_start(cfg.metric, seed)
    strip = _strip(cfg, start)
    return str(_write_strip(cfg, Path(out) / f"seed_{seed:04d}", strip))


def cmd_propagate(cfg: RunConfig, out: Path, jobs: int, seeds=None) -> list[str]:
    if seeds is None and "seeds" in cfg.params:
        seeds = list(range(int(cfg.params["seeds"])))
    if seeds:
        tasks = [(cfg.source, cfg.params["_base_dir"], int(s), str(out)) for s in seeds]
        if jobs > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                return list(pool.map(_propagate_seed, tasks))
        return [_propagate_seed(t) for t in tasks]
    strip = _strip(cfg, _start(cfg))
    return [str(_write_strip(cfg, out / "trajectory", strip))]


OPERATOR_ALIASES = {"maxwell": "maxwell-lorentz", "scalar": "scalar-wave"}
MODE_NAMES = {"spin": flow.TransportMode.SPIN, "levi_civita": flow.TransportMode.LEVI_CIVITA,
              "generic": flow.TransportMode.GENERIC}


def cmd_transport(cfg: RunConfig, out: Path, jobs: int, seeds=None) -> list[str]:
    spec = cfg.metric
    name = OPERATOR_ALIASES.get(cfg.get("operator", "dirac"), cfg.get("operator", "dirac"))
    if name not in symbols.FAMILIES:
        raise cfg.error("operator", f"unknown operator {name!r}; expected one of {symbols.FAMILIES}")
    default_mode = {"dirac": "spin", "dirac-adjoint": "spin", "maxwell-lorentz": "levi_civita"}.get(name, "generic")
    mode_name = cfg.get("mode", default_mode)
    if mode_name not in MODE_NAMES:
        raise cfg.error("mode", f"unknown mode {mode_name!r}; expected spin, levi_civita or generic")
    mode = MODE_NAMES[mode_name]
    if mode is flow.TransportMode.SPIN and not name.startswith("dirac"):
        raise cfg.error("mode", f"spin transport needs a Dirac operator, not {name!r}")
    if mode is flow.TransportMode.LEVI_CIVITA and name != "maxwell-lorentz":
        raise cfg.error("mode", f"levi_civita transport needs the maxwell-lorentz operator, not {name!r}")
    op = symbols.operator_family(name, spec, mass=float(cfg.get("mass", 0.0)))
    start = _start(cfg)
    strip = _strip(cfg, start)

    fibre = cfg.get("fibre", "slash" if name.startswith("dirac") else "tangent")
    side = None
    if "fibre_re" in cfg.params:
        re_ = np.asarray(cfg.params["fibre_re"], dtype=float)
        im_ = np.asarray(cfg.params.get("fibre_im", np.zeros_like(re_)), dtype=float)
        w0 = re_ + 1j * im_
    elif fibre == "tangent":
        w0 = np.linalg.solve(metric(spec, start.x), start.xi).astype(complex)
    elif fibre in ("slash", "spinor"):
        if not name.startswith("dirac"):
            raise cfg.error("fibre", f"fibre {fibre!r} needs a Dirac operator")
        s = spin.slash(spin.gammas_at(spec, start.x), start.xi)
        if name == "dirac-adjoint":
            s = -s.T
        if fibre == "spinor":
            u = np.asarray(cfg.get("spinor", [1.0, 0.3, -0.2, 0.5]), dtype=complex)
            w0 = s @ u
        else:
            w0 = s
            side = cfg.get("side", "BispinorBoth") if mode is flow.TransportMode.SPIN else None
    else:
        raise cfg.error("fibre", f"unknown fibre {fibre!r}; expected slash, spinor or tangent")

    if side is not None and name == "dirac":
        pol = flow.transport_spinor(strip, spec, w0, flow.SpinorSide(side))
    else:
        dspec = flow.DenckerSpec(op, symbols.rpt_factorize(op, n_samples=20), mode)
        pol = flow.hamilton_orbit(dspec, strip, w0)
    return [str(_write_strip(cfg, out / "transport", strip, pol.fibres))]


def cmd_predict(cfg: RunConfig, out: Path, jobs: int, seeds=None) -> list[str]:
    spec = cfg.metric
    kind = cfg.get("kind", "hadamard")
    x, y = _vector(cfg, "x"), _vector(cfg, "y")
    n = int(cfg.get("directions", hadamard.DIAGONAL_DIRECTIONS))
    if kind == "hadamard":
        elements = hadamard.predict_wf_hadamard_scalar(spec, x, y, n)
        records = [io.element_record(e) for e in elements]
    elif kind == "feynman":
        elements = hadamard.predict_wf_feynman(spec, x, y, n, int(cfg.get("seed", 0)))
        records = [io.element_record(e) for e in elements]
    elif kind == "pol_dirac":
        pols = hadamard.predict_pol_dirac(spec, x, y, n)
        elements = [p.element for p in pols]
        records = [io.pol_record(p) for p in pols]
    else:
        raise cfg.error("kind", f"unknown prediction {kind!r}; expected hadamard, pol_dirac or feynman")
    files = [out / "predict.json"]
    io.write_json(files[0], records)
    if cfg.get("product", False):
        ok, bad = hadamard.product_admissible(elements, elements)
        files.append(out / "product.json")
        io.write_json(files[1], {"admissible": ok, "offending": len(bad),
                                 "offending_on_diagonal": all(a.diagonal for a, _ in bad)})
    return [str(f) for f in files]


def _grid_axes(cfg: RunConfig):
    grid = cfg.require("grid")
    try:
        return tuple(np.arange(float(lo), float(hi) + 0.5 * float(st), float(st)) for lo, hi, st in grid)
    except (TypeError, ValueError):
        raise cfg.error("grid", "grid must be a list of [lo, hi, step] triples") from None


def cmd_detect(cfg: RunConfig, out: Path, jobs: int, seeds=None) -> list[str]:
    eps = float(cfg.get("eps", 0.0))
    if "input" in cfg.params:
        path = Path(cfg.params["input"])
        if not path.is_absolute():
            path = Path(cfg.params["_base_dir"]) / path
        sample = io.read_grid(path, eps)
    else:
        name = cfg.require("sample")
        extra = {k: cfg.params[k] for k in ("base_x", "base_y", "m") if k in cfg.params}
        try:
            sample = hadamard.sample_examples(name, _grid_axes(cfg), eps, **extra)
        except ValueError as exc:
            raise cfg.error("sample", str(exc)) from None
    keys = ("width", "k_min", "k_max", "n_k", "directions", "window", "slope_threshold",
            "residual_threshold", "floor_rel", "sub_angles", "support")
    try:
        det = wfdetect.DetectorConfig(**{k: cfg.params[k] for k in keys if k in cfg.params})
    except (TypeError, ValueError) as exc:
        raise cfg.error(f"[{cfg.command}]", f"bad detector settings: {exc}") from None
    bases = cfg.get("bases", [[0.0] * sample.dim])
    mode = cfg.get("mode", "wf")
    if mode == "two_point":
        rep = wfdetect.wf_detect_two_point(sample, det, bases)
    elif mode in ("wf", "pol"):
        rep = wfdetect.wf_detect(sample, det, bases)
    else:
        raise cfg.error("mode", f"unknown mode {mode!r}; expected wf, pol or two_point")
    entries = [{"base": e.base, "index": e.index, "direction": e.direction, "slope": e.slope,
                "residual": e.residual, "verdict": e.verdict, "reason": e.reason}
               for e in rep.entries]
    if mode == "two_point":
        for rec, cov in zip(entries, rep.meta["covectors"]):
            rec.update(cov)
    result = {"sample": sample.name, "eps": sample.eps, "entries": entries}
    if mode == "pol":
        result["polarization"] = [
            {"base": p.base, "index": p.index, "direction": p.direction,
             "fibre_re": p.fibre.real, "fibre_im": p.fibre.imag, "dominance": p.dominance}
            for p in wfdetect.pol_detect(sample, det, bases, rep)]
    path = out / "detect.json"
    io.write_json(path, result)
    return [str(path)]


def _named_metric(name: str) -> MetricSpec:
    if name == "minkowski":
        return MetricSpec.minkowski()
    if name == "schwarzschild":
        return MetricSpec.schwarzschild(1.0)
    if name == "frw_flat":
        return MetricSpec.frw_flat("power", a0=1.0, exponent=1.0)
    raise ConfigError(f"unknown verify metric {name!r}")


def cmd_verify(cfg: RunConfig, out: Path, jobs: int, seeds=None, names=None) -> list[str]:
    metrics = [_named_metric(m) for m in cfg.get("metrics", DEFAULT_VERIFY_METRICS)]
    names = names or cfg.get("checks", checks.CHECKS)
    unknown = [n for n in names if n not in checks.RUNNERS]
    if unknown:
        raise ConfigError(f"unknown checks {unknown}; available: {', '.join(checks.CHECKS)}")
    results = checks.run_checks(metrics, names, cfg.tolerances, tolerance_scale())
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.check:<18} {r.metric:<14} residual={r.residual:.3e} tol={r.tolerance:.1e}")
    path = out / "verify.json"
    io.write_json(path, [r.record() for r in results])
    cfg.params["_failed"] = sum(not r.passed for r in results)
    return [str(path)]


RUNNERS = {"propagate": cmd_propagate, "transport": cmd_transport, "predict": cmd_predict,
           "detect": cmd_detect, "verify": cmd_verify}


# --------------------------------------------------------------------------
# entry point


def _error(exc: Exception, code: int) -> int:
    rec = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, ConfigError):
        rec["line"], rec["column"] = exc.line, exc.column
    sys.stderr.write(json.dumps(rec, sort_keys=True) + "\n")
    return code


def _read_seeds(path: str) -> list[int]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read seed list {path!r}: {exc.strerror}") from None
    try:
        return [int(tok) for tok in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"seed list {path!r} must hold integers") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="microloc", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, metavar="PATH")
    p.add_argument("--out", default=None, metavar="DIR")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1, metavar="N")
    p.add_argument("--seed-list", default=None, metavar="PATH")
    p.add_argument("--checks", default=None, metavar="NAME[,NAME...]")
    p.add_argument("--format", choices=("csv", "json"), default=None)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        cfg = load_config(args.config, args.command)
        if args.format:
            cfg = replace(cfg, output=replace(cfg.output, format=args.format))
        out = Path(args.out or cfg.output.directory)
        out.mkdir(parents=True, exist_ok=True)
        seeds = _read_seeds(args.seed_list) if args.seed_list else None
        kwargs = {}
        if args.command == "verify" and args.checks:
            kwargs["names"] = [c.strip() for c in args.checks.split(",") if c.strip()]
        files = RUNNERS[args.command](cfg, out, max(1, args.jobs), seeds, **kwargs)
    except MicrolocError as exc:
        return _error(exc, exc.exit_code)
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        return _error(exc, 3)
    meta = {"command": args.command, "config": str(args.config), "version": __version__,
            "jobs": args.jobs, "files": sorted(Path(f).name for f in files),
            "elapsed_seconds": round(time.perf_counter() - t0, 3)}
    io.write_json(out / "run_meta.json", meta)
    return 1 if cfg.params.get("_failed") else 0


if __name__ == "__main__":
    sys.exit(main())
