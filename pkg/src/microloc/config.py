"""Run configuration files.

Configs are TOML. A file may name its command (the command line wins
when both are given, and a mismatch is an error) and carries a ``[metric]``
table, a table named after the command, and optional ``[output]`` and
``[tolerances]`` tables::

    command = "propagate"

    [metric]
    name = "schwarzschild"      # minkowski | schwarzschild | frw_flat | custom
    mass = 1.0

    [propagate]
    x = [0.0, 8.0, 1.2, 0.3]
    direction = [0.3, 0.5, -0.2]  # frame spatial direction; or give xi
    tau = [0.0, 6.0]
    steps = 61

    [output]
    format = "csv"
    precision = 17

FRW metrics take ``family`` plus the family parameters; custom metrics
take ``coordinates`` and string components ``g00``, ``g01`` ... ``g33``
(upper triangle). Every other key is described next to the command that
reads it in :mod:`microloc.cli`.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .geometry import SCALE_FACTORS, MetricSpec

COMMANDS = ("propagate", "transport", "predict", "detect", "verify")
MIN_PRECISION = 12
DEFAULT_PRECISION = 17
TOLERANCE_ENV = "MICROLOC_TOLERANCE_SCALE"


@dataclass(frozen=True)
class OutputConfig:
    format: str = "csv"
    precision: int = DEFAULT_PRECISION
    directory: str = "."


@dataclass(frozen=True)
class RunConfig:
    command: str
    metric: MetricSpec
    params: dict
    output: OutputConfig = field(default_factory=OutputConfig)
    tolerances: dict = field(default_factory=dict)
    source: str = ""

    def locate(self, key: str) -> tuple[int | None, int | None]:
        return locate(self.source, key)

    def error(self, key: str, message: str) -> ConfigError:
        line, col = self.locate(key)
        return ConfigError(message, line, col)

    def get(self, key, default=None):
        return self.params.get(key, default)

    def require(self, key):
        if key not in self.params:
            line, col = locate(self.source, f"[{self.command}]")
            raise ConfigError(f"[{self.command}] is missing required key {key!r}", line, col)
        return self.params[key]

    def tolerance(self, name: str, default: float) -> float:
        return float(self.tolerances.get(name, default)) * tolerance_scale()


def tolerance_scale() -> float:
    raw = os.environ.get(TOLERANCE_ENV)
    if raw is None or raw == "":
        return 1.0
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"{TOLERANCE_ENV} must be a number, got {raw!r}") from None
    if not value > 0:
        raise ConfigError(f"{TOLERANCE_ENV} must be positive")
    return value


def locate(source: str, key: str) -> tuple[int | None, int | None]:
    """1-based line and column of the first occurrence of ``key`` as a key or header."""
    if key.startswith("["):
        pat = re.compile(r"^\s*" + re.escape(key) + r"\s*$")
    else:
        pat = re.compile(r"^\s*(" + re.escape(key) + r")\s*=")
    for n, line in enumerate(source.splitlines(), 1):
        m = pat.search(line)
        if m:
            return n, (m.start(1) if m.groups() else m.start()) + 1
    return None, None


def _metric(table: dict, source: str) -> MetricSpec:
    name = table.get("name")
    line, col = locate(source, "name")
    params = {k: v for k, v in table.items() if k != "name"}
    try:
        if name == "minkowski":
            return MetricSpec.minkowski()
        if name == "schwarzschild":
            if "mass" not in params:
                line, col = locate(source, "[metric]")
                raise ConfigError("schwarzschild metric needs 'mass'", line, col)
            return MetricSpec.schwarzschild(float(params["mass"]))
        if name == "frw_flat":
            family = params.pop("family", "power")
            if family not in SCALE_FACTORS:
                line, col = locate(source, "family")
                raise ConfigError(f"unknown scale-factor family {family!r}; "
                                  f"expected one of {sorted(SCALE_FACTORS)}", line, col)
            return MetricSpec.frw_flat(family, **{k: float(v) for k, v in params.items()})
        if name == "custom":
            coords = tuple(params.pop("coordinates", ("t", "x", "y", "z")))
            comps = {}
            for key, value in params.items():
                m = re.fullmatch(r"g([0-3])([0-3])", key)
                if not m:
                    kl, kc = locate(source, key)
                    raise ConfigError(f"unexpected custom metric key {key!r}", kl, kc)
                comps[tuple(sorted((int(m.group(1)), int(m.group(2)))))] = str(value)
            if not all((i, i) in comps for i in range(4)):
                line, col = locate(source, "[metric]")
                raise ConfigError("custom metric needs diagonal components g00..g33", line, col)
            return MetricSpec.custom(comps, coords)
    except ConfigError as exc:
        if exc.line is None:
            exc.line, exc.column = locate(source, "[metric]")
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad metric parameters: {exc}", *locate(source, "[metric]")) from None
    raise ConfigError(f"unknown metric {name!r}; expected minkowski, schwarzschild, frw_flat or custom",
                      line, col)


def parse_config(source: str, base_dir: str | os.PathLike = ".",
                 command: str | None = None) -> RunConfig:
    try:
        data = tomllib.loads(source)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+), column (\d+)", str(exc))
        line, col = (int(m.group(1)), int(m.group(2))) if m else (None, None)
        if m is None and "end of document" in str(exc):
            lines = source.splitlines() or [""]
            line, col = len(lines), len(lines[-1]) + 1
        raise ConfigError(f"syntax error: {exc}", line, col) from None
    named = data.get("command")
    if command is not None and named is not None and named != command:
        raise ConfigError(f"config is for {named!r} but {command!r} was requested",
                          *locate(source, "command"))
    command = command or named
    if command not in COMMANDS:
        raise ConfigError(f"'command' must be one of {', '.join(COMMANDS)}, got {command!r}",
                          *locate(source, "command"))
    if "metric" not in data and command not in ("detect", "verify"):
        raise ConfigError("missing [metric] table", 1, 1)
    metric = _metric(data.get("metric", {"name": "minkowski"}), source)
    out = data.get("output", {})
    precision = int(out.get("precision", DEFAULT_PRECISION))
    if precision < MIN_PRECISION or precision > DEFAULT_PRECISION:
        raise ConfigError(f"output precision must lie in [{MIN_PRECISION}, {DEFAULT_PRECISION}]",
                          *locate(source, "precision"))
    fmt = out.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"output format must be csv or json, got {fmt!r}", *locate(source, "format"))
    tols = data.get("tolerances", {})
    for k, v in tols.items():
        if not isinstance(v, (int, float)) or not v > 0:
            raise ConfigError(f"tolerance {k!r} must be a positive number", *locate(source, k))
    params = dict(data.get(command, {}))
    params["_base_dir"] = str(base_dir)
    return RunConfig(command, metric, params,
                     OutputConfig(fmt, precision, str(out.get("directory", "."))),
                     dict(tols), source)


def load_config(path: str | os.PathLike, command: str | None = None) -> RunConfig:
    path = Path(path)
    try:
        source = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {str(path)!r}: {exc.strerror}") from None
    return parse_config(source, path.parent, command)
