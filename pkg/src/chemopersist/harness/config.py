"""Run and sweep configuration files.

Flat INI-style text, one section per concern::

    [grid]
    dim = 1
    lengths = 1.0          # length units
    cells = 128

    [params]               # all eleven constants, rates in 1/time
    chi1 = 1.0
    ...
    lambda = 1.0

    [initial.u]
    kind = gaussian        # homogeneous | gaussian | bumps | random | file
    center = 0.3
    width = 0.08
    amplitude = 1.5
    background = 0.2

    [run]
    t_final = 100          # time units

Optional sections: ``[control]``, ``[guards]``, ``[diagnostics]``,
``[threshold]``, ``[output]`` and, for sweeps, ``[sweep]``.  Unknown sections
or keys are errors.
"""

from __future__ import annotations

import configparser
import itertools
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from ..dynamics import Guards, StepControl
from ..elliptic import ModelParams
from ..grid import Grid, build_grid


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


PARAM_KEYS = {"chi1": "chi1", "chi2": "chi2", "a1": "a1", "a2": "a2", "b1": "b1", "b2": "b2",
              "c1": "c1", "c2": "c2", "mu": "mu", "nu": "nu", "lambda": "lam", "lam": "lam"}

IC_KEYS = {
    "homogeneous": {"value"},
    "gaussian": {"center", "width", "amplitude", "background"},
    "bumps": {"count", "seed", "width", "amplitude", "background"},
    "random": {"seed", "low", "high"},
    "file": {"path"},
}

SECTIONS = {
    "grid": {"dim", "lengths", "cells"},
    "params": set(PARAM_KEYS),
    "initial.u": {"kind"} | set().union(*IC_KEYS.values()),
    "initial.v": {"kind"} | set().union(*IC_KEYS.values()),
    "control": {"dt_max", "cfl_advection", "cfl_reaction", "positivity_floor"},
    "run": {"t_final", "allow_single_species"},
    "guards": {"sup_factor", "mass_factor", "sup_limit", "mass_limit"},
    "diagnostics": {"p", "q", "theta", "cadence", "band", "burn_in"},
    "threshold": {"B_min", "B_max", "beta_min", "beta_max", "resolution", "iterations"},
    "output": {"csv", "summary"},
}
SWEEP_OPTIONS = {"simulate", "workers", "output"}
REQUIRED = ["grid", "params", "initial.u", "initial.v", "run"]


@dataclass(frozen=True)
class InitialSpec:
    kind: str
    options: tuple[tuple[str, Any], ...] = ()

    def get(self, key: str, default=None):
        return dict(self.options).get(key, default)


@dataclass(frozen=True)
class DiagnosticsSpec:
    p: float | None = None
    q: float | None = None  # None: take q from the threshold search
    theta: float | None = None
    cadence: int = 10
    band: float = 0.05
    burn_in: float = 50.0


@dataclass(frozen=True)
class RunConfig:
    grid: Grid
    params: ModelParams
    initial_u: InitialSpec
    initial_v: InitialSpec
    t_final: float
    control: StepControl = StepControl()
    guards: Guards = Guards()
    diagnostics: DiagnosticsSpec = DiagnosticsSpec()
    threshold: tuple[tuple[str, Any], ...] = ()
    allow_single_species: bool = False
    csv_path: Path | None = None
    summary_path: Path | None = None
    base_dir: Path = field(default=Path("."), compare=False)

    def with_params(self, **changes: float) -> "RunConfig":
        return replace(self, params=replace(self.params, **changes))

    def with_output_dir(self, directory: str | Path) -> "RunConfig":
        """Rebase relative output paths onto ``directory``."""
        def rebase(path):
            return None if path is None or path.is_absolute() else Path(directory) / path
        return replace(self, csv_path=rebase(self.csv_path) or self.csv_path,
                       summary_path=rebase(self.summary_path) or self.summary_path)


@dataclass(frozen=True)
class SweepConfig:
    base: RunConfig
    axes: tuple[tuple[tuple[str, ...], tuple[float, ...]], ...]
    simulate: bool = True
    workers: int | None = None
    output: Path | None = None

    def points(self) -> list[dict[str, float]]:
        """Cartesian product of the axes, first axis varying slowest."""
        out = []
        for combo in itertools.product(*(values for _, values in self.axes)):
            point: dict[str, float] = {}
            for (names, _), value in zip(self.axes, combo):
                for name in names:
                    point[name] = value
            out.append(point)
        return out


_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")


def _line_index(text: str) -> dict[tuple[str, str], int]:
    index: dict[tuple[str, str], int] = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1).strip()
            index[(section, "")] = lineno
            continue
        m = _KEY_RE.match(line)
        if m and section is not None and not line[0].isspace():
            index[(section, m.group(1).strip())] = lineno
    return index


def _scalar(token: str):
    token = token.strip()
    low = token.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    for cast in (int, float):
        try:
            return cast(token)
        except ValueError:
            pass
    return token


def parse_value(raw: str):
    raw = raw.strip()
    if raw.startswith("[") and raw.endswith("]"):
        raw = raw[1:-1]
    if "," in raw:
        return [_scalar(tok) for tok in raw.split(",") if tok.strip()]
    return _scalar(raw)


def _as_list(value) -> list:
    return value if isinstance(value, list) else [value]


class _Reader:
    def __init__(self, text: str):
        self.index = _line_index(text)
        parser = configparser.ConfigParser(
            inline_comment_prefixes=("#", ";"), interpolation=None, default_section="__none__"
        )
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(str(exc).splitlines()[0], getattr(exc, "lineno", None)) from exc
        self.parser = parser

    def line(self, section: str, key: str = "") -> int | None:
        return self.index.get((section, key)) or self.index.get((section, ""))

    def fail(self, message: str, section: str, key: str = ""):
        raise ConfigError(message, self.line(section, key))

    def section(self, name: str) -> dict[str, Any]:
        if not self.parser.has_section(name):
            return {}
        return {k: parse_value(v) for k, v in self.parser.items(name)}

    def number(self, section: str, key: str, value, kind=float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(f"[{section}] {key} must be a number, got {value!r}", section, key)
        if kind is int and int(value) != value:
            self.fail(f"[{section}] {key} must be an integer", section, key)
        return kind(value)


def _check_keys(reader: _Reader, allowed_sections: set[str]) -> None:
    for section in reader.parser.sections():
        if section not in SECTIONS and section not in allowed_sections:
            reader.fail(f"unknown section [{section}]", section)
        if section in SECTIONS:
            for key in reader.parser.options(section):
                if key not in SECTIONS[section]:
                    reader.fail(f"unknown key {key!r} in [{section}]", section, key)


def _build(reader: _Reader, base_dir: Path) -> RunConfig:
    for name in REQUIRED:
        if not reader.parser.has_section(name):
            raise ConfigError(f"missing required section [{name}]")

    g = reader.section("grid")
    try:
        dim = reader.number("grid", "dim", g.get("dim", 1), int)
        lengths = [reader.number("grid", "lengths", x) for x in _as_list(g.get("lengths", 1.0))]
        cells = [reader.number("grid", "cells", x, int) for x in _as_list(g["cells"])]
        if len(lengths) == 1 and dim == 2:
            lengths *= 2
        if len(cells) == 1 and dim == 2:
            cells *= 2
        grid = build_grid(dim, lengths, cells)
    except KeyError as exc:
        reader.fail(f"[grid] needs key {exc.args[0]!r}", "grid")
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        reader.fail(f"invalid grid: {exc}", "grid")

    raw = reader.section("params")
    values = {}
    for key, value in raw.items():
        values[PARAM_KEYS[key]] = reader.number("params", key, value)
    missing = [k for k in ModelParams.names() if k not in values]
    if missing:
        reader.fail(f"[params] is missing {', '.join(missing)}", "params")
    try:
        params = ModelParams(**values)
    except ValueError as exc:
        reader.fail(f"invalid parameters: {exc}", "params")

    initial = []
    for species in ("u", "v"):
        sec = f"initial.{species}"
        raw = reader.section(sec)
        kind = raw.pop("kind", None)
        if kind not in IC_KEYS:
            reader.fail(f"[{sec}] kind must be one of {sorted(IC_KEYS)}, got {kind!r}", sec, "kind")
        for key in raw:
            if key not in IC_KEYS[kind]:
                reader.fail(f"key {key!r} does not apply to kind {kind!r}", sec, key)
        if kind in ("bumps", "random") and "seed" not in raw:
            reader.fail(f"[{sec}] kind {kind!r} requires a seed", sec)
        if kind == "file":
            if "path" not in raw:
                reader.fail(f"[{sec}] kind 'file' requires a path", sec)
            raw["path"] = str((base_dir / str(raw["path"])).resolve())
        options = tuple(sorted((k, tuple(v) if isinstance(v, list) else v) for k, v in raw.items()))
        initial.append(InitialSpec(kind, options))

    run = reader.section("run")
    if "t_final" not in run:
        reader.fail("[run] needs t_final", "run")
    t_final = reader.number("run", "t_final", run["t_final"])
    if t_final <= 0:
        reader.fail("t_final must be positive", "run", "t_final")

    def typed(section: str, spec: dict[str, type]) -> dict[str, Any]:
        out = {}
        for key, value in reader.section(section).items():
            kind = spec.get(key, float)
            if kind is bool:
                if not isinstance(value, bool):
                    reader.fail(f"[{section}] {key} must be true or false", section, key)
                out[key] = value
            elif value == "auto":
                continue
            else:
                out[key] = reader.number(section, key, value, kind)
        return out

    try:
        control = StepControl(**typed("control", {}))
        guards = Guards(**typed("guards", {}))
        diagnostics = DiagnosticsSpec(**typed("diagnostics", {"cadence": int}))
        if diagnostics.q is not None and diagnostics.q <= 0:
            raise ValueError("q must be positive")
        if diagnostics.theta is not None and not 0 < diagnostics.theta < 1:
            raise ValueError("theta must lie in (0, 1)")
        if diagnostics.cadence < 1:
            raise ValueError("cadence must be a positive step count")
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid value: {exc}") from exc
    threshold = tuple(sorted(typed("threshold", {"resolution": int, "iterations": int}).items()))

    out = reader.section("output")
    # outputs are relative to the working directory, inputs to the config file
    csv_path = Path(str(out["csv"])) if "csv" in out else None
    summary_path = Path(str(out["summary"])) if "summary" in out else None
    single = run.get("allow_single_species", False)
    if not isinstance(single, bool):
        reader.fail("allow_single_species must be true or false", "run", "allow_single_species")
    return RunConfig(grid, params, initial[0], initial[1], t_final, control, guards, diagnostics,
                     threshold, single, csv_path, summary_path, base_dir)


def parse_config(text: str, base_dir: str | Path = ".") -> RunConfig:
    """Parse and validate a run configuration."""
    reader = _Reader(text)
    _check_keys(reader, set())
    if reader.parser.has_section("sweep"):
        reader.fail("[sweep] belongs in a sweep configuration", "sweep")
    return _build(reader, Path(base_dir))


def parse_sweep(text: str, base_dir: str | Path = ".") -> SweepConfig:
    """Parse a run configuration plus a ``[sweep]`` section.

    Every ``[sweep]`` key other than ``simulate``, ``workers`` and ``output``
    is an axis: a parameter name, or several joined by ``+`` to tie them to
    one value list (``a1+a2 = 0.1, 0.3``).
    """
    reader = _Reader(text)
    _check_keys(reader, {"sweep"})
    if not reader.parser.has_section("sweep"):
        raise ConfigError("a sweep configuration needs a [sweep] section")
    base = _build(reader, Path(base_dir))
    axes, options = [], {}
    for key, value in reader.section("sweep").items():
        if key in SWEEP_OPTIONS:
            options[key] = value
            continue
        names = tuple(PARAM_KEYS.get(n.strip(), "") for n in key.split("+"))
        if not all(names):
            reader.fail(f"sweep axis {key!r} does not name model parameters", "sweep", key)
        vals = tuple(reader.number("sweep", key, x) for x in _as_list(value))
        axes.append((names, vals))
    if not axes:
        reader.fail("[sweep] needs at least one axis", "sweep")
    simulate = options.get("simulate", True)
    if not isinstance(simulate, bool):
        reader.fail("simulate must be true or false", "sweep", "simulate")
    workers = options.get("workers")
    if workers is not None:
        workers = reader.number("sweep", "workers", workers, int)
    output = Path(str(options["output"])) if "output" in options else None
    return SweepConfig(base, tuple(axes), simulate, workers, output)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), path.parent)


def load_sweep(path: str | Path) -> SweepConfig:
    path = Path(path)
    return parse_sweep(path.read_text(encoding="utf-8"), path.parent)
