"""Run configuration: a sectioned ``key = value`` text format.

Example::

    [run]
    spec_version = 1
    solver = mfg
    scenario = fishing

    [tsallis]
    q = 0.8
    eta = 0.01

Unset keys take the defaults listed in :data:`SCHEMA`; scenario-specific
defaults (masses) are filled in by :meth:`RunConfig.resolved_masses`.
"""
from __future__ import annotations

import configparser
import dataclasses
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

from .errors import LogitMFGError, ParseError, ValidationError
from .grid import GridSpec, PopulationSpec, init_density
from .tsallis import TsallisParams
from .utility import (
    FishingParams,
    TourismParams,
    UtilityModel,
    constant_utility,
    fishing_utility,
    tourism_utility,
)

SPEC_VERSION = 1
SOLVERS = ("gld", "mfg")
SCENARIOS = ("fishing", "tourism", "custom")
DEFAULT_MASSES = {"fishing": (0.7, 0.3), "tourism": (0.8, 0.2), "custom": (1.0,)}


@dataclass(frozen=True)
class RunConfig:
    spec_version: int = SPEC_VERSION
    solver: str = "gld"
    scenario: str = "fishing"
    out_dir: str = "out"
    stride: int = 0
    # tsallis
    q: float = 0.8
    eta: float = 0.01
    # grid
    n_x: int = 150
    n_t: Optional[int] = None
    horizon: float = 240.0
    init: Optional[str] = None
    # population
    masses: Optional[Tuple[float, ...]] = None
    # fishing
    alpha: float = 0.5
    beta: float = 2.0
    kappa: float = 0.1
    # tourism
    theta: float = 1.0
    gamma: Tuple[float, ...] = (0.01, 0.1)
    x_hat: float = 0.65
    epsilon: float = 1e-6
    # custom (state-independent utilities)
    constant: Tuple[float, ...] = (0.0,)
    # gld
    stationary_tol: float = 1e-10
    max_steps: int = 10_000_000
    norm: str = "max"
    # mfg
    delta: float = 1.0
    relaxation: float = 0.5
    iter_tol: float = 1e-10
    max_iters: int = 200
    # solver switches
    strict_cfl: Optional[bool] = None
    parallel: bool = False
    # experiments
    target: str = "gld"
    coarse_ms: Tuple[int, ...] = (50, 100, 150)
    reference_n_x: int = 300
    deltas: Tuple[float, ...] = (1.0, 5.0, 10.0, 25.0, 50.0, 100.0)
    sweep: str = "m1"
    sweep_values: Tuple[float, ...] = (0.5, 0.7, 0.9)

    # -- derived objects ------------------------------------------------------

    def resolved_masses(self) -> Tuple[float, ...]:
        return self.masses if self.masses is not None else DEFAULT_MASSES[self.scenario]

    def resolved_n_t(self, n_x: Optional[int] = None) -> int:
        n_x = self.n_x if n_x is None else n_x
        if self.n_t is not None and n_x == self.n_x:
            return self.n_t
        return int(round(self.horizon * n_x))

    def tsallis(self) -> TsallisParams:
        return TsallisParams(self.q, self.eta)

    def grid(self, n_x: Optional[int] = None, n_t: Optional[int] = None) -> GridSpec:
        n_x = self.n_x if n_x is None else n_x
        return GridSpec(n_x, self.resolved_n_t(n_x) if n_t is None else n_t, float(self.horizon))

    def pops(self) -> PopulationSpec:
        return PopulationSpec(self.resolved_masses())

    def model(self) -> UtilityModel:
        m = self.resolved_masses()
        if self.scenario == "fishing":
            return fishing_utility(FishingParams(self.alpha, self.beta, self.kappa, m))
        if self.scenario == "tourism":
            return tourism_utility(TourismParams(self.theta, self.gamma, self.x_hat, self.epsilon, m))
        c = self.constant
        if len(c) not in (1, len(m)):
            raise ValueError(f"constant needs 1 or {len(m)} values, got {len(c)}")
        return constant_utility(c, len(m))

    def init_profile(self, solver: Optional[str] = None) -> str:
        if self.init is not None:
            return self.init
        return "tilted" if (solver or self.solver) == "gld" and self.scenario == "fishing" else "uniform"

    def initial_masses(self, grid: GridSpec, solver: Optional[str] = None):
        return init_density(grid, self.pops(), self.init_profile(solver))

    def gld_config(self, grid: Optional[GridSpec] = None, **over):
        from .gld import GldConfig

        kw = dict(stationary_tol=self.stationary_tol, max_steps=self.max_steps, norm=self.norm,
                  strict_cfl=self.strict_cfl, stride=self.stride, parallel=self.parallel)
        kw.update(over)
        return GldConfig(self.tsallis(), grid or self.grid(), self.pops(), self.model(), **kw)

    def mfg_config(self, grid: Optional[GridSpec] = None, **over):
        from .mfg import MfgConfig

        kw = dict(delta=self.delta, relaxation=self.relaxation, iter_tol=self.iter_tol,
                  max_iters=self.max_iters, strict_cfl=self.strict_cfl, parallel=self.parallel)
        kw.update(over)
        return MfgConfig(self.tsallis(), grid or self.grid(), self.pops(), self.model(), **kw)

    def replace(self, **changes) -> "RunConfig":
        return validate(dataclasses.replace(self, **changes))


# key -> (section, kind)
SCHEMA = {
    "spec_version": ("run", "int"),
    "solver": ("run", "str"),
    "scenario": ("run", "str"),
    "out_dir": ("run", "str"),
    "stride": ("run", "int"),
    "q": ("tsallis", "float"),
    "eta": ("tsallis", "float"),
    "n_x": ("grid", "int"),
    "n_t": ("grid", "int?"),
    "horizon": ("grid", "float"),
    "init": ("grid", "str?"),
    "masses": ("population", "floats?"),
    "alpha": ("fishing", "float"),
    "beta": ("fishing", "float"),
    "kappa": ("fishing", "float"),
    "theta": ("tourism", "float"),
    "gamma": ("tourism", "floats"),
    "x_hat": ("tourism", "float"),
    "epsilon": ("tourism", "float"),
    "constant": ("custom", "floats"),
    "stationary_tol": ("gld", "float"),
    "max_steps": ("gld", "int"),
    "norm": ("gld", "str"),
    "delta": ("mfg", "float"),
    "relaxation": ("mfg", "float"),
    "iter_tol": ("mfg", "float"),
    "max_iters": ("mfg", "int"),
    "strict_cfl": ("solver", "bool?"),
    "parallel": ("solver", "bool"),
    "target": ("experiment", "str"),
    "coarse_ms": ("experiment", "ints"),
    "reference_n_x": ("experiment", "int"),
    "deltas": ("experiment", "floats"),
    "sweep": ("experiment", "str"),
    "sweep_values": ("experiment", "floats"),
}
SECTIONS = tuple(dict.fromkeys(sec for sec, _ in SCHEMA.values()))
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}
_NONE = {"", "none", "auto"}


def _convert(key: str, kind: str, raw: str, line: Optional[int]):
    text = raw.strip()
    optional = kind.endswith("?")
    kind = kind.rstrip("?")
    if optional and text.lower() in _NONE:
        return None
    try:
        if kind == "str":
            if not text:
                raise ValueError("empty value")
            return text
        if kind == "int":
            return int(text)
        if kind == "float":
            v = float(text)
            if not math.isfinite(v):
                raise ValueError("not finite")
            return v
        if kind == "bool":
            low = text.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError("expected true or false")
        parts = [p for p in re.split(r"[,\s]+", text.strip("()[] ")) if p]
        if not parts:
            raise ValueError("empty list")
        if kind == "ints":
            return tuple(int(p) for p in parts)
        vals = tuple(float(p) for p in parts)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("not finite")
        return vals
    except ValueError as exc:
        raise ParseError(key, f"cannot read {text!r} as {kind}: {exc}", line) from None


def _key_lines(text: str) -> dict:
    """Map ``(section, key)`` to its 1-based line number."""
    lines = {}
    section = None
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip().lower()
            continue
        m = re.match(r"([^=:]+?)\s*[=:]", s)
        if m and section is not None:
            lines[(section, m.group(1).strip().lower())] = no
    return lines


def parse_config(source: Union[str, Path]) -> RunConfig:
    """Parse a config file path (or the config text itself) into a validated RunConfig."""
    if isinstance(source, Path) or not any(ch in source for ch in "\n[=") and source.strip():
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise ParseError("config", f"cannot read {str(source)!r}: {exc.strerror}") from None
    else:
        text = source
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ParseError("<syntax>", str(exc).splitlines()[0], getattr(exc, "lineno", None)) from None
    lines = _key_lines(text)
    values, where = {}, {}
    for section in cp.sections():
        sec = section.lower()
        if sec not in SECTIONS:
            raise ParseError(f"[{section}]", "unknown section", lines.get((sec, None)))
        for key, raw in cp.items(section):
            line = lines.get((sec, key))
            if key not in SCHEMA:
                raise ParseError(key, f"unknown key in [{section}]", line)
            if SCHEMA[key][0] != sec:
                raise ParseError(key, f"belongs in [{SCHEMA[key][0]}], not [{section}]", line)
            values[key] = _convert(key, SCHEMA[key][1], raw, line)
            where[key] = line
    if values.get("spec_version", SPEC_VERSION) != SPEC_VERSION:
        raise ValidationError("spec_version", f"unsupported version {values['spec_version']}",
                              where.get("spec_version"))
    return validate(RunConfig(**values), where)


def validate(cfg: RunConfig, where: Optional[dict] = None) -> RunConfig:
    """Check every constituent invariant; raise ValidationError naming the key."""
    where = where or {}

    def fail(key, reason):
        raise ValidationError(key, reason, where.get(key))

    if cfg.solver not in SOLVERS:
        fail("solver", f"must be one of {', '.join(SOLVERS)}")
    if cfg.scenario not in SCENARIOS:
        fail("scenario", f"must be one of {', '.join(SCENARIOS)}")
    if cfg.stride < 0:
        fail("stride", "must be nonnegative")
    for key in ("q", "eta"):
        if not getattr(cfg, key) > 0:
            fail(key, "must be positive")
    try:
        cfg.grid()
    except LogitMFGError as exc:
        fail("n_t" if "n_t" in str(exc) else ("horizon" if "horizon" in str(exc) else "n_x"), str(exc))
    if cfg.init is not None and cfg.init not in ("uniform", "tilted"):
        fail("init", "must be uniform or tilted")
    try:
        pops = cfg.pops()
    except LogitMFGError as exc:
        fail("masses", str(exc))
    if cfg.scenario in ("fishing", "tourism") and pops.n_types != 2:
        fail("masses", f"the {cfg.scenario} scenario has exactly two types")
    try:
        cfg.model()
    except (ValueError, LogitMFGError) as exc:
        key = {"alpha": "alpha", "beta": "beta", "kappa": "kappa", "theta": "theta",
               "gamma": "gamma", "x_hat": "x_hat", "epsilon": "epsilon", "constant": "constant"}
        hit = next((k for k in key if k in str(exc)), "constant" if cfg.scenario == "custom" else cfg.scenario)
        fail(hit, str(exc))
    if not cfg.stationary_tol > 0:
        fail("stationary_tol", "must be positive")
    if cfg.max_steps <= 0:
        fail("max_steps", "must be positive")
    if cfg.norm not in ("max", "avg"):
        fail("norm", "must be max or avg")
    if not cfg.delta > 0:
        fail("delta", "must be positive")
    if not 0 < cfg.relaxation <= 1:
        fail("relaxation", "must lie in (0, 1]")
    if not cfg.iter_tol > 0:
        fail("iter_tol", "must be positive")
    if cfg.max_iters <= 0:
        fail("max_iters", "must be positive")
    if cfg.target not in SOLVERS:
        fail("target", f"must be one of {', '.join(SOLVERS)}")
    if cfg.reference_n_x <= 0 or any(m <= 0 or cfg.reference_n_x % m for m in cfg.coarse_ms):
        fail("coarse_ms", f"every resolution must divide reference_n_x={cfg.reference_n_x}")
    if any(d <= 0 for d in cfg.deltas) or any(b <= a for a, b in zip(cfg.deltas, cfg.deltas[1:])):
        fail("deltas", "must be positive and strictly increasing")
    if cfg.sweep not in ("m1", "epsilon"):
        fail("sweep", "must be m1 or epsilon")
    if cfg.sweep == "m1" and any(not 0 < v < 1 for v in cfg.sweep_values):
        fail("sweep_values", "m1 values must lie in (0, 1)")
    if cfg.sweep == "epsilon" and any(v <= 0 for v in cfg.sweep_values):
        fail("sweep_values", "epsilon values must be positive")
    return cfg


def _fmt(kind: str, value) -> str:
    kind = kind.rstrip("?")
    if value is None:
        return "none"
    if kind == "bool":
        return "true" if value else "false"
    if kind == "float":
        return repr(float(value))
    if kind in ("floats", "ints"):
        return ", ".join(repr(v) for v in value)
    return str(value)


def serialize_config(cfg: RunConfig) -> str:
    """Text form that :func:`parse_config` reads back to an equal RunConfig."""
    out = []
    for section in SECTIONS:
        out.append(f"[{section}]")
        for key, (sec, kind) in SCHEMA.items():
            if sec == section:
                out.append(f"{key} = {_fmt(kind, getattr(cfg, key))}")
        out.append("")
    return "\n".join(out)
