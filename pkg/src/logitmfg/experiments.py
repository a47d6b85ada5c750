"""Reproduction studies: grid convergence, the discount-rate sweep and parameter scenarios."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import RunConfig
from .errors import IncompatibleResolution
from .gld import solve_gld_stationary
from .grid import avg_norm_diff, downsample_cell_average, max_norm_diff
from .mfg import extract_turnpike_slice, solve_mfg

Progress = Optional[Callable[[str], None]]


def _say(progress: Progress, msg: str):
    if progress is not None:
        progress(msg)


def stationary_density(cfg: RunConfig, n_x: Optional[int] = None, n_t: Optional[int] = None):
    """GLD stationary densities ``(I, n_x)`` for the config at the given resolution."""
    grid = cfg.grid(n_x, n_t)
    res = solve_gld_stationary(cfg.gld_config(grid, stride=0), cfg.initial_masses(grid, "gld"))
    return res.density


def turnpike_state(cfg: RunConfig, n_x: Optional[int] = None, n_t: Optional[int] = None,
                   delta: Optional[float] = None):
    """MFG densities and value function at mid-horizon, plus the iteration log."""
    grid = cfg.grid(n_x, n_t)
    over = {} if delta is None else {"delta": float(delta)}
    res = solve_mfg(cfg.mfg_config(grid, **over), cfg.initial_masses(grid, "mfg"))
    return (extract_turnpike_slice(res.density) / grid.dx,
            extract_turnpike_slice(res.value), res.log)


# -- grid convergence --------------------------------------------------------


@dataclass
class ConvergenceReport:
    scenario: str
    target: str
    reference_n_x: int
    coarse_ms: Tuple[int, ...]
    quantities: Tuple[str, ...]
    # errors[(m, quantity)] = (max-norm, avg-norm)
    errors: Dict[Tuple[int, str], Tuple[float, float]] = field(default_factory=dict)

    def series(self, quantity: str, norm: str = "max") -> List[float]:
        k = 0 if norm == "max" else 1
        return [self.errors[(m, quantity)][k] for m in self.coarse_ms]

    def rows(self):
        for m in self.coarse_ms:
            for qty in self.quantities:
                mx, av = self.errors[(m, qty)]
                yield m, qty, mx, av

    header = ("m", "quantity", "max_norm", "avg_norm")


def _quantities(cfg: RunConfig, target: str, n_x: int, n_t: int) -> Dict[str, np.ndarray]:
    I = len(cfg.resolved_masses())
    if target == "gld":
        p = stationary_density(cfg, n_x, n_t)
        return {f"p{i + 1}": p[i] for i in range(I)}
    p, phi, _ = turnpike_state(cfg, n_x, n_t)
    out = {f"p{i + 1}": p[i] for i in range(I)}
    out.update({f"phi{i + 1}": phi[i] for i in range(I)})
    return out


def compare_quantities(coarse: Dict[str, np.ndarray], fine: Dict[str, np.ndarray]):
    """Max and average norm differences after cell-averaging ``fine`` onto the coarse grid."""
    out = {}
    for name, c in coarse.items():
        f = downsample_cell_average(fine[name], c.shape[-1])
        out[name] = (max_norm_diff(c, f), avg_norm_diff(c, f))
    return out


def convergence_study(cfg: RunConfig, target: Optional[str] = None,
                      coarse_ms: Optional[Sequence[int]] = None,
                      reference_n_x: Optional[int] = None, *,
                      coarse_nt_per_cell: int = 120, reference_nt_per_cell: int = 240,
                      progress: Progress = None) -> ConvergenceReport:
    """Coarse runs at ``(n_t, n_x) = (120 m, m)`` against a fine reference at ``(240 N, N)``.

    Densities (and, for the MFG, value functions at mid-horizon) are compared
    after averaging the reference onto each coarse grid.
    """
    target = target or cfg.target
    coarse_ms = tuple(cfg.coarse_ms if coarse_ms is None else coarse_ms)
    ref_n = cfg.reference_n_x if reference_n_x is None else reference_n_x
    for m in coarse_ms:
        if m <= 0 or ref_n % m:
            raise IncompatibleResolution(f"{m} does not divide the reference resolution {ref_n}")
    _say(progress, f"reference run n_x={ref_n}")
    ref = _quantities(cfg, target, ref_n, reference_nt_per_cell * ref_n)
    report = ConvergenceReport(cfg.scenario, target, ref_n, coarse_ms, tuple(ref))
    for m in coarse_ms:
        _say(progress, f"coarse run n_x={m}")
        coarse = _quantities(cfg, target, m, coarse_nt_per_cell * m)
        for name, errs in compare_quantities(coarse, ref).items():
            report.errors[(m, name)] = errs
    return report


# -- discount-rate sweep -----------------------------------------------------


@dataclass
class DeltaSweepReport:
    deltas: Tuple[float, ...]
    distances: np.ndarray  # (n_delta, I) max-norm GLD vs mid-horizon MFG densities
    slope: Optional[float] = None
    intercept: Optional[float] = None
    iterations: Tuple[int, ...] = ()

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.deltas, self.deltas[1:])):
            raise ValueError("deltas must be strictly increasing")

    @property
    def header(self):
        return ("delta",) + tuple(f"dist_p{i + 1}" for i in range(self.distances.shape[1]))

    def rows(self):
        for d, row in zip(self.deltas, self.distances):
            yield (d,) + tuple(row)


def loglog_fit(x, y) -> Optional[Tuple[float, float]]:
    """Least-squares slope and intercept of ``log10 y`` against ``log10 x``; None if degenerate."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0)
    if keep.sum() < 2 or np.unique(x[keep]).size < 2:
        return None
    slope, intercept = np.polyfit(np.log10(x[keep]), np.log10(y[keep]), 1)
    return float(slope), float(intercept)


def delta_sweep(cfg: RunConfig, deltas: Optional[Sequence[float]] = None,
                eta: Optional[float] = None, *, progress: Progress = None) -> DeltaSweepReport:
    """Distance between the GLD stationary state and the MFG mid-horizon state as delta grows.

    The slope is fitted to the first type's distances.
    """
    deltas = tuple(float(d) for d in (cfg.deltas if deltas is None else deltas))
    if any(d <= 0 for d in deltas):
        raise ValueError("deltas must be positive")
    if eta is not None:
        cfg = cfg.replace(eta=float(eta))
    _say(progress, "GLD stationary state")
    p_gld = stationary_density(cfg)
    dist, iters = [], []
    for d in deltas:
        _say(progress, f"MFG delta={d:g}")
        p_mfg, _, log = turnpike_state(cfg, delta=d)
        dist.append(np.max(np.abs(p_gld - p_mfg), axis=1))
        iters.append(log.iterations)
    fit = loglog_fit(deltas, [row[0] for row in dist])
    return DeltaSweepReport(deltas, np.array(dist), *(fit or (None, None)), tuple(iters))


# -- parameter scenarios -----------------------------------------------------


@dataclass
class ScenarioSweepReport:
    parameter: str
    solver: str
    values: Tuple[float, ...]
    densities: Dict[str, np.ndarray]  # label -> (I, n_x)
    swap_ratios: Optional[Tuple[float, ...]] = None  # per-type median ratio base / swapped
    swap_spread: Optional[Tuple[float, ...]] = None  # per-type max relative deviation from the median

    def labels(self):
        return list(self.densities)


def _solve_slice(cfg: RunConfig, solver: str):
    if solver == "gld":
        return stationary_density(cfg)
    return turnpike_state(cfg)[0]


def mass_swap_ratio(base: np.ndarray, swapped: np.ndarray, floor: float = 1e-6):
    """Cellwise ratio ``p_i / p_i'`` on cells where both exceed ``floor``.

    Returns per-type (median ratio, max relative deviation from the median).
    """
    med, spread = [], []
    for a, b in zip(base, swapped):
        keep = (a > floor) & (b > floor)
        if not keep.any():
            med.append(math.nan)
            spread.append(math.nan)
            continue
        r = a[keep] / b[keep]
        m = float(np.median(r))
        med.append(m)
        spread.append(float(np.max(np.abs(r / m - 1.0))))
    return tuple(med), tuple(spread)


def scenario_sweep(cfg: RunConfig, parameter: Optional[str] = None,
                   values: Optional[Sequence[float]] = None, solver: Optional[str] = None,
                   *, mass_swap: bool = True, progress: Progress = None) -> ScenarioSweepReport:
    """Batch runs over ``m1`` (with ``m2 = 1 - m1``) or ``epsilon``.

    With ``mass_swap`` the base config is also run with its two masses
    exchanged and the cellwise density ratio is summarized.
    """
    parameter = parameter or cfg.sweep
    values = tuple(float(v) for v in (cfg.sweep_values if values is None else values))
    solver = solver or cfg.solver
    dens = {}
    for v in values:
        if parameter == "m1":
            run = cfg.replace(masses=(v, 1.0 - v))
        elif parameter == "epsilon":
            run = cfg.replace(epsilon=v)
        else:
            raise ValueError(f"unknown sweep parameter {parameter!r}")
        _say(progress, f"{solver} {parameter}={v:g}")
        dens[f"{parameter}={v:g}"] = _solve_slice(run, solver)
    report = ScenarioSweepReport(parameter, solver, values, dens)
    masses = cfg.resolved_masses()
    if mass_swap and len(masses) == 2:
        _say(progress, f"{solver} mass swap")
        base = _solve_slice(cfg, solver)
        swapped = _solve_slice(cfg.replace(masses=masses[::-1]), solver)
        report.swap_ratios, report.swap_spread = mass_swap_ratio(base, swapped)
    return report


def mass_fraction(density: np.ndarray, x: np.ndarray, lo: float = -math.inf, hi: float = math.inf,
                  dx: Optional[float] = None) -> np.ndarray:
    """Fraction of each type's mass on cells with centers in ``[lo, hi)``."""
    density = np.asarray(density)
    dx = (1.0 / density.shape[-1]) if dx is None else dx
    inside = (x >= lo) & (x < hi)
    return (density[..., inside].sum(axis=-1) * dx) / (density.sum(axis=-1) * dx)


def normalized_shapes(density: np.ndarray, dx: float) -> np.ndarray:
    """Densities rescaled to unit mass per type."""
    density = np.asarray(density)
    return density / (density.sum(axis=-1, keepdims=True) * dx)
