"""Explicit time stepping of the generalized logit dynamic."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._kernels import get_kernels
from .errors import (
    CflViolation,
    CflWarning,
    MassConservationLost,
    NonFiniteValue,
    NonnegativityLost,
    NotConverged,
    ShapeMismatch,
    UndefinedDeformedExp,
)
from .grid import GridSpec, PopulationSpec
from .tsallis import TsallisParams, exp_q, theta_bar
from .utility import UtilityModel, eval_utility_grid


def logit_kernel(values: np.ndarray, params: TsallisParams, grid: GridSpec) -> np.ndarray:
    """Deformed-softmax kernel ``K[m, l] = E(v_m - v_l) / sum_o E(v_o - v_l) dx``.

    Column l is the distribution of destinations m for a player currently at l;
    ``sum_m K[m, l] dx == 1``.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size != grid.n_x:
        raise ShapeMismatch(f"expected a slice of length {grid.n_x}, got shape {v.shape}")
    if params.q == 1.0:
        # column independent; evaluated shifted to avoid overflow
        s = np.exp((v - v.max()) / params.eta)
        col = s / (s.sum() * grid.dx)
        return np.repeat(col[:, None], v.size, axis=1)
    e = exp_q((v[:, None] - v[None, :]) / params.eta, params)
    return e / (e.sum(axis=0) * grid.dx)[None, :]


def gld_transition_kernel(u_slice: np.ndarray, params: TsallisParams, grid: GridSpec) -> np.ndarray:
    """Logit kernel built from one type's utility slice."""
    return logit_kernel(u_slice, params, grid)


def _check_kernel_domain(bad: int, params: TsallisParams):
    if bad:
        raise UndefinedDeformedExp(
            f"{bad} deformed-exponential arguments out of domain (q={params.q}, eta={params.eta})"
        )


def fp_rate_bound(L: float, params: TsallisParams) -> Optional[float]:
    """Largest positivity-preserving time step ``1/theta_bar(L)``; None when unbounded."""
    tb = theta_bar(L, params)
    if not math.isfinite(tb):
        return None
    return 1.0 / tb


def _transport_all(ks, values, mu, params, grid, out):
    c = (1.0 - params.q) / params.eta
    z = np.empty(grid.n_x)
    for i in range(mu.shape[0]):
        v = np.ascontiguousarray(values[i])
        bad = ks.colsum(v, c, params.q, params.eta, grid.dx, z)
        bad += ks.transport(v, z, np.ascontiguousarray(mu[i]), c, params.q, params.eta,
                            grid.dt, grid.dx, out[i])
        _check_kernel_domain(bad, params)
    return out


def _assert_nonnegative(mu, where=""):
    if np.any(mu < 0):
        raise NonnegativityLost(f"negative cell mass {mu.min():.3e}{where}")


def gld_step(mu, u, params: TsallisParams, grid: GridSpec, pops: Optional[PopulationSpec] = None,
             *, parallel: bool = False, check: bool = True) -> np.ndarray:
    """One explicit step of the logit dynamic for all types.

    ``mu`` and ``u`` have shape ``(I, n_x)``. The same compiled transport as
    the stationary solver is used. When ``check`` is set the result is
    asserted finite and nonnegative.
    """
    mu = np.asarray(mu, dtype=float)
    u = np.asarray(u, dtype=float)
    if mu.ndim == 1:
        return gld_step(mu[None], u[None], params, grid, pops, parallel=parallel, check=check)[0]
    if mu.shape != u.shape or mu.shape[-1] != grid.n_x:
        raise ShapeMismatch(f"mu {mu.shape} and U {u.shape} must both be (I, {grid.n_x})")
    if pops is not None and mu.shape[0] != pops.n_types:
        raise ShapeMismatch(f"expected {pops.n_types} types, got {mu.shape[0]}")
    out = np.empty_like(mu)
    _transport_all(get_kernels(params.q, parallel), u, mu, params, grid, out)
    if check:
        if not np.all(np.isfinite(out)):
            raise NonFiniteValue("non-finite cell mass after GLD step")
        _assert_nonnegative(out)
    return out


@dataclass
class GldConfig:
    params: TsallisParams
    grid: GridSpec
    pops: PopulationSpec
    model: UtilityModel
    stationary_tol: float = 1e-10
    max_steps: int = 1_000_000
    norm: str = "max"
    strict_cfl: Optional[bool] = None
    stride: int = 0
    parallel: bool = False

    def __post_init__(self):
        if not self.stationary_tol > 0:
            raise ValueError("stationary_tol must be positive")
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")
        if self.norm not in ("max", "avg"):
            raise ValueError("norm must be 'max' or 'avg'")
        if self.model.n_types != self.pops.n_types:
            raise ValueError("model and population disagree on the number of types")


@dataclass
class GldResult:
    mu: np.ndarray
    steps: int
    residual: float
    converged: bool
    grid: GridSpec
    times: list = field(default_factory=list)
    trajectory: list = field(default_factory=list)
    dt_fp: Optional[float] = None
    strict: bool = False

    @property
    def density(self) -> np.ndarray:
        return self.mu / self.grid.dx

    def trajectory_array(self) -> np.ndarray:
        """Stored snapshots as ``(I, n_snapshots, n_x)``."""
        if not self.trajectory:
            return np.empty((self.mu.shape[0], 0, self.mu.shape[1]))
        return np.stack(self.trajectory, axis=1)


def _resolve_strict(strict, params, model):
    if strict is None:
        return params.assumption2_holds(model.assumption_constant)
    return bool(strict)


def solve_gld_stationary(config: GldConfig, mu0) -> GldResult:
    """Step the GLD until successive densities differ by less than ``stationary_tol``.

    Utilities are re-evaluated from the current masses at every step. Raises
    :class:`NotConverged` (with the partial result attached) after
    ``max_steps`` steps.
    """
    params, grid, pops, model = config.params, config.grid, config.pops, config.model
    mu = np.array(mu0, dtype=float, copy=True)
    if mu.shape != (pops.n_types, grid.n_x):
        raise ShapeMismatch(f"initial masses must be ({pops.n_types}, {grid.n_x}), got {mu.shape}")
    _assert_nonnegative(mu, " in initial condition")

    strict = _resolve_strict(config.strict_cfl, params, model)
    dt_fp = fp_rate_bound(model.bound, params)
    if dt_fp is None or grid.dt > dt_fp:
        msg = (f"dt={grid.dt:.4g} exceeds the positivity bound "
               f"{'(none available)' if dt_fp is None else f'{dt_fp:.4g}'}")
        if strict:
            raise CflViolation(msg)
        warnings.warn(msg, CflWarning, stacklevel=2)

    ks = get_kernels(params.q, config.parallel)
    masses = pops.as_array()
    nxt = np.empty_like(mu)
    times, traj = [], []
    if config.stride:
        times.append(0.0)
        traj.append(mu.copy())
    residual = math.inf
    steps = 0
    converged = False
    mass_tol = 1e-12 + 1e-15 * config.max_steps
    while steps < config.max_steps:
        u = eval_utility_grid(model, mu, grid)
        _transport_all(ks, u, mu, params, grid, nxt)
        steps += 1
        diff = np.abs(nxt - mu)
        residual = float(diff.max() if config.norm == "max" else diff.mean()) / grid.dx
        if not math.isfinite(residual):
            raise NonFiniteValue(f"non-finite masses at step {steps}")
        _assert_nonnegative(nxt, f" at step {steps}")
        mu, nxt = nxt, mu
        if config.stride and steps % config.stride == 0:
            times.append(steps * grid.dt)
            traj.append(mu.copy())
        if residual < config.stationary_tol:
            converged = True
            break
    drift = float(np.max(np.abs(mu.sum(axis=1) - masses)))
    if drift > mass_tol:
        raise MassConservationLost(f"mass drifted by {drift:.3e} over {steps} steps")
    if config.stride and (not times or times[-1] != steps * grid.dt):
        times.append(steps * grid.dt)
        traj.append(mu.copy())
    result = GldResult(mu, steps, residual, converged, grid, times, traj, dt_fp, strict)
    if not converged:
        raise NotConverged(
            f"GLD not stationary after {steps} steps (residual {residual:.3e})",
            residual=residual, result=result,
        )
    return result


def stationarity_defect(mu: np.ndarray, model: UtilityModel, params: TsallisParams,
                        grid: GridSpec) -> np.ndarray:
    """Cellwise inflow minus outflow ``(m_i L_i - theta_i mu_i)`` per unit time, in density units."""
    u = eval_utility_grid(model, mu, grid)
    out = np.empty_like(mu)
    for i in range(mu.shape[0]):
        k = logit_kernel(u[i], params, grid) ** params.q
        inflow = k @ mu[i] * grid.dx
        outflow = k.sum(axis=0) * grid.dx * mu[i]
        out[i] = (inflow - outflow) / grid.dx
    return out
