"""Finite-horizon mean field game: backward value sweep, forward density sweep
and the relaxed alternating fixed-point iteration that couples them."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

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
    ValueBoundViolated,
)
from .gld import fp_rate_bound, logit_kernel
from .grid import DensityField, GridSpec, PopulationSpec, ValueField
from .tsallis import TsallisParams
from .utility import UtilityModel, eval_utility_grid


@dataclass
class MfgConfig:
    params: TsallisParams
    grid: GridSpec
    pops: PopulationSpec
    model: UtilityModel
    delta: float = 1.0
    relaxation: float = 0.5
    iter_tol: float = 1e-10
    max_iters: int = 200
    strict_cfl: Optional[bool] = None
    parallel: bool = False

    def __post_init__(self):
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise ValueError("delta must be positive")
        if not 0 < self.relaxation <= 1:
            raise ValueError("relaxation must lie in (0, 1]")
        if not self.iter_tol > 0:
            raise ValueError("iter_tol must be positive")
        if self.max_iters <= 0:
            raise ValueError("max_iters must be positive")
        if self.model.n_types != self.pops.n_types:
            raise ValueError("model and population disagree on the number of types")

    @property
    def weight(self) -> float:
        """Utility weight in the running reward; tied to the discount rate."""
        return self.delta


@dataclass
class IterationLog:
    residuals: List[float] = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.residuals)

    def log10_fit(self, skip: int = 0) -> Optional[Tuple[float, float]]:
        """Least-squares ``log10(eps_r) = slope * r + intercept`` over iterations ``r > skip``.

        None when fewer than two usable residuals exist.
        """
        r = np.arange(1, self.iterations + 1)[skip:]
        e = np.asarray(self.residuals[skip:], dtype=float)
        keep = e > 0
        if keep.sum() < 2:
            return None
        slope, intercept = np.polyfit(r[keep], np.log10(e[keep]), 1)
        return float(slope), float(intercept)


@dataclass
class CflLimits:
    dt_hjb: float
    dt_fp: Optional[float]
    assumption2_ok: bool

    def __iter__(self):
        return iter((self.dt_hjb, self.dt_fp, self.assumption2_ok))

    def fp_ok(self, dt: float) -> bool:
        return self.dt_fp is not None and dt <= self.dt_fp


def cfl_limits(model: UtilityModel, params: TsallisParams, delta: float) -> CflLimits:
    """Sufficient time-step bounds for the value sweep and the density sweep.

    ``dt_fp`` is None when no positivity guarantee is available.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    return CflLimits(
        1.0 / (1.0 + delta),
        fp_rate_bound(model.bound, params),
        params.assumption2_holds(model.assumption_constant),
    )


def _check(bad, params):
    if bad:
        raise UndefinedDeformedExp(
            f"{bad} deformed-exponential arguments out of domain (q={params.q}, eta={params.eta})"
        )


def hjb_backward_step(phi_next, u, params: TsallisParams, delta: float, grid: GridSpec) -> np.ndarray:
    """Value slice at step k from the slice at k+1 and the utilities at k."""
    v = np.ascontiguousarray(phi_next, dtype=float)
    u = np.ascontiguousarray(u, dtype=float)
    if v.shape != (grid.n_x,) or u.shape != v.shape:
        raise ShapeMismatch(f"slices must have length {grid.n_x}")
    ks = get_kernels(params.q)
    out = np.empty_like(v)
    z = np.empty_like(v)
    _check(ks.hjb(v, u, (1.0 - params.q) / params.eta, params.q, params.eta, float(delta),
                  grid.dt, grid.dx, z, out), params)
    if not np.all(np.isfinite(out)):
        raise NonFiniteValue("non-finite value after backward step")
    return out


def optimal_control_kernel(phi, params: TsallisParams, grid: GridSpec) -> np.ndarray:
    """Optimal re-sampling kernel ``K[m, l]`` built from the value slice."""
    return logit_kernel(phi, params, grid)


def fp_forward_step(mu, kernel, params: TsallisParams, grid: GridSpec, *, strict: bool = True) -> np.ndarray:
    """Advance one type's cell masses with a given kernel matrix ``K[m, l]``."""
    mu = np.asarray(mu, dtype=float)
    k = np.asarray(kernel, dtype=float) ** params.q
    if k.shape != (mu.size, mu.size):
        raise ShapeMismatch(f"kernel shape {k.shape} does not match {mu.size} cells")
    inflow = (k @ mu) * grid.dx
    outflow = (k.sum(axis=0) * grid.dx) * mu
    out = mu + grid.dt * (inflow - outflow)
    if strict and np.any(out < 0):
        raise NonnegativityLost(f"negative cell mass {out.min():.3e}")
    return out


@dataclass
class MfgResult:
    density: DensityField
    value: ValueField
    log: IterationLog
    limits: CflLimits
    strict: bool

    @property
    def grid(self) -> GridSpec:
        return self.density.grid


def _utility_field(model, M, grid):
    # model evaluation is batched over leading axes as (..., I, n)
    u = eval_utility_grid(model, np.moveaxis(M, 0, 1), grid)
    return np.ascontiguousarray(np.moveaxis(u, 1, 0))


def solve_mfg(config: MfgConfig, mu0, *, initial_guess=None, progress=None) -> MfgResult:
    """Relaxed alternating iteration for the coupled value/density system.

    ``mu0`` holds initial cell masses ``(I, n_x)``. The default initial guess
    is ``mu0`` repeated in time with a zero value function; ``initial_guess``
    may supply ``(Phi, M)`` fields of shape ``(I, n_t + 1, n_x)`` instead.
    ``progress(r, eps)`` is called after each iteration.
    """
    params, grid, pops, model = config.params, config.grid, config.pops, config.model
    I, n, nt = pops.n_types, grid.n_x, grid.n_t
    mu0 = np.asarray(mu0, dtype=float)
    if mu0.shape != (I, n):
        raise ShapeMismatch(f"initial masses must be ({I}, {n}), got {mu0.shape}")
    if np.any(mu0 < 0):
        raise NonnegativityLost("negative initial cell mass")

    limits = cfl_limits(model, params, config.delta)
    strict = params.assumption2_holds(model.assumption_constant) if config.strict_cfl is None \
        else bool(config.strict_cfl)
    problems = []
    if grid.dt > limits.dt_hjb:
        problems.append(f"dt={grid.dt:.4g} exceeds the value bound {limits.dt_hjb:.4g}")
    if not limits.fp_ok(grid.dt):
        bound = "none available" if limits.dt_fp is None else f"{limits.dt_fp:.4g}"
        problems.append(f"dt={grid.dt:.4g} exceeds the positivity bound ({bound})")
    if problems:
        if strict:
            raise CflViolation("; ".join(problems))
        warnings.warn("; ".join(problems), CflWarning, stacklevel=2)

    shape = (I, nt + 1, n)
    if initial_guess is None:
        Phi = np.zeros(shape)
        M = np.repeat(mu0[:, None, :], nt + 1, axis=1)
    else:
        Phi = np.array(initial_guess[0], dtype=float)
        M = np.array(initial_guess[1], dtype=float)
        if Phi.shape != shape or M.shape != shape:
            raise ShapeMismatch(f"initial guess fields must have shape {shape}")
    Phi_new = np.zeros(shape)
    M_new = np.empty(shape)
    Z = np.empty(shape)

    ks = get_kernels(params.q, config.parallel)
    c = (1.0 - params.q) / params.eta
    q, eta, dt, dx, delta = params.q, params.eta, grid.dt, grid.dx, float(config.delta)
    sig = config.relaxation
    masses = pops.as_array()
    mass_tol = 1e-12 + 1e-15 * nt
    L = model.bound
    lo = 0.0 if model.nonnegative else -L
    log = IterationLog()

    for r in range(1, config.max_iters + 1):
        U = _utility_field(model, M, grid)
        for i in range(I):
            Phi_new[i, nt] = 0.0
            _check(ks.backward_sweep(Phi_new[i], U[i], Z[i], c, q, eta, delta, dt, dx), params)
        del U
        if not np.all(np.isfinite(Phi_new)):
            raise NonFiniteValue(f"non-finite value function at iteration {r}")
        if grid.dt <= limits.dt_hjb:
            tol = 1e-12 * max(L, 1.0)
            if Phi_new.min() < lo - tol or Phi_new.max() > L + tol:
                raise ValueBoundViolated(
                    f"value function range [{Phi_new.min():.6g}, {Phi_new.max():.6g}] "
                    f"leaves [{lo:.6g}, {L:.6g}] at iteration {r}"
                )
        for i in range(I):
            M_new[i, 0] = mu0[i]
            _check(ks.forward_sweep(Phi_new[i], Z[i], M_new[i], c, q, eta, dt, dx), params)
        if not np.all(np.isfinite(M_new)):
            raise NonFiniteValue(f"non-finite density at iteration {r}")
        worst = M_new.min()
        if worst < 0:
            raise NonnegativityLost(f"negative cell mass {worst:.3e} at iteration {r}")
        drift = float(np.max(np.abs(M_new.sum(axis=2) - masses[:, None])))
        if drift > mass_tol:
            raise MassConservationLost(f"mass drifted by {drift:.3e} at iteration {r}")

        eps = max(float(np.max(np.abs(Phi_new - Phi))), float(np.max(np.abs(M_new - M))) / dx)
        log.residuals.append(eps)
        if progress is not None:
            progress(r, eps)
        if eps <= config.iter_tol:
            log.converged = True
            Phi, M = Phi_new, M_new
            break
        # new <- sig * new + (1 - sig) * old, for both fields
        for new, old in ((Phi_new, Phi), (M_new, M)):
            new *= sig
            old *= 1.0 - sig
            old += new

    result = MfgResult(DensityField(M, grid), ValueField(Phi, grid), log, limits, strict)
    if not log.converged:
        raise NotConverged(
            f"alternating iteration not converged after {log.iterations} iterations "
            f"(residual {log.residuals[-1]:.3e})",
            residual=log.residuals[-1], log=log, result=result,
        )
    return result


def turnpike_index(grid: GridSpec) -> int:
    """Index of the mid-horizon slice; the lower neighbour when n_t is odd."""
    return grid.n_t // 2


def extract_turnpike_slice(fld, grid: Optional[GridSpec] = None) -> np.ndarray:
    """Per-type slice at ``t = T/2`` of a density or value field."""
    grid = fld.grid if grid is None else grid
    return np.array(fld.slice(turnpike_index(grid)))

