"""Mean-field utilities of the aggregate form U_i(x) = F_i(x, {sum_m G_j(x_m) mu_j,m}_j).

Every model is vectorized over leading batch axes: densities of shape
``(..., I, n_x)`` map to utilities of the same shape.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import EvaluationError, UnsupportedModel, UtilityBoundExceeded
from .grid import GridSpec


def ordered_sum(a: np.ndarray) -> np.ndarray:
    """Sum over the last axis strictly in ascending index order."""
    a = np.asarray(a)
    if a.shape[-1] == 0:
        return np.zeros(a.shape[:-1])
    return np.cumsum(a, axis=-1)[..., -1]


class UtilityModel:
    """Generic evaluator for utilities built from per-type aggregates.

    Parameters
    ----------
    n_types
        Number of player types I.
    weights
        ``weights(x)`` returns ``G_j(x)`` with shape ``(I, n)`` (or ``(n,)``
        when every type shares the same weight).
    combine
        ``combine(x, agg)`` maps centers ``(n,)`` and aggregates ``(..., I)``
        to utilities ``(..., I, n)``.
    bound
        Analytic sup-bound L with ``|U| <= L`` on admissible densities.
    nonnegative
        True when U >= 0 everywhere (tightens the value-function bounds).
    regularity
        Hoelder/Lipschitz constant; together with ``bound`` it enters the
        in-domain check for the deformed exponential. Defaults to ``bound``.
    potential
        Optional ``potential(mu, grid) -> float`` diagnostic.
    """

    def __init__(
        self,
        n_types: int,
        weights: Callable[[np.ndarray], np.ndarray],
        combine: Callable[[np.ndarray, np.ndarray], np.ndarray],
        bound: float,
        *,
        nonnegative: bool = False,
        regularity: Optional[float] = None,
        name: str = "custom",
        potential: Optional[Callable] = None,
        potential_authoritative: bool = True,
    ):
        self.n_types = int(n_types)
        self.weights = weights
        self.combine = combine
        self.bound = float(abs(bound))
        self.nonnegative = bool(nonnegative)
        self.regularity = self.bound if regularity is None else float(regularity)
        self.name = name
        self.potential = potential
        self.potential_authoritative = potential_authoritative

    def __repr__(self):
        return f"UtilityModel(name={self.name!r}, n_types={self.n_types}, bound={self.bound:g})"

    @property
    def assumption_constant(self) -> float:
        """Single constant covering both the bound and the regularity."""
        return max(self.bound, self.regularity)

    def aggregates(self, mu: np.ndarray, grid: GridSpec) -> np.ndarray:
        x = grid.centers
        g = np.asarray(self.weights(x), dtype=float)
        if g.ndim == 1:
            g = np.broadcast_to(g, (self.n_types, x.size))
        return ordered_sum(g * mu)

    def evaluate(self, mu: np.ndarray, grid: GridSpec) -> np.ndarray:
        mu = np.asarray(mu, dtype=float)
        if mu.shape[-2:] != (self.n_types, grid.n_x):
            raise EvaluationError(
                f"density shape {mu.shape} incompatible with I={self.n_types}, n_x={grid.n_x}"
            )
        try:
            agg = self.aggregates(mu, grid)
            u = np.asarray(self.combine(grid.centers, agg), dtype=float)
        except EvaluationError:
            raise
        except Exception as exc:  # surface evaluator failures uniformly
            raise EvaluationError(f"{self.name} utility failed: {exc}") from exc
        if u.shape != mu.shape:
            u = np.broadcast_to(u, mu.shape).copy()
        return u


def eval_utility_grid(model: UtilityModel, mu: np.ndarray, grid: GridSpec, check: bool = True) -> np.ndarray:
    """Utilities ``U[i, l]`` (or batched) for the given cell masses.

    With ``check`` the analytic bound ``|U| <= L`` is asserted.
    """
    u = model.evaluate(mu, grid)
    if not np.all(np.isfinite(u)):
        raise EvaluationError(f"{model.name} utility produced non-finite values")
    if check:
        worst = float(np.max(np.abs(u))) if u.size else 0.0
        if worst > model.bound * (1 + 1e-12) + 1e-14:
            raise UtilityBoundExceeded(
                f"|U| reached {worst:.6g}, above the declared bound {model.bound:.6g}"
            )
    return u


def utility_bound_L(model: UtilityModel) -> float:
    return model.bound


def potential_value(model: UtilityModel, mu: np.ndarray, grid: GridSpec) -> float:
    if model.potential is None:
        raise UnsupportedModel(f"no potential function for model {model.name!r}")
    return float(model.potential(np.asarray(mu, dtype=float), grid))


# -- concrete models ---------------------------------------------------------


def constant_utility(c, n_types: int = 1) -> UtilityModel:
    """U_i(x) = c_i, independent of the population state."""
    cs = np.broadcast_to(np.asarray(c, dtype=float), (n_types,)).copy()

    def combine(x, agg):
        return np.broadcast_to(cs[:, None], agg.shape + (x.size,))

    return UtilityModel(
        n_types,
        lambda x: np.zeros_like(x),
        combine,
        bound=float(np.max(np.abs(cs))),
        nonnegative=bool(np.all(cs >= 0)),
        regularity=0.0,
        name="constant",
    )


@dataclass(frozen=True)
class FishingParams:
    alpha: float = 0.5
    beta: float = 2.0
    kappa: float = 0.1
    masses: tuple = (0.7, 0.3)

    def __post_init__(self):
        if not self.alpha > 0 or not self.beta > 0:
            raise ValueError("alpha and beta must be positive")
        if not self.kappa >= 0:
            raise ValueError("kappa must be nonnegative")
        if len(self.masses) != 2:
            raise ValueError("the fishing model has exactly two types")

    @property
    def penalty_factors(self) -> np.ndarray:
        m1, m2 = self.masses
        return np.array([1.0, 1.0 + self.kappa * m1 / m2])


def fishing_utility(params: FishingParams) -> UtilityModel:
    """Legal (type 1) and illegal (type 2) anglers choosing an arrival intensity.

    U_i(x) = x^alpha - beta x f_i * mean_arrival, where f_2 carries the
    detection penalty kappa m_1/m_2 and mean_arrival = sum_m x_m (mu_1 + mu_2)_m.
    """
    f = params.penalty_factors
    alpha, beta = params.alpha, params.beta

    def weights(x):
        return x

    def combine(x, agg):
        mean_arrival = agg.sum(axis=-1)
        cost = beta * x * mean_arrival[..., None, None] * f[:, None]
        return x**alpha - cost

    bound = 1.0 + beta * f[1]

    def potential(mu, grid):
        # nonauthoritative: as written, the penalty factor depends on a free type index;
        # it is applied to the type-2 part of the quadratic term here
        x = grid.centers
        total = mu[..., 0, :] + mu[..., 1, :]
        gain = ordered_sum(x**alpha * total)
        a1 = ordered_sum(x * mu[..., 0, :])
        a2 = ordered_sum(x * mu[..., 1, :])
        return gain - 0.5 * beta * (a1 + a2) * (a1 + f[1] * a2)

    return UtilityModel(
        2,
        weights,
        combine,
        bound=bound,
        nonnegative=False,
        regularity=max(1.0, alpha) + beta * f[1],
        name="fishing",
        potential=potential,
        potential_authoritative=False,
    )


def smooth_indicator(x, x_hat: float, epsilon: float):
    """Regularized indicator of ``x <= x_hat``: ``(1 + tanh((x_hat - x)/epsilon))/2``."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    return 0.5 * (1.0 + np.tanh((x_hat - np.asarray(x, dtype=float)) / epsilon))


@dataclass(frozen=True)
class TourismParams:
    theta: float = 1.0
    gamma: tuple = (0.01, 0.1)
    x_hat: float = 0.65
    epsilon: float = 1e-6
    masses: tuple = (0.8, 0.2)

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError("theta must be positive")
        if not 0 < self.x_hat < 1:
            raise ValueError("x_hat must lie in (0, 1)")
        if len(self.gamma) != 2 or not self.gamma[0] < self.gamma[1]:
            raise ValueError("gamma must be two travel costs with gamma_1 < gamma_2")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if len(self.masses) != 2:
            raise ValueError("the tourism model has exactly two types")


def tourism_utility(params: TourismParams) -> UtilityModel:
    """Residents (type 1) and tourists (type 2) sharing a site with an overtourism threshold.

    The congestion aggregate integrates ``1 - I_eps(y <= x_hat)`` against the
    total population over the action variable y.
    """
    theta, x_hat, eps = params.theta, params.x_hat, params.epsilon
    gamma = np.asarray(params.gamma, dtype=float)

    def weights(x):
        return 1.0 - smooth_indicator(x, x_hat, eps)

    def combine(x, agg):
        congestion = agg.sum(axis=-1)
        attract = smooth_indicator(x, x_hat, eps)
        return attract / (theta + congestion[..., None, None]) - gamma[:, None] * x

    def potential(mu, grid):
        x = grid.centers
        over = 1.0 - smooth_indicator(x, x_hat, eps)
        total = mu[..., 0, :] + mu[..., 1, :]
        travel = ordered_sum(x * (gamma[0] * mu[..., 0, :] + gamma[1] * mu[..., 1, :]))
        return -np.log(theta + ordered_sum(over * total)) - travel

    lipschitz = max(1.0 / (2.0 * eps * theta) + float(gamma.max()), 1.0 / theta**2)
    return UtilityModel(
        2,
        weights,
        combine,
        bound=1.0 / theta + float(gamma.max()),
        nonnegative=False,
        regularity=lipschitz,
        name="tourism",
        potential=potential,
    )

