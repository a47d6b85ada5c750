"""Tsallis deformed exponential/logarithm and the associated divergence cost.

All functions accept scalars or numpy arrays. ``q == 1`` is selected by exact
comparison; there is no blending near the classical branch.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, UndefinedDeformedExp


@dataclass(frozen=True)
class TsallisParams:
    """Entropic index ``q`` and uncertainty scale ``eta``.

    ``utility_bound`` is optional; when given, :attr:`guaranteed` records
    whether the in-domain margin ``1 - 2|1-q| L / eta`` is positive.
    """

    q: float
    eta: float
    utility_bound: float | None = None

    def __post_init__(self):
        if not (self.q > 0 and math.isfinite(self.q)):
            raise DomainError(f"q must be positive and finite, got {self.q}")
        if not (self.eta > 0 and math.isfinite(self.eta)):
            raise DomainError(f"eta must be positive and finite, got {self.eta}")
        if self.utility_bound is not None and self.utility_bound < 0:
            raise DomainError("utility_bound must be nonnegative")

    @property
    def classical(self) -> bool:
        return self.q == 1.0

    def assumption2_margin(self, L: float) -> float:
        return 1.0 - 2.0 * abs(1.0 - self.q) * L / self.eta

    def assumption2_holds(self, L: float) -> bool:
        return self.classical or self.assumption2_margin(L) > 0

    @property
    def guaranteed(self) -> bool:
        """False when the params sit outside the guaranteed regime for ``utility_bound``."""
        if self.utility_bound is None:
            return True
        return self.assumption2_holds(self.utility_bound)


def _q_of(params):
    return params.q if isinstance(params, TsallisParams) else float(params)


def exp_q(z, params):
    """Deformed exponential ``(1 + (1-q) z)_+^{1/(1-q)}``.

    ``params`` may be a :class:`TsallisParams` or a bare ``q``. Raises
    :class:`UndefinedDeformedExp` wherever ``q > 1`` and the base is
    nonpositive.
    """
    q = _q_of(params)
    scalar = np.ndim(z) == 0
    z = np.asarray(z, dtype=float)
    if q == 1.0:
        out = np.exp(z)
    else:
        base = 1.0 + (1.0 - q) * z
        if q > 1.0:
            if np.any(base <= 0):
                raise UndefinedDeformedExp(
                    f"exp_q undefined for q={q}: 1 + (1-q) z <= 0 "
                    f"(min z with bad base: {z[base <= 0].min()})"
                )
            out = base ** (1.0 / (1.0 - q))
        else:
            out = np.where(base > 0, np.maximum(base, 0.0) ** (1.0 / (1.0 - q)), 0.0)
    return float(out) if scalar else out


def ln_q(y, params):
    """Deformed logarithm ``(y^{1-q} - 1)/(1-q)``; inverse of :func:`exp_q`."""
    q = _q_of(params)
    scalar = np.ndim(y) == 0
    y = np.asarray(y, dtype=float)
    if np.any(~(y > 0)):
        raise DomainError("ln_q requires y > 0")
    if q == 1.0:
        out = np.log(y)
    else:
        out = (y ** (1.0 - q) - 1.0) / (1.0 - q)
    return float(out) if scalar else out


def phi_cost(u, params: TsallisParams):
    """Generalized divergence cost of distorting the uniform measure by ``u``.

    Nonnegative and convex on ``u >= 0``, zero only at ``u = 1``.
    """
    q, eta = params.q, params.eta
    scalar = np.ndim(u) == 0
    u = np.asarray(u, dtype=float)
    if np.any(~(u >= 0)):
        raise DomainError("phi_cost requires u >= 0")
    if q == 1.0:
        with np.errstate(divide="ignore", invalid="ignore"):
            ulogu = np.where(u > 0, u * np.log(np.where(u > 0, u, 1.0)), 0.0)
        out = eta * (ulogu - u + 1.0)
    else:
        out = eta * (1.0 - u**q + q * (u - 1.0)) / (1.0 - q)
    return float(out) if scalar else out


def theta_bar(L: float, params: TsallisParams) -> float:
    """Uniform bound ``{exp_q(2L/eta) / exp_q(-2L/eta)}^q`` on outflow rates.

    Returns ``math.inf`` when no finite bound exists (denominator clipped to
    zero for q < 1, or numerator undefined for q > 1).
    """
    if L < 0:
        raise DomainError("L must be nonnegative")
    z = 2.0 * L / params.eta
    try:
        num = exp_q(z, params)
    except UndefinedDeformedExp:
        return math.inf
    den = exp_q(-z, params)
    if den <= 0 or not math.isfinite(num):
        return math.inf
    ratio = num / den
    if not math.isfinite(ratio):
        return math.inf
    return ratio**params.q
