"""CVaR over weighted outcomes: smoothed objective, exact nonsmooth value and
the optimal anchor ``gamma`` of the smoothed problem.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .optim import bisect_root
from .smoothing import SmoothingParams, plus_smooth, plus_smooth_derivative


class DegenerateLevelWarning(UserWarning):
    """Raised for ``beta == 0``: the smoothed stationarity equation has no finite root."""


@dataclass(frozen=True)
class RiskSpec:
    beta: float

    def __post_init__(self):
        if not 0.0 <= self.beta < 1.0:
            raise ValueError(f"risk level beta must lie in [0, 1), got {self.beta}")

    @property
    def kappa(self) -> float:
        return 1.0 / (1.0 - self.beta)


@dataclass(frozen=True)
class WeightedOutcomes:
    values: np.ndarray
    weights: np.ndarray

    def __init__(self, values, weights=None, check: bool = True):
        values = np.asarray(values, dtype=float).ravel()
        if weights is None:
            weights = np.full(values.size, 1.0 / max(values.size, 1))
        weights = np.asarray(weights, dtype=float).ravel()
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)
        if check:
            self.validate()

    def validate(self):
        if self.values.size == 0:
            raise ValueError("empty outcome list")
        if self.values.shape != self.weights.shape:
            raise ValueError("values and weights differ in length")
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")
        if abs(self.weights.sum() - 1.0) > 1e-10:
            raise ValueError(f"weights sum to {self.weights.sum()!r}, expected 1")

    def mean(self) -> float:
        return float(self.weights @ self.values)


def cvar_smoothed(o: WeightedOutcomes, r: RiskSpec, gamma: float, p: SmoothingParams) -> float:
    """``gamma + kappa * sum(w * (J - gamma)_{+,delta})``."""
    return float(gamma + r.kappa * (o.weights @ plus_smooth(o.values - gamma, p)))


def cvar_exact(o: WeightedOutcomes, r: RiskSpec) -> tuple[float, float]:
    """Exact CVaR and a minimizing anchor (the weighted beta-quantile).

    The Rockafellar-Uryasev function of ``gamma`` is convex piecewise linear with
    kinks at the outcome values; its slope ``1 - kappa * P(J > gamma)`` changes
    sign at the first sorted value whose cumulative weight reaches ``beta``.
    """
    order = np.argsort(o.values, kind="stable")
    v = o.values[order]
    cum = np.cumsum(o.weights[order])
    k = int(np.searchsorted(cum, r.beta - 1e-15, side="left"))
    k = min(k, v.size - 1)
    gamma = float(v[k])
    value = gamma + r.kappa * float(o.weights @ np.maximum(o.values - gamma, 0.0))
    return value, gamma


def stationarity_residual(o: WeightedOutcomes, r: RiskSpec, gamma: float,
                          p: SmoothingParams) -> float:
    """``1 - kappa * sum(w * A_delta(J - gamma))``, increasing in ``gamma``."""
    return float(1.0 - r.kappa * (o.weights @ plus_smooth_derivative(o.values - gamma, p)))


def solve_gamma(o: WeightedOutcomes, r: RiskSpec, p: SmoothingParams, tol: float = 1e-10) -> float:
    """Minimize the smoothed CVaR objective over ``gamma`` by bisection."""
    if r.beta == 0.0:
        warnings.warn("beta = 0 has no finite stationary anchor; returning min(J)",
                      DegenerateLevelWarning, stacklevel=2)
        return float(o.values.min())
    f = lambda g: stationarity_residual(o, r, g, p)
    lo, hi = float(o.values.min()), float(o.values.max())
    k = 0
    while f(lo) > 0.0:
        lo -= p.delta * 2.0 ** k
        k += 1
        if k > 200:
            raise RuntimeError("could not bracket the anchor from below")
    k = 0
    while f(hi) < 0.0:
        hi += p.delta * 2.0 ** k
        k += 1
        if k > 200:
            raise RuntimeError("could not bracket the anchor from above")
    return bisect_root(f, lo, hi, tol)
