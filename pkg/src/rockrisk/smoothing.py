"""Mollified positive part ``(x)_{+,delta}`` and its derivative.

Only the logistic (Chen-Mangasarian) kernel ``zeta(x) = e^{-x} (1 + e^{-x})^{-2}``
is provided. For this kernel the smoothing integrates in closed form to the
softplus ``x + delta * ln(1 + e^{-x/delta})`` and its derivative is the
logistic sigmoid.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import expit


class Kernel(enum.Enum):
    LOGISTIC_CM = "logistic_cm"


@dataclass(frozen=True)
class SmoothingParams:
    delta: float = 1e-3
    kernel: Kernel = Kernel.LOGISTIC_CM

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"smoothing level delta must be positive, got {self.delta}")


def kernel_density(sigma, kernel: Kernel = Kernel.LOGISTIC_CM):
    """Evaluate the generating density ``zeta``."""
    if kernel is not Kernel.LOGISTIC_CM:
        raise ValueError(f"unsupported kernel {kernel!r}")
    s = np.abs(np.asarray(sigma, dtype=float))
    # symmetric; written in terms of |s| so exp never overflows
    e = np.exp(-s)
    return e / (1.0 + e) ** 2


def plus_smooth(x, p: SmoothingParams):
    """Smoothed positive part, evaluated without overflow for any ``x / delta``."""
    x = np.asarray(x, dtype=float)
    d = p.delta
    out = np.maximum(x, 0.0) + d * np.log1p(np.exp(-np.abs(x) / d))
    return out if out.ndim else float(out)


def plus_smooth_derivative(x, p: SmoothingParams):
    """Derivative ``A_delta(x) = 1 / (1 + exp(-x / delta))``."""
    out = expit(np.asarray(x, dtype=float) / p.delta)
    return out if np.ndim(out) else float(out)


def uniform_bound_constants(p: SmoothingParams) -> tuple[float, float]:
    """Constants ``(Delta1, Delta2)`` of the two-sided uniform bound.

    ``-delta * Delta1 <= (x)_{+,delta} - max(x, 0) <= delta * Delta2`` holds for all x.
    The integrals are computed by adaptive quadrature of the kernel.
    """
    zeta = lambda s: float(kernel_density(s, p.kernel))
    mass, _ = integrate.quad(zeta, -np.inf, np.inf)
    first, _ = integrate.quad(lambda s: s * zeta(s), -np.inf, np.inf)
    neg, _ = integrate.quad(lambda s: -s * zeta(s), -np.inf, 0.0)
    if not (np.isfinite(mass) and np.isfinite(first) and np.isfinite(neg)):
        raise ValueError("kernel moments are not finite")
    if abs(mass - 1.0) > 1e-8:
        raise ValueError(f"kernel does not integrate to one (got {mass})")
    # the first moment vanishes by symmetry; clip quadrature round-off
    delta1 = max(first, 0.0)
    if delta1 < 1e-12:
        delta1 = 0.0
    return delta1, neg
