"""Scenario sets, corruption, densities on ``[0, v_max]``, Gauss-Legendre rules
and the one-dimensional Sobol (van der Corput) sequence.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np


@dataclass
class ScenarioSet:
    """Sample points with probability masses.

    ``base_measure`` holds the positive weights ``a_i`` that turn point values of
    a density (or of ``1/N``) into masses: ``weights = a * p``. It is 1 for plain
    samples and the quadrature weight for quadrature nodes.
    """

    points: np.ndarray
    weights: np.ndarray
    corrupted_mask: np.ndarray
    base_measure: np.ndarray = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        n = self.points.shape[0]
        self.weights = np.asarray(self.weights, dtype=float)
        self.corrupted_mask = np.asarray(self.corrupted_mask, dtype=bool)
        if self.base_measure is None:
            self.base_measure = np.ones(n)
        self.base_measure = np.asarray(self.base_measure, dtype=float)
        if not (self.weights.shape == (n,) and self.corrupted_mask.shape == (n,)
                and self.base_measure.shape == (n,)):
            raise ValueError("scenario arrays differ in length")
        if np.any(self.weights < 0):
            raise ValueError("negative scenario weight")
        if abs(self.weights.sum() - 1.0) > 1e-10:
            raise ValueError(f"scenario weights sum to {self.weights.sum()!r}")
        if np.any(self.base_measure <= 0):
            raise ValueError("base measure must be positive")

    def __len__(self):
        return self.points.shape[0]

    @property
    def base_values(self) -> np.ndarray:
        """Unperturbed point values ``p = weights / a`` (``1/N`` or density values)."""
        return self.weights / self.base_measure

    def with_weights(self, weights) -> "ScenarioSet":
        return replace(self, weights=np.asarray(weights, dtype=float))

    def to_csv(self, path):
        pts = self.points.reshape(len(self), -1)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index"] + [f"xi_{j}" for j in range(pts.shape[1])]
                       + ["weight", "base_measure", "corrupted"])
            for i in range(len(self)):
                w.writerow([i] + [repr(float(v)) for v in pts[i]]
                           + [repr(float(self.weights[i])), repr(float(self.base_measure[i])),
                              int(self.corrupted_mask[i])])

    @classmethod
    def from_csv(cls, path) -> "ScenarioSet":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        body = rows[1:]
        pts = np.array([[float(v) for v in r[1:-3]] for r in body])
        if pts.shape[1] == 1:
            pts = pts[:, 0]
        return cls(pts, np.array([float(r[-3]) for r in body]),
                   np.array([r[-1] == "1" for r in body]),
                   np.array([float(r[-2]) for r in body]))


def sample_gaussian_scenarios(n: int, d: int, seed: int) -> ScenarioSet:
    """``n`` iid standard normal ``d``-vectors drawn from a Philox stream."""
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    rng = np.random.Generator(np.random.Philox(seed))
    pts = rng.standard_normal((n, d))
    return ScenarioSet(pts, np.full(n, 1.0 / n), np.zeros(n, dtype=bool))


def corrupt_by_scaling(s: ScenarioSet, fraction: float, factor: float = 5.0) -> ScenarioSet:
    """Scale the first ``round(fraction * N)`` points by ``factor`` and flag them."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"corruption fraction must be in [0, 1], got {fraction}")
    n = len(s)
    m = int(round(fraction * n))
    pts = s.points.copy()
    pts[:m] = s.points[:m] * factor
    mask = np.zeros(n, dtype=bool)
    mask[:m] = True
    return replace(s, points=pts, corrupted_mask=mask)


# --------------------------------------------------------------------------
# densities
# --------------------------------------------------------------------------

class DensityKind(enum.Enum):
    TRUNC_EXP = "trunc_exp"
    ALGEBRAIC = "algebraic"
    MIXTURE = "mixture"


@dataclass(frozen=True)
class DensitySpec:
    kind: DensityKind = DensityKind.TRUNC_EXP
    k: float = 0.25
    a: float = 5.0
    w: float = 0.5
    support_max: float = 20.0

    @classmethod
    def for_corruption(cls, level: float, **kw) -> "DensitySpec":
        """Density at a corruption level in [0, 1]: 0 true, 1 algebraic, else a mixture."""
        if level == 0:
            return cls(DensityKind.TRUNC_EXP, **kw)
        if level == 1:
            return cls(DensityKind.ALGEBRAIC, **kw)
        return cls(DensityKind.MIXTURE, w=1.0 - level, **kw)


def _trunc_exp(xi, k, vmax):
    return k / (1.0 - np.exp(-k * vmax)) * np.exp(-k * xi)


def _algebraic(xi, a, vmax):
    return 1.0 / np.log(vmax / a + 1.0) / (xi + a)


def density_eval(d: DensitySpec, xi):
    xi_arr = np.asarray(xi, dtype=float)
    if np.any(xi_arr < 0) or np.any(xi_arr > d.support_max):
        raise ValueError(f"xi outside the support [0, {d.support_max}]")
    if d.kind is DensityKind.TRUNC_EXP:
        out = _trunc_exp(xi_arr, d.k, d.support_max)
    elif d.kind is DensityKind.ALGEBRAIC:
        out = _algebraic(xi_arr, d.a, d.support_max)
    else:
        out = (d.w * _trunc_exp(xi_arr, d.k, d.support_max)
               + (1.0 - d.w) * _algebraic(xi_arr, d.a, d.support_max))
    return out if out.ndim else float(out)


def gauss_legendre(n: int, lo: float = -1.0, hi: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights mapped affinely to ``[lo, hi]``."""
    if n < 1:
        raise ValueError("n must be positive")
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def quadrature_scenarios(n: int, density: DensitySpec) -> ScenarioSet:
    """Gauss-Legendre nodes on the support with masses ``w_k * rho(xi_k)``.

    The masses are renormalized to sum to one (the raw sum differs from one by
    the quadrature error, below 1e-12 for the shipped densities).
    """
    nodes, w = gauss_legendre(n, 0.0, density.support_max)
    rho = density_eval(density, nodes)
    mass = w * rho
    scale = mass.sum()
    corrupted = np.full(n, density.kind is not DensityKind.TRUNC_EXP)
    return ScenarioSet(nodes, mass / scale, corrupted, base_measure=w)


# --------------------------------------------------------------------------
# low-discrepancy points
# --------------------------------------------------------------------------

def sobol_1d(n: int) -> np.ndarray:
    """First ``n`` points of the base-2 radical inverse, starting at index 1."""
    if n < 1:
        raise ValueError("n must be positive")
    i = np.arange(1, n + 1, dtype=np.uint64)
    out = np.zeros(n)
    f = 0.5
    while np.any(i):
        out += f * (i & np.uint64(1)).astype(float)
        i >>= np.uint64(1)
        f *= 0.5
    return out


def inverse_cdf_truncexp(u, k: float = 0.25, vmax: float = 20.0):
    u = np.asarray(u, dtype=float)
    out = -np.log1p(-u * (1.0 - np.exp(-k * vmax))) / k
    return out if out.ndim else float(out)
