"""One-dimensional random-diffusion control testbed.

State equation ``-(a(x, xi) u')' = z`` on (0, 1) with ``u(0) = u(1) = 0``,
discretized by conservative second-order finite differences (coefficient at
cell midpoints). The diffusion coefficient is the exponential of a truncated
Karhunen-Loeve expansion of a rescaled Brownian motion. All L2 quantities use
the composite trapezoidal rule.

Equations are scaled by ``h`` so the discrete system reads ``K u = M z`` with
``K`` symmetric and ``M`` the (diagonal) trapezoidal mass; gradients returned by
:class:`DiffusionControl1D` are Euclidean (``M p`` with ``p`` the adjoint).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .sampling import ScenarioSet


@dataclass(frozen=True)
class Grid1D:
    n_cells: int = 128

    def __post_init__(self):
        if self.n_cells < 2:
            raise ValueError("need at least two cells")

    @property
    def h(self) -> float:
        return 1.0 / self.n_cells

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_cells + 1)

    @property
    def midpoints(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.h

    @property
    def mass(self) -> np.ndarray:
        """Trapezoidal weights at all nodes."""
        m = np.full(self.n_cells + 1, self.h)
        m[0] = m[-1] = 0.5 * self.h
        return m

    def inner(self, u, v) -> float:
        return float(np.sum(self.mass * u * v))


@dataclass(frozen=True)
class KklField:
    sigma: float = 0.4
    d: int = 50

    @property
    def lambdas(self) -> np.ndarray:
        k = np.arange(1, self.d + 1)
        return 4.0 / ((2 * k - 1) ** 2 * np.pi ** 2)

    def modes(self, x) -> np.ndarray:
        """``sqrt(lambda_k) * sin(x / sqrt(lambda_k))``, shape (len(x), d)."""
        sl = np.sqrt(self.lambdas)
        return sl * np.sin(np.asarray(x, dtype=float)[:, None] / sl)

    def log_values(self, x, xi) -> np.ndarray:
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        if xi.shape[-1] != self.d:
            raise ValueError(f"scenario dimension {xi.shape[-1]} != {self.d}")
        return self.sigma * xi @ self.modes(x).T

    def values(self, x, xi) -> np.ndarray:
        with np.errstate(over="ignore"):
            a = np.exp(self.log_values(x, xi))
        if not np.all(np.isfinite(a)) or np.any(a <= 0):
            raise FloatingPointError("diffusion coefficient is not finite and positive")
        return a


# --------------------------------------------------------------------------
# tridiagonal solves
# --------------------------------------------------------------------------

def thomas_solve(lower, diag, upper, rhs):
    """Solve a tridiagonal system (``lower[0]`` and ``upper[-1]`` are ignored).

    All arguments may carry leading batch axes; the last axis runs along the
    system.
    """
    fac = ThomasFactor(lower, diag, upper)
    return fac.solve(rhs)


class ThomasFactor:
    """Forward-elimination coefficients of a (batched) tridiagonal matrix."""

    def __init__(self, lower, diag, upper):
        lower = np.asarray(lower, dtype=float)
        diag = np.asarray(diag, dtype=float)
        upper = np.asarray(upper, dtype=float)
        m = diag.shape[-1]
        cp = np.empty_like(diag)
        den = np.empty_like(diag)
        den[..., 0] = diag[..., 0]
        cp[..., 0] = upper[..., 0] / den[..., 0]
        for i in range(1, m):
            den[..., i] = diag[..., i] - lower[..., i] * cp[..., i - 1]
            cp[..., i] = upper[..., i] / den[..., i] if i < m - 1 else 0.0
        if np.any(den == 0):
            raise np.linalg.LinAlgError("zero pivot in tridiagonal elimination")
        self.lower, self.cp, self.den = lower, cp, den

    def solve(self, rhs) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        m = rhs.shape[-1]
        y = np.empty(np.broadcast_shapes(rhs.shape, self.den.shape))
        y[..., 0] = rhs[..., 0] / self.den[..., 0]
        for i in range(1, m):
            y[..., i] = (rhs[..., i] - self.lower[..., i] * y[..., i - 1]) / self.den[..., i]
        for i in range(m - 2, -1, -1):
            y[..., i] -= self.cp[..., i] * y[..., i + 1]
        return y


def stiffness_bands(grid: Grid1D, a_mid):
    """Bands of the h-scaled operator on interior nodes from midpoint coefficients."""
    a_mid = np.asarray(a_mid, dtype=float)
    h = grid.h
    diag = (a_mid[..., :-1] + a_mid[..., 1:]) / h
    off = -a_mid[..., 1:-1] / h
    lower = np.concatenate([np.zeros(a_mid.shape[:-1] + (1,)), off], axis=-1)
    upper = np.concatenate([off, np.zeros(a_mid.shape[:-1] + (1,))], axis=-1)
    return lower, diag, upper


def apply_stiffness(grid: Grid1D, a_mid, u_int):
    lower, diag, upper = stiffness_bands(grid, a_mid)
    out = diag * u_int
    out[..., 1:] += lower[..., 1:] * u_int[..., :-1]
    out[..., :-1] += upper[..., :-1] * u_int[..., 1:]
    return out


# --------------------------------------------------------------------------
# single-scenario operations
# --------------------------------------------------------------------------

def _factor(grid, field, xi):
    a_mid = field.values(grid.midpoints, xi)[0]
    return ThomasFactor(*stiffness_bands(grid, a_mid))


def solve_forward(grid: Grid1D, field: KklField, xi, z) -> np.ndarray:
    """Nodal state (boundary zeros included) for control ``z`` at all nodes."""
    z = np.asarray(z, dtype=float)
    if z.shape != (grid.n_cells + 1,):
        raise ValueError("control must hold one value per grid node")
    u = np.zeros(grid.n_cells + 1)
    u[1:-1] = _factor(grid, field, xi).solve(grid.h * z[1:-1])
    return u


def objective_j(grid: Grid1D, field: KklField, xi, z, target: float = 1.0) -> float:
    u = solve_forward(grid, field, xi, z)
    r = u - target
    return 0.5 * grid.inner(r, r)


def gradient_j(grid: Grid1D, field: KklField, xi, z, target: float = 1.0) -> np.ndarray:
    """Adjoint state ``p``: the trapezoidal Riesz representative of the derivative."""
    fac = _factor(grid, field, xi)
    u = np.zeros(grid.n_cells + 1)
    u[1:-1] = fac.solve(grid.h * np.asarray(z, dtype=float)[1:-1])
    p = np.zeros_like(u)
    p[1:-1] = fac.solve(grid.h * (u[1:-1] - target))
    return p


# --------------------------------------------------------------------------
# batched problem over a scenario set
# --------------------------------------------------------------------------

class DiffusionControl1D:
    """Per-scenario tracking objectives ``J_i(z) = 1/2 ||u(xi_i, z) - u_target||^2``.

    Thomas factors for every scenario are built once; each evaluation is one
    batched forward and one batched adjoint sweep.
    """

    def __init__(self, grid: Grid1D, field: KklField, scenarios: ScenarioSet,
                 target: float = 1.0):
        self.grid = grid
        self.field = field
        self.scenarios = scenarios
        self.target = target
        a_mid = field.values(grid.midpoints, scenarios.points)
        self._fac = ThomasFactor(*stiffness_bands(grid, a_mid))
        self.mass = grid.mass

    @property
    def n_controls(self) -> int:
        return self.grid.n_cells + 1

    @property
    def lumped_mass(self) -> np.ndarray:
        return self.mass

    def mass_matvec(self, z):
        return self.mass * z

    def norm_sq(self, z) -> float:
        return float(np.sum(self.mass * z * z))

    def with_scenarios(self, scenarios: ScenarioSet) -> "DiffusionControl1D":
        return DiffusionControl1D(self.grid, self.field, scenarios, self.target)

    def states(self, z) -> np.ndarray:
        h = self.grid.h
        u = np.zeros((len(self.scenarios), self.n_controls))
        u[:, 1:-1] = self._fac.solve(np.broadcast_to(h * np.asarray(z)[1:-1], u[:, 1:-1].shape))
        return u

    def evaluate(self, z, with_grad: bool = True):
        """Objective values ``J`` (N,) and Euclidean gradients (N, n_controls)."""
        u = self.states(z)
        r = u - self.target
        J = 0.5 * (r * r) @ self.mass
        if not with_grad:
            return J, None
        h = self.grid.h
        G = np.zeros_like(u)
        G[:, 1:-1] = h * self._fac.solve(h * r[:, 1:-1])
        return J, G


def write_profile_csv(path, x, columns: dict):
    """Write nodal profiles as ``x, name1, name2, ...`` rows."""
    names = list(columns)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x"] + names)
        for i, xi in enumerate(x):
            w.writerow([repr(float(xi))] + [repr(float(columns[n][i])) for n in names])
