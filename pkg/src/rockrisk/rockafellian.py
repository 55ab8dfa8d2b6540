"""Rockafellian relaxation of the CVaR problem over perturbed scenario weights.

The perturbation ``t`` shifts each scenario's point value ``p_i`` (``1/N`` for
samples, the density value for quadrature nodes) so that the masses become
``a_i (p_i + t_i)``. The relaxed objective adds ``theta * sum(a_i |t_i|)`` and
requires the perturbed masses to remain a probability vector. It is minimized
by alternating between the NQE solve in ``(z, gamma)`` and an exact LP in ``t``.
"""

from __future__ import annotations

import csv
import enum
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .nqe import NqeConfig, NqeResult, nqe_solve
from .optim import PerturbationLp, solve_perturbation_lp
from .risk import WeightedOutcomes, solve_gamma
from .sampling import ScenarioSet
from .smoothing import plus_smooth

logger = logging.getLogger(__name__)


class BoundMode(enum.Enum):
    TIGHT = "tight"      # -p_i <= t_i <= p_i
    FULL = "full"        # -p_i <= t_i <= 1/a_i - p_i
    DENSITY = "density"  # -rho_k <= t_k <= rho_k


@dataclass(frozen=True)
class RockConfig:
    theta: float
    t_tol: float = 1e-3
    bound_mode: BoundMode = BoundMode.TIGHT
    max_adi: int = 50
    deletion_tol: float = 1e-10

    def __post_init__(self):
        if self.theta < 0:
            raise ValueError("theta must be nonnegative")
        if not self.t_tol > 0:
            raise ValueError("t_tol must be positive")


@dataclass
class RockResult:
    z_star: np.ndarray
    gamma_star: float
    t_star: np.ndarray
    weights: np.ndarray
    corrupted_deleted: int
    clean_deleted: int
    adi_iters: int
    phi_value: float
    converged: bool
    nqe: NqeResult
    trace: list = field(default_factory=list)

    def trace_to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "phi", "l1_distance", "corrupted_deleted", "clean_deleted"])
            for it, phi, dist, cd, kd in self.trace:
                w.writerow([it, repr(float(phi)), repr(float(dist)), cd, kd])

    def t_to_csv(self, path, scenarios: ScenarioSet):
        p = scenarios.base_values
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "t", "p_plus_t", "corrupted"])
            for i, ti in enumerate(self.t_star):
                w.writerow([i, repr(float(ti)), repr(float(p[i] + ti)),
                            int(scenarios.corrupted_mask[i])])


def perturbation_bounds(scenarios: ScenarioSet, mode: BoundMode):
    p = scenarios.base_values
    if mode is BoundMode.FULL:
        return -p, 1.0 / scenarios.base_measure - p
    return -p, p.copy()


def _phi_from_values(J, scenarios: ScenarioSet, t, cfg: NqeConfig, theta: float,
                     gamma: float | None = None):
    a = scenarios.base_measure
    q = np.clip(a * (scenarios.base_values + t), 0.0, None)
    if gamma is None:
        gamma = solve_gamma(WeightedOutcomes(J, q, check=False), cfg.risk, cfg.smoothing)
    val = gamma + cfg.risk.kappa * float(q @ plus_smooth(J - gamma, cfg.smoothing))
    return val + theta * float(a @ np.abs(t)), gamma


def phi_value(problem, scenarios: ScenarioSet, z, t, nqe_cfg: NqeConfig, rock_cfg: RockConfig,
              include_reg: bool = True) -> float:
    """Rockafellian value with the inner minimum over ``gamma`` solved exactly.

    Returns ``inf`` when ``p + t`` is not a probability vector. ``include_reg``
    adds the control cost ``alpha/2 ||z||^2``.
    """
    t = np.asarray(t, dtype=float)
    a = scenarios.base_measure
    q = a * (scenarios.base_values + t)
    if np.any(q < -rock_cfg.deletion_tol) or abs(q.sum() - 1.0) > 1e-9:
        return np.inf
    J, _ = problem.evaluate(z, with_grad=False)
    val, _ = _phi_from_values(J, scenarios, t, nqe_cfg, rock_cfg.theta)
    if include_reg:
        val += 0.5 * nqe_cfg.alpha * problem.norm_sq(z)
    return val


def perturbation_lp(J, gamma: float, scenarios: ScenarioSet, nqe_cfg: NqeConfig,
                    rock_cfg: RockConfig) -> PerturbationLp:
    """LP in ``t`` at frozen ``(z, gamma)``."""
    a = scenarios.base_measure
    exceed = plus_smooth(np.asarray(J) - gamma, nqe_cfg.smoothing)
    lower, upper = perturbation_bounds(scenarios, rock_cfg.bound_mode)
    return PerturbationLp(nqe_cfg.risk.kappa * a * exceed, rock_cfg.theta, a, lower, upper)


def deletion_counts(scenarios: ScenarioSet, t, tol: float) -> tuple[int, int]:
    deleted = scenarios.base_values + t <= tol
    return (int(np.sum(deleted & scenarios.corrupted_mask)),
            int(np.sum(deleted & ~scenarios.corrupted_mask)))


def adi_minimize(problem, scenarios: ScenarioSet, nqe_cfg: NqeConfig, rock_cfg: RockConfig,
                 z0=None) -> RockResult:
    """Alternating-direction heuristic for the Rockafellian.

    Starts from ``t = 0``; each sweep solves NQE with masses ``a (p + t)`` (warm
    started from the previous control) and then the perturbation LP at the new
    ``(z, gamma)``. Stops when the mass-weighted l1 change of ``t`` drops below
    ``t_tol``; the returned control is the one from the last NQE solve.
    """
    a = scenarios.base_measure
    p = scenarios.base_values
    t = np.zeros(len(scenarios))
    z = z0
    gamma0 = None
    trace = []
    converged = False
    res = None
    k = 0
    for k in range(1, rock_cfg.max_adi + 1):
        # exact base weights while t == 0
        q = np.clip(scenarios.weights + a * t, 0.0, None)
        # warm-started sweeps skip the smoothing continuation
        cfg_k = nqe_cfg if k == 1 else replace(nqe_cfg, continuation=())
        res = nqe_solve(problem, scenarios.with_weights(q), cfg_k, z0=z, gamma0=gamma0)
        z, gamma0 = res.z_star, res.gamma_star
        lp = perturbation_lp(res.values, res.gamma_star, scenarios, nqe_cfg, rock_cfg)
        t_new, _ = solve_perturbation_lp(lp)
        dist = float(a @ np.abs(t_new - t))
        t = t_new
        phi, _ = _phi_from_values(res.values, scenarios, t, nqe_cfg, rock_cfg.theta)
        cd, kd = deletion_counts(scenarios, t, rock_cfg.deletion_tol)
        trace.append((k, phi + 0.5 * nqe_cfg.alpha * problem.norm_sq(z), dist, cd, kd))
        logger.info("ADI %d: phi=%.6g |dt|=%.3g deleted=%d/%d", k, trace[-1][1], dist, cd, kd)
        if dist < rock_cfg.t_tol:
            converged = True
            break
    cd, kd = deletion_counts(scenarios, t, rock_cfg.deletion_tol)
    return RockResult(res.z_star, res.gamma_star, t, a * (p + t), cd, kd, k, trace[-1][1],
                      converged and res.converged, res, trace)
