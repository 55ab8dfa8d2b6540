"""Nested quantile estimation: alternating minimization of the smoothed CVaR
objective over the control (quasi-Newton) and the anchor ``gamma`` (bisection).

A *problem* is any object with ``evaluate(z, with_grad) -> (J, G)`` returning the
per-scenario objective values and their Euclidean gradients, plus
``mass_matvec``, ``norm_sq``, ``lumped_mass`` and ``n_controls``.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .optim import LbfgsOptions, lbfgs_minimize
from .risk import RiskSpec, WeightedOutcomes, solve_gamma, stationarity_residual
from .sampling import ScenarioSet
from .smoothing import SmoothingParams, plus_smooth, plus_smooth_derivative

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NqeConfig:
    beta: float
    alpha: float
    delta: float = 1e-3
    gamma_tol: float = 1e-4
    max_outer: int = 100
    lbfgs: LbfgsOptions = field(default_factory=LbfgsOptions)
    # larger smoothing levels solved first, each warm-starting the next
    continuation: tuple = ()

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.gamma_tol > 0:
            raise ValueError("gamma_tol must be positive")
        if any(not d > self.delta for d in self.continuation):
            raise ValueError("continuation levels must exceed delta")

    @property
    def risk(self) -> RiskSpec:
        return RiskSpec(self.beta)

    @property
    def smoothing(self) -> SmoothingParams:
        return SmoothingParams(self.delta)


@dataclass
class NqeResult:
    z_star: np.ndarray
    gamma_star: float
    objective: float
    outer_iters: int
    optimality_residual: float
    converged: bool
    values: np.ndarray
    trace: list = field(default_factory=list)

    def trace_to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "gamma", "objective", "residual", "delta"])
            for row in self.trace:
                w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])


def _check_weights(problem, scenarios: ScenarioSet):
    if len(scenarios) != len(problem.scenarios):
        raise ValueError("scenario set does not match the problem's scenarios")
    w = scenarios.weights
    if np.any(w < -1e-12) or abs(w.sum() - 1.0) > 1e-9:
        raise ValueError("scenario weights are not a probability vector")


def weighted_median(values, weights) -> float:
    order = np.argsort(values, kind="stable")
    cum = np.cumsum(np.asarray(weights)[order])
    k = min(int(np.searchsorted(cum, 0.5 * cum[-1])), len(cum) - 1)
    return float(np.asarray(values)[order][k])


def risk_term(values, weights, gamma, cfg: NqeConfig) -> float:
    return float(gamma + cfg.risk.kappa * (weights @ plus_smooth(values - gamma, cfg.smoothing)))


def saa_objective(problem, scenarios: ScenarioSet, z, gamma: float, cfg: NqeConfig) -> float:
    """``gamma + kappa * sum(w * (J - gamma)_{+,delta}) + alpha/2 ||z||^2``."""
    J, _ = problem.evaluate(z, with_grad=False)
    return risk_term(J, scenarios.weights, gamma, cfg) + 0.5 * cfg.alpha * problem.norm_sq(z)


def minimize_control(problem, weights, gamma: float, cfg: NqeConfig, z0):
    """Minimize the smoothed objective over the control at fixed ``gamma``.

    Runs in the coordinates ``w = sqrt(m) z`` (``m`` the lumped mass) so that the
    Euclidean geometry seen by L-BFGS approximates the L2 one.
    """
    kappa, sp = cfg.risk.kappa, cfg.smoothing
    sq = np.sqrt(problem.lumped_mass)

    def fg(wv):
        z = wv / sq
        J, G = problem.evaluate(z)
        ex = J - gamma
        val = gamma + kappa * (weights @ plus_smooth(ex, sp))
        Mz = problem.mass_matvec(z)
        val += 0.5 * cfg.alpha * float(z @ Mz)
        grad = kappa * ((weights * plus_smooth_derivative(ex, sp)) @ G) + cfg.alpha * Mz
        return val, grad / sq

    res = lbfgs_minimize(fg, sq * np.asarray(z0, dtype=float), cfg.lbfgs)
    return res.x / sq, res


def nqe_solve(problem, scenarios: ScenarioSet, cfg: NqeConfig, z0=None,
              gamma0: float | None = None) -> NqeResult:
    """Alternate control and anchor updates until the anchor settles.

    ``scenarios`` supplies the weights (possibly perturbed); its points must be
    those the problem was built on. With ``cfg.continuation`` the loop first
    runs at each larger smoothing level (in decreasing order) and warm-starts
    the next; the result and its residual refer to ``cfg.delta``.
    """
    _check_weights(problem, scenarios)
    w = np.clip(scenarios.weights, 0.0, None)
    z = np.zeros(problem.n_controls) if z0 is None else np.array(z0, dtype=float)
    trace = []
    for d in sorted(cfg.continuation, reverse=True):
        stage = replace(cfg, delta=d, continuation=())
        z, gamma0, _, _, rows = _nqe_loop(problem, w, stage, z, gamma0)
        trace.extend(rows)
    z, gamma, J, k, rows = _nqe_loop(problem, w, cfg, z, gamma0)
    trace.extend(rows)
    converged = abs(rows[-1][1] - rows[-2][1]) < cfg.gamma_tol
    outcomes = WeightedOutcomes(J, w, check=False)
    residual = abs(stationarity_residual(outcomes, cfg.risk, gamma, cfg.smoothing))
    objective = risk_term(J, w, gamma, cfg) + 0.5 * cfg.alpha * problem.norm_sq(z)
    return NqeResult(z, gamma, objective, k, residual, converged, J, trace)


def _nqe_loop(problem, w, cfg: NqeConfig, z, gamma):
    reg = lambda zz: 0.5 * cfg.alpha * problem.norm_sq(zz)
    J, _ = problem.evaluate(z, with_grad=False)
    if gamma is None:
        gamma = weighted_median(J, w)
    rows = [(0, gamma, risk_term(J, w, gamma, cfg) + reg(z), np.nan, cfg.delta)]
    k = 0
    for k in range(1, cfg.max_outer + 1):
        z, lres = minimize_control(problem, w, gamma, cfg, z)
        if not lres.converged:
            logger.debug("control step %d: %s", k, lres.message)
        J, _ = problem.evaluate(z, with_grad=False)
        outcomes = WeightedOutcomes(J, w, check=False)
        gamma_new = solve_gamma(outcomes, cfg.risk, cfg.smoothing)
        res = stationarity_residual(outcomes, cfg.risk, gamma_new, cfg.smoothing)
        rows.append((k, gamma_new, risk_term(J, w, gamma_new, cfg) + reg(z), res, cfg.delta))
        step = abs(gamma_new - gamma)
        gamma = gamma_new
        if step < cfg.gamma_tol:
            break
    return z, gamma, J, k, rows
