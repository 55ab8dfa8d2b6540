"""Minimizers: L-BFGS with a strong-Wolfe line search, scalar bisection, and an
exact solver for the single-coupling l1 linear program used by the perturbation
step of the alternating-direction loop.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

logger = logging.getLogger(__name__)


# --------------------------------------------------------------------------
# bisection
# --------------------------------------------------------------------------

def bisect_root(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-10,
                max_iter: int = 400) -> float:
    """Root of a monotone scalar function by bisection.

    Stops when ``|f(x)| <= tol`` or when the bracket can no longer be split in
    floating point.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise ValueError(f"no sign change on [{lo}, {hi}]: f = ({flo}, {fhi})")
    best, fbest = (lo, flo) if abs(flo) < abs(fhi) else (hi, fhi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if abs(fm) < abs(fbest):
            best, fbest = mid, fm
        if abs(fm) <= tol:
            return mid
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
    return best


# --------------------------------------------------------------------------
# L-BFGS
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LbfgsOptions:
    history: int = 9
    grad_tol: float = 1e-6
    max_iters: int = 500
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    # relative reduction test as in SciPy's L-BFGS-B; 0 disables it
    ftol: float = 0.0
    max_ls: int = 50

    def __post_init__(self):
        if not 0.0 < self.wolfe_c1 < self.wolfe_c2 < 1.0:
            raise ValueError("need 0 < wolfe_c1 < wolfe_c2 < 1")
        if self.history < 1:
            raise ValueError("history must be >= 1")


@dataclass
class LbfgsResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    nit: int
    nfev: int
    converged: bool
    message: str
    trace: list = field(default_factory=list)

    def __iter__(self):
        # allows ``x, f, nit = lbfgs_minimize(...)``
        return iter((self.x, self.fun, self.nit))


class LineSearchStalled(RuntimeError):
    pass


def _strong_wolfe(phi, f0, g0, c1, c2, max_ls, alpha0=1.0):
    """Strong-Wolfe step along a descent direction (bracketing + zoom).

    ``phi(a)`` returns ``(value, slope, payload)``. Returns ``(alpha, value, payload)``
    or raises LineSearchStalled with the best Armijo point found.
    """
    nfev = 0
    a_prev, f_prev, g_prev = 0.0, f0, g0
    a = alpha0
    best = None

    def zoom(lo, flo, glo, hi, fhi):
        nonlocal nfev, best
        for _ in range(max_ls):
            # safeguarded quadratic interpolation, falls back to halving
            denom = 2.0 * (fhi - flo - glo * (hi - lo))
            a_j = lo - glo * (hi - lo) ** 2 / denom if denom > 0 else 0.5 * (lo + hi)
            width = abs(hi - lo)
            if not (min(lo, hi) + 0.1 * width <= a_j <= max(lo, hi) - 0.1 * width):
                a_j = 0.5 * (lo + hi)
            f_j, g_j, pay = phi(a_j)
            nfev += 1
            if not np.isfinite(f_j) or f_j > f0 + c1 * a_j * g0 or f_j >= flo:
                hi, fhi = a_j, f_j
            else:
                if best is None or f_j < best[1]:
                    best = (a_j, f_j, pay)
                if abs(g_j) <= -c2 * g0:
                    return a_j, f_j, pay
                if g_j * (hi - lo) >= 0:
                    hi, fhi = lo, flo
                lo, flo, glo = a_j, f_j, g_j
        raise LineSearchStalled(best)

    for i in range(max_ls):
        f_a, g_a, pay = phi(a)
        nfev += 1
        if not np.isfinite(f_a):
            # overshoot into a non-finite region: shrink and retry
            a = 0.5 * (a_prev + a)
            continue
        if f_a > f0 + c1 * a * g0 or (i > 0 and f_a >= f_prev):
            return zoom(a_prev, f_prev, g_prev, a, f_a)
        if best is None or f_a < best[1]:
            best = (a, f_a, pay)
        if abs(g_a) <= -c2 * g0:
            return a, f_a, pay
        if g_a >= 0:
            return zoom(a, f_a, g_a, a_prev, f_prev)
        a_prev, f_prev, g_prev = a, f_a, g_a
        a = 2.0 * a
    raise LineSearchStalled(best)


def lbfgs_minimize(objective: Callable[[np.ndarray], tuple[float, np.ndarray]],
                   x0, opts: LbfgsOptions | None = None) -> LbfgsResult:
    """Minimize a smooth function with limited-memory BFGS.

    Parameters
    ----------
    objective : callable
        Returns ``(value, gradient)`` at a point.
    x0 : array_like
        Starting point.
    opts : LbfgsOptions, optional

    Returns
    -------
    LbfgsResult
        ``converged`` is True when the gradient max-norm (or the optional
        relative-reduction test) is met; a stalled line search returns the best
        point found with ``message == "line search stalled"``.
    """
    opts = opts or LbfgsOptions()
    x = np.array(x0, dtype=float, copy=True)
    f, g = objective(x)
    f = float(f)
    g = np.asarray(g, dtype=float)
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise FloatingPointError("objective is not finite at the starting point")
    nfev = 1
    S: deque = deque(maxlen=opts.history)
    Y: deque = deque(maxlen=opts.history)
    trace = [f]

    for k in range(opts.max_iters):
        if np.max(np.abs(g)) <= opts.grad_tol:
            return LbfgsResult(x, f, g, k, nfev, True, "gradient tolerance reached", trace)

        # two-loop recursion
        q = -g.copy()
        alphas = []
        for s, y in reversed(list(zip(S, Y))):
            rho = 1.0 / (y @ s)
            a = rho * (s @ q)
            q -= a * y
            alphas.append((rho, a, s, y))
        if S:
            s, y = S[-1], Y[-1]
            q *= (s @ y) / (y @ y)
        else:
            q /= max(np.linalg.norm(g), 1e-300)
        for rho, a, s, y in reversed(alphas):
            b = rho * (y @ q)
            q += (a - b) * s
        d = q
        slope = g @ d
        if slope >= 0:
            # lost descent (round-off in the history): restart from steepest descent
            S.clear()
            Y.clear()
            d = -g / max(np.linalg.norm(g), 1e-300)
            slope = g @ d

        def phi(a, x=x, d=d):
            xa = x + a * d
            fa, ga = objective(xa)
            ga = np.asarray(ga, dtype=float)
            return float(fa), float(ga @ d), (xa, ga)

        try:
            a, f_new, (x_new, g_new) = _strong_wolfe(phi, f, slope, opts.wolfe_c1, opts.wolfe_c2,
                                                     opts.max_ls)
        except LineSearchStalled as exc:
            best = exc.args[0]
            if best is not None and best[1] < f:
                x, f, g = best[2][0], best[1], best[2][1]
                trace.append(f)
            logger.debug("line search stalled at iteration %d", k)
            return LbfgsResult(x, f, g, k + 1, nfev, False, "line search stalled", trace)
        nfev += 1

        s = x_new - x
        y = g_new - g
        if s @ y > 1e-12 * (y @ y):
            S.append(s)
            Y.append(y)
        f_old = f
        x, f, g = x_new, f_new, g_new
        trace.append(f)
        if opts.ftol > 0 and (f_old - f) <= opts.ftol * max(abs(f_old), abs(f), 1.0):
            return LbfgsResult(x, f, g, k + 1, nfev, True, "relative reduction tolerance reached",
                               trace)

    converged = np.max(np.abs(g)) <= opts.grad_tol
    return LbfgsResult(x, f, g, opts.max_iters, nfev, converged, "iteration cap reached", trace)


# --------------------------------------------------------------------------
# perturbation LP
# --------------------------------------------------------------------------

@dataclass
class PerturbationLp:
    """``min c.t + theta * sum(a*|t|)``  s.t.  ``sum(a*t) = 0``, ``lower <= t <= upper``."""

    linear_cost: np.ndarray
    l1_weight: float
    mass_weights: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.linear_cost = np.asarray(self.linear_cost, dtype=float)
        n = self.linear_cost.size
        self.mass_weights = np.broadcast_to(np.asarray(self.mass_weights, dtype=float), (n,)).copy()
        self.lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (n,)).copy()
        self.upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (n,)).copy()
        if np.any(self.lower > self.upper):
            raise ValueError("infeasible bounds: lower > upper")
        if np.any(self.lower > 0) or np.any(self.upper < 0):
            raise ValueError("bounds must bracket zero")
        if np.any(self.mass_weights <= 0):
            raise ValueError("mass weights must be positive")
        if self.l1_weight < 0:
            raise ValueError("l1 weight must be nonnegative")

    def objective(self, t) -> float:
        t = np.asarray(t, dtype=float)
        return float(self.linear_cost @ t + self.l1_weight * np.sum(self.mass_weights * np.abs(t)))


def solve_perturbation_lp(lp: PerturbationLp) -> tuple[np.ndarray, float]:
    """Exact minimizer of the perturbation LP by a scan over dual breakpoints.

    With ``s = a*t`` the problem separates into ``sum(g_i s_i + theta |s_i|)``
    (``g = c/a``) under the single constraint ``sum(s) = 0``. For a multiplier
    ``nu`` each coordinate sits at its lower bound when ``g_i + nu > theta``, at
    its upper bound when ``g_i + nu < -theta`` and at zero otherwise; the total
    ``S(nu)`` is nonincreasing and the optimal ``nu`` is the breakpoint where it
    crosses zero. Coordinates tied at that breakpoint absorb the remaining
    imbalance, the lowest-indexed one taking the fractional value.
    """
    a = lp.mass_weights
    g = lp.linear_cost / a
    th = float(lp.l1_weight)
    lo = a * lp.lower
    hi = a * lp.upper
    n = g.size
    t = np.zeros(n)
    if n == 0:
        return t, 0.0

    bp_down = th - g     # s_i: 0 -> lo_i as nu increases through this value
    bp_up = -th - g      # s_i: hi_i -> 0 as nu increases through this value

    def settle(nu):
        at_lo = bp_down < nu
        at_hi = bp_up > nu
        s = np.where(at_lo, lo, np.where(at_hi, hi, 0.0))
        tie_lo = bp_down == nu
        tie_hi = bp_up == nu
        return s, at_lo, at_hi, tie_lo, tie_hi

    breaks = np.unique(np.concatenate([bp_down, bp_up]))
    for nu in breaks:
        s, at_lo, at_hi, tie_lo, tie_hi = settle(nu)
        # right limit: tied-down coordinates at lo, tied-up coordinates at 0
        s_right = s + np.where(tie_lo, lo, 0.0)
        total_right = s_right.sum()
        if total_right <= 0.0:
            break
    else:  # pragma: no cover - the last breakpoint always has S <= 0
        raise RuntimeError("dual breakpoint scan failed")

    s = s_right.copy()
    deficit = -total_right  # amount by which tied coordinates must be raised
    state = np.where(at_lo, -1, np.where(at_hi, 1, 0))
    tied = np.flatnonzero(tie_lo | tie_hi)
    # highest index first so that the lowest tied index ends up fractional
    for i in tied[::-1]:
        if deficit <= 0.0:
            break
        room = (hi[i] if tie_hi[i] else 0.0) - (lo[i] if tie_lo[i] else 0.0)
        step = min(room, deficit)
        s[i] += step
        deficit -= step

    for i in range(n):
        if state[i] == -1:
            t[i] = lp.lower[i]
        elif state[i] == 1:
            t[i] = lp.upper[i]
        elif s[i] == lo[i]:
            t[i] = lp.lower[i]
        elif s[i] == hi[i]:
            t[i] = lp.upper[i]
        else:
            t[i] = s[i] / a[i]
    return t, lp.objective(t)
