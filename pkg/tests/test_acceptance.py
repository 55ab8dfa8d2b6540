"""Acceptance criteria, each at its stated tolerance and runtime budget.

Run with ``pytest tests/test_acceptance.py``; a PASS/FAIL line per criterion is
printed in the terminal summary.
"""

import csv
import dataclasses
import math
import time

import numpy as np
import pytest

from rockrisk import experiments
from rockrisk.analysis import QUANTILE_LEVELS, empirical_cdf, relative_l2_error
from rockrisk.config import load_config
from rockrisk.optim import PerturbationLp, solve_perturbation_lp
from rockrisk.pde1d import DiffusionControl1D, Grid1D, KklField
from rockrisk.pde2d import (AdvectionField, assemble_matrices, build_mesh,
                            objective_and_gradient)
from rockrisk.risk import RiskSpec, WeightedOutcomes, cvar_exact, cvar_smoothed, solve_gamma
from rockrisk.sampling import (DensityKind, DensitySpec, density_eval, gauss_legendre,
                               sample_gaussian_scenarios)
from rockrisk.smoothing import SmoothingParams, plus_smooth

from test_optim import random_lp, vertex_oracle
from test_pde1d import manufactured_error
from test_pde2d import manufactured_l2_error

pytestmark = pytest.mark.acceptance


# --------------------------------------------------------------------------
# shared desk-scale runs
# --------------------------------------------------------------------------

@pytest.fixture(scope="module")
def example1_runs():
    cfg = dataclasses.replace(load_config("example1_desk.cfg"), beta_list=[0.1, 0.5, 0.9],
                              theta_list=[0.1, 1e6], workers=1)
    t0 = time.perf_counter()
    runs = experiments.solve_example1(cfg)
    return cfg, runs, time.perf_counter() - t0


@pytest.fixture(scope="module")
def example2_runs():
    cfg = dataclasses.replace(load_config("example2_desk.cfg"), beta_list=[0.1, 0.9],
                              corruption_levels=[1.0], theta_list=[1.0, 0.1], workers=1)
    t0 = time.perf_counter()
    by_beta = experiments.solve_example2(cfg)
    mesh = build_mesh(cfg.refinement)
    return cfg, mesh, assemble_matrices(mesh), by_beta, time.perf_counter() - t0


# --------------------------------------------------------------------------

def test_01_smoothing_bounds(criterion):
    t0 = time.perf_counter()
    x = np.linspace(-10, 10, 100_000)
    worst_gap, worst_lip, ok = 0.0, 0.0, True
    for d in (1e-1, 1e-2, 1e-3):
        f = plus_smooth(x, SmoothingParams(d))
        gap = f - np.maximum(x, 0)
        lip = np.abs(np.diff(f)) / np.diff(x)
        ok &= bool(gap.min() >= 0 and gap.max() <= d * math.log(2) and lip.max() <= 1 + 1e-12)
        worst_gap = max(worst_gap, gap.max() / (d * math.log(2)))
        worst_lip = max(worst_lip, lip.max())
    dt = time.perf_counter() - t0
    criterion(1, ok and dt < 1.0,
              f"max gap/(delta ln2)={worst_gap:.6f}, max slope={worst_lip:.12f}, {dt:.2f}s")


def test_02_cvar_oracle(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    p = SmoothingParams(1e-8)
    worst = -np.inf
    for _ in range(500):
        n = int(rng.integers(1, 21))
        v = rng.normal(size=n) * rng.choice([0.1, 1.0, 10.0])
        w = rng.random(n) + 1e-3
        o = WeightedOutcomes(v, w / w.sum())
        r = RiskSpec(float(rng.choice([0.1, 0.5, 0.9])))
        g = solve_gamma(o, r, p)
        err = abs(cvar_smoothed(o, r, g, p) - cvar_exact(o, r)[0])
        worst = max(worst, err - (r.kappa * p.delta * math.log(2) + 1e-9))
    dt = time.perf_counter() - t0
    criterion(2, worst <= 0 and dt < 5.0, f"max excess over bound={worst:.3e}, {dt:.2f}s")


def test_03_lp_exactness(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst = 0.0
    for k in range(200):
        lp = random_lp(rng, ties=bool(k % 2))
        worst = max(worst, abs(solve_perturbation_lp(lp)[1] - vertex_oracle(lp)))
    _, obj = solve_perturbation_lp(PerturbationLp([10.0, 1.0, 1.0], 0.5, 1.0, -1 / 3, 1 / 3))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-10 and abs(obj + 8 / 3) <= 1e-12 and dt < 10.0
    criterion(3, ok, f"max |obj - oracle|={worst:.2e}, worked example={obj:.15f}, {dt:.2f}s")


def test_04_gradient_checks(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    eps = 1e-6
    worst1 = 0.0
    grid, field = Grid1D(128), KklField()
    for _ in range(20):
        s = sample_gaussian_scenarios(1, field.d, int(rng.integers(1 << 30)))
        prob = DiffusionControl1D(grid, field, s)
        z, v = rng.normal(size=(2, prob.n_controls))
        _, G = prob.evaluate(z)
        jp, _ = prob.evaluate(z + eps * v, with_grad=False)
        jm, _ = prob.evaluate(z - eps * v, with_grad=False)
        fd = (jp[0] - jm[0]) / (2 * eps)
        worst1 = max(worst1, abs(G[0] @ v - fd) / abs(fd))
    mesh = build_mesh(4)
    mats, adv = assemble_matrices(mesh), AdvectionField()
    worst2 = 0.0
    for _ in range(10):
        xi = rng.uniform(0, 20)
        z, v = rng.normal(size=(2, mesh.dof_count))
        _, g = objective_and_gradient(mesh, adv, xi, z, mats=mats)
        jp, _ = objective_and_gradient(mesh, adv, xi, z + eps * v, mats=mats)
        jm, _ = objective_and_gradient(mesh, adv, xi, z - eps * v, mats=mats)
        fd = (jp - jm) / (2 * eps)
        worst2 = max(worst2, abs(g @ v - fd) / abs(fd))
    dt = time.perf_counter() - t0
    criterion(4, max(worst1, worst2) <= 1e-5 and dt < 120,
              f"max rel err 1D={worst1:.2e}, 2D={worst2:.2e}, {dt:.1f}s")


def test_05_convergence_orders(criterion):
    t0 = time.perf_counter()
    # a lognormal field with a few modes, resolved on all three grids
    field = KklField(d=5)
    xi = np.random.default_rng(0).standard_normal(field.d)
    e1 = [manufactured_error(n, field, xi) for n in (32, 64, 128)]
    r1 = np.array(e1[:-1]) / np.array(e1[1:])
    e2 = [manufactured_l2_error(r) for r in (2, 3, 4, 5)]
    r2 = np.array(e2[:-1]) / np.array(e2[1:])
    dt = time.perf_counter() - t0
    ok = bool(np.all((r1 >= 3.6) & (r1 <= 4.4)) and np.all((r2 >= 3.6) & (r2 <= 4.4))) and dt < 120
    criterion(5, ok, f"1D ratios={np.round(r1, 3).tolist()}, 2D ratios={np.round(r2, 3).tolist()}, "
                     f"{dt:.1f}s")


def test_06_optimality_residual(criterion, example1_runs):
    _, runs, _ = example1_runs
    residuals, skipped = [], 0
    for beta, level, res_t, res_c, rocks, _, _ in runs:
        for r in [res_t, res_c] + [rr.nqe for _, rr in rocks]:
            if r.converged:
                residuals.append(r.optimality_residual)
            else:
                skipped += 1
    worst = max(residuals)
    criterion(6, worst <= 1e-3 and residuals != [],
              f"{len(residuals)} converged runs, max residual={worst:.2e}, "
              f"{skipped} non-converged")


def test_07_example1_recovery(criterion, example1_runs):
    cfg, runs, elapsed = example1_runs
    mass = Grid1D(cfg.n_cells).mass
    beta, level, res_t, res_c, rocks, n_corr, n = [r for r in runs if r[0] == 0.5][0]
    rock = dict(rocks)[0.1]
    ratio = (relative_l2_error(res_c.z_star, res_t.z_star, mass)
             / relative_l2_error(rock.z_star, res_t.z_star, mass))
    cd = rock.corrupted_deleted / n_corr
    kd = rock.clean_deleted / (n - n_corr)
    ok = ratio >= 5 and cd >= 0.30 and kd <= 0.02 and elapsed < 300
    criterion(7, ok, f"E_ratio={ratio:.1f}, corrupted deleted={cd:.1%}, clean deleted={kd:.2%}, "
                     f"sweep {elapsed:.1f}s")


def test_08_theta_anchoring(criterion, example1_runs, example2_runs):
    _, _, _, by_beta, elapsed = example2_runs
    checks = []
    for beta in (0.1, 0.9):
        slot = by_beta[beta][1.0]
        rock = dict(slot["rock"])[1.0]
        checks.append(bool(np.all(rock.t_star == 0.0))
                      and np.array_equal(rock.z_star, slot["corrupted"].z_star))
    _, runs, _ = example1_runs
    for _, _, _, res_c, rocks, _, _ in runs:
        rock = dict(rocks)[1e6]
        checks.append(bool(np.all(rock.t_star == 0.0)) and np.array_equal(rock.z_star, res_c.z_star))
    criterion(8, all(checks) and elapsed < 600,
              f"Example 2 theta=1 and Example 1 theta=1e6: {sum(checks)}/{len(checks)} anchored")


def test_09_example2_improvement(criterion, example2_runs):
    cfg, mesh, mats, by_beta, elapsed = example2_runs
    ratios = {}
    for beta in (0.1, 0.9):
        z_true = by_beta[beta]["true"].z_star
        slot = by_beta[beta][1.0]
        rock = dict(slot["rock"])[0.1]
        ratios[beta] = (relative_l2_error(slot["corrupted"].z_star, z_true, mats.mass)
                        / relative_l2_error(rock.z_star, z_true, mats.mass))
    ok = all(r > 1 for r in ratios.values()) and elapsed < 600
    criterion(9, ok, f"{mesh.dof_count} dofs: E_ratio beta=0.1 {ratios[0.1]:.2f}, "
                     f"beta=0.9 {ratios[0.9]:.2f}; {elapsed:.0f}s")


def test_10_cdf_sanity(criterion, tmp_path):
    t0 = time.perf_counter()
    rep = empirical_cdf(experiments.IdentitySurrogate(), None, 2 ** 12)
    q = [rep.quantiles[l] for l in QUANTILE_LEVELS]
    med_err = abs(rep.quantiles[0.5] - 2.745727328283309)
    t_sur = time.perf_counter() - t0

    t0 = time.perf_counter()
    cfg = dataclasses.replace(load_config("cdf_desk.cfg"), output_dir=str(tmp_path), workers=1)
    experiments.run(cfg)
    rows = list(csv.DictReader(open(tmp_path / "table4.csv")))
    cols = [f"q{l:g}" for l in QUANTILE_LEVELS]
    pde_mono = all(np.all(np.diff([float(r[c]) for c in cols]) >= 0) for r in rows)
    t_pde = time.perf_counter() - t0
    ok = (np.all(np.diff(q) >= 0) and med_err <= 1e-2 and t_sur < 180 and pde_mono
          and len(rows) > 0 and t_pde < 900)
    criterion(10, ok, f"surrogate median err={med_err:.2e} ({t_sur:.2f}s); "
                      f"{len(rows)} PDE-backed CDFs monotone={pde_mono} ({t_pde:.0f}s)")


def test_11_density_normalization(criterion):
    t0 = time.perf_counter()
    x, w = gauss_legendre(1000, 0.0, 20.0)
    errs = {k.value: abs(w @ density_eval(DensitySpec(k), x) - 1.0) for k in DensityKind}
    dt = time.perf_counter() - t0
    criterion(11, max(errs.values()) <= 1e-8 and dt < 1.0,
              ", ".join(f"{k}: {v:.1e}" for k, v in errs.items()) + f", {dt:.3f}s")
