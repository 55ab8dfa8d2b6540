"""Experiment drivers producing the tables, control dumps and CDF figures."""

from __future__ import annotations

import csv
import logging
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import pde1d, pde2d
from .analysis import (TABLE1_COLUMNS, TABLE3_COLUMNS, TABLE4_COLUMNS, CdfReport, ErrorReport,
                       cdf_row, emit_svg_cdf, emit_table, empirical_cdf)
from .config import ExperimentConfig
from .nqe import NqeConfig, nqe_solve
from .optim import LbfgsOptions
from .rockafellian import BoundMode, RockConfig, adi_minimize
from .sampling import (DensitySpec, corrupt_by_scaling, quadrature_scenarios,
                       sample_gaussian_scenarios)

logger = logging.getLogger(__name__)


def nqe_config(cfg: ExperimentConfig, beta: float) -> NqeConfig:
    return NqeConfig(beta=beta, alpha=cfg.alpha, delta=cfg.delta, gamma_tol=cfg.gamma_tol,
                     max_outer=cfg.max_outer,
                     continuation=tuple(d for d in cfg.delta_continuation if d > cfg.delta),
                     lbfgs=LbfgsOptions(history=cfg.history, grad_tol=cfg.grad_tol,
                                        max_iters=cfg.max_iters))


def rock_config(cfg: ExperimentConfig, theta: float, mode: str | None = None) -> RockConfig:
    return RockConfig(theta=theta, t_tol=cfg.t_tol, max_adi=cfg.max_adi,
                      bound_mode=BoundMode(mode or cfg.bound_mode))


def _pmap(fn, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as ex:
        return list(ex.map(fn, tasks))


def _atomic_write(path: Path, writer):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _write_rows(path: Path, header, rows):
    def w(tmp):
        with open(tmp, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(header)
            for r in rows:
                wr.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    _atomic_write(path, w)


def _label(beta, level, theta=None):
    th = "none" if theta is None else f"{theta:g}"
    return f"beta{beta:g}_c{level:g}_theta{th}"


# --------------------------------------------------------------------------
# Example 1
# --------------------------------------------------------------------------

def _ex1_problem(cfg: ExperimentConfig, level: float):
    grid = pde1d.Grid1D(cfg.n_cells)
    field = pde1d.KklField(cfg.sigma, cfg.kkl_terms)
    clean = sample_gaussian_scenarios(cfg.n_samples, cfg.kkl_terms, cfg.seed)
    scen = corrupt_by_scaling(clean, level, cfg.corruption_factor) if level > 0 else clean
    return pde1d.DiffusionControl1D(grid, field, scen), scen


def _ex1_task(args):
    cfg, beta, level = args
    ncfg = nqe_config(cfg, beta)
    prob_t, scen_t = _ex1_problem(cfg, 0.0)
    res_t = nqe_solve(prob_t, scen_t, ncfg)
    prob_c, scen_c = _ex1_problem(cfg, level)
    res_c = nqe_solve(prob_c, scen_c, ncfg)
    rocks = []
    for theta in cfg.theta_list:
        rocks.append((theta, adi_minimize(prob_c, scen_c, ncfg, rock_config(cfg, theta))))
    return beta, level, res_t, res_c, rocks, scen_c.corrupted_mask.sum(), len(scen_c)


def solve_example1(cfg: ExperimentConfig) -> list[tuple]:
    """All Example 1 solves, one tuple per ``(beta, corruption)``.

    Tuples hold ``(beta, level, true_result, corrupted_result, [(theta, rock_result)],
    n_corrupted, n_samples)``.
    """
    tasks = [(cfg, b, c) for b in cfg.beta_list for c in cfg.corruption_levels]
    return _pmap(_ex1_task, tasks, cfg.workers)


def run_example1(cfg: ExperimentConfig, out: Path) -> list[Path]:
    results = solve_example1(cfg)
    mass = pde1d.Grid1D(cfg.n_cells).mass
    table, nqe_rows, adi_rows = [], [], []
    controls = {}
    for beta, level, res_t, res_c, rocks, n_corr, n in results:
        controls[_label(beta, 0.0)] = res_t.z_star
        controls[_label(beta, level)] = res_c.z_star
        for run, r in (("true", res_t), ("corrupted", res_c)):
            for it, g, obj, resid, dl in r.trace:
                nqe_rows.append([beta, level, "", run, it, g, obj, resid, dl])
        for theta, rr in rocks:
            controls[_label(beta, level, theta)] = rr.z_star
            rep = ErrorReport.from_controls(rr.z_star, res_c.z_star, res_t.z_star, mass)
            n_clean = n - n_corr
            table.append({
                "corruption": level, "E_rel": rep.e_rel_rock, "E_ratio": rep.e_ratio,
                "corrupted_deleted": rr.corrupted_deleted / n_corr if n_corr else 0.0,
                "clean_deleted": rr.clean_deleted / n_clean if n_clean else 0.0,
                "beta": beta, "theta": theta, "E_rel_corrupted": rep.e_rel_corrupted,
                "corrupted_deleted_count": rr.corrupted_deleted, "corrupted_total": int(n_corr),
                "clean_deleted_count": rr.clean_deleted, "clean_total": int(n_clean),
                "n_samples": cfg.n_samples, "n_cells": cfg.n_cells, "seed": cfg.seed,
                "alpha": cfg.alpha, "delta": cfg.delta,
                "residual_true": res_t.optimality_residual,
                "residual_corrupted": res_c.optimality_residual,
                "residual_rock": rr.nqe.optimality_residual,
                "converged_true": res_t.converged, "converged_corrupted": res_c.converged,
                "converged_rock": rr.converged, "adi_iters": rr.adi_iters,
            })
            for it, g, obj, resid, dl in rr.nqe.trace:
                nqe_rows.append([beta, level, theta, "rock_final", it, g, obj, resid, dl])
            for it, phi, dist, cd, kd in rr.trace:
                adi_rows.append([beta, level, theta, it, phi, dist, cd, kd])

    paths = [out / "table1.csv", out / "controls.csv", out / "nqe_trace.csv", out / "adi_trace.csv"]
    _atomic_write(paths[0], lambda p: emit_table(table, p, TABLE1_COLUMNS))
    x = pde1d.Grid1D(cfg.n_cells).nodes
    _atomic_write(paths[1], lambda p: pde1d.write_profile_csv(p, x, controls))
    _write_rows(paths[2], ["beta", "corruption", "theta", "run", "iter", "gamma", "objective",
                           "residual", "delta"], nqe_rows)
    _write_rows(paths[3], ["beta", "corruption", "theta", "iter", "phi", "l1_distance",
                           "corrupted_deleted", "clean_deleted"], adi_rows)
    return paths


# --------------------------------------------------------------------------
# Example 2
# --------------------------------------------------------------------------

def _ex2_setup(cfg: ExperimentConfig):
    mesh = pde2d.build_mesh(cfg.refinement)
    return mesh, pde2d.assemble_matrices(mesh), pde2d.AdvectionField(cfg.v_max)


def _ex2_problem(cfg, mesh, mats, adv, level):
    dens = DensitySpec.for_corruption(level, k=cfg.k_rate, a=cfg.a_shift, support_max=cfg.v_max)
    scen = quadrature_scenarios(cfg.n_gq, dens)
    f = np.full(mesh.dof_count, cfg.source)
    return pde2d.AdvectionControl2D(mesh, adv, scen, f=f, mats=mats), scen


def _ex2_task(args):
    cfg, beta, level, with_true = args
    mesh, mats, adv = _ex2_setup(cfg)
    ncfg = nqe_config(cfg, beta)
    out = {"beta": beta, "level": level}
    if with_true:
        prob, scen = _ex2_problem(cfg, mesh, mats, adv, 0.0)
        out["true"] = nqe_solve(prob, scen, ncfg)
    prob, scen = _ex2_problem(cfg, mesh, mats, adv, level)
    out["corrupted"] = nqe_solve(prob, scen, ncfg) if level > 0 else None
    out["rock"] = [(th, adi_minimize(prob, scen, ncfg, rock_config(cfg, th, "density")))
                   for th in cfg.theta_list]
    return out


def solve_example2(cfg: ExperimentConfig):
    """All Example 2 solves; returns ``{beta: {"true": res, level: task_output}}``."""
    tasks = [(cfg, b, c, c == 0.0) for b in cfg.beta_list for c in cfg.corruption_levels]
    # the uncorrupted reference is always needed
    for b in cfg.beta_list:
        if 0.0 not in cfg.corruption_levels:
            tasks.append((cfg, b, 0.0, True))
    results = _pmap(_ex2_task, tasks, cfg.workers)
    by_beta: dict = {}
    for r in results:
        slot = by_beta.setdefault(r["beta"], {})
        if "true" in r:
            slot["true"] = r["true"]
        if r["level"] in cfg.corruption_levels:
            slot[r["level"]] = r
    return by_beta


def run_example2(cfg: ExperimentConfig, out: Path) -> list[Path]:
    mesh, mats, _ = _ex2_setup(cfg)
    by_beta = solve_example2(cfg)
    table, nqe_rows, adi_rows = [], [], []
    controls = {}
    for beta in cfg.beta_list:
        slot = by_beta[beta]
        z_true = slot["true"].z_star
        controls[_label(beta, 0.0)] = z_true
        for it, g, obj, resid, dl in slot["true"].trace:
            nqe_rows.append([beta, 0.0, "", "true", it, g, obj, resid, dl])
        for level in cfg.corruption_levels:
            r = slot[level]
            z_corr = r["corrupted"].z_star if r["corrupted"] is not None else z_true
            if r["corrupted"] is not None:
                controls[_label(beta, level)] = z_corr
                for it, g, obj, resid, dl in r["corrupted"].trace:
                    nqe_rows.append([beta, level, "", "corrupted", it, g, obj, resid, dl])
            for theta, rr in r["rock"]:
                controls[_label(beta, level, theta)] = rr.z_star
                e_rock = ErrorReport.from_controls(rr.z_star, z_corr, z_true, mats.mass)
                table.append({
                    "beta": beta, "corruption": level, "theta": theta,
                    "E_rel": e_rock.e_rel_rock,
                    "E_ratio": e_rock.e_ratio if level > 0 else float("nan"),
                    "E_rel_corrupted": e_rock.e_rel_corrupted,
                    "t_zero": bool(np.all(rr.t_star == 0)),
                    "t_max_abs": float(np.max(np.abs(rr.t_star))),
                    "refinement": cfg.refinement, "dofs": mesh.dof_count, "n_gq": cfg.n_gq,
                    "alpha": cfg.alpha, "delta": cfg.delta,
                    "residual_rock": rr.nqe.optimality_residual,
                    "converged_rock": rr.converged, "adi_iters": rr.adi_iters,
                })
                for it, phi, dist, cd, kd in rr.trace:
                    adi_rows.append([beta, level, theta, it, phi, dist, cd, kd])

    paths = [out / "table3.csv", out / "controls_2d.csv", out / "nqe_trace.csv",
             out / "adi_trace.csv"]
    _atomic_write(paths[0], lambda p: emit_table(table, p, TABLE3_COLUMNS))
    _atomic_write(paths[1], lambda p: pde2d.write_nodal_csv(p, mesh, controls))
    _write_rows(paths[2], ["beta", "corruption", "theta", "run", "iter", "gamma", "objective",
                           "residual", "delta"], nqe_rows)
    _write_rows(paths[3], ["beta", "corruption", "theta", "iter", "phi", "l1_distance",
                           "corrupted_deleted", "clean_deleted"], adi_rows)
    return paths


# --------------------------------------------------------------------------
# CDF study
# --------------------------------------------------------------------------

class IdentitySurrogate:
    """``j(xi, z) = xi``: a control-independent stand-in with a known CDF."""

    def sample_values(self, xis, z):
        return np.asarray(xis, dtype=float)

    def norm_sq(self, z) -> float:
        return 0.0


def _read_controls(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0][2:]
    data = np.array([[float(v) for v in r[2:]] for r in rows[1:]])
    return {name: data[:, j] for j, name in enumerate(header)}


def _parse_label(label: str):
    b, c, t = label.split("_")
    theta = None if t == "thetanone" else float(t[len("theta"):])
    return float(b[len("beta"):]), float(c[1:]), theta


def run_cdf_study(cfg: ExperimentConfig, out: Path) -> list[Path]:
    paths = []
    if cfg.surrogate:
        rep = empirical_cdf(IdentitySurrogate(), None, cfg.n_sobol)
        rows = [cdf_row(rep, beta="", corruption="", theta="", case="surrogate_identity")]
        paths.append(out / "table4.csv")
        _atomic_write(paths[-1], lambda p: emit_table(rows, p, TABLE4_COLUMNS))
        paths.append(out / "cdf_surrogate.svg")
        _atomic_write(paths[-1], lambda p: emit_svg_cdf({"j(xi) = xi": rep}, p,
                                                        title="surrogate CDF"))
        return paths

    mesh, mats, adv = _ex2_setup(cfg)
    if cfg.controls_file:
        controls = _read_controls(cfg.controls_file)
    else:
        by_beta = solve_example2(cfg)
        controls = {}
        for beta, slot in by_beta.items():
            controls[_label(beta, 0.0)] = slot["true"].z_star
            for level in cfg.corruption_levels:
                r = slot[level]
                if r["corrupted"] is not None:
                    controls[_label(beta, level)] = r["corrupted"].z_star
                for theta, rr in r["rock"]:
                    controls[_label(beta, level, theta)] = rr.z_star

    evaluator = pde2d.AdvectionControl2D(mesh, adv, quadrature_scenarios(1, DensitySpec()),
                                         f=np.full(mesh.dof_count, cfg.source),
                                         mats=mats)
    rows = []
    per_beta: dict = {}
    for label in sorted(controls):
        beta, level, theta = _parse_label(label)
        z = controls[label]
        rep_j = empirical_cdf(evaluator, z, cfg.n_sobol)
        rep_total = rep_j.shifted(0.5 * cfg.alpha * evaluator.norm_sq(z))
        rows.append(cdf_row(rep_total, beta=beta, corruption=level,
                            theta="--" if theta is None else theta, case=label))
        per_beta.setdefault(beta, {})[label] = (rep_j, rep_total, theta is None)

    paths.append(out / "table4.csv")
    _atomic_write(paths[-1], lambda p: emit_table(rows, p, TABLE4_COLUMNS))
    for beta, reps in sorted(per_beta.items()):
        dashed = [k for k, v in reps.items() if v[2]]
        for which, idx in (("objective", 0), ("total", 1)):
            path = out / f"cdf_beta{beta:g}_{which}.svg"
            _atomic_write(path, lambda p: emit_svg_cdf({k: v[idx] for k, v in reps.items()}, p,
                                                       title=f"beta = {beta:g}: {which}",
                                                       dashed=dashed))
            paths.append(path)
    return paths


RUNNERS = {"example1": run_example1, "example2": run_example2, "cdf": run_cdf_study}


def run(cfg: ExperimentConfig) -> list[Path]:
    cfg.validate()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return RUNNERS[cfg.experiment](cfg, out)
