"""Distribution of the tracking cost under the clean density.

An optimal control is judged by how the random objective ``j(xi, z)`` is
distributed when xi follows the clean density. The parameter samples are van der
Corput points pushed through the inverse CDF of the truncated exponential. The
script prints nearest-rank quantiles for the clean, corrupted and Rockafellian
controls and writes the CDFs to an SVG file.
"""

from __future__ import annotations

import sys

from rockrisk.analysis import QUANTILE_LEVELS, emit_svg_cdf, empirical_cdf
from rockrisk.nqe import NqeConfig, nqe_solve
from rockrisk.pde2d import AdvectionControl2D, AdvectionField, assemble_matrices, build_mesh
from rockrisk.rockafellian import BoundMode, RockConfig, adi_minimize
from rockrisk.sampling import DensitySpec, quadrature_scenarios


def main(out: str = "cdf_demo.svg", n_sobol: int = 2 ** 10):
    mesh = build_mesh(3)
    mats, adv = assemble_matrices(mesh), AdvectionField()
    cfg = NqeConfig(beta=0.9, alpha=1e-4, continuation=(0.1, 0.01))

    controls = {}
    s0 = quadrature_scenarios(15, DensitySpec.for_corruption(0.0))
    p0 = AdvectionControl2D(mesh, adv, s0, mats=mats)
    controls["clean"] = nqe_solve(p0, s0, cfg).z_star
    s1 = quadrature_scenarios(15, DensitySpec.for_corruption(1.0))
    p1 = AdvectionControl2D(mesh, adv, s1, mats=mats)
    controls["corrupted"] = nqe_solve(p1, s1, cfg).z_star
    controls["Rockafellian"] = adi_minimize(
        p1, s1, cfg, RockConfig(0.1, bound_mode=BoundMode.DENSITY)).z_star

    reports = {k: empirical_cdf(p0, z, n_sobol) for k, z in controls.items()}
    print("control        " + "".join(f"q{q:<9g}" for q in QUANTILE_LEVELS))
    for k, rep in reports.items():
        print(f"{k:<14} " + "".join(f"{rep.quantiles[q]:<10.4g}" for q in QUANTILE_LEVELS))
    emit_svg_cdf(reports, out, title="j(xi, z) under the clean density", dashed=["corrupted"])
    print(f"wrote {out}")


if __name__ == "__main__":
    main(*sys.argv[1:2])
