"""Error metrics, empirical CDFs of the random objective, and CSV/SVG output."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping
from xml.sax.saxutils import escape

import numpy as np
import scipy.sparse as sp

from .sampling import DensityKind, DensitySpec, inverse_cdf_truncexp, sobol_1d

QUANTILE_LEVELS = (0.5, 0.75, 0.9, 0.95, 0.99)

TABLE1_COLUMNS = ("corruption", "E_rel", "E_ratio", "corrupted_deleted", "clean_deleted")
TABLE3_COLUMNS = ("beta", "corruption", "theta", "E_rel", "E_ratio")
TABLE4_COLUMNS = ("beta", "corruption", "theta", "min", "max") + tuple(
    f"q{q:g}" for q in QUANTILE_LEVELS)


def _mass_inner(mass, u, v) -> float:
    if callable(mass):
        return float(u @ mass(v))
    if sp.issparse(mass) or (isinstance(mass, np.ndarray) and mass.ndim == 2):
        return float(u @ (mass @ v))
    return float(np.sum(np.asarray(mass) * u * v))


def relative_l2_error(z, z_true, mass) -> float:
    """Squared-norm ratio ``||z - z_true||^2 / ||z_true||^2``.

    ``mass`` is a diagonal weight vector, a matrix, or a callable applying one.
    """
    z = np.asarray(z, dtype=float)
    z_true = np.asarray(z_true, dtype=float)
    ref = _mass_inner(mass, z_true, z_true)
    if not ref > 0:
        raise ValueError("reference control has zero norm")
    d = z - z_true
    return _mass_inner(mass, d, d) / ref


@dataclass(frozen=True)
class ErrorReport:
    e_rel_rock: float
    e_rel_corrupted: float

    @property
    def e_ratio(self) -> float:
        return self.e_rel_corrupted / self.e_rel_rock if self.e_rel_rock > 0 else math.inf

    @classmethod
    def from_controls(cls, z_rock, z_corrupted, z_true, mass) -> "ErrorReport":
        return cls(relative_l2_error(z_rock, z_true, mass),
                   relative_l2_error(z_corrupted, z_true, mass))


def nearest_rank_quantile(sorted_values, q: float) -> float:
    n = len(sorted_values)
    k = min(max(math.ceil(q * n) - 1, 0), n - 1)
    return float(sorted_values[k])


@dataclass
class CdfReport:
    sorted_values: np.ndarray
    quantiles: dict = field(default_factory=dict)

    @classmethod
    def from_values(cls, values, levels: Iterable[float] = QUANTILE_LEVELS) -> "CdfReport":
        v = np.sort(np.asarray(values, dtype=float))
        if v.size == 0:
            raise ValueError("no samples")
        return cls(v, {q: nearest_rank_quantile(v, q) for q in levels})

    @property
    def min(self) -> float:
        return float(self.sorted_values[0])

    @property
    def max(self) -> float:
        return float(self.sorted_values[-1])

    def shifted(self, c: float) -> "CdfReport":
        return CdfReport(self.sorted_values + c, {q: v + c for q, v in self.quantiles.items()})

    def cdf(self, x) -> np.ndarray:
        """Right-continuous empirical distribution function."""
        return np.searchsorted(self.sorted_values, x, side="right") / self.sorted_values.size


def empirical_cdf(problem, z, n_sobol: int, density: DensitySpec | None = None,
                  alpha: float | None = None) -> CdfReport:
    """CDF of ``xi -> j(xi, z)`` with ``xi`` drawn from the truncated exponential.

    Points are the first ``n_sobol`` van der Corput points pushed through the
    inverse CDF. ``problem.sample_values(xis, z)`` evaluates the objective. With
    ``alpha`` the report is of the total cost ``j + alpha/2 ||z||^2``.
    """
    density = density or DensitySpec()
    if density.kind is not DensityKind.TRUNC_EXP:
        raise ValueError("CDFs are evaluated under the truncated exponential density")
    xis = inverse_cdf_truncexp(sobol_1d(n_sobol), density.k, density.support_max)
    rep = CdfReport.from_values(problem.sample_values(xis, z))
    if alpha is not None:
        rep = rep.shifted(0.5 * alpha * problem.norm_sq(z))
    return rep


def cdf_row(report: CdfReport, **params) -> dict:
    row = dict(params)
    row["min"] = report.min
    row["max"] = report.max
    for q, v in report.quantiles.items():
        row[f"q{q:g}"] = v
    return row


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    return v


def emit_table(rows: list[Mapping], path, columns: Iterable[str] = TABLE1_COLUMNS):
    """Write rows as CSV: the given columns first, then any extra keys in first-seen order."""
    cols = list(columns)
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(r.get(c, "")) for c in cols])
    return path


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf",
            "#7f7f7f", "#bcbd22", "#e377c2")


def emit_svg_cdf(reports: Mapping[str, CdfReport], path, title: str = "",
                 width: int = 640, height: int = 420, dashed: Iterable[str] = ()):
    """Step plots of empirical CDFs as a standalone SVG 1.1 file."""
    dashed = set(dashed)
    ml, mr, mt, mb = 64, 160, 36, 48
    pw, ph = width - ml - mr, height - mt - mb
    if reports:
        lo = min(r.min for r in reports.values())
        hi = max(r.max for r in reports.values())
    else:
        lo, hi = 0.0, 1.0
    if hi <= lo:
        hi = lo + 1.0
    X = lambda x: ml + (x - lo) / (hi - lo) * pw
    Y = lambda y: mt + (1.0 - y) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" '
           f'height="{height}" viewBox="0 0 {width} {height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    if title:
        out.append(f'<text x="{ml + pw / 2}" y="{mt - 12}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="14">{escape(title)}</text>')
    for i in range(5):
        fx = lo + (hi - lo) * i / 4
        fy = i / 4
        out.append(f'<line x1="{X(fx):.2f}" y1="{mt + ph}" x2="{X(fx):.2f}" y2="{mt + ph + 5}" '
                   'stroke="black"/>')
        out.append(f'<text x="{X(fx):.2f}" y="{mt + ph + 20}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="11">{fx:.4g}</text>')
        out.append(f'<line x1="{ml - 5}" y1="{Y(fy):.2f}" x2="{ml}" y2="{Y(fy):.2f}" '
                   'stroke="black"/>')
        out.append(f'<text x="{ml - 8}" y="{Y(fy) + 4:.2f}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="11">{fy:.2f}</text>')

    for k, (label, rep) in enumerate(reports.items()):
        v = rep.sorted_values
        n = v.size
        # thin very long step sequences; keep the first and last points
        stride = max(1, n // 2000)
        idx = np.unique(np.r_[np.arange(0, n, stride), n - 1])
        pts = [(X(v[0]), Y(0.0))]
        prev_y = 0.0
        for i in idx:
            y = (i + 1) / n
            pts.append((X(v[i]), Y(prev_y)))
            pts.append((X(v[i]), Y(y)))
            prev_y = y
        color = _PALETTE[k % len(_PALETTE)]
        dash = ' stroke-dasharray="6,4"' if label in dashed else ""
        coords = " ".join(f"{a:.2f},{b:.2f}" for a, b in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} '
                   f'points="{coords}"/>')
        ly = mt + 14 + 18 * k
        out.append(f'<line x1="{ml + pw + 10}" y1="{ly}" x2="{ml + pw + 34}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"{dash}/>')
        out.append(f'<text x="{ml + pw + 40}" y="{ly + 4}" font-family="sans-serif" '
                   f'font-size="11">{escape(label)}</text>')
    out.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n")
    return path
