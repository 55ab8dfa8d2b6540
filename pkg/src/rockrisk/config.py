"""Experiment configuration: INI-style ``key = value`` files with sections."""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


EXPERIMENTS = ("example1", "example2", "cdf")


@dataclass
class ExperimentConfig:
    experiment: str = "example1"
    output_dir: str = "out"
    seed: int = 1
    workers: int = 1
    # risk and relaxation
    beta_list: list = field(default_factory=lambda: [0.5])
    corruption_levels: list = field(default_factory=lambda: [0.05])
    theta_list: list = field(default_factory=lambda: [0.1])
    alpha: float = 1e-5
    delta: float = 1e-3
    delta_continuation: list = field(default_factory=lambda: [0.1, 0.01])
    bound_mode: str = "tight"
    # example 1
    n_samples: int = 500
    n_cells: int = 64
    sigma: float = 0.4
    kkl_terms: int = 50
    corruption_factor: float = 5.0
    # example 2
    n_gq: int = 15
    refinement: int = 4
    v_max: float = 20.0
    k_rate: float = 0.25
    a_shift: float = 5.0
    source: float = 0.0  # constant source term f added to the control
    # cdf study
    n_sobol: int = 4096
    surrogate: bool = False
    controls_file: str = ""
    # solver
    gamma_tol: float = 1e-4
    max_outer: int = 100
    t_tol: float = 1e-3
    max_adi: int = 50
    grad_tol: float = 1e-6
    history: int = 9
    max_iters: int = 500

    def validate(self) -> "ExperimentConfig":
        def bad(name, msg):
            raise ConfigError(f"{name}: {msg}")

        if self.experiment not in EXPERIMENTS:
            bad("experiment", f"must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if not self.beta_list:
            bad("beta_list", "must not be empty")
        for b in self.beta_list:
            if not 0.0 < b < 1.0:
                bad("beta_list", f"each beta must satisfy 0 < beta < 1 (got {b})")
        for c in self.corruption_levels:
            if not 0.0 <= c <= 1.0:
                bad("corruption_levels", f"each level must lie in [0, 1] (got {c})")
        for t in self.theta_list:
            if not t >= 0.0:
                bad("theta_list", f"each theta must be >= 0 (got {t})")
        if not self.alpha > 0:
            bad("alpha", "must be > 0")
        if not self.delta > 0:
            bad("delta", "must be > 0")
        if any(not d > 0 for d in self.delta_continuation):
            bad("delta_continuation", "levels must be > 0")
        if self.bound_mode not in ("tight", "full", "density"):
            bad("bound_mode", "must be tight, full or density")
        if self.workers < 1:
            bad("workers", "must be >= 1")
        for name in ("n_samples", "n_cells", "kkl_terms", "n_gq", "n_sobol", "max_outer",
                     "max_adi", "history", "max_iters"):
            if getattr(self, name) < 1:
                bad(name, "must be >= 1")
        if not np.isfinite(self.source):
            bad("source", "must be finite")
        if self.n_cells < 2:
            bad("n_cells", "must be >= 2")
        if self.refinement < 0:
            bad("refinement", "must be >= 0")
        for name in ("gamma_tol", "t_tol", "grad_tol", "v_max", "k_rate", "a_shift", "sigma"):
            if not getattr(self, name) > 0:
                bad(name, "must be > 0")
        return self


# paper-scale parameters switched on by --full-scale
FULL_SCALE = {
    "example1": dict(n_samples=5000, n_cells=128, beta_list=[0.1, 0.5, 0.9],
                     corruption_levels=[0.01, 0.05, 0.2, 0.4], theta_list=[0.1], alpha=1e-5),
    "example2": dict(refinement=5, n_gq=15, beta_list=[0.1, 0.5, 0.9],
                     corruption_levels=[0.0, 0.5, 1.0], theta_list=[0.1, 0.01], alpha=1e-4,
                     bound_mode="density"),
    "cdf": dict(refinement=5, n_gq=15, n_sobol=2 ** 17, alpha=1e-4, bound_mode="density"),
}

_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _coerce(name: str, raw: str):
    default = ExperimentConfig.__dataclass_fields__[name]
    kind = type(default.default) if default.default is not dataclasses.MISSING else list
    try:
        if kind is list:
            return [float(v) for v in raw.replace(";", ",").split(",") if v.strip()]
        if kind is bool:
            low = raw.strip().lower()
            if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                raise ValueError(raw)
            return low in ("1", "true", "yes", "on")
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw.strip()
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {kind.__name__}") from None


def bundled_config(name: str) -> Path | None:
    ref = resources.files("rockrisk") / "configs" / name
    return Path(str(ref)) if ref.is_file() else None


def load_config(path) -> ExperimentConfig:
    """Read a config file; keys may sit in any section. Unknown keys are errors."""
    p = Path(path)
    if not p.exists():
        alt = bundled_config(p.name)
        if alt is None:
            raise ConfigError(f"config: file not found: {path}")
        p = alt
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read_string("[DEFAULT]\n" + p.read_text())
    except configparser.Error as exc:
        raise ConfigError(f"config: {exc}") from None
    values = {}
    for section in [parser.default_section] + parser.sections():
        items = parser[section].items() if section != parser.default_section else parser.defaults().items()
        for key, raw in items:
            if key not in _FIELDS:
                raise ConfigError(f"{key}: unknown configuration key")
            values[key] = _coerce(key, raw)
    cfg = ExperimentConfig(**values)
    return cfg


def apply_overrides(cfg: ExperimentConfig, full_scale: bool = False, **overrides) -> ExperimentConfig:
    if full_scale:
        cfg = dataclasses.replace(cfg, **FULL_SCALE[cfg.experiment])
    clean = {k: v for k, v in overrides.items() if v is not None}
    return dataclasses.replace(cfg, **clean)
