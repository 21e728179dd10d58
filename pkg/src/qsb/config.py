"""TOML run configuration: parsing, validation, and pipeline assembly.

A run file looks like

    [grid]
    band_limit = 8

    [metric]
    r = 1.0
    phi_harmonics = [[2, 2, 0.1, 0.0]]      # rows l, m, re, im
    # or phi_grid_file = "phi.csv"
    # or K_harmonics / K_grid_file (solved for the conformal factor)

    [H]
    constant = 2.0
    # or harmonics = [[...]] or grid_file = "H.csv"

    [path]
    nodes = 65
    gauge_tol = 1e-8

    [uniformization]
    tol = 1e-10
    max_iter = 60

    [reparameterization]
    family = "ode_sqrt"
    budget = 120

    [extension]
    s_max = 1000.0

    [output]
    report = "report.json"

Exactly one metric input and one mean-curvature input must be given; file
paths are resolved relative to the config file.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigurationError
from .grid import ScalarField, SphereGrid, build_grid
from .metric import BoundaryData, ConformalMetric, make_metric
from . import fileio

__all__ = ["RunConfig", "load_config", "build_boundary_data"]

_METRIC_KEYS = ("phi_harmonics", "phi_grid_file", "K_harmonics", "K_grid_file")
_H_KEYS = ("constant", "harmonics", "grid_file")


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration with defaults filled in."""

    band_limit: int
    metric_kind: str
    metric_data: object
    metric_r: float
    h_kind: str
    h_data: object
    path_nodes: int = 65
    gauge_tol: float = 1e-8
    uniformization_tol: float = 1e-10
    uniformization_max_iter: int = 60
    rep_family: str = "ode_sqrt"
    rep_k: float | None = None
    budget: int = 120
    s_max: float = 1000.0
    local_error_target: float = 1e-10
    max_step: float = 4e-3
    fit_window: tuple = (0.5, 1.0)
    output_report: str = "report.json"
    output_series: str | None = None
    base_dir: Path = field(default_factory=Path)

    def tolerances(self) -> dict:
        return {
            "gauge_tol": self.gauge_tol,
            "uniformization_tol": self.uniformization_tol,
            "local_error_target": self.local_error_target,
            "fit_window": list(self.fit_window),
        }


def _exactly_one(section: dict, keys, what: str) -> str:
    present = [k for k in keys if k in section]
    if len(present) != 1:
        raise ConfigurationError(
            f"exactly one of {keys} required for {what}, found {present or 'none'}"
        )
    return present[0]


def load_config(path) -> RunConfig:
    """Parse and validate a TOML run configuration."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid TOML ({exc})") from exc

    grid_sec = raw.get("grid", {})
    band_limit = int(grid_sec.get("band_limit", 8))

    metric_sec = raw.get("metric", {})
    metric_key = _exactly_one(metric_sec, _METRIC_KEYS, "[metric]")
    h_sec = raw.get("H", {})
    h_key = _exactly_one(h_sec, _H_KEYS, "[H]")

    path_sec = raw.get("path", {})
    uni_sec = raw.get("uniformization", {})
    rep_sec = raw.get("reparameterization", {})
    ext_sec = raw.get("extension", {})
    out_sec = raw.get("output", {})

    cfg = RunConfig(
        band_limit=band_limit,
        metric_kind=metric_key,
        metric_data=metric_sec[metric_key],
        metric_r=float(metric_sec.get("r", 1.0)),
        h_kind=h_key,
        h_data=h_sec[h_key],
        path_nodes=int(path_sec.get("nodes", 65)),
        gauge_tol=float(path_sec.get("gauge_tol", 1e-8)),
        uniformization_tol=float(uni_sec.get("tol", 1e-10)),
        uniformization_max_iter=int(uni_sec.get("max_iter", 60)),
        rep_family=str(rep_sec.get("family", "ode_sqrt")),
        rep_k=float(rep_sec["k"]) if "k" in rep_sec else None,
        budget=int(rep_sec.get("budget", 120)),
        s_max=float(ext_sec.get("s_max", 1000.0)),
        local_error_target=float(ext_sec.get("local_error_target", 1e-10)),
        max_step=float(ext_sec.get("max_step", 4e-3)),
        fit_window=tuple(ext_sec.get("fit_window", (0.5, 1.0))),
        output_report=str(out_sec.get("report", "report.json")),
        output_series=str(out_sec["series"]) if "series" in out_sec else None,
        base_dir=path.parent,
    )
    for name in ("gauge_tol", "uniformization_tol", "local_error_target"):
        if getattr(cfg, name) <= 0.0:
            raise ConfigurationError(f"{name} must be positive")
    return cfg


def _resolve(cfg: RunConfig, rel) -> Path:
    p = Path(rel)
    return p if p.is_absolute() else cfg.base_dir / p


def _scalar_input(cfg: RunConfig, grid: SphereGrid, kind: str, data) -> ScalarField:
    if kind.endswith("harmonics"):
        rows = [(int(r[0]), int(r[1]), float(r[2]), float(r[3])) for r in data]
        return fileio.field_from_harmonics(grid, rows)
    return fileio.read_field_csv(_resolve(cfg, data), grid)


def build_metric(cfg: RunConfig, grid: SphereGrid) -> ConformalMetric:
    """Metric from the configured input, via uniformization for K targets."""
    if cfg.metric_kind.startswith("phi"):
        phi_raw = _scalar_input(cfg, grid, cfg.metric_kind, cfg.metric_data)
        return make_metric(phi_raw, cfg.metric_r)
    from .uniformize import solve_conformal_factor

    k_target = _scalar_input(cfg, grid, cfg.metric_kind, cfg.metric_data)
    sol = solve_conformal_factor(
        k_target, tol=cfg.uniformization_tol, max_iter=cfg.uniformization_max_iter
    )
    solved = sol.metric
    return ConformalMetric(cfg.metric_r * solved.r, solved.phi)


def build_boundary_data(cfg: RunConfig, grid: SphereGrid | None = None) -> BoundaryData:
    grid = grid or build_grid(cfg.band_limit)
    metric = build_metric(cfg, grid)
    if cfg.h_kind == "constant":
        H = ScalarField.constant(grid, float(cfg.h_data))
    else:
        H = _scalar_input(cfg, grid, cfg.h_kind, cfg.h_data)
    if H.values.min() <= 0.0:
        raise ConfigurationError(
            f"configured mean curvature not positive (min {H.values.min():.3e})"
        )
    return BoundaryData(metric, H)
