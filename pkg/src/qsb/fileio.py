"""File formats: field CSV, harmonic-coefficient CSV, JSON reports.

Numbers are printed with 17 significant digits everywhere, which round-trips
IEEE doubles exactly; report key order is fixed so identical runs produce
byte-identical files.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .bounds import MassBoundReport
from .errors import ConfigurationError
from .grid import ScalarField, SphereGrid, real_harmonic

__all__ = [
    "format_float",
    "write_field_csv",
    "read_field_csv",
    "write_harmonics_csv",
    "read_harmonics_csv",
    "field_from_harmonics",
    "report_to_json",
    "write_report",
    "write_series_csv",
    "write_path_table_csv",
    "write_residual_history_csv",
]

REPORT_KEYS = (
    "r_gamma",
    "area",
    "kappa",
    "zeta_upper",
    "calH",
    "bound_theorem",
    "bound_half_r",
    "bound_best",
    "best_family",
    "best_params",
    "extension_mass",
    "tolerances",
)


def format_float(x: float) -> str:
    """17-significant-digit decimal form (exact float64 round trip)."""
    return f"{float(x):.16e}"


# ----------------------------------------------------------------------
# grid fields
# ----------------------------------------------------------------------


def write_field_csv(path, field: ScalarField) -> None:
    """Write a scalar field as ``theta,lambda,value`` rows, colatitude-major."""
    grid = field.grid
    lines = ["theta,lambda,value"]
    for i in range(grid.n_theta):
        for k in range(grid.n_lambda):
            lines.append(
                f"{format_float(grid.theta[i])},{format_float(grid.lam[k])},"
                f"{format_float(field.values[i, k])}"
            )
    Path(path).write_text("\n".join(lines) + "\n")


def read_field_csv(path, grid: SphereGrid) -> ScalarField:
    """Read a field written by :func:`write_field_csv` onto a matching grid."""
    raw = Path(path).read_text().strip().splitlines()
    if not raw or raw[0].strip() != "theta,lambda,value":
        raise ConfigurationError(f"{path}: expected header 'theta,lambda,value'")
    data = np.array([[float(x) for x in line.split(",")] for line in raw[1:]])
    expected = grid.n_theta * grid.n_lambda
    if data.shape != (expected, 3):
        raise ConfigurationError(
            f"{path}: {data.shape[0]} rows, grid needs {expected} (band limit mismatch?)"
        )
    theta = data[:, 0].reshape(grid.n_theta, grid.n_lambda)
    lam = data[:, 1].reshape(grid.n_theta, grid.n_lambda)
    if (
        np.abs(theta - grid.theta_mesh).max() > 1e-9
        or np.abs(lam - grid.lambda_mesh).max() > 1e-9
    ):
        raise ConfigurationError(f"{path}: node coordinates do not match the grid")
    return ScalarField(grid, data[:, 2].reshape(grid.n_theta, grid.n_lambda))


# ----------------------------------------------------------------------
# harmonic coefficients
# ----------------------------------------------------------------------


def write_harmonics_csv(path, rows) -> None:
    """Write ``l,m,re,im`` coefficient rows."""
    lines = ["l,m,re,im"]
    for l, m, re, im in rows:
        lines.append(f"{int(l)},{int(m)},{format_float(re)},{format_float(im)}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_harmonics_csv(path):
    raw = Path(path).read_text().strip().splitlines()
    if not raw or raw[0].strip() != "l,m,re,im":
        raise ConfigurationError(f"{path}: expected header 'l,m,re,im'")
    rows = []
    for line in raw[1:]:
        l_s, m_s, re_s, im_s = line.split(",")
        rows.append((int(l_s), int(m_s), float(re_s), float(im_s)))
    return rows


def field_from_harmonics(grid: SphereGrid, rows) -> ScalarField:
    """Assemble sum of re * Re(Y_lm) + im * Im(Y_lm) over coefficient rows.

    Orders must satisfy 0 <= m <= l (real fields need no negative m); the
    imaginary part must be zero for m = 0.
    """
    values = np.zeros((grid.n_theta, grid.n_lambda))
    for l, m, re, im in rows:
        if m < 0:
            raise ConfigurationError(
                f"harmonic row (l={l}, m={m}): use m >= 0 for real fields"
            )
        if re != 0.0:
            values += re * real_harmonic(grid, l, m, "re").values
        if im != 0.0:
            values += im * real_harmonic(grid, l, m, "im").values
    return ScalarField(grid, values)


# ----------------------------------------------------------------------
# JSON reports
# ----------------------------------------------------------------------


def _json_value(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        x = float(v)
        return format_float(x) if math.isfinite(x) else "null"
    if isinstance(v, str):
        import json

        return json.dumps(v)
    if isinstance(v, dict):
        inner = ", ".join(f"{_json_value(str(k))}: {_json_value(val)}" for k, val in v.items())
        return "{" + inner + "}"
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_json_value(x) for x in v) + "]"
    raise ConfigurationError(f"cannot serialize {type(v).__name__} to JSON")


def report_to_json(report: MassBoundReport, extra: dict | None = None) -> str:
    """Render a report with fixed key order; ``extra`` appends trailing keys."""
    items = [(k, getattr(report, k)) for k in REPORT_KEYS]
    if extra:
        items.extend(extra.items())
    body = ",\n".join(f'  "{k}": {_json_value(v)}' for k, v in items)
    return "{\n" + body + "\n}\n"


def write_report(report: MassBoundReport, path, extra: dict | None = None) -> None:
    Path(path).write_text(report_to_json(report, extra))


# ----------------------------------------------------------------------
# CSV series
# ----------------------------------------------------------------------


def write_series_csv(path, s, calH, min_v, max_v, mono_residual) -> None:
    """Radial evolution series: s, calH, minv, maxv, mono_residual."""
    lines = ["s,calH,minv,maxv,mono_residual"]
    for row in zip(s, calH, min_v, max_v, mono_residual):
        lines.append(",".join(format_float(x) for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_path_table_csv(path, table, gauge_residuals=None) -> None:
    """Path table: t, c, alpha, beta, gauge_residual."""
    lines = ["t,c,alpha,beta,gauge_residual"]
    cs = [s.c for s in table.samples] if table.samples else [float("nan")] * table.t_nodes.size
    gr = (
        gauge_residuals
        if gauge_residuals is not None
        else (
            [s.gauge_residual for s in table.samples]
            if table.samples
            else [float("nan")] * table.t_nodes.size
        )
    )
    for t, c, a, b, g in zip(table.t_nodes, cs, table.alphas, table.betas, gr):
        lines.append(",".join(format_float(x) for x in (t, c, a, b, g)))
    Path(path).write_text("\n".join(lines) + "\n")


def write_residual_history_csv(path, history) -> None:
    lines = ["iteration,residual_sup"]
    for i, r in enumerate(history):
        lines.append(f"{i},{format_float(r)}")
    Path(path).write_text("\n".join(lines) + "\n")
