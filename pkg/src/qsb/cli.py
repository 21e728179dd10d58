"""Command-line front end.

Subcommands: ``bound``, ``zeta``, ``extend``, ``lambda``, ``uniformize``,
``path``.  Exit codes: 0 on success, 2 on configuration errors, 3 on solver
errors (the report file then carries a machine-readable ``"error"`` key).
Multiple ``--config`` files are processed independently; ``--jobs`` (or the
``QSB_THREADS`` environment variable, which wins) runs them in a thread pool
without affecting any output bytes.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import fileio
from .bounds import (
    MassBoundReport,
    bound_half_r,
    bound_theorem,
    optimize_s,
    realizing_reparameterization,
    zeta_upper,
)
from .config import build_boundary_data, load_config
from .errors import ConfigurationError, NonPositiveCurvature, SolverError
from .extension import ExtensionConfig, evolve, monotonicity_residuals
from .grid import build_grid
from .metric import kappa_ratio, total_mean_curvature
from .path import build_path_table

__all__ = ["main", "run"]


def _assemble_report(cfg, table, bdata, extension_mass=None, extra_tol=None) -> MassBoundReport:
    try:
        kappa = kappa_ratio(bdata.metric)
    except NonPositiveCurvature:
        kappa = None
    theorem_value, _ = bound_theorem(table, bdata)
    best_value, best_rep = optimize_s(table, bdata, family=cfg.rep_family, budget=cfg.budget)
    tolerances = cfg.tolerances()
    if extra_tol:
        tolerances.update(extra_tol)
    return MassBoundReport(
        r_gamma=bdata.metric.r,
        area=bdata.metric.area,
        kappa=kappa,
        zeta_upper=zeta_upper(table),
        calH=total_mean_curvature(bdata),
        bound_theorem=theorem_value,
        bound_half_r=bound_half_r(bdata),
        bound_best=best_value,
        best_family=best_rep.family,
        best_params=best_rep.params,
        extension_mass=extension_mass,
        tolerances=tolerances,
    )


def _resolved_config_path(report_path) -> Path:
    p = Path(report_path)
    return p.with_name(p.name + ".config.json")


def _write_resolved_config(cfg, report_path) -> None:
    # provenance sidecar; the report itself carries exactly the documented keys
    resolved = {
        "band_limit": cfg.band_limit,
        "metric_kind": cfg.metric_kind,
        "metric_r": cfg.metric_r,
        "h_kind": cfg.h_kind,
        "path_nodes": cfg.path_nodes,
        "gauge_tol": cfg.gauge_tol,
        "uniformization_tol": cfg.uniformization_tol,
        "rep_family": cfg.rep_family,
        "budget": cfg.budget,
        "s_max": cfg.s_max,
        "local_error_target": cfg.local_error_target,
        "max_step": cfg.max_step,
        "fit_window": list(cfg.fit_window),
    }
    body = ",\n".join(f'  "{k}": {fileio._json_value(v)}' for k, v in resolved.items())
    _resolved_config_path(report_path).write_text("{\n" + body + "\n}\n")


def _out_path(cfg, name) -> Path:
    p = Path(name)
    return p if p.is_absolute() else cfg.base_dir / p


def _cmd_bound(cfg) -> None:
    grid = build_grid(cfg.band_limit)
    bdata = build_boundary_data(cfg, grid)
    table = build_path_table(bdata.metric, cfg.path_nodes, cfg.gauge_tol)
    report = _assemble_report(cfg, table, bdata)
    out = _out_path(cfg, cfg.output_report)
    fileio.write_report(report, out)
    _write_resolved_config(cfg, out)


def _cmd_zeta(cfg) -> None:
    grid = build_grid(cfg.band_limit)
    bdata = build_boundary_data(cfg, grid)
    table = build_path_table(bdata.metric, cfg.path_nodes, cfg.gauge_tol)
    out = _out_path(cfg, cfg.output_report)
    value = zeta_upper(table)
    out.write_text(
        '{\n  "zeta_upper": %s,\n  "r_gamma": %s\n}\n'
        % (fileio.format_float(value), fileio.format_float(bdata.metric.r))
    )


def _cmd_path(cfg, table_out=None) -> None:
    grid = build_grid(cfg.band_limit)
    bdata = build_boundary_data(cfg, grid)
    table = build_path_table(bdata.metric, cfg.path_nodes, cfg.gauge_tol)
    out = table_out or _out_path(cfg, cfg.output_report)
    fileio.write_path_table_csv(out, table)


def _cmd_extend(cfg) -> None:
    grid = build_grid(cfg.band_limit)
    bdata = build_boundary_data(cfg, grid)
    table = build_path_table(bdata.metric, cfg.path_nodes, cfg.gauge_tol)
    k = cfg.rep_k if cfg.rep_k is not None else total_mean_curvature(bdata)
    rep = realizing_reparameterization(table, k)
    ext_cfg = ExtensionConfig(
        boundary=bdata,
        table=table,
        rep=rep,
        s_max=cfg.s_max,
        local_error_target=cfg.local_error_target,
        max_step=cfg.max_step,
        fit_window=cfg.fit_window,
        gauge_tol=max(cfg.gauge_tol, 1e-8),
    )
    result = evolve(ext_cfg)
    report = _assemble_report(cfg, table, bdata, extension_mass=result.mass)
    out = _out_path(cfg, cfg.output_report)
    fileio.write_report(
        report,
        out,
        extra={
            "fit_residual": result.fit_residual,
            "s_max": result.s_max,
            "steps": result.steps,
        },
    )
    _write_resolved_config(cfg, out)
    if cfg.output_series:
        residual = monotonicity_residuals(result, table, rep)
        fileio.write_series_csv(
            _out_path(cfg, cfg.output_series),
            result.s, result.calH, result.min_v, result.max_v, residual,
        )


def _cmd_uniformize(args) -> None:
    from .grid import SphereGrid
    from .uniformize import solve_conformal_factor

    grid = build_grid(args.L)
    text = Path(args.K).read_text().splitlines()
    if not text:
        raise ConfigurationError(f"{args.K}: empty input")
    header = text[0].strip()
    if header == "l,m,re,im":
        k_field = fileio.field_from_harmonics(grid, fileio.read_harmonics_csv(args.K))
    elif header == "theta,lambda,value":
        k_field = fileio.read_field_csv(args.K, grid)
    else:
        raise ConfigurationError(
            f"{args.K}: unrecognized header {header!r} "
            "(expected 'l,m,re,im' or 'theta,lambda,value')"
        )
    sol = solve_conformal_factor(k_field, tol=args.tol, max_iter=args.max_iter)
    fileio.write_field_csv(args.out, sol.phi)
    if args.residuals:
        fileio.write_residual_history_csv(args.residuals, sol.residual_history)


def _cmd_lambda(args) -> int:
    from .fillin import lambda_lower_from_metric, lambda_lower_general

    if args.config:
        cfg = load_config(args.config)
        bdata = build_boundary_data(cfg)
        bound = lambda_lower_from_metric(bdata.metric)
    else:
        if args.n is None or args.r is None or args.minR is None:
            raise ConfigurationError("lambda needs either --config or all of --n/--r/--minR")
        bound = lambda_lower_general(args.n, args.r, args.minR)
    payload = {
        "n": bound.n,
        "r": bound.r,
        "min_R": bound.min_R,
        "lambda_lower": bound.lambda_lower,
    }
    body = ",\n".join(f'  "{k}": {fileio._json_value(v)}' for k, v in payload.items())
    text = "{\n" + body + "\n}\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qsb",
        description="Quasi-spherical upper bounds for the Bartnik mass of sphere boundary data",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_command(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", action="append", required=True, help="TOML run file")
        p.add_argument("--out", default=None, help="override the report output path")
        p.add_argument("--jobs", type=int, default=1, help="parallel workers for multiple configs")
        return p

    add_config_command("bound", "path table, roundness and all mass bounds")
    add_config_command("zeta", "roundness upper bound only")
    p_ext = add_config_command("extend", "radial extension run with mass extraction")
    p_ext.add_argument("--series", default=None, help="override the series CSV path")
    p_path = add_config_command("path", "write the sampled path table")
    p_path.add_argument("--table-out", dest="table_out", default=None)

    p_uni = sub.add_parser("uniformize", help="solve for the conformal factor of a target curvature")
    p_uni.add_argument("--K", required=True, help="curvature input CSV (grid or harmonics)")
    p_uni.add_argument("--tol", type=float, default=1e-10)
    p_uni.add_argument("--max-iter", type=int, default=60)
    p_uni.add_argument("--out", required=True, help="conformal factor grid CSV")
    p_uni.add_argument("--residuals", default=None, help="residual history CSV")
    p_uni.add_argument("--L", type=int, default=8, help="band limit")

    p_lam = sub.add_parser("lambda", help="fill-in total-mean-curvature lower bound")
    p_lam.add_argument("--config", default=None)
    p_lam.add_argument("--n", type=int, default=None)
    p_lam.add_argument("--r", type=float, default=None)
    p_lam.add_argument("--minR", type=float, default=None)
    p_lam.add_argument("--out", default=None)
    return parser


_CONFIG_COMMANDS = {
    "bound": _cmd_bound,
    "zeta": _cmd_zeta,
    "extend": _cmd_extend,
    "path": _cmd_path,
}


def _run_one_config(command, args, config_path) -> None:
    cfg = load_config(config_path)
    if getattr(args, "out", None):
        cfg = _override(cfg, output_report=args.out)
    if command == "extend" and getattr(args, "series", None):
        cfg = _override(cfg, output_series=args.series)
    if command == "path":
        _cmd_path(cfg, table_out=getattr(args, "table_out", None))
    else:
        _CONFIG_COMMANDS[command](cfg)


def _override(cfg, **kw):
    from dataclasses import replace

    return replace(cfg, **kw)


def _error_report(path, err: SolverError) -> None:
    try:
        Path(path).write_text('{\n  "error": "%s"\n}\n' % err.name)
    except OSError:
        pass


def run(argv) -> int:
    """Execute a CLI invocation; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0

    try:
        if args.command == "uniformize":
            _cmd_uniformize(args)
            return 0
        if args.command == "lambda":
            return _cmd_lambda(args)

        configs = args.config
        jobs = int(os.environ.get("QSB_THREADS", args.jobs))
        if jobs > 1 and len(configs) > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                futures = [
                    pool.submit(_run_one_config, args.command, args, c) for c in configs
                ]
                for f in futures:
                    f.result()
        else:
            for c in configs:
                _run_one_config(args.command, args, c)
        return 0
    except ConfigurationError as exc:
        print(f"qsb: configuration error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"qsb: solver error [{exc.name}]: {exc}", file=sys.stderr)
        out = getattr(args, "out", None)
        if out is None and getattr(args, "config", None):
            try:
                cfg = load_config(args.config[0])
                out = _out_path(cfg, cfg.output_report)
            except ConfigurationError:
                out = None
        if out is not None:
            _error_report(out, exc)
        return 3


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
