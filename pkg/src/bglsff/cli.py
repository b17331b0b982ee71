"""Command-line front end: ``bglsff {sff,sweep,evolve,analyze,plot}``.

Exit status: 0 success, 2 usage error, 3 numerical failure, 4 resource limit.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import ramp_metrics, sweep
from .config import RunConfig, UsageError, load_config_file, resolve
from .dynamics import OdeConfig, coherent_gibbs, integrate_bgl_ode
from .ensemble import _goe_x, build_realization, derive_seed, resolve_workers, run_ensemble
from .errors import BglsffError
from .io import (
    metrics_row,
    read_curve,
    atomic_write_text,
    read_metrics,
    read_trajectory,
    sniff_kind,
    write_curve,
    write_metrics,
    write_trajectory,
)
from .spectral import diagonalize
from .svg import Series, render_svg

log = logging.getLogger("bglsff")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_RESOURCE = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_model(p):
    g = p.add_argument_group("model")
    g.add_argument("--model", choices=("syk", "goe", "goe_with_x"))
    g.add_argument("--majoranas", type=int, help="number of Majorana fermions (even, >= 4)")
    g.add_argument("--dim", type=int, help="GOE dimension")
    g.add_argument("--j-scale", type=float)
    g.add_argument("--goe-scale", type=float)
    g.add_argument("--realizations", type=int)
    g.add_argument("--seed", type=int)


def _add_evaluator(p):
    g = p.add_argument_group("form factor")
    g.add_argument("--evaluator", choices=("unitary", "bgl", "dephasing_jumps", "filtered", "ode"))
    g.add_argument("--beta", type=float)
    g.add_argument("--gamma", type=float)
    g.add_argument("--filter", help="power, lorentzian, sech or gaussian (with --evaluator filtered)")
    g.add_argument("--delta", type=float, help="exponent of the power filter")
    g.add_argument("--x-source", choices=("goe", "h0"))
    g.add_argument("--dt", type=float)
    g.add_argument("--renormalize-every", type=int)


def _add_grid(p):
    g = p.add_argument_group("time grid")
    g.add_argument("--t-min", type=float)
    g.add_argument("--t-max", type=float)
    g.add_argument("--points-per-decade", type=int)
    g.add_argument("--include-zero", action="store_const", const=True)


def _add_analysis(p):
    g = p.add_argument_group("ramp analysis")
    g.add_argument("--window", type=float, help="smoothing window in decades")
    g.add_argument("--epsilon", type=float, help="relative width of the plateau band")
    g.add_argument("--tail-decades", type=float)
    g.add_argument("--search-from", type=float)


def _add_common(p):
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument("--print-config", action="store_const", const=True)
    p.add_argument("--workers", type=int, help="worker threads (env BGLSFF_WORKERS)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bglsff", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"bglsff {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("sff", help="ensemble-averaged form factor curve")
    _add_model(p), _add_evaluator(p), _add_grid(p), _add_analysis(p), _add_common(p)
    p.add_argument("--out", help="curve CSV")
    p.add_argument("--metrics", help="optional ramp-metrics CSV")

    p = sub.add_parser("sweep", help="one curve per gamma or delta value plus ramp metrics")
    _add_model(p), _add_evaluator(p), _add_grid(p), _add_analysis(p), _add_common(p)
    p.add_argument("--param", dest="sweep_param", choices=("gamma", "delta"))
    p.add_argument("--values", dest="sweep_values", help="comma-separated values")
    p.add_argument("--out-dir")
    p.add_argument("--metrics", help="metrics CSV (default OUT_DIR/metrics_beta<BETA>.csv)")

    p = sub.add_parser("evolve", help="single-realisation trajectory of the nonlinear master equation")
    _add_model(p), _add_evaluator(p), _add_grid(p), _add_common(p)
    p.add_argument("--out", help="trajectory CSV")

    p = sub.add_parser("analyze", help="ramp metrics of existing curve files")
    _add_analysis(p), _add_common(p)
    p.add_argument("inputs", nargs="+")
    p.add_argument("--param", dest="sweep_param", choices=("gamma", "delta"))
    p.add_argument("--out", help="metrics CSV")

    p = sub.add_parser("plot", help="SVG from curve or metrics files")
    _add_common(p)
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out", help="SVG file")
    p.add_argument("--title")
    return parser


def parse_config(argv=None) -> RunConfig:
    """Layer the optional config file and the command-line flags over the defaults, then validate."""
    args = build_parser().parse_args(argv)
    if args.command is None:
        raise UsageError("a subcommand is required (sff, sweep, evolve, analyze, plot)")
    values = {}
    if getattr(args, "config", None):
        values.update(load_config_file(args.config))
        values.pop("command", None)
    for key, value in vars(args).items():
        if key in ("config", "verbose") or value is None:
            continue
        if key == "inputs":
            value = tuple(value)
        values[key] = value
    values["command"] = args.command
    return resolve(values)


# -- jobs ----------------------------------------------------------------------


def _run_sff(cfg: RunConfig, written: list) -> None:
    spec = cfg.ensemble_spec()
    curve = run_ensemble(spec, workers=_workers(cfg))
    written.append(write_curve(cfg.out, curve, cfg.to_flat()))
    if cfg.metrics:
        # the curve is the product; an unresolvable ramp is reported in the row
        try:
            row = metrics_row("gamma", cfg.gamma, ramp_metrics(curve, cfg.plateau_mode(), **cfg.metric_kwargs()))
        except BglsffError as exc:
            row = metrics_row("gamma", cfg.gamma, None, str(exc))
        written.append(write_metrics(cfg.metrics, [row], cfg.to_flat()))


def _value_tag(v: float) -> str:
    return format(v, "g").replace("+", "")


def _run_sweep(cfg: RunConfig, written: list) -> None:
    spec = cfg.ensemble_spec()
    result = sweep(spec, cfg.sweep_param, cfg.sweep_values, cfg.plateau_mode(),
                   workers=_workers(cfg), **cfg.metric_kwargs())
    out_dir = Path(cfg.out_dir)
    rows = []
    for v, curve, m in zip(result.values, result.curves, result.metrics):
        if curve is not None:
            per_value = cfg.to_flat()
            per_value[cfg.sweep_param] = v
            per_value.update(command="sff", sweep_values="", out_dir="", metrics="")
            if cfg.sweep_param == "delta":
                per_value.update(evaluator="filtered", filter="power")
            name = f"curve_beta{_value_tag(cfg.beta)}_{cfg.sweep_param}{_value_tag(v)}.csv"
            per_value["out"] = str(out_dir / name)
            written.append(write_curve(out_dir / name, curve, per_value))
        rows.append(metrics_row(cfg.sweep_param, v, m, result.errors.get(v)))
    if all(c is None for c in result.curves):
        raise BglsffError("every sweep value failed")
    metrics_path = Path(cfg.metrics) if cfg.metrics else out_dir / f"metrics_beta{_value_tag(cfg.beta)}.csv"
    written.append(write_metrics(metrics_path, rows, cfg.to_flat()))


def _run_evolve(cfg: RunConfig, written: list) -> None:
    spec = cfg.ensemble_spec()
    seed = derive_seed(cfg.seed, 0)
    h0 = build_realization(spec.model, seed)
    eig = diagonalize(h0, want_vectors=True)
    use_goe = cfg.model == "goe_with_x" or cfg.x_source == "goe"
    x = _goe_x(spec.model, seed) if use_goe else h0.matrix
    times = spec.grid.times()
    psi = coherent_gibbs(eig.spectrum, cfg.beta)
    traj = integrate_bgl_ode(
        psi.density_matrix(), eig, x, cfg.gamma,
        OdeConfig(times, dt=cfg.dt, renormalize_every=cfg.renormalize_every),
    )
    columns = {
        "t": traj.times,
        "fidelity": traj.fidelities(psi),
        "purity": traj.purities(),
        "mean_energy": traj.mean_energies(),
        "trace_drift": traj.trace_drift,
    }
    written.append(write_trajectory(cfg.out, columns, cfg.to_flat()))


def _run_analyze(cfg: RunConfig, written: list) -> None:
    rows = []
    for path in cfg.inputs:
        curve, meta = read_curve(path)
        raw = meta.get(cfg.sweep_param, meta.get(f"meta.{cfg.sweep_param}", "nan"))
        try:
            value = float(raw)
        except ValueError:
            value = math.nan
        try:
            m = ramp_metrics(curve, cfg.plateau_mode(), **cfg.metric_kwargs())
            rows.append(metrics_row(cfg.sweep_param, value, m))
        except BglsffError as exc:
            rows.append(metrics_row(cfg.sweep_param, value, None, str(exc)))
    written.append(write_metrics(cfg.out or cfg.metrics, rows, cfg.to_flat()))


def _legend(meta: dict) -> str:
    parts = []
    for key in ("beta", "gamma", "delta"):
        if key in meta:
            if key == "delta" and meta.get("evaluator") != "filtered":
                continue
            parts.append(f"{key}={float(meta[key]):g}")
    return " ".join(parts)


def _run_plot(cfg: RunConfig, written: list) -> None:
    kinds = {sniff_kind(p) for p in cfg.inputs}
    if len(kinds) != 1:
        raise UsageError("plot inputs must all be curve files or all metrics files")
    kind = kinds.pop()
    if kind == "metrics":
        series = []
        for path in cfg.inputs:
            rows, meta = read_metrics(path)
            x = np.array([r["value"] for r in rows])
            y = np.array([r["ratio"] for r in rows])
            label = f"beta={float(meta['beta']):g}" if "beta" in meta else Path(path).stem
            series.append(Series(x, y, label, markers=True))
        param = rows[0]["parameter"] if rows else "value"
        logx = all(np.all(s.x[np.isfinite(s.x)] > 0) for s in series) or param == "gamma"
        svg = render_svg(series, xlabel=param, ylabel="t_p/t_d", title=cfg.title, logx=logx, logy=True)
    elif kind == "curve":
        series = []
        for path in cfg.inputs:
            curve, meta = read_curve(path)
            series.append(Series(curve.times, curve.mean, _legend(meta) or Path(path).stem))
        svg = render_svg(series, xlabel="t", ylabel="F_t", title=cfg.title)
    else:
        columns = [read_trajectory(p)[0] for p in cfg.inputs]
        series = [Series(c["t"], c["fidelity"], Path(p).stem) for c, p in zip(columns, cfg.inputs)]
        svg = render_svg(series, xlabel="t", ylabel="F_t", title=cfg.title)
    written.append(atomic_write_text(cfg.out, svg))


JOBS = {
    "sff": _run_sff,
    "sweep": _run_sweep,
    "evolve": _run_evolve,
    "analyze": _run_analyze,
    "plot": _run_plot,
}


def _workers(cfg: RunConfig) -> int:
    return resolve_workers(cfg.workers or None)


def run_job(cfg: RunConfig) -> int:
    """Execute ``cfg``; on failure remove anything already written and return the exit code."""
    written: list = []
    try:
        JOBS[cfg.command](cfg, written)
    except BglsffError as exc:
        for path in written:
            with contextlib.suppress(FileNotFoundError):
                Path(path).unlink()
        print(f"bglsff: error: {exc}", file=sys.stderr)
        return exc.exit_code
    for path in written:
        log.info("wrote %s", path)
    return EXIT_OK


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
    except BglsffError as exc:
        print(f"bglsff: error: {exc}", file=sys.stderr)
        return exc.exit_code
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    if cfg.print_config:
        sys.stdout.write(cfg.dumps())
        if not (cfg.out or cfg.out_dir):
            return EXIT_OK
    return run_job(cfg)


if __name__ == "__main__":
    sys.exit(main())
