"""Command-line front end.

Every subcommand prints a JSON summary; data files go to ``--out`` (or to
stdout when no path is given). Failures print a JSON error record on stderr
and exit nonzero: 2 for invalid input, 3 for divergence, 4 when the
optimal-delay equation has no unique root, 1 for I/O errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    boundary_curves,
    check_envelope,
    estimate_rate,
    single_delay_counterexample,
    stability_raster,
)
from .core import DivergenceError, MethodKind, Trajectory, make_system
from .design import (
    RootBracketError,
    design,
    params_from_alpha,
    params_from_eps,
    tau_star,
    tau_star_objective,
    tau_star_residual,
)
from .integrator import DEFAULT_STEPS_PER_TAU, SimConfig, simulate
from .poincare import period_map_derivative

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_DIVERGED, EXIT_ROOT = 0, 1, 2, 3, 4

TRAJECTORY_COLUMNS = ("t", "x", "u", "segment_active")
RASTER_COLUMNS = ("lambda_tau", "eps_norm", "analytic_stable", "empirical_stable", "analytic_alpha")
BOUNDARY_COLUMNS = ("lambda_tau", "eps_lo", "eps_hi")


class UsageError(ValueError):
    pass


def fmt(v) -> str:
    """17 significant digits: lossless for binary64."""
    return format(float(v), ".17g")


def _jsonable(v):
    if isinstance(v, float) and math.isinf(v):
        return "-inf" if v < 0 else "inf"
    if isinstance(v, float) and math.isnan(v):
        return None
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.generic):
        return _jsonable(v.item())
    return v


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, allow_nan=False)


# --- file emitters -------------------------------------------------------------

def trajectory_metadata(traj: Trajectory) -> dict:
    return {
        "method": traj.method.value, "lambda": traj.lam, "tau": traj.tau, "eps": traj.eps,
        "alpha": traj.alpha, "N": traj.steps_per_tau, "plant": traj.plant, "x0": traj.x0,
    }


def _write_text(text: str, path) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, newline="")


def emit_trajectory(traj: Trajectory, path=None, format: str = "csv") -> None:
    """Write ``t,x,u,segment_active`` as CSV, or as JSON arrays with a metadata header."""
    t, x, u, active = traj.times, traj.states, traj.control, traj.segment_active.astype(int)
    if format == "csv":
        buf = io.StringIO()
        buf.write(",".join(TRAJECTORY_COLUMNS) + "\n")
        for row in zip(t, x, u, active):
            buf.write(f"{fmt(row[0])},{fmt(row[1])},{fmt(row[2])},{int(row[3])}\n")
        _write_text(buf.getvalue(), path)
    elif format == "json":
        doc = {"metadata": trajectory_metadata(traj), "t": t.tolist(), "x": x.tolist(),
               "u": u.tolist(), "segment_active": active.tolist()}
        _write_text(json.dumps(doc, allow_nan=False) + "\n", path)
    else:
        raise UsageError(f"format must be csv or json, got {format!r}")


def read_trajectory_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
        if tuple(reader.fieldnames or ()) != TRAJECTORY_COLUMNS:
            raise ValueError(f"unexpected columns {reader.fieldnames}")
    out = {c: np.array([float(r[c]) for r in rows]) for c in TRAJECTORY_COLUMNS[:3]}
    out["segment_active"] = np.array([int(r["segment_active"]) for r in rows])
    return out


def emit_raster(raster, path) -> None:
    def b(v):
        return "" if v is None else str(int(v))

    buf = io.StringIO()
    buf.write(",".join(RASTER_COLUMNS) + "\n")
    for lt, en, a, e, al in raster.rows():
        buf.write(f"{fmt(lt)},{fmt(en)},{b(a)},{b(e)},{'' if math.isnan(al) else fmt(al)}\n")
    _write_text(buf.getvalue(), path)


def emit_boundary(rows: np.ndarray, path) -> None:
    buf = io.StringIO()
    buf.write(",".join(BOUNDARY_COLUMNS) + "\n")
    for lt, lo, hi in rows:
        buf.write(f"{fmt(lt)},{fmt(lo)},{fmt(hi)}\n")
    _write_text(buf.getvalue(), path)


def emit_envelope(traj: Trajectory, env, path) -> None:
    """Columns ``t,abs_dx,upper,lower`` for plotting the exponential envelope."""
    t = traj.times
    y0 = abs(traj.x0 - traj.x_star)
    y = np.abs(traj.states - traj.x_star)
    with np.errstate(over="ignore"):
        upper = env.c_M * np.exp(env.rate_upper * t) * y0
        lower = env.c_m * np.exp(env.rate_lower * t) * y0 if env.c_m is not None else np.full_like(t, np.nan)
    buf = io.StringIO()
    buf.write("t,abs_dx,upper,lower\n")
    for row in zip(t, y, upper, lower):
        buf.write(",".join("" if math.isnan(v) else fmt(v) for v in row) + "\n")
    _write_text(buf.getvalue(), path)


# --- argument parsing ---------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _grid(text: str) -> tuple[int, int]:
    try:
        parts = [int(p) for p in text.lower().split("x")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like 64x64, got {text!r}")
    if len(parts) == 1:
        parts *= 2
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"grid must look like 64x64, got {text!r}")
    return parts[0], parts[1]


def _range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(p) for p in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"range must look like LO:HI, got {text!r}")
    return lo, hi


def _add_design_args(p, need_tau=True, gain=True):
    p.add_argument("--method", choices=[m.value for m in MethodKind], required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=2.0)
    if need_tau:
        p.add_argument("--tau", type=float, required=True)
    if gain:
        g = p.add_mutually_exclusive_group(required=True)
        g.add_argument("--alpha", type=float)
        g.add_argument("--eps", type=float)


def _add_sim_args(p):
    p.add_argument("--plant", default="linear",
                   help="linear, quad, cubic_plus, cubic_minus, sinsq, or poly:c0,c1,... (ascending powers)")
    p.add_argument("--x-star", type=float, default=0.0)
    p.add_argument("--x0", type=float, default=0.5)
    p.add_argument("--periods", type=int, default=10)
    p.add_argument("--steps-per-tau", type=int, default=DEFAULT_STEPS_PER_TAU)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="odfc", description="Oscillating delayed feedback control toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("design", help="complete a design and report interval, rate and optimal delay")
    _add_design_args(p)
    p.add_argument("--out")

    p = sub.add_parser("simulate", help="simulate the controlled plant and write the trajectory")
    _add_design_args(p)
    _add_sim_args(p)
    p.add_argument("--out")
    p.add_argument("--format", choices=["csv", "json"], default="csv")

    p = sub.add_parser("rate", help="fit the convergence rate and exponential envelope")
    _add_design_args(p)
    _add_sim_args(p)
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--out", help="JSON report path")
    p.add_argument("--envelope-out", help="CSV with t,abs_dx,upper,lower")

    p = sub.add_parser("probe", help="numerical period-map multiplier at the equilibrium")
    _add_design_args(p)
    p.add_argument("--plant", default="linear")
    p.add_argument("--x-star", type=float, default=0.0)
    p.add_argument("--h", type=float, default=1e-5)
    p.add_argument("--steps-per-tau", type=int, default=DEFAULT_STEPS_PER_TAU)
    p.add_argument("--out")

    p = sub.add_parser("region", help="stability region raster and boundary curves")
    _add_design_args(p, need_tau=False, gain=False)
    p.add_argument("--grid", type=_grid, default=(64, 64))
    p.add_argument("--mode", choices=["analytic", "empirical", "both"], default="both")
    p.add_argument("--eps-range", type=_range, help="LO:HI of eps (velocity) or eps/lambda (states)")
    p.add_argument("--lt-range", type=_range, help="LO:HI of lambda*tau")
    p.add_argument("--out", help="raster CSV path")
    p.add_argument("--boundary-out", help="boundary CSV path (default: <out stem>_boundary.csv)")

    p = sub.add_parser("taustar", help="delay minimizing the gain for a given multiplier")
    _add_design_args(p, need_tau=False, gain=False)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--out")

    p = sub.add_parser("counterexample", help="sweep the single-delayed-state oscillating scheme")
    p.add_argument("--lambda", dest="lam", type=float, default=2.0)
    p.add_argument("--grid", type=_grid, default=(64, 64))
    p.add_argument("--eps-range", type=_range, default=(-50.0, 50.0))
    p.add_argument("--lt-range", type=_range)
    p.add_argument("--out", help="raster CSV path")
    return parser


def _plant(args):
    text = args.plant
    if text.startswith("poly:"):
        try:
            coeffs = [float(c) for c in text[5:].split(",")]
        except ValueError:
            raise UsageError(f"bad polynomial coefficients {text!r}")
        return make_system(coeffs, args.x_star)
    return make_system(text, args.x_star, args.lam)


def _params(args, lam):
    if args.alpha is not None:
        return params_from_alpha(args.method, lam, args.alpha, args.tau)
    return params_from_eps(args.method, lam, args.eps, args.tau)


def _echo(params, lam):
    return {"method": params.method.value, "lambda": lam, "tau": params.tau, "eps": params.eps, "alpha": params.alpha}


def _emit_summary(summary: dict, path) -> None:
    text = dumps(summary) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)
        sys.stdout.write(text)


def cmd_design(args) -> int:
    rep = design(args.method, args.lam, args.tau, alpha=args.alpha, eps=args.eps)
    _emit_summary(rep.to_dict(), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = _plant(args)
    params = _params(args, spec.lam)
    traj = simulate(spec, params, SimConfig(args.x0, args.periods, args.steps_per_tau))
    emit_trajectory(traj, args.out, args.format)
    if args.out is not None:
        sys.stdout.write(dumps({**trajectory_metadata(traj), "out": args.out, "nodes": traj.n_nodes}) + "\n")
    return EXIT_OK


def cmd_rate(args) -> int:
    spec = _plant(args)
    params = _params(args, spec.lam)
    traj = simulate(spec, params, SimConfig(args.x0, args.periods, args.steps_per_tau))
    fit = estimate_rate(traj)
    env = check_envelope(traj, params.alpha, args.mu)
    if args.envelope_out:
        emit_envelope(traj, env, args.envelope_out)
    summary = {
        **_echo(params, spec.lam), "plant": spec.label, "x0": args.x0,
        "rate": {"beta_hat": fit.beta_hat, "beta_analytic": fit.beta_analytic,
                 "samples_used": fit.samples_used, "residual": fit.residual, "deadbeat": fit.deadbeat},
        "envelope": {"mu": env.mu, "c_m": env.c_m, "c_M": env.c_M, "holds": env.holds,
                     "rate_upper": env.rate_upper, "rate_lower": env.rate_lower},
    }
    _emit_summary(summary, args.out)
    return EXIT_OK


def cmd_probe(args) -> int:
    spec = _plant(args)
    params = _params(args, spec.lam)
    probe = period_map_derivative(spec, params, args.h, args.steps_per_tau)
    _emit_summary({**_echo(params, spec.lam), "plant": spec.label, "h": probe.h, "N": args.steps_per_tau,
                   "x_out": probe.x_out, "numeric_dP": probe.numeric_dP,
                   "analytic_alpha": probe.analytic_alpha, "discrepancy": probe.discrepancy}, args.out)
    return EXIT_OK


def _boundary_path(args):
    if args.boundary_out:
        return args.boundary_out
    if args.out:
        p = Path(args.out)
        return str(p.with_name(p.stem + "_boundary.csv"))
    return None


def cmd_region(args) -> int:
    raster = stability_raster(args.method, args.lam, args.eps_range, args.lt_range, args.grid, args.mode)
    emit_raster(raster, args.out)
    bpath = _boundary_path(args)
    if bpath is not None:
        emit_boundary(boundary_curves(args.method, args.lam, raster.x_axis), bpath)
    summary = {"method": args.method, "lambda": args.lam, "grid": list(args.grid), "mode": args.mode,
               "y_axis": "eps" if args.method == "velocity" else "eps/lambda",
               "boundary_out": bpath}
    if raster.analytic_stable is not None:
        summary["analytic_stable_cells"] = int(raster.analytic_stable.sum())
    if raster.empirical_stable is not None:
        summary["empirical_stable_cells"] = raster.n_empirical_stable
    if args.mode == "both":
        summary["band_cells_excluded"] = int(raster.boundary_band.sum())
        summary["agreement"] = raster.agreement()
    if args.out is not None:
        sys.stdout.write(dumps(summary) + "\n")
    return EXIT_OK


def cmd_taustar(args) -> int:
    ts = tau_star(args.method, args.lam, args.alpha)
    summary = {"method": args.method, "lambda": args.lam, "alpha": args.alpha, "tau_star": ts,
               "residual": tau_star_residual(args.method, args.lam, args.alpha, ts),
               "objective": float(tau_star_objective(args.method, args.lam, args.alpha, ts)),
               "objective_name": "|eps|" if args.method == "velocity" else "eps/lambda"}
    _emit_summary(summary, args.out)
    return EXIT_OK


def cmd_counterexample(args) -> int:
    raster = single_delay_counterexample(args.lam, args.eps_range, args.lt_range, args.grid)
    emit_raster(raster, args.out)
    if args.out is not None:
        sys.stdout.write(dumps({"scheme": "single_delay", "lambda": args.lam, "grid": list(args.grid),
                                "empirical_stable_cells": raster.n_empirical_stable}) + "\n")
    return EXIT_OK


COMMANDS = {
    "design": cmd_design, "simulate": cmd_simulate, "rate": cmd_rate, "probe": cmd_probe,
    "region": cmd_region, "taustar": cmd_taustar, "counterexample": cmd_counterexample,
}


def _fail(kind: str, exc: BaseException, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": str(exc), "exit_code": code}) + "\n")
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except DivergenceError as exc:
        return _fail("divergence", exc, EXIT_DIVERGED)
    except RootBracketError as exc:
        return _fail("root_bracket", exc, EXIT_ROOT)
    except ValueError as exc:
        return _fail("usage", exc, EXIT_USAGE)
    except OSError as exc:
        return _fail("io", exc, EXIT_IO)


if __name__ == "__main__":
    sys.exit(main())
