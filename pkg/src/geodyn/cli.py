"""Command-line front end.

Exit codes: 0 success, 1 an asserted identity failed, 2 invalid input
(bad arguments, unknown metric, schema error, point outside the chart,
degenerate metric), 3 the geodesic left the chart, 4 step limit reached.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import sys
from collections.abc import Sequence

import numpy as np

from . import __version__
from .cartan import StructuralReport, geometrodynamics_residuals
from .connection import CustomConnection, christoffel
from .curvature import curvature_pack
from .errors import GeodynError, MaxStepsExceeded
from .exprlang import eval_scalar, parse
from .flow import (GeodesicState, IntegratorConfig, conserved_speed_report, fmt, integrate,
                   to_csv, to_jsonl, trajectory_columns, trajectory_rows)
from .matfun import constant_w_position, constant_w_velocity, expm
from .metric import CATALOG, builtin, builtin_names, catalog, load_definition
from .verify import DEFAULT_TOLERANCES, verify

EXIT_OK, EXIT_FAILED, EXIT_INVALID, EXIT_DOMAIN, EXIT_MAX_STEPS = 0, 1, 2, 3, 4
MACHINE_DIGITS, PRETTY_DIGITS = 17, 6


class UsageError(GeodynError):
    pass


# ---------------------------------------------------------------------------
# argument helpers
# ---------------------------------------------------------------------------

def constant(src: str) -> float:
    """Evaluate a constant expression such as ``pi/4`` or ``2*sqrt(2)``."""
    return float(eval_scalar(parse(src.strip(), 0), ()))


def _arg_constant(src: str) -> float:
    try:
        return constant(src)
    except GeodynError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def vector(src: str) -> np.ndarray:
    parts = [p for p in src.split(",")]
    if not src.strip() or any(not p.strip() for p in parts):
        raise UsageError(f"cannot read a vector from {src!r}; use comma-separated values")
    return np.array([constant(p) for p in parts])


def parse_metric_arg(text: str) -> tuple[str, dict[str, float]]:
    """``name`` or ``name:key=value,key=value``."""
    name, _, rest = text.partition(":")
    params: dict[str, float] = {}
    if rest.strip():
        for item in rest.split(","):
            key, eq, value = item.partition("=")
            if not eq or not key.strip():
                raise UsageError(f"bad metric parameter {item!r}; expected key=value")
            params[key.strip()] = constant(value)
    return name.strip(), params


def load_source(args, allow_connection: bool = False):
    if args.metric and args.metric_file:
        raise UsageError("give either --metric or --metric-file, not both")
    if args.metric_file:
        source = load_definition(args.metric_file)
    elif args.metric:
        source = builtin(*parse_metric_arg(args.metric))
    else:
        raise UsageError("a metric is required (--metric NAME[:k=v,...] or --metric-file PATH)")
    if isinstance(source, CustomConnection) and not allow_connection:
        raise UsageError(f"{args.command} needs a metric; {source.name!r} is a bare connection")
    return source


def tolerances(args) -> dict[str, float]:
    out = {}
    for key in DEFAULT_TOLERANCES:
        value = getattr(args, "tol_" + key.replace("-", "_"), None)
        if value is not None:
            if not value > 0:
                raise UsageError(f"--tol-{key} must be positive")
            out[key] = value
    return out


def header_line(fmt_name: str) -> str:
    stamp = _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    if fmt_name == "jsonl":
        return json.dumps({"generator": f"geodyn {__version__}", "generated": stamp})
    return f"# geodyn {__version__} generated {stamp}"


def number(x: float, fmt_name: str) -> str:
    return fmt(x, PRETTY_DIGITS if fmt_name == "pretty" else MACHINE_DIGITS)


def machine(obj):
    """Round floats to 17 significant digits for JSON output."""
    if isinstance(obj, dict):
        return {k: machine(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [machine(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return machine(obj.tolist())
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return float(fmt(value)) if math.isfinite(value) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_metrics(args, out) -> int:
    rows = []
    for name in builtin_names():
        spec = builtin(name)
        rows.append((name, spec.dim, spec.signature, ",".join(spec.variables),
                     ",".join(f"{k}={v:g}" for k, v in spec.params.items())))
    if args.format == "jsonl":
        for name, dim, sig, var, params in rows:
            out.write(json.dumps({"name": name, "dim": dim, "signature": sig,
                                  "variables": var.split(","), "defaults": params}) + "\n")
    elif args.format == "csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["name", "dim", "signature", "variables", "defaults"])
        w.writerows(rows)
    else:
        for name, dim, sig, var, params in rows:
            out.write(f"{name:22s} dim={dim}  {sig:10s}  ({var})  {params}\n")
        out.write("catalog: " + ", ".join(builtin(n, p).describe() for n, p in CATALOG) + "\n")
    return EXIT_OK


def _tensor_items(name: str, arr: np.ndarray):
    for idx in np.ndindex(arr.shape):
        yield name, ":".join(str(i + 1) for i in idx), float(arr[idx])


def cmd_curvature(args, out) -> int:
    spec = load_source(args)
    if args.at is None:
        raise UsageError("--at is required")
    point = vector(args.at)
    pack = curvature_pack(spec, point)
    gamma = christoffel(spec, point).gamma
    tensors = {"g": pack.g, "gamma": gamma, "riemann_mixed": pack.riemann_mixed,
               "riemann_low": pack.riemann_low, "ricci": pack.ricci, "ricci_mixed": pack.ricci_mixed}
    scalars = {"R": pack.scalar, "det_ricci_mixed": pack.det_ricci_mixed,
               "trace_ricci_mixed": pack.trace_ricci_mixed}
    if args.format == "jsonl":
        rec = {"metric": spec.describe(), "point": point, **tensors, **scalars}
        out.write(json.dumps(machine(rec)) + "\n")
    elif args.format == "csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["quantity", "index", "value"])
        for name, arr in tensors.items():
            for q, idx, val in _tensor_items(name, arr):
                w.writerow([q, idx, number(val, "csv")])
        for name, val in scalars.items():
            w.writerow([name, "", number(val, "csv")])
    else:
        out.write(f"metric {spec.describe()} at ({', '.join(number(x, 'pretty') for x in point)})\n")
        for name, arr in tensors.items():
            nz = [(idx, val) for _, idx, val in _tensor_items(name, arr) if val != 0.0]
            out.write(f"{name}: {len(nz)} non-zero of {arr.size}\n")
            for idx, val in nz:
                out.write(f"  [{idx}] {number(val, 'pretty')}\n")
        for name, val in scalars.items():
            out.write(f"{name} = {number(val, 'pretty')}\n")
    return EXIT_OK


def _integrate(args, spec):
    if args.x0 is None or args.v0 is None:
        raise UsageError("--x0 and --v0 are required")
    config = IntegratorConfig(method=args.method, dt=args.dt, t_end=args.t_end,
                              abs_tol=args.tol_abs, rel_tol=args.tol_rel, max_steps=args.max_steps)
    x0, v0 = vector(args.x0), vector(args.v0)
    if x0.shape != (spec.dim,) or v0.shape != (spec.dim,):
        raise UsageError(f"--x0 and --v0 need {spec.dim} components for {spec.describe()}")
    return integrate(spec, GeodesicState(0.0, x0, v0), config)


def cmd_geodesic(args, out) -> int:
    spec = load_source(args)
    traj = _integrate(args, spec)
    drift = float(np.max(np.abs(traj.speed2 - traj.speed2[0])))
    summary = {"speed_drift": drift, "samples": len(traj), "status": traj.status,
               "accepted_steps": traj.accepted_steps, "rejected_steps": traj.rejected_steps}
    if traj.status != "completed":
        summary["reason"] = traj.exit_reason
    if args.format == "csv":
        out.write(to_csv(traj))
        out.write("# summary," + ",".join(f"{k}={number(v, 'csv') if isinstance(v, float) else v}"
                                          for k, v in summary.items()) + "\n")
    elif args.format == "jsonl":
        out.write(to_jsonl(traj))
        out.write(json.dumps({"summary": machine(summary)}) + "\n")
    else:
        cols = trajectory_columns(spec.dim)
        out.write(" ".join(f"{c:>13s}" for c in cols) + "\n")
        for row in trajectory_rows(traj):
            out.write(" ".join(f"{number(v, 'pretty'):>13s}" for v in row) + "\n")
        out.write("summary: " + ", ".join(f"{k}={number(v, 'pretty') if isinstance(v, float) else v}"
                                          for k, v in summary.items()) + "\n")
    return EXIT_DOMAIN if traj.status == "domain_exit" else EXIT_OK


def _write_report(report: StructuralReport, args, out):
    if args.format == "jsonl":
        out.write(json.dumps(machine(report.to_dict())) + "\n")
    elif args.format == "csv":
        w = csv.writer(out, lineterminator="\n")
        for e in report.entries:
            res = "" if e.max_residual is None else number(e.max_residual, "csv")
            tol = "" if e.tolerance is None else number(e.tolerance, "csv")
            w.writerow([report.metric, e.identity, e.interpretation, res, tol, e.samples, e.status])
    else:
        out.write(f"== {report.metric} ({report.context.get('samples', 0)} samples)\n")
        if "notice" in report.context:
            out.write(f"   notice: {report.context['notice']}\n")
        for e in report.entries:
            res = "-" if e.max_residual is None else number(e.max_residual, "pretty")
            tol = "" if e.tolerance is None else f" <= {number(e.tolerance, 'pretty')}"
            note = f"  [{e.notes}]" if e.status in ("vacuous", "skipped") else ""
            out.write(f"   {e.status:8s} {e.identity:62s} {res:>12s}{tol}{note}\n")


def cmd_verify(args, out) -> int:
    if args.samples < 1:
        raise UsageError("--samples must be at least 1")
    tol = tolerances(args)
    if args.metric or args.metric_file:
        sources = [load_source(args, allow_connection=True)]
    else:
        sources = catalog()
    if args.format == "csv":
        csv.writer(out, lineterminator="\n").writerow(
            ["metric", "identity", "interpretation", "max_residual", "tolerance", "samples", "status"])
    failed = []
    for source in sources:
        report = verify(source, args.samples, args.seed, tol)
        _write_report(report, args, out)
        failed += [(report.metric, e) for e in report.failures()]
    if failed:
        for metric, e in failed:
            print(f"FAILED {metric}: {e.identity}: {e.max_residual!r} > {e.tolerance!r}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def cmd_residuals(args, out) -> int:
    spec = load_source(args)
    traj = _integrate(args, spec)
    tol_geo = getattr(args, "tol_geo", None)
    report = geometrodynamics_residuals(spec, traj, stride=args.stride)
    if tol_geo is not None:
        if not tol_geo > 0:
            raise UsageError("--tol-geo must be positive")
        entry = report.entry("R_geo")
        entry.tolerance = tol_geo
        entry.status = "ok" if entry.passed else "failed"
    report.context["speed_drift"] = conserved_speed_report(traj, spec).drift
    body = machine(report.to_dict())
    if args.format == "pretty":
        out.write(json.dumps(body, indent=2) + "\n")
    else:
        out.write(json.dumps(body) + "\n")
    if traj.status == "domain_exit":
        return EXIT_DOMAIN
    return EXIT_OK if report.passed else EXIT_FAILED


def _matrix(src: str) -> np.ndarray:
    rows = [vector(r) for r in src.split(";")]
    if len({len(r) for r in rows}) != 1 or len(rows) != len(rows[0]):
        raise UsageError(f"--matrix must be square, rows separated by ';' (got {src!r})")
    return np.array(rows)


def cmd_expm_demo(args, out) -> int:
    w0 = _matrix(args.matrix)
    n = w0.shape[0]
    t = args.t_end
    v0 = vector(args.v0) if args.v0 else np.eye(n)[0]
    u0 = vector(args.x0) if args.x0 else np.zeros(n)
    if v0.shape != (n,) or u0.shape != (n,):
        raise UsageError(f"--v0/--x0 need {n} components")
    e = expm(-w0 * t)
    check = float(np.max(np.abs(expm(w0 * t) @ e - np.eye(n))))
    rec = {"W0": w0, "t": t, "expm(-W0 t)": e, "v(t)": constant_w_velocity(w0, v0, t),
           "u(t)": constant_w_position(w0, v0, u0, t), "inverse_check": check}
    if args.format == "jsonl":
        out.write(json.dumps(machine(rec)) + "\n")
    elif args.format == "csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["quantity", "index", "value"])
        for name, val in rec.items():
            arr = np.atleast_1d(np.asarray(val, dtype=float))
            for idx in np.ndindex(arr.shape):
                w.writerow([name, ":".join(str(i + 1) for i in idx) if np.ndim(val) else "",
                            number(float(arr[idx]), "csv")])
    else:
        for name, val in rec.items():
            txt = np.array2string(np.asarray(val, dtype=float), formatter={"float_kind": lambda x: f"{x:.6g}"})
            out.write(f"{name} = {txt}\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="geodyn", description="Metrics, curvature, geodesics and geospin identities.")
    p.add_argument("--version", action="version", version=f"geodyn {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, default_format="pretty"):
        sp.add_argument("--format", choices=("csv", "jsonl", "pretty"), default=default_format)
        sp.add_argument("--no-header", action="store_true", help="omit the timestamp header line")

    def metric_args(sp):
        sp.add_argument("--metric", help="builtin metric, e.g. sphere:r=2 or torus:R=2,a=1")
        sp.add_argument("--metric-file", help="JSON metric or connection definition")

    def flow_args(sp):
        sp.add_argument("--x0", help="initial position, comma separated (expressions allowed)")
        sp.add_argument("--v0", help="initial velocity, comma separated")
        sp.add_argument("--t-end", type=_arg_constant, default=1.0)
        sp.add_argument("--dt", type=_arg_constant, default=1e-3)
        sp.add_argument("--method", choices=("rk4", "rk45"), default="rk4")
        sp.add_argument("--tol-abs", type=_arg_constant, default=1e-10, help="rk45 absolute tolerance")
        sp.add_argument("--tol-rel", type=_arg_constant, default=1e-10, help="rk45 relative tolerance")
        sp.add_argument("--max-steps", type=int, default=1_000_000)

    m = sub.add_parser("metrics", help="list builtin metrics")
    m.add_argument("action", choices=("list",))
    common(m)

    c = sub.add_parser("curvature", help="Christoffel symbols, Riemann, Ricci and scalar curvature at a point")
    metric_args(c)
    c.add_argument("--at", help="point, comma separated")
    common(c)

    g = sub.add_parser("geodesic", help="integrate a geodesic and stream the samples")
    metric_args(g)
    flow_args(g)
    common(g, "csv")

    v = sub.add_parser("verify", help="run the identity suite at seeded points")
    metric_args(v)
    v.add_argument("--samples", type=int, default=100)
    v.add_argument("--seed", type=int, default=0)
    for key in DEFAULT_TOLERANCES:
        v.add_argument(f"--tol-{key}", type=_arg_constant, default=None,
                       help=f"override tolerance (default {DEFAULT_TOLERANCES[key]:g})")
    common(v)

    r = sub.add_parser("residuals", help="dynamical residual report along a geodesic (JSON)")
    metric_args(r)
    flow_args(r)
    r.add_argument("--stride", type=int, default=1, help="evaluate every k-th sample")
    r.add_argument("--tol-geo", type=_arg_constant, default=None)
    common(r, "jsonl")

    e = sub.add_parser("expm-demo", help="constant-W closed-form solutions")
    e.add_argument("--matrix", default="0,-1;1,0", help="W0, rows separated by ';'")
    e.add_argument("--t-end", type=_arg_constant, default=math.pi / 2)
    e.add_argument("--v0")
    e.add_argument("--x0")
    common(e)
    return p


COMMANDS = {"metrics": cmd_metrics, "curvature": cmd_curvature, "geodesic": cmd_geodesic,
            "verify": cmd_verify, "residuals": cmd_residuals, "expm-demo": cmd_expm_demo}


def main(argv: Sequence[str] | None = None, stdout=None) -> int:
    out = stdout if stdout is not None else sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:          # argparse reports usage errors with status 2
        return int(exc.code) if exc.code is not None else EXIT_OK
    buf = io.StringIO()
    if not args.no_header:
        buf.write(header_line(args.format) + "\n")
    try:
        code = COMMANDS[args.command](args, buf)
    except MaxStepsExceeded as exc:
        out.write(buf.getvalue())
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MAX_STEPS
    except (GeodynError, ValueError) as exc:
        out.write(buf.getvalue())
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    out.write(buf.getvalue())
    return code


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
