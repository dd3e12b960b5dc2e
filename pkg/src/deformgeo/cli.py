"""Command line interface: ``deformgeo <command> --metric NAME|FILE.json ...``.

Exit status: 0 on success, 1 when verification fails or the geometry raises,
2 on usage errors.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import catalog as cat
from . import geometry as geo
from . import riemann, suite, transport
from .errors import GeometryError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _vector(text: str | None, dim: int, what: str, default=None) -> np.ndarray:
    if text is None:
        if default is None:
            raise UsageError(f"--{what} is required")
        return np.asarray(default, float)
    try:
        v = np.array([float(p) for p in text.split(",")], float)
    except ValueError:
        raise UsageError(f"--{what}: expected comma-separated numbers, got {text!r}") from None
    if v.size != dim:
        raise UsageError(f"--{what}: expected {dim} components, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise UsageError(f"--{what}: components must be finite")
    return v


def _entry(args) -> cat.MetricCatalogEntry:
    ref = args.metric
    path = Path(ref)
    if ref.endswith(".json") or path.is_file():
        if not path.is_file():
            raise UsageError(f"metric file not found: {ref}")
        provider = riemann.MetricProvider.from_json(path)
        try:
            return cat.entry_from_provider(provider)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    try:
        return cat.get(ref)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None


def _setup(args):
    entry = _entry(args)
    metric = entry.metric(args.deriv)
    x = _vector(args.at, entry.dim, "at")
    lo, hi = entry.domain[:, 0], entry.domain[:, 1]
    if np.any(x < lo) or np.any(x > hi):
        raise UsageError(f"--at {args.at} lies outside the chart domain {entry.domain.tolist()}")
    return entry, metric, riemann.solve_deformation(metric), x


def _header(entry, metric, x) -> dict:
    return {
        "schema": suite.SCHEMA_VERSION,
        "metric": entry.name,
        "coords": list(entry.coords) or [f"x{i}" for i in range(entry.dim)],
        "signature": list(entry.signature),
        "deriv": metric.mode,
        "point": x,
    }


def _components(array: np.ndarray, names, pattern: str, cut: float = 1e-14) -> dict:
    """Nonzero components keyed by index names, e.g. 'R^theta_{phi theta phi}'."""
    out = {}
    for idx in zip(*np.nonzero(np.abs(array) > cut)):
        labels = [names[i] for i in idx]
        out[pattern.format(labels[0], " ".join(labels[1:]))] = float(array[idx])
    return out


# ------------------------------------------------------------ commands


def cmd_curvature(args) -> tuple[dict, int]:
    entry, metric, jet, x = _setup(args)
    R = geo.curvature_coord(jet, x).data
    out = _header(entry, metric, x)
    names = out["coords"]
    out["riemann"] = R
    out["components"] = _components(R, names, "R^{}_{{{}}}")
    out["ricci"] = geo.ricci_coord(R)
    out["ricci_scalar"] = geo.ricci_scalar(jet, x)
    return out, EXIT_OK


def cmd_christoffel(args) -> tuple[dict, int]:
    entry, metric, _, x = _setup(args)
    first, second = riemann.christoffel(metric, x)
    out = _header(entry, metric, x)
    out["first_kind"] = first.data
    out["second_kind"] = second.data
    out["components"] = _components(second.data, out["coords"], "Gamma^{}_{{{}}}")
    return out, EXIT_OK


def _tau(args, dim):
    e1 = np.eye(dim)[0]
    v = _vector(args.vector, dim, "vector", default=e1)
    return lambda y: v * (y[0] * 0.0 + 1.0), v


def cmd_transport(args) -> tuple[dict, int]:
    entry, metric, jet, x = _setup(args)
    disp = _vector(args.disp, entry.dim, "disp", default=1e-2 * np.eye(entry.dim)[0])
    tau, v = _tau(args, entry.dim)
    res = transport.transport_disp(jet, x, disp, tau)
    out = _header(entry, metric, x)
    out.update(
        disp=disp,
        vector=v,
        source_point=res.source_point.coords,
        transported=res.transported,
        shift_matrix=transport.lambda_disp(jet, x, disp),
    )
    return out, EXIT_OK


def cmd_holonomy(args) -> tuple[dict, int]:
    entry, metric, jet, x = _setup(args)
    n = entry.dim
    if n < 2:
        raise UsageError("holonomy needs dimension >= 2")
    t1 = _vector(args.t1, n, "t1", default=1e-3 * np.eye(n)[0])
    t2 = _vector(args.t2, n, "t2", default=1e-3 * np.eye(n)[1])
    tau, v = _tau(args, n)
    res = transport.holonomy_parallelogram(jet, x, t1, t2, tau)
    out = _header(entry, metric, x)
    out.update(t1=t1, t2=t2, vector=v, difference=res.difference, prediction=res.prediction,
               gap=res.gap, relative_gap=res.relative_gap)
    return out, EXIT_OK


def cmd_solve(args) -> tuple[dict, int]:
    entry, metric, jet, x = _setup(args)
    loc = jet.local(x, h_order=0, gamma_order=0, delta_order=0)
    res = riemann.compatibility_residuals(jet, metric, x)
    obstruction = riemann.curvature_obstruction(jet, metric, x)
    out = _header(entry, metric, x)
    out.update(
        h=loc.h.val,
        Gamma=loc.Gamma.val,
        Delta=loc.Delta.val,
        compatibility={
            "order0": float(np.max(np.abs(res[0]))),
            "order1": float(np.max(np.abs(res[1]))),
            "order2": float(np.max(np.abs(res[2]))),
            "order2_curvature_part": float(np.max(np.abs(obstruction))),
            "order2_remainder": float(np.max(np.abs(res[2] - obstruction))),
        },
        metricity=float(np.max(np.abs(riemann.metricity_residual(jet, metric, x)))),
    )
    return out, EXIT_OK


def cmd_verify(args) -> tuple[suite.VerificationReport, int]:
    if args.points < 1:
        raise UsageError("--points must be >= 1")
    if not args.tol_scale > 0:
        raise UsageError("--tol-scale must be positive")
    if args.metric == "all":
        target = "all"
    else:
        try:
            target = _entry(args)
        except GeometryError as exc:
            # a metric file that fails validation is a failed verification
            name = Path(args.metric).stem
            row = suite.ReportRow("validation", name, 0, math.nan, None, None, None, False,
                                  args.deriv or "analytic", f"{type(exc).__name__}: {exc}")
            report = suite.VerificationReport([row])
            return report, EXIT_FAIL
    report = suite.run_suite(target, points=args.points, seed=args.seed, deriv=args.deriv, tol_scale=args.tol_scale)
    return report, EXIT_OK if report.passed else EXIT_FAIL


def cmd_catalog(args) -> tuple[object, int]:
    if args.coverage:
        return {"coverage": cat.coverage_lines()}, EXIT_OK
    rows = []
    for e in cat.catalog():
        rows.append(
            {
                "name": e.name,
                "dim": e.dim,
                "signature": list(e.signature),
                "coords": list(e.coords),
                "domain": e.domain,
                "deriv": e.deriv,
                "description": e.description,
            }
        )
    return rows, EXIT_OK


# ------------------------------------------------------------ output


def _text(obj) -> str:
    if isinstance(obj, suite.VerificationReport):
        return obj.to_text()
    if isinstance(obj, dict) and "coverage" in obj:
        return "\n".join(obj["coverage"]) + "\n"
    if isinstance(obj, list):
        width = max(len(r["name"]) for r in obj)
        lines = [
            f"{r['name']:<{width}}  dim={r['dim']}  signature={tuple(r['signature'])}  {r['deriv']:<8}  {r['description']}"
            for r in obj
        ]
        return "\n".join(lines) + "\n"
    lines = []
    with np.printoptions(precision=10, suppress=True):
        for key, val in obj.items():
            if isinstance(val, dict):
                lines.append(f"{key}:")
                lines.extend(f"  {k}: {v:.12g}" for k, v in val.items())
            elif isinstance(val, np.ndarray) and val.ndim > 1:
                lines.append(f"{key}:")
                lines.extend(("  " + line).rstrip() for line in str(val).splitlines())
            else:
                lines.append(f"{key}: {val}")
    return "\n".join(lines) + "\n"


def _render(obj, fmt: str) -> str:
    if fmt == "text":
        return _text(obj)
    if isinstance(obj, suite.VerificationReport):
        return obj.to_json()
    return suite.dumps(obj)


# ------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deformgeo", description="Geometry of deformed translation groups.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, point=True):
        p.add_argument("--metric", required=True, help="catalog name or JSON metric file")
        if point:
            p.add_argument("--at", required=True, help="chart point, comma-separated coordinates")
        p.add_argument("--deriv", choices=("analytic", "fd"), default=None,
                       help="metric derivatives (default: the entry's own)")
        p.add_argument("--format", choices=("json", "text"), default="json")

    for name, help_ in (
        ("curvature", "coordinate curvature tensor and Ricci scalar"),
        ("christoffel", "Christoffel symbols of both kinds"),
        ("solve", "metric-compatible deformation jet and its residuals"),
    ):
        common(sub.add_parser(name, help=help_))

    p = sub.add_parser("transport", help="transport a vector from x + disp back to x")
    common(p)
    p.add_argument("--disp", help="coordinate displacement (default 1e-2 along the first axis)")
    p.add_argument("--vector", help="frame components of the transported vector (default e1)")

    p = sub.add_parser("holonomy", help="two-path transport around a parallelogram")
    common(p)
    p.add_argument("--t1", help="first edge (default 1e-3 along the first axis)")
    p.add_argument("--t2", help="second edge (default 1e-3 along the second axis)")
    p.add_argument("--vector", help="frame components of the transported vector (default e1)")

    p = sub.add_parser("verify", help="run the identity suite")
    common(p, point=False)
    p.add_argument("--points", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol-scale", dest="tol_scale", type=float, default=1.0)

    p = sub.add_parser("catalog", help="list built-in metrics")
    p.add_argument("--coverage", action="store_true", help="map each equation to its suite checks")
    p.add_argument("--format", choices=("json", "text"), default="text")
    return parser


COMMANDS = {
    "curvature": cmd_curvature,
    "christoffel": cmd_christoffel,
    "transport": cmd_transport,
    "holonomy": cmd_holonomy,
    "solve": cmd_solve,
    "verify": cmd_verify,
    "catalog": cmd_catalog,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        result, status = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"deformgeo {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GeometryError as exc:
        print(f"deformgeo {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    sys.stdout.write(_render(result, args.format))
    return status


if __name__ == "__main__":
    sys.exit(main())
