"""Batch verification of the identity chain over catalog metrics and sampled points."""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import geometry as geo
from . import group
from . import riemann
from . import taylor as tj
from . import transport
from .catalog import MetricCatalogEntry, get, names
from .errors import GeometryError
from .fields import FlatMetric, central_diff
from .jets import eval_H, eval_K

SCHEMA_VERSION = 1
EPS0 = 1e-2
HALVINGS = 4
#: rounding floor of scaled residuals, relative to the scale (quantities compared are O(scale))
NOISE_REL = 1e-14
#: scaling slopes are fitted over at most this many of the smallest scales
FIT_WINDOW = 4
#: noise floor of checks that difference the fields in x (about eps / FD step)
FD_NOISE = 1e-10
#: with finite-difference metric derivatives the scaled identities pick up an error
#: linear in |t|; its coefficient is the error of a second difference (about 3e-8)
FD_LINEAR = 1e-7
#: points used by the (more expensive) scaling checks
SCALING_POINTS = 2


@dataclass(frozen=True)
class Check:
    id: str
    kind: str  # "residual" or "scaling"
    fn: Callable
    tol: float = 0.0
    slope_min: float = 0.0
    fd_sensitive: bool = True
    fd_linear: bool = False  # scaling checks: FD metric derivatives add an O(|t|) error
    noise: float = 0.0  # scaling checks: absolute floor below which residuals are not signal


@dataclass
class ReportRow:
    id: str
    metric: str
    points: int
    max_residual: float
    tolerance: float | None
    slope: float | None
    slope_min: float | None
    passed: bool
    deriv: str
    note: str = ""

    def record(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "id": self.id,
            "metric": self.metric,
            "points": self.points,
            "max_residual": self.max_residual,
            "tolerance": self.tolerance,
            "slope": self.slope,
            "slope_min": self.slope_min,
            "pass": self.passed,
            "deriv": self.deriv,
            "note": self.note,
        }


@dataclass
class VerificationReport:
    rows: list[ReportRow] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def failures(self) -> list[ReportRow]:
        return [r for r in self.rows if not r.passed]

    def records(self) -> list[dict]:
        return [r.record() for r in self.rows]

    def to_json(self) -> str:
        return dumps(self.records())

    def to_text(self) -> str:
        head = ("id", "metric", "pts", "max_residual", "tolerance", "slope", "status")
        body = []
        for r in self.rows:
            body.append(
                (
                    r.id,
                    r.metric,
                    str(r.points),
                    f"{r.max_residual:.3e}",
                    "-" if r.tolerance is None else f"{r.tolerance:.1e}",
                    "-" if r.slope is None else f"{r.slope:.2f}>={r.slope_min:.1f}",
                    ("PASS" if r.passed else "FAIL") + (f" ({r.note})" if r.note else ""),
                )
            )
        widths = [max(len(h), *(len(b[i]) for b in body)) if body else len(h) for i, h in enumerate(head)]
        lines = ["  ".join(h.ljust(w) for h, w in zip(head, widths)).rstrip()]
        lines.append("  ".join("-" * w for w in widths))
        for b in body:
            lines.append("  ".join(c.ljust(w) for c, w in zip(b, widths)).rstrip())
        n_fail = len(self.failures())
        lines.append(f"{len(self.rows) - n_fail}/{len(self.rows)} checks passed")
        return "\n".join(lines) + "\n"


# ------------------------------------------------------------ JSON


def _fmt(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if not math.isfinite(v):
            return "null"
        return format(v, ".17g")
    if isinstance(v, str):
        import json

        return json.dumps(v)
    if isinstance(v, dict):
        return "{" + ", ".join(f"{_fmt(str(k))}: {_fmt(x)}" for k, x in v.items()) + "}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    if isinstance(v, np.generic):
        return _fmt(v.item())
    if isinstance(v, np.ndarray):
        return _fmt(v.tolist())
    raise TypeError(f"cannot serialize {type(v).__name__}")


def dumps(records) -> str:
    """JSON with floats written to 17 significant digits (lossless) and NaN as null."""
    if isinstance(records, list):
        return "[\n" + ",\n".join("  " + _fmt(r) for r in records) + "\n]\n"
    return _fmt(records) + "\n"


# ------------------------------------------------------------ per-metric context


class _Context:
    def __init__(self, entry: MetricCatalogEntry, deriv: str, seed: int):
        self.entry = entry
        self.metric = entry.metric(deriv)
        self.jet = riemann.solve_deformation(self.metric)
        self.n = entry.dim
        self.eta = FlatMetric(entry.signature).eta
        self.rng = np.random.default_rng([seed, zlib.crc32(entry.name.encode())])
        n = self.n
        self.dirs = self.rng.uniform(-1, 1, (3, n))
        coef = self.rng.uniform(-1, 1, (2, n, n))
        phase = self.rng.uniform(0, 2 * np.pi, n)
        self.tau = lambda x: [
            0.5 + 0.3 * np.sin(phase[m] + sum(coef[0, m, a] * x[a] for a in range(n))) for m in range(n)
        ]
        self.test_scalar = group.default_test_scalar(n, seed)
        self.gl = geo.random_gl_field(n, self.rng)
        self.so = riemann.random_so_field(entry.signature, self.rng)
        self.chain_cache: dict = {}

    def t(self, i, x, scale=1.0):
        """Group parameter of size ``scale`` whose displacement K stays small in coordinates."""
        h = self.jet.h.value(x)
        d = self.dirs[i]
        # normalize by the coordinate size of the displacement
        return scale * d / max(1e-300, np.max(np.abs(np.linalg.solve(h, d))))

    def chain(self, x, s):
        key = (tuple(x), s)
        if key not in self.chain_cache:
            self.chain_cache[key] = group.verify_identities(
                self.jet, x, self.t(0, x, s), self.t(1, x, s), self.t(2, x, s), test_scalar=self.test_scalar,
                ids=_SCALED_IDS,
            )
        return self.chain_cache[key]


_SCALED_IDS = ("eq10", "eq11", "eq12", "eq13", "eq14", "eq15", "eq16", "eq17")


def _loc(ctx, x):
    return ctx.jet.local(x, h_order=2, gamma_order=1, delta_order=0)


def _maxabs(a) -> float:
    return float(np.max(np.abs(a))) if np.size(a) else 0.0


# ------------------------------------------------------------ residual checks


def _eq6(ctx, x):
    n = ctx.n

    def dt(tp):
        return group._phi(ctx.jet, x, tj.seed(np.zeros(n), 1), tp).d1  # [m, k]

    mixed = central_diff(dt, np.zeros(n))  # [m, k, l'] = d_k d_l' phi^m
    F_def = mixed - mixed.transpose(0, 2, 1)
    return F_def - geo.structure_jet(_loc(ctx, x)).val


def _eq7(ctx, x):
    loc = ctx.jet.local(x, 0, 0, 0)
    return loc.h.val @ loc.hinv.val - np.eye(ctx.n)


def _identity(name):
    def fn(ctx, x):
        return group.identity_residuals(ctx.jet, x, ctx.t(0, x, EPS0), ctx.t(1, x, EPS0), ctx.t(2, x, EPS0),
                                        test_scalar=ctx.test_scalar, ids=(name,))[name]

    return fn


def _eq24(ctx, x):
    mu, _ = group.shift_t_jets(ctx.jet, x, np.zeros(ctx.n))
    return mu.d1 - geo.gamma_jet(_loc(ctx, x)).val  # mu^m_n = delta + gamma^m_nk t^k


def _eq25(ctx, x):
    _, lam = group.shift_t_jets(ctx.jet, x, np.zeros(ctx.n))
    loc = _loc(ctx, x)
    g = geo.gamma_jet(loc).val
    sig = geo.sigma_array(loc)
    first = lam.d1 - np.einsum("mkn->mnk", g)
    second = np.einsum("mnlk->mlkn", lam.d2) - 0.5 * (sig + sig.transpose(0, 2, 1, 3))
    return np.concatenate([first.ravel(), second.ravel()])


def _eq26(ctx, x):
    loc = _loc(ctx, x)
    g = geo.gamma_jet(loc).val
    return geo.structure_jet(loc).val - (g - g.transpose(0, 2, 1))


def _eq27(ctx, x):
    loc = _loc(ctx, x)
    return geo.curvature_left_array(loc) - geo.antisym_last(geo.rho_array(loc))


def _eq28(ctx, x):
    loc = _loc(ctx, x)
    return geo.curvature_right_array(loc) - geo.antisym_last(geo.sigma_array(loc))


def _eq29(ctx, x):
    loc = _loc(ctx, x)
    return geo.curvature_left_array(loc) - geo.coord_to_frame(geo.curvature_coord_array(loc), loc)


def _eq31(ctx, x):
    loc = _loc(ctx, x)
    return geo.curvature_left_array(loc) + geo.curvature_right_array(loc) - geo.sum_rule_rhs(loc)


def _definitional_shift(ctx, x, t, left):
    """d phi / d t' at t' = 0 with the other slot fixed, by exact reversion."""
    n = ctx.n
    seed = tj.seed(np.zeros(n), 1)
    if left:
        return group._phi(ctx.jet, x, seed, t, order="exact").d1
    return group._phi(ctx.jet, x, t, seed, order="exact").d1


def _eq32(ctx, x):
    t = ctx.t(0, x, 0.05)
    mu, _, _, _ = group._shift(ctx.jet, x, t, order="exact")
    return np.asarray(mu) - _definitional_shift(ctx, x, t, left=True)


def _eq33(ctx, x):
    t = ctx.t(1, x, 0.05)
    _, lam, _, _ = group._shift(ctx.jet, x, t, order="exact")
    return np.asarray(lam) - _definitional_shift(ctx, x, t, left=False)


def _eq34(ctx, x):
    t = ctx.t(2, x, 0.05)
    _, lam, K, _ = group._shift(ctx.jet, x, t)
    return np.asarray(lam) - transport.lambda_disp(ctx.jet, x, np.asarray(K))


def _eq36(ctx, x):
    return group.gamma_from_group(ctx.jet, x) - geo.gamma_jet(_loc(ctx, x)).val


def _eq37(ctx, x):
    n = ctx.n

    def dmu(t):
        mu, _ = group.shift_t_jets(ctx.jet, x, t)
        return mu.d1  # [m, n, k]

    hess = np.einsum("mnkl->mlkn", central_diff(dmu, np.zeros(n)))
    rho = geo.rho_array(_loc(ctx, x))
    sym = lambda a: 0.5 * (a + a.transpose(0, 2, 1, 3))
    return sym(hess) - sym(rho)


def _eq41(ctx, x):
    """Coordinate connection recovered from the rotated frame, and frame-route curvature."""
    jet2 = geo.gauge_transform_gl(ctx.jet, ctx.gl)
    loc = _loc(ctx, x)
    loc2 = jet2.local(x, h_order=2, gamma_order=1, delta_order=0)
    return np.concatenate([
        (_gamma_from_frame(loc2) - loc.Gamma.val).ravel(),
        (geo.frame_to_coord(geo.curvature_left_array(loc2), loc2) - geo.curvature_coord_array(loc)).ravel(),
    ])


def _gamma_from_frame(loc):
    """Invert gamma = h (Gamma h^-1 h^-1 + h^-1 d h^-1) for Gamma^mu_{ab}."""
    g = geo.gamma_jet(loc).val
    h, hinv = loc.h.val, loc.hinv.val
    drift = np.einsum("bk,mnb->mkn", hinv, loc.hinv.d1)
    mixed = np.einsum("am,mkn->akn", hinv, g) - drift
    return np.einsum("akn,kb,nc->abc", mixed, h, h)


def _eq42(ctx, x):
    _, lowered = riemann.ricci_rotation_array(_loc(ctx, x), ctx.entry.signature)
    return riemann.rotation_antisymmetry(lowered)


def _eq43(ctx, x):
    from_F, lowered = riemann.ricci_rotation_array(_loc(ctx, x), ctx.entry.signature)
    return from_F - lowered


def _eq44(ctx, x):
    res = riemann.compatibility_residuals(ctx.jet, ctx.metric, x)
    obstruction = riemann.curvature_obstruction(ctx.jet, ctx.metric, x)
    return np.concatenate([res[0].ravel(), res[1].ravel(), (res[2] - obstruction).ravel()])


def _eq45(ctx, x):
    return eval_H(ctx.jet, x, np.zeros(ctx.n))


def _eq46(ctx, x):
    jet2 = riemann.gauge_transform_so(ctx.jet, ctx.so)
    h2 = jet2.h.value(x)
    return riemann.reconstruct_metric(h2, ctx.entry.signature) - ctx.metric.value(x)


def _eq46_ricci(ctx, x):
    jet2 = riemann.gauge_transform_so(ctx.jet, ctx.so)
    return np.array([geo.ricci_scalar(jet2, x, route="frame") - geo.ricci_scalar(ctx.jet, x)])


def _eq47(ctx, x):
    return riemann.metricity_residual(ctx.jet, ctx.metric, x)


def _eq48(ctx, x):
    """Christoffel symbols against the connection rebuilt from Ricci rotation coefficients."""
    loc = _loc(ctx, x)
    from_F, _ = riemann.ricci_rotation_array(loc, ctx.entry.signature)
    g_up = np.einsum("ms,slk->mlk", np.linalg.inv(ctx.eta), from_F)
    h, hinv = loc.h.val, loc.hinv.val
    drift = np.einsum("bk,mnb->mkn", hinv, loc.hinv.d1)
    rebuilt = np.einsum("akn,kb,nc->abc", np.einsum("am,mkn->akn", hinv, g_up) - drift, h, h)
    _, second = riemann.christoffel(ctx.metric, x)
    return rebuilt - second.data


def _bianchi(ctx, x):
    return geo.bianchi_array(geo.curvature_coord_array(_loc(ctx, x)))


def _rho(ctx, x):
    loc = _loc(ctx, x)
    rho = geo.rho_array(loc)
    rc = np.einsum("am,mlkn,lb,kc,nd->abcd", loc.hinv.val, rho, loc.h.val, loc.h.val, loc.h.val)
    Rc = geo.curvature_coord_array(loc)
    return rc - (Rc + Rc.transpose(0, 2, 1, 3)) / 3.0


def _ricci(ctx, x):
    expected = ctx.entry.expected_ricci(x)
    if expected is None:
        return np.zeros(0)
    return np.array([geo.ricci_scalar(ctx.jet, x) - expected, geo.ricci_scalar(ctx.jet, x, "frame") - expected])


# ------------------------------------------------------------ scaling checks


def _scales(ctx):
    return [ctx.entry.scaling_eps0 / 2**i for i in range(HALVINGS + 1)]


def _chain_scaling(name):
    def fn(ctx, x):
        return [ctx.chain(x, s)[name] for s in _scales(ctx)]

    return fn


def _eq3(ctx, x):
    out = []
    for s in _scales(ctx):
        t = ctx.t(0, x, s)
        out.append(_maxabs(eval_H(ctx.jet, x, eval_K(ctx.jet, x, t)) - t))
    return out


def _eq39(ctx, x):
    """Transport x + t~ -> x and back: deviation from the identity."""
    out = []
    for s in _scales(ctx):
        tt = s * ctx.dirs[0]
        there = transport.lambda_disp(ctx.jet, x + tt, -tt)
        back = transport.lambda_disp(ctx.jet, x, tt)
        out.append(_maxabs(there @ back - np.eye(ctx.n)))
    return out


def _eq40(ctx, x):
    """Finite transport minus its first-order covariant-derivative form."""
    out = []
    for s in _scales(ctx):
        t = ctx.t(1, x, s)
        res = transport.parallel_transport(ctx.jet, x, t, ctx.tau)
        nab = np.array([transport.covariant_derivative_frame(ctx.jet, x, k, ctx.tau) for k in range(ctx.n)])
        first = transport._eval(ctx.tau, x) + t @ nab
        out.append(_maxabs(res.transported - first))
    return out


def _holonomy(ctx, x):
    out = []
    for s in _scales(ctx):
        r = transport.holonomy_parallelogram(ctx.jet, x, s * ctx.dirs[0], s * ctx.dirs[1], ctx.tau)
        out.append(r.gap)
    return out


CHECKS: tuple[Check, ...] = (
    Check("eq3", "scaling", _eq3, slope_min=3.8),
    Check("eq6", "residual", _eq6, tol=1e-8),
    Check("eq7", "residual", _eq7, tol=1e-12, fd_sensitive=False),
    Check("eq10", "scaling", _chain_scaling("eq10"), slope_min=3.8),
    Check("eq11", "scaling", _chain_scaling("eq11"), slope_min=2.8),
    Check("eq12", "scaling", _chain_scaling("eq12"), slope_min=2.8),
    Check("eq13", "scaling", _chain_scaling("eq13"), slope_min=2.8, noise=FD_NOISE, fd_linear=True),
    Check("eq14", "scaling", _chain_scaling("eq14"), slope_min=2.8, noise=FD_NOISE, fd_linear=True),
    Check("eq15", "scaling", _chain_scaling("eq15"), slope_min=2.8, noise=FD_NOISE, fd_linear=True),
    Check("eq16", "scaling", _chain_scaling("eq16"), slope_min=2.8),
    Check("eq17", "scaling", _chain_scaling("eq17"), slope_min=2.8),
    Check("eq18", "residual", _identity("eq18"), tol=1e-9),
    Check("eq22", "residual", _identity("eq22"), tol=1e-7),
    Check("eq23", "residual", _identity("eq23"), tol=1e-8),
    Check("eq24", "residual", _eq24, tol=1e-9),
    Check("eq25", "residual", _eq25, tol=1e-9),
    Check("eq26", "residual", _eq26, tol=1e-9),
    Check("eq27", "residual", _eq27, tol=1e-9),
    Check("eq28", "residual", _eq28, tol=1e-9),
    Check("eq29", "residual", _eq29, tol=1e-9),
    Check("eq31", "residual", _eq31, tol=1e-9),
    Check("eq32", "residual", _eq32, tol=1e-9),
    Check("eq33", "residual", _eq33, tol=1e-9),
    Check("eq34", "residual", _eq34, tol=1e-12, fd_sensitive=False),
    Check("eq36", "residual", _eq36, tol=1e-9),
    Check("eq37", "residual", _eq37, tol=1e-6),
    Check("eq39", "scaling", _eq39, slope_min=1.8),
    Check("eq40", "scaling", _eq40, slope_min=1.8),
    Check("eq41", "residual", _eq41, tol=1e-8),
    Check("eq42", "residual", _eq42, tol=1e-10),
    Check("eq43", "residual", _eq43, tol=1e-9),
    Check("eq44", "residual", _eq44, tol=1e-10),
    Check("eq45", "residual", _eq45, tol=1e-15, fd_sensitive=False),
    Check("eq46", "residual", _eq46, tol=1e-10),
    Check("eq46.ricci", "residual", _eq46_ricci, tol=1e-8),
    Check("eq47", "residual", _eq47, tol=1e-10),
    Check("eq48", "residual", _eq48, tol=1e-9),
    Check("bianchi", "residual", _bianchi, tol=1e-9),
    Check("holonomy", "scaling", _holonomy, slope_min=2.8),
    Check("rho", "residual", _rho, tol=1e-9),
    Check("ricci", "residual", _ricci, tol=1e-8),
)

CHECK_IDS = tuple(c.id for c in CHECKS)


def fit_slope(scales, residuals) -> float:
    return transport.fit_slope(scales, residuals)


def _run_check(check: Check, ctx: _Context, points, tol_scale: float) -> ReportRow:
    entry = ctx.entry
    deriv = ctx.metric.mode
    floor = entry.tolerance_floor if deriv == entry.deriv else (0.0 if deriv == "analytic" else 5e-6)
    if deriv == "fd":
        floor = max(floor, 5e-6)
    if check.kind == "residual":
        tol = check.tol if not check.fd_sensitive else max(check.tol, floor)
        tol *= tol_scale
        worst, compared = 0.0, 0
        for x in points:
            res = np.asarray(check.fn(ctx, x))
            compared += res.size
            worst = max(worst, _maxabs(res))
        passed = bool(worst <= tol)
        note = "" if compared else "no reference value"
        return ReportRow(check.id, entry.name, len(points), worst, tol, None, None, passed, deriv, note)
    pts = points[:SCALING_POINTS]
    scales = np.array(_scales(ctx))
    worst, slope, exact = 0.0, math.inf, True
    for x in pts:
        res = np.asarray(check.fn(ctx, x), float)
        worst = max(worst, res[0])
        # fit only the halvings that are still above the noise floor
        floor = np.maximum(check.noise, NOISE_REL * scales)
        if deriv == "fd" and check.fd_linear:
            floor = np.maximum(floor, FD_LINEAR * scales)
        keep = np.flatnonzero(res > floor)[-FIT_WINDOW:]
        if keep.size >= 2:
            exact = False
            slope = min(slope, fit_slope(scales[keep], res[keep]))
    if exact:
        note = "exact" if worst <= NOISE_REL * scales[0] else "at noise floor"
        return ReportRow(check.id, entry.name, len(pts), worst, None, None, check.slope_min, True, deriv, note)
    passed = bool(slope >= check.slope_min)
    return ReportRow(check.id, entry.name, len(pts), worst, None, slope, check.slope_min, passed, deriv)


def run_entry(entry: MetricCatalogEntry, points: int = 10, seed: int = 0, deriv: str | None = None,
              tol_scale: float = 1.0, only=None) -> list[ReportRow]:
    mode = deriv or entry.deriv
    try:
        ctx = _Context(entry, mode, seed)
        pts = [np.asarray(p) for p in entry.sample_points(points, ctx.rng)]
        for x in pts:
            riemann.vielbein_jet(ctx.metric, x, 0)  # symmetry and signature at every sample
    except GeometryError as exc:
        return [ReportRow("validation", entry.name, 0, math.nan, None, None, None, False, mode, _err(exc))]
    rows = []
    for check in CHECKS:
        if only is not None and check.id not in only:
            continue
        try:
            rows.append(_run_check(check, ctx, pts, tol_scale))
        except GeometryError as exc:
            rows.append(ReportRow(check.id, entry.name, len(pts), math.nan, None, None, None, False, mode, _err(exc)))
    return rows


def _err(exc: Exception) -> str:
    return f"{type(exc).__name__}: {exc}"


def run_suite(metric="all", points: int = 10, seed: int = 0, deriv: str | None = None, tol_scale: float = 1.0,
              only=None) -> VerificationReport:
    """Run every check on one metric (name or entry) or on the whole catalog.

    Rows are sorted by (identity id, metric), so the report depends only on
    the arguments.
    """
    if isinstance(metric, MetricCatalogEntry):
        entries = [metric]
    elif metric == "all":
        entries = [get(n) for n in names()]
    else:
        entries = [get(metric)]
    rows = []
    for entry in entries:
        rows.extend(run_entry(entry, points, seed, deriv, tol_scale, only))
    order = {c: i for i, c in enumerate(CHECK_IDS)}
    rows.sort(key=lambda r: (order.get(r.id, -1), r.metric))
    return VerificationReport(rows)
