"""Metric-compatible deformations: vielbein, Christoffel symbols, Delta, SO gauge.

A metric provider supplies g_{mu nu}(x) as a coefficient field.  From it we
build the (pseudo)orthonormal vielbein by a signature-aware triangular
factorization, the Christoffel symbols, and the symmetric third-order
coefficient Delta, and assemble them into a :class:`DeformationJet`.

All factorizations run in jet arithmetic, so derivatives of the vielbein
are exact whenever the metric derivatives are.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import taylor as tj
from .errors import GaugeError, MetricSignatureError
from .expr import compile_expression, default_variables
from .fields import CoefficientField, FlatMetric, IndexedTensor, as_coords, slots
from . import geometry as geo
from .geometry import _transform_h, gamma_jet, structure_jet
from .jets import DeformationJet, LocalJet
from .taylor import TaylorArray

SYMMETRY_TOL = 1e-12
PIVOT_TOL = 1e-14
ORTHO_TOL = 1e-12

_G_SLOTS = slots("Cd Cd")
_H_SLOTS = slots("Fu Cd")
_GAMMA_SLOTS = slots("Cu Cd Cd")
_DELTA_SLOTS = slots("Cu Cd Cd Cd")


class MetricProvider:
    """g_{mu nu}(x) with declared signature (m, n - m).

    ``g`` is a coefficient field returning the symmetric matrix; its
    derivative mode decides whether curvature uses exact or finite-difference
    metric derivatives.
    """

    def __init__(self, g: CoefficientField, dim: int, signature, name: str = "", domain=None, coords=()):
        self.g = g
        self.coords = tuple(coords or ())
        self.dim = int(dim)
        self.flat = FlatMetric(tuple(signature))
        if self.flat.dim != self.dim:
            raise MetricSignatureError(f"signature {signature} does not match dimension {dim}")
        self.signature = self.flat.signature
        self.name = name
        self.domain = None if domain is None else np.array(domain, float).reshape(self.dim, 2)

    @property
    def mode(self) -> str:
        return self.g.mode

    @classmethod
    def from_function(cls, fn, dim, signature, name="", domain=None, mode="analytic"):
        """``fn(x)`` returns the nested g matrix; x arrives as a seeded jet."""
        field = CoefficientField.from_function(fn, dim, _G_SLOTS, mode=mode, name=f"g[{name}]")
        return cls(field, dim, signature, name, domain)

    @classmethod
    def from_arrays(cls, g_fn, dim, signature, dg_fn=None, d2g_fn=None, name="", domain=None):
        """Plain-array provider: g(x) plus optional dg[a,b,c] and d2g[a,b,c,d]."""
        supplied = 0 if dg_fn is None else (1 if d2g_fn is None else 2)

        def evaluator(x, order):
            parts = [np.asarray(g_fn(x), float)]
            if order >= 1:
                parts.append(np.asarray(dg_fn(x), float))
            if order >= 2:
                parts.append(np.asarray(d2g_fn(x), float))
            parts += [None] * (3 - len(parts))
            return TaylorArray(parts[0], parts[1], parts[2], nvars=len(x))

        field = CoefficientField(evaluator, dim, _G_SLOTS, analytic_order=supplied, name=f"g[{name}]")
        return cls(field, dim, signature, name, domain)

    @classmethod
    def from_expressions(cls, components, dim, signature, name="", domain=None, coords=None, mode="analytic"):
        """Symmetric matrix of expression strings in x0, x1, ... (or ``coords`` names)."""
        n = int(dim)
        if len(components) != n or any(len(row) != n for row in components):
            raise MetricSignatureError(f"metric components must form a {n}x{n} matrix")
        names = default_variables(n, coords)
        compiled = [[compile_expression(str(c), names) for c in row] for row in components]

        def fn(x):
            return [[f(x) for f in row] for row in compiled]

        provider = cls.from_function(fn, n, signature, name, domain, mode)
        provider.coords = tuple(coords or ())
        return provider

    @classmethod
    def from_json(cls, source):
        """Load ``{name, dim, signature, domain, components[, coords]}`` from a path or dict."""
        if isinstance(source, (str, Path)):
            data = json.loads(Path(source).read_text())
        else:
            data = dict(source)
        missing = {"name", "dim", "signature", "components"} - set(data)
        if missing:
            raise MetricSignatureError(f"metric file lacks fields {sorted(missing)}")
        return cls.from_expressions(
            data["components"],
            data["dim"],
            data["signature"],
            name=data["name"],
            domain=data.get("domain"),
            coords=data.get("coords"),
        )

    def with_mode(self, mode: str) -> "MetricProvider":
        return MetricProvider(self.g.with_mode(mode), self.dim, self.signature, self.name, self.domain, self.coords)

    def jet(self, x, order: int = 2) -> TaylorArray:
        x = as_coords(x)
        j = tj.as_taylor(self.g.jet(x, order), self.dim, order)
        check_symmetric(j.val, x)
        return j

    def value(self, x) -> np.ndarray:
        x = as_coords(x)
        g = self.g.value(x)
        check_symmetric(g, x)
        return g


def check_symmetric(g: np.ndarray, x=None):
    g = np.asarray(g, float)
    scale = max(1.0, float(np.max(np.abs(g))))
    if np.max(np.abs(g - g.T)) > SYMMETRY_TOL * scale:
        raise MetricSignatureError(f"metric is not symmetric at {x}: max |g - g^T| = {np.max(np.abs(g - g.T)):.3g}")


# ------------------------------------------------------------ vielbein


def _triangular_frame(g, signature):
    """h with h^T eta h = g, lower triangular up to a signature row permutation.

    The factorization eliminates coordinates from the last one backwards
    (g = U D U^T with U unit upper triangular), so h = sqrt|D| U^T is lower
    triangular with positive diagonal.  Rows are then stably reordered so
    that positive-norm frame vectors come first, matching eta.
    """
    n = tj.value(g).shape[0]
    p = list(range(n - 1, -1, -1))
    G = [[g[p[i]][p[j]] for j in range(n)] for i in range(n)]
    L = [[None] * n for _ in range(n)]
    d = [None] * n
    scale = max(1.0, float(np.max(np.abs(tj.value(g)))))
    for j in range(n):
        dj = G[j][j]
        for k in range(j):
            dj = dj - L[j][k] * L[j][k] * d[k]
        if abs(float(tj.value(dj))) <= PIVOT_TOL * scale:
            raise MetricSignatureError("metric is degenerate: zero pivot in factorization")
        d[j] = dj
        for i in range(j + 1, n):
            lij = G[i][j]
            for k in range(j):
                lij = lij - L[i][k] * L[j][k] * d[k]
            L[i][j] = lij / dj
    signs = [1.0 if float(tj.value(dj)) > 0 else -1.0 for dj in d]
    npos = sum(1 for s in signs if s > 0)
    if npos != signature[0]:
        raise MetricSignatureError(
            f"metric has {npos} positive and {n - npos} negative directions, declared signature {tuple(signature)}"
        )
    rows = [[0.0] * n for _ in range(n)]
    row_sign = [0.0] * n
    for m in range(n):
        root = tj.sqrt(d[m] * signs[m])
        row_sign[p[m]] = signs[m]
        for mu in range(n):
            if mu == m:
                rows[p[m]][p[mu]] = root
            elif mu > m:
                rows[p[m]][p[mu]] = root * L[mu][m]
    order = sorted(range(n), key=lambda r: (row_sign[r] < 0, r))
    return tj.stack([rows[r] for r in order])


def vielbein_jet(metric: MetricProvider, x, order: int = 2):
    return _triangular_frame(metric.jet(x, order), metric.signature)


def orthonormal_vielbein(metric: MetricProvider, point) -> IndexedTensor:
    """h^m_mu with h^T eta h = g, in the triangular gauge."""
    x = as_coords(point)
    return IndexedTensor(tj.value(_triangular_frame(metric.value(x), metric.signature)), _H_SLOTS)


def reconstruct_metric(h, signature) -> np.ndarray:
    h = np.asarray(h, float)
    return h.T @ FlatMetric(tuple(signature)).eta @ h


# ------------------------------------------------------------ Christoffel and Delta


def christoffel_jet(gj):
    """(first kind [s, m, n], second kind [s, m, n]) one order below the metric jet."""
    dg = gj.derivative()  # dg[a, b, c] = d_c g_ab
    # first[s, m, n] = 1/2 (d_m g_ns + d_n g_ms - d_s g_mn)
    first = 0.5 * (tj.einsum("nsm->smn", dg) + tj.einsum("msn->smn", dg) - tj.einsum("mns->smn", dg))
    ginv = tj.inv(gj.truncate(gj.order - 1)) if isinstance(gj, TaylorArray) else np.linalg.inv(gj)
    second = tj.einsum("st,tmn->smn", ginv, first)
    return first, second


def delta_from_gamma(Gj):
    """Totally symmetric Delta from a first-order Christoffel jet (value returned)."""
    G = tj.value(Gj)
    dG = Gj.d1  # [s, m, n, r] = d_r Gamma^s_mn
    derivs = (
        np.einsum("smnr->smnr", dG)
        + np.einsum("smrn->smnr", dG)
        + np.einsum("snrm->smnr", dG)
    )
    quad = (
        np.einsum("str,tmn->smnr", G, G)
        + np.einsum("stn,tmr->smnr", G, G)
        + np.einsum("stm,tnr->smnr", G, G)
    )
    return (derivs + quad) / 3.0


def christoffel(metric: MetricProvider, point):
    """Christoffel symbols (first kind [s, m, n], second kind [s, m, n]) at ``point``."""
    x = as_coords(point)
    first, second = christoffel_jet(metric.jet(x, 1))
    return (
        IndexedTensor(tj.value(first), slots("Cd Cd Cd")),
        IndexedTensor(tj.value(second), _GAMMA_SLOTS),
    )


def delta_coefficients(metric: MetricProvider, point) -> IndexedTensor:
    x = as_coords(point)
    _, second = christoffel_jet(metric.jet(x, 2))
    return IndexedTensor(delta_from_gamma(second), _DELTA_SLOTS)


def solve_deformation(metric: MetricProvider, **kw) -> DeformationJet:
    """Metric-compatible deformation jet.

    h is the triangular orthonormal vielbein, Gamma the Christoffel symbols
    and Delta their symmetrized derivative.  Compatibility holds exactly at
    orders 0 and 1 in the displacement; at order 2 it holds up to
    ``curvature_obstruction``.
    """
    n = metric.dim

    def h_eval(x, order):
        return vielbein_jet(metric, x, order)

    def gamma_eval(x, order):
        _, second = christoffel_jet(metric.jet(x, order + 1))
        return second

    def delta_eval(x, order):
        _, second = christoffel_jet(metric.jet(x, 2))
        return delta_from_gamma(second)

    h = CoefficientField(h_eval, n, _H_SLOTS, analytic_order=2, name="h")
    G = CoefficientField(gamma_eval, n, _GAMMA_SLOTS, analytic_order=1, name="Gamma")
    D = CoefficientField(delta_eval, n, _DELTA_SLOTS, analytic_order=0, name="Delta")
    kw.setdefault("domain", metric.domain)
    kw.setdefault("name", metric.name)
    return DeformationJet(n, h, G, D, signature=metric.signature, **kw)


# ------------------------------------------------------------ compatibility checks


def compatibility_residuals(jet: DeformationJet, metric: MetricProvider, point) -> dict[int, np.ndarray]:
    """Residuals of dH^T eta dH = g(x + t~) at t~-orders 0, 1 and 2.

    Order k compares the coefficient of t~^k (symmetrized) on both sides;
    the right side's coefficients are g, dg and 1/2 d2g.
    """
    x = as_coords(point)
    eta = metric.flat.eta
    loc = jet.local(x, h_order=0, gamma_order=0, delta_order=0)
    h, G, D = loc.h.val, loc.Gamma.val, loc.Delta.val
    gj = metric.jet(x, 2)
    A0 = h
    A1 = np.einsum("ma,ans->mns", h, G)
    A2 = 0.5 * np.einsum("ma,ansr->mnsr", h, D)
    lhs0 = A0.T @ eta @ A0
    lhs1 = np.einsum("mas,mn,nb->abs", A1, eta, A0) + np.einsum("ma,mn,nbs->abs", A0, eta, A1)
    lhs2 = (
        np.einsum("masr,mn,nb->absr", A2, eta, A0)
        + np.einsum("ma,mn,nbsr->absr", A0, eta, A2)
        + np.einsum("mas,mn,nbr->absr", A1, eta, A1)
    )
    lhs2 = 0.5 * (lhs2 + lhs2.transpose(0, 1, 3, 2))
    return {
        0: lhs0 - gj.val,
        1: lhs1 - gj.d1,
        2: lhs2 - 0.5 * gj.d2,
    }


def curvature_obstruction(jet: DeformationJet, metric: MetricProvider, point) -> np.ndarray:
    """(R_{mu s nu r} + R_{mu r nu s}) / 6 in the [mu, nu, s, r] layout of the order-2 residual.

    On a curved metric the order-2 compatibility residual equals this term
    exactly: no cubic deformation can absorb it, since that would make
    t~ -> H(x, t~) an isometry onto flat space.
    """
    x = as_coords(point)
    loc = jet.local(x, h_order=0, gamma_order=1, delta_order=0)
    Rl = np.einsum("at,tbcd->abcd", metric.value(x), geo.curvature_coord_array(loc))
    return (np.einsum("msnr->mnsr", Rl) + np.einsum("mrns->mnsr", Rl)) / 6.0


def metricity_residual(jet: DeformationJet, metric: MetricProvider, point) -> np.ndarray:
    """Gamma_{mu nu s} + Gamma_{nu mu s} - d_s g_{mu nu} with the jet's Gamma."""
    x = as_coords(point)
    gj = metric.jet(x, 1)
    G = jet.Gamma.value(x)
    low = np.einsum("mt,tns->mns", gj.val, G)
    return low + low.transpose(1, 0, 2) - gj.d1


def ricci_rotation_array(loc: LocalJet, signature) -> tuple[np.ndarray, np.ndarray]:
    """(gamma_{slk} from structure functions, eta-lowered connection gamma_{slk})."""
    eta = FlatMetric(tuple(signature)).eta
    F = np.einsum("sm,mlk->slk", eta, structure_jet(loc).val)
    from_F = 0.5 * (F + np.einsum("ksl->slk", F) + np.einsum("lsk->slk", F))
    lowered = np.einsum("sm,mlk->slk", eta, gamma_jet(loc).val)
    return from_F, lowered


def ricci_rotation(source, point, signature=None) -> IndexedTensor:
    """Ricci rotation coefficients gamma_{slk} (all indices down) from structure functions."""
    jet = solve_deformation(source) if isinstance(source, MetricProvider) else source
    sig = signature or jet.signature
    if sig is None:
        raise ValueError("ricci_rotation needs an orthonormal frame signature")
    loc = jet.local(point, h_order=1, gamma_order=0, delta_order=0)
    from_F, _ = ricci_rotation_array(loc, sig)
    return IndexedTensor(from_F, slots("Fd Fd Fd"))


def rotation_antisymmetry(lowered: np.ndarray) -> np.ndarray:
    """gamma_{ksl} + gamma_{lsk}; vanishes for an orthonormal frame."""
    return lowered + lowered.transpose(2, 1, 0)


# ------------------------------------------------------------ SO(m, n-m) gauge


@dataclass(frozen=True)
class GaugeRotation:
    """Pointwise pseudo-rotation Lambda(x)^m_n preserving eta."""

    Lambda: CoefficientField
    signature: tuple[int, int]

    def check(self, lv, x=None):
        eta = FlatMetric(tuple(self.signature)).eta
        lv = np.asarray(lv, float)
        dev = np.max(np.abs(lv.T @ eta @ lv - eta)) if np.all(np.isfinite(lv)) else np.inf
        if dev > ORTHO_TOL:
            raise GaugeError(f"gauge matrix is not eta-orthogonal at {x}: deviation {dev:.3g}")

    def value(self, x) -> np.ndarray:
        lv = self.Lambda.value(x)
        self.check(lv, x)
        return lv


def gauge_transform_so(jet: DeformationJet, rotation: GaugeRotation) -> DeformationJet:
    """H'^m = Lambda(x)^m_n H^n; the metric and curvature are unchanged."""
    if jet.signature is not None and tuple(jet.signature) != tuple(rotation.signature):
        raise GaugeError(f"rotation signature {rotation.signature} does not match jet {jet.signature}")
    return _transform_h(jet, rotation.Lambda, rotation.check, "h'")


def random_so_field(signature, rng: np.random.Generator, amplitude: float = 0.5) -> GaugeRotation:
    """Smooth Lambda(x): a product of plane rotations and boosts with x-dependent angles."""
    m, k = (int(s) for s in signature)
    n = m + k
    planes = [(i, j) for i in range(n) for j in range(i + 1, n)]
    coef = rng.uniform(-1, 1, (len(planes), n + 1)) * amplitude
    freq = rng.uniform(0.5, 1.5, (len(planes), n))

    def fn(x):
        total = None
        for p, (i, j) in enumerate(planes):
            angle = coef[p, n]
            for a in range(n):
                angle = angle + coef[p, a] * np.sin(freq[p, a] * x[a])
            boost = (i < m) != (j < m)
            c, s = (np.cosh(angle), np.sinh(angle)) if boost else (np.cos(angle), np.sin(angle))
            rows = [[(1.0 if r == q else 0.0) for q in range(n)] for r in range(n)]
            rows[i][i] = c
            rows[j][j] = c
            rows[i][j] = s if boost else -s
            rows[j][i] = s
            mat = tj.stack(rows)
            total = mat if total is None else tj.einsum("ab,bc->ac", total, mat)
        if total is None:
            return [[x[0] * 0.0 + 1.0]]
        return total

    field = CoefficientField.from_function(fn, n, slots("Fu Fd"), name="Lambda")
    return GaugeRotation(field, (m, k))


def constant_rotation(matrix, signature) -> GaugeRotation:
    n = sum(signature)
    rot = GaugeRotation(CoefficientField.constant(matrix, n, slots("Fu Fd"), name="Lambda"), tuple(signature))
    rot.check(matrix)
    return rot
