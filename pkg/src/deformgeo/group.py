"""The deformed diffeomorphism group: multiplication law, action, shift
matrices, structure functions, generators and the identity chain.

Group parameters are constant frame vectors t^m.  Parameter derivatives are
taken exactly by running the closed-form expressions on t-TaylorArrays;
x-derivatives of composite quantities use the field engine (central
differences on the closure).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import geometry as geo
from . import taylor as tj
from .fields import CoefficientField, IndexedTensor, as_coords, central_diff, slots
from .jets import (
    DeformationJet,
    LocalJet,
    H_matrix,
    _check_invertible,
    _check_trust,
    as_param,
    invert_checked,
    poly,
    reversion,
)
from .taylor import TaylorArray

DEFAULT_ORDER = 3


@dataclass(frozen=True)
class ShiftMatrices:
    mu: np.ndarray
    lam: np.ndarray
    x: np.ndarray
    t: np.ndarray


@dataclass(frozen=True)
class StructureFunctions:
    F: IndexedTensor  # canonical: vielbein commutator route
    F_connection: IndexedTensor  # antisymmetrized gamma
    F_group: IndexedTensor  # from the t-expansion of the right shift matrix
    F_coord: IndexedTensor  # anholonomity object with coordinate lower indices


# ------------------------------------------------------------ internals


def _embed(a: TaylorArray, before: int, after: int) -> TaylorArray:
    """Place a jet's variables inside a larger (t, x) space; unknown d2 blocks are zero.

    Only the mixed (t, x) block and the t block of downstream results are
    used, which is all the chain rule for d_x K(x, t) needs.
    """
    nv = a.nvars
    total = before + nv + after
    shape = a.val.shape
    d1 = np.concatenate([np.zeros(shape + (before,)), a.d1, np.zeros(shape + (after,))], axis=-1)
    d2 = np.zeros(shape + (total, total))
    if a.order >= 2:
        d2[..., before:before + nv, before:before + nv] = a.d2
    return TaylorArray(a.val, d1, d2, nvars=total)


def K_and_dK(loc: LocalJet, t, order=DEFAULT_ORDER):
    """K(x, t) and d_nu K^mu(x, t) as matrix [mu, nu].

    ``t`` may be a t-TaylorArray, in which case both results carry exact
    t-derivatives (the x-derivative to first order in t).  Needs hinv,
    Gamma and Delta jets of order >= 1 in ``loc``.
    """
    n = loc.x.size
    hinv, G, D = loc.hinv.truncate(1), loc.Gamma.truncate(1), loc.Delta.truncate(1)
    if not isinstance(t, TaylorArray):
        k = reversion(hinv, G, D, np.asarray(t, float), order)
        return k.val, k.d1
    nt = t.nvars
    tj_ = _embed(t, 0, n)
    cj = [_embed(c, nt, 0) for c in (hinv, G, D)]
    k = reversion(cj[0], cj[1], cj[2], tj_, order)
    tidx = np.arange(nt)
    K = k.restrict(tidx).truncate(t.order)
    dK = TaylorArray(k.d1[:, nt:], k.d2[:, nt:, :nt], None, nvars=nt)
    return K, dK


def _field_at(jet: DeformationJet, xp, which=("hinv",), order=1):
    """Coefficients at the displaced point, composed with x'(t) when it is a jet."""
    xv = tj.value(xp)
    jet.check_inside(xv)
    sub = order if isinstance(xp, TaylorArray) else 0
    out = []
    for name in which:
        if name == "hinv":
            h = jet.h.jet(xv, sub)
            _check_invertible(h.val, xv)
            f = tj.inv(h)
        else:
            f = getattr(jet, name).jet(xv, sub)
        out.append(tj.compose(f, xp) if isinstance(xp, TaylorArray) else tj.value(f))
    return out


def _shift(jet: DeformationJet, x, t, order=DEFAULT_ORDER):
    """(mu, lambda) at (x, t); t may be a t-TaylorArray (mu to first order only)."""
    loc = jet.local(x, h_order=1, gamma_order=1, delta_order=1)
    K, dK = K_and_dK(loc, t, order)
    _check_trust(jet, K)
    n = x.size
    Hm = H_matrix(loc, K)
    mu = tj.einsum("ma,ab,bn->mn", Hm, np.eye(n) + dK, loc.hinv.val)
    t_order = t.order if isinstance(t, TaylorArray) else 0
    (hinv_p,) = _field_at(jet, x + K, ("hinv",), order=max(t_order, 1))
    lam = tj.einsum("ma,an->mn", Hm, hinv_p)
    return mu, lam, K, dK


def _phi(jet: DeformationJet, x, t, tp, order=DEFAULT_ORDER):
    """phi(x, t, t') = H(x, K(x, t) + K(x', t')); t or t' may be TaylorArrays."""
    loc = jet.local(x, h_order=0, gamma_order=0, delta_order=0)
    h, hinv, G, D = loc.h.val, loc.hinv.val, loc.Gamma.val, loc.Delta.val
    k1 = reversion(hinv, G, D, t, order)
    _check_trust(jet, k1)
    xp = x + k1
    hinv2, G2, D2 = _field_at(jet, xp, ("hinv", "Gamma", "Delta"), order=1)
    k2 = reversion(hinv2, G2, D2, tp, order)
    _check_trust(jet, k2)
    return tj.einsum("ma,a->m", h, poly(G, D, k1 + k2))


def _tseed(t):
    return tj.seed(np.asarray(t, float), 1)


# ------------------------------------------------------------ public ops


def multiply(jet: DeformationJet, point, t, t_prime, order=DEFAULT_ORDER) -> np.ndarray:
    """phi^m(x, t, t') = H^m(x, K(x, t) + K(x', t')), x' = x + K(x, t)."""
    x = as_coords(point)
    return _phi(jet, x, as_param(t), as_param(t_prime), order)


def act(jet: DeformationJet, point, t, order=DEFAULT_ORDER) -> np.ndarray:
    """x'^mu = x^mu + K^mu(x, t)."""
    x = as_coords(point)
    loc = jet.local(x, h_order=0, gamma_order=0, delta_order=0)
    k = reversion(loc.hinv.val, loc.Gamma.val, loc.Delta.val, as_param(t), order)
    _check_trust(jet, k)
    xp = x + k
    jet.check_inside(xp)
    return xp


def shift_matrices(jet: DeformationJet, point, t, order=DEFAULT_ORDER) -> ShiftMatrices:
    """mu(x, t) and lambda(x, t) from the closed-form products of jet matrices."""
    x = as_coords(point)
    t = as_param(t)
    mu, lam, _, _ = _shift(jet, x, t, order)
    invert_checked(mu)
    invert_checked(lam)
    return ShiftMatrices(np.asarray(mu), np.asarray(lam), x, t)


def shift_t_jets(jet: DeformationJet, point, t, order=DEFAULT_ORDER):
    """mu and lambda as t-TaylorArrays: mu to first, lambda to second order."""
    x = as_coords(point)
    t = np.asarray(as_param(t), float)
    mu, _, _, _ = _shift(jet, x, tj.seed(t, 1), order)
    _, lam, _, _ = _shift(jet, x, tj.seed(t, 2), order)
    return mu, lam


def gamma_from_group(jet: DeformationJet, point) -> np.ndarray:
    """gamma^m_kn read off the t-derivative of lambda^m_n at t = 0."""
    x = as_coords(point)
    _, lam = shift_t_jets(jet, x, np.zeros(x.size))
    return np.einsum("mnk->mkn", lam.d1)


def structure_functions(jet: DeformationJet, point) -> StructureFunctions:
    x = as_coords(point)
    loc = jet.local(x, h_order=2, gamma_order=1, delta_order=0)
    F = geo.structure_jet(loc).val
    g = geo.gamma_jet(loc).val
    gg = gamma_from_group(jet, x)
    tags = slots("Fu Fd Fd")
    return StructureFunctions(
        IndexedTensor(F, tags),
        IndexedTensor(g - g.transpose(0, 2, 1), tags),
        IndexedTensor(gg - gg.transpose(0, 2, 1), tags),
        IndexedTensor(geo.structure_coord(loc), slots("Fu Cd Cd")),
    )


class Generators:
    """Action generators X_k = h^nu_k d_nu as operators on scalar fields."""

    def __init__(self, jet: DeformationJet, point=None):
        self.jet = jet
        self.point = None if point is None else as_coords(point)

    @property
    def matrix(self) -> np.ndarray:
        """h^nu_k at the bound point, indexed [nu, k]."""
        return self.jet.local(self.point, 0, 0, 0).hinv.val

    def apply(self, k: int, f: CoefficientField) -> CoefficientField:
        jet = self.jet

        def evaluator(x, order):
            loc = jet.local(x, h_order=order, gamma_order=0, delta_order=0)
            fj = tj.as_taylor(f.jet(x, order + 1), len(x), order + 1)
            grad = fj.derivative()
            return tj.einsum("v,v->", loc.hinv[:, k], grad)

        return CoefficientField(evaluator, jet.dim, (), analytic_order=min(1, f.analytic_order - 1), name=f"X{k}f")

    def commutator(self, k: int, l: int, f: CoefficientField, point=None) -> float:
        x = self.point if point is None else as_coords(point)
        return float(self.apply(k, self.apply(l, f)).value(x) - self.apply(l, self.apply(k, f)).value(x))

    def structure_residual(self, f: CoefficientField, point=None) -> float:
        """max |[X_k, X_l] f - F^n_kl X_n f| over k, l."""
        x = self.point if point is None else as_coords(point)
        n = self.jet.dim
        F = structure_functions(self.jet, x).F.data
        xf = np.array([self.apply(m, f).value(x) for m in range(n)])
        worst = 0.0
        for k in range(n):
            for l in range(k + 1, n):
                r = self.commutator(k, l, f, x) - F[:, k, l] @ xf
                worst = max(worst, abs(r))
        return worst


def generators(jet: DeformationJet, point=None) -> Generators:
    return Generators(jet, point)


# ------------------------------------------------------------ identities

IDENTITY_IDS = ("eq10", "eq11", "eq12", "eq13", "eq14", "eq15", "eq16", "eq17", "eq18", "eq22", "eq23")

#: power of |t| by which each identity residual vanishes with the cubic jet
#: and third-order reversion (None: holds to rounding at any t)
SCALING_ORDER = {
    "eq10": 4,
    "eq11": 3,
    "eq12": 3,
    "eq13": 3,
    "eq14": 3,
    "eq15": 3,
    "eq16": 3,
    "eq17": 3,
    "eq18": None,
    "eq22": None,
    "eq23": None,
}


def _fd_x(fn: Callable[[np.ndarray], np.ndarray], x) -> np.ndarray:
    return central_diff(fn, x)


def identity_residuals(jet: DeformationJet, point, t, t_prime, t_second=None, order=DEFAULT_ORDER, test_scalar=None,
                       ids=None):
    """Residual arrays of the identity chain at (x, t, t', t'').

    Returns a dict id -> ndarray for ``ids`` (default: all of
    :data:`IDENTITY_IDS`).  t-derivatives are exact, x-derivatives are
    central differences of the closed-form closures.
    """
    want = set(IDENTITY_IDS if ids is None else ids)
    x = as_coords(point)
    n = x.size
    t = np.asarray(as_param(t), float)
    tp = np.asarray(as_param(t_prime), float)
    tpp = 0.5 * (t - tp) if t_second is None else np.asarray(as_param(t_second), float)

    loc0 = jet.local(x, h_order=2, gamma_order=1, delta_order=1)
    hinv = loc0.hinv.val
    out = {}

    K1 = reversion(hinv, loc0.Gamma.val, loc0.Delta.val, t, order)
    xp = x + K1
    if want & {"eq10", "eq11", "eq12"}:
        phi = _phi(jet, x, t, tp, order)
    if "eq10" in want:
        lhs = _phi(jet, x, phi, tpp, order)
        rhs = _phi(jet, x, t, _phi(jet, xp, tp, tpp, order), order)
        out["eq10"] = lhs - rhs

    # left / right Lie equations for the multiplication law
    if want & {"eq11", "eq12", "eq13", "eq14", "eq15", "eq16", "eq17"}:
        mu, lam, K, dK = _shift(jet, x, t, order)
    if "eq11" in want:
        dphi_x = _fd_x(lambda y: _phi(jet, y, t, tp, order), x)  # [m, mu]
        dphi_t = _phi(jet, x, _tseed(t), tp, order).d1  # [m, n]
        mu_phi, _, _, _ = _shift(jet, x, phi, order)
        out["eq11"] = (
            np.einsum("ak,ma->mk", hinv, dphi_x) - np.einsum("nk,mn->mk", mu, dphi_t) + mu_phi
        )
    if "eq12" in want:
        dphi_tp = _phi(jet, x, t, _tseed(tp), order).d1
        _, lam_phi, _, _ = _shift(jet, x, phi, order)
        _, lam_xp, _, _ = _shift(jet, xp, tp, order)
        out["eq12"] = np.einsum("nk,mn->mk", lam_xp, dphi_tp) - lam_phi

    # Maurer-Cartan equations
    if want & {"eq13", "eq14", "eq15"}:
        mu_t, _, _, _ = _shift(jet, x, _tseed(t), order)
        _, lam_t2, _, _ = _shift(jet, x, tj.seed(t, 2), order)
        both = _fd_x(lambda y: np.stack([np.asarray(m) for m in _shift(jet, y, t, order)[:2]]), x)
        dmu_x, dlam_x = both[0], both[1]  # [m, l, nu]
        dmu_t = mu_t.d1  # [m, l, n]
        dlam_t = lam_t2.d1
    if "eq13" in want:
        F_x = geo.structure_jet(loc0).val
        left = np.einsum("vk,mlv->mkl", hinv, dmu_x) - np.einsum("nk,mln->mkl", mu, dmu_t)
        out["eq13"] = left - left.transpose(0, 2, 1) - np.einsum("nkl,mn->mkl", F_x, mu)
    if want & {"eq14", "eq17"}:
        locp = jet.local(xp, h_order=2, gamma_order=0, delta_order=0)
    if "eq14" in want:
        F_xp = geo.structure_jet(locp).val
        right = np.einsum("nk,mln->mkl", lam, dlam_t)
        out["eq14"] = right - right.transpose(0, 2, 1) - np.einsum("nkl,mn->mkl", F_xp, lam)
    if "eq15" in want:
        out["eq15"] = (
            np.einsum("vk,mlv->mkl", hinv, dlam_x)
            - np.einsum("nk,mln->mkl", mu, dlam_t)
            + np.einsum("nl,mkn->mkl", lam, dmu_t)
        )

    # Lie equations for the action f(x, t) = x + K(x, t)
    if want & {"eq16", "eq17"}:
        _, _, Kt, _ = _shift(jet, x, _tseed(t), order)
        df_t = Kt.d1  # [mu, n]
    if "eq16" in want:
        df_x = np.eye(n) + dK  # [mu, nu]
        out["eq16"] = np.einsum("vk,mv->mk", hinv, df_x) - np.einsum("nk,mn->mk", mu, df_t)
    if "eq17" in want:
        out["eq17"] = locp.hinv.val - np.einsum("nk,mn->mk", lam, df_t)

    # Maurer-Cartan equation of the action, with F read off the group law
    if "eq18" in want:
        F_group = structure_functions(jet, x).F_group.data
        dhinv = loc0.hinv.d1  # [mu, l, nu]
        lie = np.einsum("vk,mlv->mkl", hinv, dhinv)
        out["eq18"] = lie - lie.transpose(0, 2, 1) - np.einsum("nkl,mn->mkl", F_group, hinv)

    if "eq22" in want:
        f = test_scalar if test_scalar is not None else default_test_scalar(n)
        out["eq22"] = np.array([Generators(jet, x).structure_residual(f)])
    if "eq23" in want:
        out["eq23"] = geo.jacobi_array(loc0)
    return out


def verify_identities(jet: DeformationJet, point, t, t_prime, t_second=None, order=DEFAULT_ORDER, test_scalar=None,
                      ids=None) -> dict:
    """Max-abs residual per identity id (see :data:`SCALING_ORDER`)."""
    res = identity_residuals(jet, point, t, t_prime, t_second, order, test_scalar, ids)
    return {k: float(np.max(np.abs(v))) for k, v in res.items()}


def default_test_scalar(dim: int, seed: int = 0) -> CoefficientField:
    rng = np.random.default_rng(seed)
    a = rng.uniform(-1, 1, (3, dim))
    c = rng.uniform(0, 2 * np.pi, 3)

    def fn(x):
        total = 0.0
        for i in range(3):
            phase = c[i]
            for k in range(dim):
                phase = phase + a[i, k] * x[k]
            total = total + np.sin(phase) * (i + 1) / 3.0
        return total

    return CoefficientField.from_function(fn, dim, (), name="test scalar")
