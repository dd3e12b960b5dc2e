"""Connection and curvature of the group defined by a deformation jet.

Index conventions (arrays)::

    gamma[m, k, n]      frame connection; nabla_k tau^m = X_k tau^m + gamma[m, k, n] tau^n
    F[n, k, l]          structure functions, antisymmetric in (k, l)
    R[m, l, k, n]       curvature; l is the transported slot, (k, n) the 2-form pair
    Rc[mu, la, ka, nu]  the same in coordinates

The ``*_jet`` helpers take a :class:`~deformgeo.jets.LocalJet` and return
x-TaylorArrays so that derivatives of composite objects stay exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import taylor as tj
from .errors import GaugeError
from .fields import CoefficientField, FlatMetric, IndexedTensor, slots
from .jets import DeformationJet, LocalJet

_FRAME3 = slots("Fu Fd Fd")
_FRAME4 = slots("Fu Fd Fd Fd")
_COORD4 = slots("Cu Cd Cd Cd")


@dataclass(frozen=True)
class ConnectionCoefficients:
    gamma_frame: IndexedTensor
    Gamma_coord: IndexedTensor


@dataclass(frozen=True)
class CurvatureTensors:
    R_frame: IndexedTensor
    S_frame: IndexedTensor
    R_coord: IndexedTensor


# ------------------------------------------------------------ jet formulas


def gamma_jet(loc: LocalJet):
    """gamma^m_kn = h^m_mu (Gamma^mu_kn + h^nu_k d_nu h^mu_n)."""
    hinv = loc.hinv
    dhinv = hinv.derivative()  # [mu, n, nu]
    gmix = tj.einsum("mab,ak,bn->mkn", loc.Gamma, hinv, hinv)
    drift = tj.einsum("bk,mnb->mkn", hinv, dhinv)
    return tj.einsum("ma,akn->mkn", loc.h, gmix + drift)


def structure_jet(loc: LocalJet):
    """F^n_kl = h^n_mu (h^nu_k d_nu h^mu_l - h^nu_l d_nu h^mu_k)."""
    hinv = loc.hinv
    dhinv = hinv.derivative()
    lie = tj.einsum("bk,mlb->mkl", hinv, dhinv)
    return tj.einsum("nm,mkl->nkl", loc.h, lie - lie.transpose(0, 2, 1))


def structure_coord(loc: LocalJet) -> np.ndarray:
    """F^k_{mu nu} = d_nu h^k_mu - d_mu h^k_nu."""
    dh = loc.h.d1  # [k, mu, nu]
    return dh - dh.transpose(0, 2, 1)


def _frame_gamma(loc: LocalJet):
    """Gamma^mu_{ab} with both lower indices converted to the frame (values)."""
    return np.einsum("mab,ak,bl->mkl", loc.Gamma.val, loc.hinv.val, loc.hinv.val)


def curvature_coord_array(loc: LocalJet) -> np.ndarray:
    """Rc[mu, la, ka, nu] from Gamma and its first derivatives."""
    G = loc.Gamma.val
    dG = loc.Gamma.d1  # [mu, a, b, c] = d_c Gamma^mu_ab
    return (
        np.einsum("mnlk->mlkn", dG)
        - np.einsum("mklv->mlkv", dG)
        + np.einsum("mks,snl->mlkn", G, G)
        - np.einsum("mns,skl->mlkn", G, G)
    )


def coord_to_frame(Rc, loc: LocalJet) -> np.ndarray:
    h, hinv = loc.h.val, loc.hinv.val
    return np.einsum("ma,abcd,bl,ck,dn->mlkn", h, Rc, hinv, hinv, hinv)


def frame_to_coord(R, loc: LocalJet) -> np.ndarray:
    h, hinv = loc.h.val, loc.hinv.val
    return np.einsum("am,mlkn,lb,kc,nd->abcd", hinv, R, h, h, h)


def curvature_left_array(loc: LocalJet) -> np.ndarray:
    """R^m_lkn from gamma, F and frame derivatives of gamma."""
    g = gamma_jet(loc)
    F = structure_jet(loc).val
    hinv = loc.hinv.val
    gv, dg = g.val, g.d1  # dg[m, a, b, s] = d_s gamma^m_ab
    return (
        -np.einsum("msl,skn->mlkn", gv, F)
        + np.einsum("sk,mnls->mlkn", hinv, dg)
        - np.einsum("sn,mkls->mlkn", hinv, dg)
        + np.einsum("mks,snl->mlkn", gv, gv)
        - np.einsum("mns,skl->mlkn", gv, gv)
    )


def curvature_right_array(loc: LocalJet) -> np.ndarray:
    """S^m_lkn from gamma, F and the frame derivative of F."""
    gv = gamma_jet(loc).val
    Fj = structure_jet(loc)
    F, dF = Fj.val, Fj.d1
    hinv = loc.hinv.val
    return (
        np.einsum("mls,skn->mlkn", gv, F)
        + np.einsum("sl,mkns->mlkn", hinv, dF)
        + np.einsum("msk,sln->mlkn", gv, gv)
        - np.einsum("msn,slk->mlkn", gv, gv)
    )


def sum_rule_rhs(loc: LocalJet) -> np.ndarray:
    """Right-hand side of the R + S relation, built from gamma alone."""
    g = gamma_jet(loc)
    gv, dg = g.val, g.d1
    hinv = loc.hinv.val
    return (
        np.einsum("sk,mlns->mlkn", hinv, dg)
        - np.einsum("sn,mlks->mlkn", hinv, dg)
        + np.einsum("mks,sln->mlkn", gv, gv)
        - np.einsum("msn,skl->mlkn", gv, gv)
        + np.einsum("msk,snl->mlkn", gv, gv)
        - np.einsum("mns,slk->mlkn", gv, gv)
    )


def jacobi_array(loc: LocalJet) -> np.ndarray:
    """X_k F^n_lm + F^n_kp F^p_lm + cycle(k, l, m); indexed [n, k, l, m]."""
    Fj = structure_jet(loc)
    F, dF = Fj.val, Fj.d1
    hinv = loc.hinv.val
    term = np.einsum("vk,nlmv->nklm", hinv, dF) + np.einsum("nkp,plm->nklm", F, F)
    return term + term.transpose(0, 2, 3, 1) + term.transpose(0, 3, 1, 2)


def rho_array(loc: LocalJet) -> np.ndarray:
    """Second-order coefficient rho^m_lkn of the left shift matrix."""
    h, hinv = loc.h.val, loc.hinv.val
    G, dG, D = loc.Gamma.val, loc.Gamma.d1, loc.Delta.val
    Gf = _frame_gamma(loc)
    Dlkn = np.einsum("mabc,al,bk,cn->mlkn", D, hinv, hinv, hinv)
    GG = np.einsum("mvs,vn,skl->mlkn", G, hinv, Gf)
    dGf = np.einsum("mabv,vn,ak,bl->mlkn", dG, hinv, hinv, hinv)
    return np.einsum("ma,alkn->mlkn", h, Dlkn - GG - dGf)


def sigma_array(loc: LocalJet) -> np.ndarray:
    """Second-order coefficient sigma^m_lkn of the right shift matrix."""
    h, hinv = loc.h.val, loc.hinv.val
    dhinv, d2hinv = loc.hinv.d1, loc.hinv.d2  # [mu, n, nu], [mu, n, ka, la]
    G, D = loc.Gamma.val, loc.Delta.val
    Gf = _frame_gamma(loc)
    Dlkn = np.einsum("mabc,al,bk,cn->mlkn", D, hinv, hinv, hinv)
    GG = np.einsum("mvs,vn,skl->mlkn", G, hinv, Gf)
    hess = np.einsum("ak,bl,mnab->mlkn", hinv, hinv, d2hinv)
    drift = np.einsum("vkl,mnv->mlkn", Gf, dhinv)
    Gk = np.einsum("mas,ak->mks", G, hinv)  # Gamma^mu_{k sigma}
    mixed = np.einsum("mks,vl,snv->mlkn", Gk, hinv, dhinv) + np.einsum("mls,vk,snv->mlkn", Gk, hinv, dhinv)
    return np.einsum("ma,alkn->mlkn", h, Dlkn - GG + hess - drift + mixed)


def antisym_last(a: np.ndarray) -> np.ndarray:
    return a - np.swapaxes(a, -1, -2)


def bianchi_array(Rc: np.ndarray) -> np.ndarray:
    """R^s_{abc} + R^s_{bca} + R^s_{cab}."""
    return Rc + Rc.transpose(0, 2, 3, 1) + Rc.transpose(0, 3, 1, 2)


def ricci_coord(Rc: np.ndarray) -> np.ndarray:
    """Ric_{la nu} = R^mu_{la mu nu}."""
    return np.einsum("mlmn->ln", Rc)


def ricci_frame(R: np.ndarray) -> np.ndarray:
    return np.einsum("mlmn->ln", R)


# ------------------------------------------------------------ public ops


def _loc(jet: DeformationJet, point) -> LocalJet:
    return jet.local(point, h_order=2, gamma_order=1, delta_order=0)


def gamma_frame(jet: DeformationJet, point) -> IndexedTensor:
    return IndexedTensor(gamma_jet(_loc(jet, point)).val, _FRAME3)


def connection(jet: DeformationJet, point) -> ConnectionCoefficients:
    loc = _loc(jet, point)
    return ConnectionCoefficients(
        IndexedTensor(gamma_jet(loc).val, _FRAME3),
        IndexedTensor(loc.Gamma.val, slots("Cu Cd Cd")),
    )


def curvature_coord(jet: DeformationJet, point) -> IndexedTensor:
    loc = jet.local(point, h_order=0, gamma_order=1, delta_order=0)
    return IndexedTensor(curvature_coord_array(loc), _COORD4)


def curvature_frame_left(jet: DeformationJet, point) -> IndexedTensor:
    return IndexedTensor(curvature_left_array(_loc(jet, point)), _FRAME4)


def curvature_frame_right(jet: DeformationJet, point) -> IndexedTensor:
    return IndexedTensor(curvature_right_array(_loc(jet, point)), _FRAME4)


def curvatures(jet: DeformationJet, point) -> CurvatureTensors:
    loc = _loc(jet, point)
    return CurvatureTensors(
        IndexedTensor(curvature_left_array(loc), _FRAME4),
        IndexedTensor(curvature_right_array(loc), _FRAME4),
        IndexedTensor(curvature_coord_array(loc), _COORD4),
    )


def rho_sigma_coefficients(jet: DeformationJet, point) -> tuple[IndexedTensor, IndexedTensor]:
    loc = _loc(jet, point)
    return IndexedTensor(rho_array(loc), _FRAME4), IndexedTensor(sigma_array(loc), _FRAME4)


def ricci_scalar(jet: DeformationJet, point, route: str = "coord") -> float:
    """Ricci scalar; needs a jet that carries a signature (orthonormal frame).

    ``route="coord"`` contracts the coordinate curvature with g^{-1} built
    from the vielbein; ``route="frame"`` contracts the frame curvature from
    gamma with eta and so depends on the vielbein derivatives.
    """
    if jet.signature is None:
        raise ValueError("ricci_scalar needs a jet with a metric signature")
    eta = FlatMetric(jet.signature).eta
    loc = _loc(jet, point)
    if route == "frame":
        return float(np.einsum("ln,ln->", eta, ricci_frame(curvature_left_array(loc))))
    h = loc.h.val
    ginv = np.linalg.inv(h.T @ eta @ h)
    return float(np.einsum("ln,ln->", ginv, ricci_coord(curvature_coord_array(loc))))


# ------------------------------------------------------------ gauge freedom


def _transform_h(jet: DeformationJet, L: CoefficientField, check, name) -> DeformationJet:
    base = jet.h

    def evaluator(x, order):
        lj = tj.as_taylor(L.jet(x, order), len(x), order)
        check(lj.val, x)
        hj = base.jet(x, order)
        return tj.einsum("mn,na->ma", lj, hj)

    h_new = CoefficientField(evaluator, jet.dim, base.slots, analytic_order=2, name=name)
    return jet.with_fields(h=h_new)


def gauge_transform_gl(jet: DeformationJet, L: CoefficientField) -> DeformationJet:
    """H'^m = L(x)^m_n H^n: same coordinate connection, rotated frame."""

    def check(lv, x):
        if not np.all(np.isfinite(lv)) or abs(np.linalg.det(lv)) < 1e-12 or np.linalg.cond(lv) > 1e12:
            raise GaugeError(f"gauge matrix singular at {x}")

    return _transform_h(jet, L, check, "h'")


def random_gl_field(dim: int, rng: np.random.Generator, amplitude: float = 0.3) -> CoefficientField:
    """Smooth invertible L(x) = s(x) (I + A(x)) with ||A|| <= amplitude < 1."""
    n = dim
    a = rng.uniform(-1, 1, (n, n)) * amplitude / n
    b = rng.uniform(-1, 1, (n, n, n))
    c = rng.uniform(0, 2 * np.pi, (n, n))
    s = rng.uniform(0.5, 1.5, 3)

    def fn(x):
        rows = []
        for i in range(n):
            row = []
            for j in range(n):
                phase = c[i, j]
                for k in range(n):
                    phase = phase + b[i, j, k] * x[k]
                row.append((1.0 if i == j else 0.0) + a[i, j] * np.sin(phase))
            rows.append(row)
        scale = s[0] + 0.3 * np.cos(s[1] * x[0] + s[2])
        return tj.stack(rows) * scale

    return CoefficientField.from_function(fn, n, slots("Fu Fd"), name="L")
