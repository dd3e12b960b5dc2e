"""Cubic jets of the deformation H(x, t~) and their series reversion.

Index layout used throughout the package (all arrays are dense)::

    h[m, mu]          h^m_mu      vielbein, frame row / coordinate column
    hinv[mu, m]       h^mu_m      inverse vielbein
    Gamma[mu, a, b]   Gamma^mu_{ab}
    Delta[mu, a, b, c]

The deformation is the polynomial

    H^m(x, t~) = h^m_mu (t~^mu + 1/2 Gamma^mu_ab t~^a t~^b + 1/6 Delta^mu_abc t~^a t~^b t~^c)

and K(x, .) is its inverse, truncated at a chosen order in t.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from . import taylor as tj
from .errors import (
    DeformationDegenerateError,
    DomainEscapeError,
    NearDegenerateError,
    TrustRadiusError,
)
from .fields import COORD, DOWN, FRAME, UP, CoefficientField, Slot, as_coords
from .taylor import TaylorArray

DEFAULT_TRUST_RADIUS = 0.1
COND_LIMIT = 1e12
REVERSION_ITERATIONS = 10
REVERSION_TOL = 1e-14


@dataclass(frozen=True)
class GroupParameter:
    """Constant group parameter t^m (frame components)."""

    t: np.ndarray

    def __post_init__(self):
        t = np.array(self.t, dtype=float).reshape(-1)
        if not np.all(np.isfinite(t)):
            raise ValueError(f"non-finite group parameter {t}")
        t.setflags(write=False)
        object.__setattr__(self, "t", t)


def as_param(t):
    if isinstance(t, GroupParameter):
        return t.t
    if isinstance(t, TaylorArray):
        return t
    return GroupParameter(t).t


class LocalJet(NamedTuple):
    """Jet coefficients at one chart point, as x-TaylorArrays."""

    x: np.ndarray
    h: TaylorArray
    hinv: TaylorArray
    Gamma: TaylorArray
    Delta: TaylorArray


@dataclass(frozen=True)
class DeformationJet:
    dim: int
    h: CoefficientField
    Gamma: CoefficientField
    Delta: CoefficientField | None = None
    domain: np.ndarray | None = None
    trust_radius: float = DEFAULT_TRUST_RADIUS
    signature: tuple[int, int] | None = None
    name: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.domain is not None:
            d = np.array(self.domain, dtype=float).reshape(self.dim, 2)
            object.__setattr__(self, "domain", d)
        if self.Delta is None:
            n = self.dim
            object.__setattr__(
                self,
                "Delta",
                CoefficientField.constant(np.zeros((n, n, n, n)), n, _DELTA_SLOTS, name="Delta"),
            )

    def with_fields(self, **changes) -> "DeformationJet":
        return replace(self, **changes)

    def contains(self, x) -> bool:
        if self.domain is None:
            return True
        x = np.asarray(x, float)
        return bool(np.all(x > self.domain[:, 0]) and np.all(x < self.domain[:, 1]))

    def check_inside(self, x):
        if not self.contains(tj.value(x)):
            raise DomainEscapeError(f"point {tj.value(x)} left the chart domain {self.domain.tolist()}")

    def local(self, point, h_order: int = 2, gamma_order: int = 1, delta_order: int = 0) -> LocalJet:
        x = as_coords(point)
        if x.size != self.dim:
            raise ValueError(f"point has {x.size} coordinates, jet is {self.dim}-dimensional")
        h = self.h.jet(x, h_order)
        _check_invertible(h.val, x)
        return LocalJet(
            x,
            h,
            tj.inv(h),
            self.Gamma.jet(x, gamma_order),
            self.Delta.jet(x, delta_order),
        )


_H_SLOTS = (Slot(FRAME, UP), Slot(COORD, DOWN))
_GAMMA_SLOTS = (Slot(COORD, UP), Slot(COORD, DOWN), Slot(COORD, DOWN))
_DELTA_SLOTS = _GAMMA_SLOTS + (Slot(COORD, DOWN),)


def _check_invertible(h, x):
    if not np.all(np.isfinite(h)):
        raise DeformationDegenerateError(f"non-finite vielbein at {x}")
    det = np.linalg.det(h)
    if det == 0 or np.linalg.cond(h) > COND_LIMIT:
        raise DeformationDegenerateError(f"det h = {det:g} at {x}: vielbein degenerate")


def make_jet(dim, h_fn, gamma_fn=None, delta_fn=None, **kw) -> DeformationJet:
    """Jet from closures ``fn(x)`` written with numpy ufuncs (see CoefficientField.from_function).

    Gamma and Delta are symmetrized over their lower indices.
    """
    n = dim
    h = CoefficientField.from_function(h_fn, n, _H_SLOTS, name="h")
    if gamma_fn is None:
        gamma = CoefficientField.constant(np.zeros((n, n, n)), n, _GAMMA_SLOTS, name="Gamma")
    else:
        gamma = CoefficientField.from_function(
            lambda x: _sym_lower(tj.stack(gamma_fn(x))), n, _GAMMA_SLOTS, name="Gamma"
        )
    delta = None
    if delta_fn is not None:
        delta = CoefficientField.from_function(
            lambda x: _sym_lower(tj.stack(delta_fn(x))), n, _DELTA_SLOTS, name="Delta"
        )
    return DeformationJet(n, h, gamma, delta, **kw)


def identity_jet(dim: int, **kw) -> DeformationJet:
    n = dim
    return DeformationJet(
        n,
        CoefficientField.constant(np.eye(n), n, _H_SLOTS, name="h"),
        CoefficientField.constant(np.zeros((n, n, n)), n, _GAMMA_SLOTS, name="Gamma"),
        **kw,
    )


def _sym_lower(a):
    """Average over permutations of all lower indices (axes 1..)."""
    import itertools

    if not isinstance(a, TaylorArray):
        a = np.asarray(a, float)
    k = a.ndim - 1
    perms = list(itertools.permutations(range(1, k + 1)))
    total = None
    for p in perms:
        term = a.transpose((0,) + p)
        total = term if total is None else total + term
    return total * (1.0 / len(perms))


# ------------------------------------------------------------- polynomials


def poly(Gamma, Delta, tt):
    """t~ + 1/2 Gamma t~ t~ + 1/6 Delta t~ t~ t~ (coordinate vector)."""
    return (
        tt
        + 0.5 * tj.einsum("mab,a,b->m", Gamma, tt, tt)
        + (1.0 / 6.0) * tj.einsum("mabc,a,b,c->m", Delta, tt, tt, tt)
    )


def dpoly(Gamma, Delta, tt):
    """d/dt~^nu of :func:`poly`, as matrix [mu, nu]."""
    n = tj.value(tt).shape[0]
    return (
        np.eye(n)
        + tj.einsum("mab,b->ma", Gamma, tt)
        + 0.5 * tj.einsum("mabc,b,c->ma", Delta, tt, tt)
    )


def reversion(hinv, Gamma, Delta, t, order=3):
    """K(x, t): inverse of the cubic H truncated at ``order`` in t.

    order 2 is ``h^mu_k t^k - 1/2 Gamma^mu_kl t^k t^l`` (Gamma with frame
    indices); order 3 adds ``1/2 Gamma(u, Gamma u u) - 1/6 Delta u u u``.
    ``order="exact"`` solves P(K) = h^-1 t by fixed-point iteration.
    """
    u = tj.einsum("ak,k->a", hinv, t)
    if order == "exact":
        k = u
        for _ in range(REVERSION_ITERATIONS):
            new = u - (poly(Gamma, Delta, k) - k)
            step = np.max(np.abs(tj.value(new) - tj.value(k)))
            k = new
            if step <= REVERSION_TOL:
                break
        return k
    gu = tj.einsum("mab,a,b->m", Gamma, u, u)
    if order == 2:
        return u - 0.5 * gu
    if order == 3:
        return (
            u
            - 0.5 * gu
            + 0.5 * tj.einsum("mab,a,b->m", Gamma, u, gu)
            - (1.0 / 6.0) * tj.einsum("mabc,a,b,c->m", Delta, u, u, u)
        )
    raise ValueError(f"unsupported reversion order {order!r}")


def _values(loc: LocalJet):
    return loc.h.val, loc.hinv.val, loc.Gamma.val, loc.Delta.val


def _check_trust(jet: DeformationJet, tt):
    r = np.max(np.abs(tj.value(tt))) if np.size(tj.value(tt)) else 0.0
    if r > jet.trust_radius:
        raise TrustRadiusError(f"|t~| = {r:g} exceeds trust radius {jet.trust_radius:g}")


# -------------------------------------------------------------- operations


def eval_H(jet: DeformationJet, point, t_tilde) -> np.ndarray:
    """H^m(x, t~) from the cubic jet at ``point``."""
    tt = np.asarray(t_tilde, float)
    _check_trust(jet, tt)
    loc = jet.local(point, h_order=0, gamma_order=0, delta_order=0)
    h, _, G, D = _values(loc)
    return h @ poly(G, D, tt)


def eval_K(jet: DeformationJet, point, t, order=3) -> np.ndarray:
    """Coordinate displacement K^mu(x, t) with H(x, K(x, t)) = t + O(|t|^(order+1))."""
    t = as_param(t)
    loc = jet.local(point, h_order=0, gamma_order=0, delta_order=0)
    _, hinv, G, D = _values(loc)
    k = reversion(hinv, G, D, t, order)
    _check_trust(jet, k)
    return k


def H_matrix(loc: LocalJet, tt):
    """dH^m/dt~^mu at t~ (accepts TaylorArray t~)."""
    return tj.einsum("ma,ab->mb", loc.h.val, dpoly(loc.Gamma.val, loc.Delta.val, tt))


def eval_H_matrix(jet: DeformationJet, point, t, order=3):
    """(H(x,t)^m_mu, H(x,t)^mu_m): Jacobian of H at t~ = K(x, t) and its inverse."""
    t = as_param(t)
    loc = jet.local(point, h_order=0, gamma_order=0, delta_order=0)
    _, hinv, G, D = _values(loc)
    k = reversion(hinv, G, D, t, order)
    _check_trust(jet, k)
    hm = H_matrix(loc, k)
    return hm, invert_checked(hm)


def invert_checked(m: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(m)):
        raise DeformationDegenerateError("non-finite H matrix")
    cond = np.linalg.cond(m)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise NearDegenerateError(f"H matrix condition number {cond:g} exceeds {COND_LIMIT:g}")
    return np.linalg.solve(m, np.eye(m.shape[0]))
