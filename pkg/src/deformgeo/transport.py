"""Parallel transport by the group law, covariant derivatives and holonomy.

Vector fields are closures ``tau(x)`` returning frame (or coordinate)
components.  Closures written with numpy ufuncs get exact derivatives when
called on a seeded jet; anything else falls back to central differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from . import group
from . import taylor as tj
from .errors import DifferentiationError
from .fields import ChartPoint, CoefficientField, as_coords, central_diff
from .jets import DeformationJet, _check_trust, as_param, dpoly, invert_checked
from .taylor import TaylorArray


@dataclass(frozen=True)
class TransportResult:
    transported: np.ndarray
    source_point: ChartPoint
    displacement: np.ndarray


@dataclass(frozen=True)
class HolonomyResult:
    difference: np.ndarray
    prediction: np.ndarray

    @property
    def gap(self) -> float:
        return float(np.max(np.abs(self.difference - self.prediction)))

    @property
    def relative_gap(self) -> float:
        scale = float(np.max(np.abs(self.prediction)))
        return self.gap / scale if scale > 0 else float("inf")


def _eval(tau, x) -> np.ndarray:
    if isinstance(tau, CoefficientField):
        return tau.value(x)
    out = np.asarray(tj.value(tj.stack(tau(np.asarray(x, float)))), float)
    if not np.all(np.isfinite(out)):
        raise DifferentiationError(f"vector field is not finite at {x}")
    return out


def _gradient(tau, x) -> tuple[np.ndarray, np.ndarray]:
    """(value, d_sigma tau[..., sigma]) of a vector field at x."""
    x = np.asarray(x, float)
    if isinstance(tau, CoefficientField):
        j = tau.jet(x, 1)
        return j.val, j.d1
    try:
        j = tj.stack(tau(tj.seed(x, 1)))
    except (TypeError, ValueError):
        j = None
    if isinstance(j, TaylorArray):
        return j.val, j.d1
    val = _eval(tau, x)
    if j is not None:
        # closure ignores its argument: constant field
        return val, np.zeros(val.shape + (x.size,))
    return val, central_diff(lambda y: _eval(tau, y), x)


def lambda_disp(jet: DeformationJet, point, t_tilde) -> np.ndarray:
    """Right shift matrix as a function of the coordinate displacement t~.

    lambda(x, t~)^m_n = dH^m/dt~^mu (x, t~) h^mu_n(x + t~).
    """
    x = as_coords(point)
    tt = np.asarray(t_tilde, float)
    _check_trust(jet, tt)
    jet.check_inside(x + tt)
    loc = jet.local(x, h_order=0, gamma_order=0, delta_order=0)
    Hm = loc.h.val @ dpoly(loc.Gamma.val, loc.Delta.val, tt)
    invert_checked(Hm)
    hinv_p = jet.local(x + tt, h_order=0, gamma_order=0, delta_order=0).hinv.val
    return Hm @ hinv_p


def parallel_transport(jet: DeformationJet, point, t, tau, order=group.DEFAULT_ORDER) -> TransportResult:
    """tau_par(x) = lambda(x, t) tau(x'), with x' = x + K(x, t) the displaced point."""
    x = as_coords(point)
    t = np.asarray(as_param(t), float)
    mu, lam, K, _ = group._shift(jet, x, t, order)
    xp = x + np.asarray(K, float)
    return TransportResult(np.asarray(lam) @ _eval(tau, xp), ChartPoint(xp), np.asarray(K, float))


def transport_disp(jet: DeformationJet, point, t_tilde, tau) -> TransportResult:
    """Transport of tau from x + t~ to x, parametrized by the coordinate displacement."""
    x = as_coords(point)
    tt = np.asarray(t_tilde, float)
    lam = lambda_disp(jet, x, tt)
    return TransportResult(lam @ _eval(tau, x + tt), ChartPoint(x + tt), tt)


def covariant_derivative_frame(jet: DeformationJet, point, direction: int, tau) -> np.ndarray:
    """nabla_n tau^m = h^sigma_n d_sigma tau^m + gamma^m_nk tau^k."""
    x = as_coords(point)
    loc = jet.local(x, h_order=1, gamma_order=0, delta_order=0)
    gamma = geo.gamma_jet(loc).val
    val, grad = _gradient(tau, x)
    return grad @ loc.hinv.val[:, direction] + gamma[:, direction, :] @ val


def covariant_derivative_coord(jet: DeformationJet, point, direction: int, tau) -> np.ndarray:
    """nabla_nu tau^mu = d_nu tau^mu + Gamma^mu_{sigma nu} tau^sigma."""
    x = as_coords(point)
    G = jet.Gamma.value(x)
    val, grad = _gradient(tau, x)
    return grad[:, direction] + G[:, :, direction] @ val


def covariant_derivative_covector_pair(jet: DeformationJet, point, g_field) -> np.ndarray:
    """nabla_s g_{mu nu} for a symmetric (0,2) field; [mu, nu, s]."""
    x = as_coords(point)
    G = jet.Gamma.value(x)
    val, grad = _gradient(g_field, x)
    return grad - np.einsum("tms,tn->mns", G, val) - np.einsum("tns,mt->mns", G, val)


def mixed_curvature(jet: DeformationJet, point) -> np.ndarray:
    """R^m_{n rho sigma}: frame transported slots, coordinate 2-form slots."""
    x = as_coords(point)
    loc = jet.local(x, h_order=0, gamma_order=1, delta_order=0)
    Rc = geo.curvature_coord_array(loc)
    return np.einsum("ma,abrs,bn->mnrs", loc.h.val, Rc, loc.hinv.val)


def holonomy_parallelogram(jet: DeformationJet, point, t1, t2, tau) -> HolonomyResult:
    """Two-path transport around x, x+t1, x+t2, x+t1+t2 and its curvature prediction."""
    x = as_coords(point)
    t1 = np.asarray(t1, float)
    t2 = np.asarray(t2, float)
    x1, x2, x3 = x + t1, x + t2, x + t1 + t2
    for corner in (x1, x2, x3):
        jet.check_inside(corner)
    tau3 = _eval(tau, x3)
    path1 = lambda_disp(jet, x, t1) @ lambda_disp(jet, x1, t2)
    path2 = lambda_disp(jet, x, t2) @ lambda_disp(jet, x2, t1)
    difference = (path1 - path2) @ tau3
    prediction = np.einsum("mnrs,n,r,s->m", mixed_curvature(jet, x), _eval(tau, x), t1, t2)
    return HolonomyResult(difference, prediction)


def holonomy_slope(jet: DeformationJet, point, t1, t2, tau, eps0=1e-2, halvings=4) -> tuple[float, list[float]]:
    """Least-squares log-log slope of the holonomy gap as both edges shrink."""
    t1 = np.asarray(t1, float)
    t2 = np.asarray(t2, float)
    scales = [eps0 / 2**i for i in range(halvings + 1)]
    gaps = [holonomy_parallelogram(jet, point, s * t1, s * t2, tau).gap for s in scales]
    return fit_slope(scales, gaps), gaps


def fit_slope(scales, residuals) -> float:
    s = np.log(np.asarray(scales, float))
    r = np.log(np.maximum(np.asarray(residuals, float), 1e-300))
    return float(np.polyfit(s, r, 1)[0])
