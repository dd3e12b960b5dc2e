import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deformgeo import taylor as tj
from deformgeo.errors import DeformationDegenerateError, DomainEscapeError, NearDegenerateError, TrustRadiusError
from deformgeo.fields import CoefficientField
from deformgeo.jets import (
    DeformationJet,
    GroupParameter,
    eval_H,
    eval_H_matrix,
    eval_K,
    identity_jet,
    invert_checked,
    make_jet,
    poly,
)
from deformgeo.transport import fit_slope

from conftest import random_jet

X0 = np.array([0.3, -0.4])


def test_H_vanishes_at_zero_displacement(jet2, sphere_jet):
    assert not eval_H(jet2, X0, np.zeros(2)).any()
    assert not eval_H(sphere_jet, [np.pi / 4, 0.0], np.zeros(2)).any()


def test_identity_jet_is_undeformed():
    jet = identity_jet(3)
    t = np.array([0.01, -0.02, 0.03])
    np.testing.assert_array_equal(eval_H(jet, np.zeros(3), t), t)
    np.testing.assert_array_equal(eval_K(jet, np.zeros(3), t), t)
    hm, hinv = eval_H_matrix(jet, np.zeros(3), t)
    np.testing.assert_array_equal(hm, np.eye(3))


def test_H_matches_term_by_term_sum_on_sphere(sphere_jet):
    x = np.array([np.pi / 4, 0.2])
    tt = np.array([1e-3, 0.0])
    loc = sphere_jet.local(x, 0, 0, 0)
    h, G, D = loc.h.val, loc.Gamma.val, loc.Delta.val
    manual = h @ (tt + 0.5 * np.einsum("mab,a,b->m", G, tt, tt) + np.einsum("mabc,a,b,c->m", D, tt, tt, tt) / 6)
    np.testing.assert_allclose(eval_H(sphere_jet, x, tt), manual, rtol=0, atol=1e-18)


def test_H_evaluation_is_bit_reproducible(jet2):
    tt = np.array([0.01, 0.02])
    assert eval_H(jet2, X0, tt).tobytes() == eval_H(jet2, X0, tt).tobytes()


def test_second_order_K_matches_printed_truncation(jet2):
    t = np.array([0.004, -0.003])
    loc = jet2.local(X0, 0, 0, 0)
    u = loc.hinv.val @ t
    expected = u - 0.5 * np.einsum("mab,a,b->m", loc.Gamma.val, u, u)
    np.testing.assert_allclose(eval_K(jet2, X0, t, order=2), expected, atol=1e-17)


def test_K_at_zero_is_zero(jet2):
    assert not eval_K(jet2, X0, np.zeros(2)).any()


@pytest.mark.parametrize("order", [2, 3])
def test_reversion_residual_scales_with_order(jet2, order):
    d = np.array([0.6, -0.8])
    scales = [1e-2 / 2**i for i in range(5)]
    res = [np.max(np.abs(eval_H(jet2, X0, eval_K(jet2, X0, s * d, order)) - s * d)) for s in scales]
    assert fit_slope(scales, res) >= order + 0.8


def test_exact_reversion_inverts_H(jet2):
    t = np.array([0.03, 0.02])
    k = eval_K(jet2, X0, t, order="exact")
    np.testing.assert_allclose(eval_H(jet2, X0, k), t, atol=1e-15)


def test_H_matrix_at_zero_is_vielbein_and_inverse_is_inverse(jet2):
    hm, hinv = eval_H_matrix(jet2, X0, np.zeros(2))
    np.testing.assert_allclose(hm, jet2.h.value(X0), atol=1e-15)
    hm, hinv = eval_H_matrix(jet2, X0, np.array([0.02, -0.01]))
    np.testing.assert_allclose(hm @ hinv, np.eye(2), atol=1e-12)


def test_unsupported_reversion_order():
    with pytest.raises(ValueError):
        eval_K(identity_jet(2), np.zeros(2), np.zeros(2), order=5)


def test_trust_radius_enforced(jet2):
    with pytest.raises(TrustRadiusError):
        eval_H(jet2, X0, np.array([0.5, 0.0]))


def test_singular_vielbein_rejected():
    jet = make_jet(2, lambda x: [[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(DeformationDegenerateError):
        eval_H(jet, np.zeros(2), np.array([0.01, 0.0]))


def test_near_singular_H_matrix_rejected():
    # Gamma^0_00 = -50 makes dH^0/dt~^0 = 1 - 50 K^0 vanish at K^0 = 0.02;
    # the order-2 reversion K^0 = t + 25 t^2 reaches it at t = (sqrt(3) - 1) / 50
    def gamma(x):
        z = 0 * x[0]
        return [[[-50.0 + z, z], [z, z]], [[z, z], [z, z]]]

    jet = make_jet(2, lambda x: [[1.0 + 0 * x[0], 0.0], [0.0, 1.0]], gamma, trust_radius=1.0)
    t = np.array([(np.sqrt(3.0) - 1.0) / 50.0, 0.0])
    with pytest.raises(NearDegenerateError):
        eval_H_matrix(jet, np.zeros(2), t, order=2)
    with pytest.raises(NearDegenerateError):
        invert_checked(np.array([[1.0, 1.0], [1.0, 1.0 + 1e-14]]))


def test_domain_escape_detected():
    jet = identity_jet(2, domain=[[0, 1], [0, 1]])
    with pytest.raises(DomainEscapeError):
        jet.check_inside(np.array([1.5, 0.5]))


def test_group_parameter_rejects_non_finite():
    with pytest.raises(ValueError):
        GroupParameter([np.inf, 0.0])


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_make_jet_symmetrizes_lower_indices(seed):
    jet = random_jet(3, seed=seed)
    x = np.array([0.1, 0.2, 0.3])
    G = jet.Gamma.value(x)
    D = jet.Delta.value(x)
    np.testing.assert_allclose(G, G.transpose(0, 2, 1), atol=1e-15)
    for perm in [(0, 2, 1, 3), (0, 1, 3, 2), (0, 3, 2, 1)]:
        np.testing.assert_allclose(D, D.transpose(perm), atol=1e-15)


def test_delta_defaults_to_zero():
    jet = DeformationJet(2, CoefficientField.constant(np.eye(2), 2), CoefficientField.constant(np.zeros((2, 2, 2)), 2))
    assert not jet.Delta.value(np.zeros(2)).any()


def test_poly_accepts_jets():
    G = np.zeros((1, 1, 1))
    D = np.ones((1, 1, 1, 1))
    out = poly(G, D, tj.seed(np.array([0.1]), 2))
    assert out.d1[0, 0] == pytest.approx(1 + 0.5 * 0.01)
