import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deformgeo import geometry as geo
from deformgeo import group
from deformgeo.errors import DomainEscapeError
from deformgeo.fields import CoefficientField
from deformgeo.jets import identity_jet
from deformgeo.transport import fit_slope

from conftest import random_jet

X0 = np.array([0.3, -0.4])
X3 = np.array([0.2, -0.1, 0.4])
SPHERE_X = np.array([np.pi / 4, 0.3])
SCALES = [1e-2 / 2**i for i in range(5)]


def test_multiply_by_unit_is_exact_with_exact_reversion(jet2):
    t = np.array([0.02, -0.01])
    z = np.zeros(2)
    np.testing.assert_allclose(group.multiply(jet2, X0, t, z, order="exact"), t, atol=1e-15)
    np.testing.assert_allclose(group.multiply(jet2, X0, z, t, order="exact"), t, atol=1e-15)


def test_multiply_by_unit_with_cubic_reversion_is_quartic(jet2):
    d = np.array([0.6, 0.8])
    res = [np.max(np.abs(group.multiply(jet2, X0, s * d, np.zeros(2)) - s * d)) for s in SCALES]
    assert fit_slope(SCALES, res) >= 3.8


def test_identity_jet_gives_translations():
    jet = identity_jet(2)
    t, tp = np.array([0.01, 0.02]), np.array([-0.03, 0.005])
    np.testing.assert_allclose(group.multiply(jet, X0, t, tp), t + tp, atol=1e-17)
    np.testing.assert_allclose(group.act(jet, X0, t), X0 + t, atol=1e-17)


def test_act_with_zero_parameter_is_identity(jet2):
    np.testing.assert_array_equal(group.act(jet2, X0, np.zeros(2)), X0)


def test_act_leaving_domain_raises():
    jet = identity_jet(2, domain=[[0, 1], [0, 1]])
    with pytest.raises(DomainEscapeError):
        group.act(jet, np.array([0.95, 0.5]), np.array([0.08, 0.0]))


@pytest.mark.parametrize("which", ["random", "sphere"])
def test_associativity_residual_is_quartic(which, jet2, sphere_jet):
    jet, x = (jet2, X0) if which == "random" else (sphere_jet, SPHERE_X)
    rng = np.random.default_rng(3)
    d = rng.uniform(-1, 1, (3, 2))
    res = []
    for s in SCALES:
        t, tp, tpp = s * d
        xp = group.act(jet, x, t)
        lhs = group.multiply(jet, x, group.multiply(jet, x, t, tp), tpp)
        rhs = group.multiply(jet, x, t, group.multiply(jet, xp, tp, tpp))
        res.append(np.max(np.abs(lhs - rhs)))
    assert fit_slope(SCALES, res) >= 3.8


def test_action_composition_is_quartic(jet2):
    rng = np.random.default_rng(4)
    d = rng.uniform(-1, 1, (2, 2))
    res = []
    for s in SCALES:
        t, tp = s * d
        two_steps = group.act(jet2, group.act(jet2, X0, t), tp)
        one_step = group.act(jet2, X0, group.multiply(jet2, X0, t, tp))
        res.append(np.max(np.abs(two_steps - one_step)))
    assert fit_slope(SCALES, res) >= 3.8


def test_shift_matrices_at_unit_and_for_identity_jet(jet2):
    sm = group.shift_matrices(jet2, X0, np.zeros(2))
    np.testing.assert_allclose(sm.mu, np.eye(2), atol=1e-15)
    np.testing.assert_allclose(sm.lam, np.eye(2), atol=1e-15)
    sm = group.shift_matrices(identity_jet(2), X0, np.array([0.05, -0.02]))
    np.testing.assert_array_equal(sm.mu, np.eye(2))
    np.testing.assert_array_equal(sm.lam, np.eye(2))


def test_polynomial_fit_of_right_shift_matrix(jet2):
    """Least-squares fit of lambda(x, t) over sampled t recovers gamma and sigma."""
    n = 2
    rng = np.random.default_rng(11)
    ts = rng.uniform(-0.02, 0.02, (60, n))
    monos = [()] + [(k,) for k in range(n)] + list(itertools.combinations_with_replacement(range(n), 2)) + list(
        itertools.combinations_with_replacement(range(n), 3)
    )
    design = np.array([[np.prod(t[list(m)]) if m else 1.0 for m in monos] for t in ts])
    values = np.array([group.shift_matrices(jet2, X0, t).lam.ravel() for t in ts])
    coef, *_ = np.linalg.lstsq(design, values, rcond=None)
    loc = jet2.local(X0)
    g = geo.gamma_jet(loc).val
    sig = geo.sigma_array(loc)
    lin = {m[0]: coef[i].reshape(n, n) for i, m in enumerate(monos) if len(m) == 1}
    for k in range(n):
        np.testing.assert_allclose(lin[k], g[:, k, :], atol=1e-5)
    for i, m in enumerate(monos):
        if len(m) == 2:
            k, l = m
            # coefficient of t^k t^l collects both orderings, halved on the diagonal
            want = 0.5 * (sig[:, l, k, :] + sig[:, k, l, :])
            if k == l:
                want = 0.5 * want
            np.testing.assert_allclose(coef[i].reshape(n, n), want, atol=1e-3)


def test_gamma_from_group_matches_jet_formula(jet2, jet3):
    for jet, x in ((jet2, X0), (jet3, X3)):
        np.testing.assert_allclose(group.gamma_from_group(jet, x), geo.gamma_jet(jet.local(x)).val, atol=1e-12)


def test_holonomic_frame_has_no_structure_functions():
    jet = random_jet(2, seed=2, scale=0.0)  # h = identity, Gamma = Delta = 0
    sf = group.structure_functions(jet, X0)
    assert np.max(np.abs(sf.F.data)) == 0.0


def test_sphere_frame_structure_function(sphere_jet):
    F = group.structure_functions(sphere_jet, SPHERE_X).F.data
    assert F[1, 0, 1] == pytest.approx(-1.0, abs=1e-12)  # -cot(pi/4)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_structure_function_routes_agree_and_are_antisymmetric(seed):
    jet = random_jet(2, seed=seed)
    sf = group.structure_functions(jet, X0)
    np.testing.assert_array_equal(sf.F.data, -sf.F.data.transpose(0, 2, 1))
    np.testing.assert_allclose(sf.F_connection.data, sf.F.data, atol=1e-9)
    np.testing.assert_allclose(sf.F_group.data, sf.F.data, atol=1e-9)


def test_generators_commute_in_flat_frame():
    jet = identity_jet(2)
    f = CoefficientField.from_function(lambda x: np.sin(x[0]) * np.exp(x[1]), 2)
    assert abs(group.Generators(jet, X0).commutator(0, 1, f)) < 1e-12


def test_sphere_generator_commutator_on_azimuth(sphere_jet):
    f = CoefficientField.from_function(lambda x: x[1] + 0.0 * x[0], 2)
    gens = group.Generators(sphere_jet, SPHERE_X)
    x2f = 1.0 / np.sin(SPHERE_X[0])
    assert gens.commutator(0, 1, f) == pytest.approx(-x2f / np.tan(SPHERE_X[0]), rel=1e-10)


def test_generator_commutators_close_on_structure_functions(jet2):
    f = group.default_test_scalar(2, seed=3)
    assert group.Generators(jet2, X0).structure_residual(f) <= 1e-6


def test_identity_jet_satisfies_every_identity():
    res = group.verify_identities(identity_jet(2), X0, np.array([0.01, 0.02]), np.array([-0.01, 0.005]))
    assert set(res) == set(group.IDENTITY_IDS)
    assert max(res.values()) <= 1e-12


@pytest.mark.parametrize("name", [k for k, v in group.SCALING_ORDER.items() if v is not None])
def test_identity_residuals_scale_with_documented_order(jet2, name):
    rng = np.random.default_rng(8)
    d = rng.uniform(-1, 1, (3, 2))
    res = [group.verify_identities(jet2, X0, *(s * d), ids=(name,))[name] for s in SCALES]
    assert fit_slope(SCALES, res) >= group.SCALING_ORDER[name] - 0.2


@pytest.mark.parametrize("name", [k for k, v in group.SCALING_ORDER.items() if v is None])
def test_exact_identities_hold_to_rounding(jet2, name):
    res = group.verify_identities(jet2, X0, np.array([0.01, 0.02]), np.array([0.02, -0.01]), ids=(name,))
    assert res[name] <= 1e-7


def test_group_maurer_cartan_on_sphere(sphere_jet):
    res = group.verify_identities(sphere_jet, SPHERE_X, np.array([0.01, 0.0]), np.array([0.0, 0.01]), ids=("eq18",))
    assert res["eq18"] <= 1e-9


def test_jacobi_cycle_vanishes_nontrivially_in_three_dimensions(jet3):
    loc = jet3.local(X3)
    Fj = geo.structure_jet(loc)
    term = np.einsum("vk,nlmv->nklm", loc.hinv.val, Fj.d1) + np.einsum("nkp,plm->nklm", Fj.val, Fj.val)
    assert np.max(np.abs(term)) > 1e-2  # individual terms are O(1)
    assert np.max(np.abs(geo.jacobi_array(loc))) <= 1e-8
