import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deformgeo import catalog as cat
from deformgeo import geometry as geo
from deformgeo import riemann
from deformgeo.errors import GaugeError
from deformgeo.fields import CoefficientField
from deformgeo.jets import identity_jet

from conftest import random_jet

X0 = np.array([0.3, -0.4])
X3 = np.array([0.2, -0.1, 0.4])


def _loc(jet, x):
    return jet.local(x, h_order=2, gamma_order=1, delta_order=0)


def _diff(f, x, h):
    cols = []
    for a in range(x.size):
        e = np.zeros_like(x)
        e[a] = h
        cols.append((f(x + e) - f(x - e)) / (2 * h))
    return np.stack(cols, axis=-1)


def _fd_riemann(g_fn, x):
    """R^m_{l k n} from central differences of a hand-written Christoffel formula."""

    def chris(y):
        dg = _diff(g_fn, y, 1e-5)  # [a, b, c] = d_c g_ab
        # first[s, m, n] = 1/2 (d_m g_sn + d_n g_sm - d_s g_mn)
        first = 0.5 * (np.einsum("snm->smn", dg) + np.einsum("smn->smn", dg) - np.einsum("mns->smn", dg))
        return np.einsum("st,tmn->smn", np.linalg.inv(g_fn(y)), first)

    G = chris(x)
    dG = _diff(chris, x, 1e-3)
    return (
        np.einsum("mnlk->mlkn", dG)
        - np.einsum("mklv->mlkv", dG)
        + np.einsum("mks,snl->mlkn", G, G)
        - np.einsum("mns,skl->mlkn", G, G)
    )


@pytest.mark.parametrize("name", ["euclidean2", "euclidean3", "minkowski2"])
def test_flat_cartesian_metrics_have_no_geometry(name):
    entry = cat.get(name)
    jet = riemann.solve_deformation(entry.metric())
    rng = np.random.default_rng(0)
    for x in entry.sample_points(5, rng):
        loc = _loc(jet, x)
        for arr in (
            geo.structure_jet(loc).val,
            geo.gamma_jet(loc).val,
            loc.Gamma.val,
            loc.Delta.val,
            geo.curvature_left_array(loc),
            geo.curvature_right_array(loc),
        ):
            assert np.max(np.abs(arr)) <= 1e-12


def test_polar_chart_has_connection_but_no_curvature():
    jet = riemann.solve_deformation(cat.get("polar2").metric())
    x = np.array([1.7, 0.4])
    loc = _loc(jet, x)
    assert loc.Gamma.val[0, 1, 1] == pytest.approx(-1.7, rel=1e-12)
    assert loc.Gamma.val[1, 0, 1] == pytest.approx(1 / 1.7, rel=1e-12)
    assert np.max(np.abs(geo.curvature_coord_array(loc))) <= 1e-12


@pytest.mark.parametrize("theta", [0.3, 0.9, np.pi / 2, 2.4])
def test_sphere_curvature_matches_closed_form(sphere_jet, theta):
    x = np.array([theta, 0.5])
    Rc = geo.curvature_coord(sphere_jet, x).data
    assert Rc[0, 1, 0, 1] == pytest.approx(np.sin(theta) ** 2, rel=1e-10)
    assert Rc[1, 0, 1, 0] == pytest.approx(1.0, rel=1e-10)
    assert geo.ricci_scalar(sphere_jet, x) == pytest.approx(2.0, abs=1e-10)
    assert geo.ricci_scalar(sphere_jet, x, route="frame") == pytest.approx(2.0, abs=1e-10)


def test_hyperbolic_and_paraboloid_ricci_scalars(hyperbolic):
    jet = riemann.solve_deformation(hyperbolic)
    assert geo.ricci_scalar(jet, [0.3, 1.2]) == pytest.approx(-2.0, abs=1e-10)
    para = riemann.solve_deformation(cat.get("paraboloid2").metric())
    x = np.array([0.4, -0.7])
    assert geo.ricci_scalar(para, x) == pytest.approx(2.0 / (1 + x @ x) ** 2, rel=1e-10)


def test_ricci_scalar_needs_signature(jet2):
    with pytest.raises(ValueError):
        geo.ricci_scalar(jet2, X0)


def test_curvature_matches_finite_difference_oracle():
    metric = cat.get("paraboloid2").metric()
    x = np.array([0.5, 0.2])
    ref = _fd_riemann(metric.value, x)
    got = geo.curvature_coord(riemann.solve_deformation(metric), x).data
    np.testing.assert_allclose(got, ref, atol=1e-6)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([2, 3]))
def test_frame_and_coordinate_curvature_agree(seed, n):
    jet = random_jet(n, seed=seed)
    x = X0 if n == 2 else X3
    loc = _loc(jet, x)
    np.testing.assert_allclose(
        geo.curvature_left_array(loc), geo.coord_to_frame(geo.curvature_coord_array(loc), loc), atol=1e-9
    )


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_curvature_symmetries_hold_for_symmetric_connections(seed):
    loc = _loc(random_jet(3, seed=seed), X3)
    Rc = geo.curvature_coord_array(loc)
    np.testing.assert_allclose(Rc, -Rc.transpose(0, 1, 3, 2), atol=1e-13)
    assert np.max(np.abs(geo.bianchi_array(Rc))) <= 1e-9


@pytest.mark.parametrize("n", [2, 3])
def test_left_plus_right_curvature_sum_rule(n):
    loc = _loc(random_jet(n, seed=7), X0 if n == 2 else X3)
    lhs = geo.curvature_left_array(loc) + geo.curvature_right_array(loc)
    assert np.max(np.abs(lhs - geo.sum_rule_rhs(loc))) <= 1e-9
    assert np.max(np.abs(geo.curvature_right_array(loc))) > 1e-2


def test_curvatures_are_antisymmetrized_expansion_coefficients(jet3):
    loc = _loc(jet3, X3)
    np.testing.assert_allclose(geo.curvature_left_array(loc), geo.antisym_last(geo.rho_array(loc)), atol=1e-9)
    np.testing.assert_allclose(geo.curvature_right_array(loc), geo.antisym_last(geo.sigma_array(loc)), atol=1e-9)


def test_structure_functions_are_antisymmetrized_connection(jet3):
    loc = _loc(jet3, X3)
    g = geo.gamma_jet(loc).val
    np.testing.assert_allclose(geo.structure_jet(loc).val, g - g.transpose(0, 2, 1), atol=1e-12)


def test_riemannian_rho_is_symmetrized_curvature(sphere_jet):
    x = np.array([0.8, -0.3])
    loc = _loc(sphere_jet, x)
    rho_c = geo.frame_to_coord(geo.rho_array(loc), loc)
    Rc = geo.curvature_coord_array(loc)
    assert np.max(np.abs(rho_c - (Rc + Rc.transpose(0, 2, 1, 3)) / 3)) <= 1e-9


def test_public_wrappers_carry_index_tags(jet2):
    conn = geo.connection(jet2, X0)
    assert conn.gamma_frame.slots == geo.gamma_frame(jet2, X0).slots
    curv = geo.curvatures(jet2, X0)
    np.testing.assert_array_equal(curv.R_frame.data, geo.curvature_frame_left(jet2, X0).data)
    np.testing.assert_array_equal(curv.S_frame.data, geo.curvature_frame_right(jet2, X0).data)
    rho, sigma = geo.rho_sigma_coefficients(jet2, X0)
    assert rho.data.shape == sigma.data.shape == (2, 2, 2, 2)


@pytest.mark.parametrize("n", [2, 3])
def test_gl_gauge_leaves_coordinate_geometry_unchanged(n):
    jet = random_jet(n, seed=4)
    x = X0 if n == 2 else X3
    L = geo.random_gl_field(n, np.random.default_rng(9))
    rotated = geo.gauge_transform_gl(jet, L)
    loc, loc2 = _loc(jet, x), _loc(rotated, x)
    assert np.max(np.abs(loc2.h.val - loc.h.val)) > 1e-2
    R_back = geo.frame_to_coord(geo.curvature_left_array(loc2), loc2)
    np.testing.assert_allclose(R_back, geo.curvature_coord_array(loc), atol=1e-8)
    # frame connection changes like a connection: gamma' = L gamma L^-1 + L X(L^-1)
    Lj = L.jet(x, 1)
    Linv = np.linalg.inv(Lj.val)
    dLinv = -np.einsum("ab,bcs,cd->ads", Linv, Lj.d1, Linv)
    hinv2 = loc2.hinv.val
    expected = np.einsum("ma,akb,kn,bl->mnl", Lj.val, geo.gamma_jet(loc).val, Linv, Linv) + np.einsum(
        "ma,abs,sn->mnb", Lj.val, dLinv, hinv2
    )
    np.testing.assert_allclose(geo.gamma_jet(loc2).val, expected, atol=1e-10)


def test_singular_gl_gauge_rejected():
    L = CoefficientField.constant(np.zeros((2, 2)), 2)
    rotated = geo.gauge_transform_gl(identity_jet(2), L)
    with pytest.raises(GaugeError):
        rotated.h.value(np.zeros(2))
