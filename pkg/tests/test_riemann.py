import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deformgeo import catalog as cat
from deformgeo import geometry as geo
from deformgeo import riemann
from deformgeo.errors import GaugeError, MetricSignatureError
from deformgeo.jets import dpoly
from deformgeo.riemann import MetricProvider

NAMES = cat.names()


def _points(name, count=3, seed=0):
    entry = cat.get(name)
    return entry, entry.sample_points(count, np.random.default_rng(seed))


@pytest.fixture(scope="module")
def jets():
    return {n: riemann.solve_deformation(cat.get(n).metric()) for n in NAMES}


@pytest.mark.parametrize("name", NAMES)
def test_vielbein_reconstructs_metric(name):
    entry, pts = _points(name)
    metric = entry.metric()
    for x in pts:
        h = riemann.orthonormal_vielbein(metric, x).data
        np.testing.assert_allclose(riemann.reconstruct_metric(h, entry.signature), metric.value(x), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 4), st.data())
def test_vielbein_for_random_indefinite_metrics(seed, n, data):
    m = data.draw(st.integers(1, n))
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n)) + 2 * np.eye(n)
    eta = np.diag([1.0] * m + [-1.0] * (n - m))
    g = A.T @ eta @ A
    metric = MetricProvider.from_arrays(lambda x: g, n, (m, n - m))
    h = riemann.orthonormal_vielbein(metric, np.zeros(n)).data
    np.testing.assert_allclose(riemann.reconstruct_metric(h, (m, n - m)), g, atol=1e-10 * np.max(np.abs(g)))


def test_metric_validation_errors():
    with pytest.raises(MetricSignatureError):
        riemann.orthonormal_vielbein(MetricProvider.from_arrays(lambda x: np.diag([1.0, -1.0]), 2, (2, 0)), [0, 0])
    with pytest.raises(MetricSignatureError):
        MetricProvider.from_arrays(lambda x: [[1.0, 0.5], [0.0, 1.0]], 2, (2, 0)).value([0, 0])
    with pytest.raises(MetricSignatureError):
        riemann.orthonormal_vielbein(MetricProvider.from_arrays(lambda x: np.zeros((2, 2)), 2, (2, 0)), [0, 0])
    with pytest.raises(MetricSignatureError):
        MetricProvider.from_arrays(lambda x: np.eye(2), 2, (3, 0))


def test_sphere_christoffel_symbols(sphere):
    th = 0.7
    first, second = riemann.christoffel(sphere, [th, 0.1])
    G = second.data
    assert G[0, 1, 1] == pytest.approx(-np.sin(th) * np.cos(th), rel=1e-13)
    assert G[1, 0, 1] == G[1, 1, 0] == pytest.approx(np.cos(th) / np.sin(th), rel=1e-13)
    assert first.data[0, 1, 1] == pytest.approx(-np.sin(th) * np.cos(th), rel=1e-13)


@pytest.mark.parametrize("name", NAMES)
def test_delta_is_totally_symmetric(name):
    entry, pts = _points(name, 1)
    D = riemann.delta_coefficients(entry.metric(), pts[0]).data
    for perm in [(0, 2, 1, 3), (0, 1, 3, 2), (0, 3, 2, 1)]:
        np.testing.assert_allclose(D, D.transpose(perm), atol=1e-12)


@pytest.mark.parametrize("name", NAMES)
def test_compatibility_and_metricity(name, jets):
    entry, pts = _points(name)
    metric, jet = entry.metric(), jets[name]
    tol = max(1e-10, entry.tolerance_floor)
    for x in pts:
        res = riemann.compatibility_residuals(jet, metric, x)
        assert np.max(np.abs(res[0])) <= tol
        assert np.max(np.abs(res[1])) <= tol
        assert np.max(np.abs(res[2] - riemann.curvature_obstruction(jet, metric, x))) <= tol
        assert np.max(np.abs(riemann.metricity_residual(jet, metric, x))) <= tol
        if entry.flat:
            assert np.max(np.abs(res[2])) <= tol


def test_second_order_mismatch_is_the_curvature_term(jets):
    """Finite differences of the pulled-back flat metric reproduce the closed-form obstruction."""
    metric = cat.get("paraboloid2").metric()
    jet = jets["paraboloid2"]
    x = np.array([0.4, -0.3])
    loc = jet.local(x, 0, 0, 0)
    h, G, D = loc.h.val, loc.Gamma.val, loc.Delta.val
    eta = metric.flat.eta

    def mismatch(tt):
        Hm = h @ dpoly(G, D, tt)
        return Hm.T @ eta @ Hm - metric.value(x + tt)

    e, n = 1e-3, 2
    hess = np.zeros((n, n, n, n))
    for s in range(n):
        for r in range(n):
            es, er = np.eye(n)[s] * e, np.eye(n)[r] * e
            hess[:, :, s, r] = (mismatch(es + er) - mismatch(es - er) - mismatch(er - es) + mismatch(-es - er)) / (
                4 * e * e
            )
    obstruction = riemann.curvature_obstruction(jet, metric, x)
    assert np.max(np.abs(obstruction)) > 0.1
    np.testing.assert_allclose(0.5 * hess, obstruction, atol=1e-5)


@pytest.mark.parametrize("name", ["sphere2", "hyperbolic2", "paraboloid2", "minkowski2"])
def test_ricci_rotation_routes_agree_and_are_antisymmetric(name, jets):
    entry, pts = _points(name)
    for x in pts:
        loc = jets[name].local(x, h_order=1, gamma_order=0, delta_order=0)
        from_F, lowered = riemann.ricci_rotation_array(loc, entry.signature)
        assert np.max(np.abs(from_F - lowered)) <= 1e-9
        assert np.max(np.abs(riemann.rotation_antisymmetry(lowered))) <= 1e-10


def test_sphere_ricci_rotation_value(sphere):
    gam = riemann.ricci_rotation(sphere, [np.pi / 4, 0.0]).data
    assert gam[0, 1, 1] == pytest.approx(-1.0, abs=1e-12)
    assert gam[1, 1, 0] == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("name", ["sphere2", "paraboloid2", "minkowski2", "euclidean3"])
def test_so_gauge_preserves_metric_and_ricci_scalar(name, jets):
    entry, pts = _points(name)
    rot = riemann.random_so_field(entry.signature, np.random.default_rng(5))
    rotated = riemann.gauge_transform_so(jets[name], rot)
    for x in pts:
        h2 = rotated.h.value(x)
        assert np.max(np.abs(h2 - jets[name].h.value(x))) > 1e-3
        np.testing.assert_allclose(riemann.reconstruct_metric(h2, entry.signature), entry.metric().value(x), atol=1e-10)
        r0 = geo.ricci_scalar(jets[name], x)
        assert abs(geo.ricci_scalar(rotated, x, route="frame") - r0) <= 1e-8


def test_so_gauge_rejects_bad_rotations(jets):
    with pytest.raises(GaugeError):
        riemann.constant_rotation(np.array([[1.0, 0.2], [0.0, 1.0]]), (2, 0))
    boost = riemann.constant_rotation(np.array([[np.cosh(0.3), np.sinh(0.3)], [np.sinh(0.3), np.cosh(0.3)]]), (1, 1))
    with pytest.raises(GaugeError):
        riemann.gauge_transform_so(jets["sphere2"], boost)


def test_metric_sources_agree(tmp_path, sphere):
    spec = {
        "name": "s2",
        "dim": 2,
        "signature": [2, 0],
        "domain": [[0.1, 3.0], [-3.0, 3.0]],
        "coords": ["th", "ph"],
        "components": [["1", "0"], ["0", "sin(th)^2"]],
    }
    path = tmp_path / "s2.json"
    path.write_text(json.dumps(spec))
    loaded = MetricProvider.from_json(path)
    assert loaded.coords == ("th", "ph")
    x = np.array([0.8, 0.3])
    np.testing.assert_allclose(loaded.jet(x).d2, sphere.jet(x).d2, atol=1e-14)
    arrays = MetricProvider.from_arrays(
        lambda y: np.diag([1.0, np.sin(y[0]) ** 2]),
        2,
        (2, 0),
        dg_fn=lambda y: np.array([[[0, 0], [0, 0]], [[0, 0], [np.sin(2 * y[0]), 0]]], float),
    )
    np.testing.assert_allclose(arrays.jet(x, 1).d1, sphere.jet(x, 1).d1, atol=1e-14)
    with pytest.raises(MetricSignatureError):
        MetricProvider.from_json({"name": "x", "dim": 2})


def test_finite_difference_metric_derivatives_track_analytic(sphere):
    x = np.array([0.8, 0.3])
    a = geo.curvature_coord(riemann.solve_deformation(sphere), x).data
    f = geo.curvature_coord(riemann.solve_deformation(sphere.with_mode("fd")), x).data
    assert np.max(np.abs(a - f)) <= 5e-6
