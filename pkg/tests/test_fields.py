import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deformgeo.errors import DifferentiationError, IndexDisciplineError
from deformgeo.fields import (
    ChartPoint,
    CoefficientField,
    FlatMetric,
    IndexedTensor,
    contract,
    partial_x,
    second_partial_x,
    slots,
)


def _field(mode="analytic"):
    return CoefficientField.from_function(
        lambda x: [[np.sin(x[0]) * x[1], np.exp(x[1])], [x[0] ** 3, np.cos(x[0] - x[1])]], 2, mode=mode
    )


def test_chart_point_rejects_non_finite():
    with pytest.raises(ValueError):
        ChartPoint([0.0, np.nan])
    with pytest.raises(ValueError):
        ChartPoint([])


def test_chart_point_is_read_only():
    p = ChartPoint([1.0, 2.0])
    with pytest.raises(ValueError):
        p.coords[0] = 3.0


def test_contract_requires_opposite_variance_same_frame():
    v = IndexedTensor(np.ones(2), slots("Cu"))
    w = IndexedTensor(np.ones(2), slots("Cd"))
    f = IndexedTensor(np.ones(2), slots("Fd"))
    assert contract(v, 0, w, 0).data == pytest.approx(2.0)
    with pytest.raises(IndexDisciplineError):
        contract(v, 0, v, 0)
    with pytest.raises(IndexDisciplineError):
        contract(v, 0, f, 0)


def test_indexed_tensor_rank_must_match_tags():
    with pytest.raises(ValueError):
        IndexedTensor(np.ones((2, 2)), slots("Cu"))


def test_flat_metric_signature():
    eta = FlatMetric((1, 3)).eta
    np.testing.assert_array_equal(np.diag(eta), [1, -1, -1, -1])
    with pytest.raises(ValueError):
        FlatMetric((0, 0))


@settings(max_examples=20, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1))
def test_fd_mode_agrees_with_analytic(a, b):
    x = np.array([a, b])
    ja, jf = _field().jet(x, 2), _field("fd").jet(x, 2)
    np.testing.assert_allclose(jf.d1, ja.d1, atol=1e-8)
    np.testing.assert_allclose(jf.d2, ja.d2, atol=2e-6)


def test_partial_derivatives_by_direction():
    f = _field()
    x = np.array([0.3, 0.7])
    np.testing.assert_allclose(partial_x(f, x, 1).data, [[np.sin(0.3), np.exp(0.7)], [0.0, np.sin(0.3 - 0.7)]])
    assert second_partial_x(f, x, 0, 0).data[1, 0] == pytest.approx(6 * 0.3)


def test_missing_derivative_filled_by_differences():
    # evaluator trusted only for values: derivatives come from differences
    f = CoefficientField(lambda x, order: np.array([np.sin(x[0]) * x[1]]), 2, analytic_order=0)
    j = f.jet(np.array([0.5, 2.0]), 2)
    np.testing.assert_allclose(j.d1[0], [np.cos(0.5) * 2.0, np.sin(0.5)], atol=1e-9)
    assert j.d2[0, 0, 1] == pytest.approx(np.cos(0.5), abs=1e-6)


def test_third_derivatives_refused():
    with pytest.raises(DifferentiationError):
        _field().jet(np.zeros(2), 3)


def test_non_finite_field_reported():
    f = CoefficientField.from_function(lambda x: [x[0] * np.inf], 1)
    with pytest.raises(DifferentiationError):
        f.value(np.array([0.2]))


def test_cached_jets_are_immutable():
    j = _field().jet(np.array([0.1, 0.2]), 1)
    with pytest.raises(ValueError):
        j.d1[0, 0, 0] = 1.0
