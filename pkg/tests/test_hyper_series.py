import math

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from common import DomainError, PreconditionError, relative_residual
from hyper_series import HyperParams, SeriesConfig, extrapolate_at_one, pfq, series_terms, sum_series, two_f_one
from matrix_core import matrix_power_scalar
from special_fn import pochhammer, scalar_gamma

mpmath.mp.dps = 30

LN3 = 1.0986122886681098
TWO_LN2 = 1.3862943611198906


def scalar(result):
    return complex(result.value[0, 0])


def test_config_validation():
    with pytest.raises(ValueError):
        SeriesConfig(tol=0.0)
    with pytest.raises(ValueError):
        SeriesConfig(max_terms=0)
    with pytest.raises(ValueError):
        SeriesConfig(acceleration="richardson")


def test_sum_series_finite_iterable_is_exact():
    result = sum_series([np.eye(2), 2 * np.eye(2), np.zeros((2, 2))])
    np.testing.assert_array_equal(result.value, 3 * np.eye(2))
    assert result.converged
    assert result.terms_used == 3


def test_sum_series_geometric():
    terms = (0.5**m * np.eye(1) for m in range(10**6))
    result = sum_series(terms)
    assert result.converged
    assert result.method == "raw"
    assert abs(scalar(result) - 2.0) <= 1e-14


def test_sum_series_reports_non_convergence():
    terms = (np.eye(1) / (m + 1) for m in range(10**6))
    result = sum_series(terms, SeriesConfig(max_terms=100))
    assert not result.converged
    assert result.terms_used == 100


def test_sum_series_empty():
    with pytest.raises(ValueError):
        sum_series([])


def test_exponential_series():
    params = HyperParams.build([], [], dim=2)
    result = pfq(params, 1.0)
    assert relative_residual(result.value, math.e * np.eye(2)) <= 1e-14
    assert result.converged


def test_geometric_one_f_zero():
    result = pfq(HyperParams.build([np.eye(2)], []), 0.5)
    assert relative_residual(result.value, 2 * np.eye(2)) <= 1e-14


def test_one_f_zero_is_matrix_power(triple3):
    z = 0.4
    result = pfq(HyperParams.build([triple3.p], []), z)
    assert relative_residual(result.value, matrix_power_scalar(1 / (1 - z), triple3.p)) <= 1e-12


@pytest.mark.parametrize(
    "a, b, c, z, expected",
    [
        (1.0, 0.5, 1.5, 0.25, LN3),
        (1.0, 1.0, 2.0, 0.5, TWO_LN2),
        (1.0, 0.5, 1.5, -1.0, math.pi / 4),
    ],
)
def test_two_f_one_closed_forms(a, b, c, z, expected):
    config = SeriesConfig(acceleration="euler") if abs(z) == 1 else None
    assert abs(scalar(two_f_one(a, b, c, z, config)) - expected) <= 1e-12


def test_two_f_one_reduces_to_one_f_zero(triple2):
    z = 0.3
    result = two_f_one(np.eye(2), triple2.q, triple2.q, z)
    assert relative_residual(result.value, np.eye(2) / (1 - z)) <= 1e-13


def test_gauss_summation_at_one():
    a, b, c = 0.3, 0.2, 2.0
    expected = scalar_gamma(c) * scalar_gamma(c - a - b) / (scalar_gamma(c - a) * scalar_gamma(c - b))
    result = two_f_one(a, b, c, 1.0)
    assert result.converged
    assert result.method == "richardson"
    assert abs(scalar(result) - expected) <= 1e-8


def test_matrix_two_f_one_in_eigenbasis(triple3):
    vinv = np.linalg.inv(triple3.similarity)
    diagonals = [np.diag(vinv @ m @ triple3.similarity) for m in (triple3.p, triple3.q, triple3.r)]
    z = 0.5
    values = [complex(mpmath.hyp2f1(a, b, c, z)) for a, b, c in zip(*diagonals)]
    expected = triple3.similarity @ np.diag(values) @ vinv
    result = two_f_one(triple3.p, triple3.q, triple3.r, z)
    assert relative_residual(result.value, expected) <= 1e-11


@given(
    a=st.floats(-2, 2),
    b=st.floats(-2, 2),
    c=st.floats(0.5, 3),
    z=st.floats(-0.8, 0.8),
)
def test_two_f_one_against_mpmath(a, b, c, z):
    expected = complex(mpmath.hyp2f1(a, b, c, z))
    assume(abs(expected) < 1e6)
    assert abs(scalar(two_f_one(a, b, c, z)) - expected) <= 1e-11 * (1 + abs(expected))


def test_terminating_series():
    result = two_f_one(-3.0, 0.5, 1.5, 0.9)
    assert result.terms_used == 4
    assert result.converged
    expected = complex(mpmath.hyp2f1(-3, 0.5, 1.5, 0.9))
    assert abs(scalar(result) - expected) <= 1e-14


def test_terminating_series_beyond_unit_disk():
    params = HyperParams.build([-2.0, 1.0, 1.0], [1.0])
    assert params.termination_index() == 2
    assert abs(scalar(pfq(params, 3.0)) - 13.0) <= 1e-12


def test_termination_index_uses_smallest():
    params = HyperParams.build([-5 * np.eye(2), -2 * np.eye(2), np.eye(2)], [np.eye(2)])
    assert params.termination_index() == 2


def test_singular_denominator_reports_index():
    with pytest.raises(DomainError) as info:
        two_f_one(1.0, 1.0, -2.0, 0.5)
    assert info.value.index == 2


def test_outside_unit_disk():
    with pytest.raises(DomainError):
        two_f_one(1.0, 1.0, 2.0, 1.5)


def test_too_many_numerators():
    with pytest.raises(DomainError):
        pfq(HyperParams.build([1.0, 1.0, 1.0], [1.0]), 0.1)


def test_margin_rule_on_unit_circle():
    with pytest.raises(PreconditionError):
        two_f_one(1.0, 1.0, 2.0, 1.0)
    with pytest.raises(PreconditionError):
        two_f_one(1.0, 1.0, 2.0, -1.0)


def test_margin_rule_not_waived_at_one():
    with pytest.raises(PreconditionError):
        two_f_one(1.0, 1.0, 2.0, 1.0, SeriesConfig(acceleration="euler"))


def test_euler_acceleration_on_alternating_boundary():
    result = two_f_one(1.0, 1.0, 2.0, -1.0, SeriesConfig(acceleration="euler"))
    assert result.method == "euler"
    assert abs(scalar(result) - math.log(2)) <= 1e-12


def test_params_validation():
    with pytest.raises(PreconditionError):
        HyperParams.build([np.eye(2)], [np.eye(3)])
    with pytest.raises(PreconditionError):
        HyperParams.build([np.array([[0.0, 1.0], [0.0, 0.0]])], [np.array([[1.0, 0.0], [1.0, 1.0]])])


def test_series_terms_recurrence(triple2):
    params = HyperParams.build([triple2.p, triple2.q], [triple2.r])
    terms = list(series_terms(params, 0.5, count=2))
    assert len(terms) == 3
    np.testing.assert_array_equal(terms[0], np.eye(2))
    expected = triple2.p @ triple2.q @ np.linalg.inv(triple2.r) * 0.5
    assert relative_residual(terms[1], expected) <= 1e-13


def test_matrix_gauss_summation_at_one(triple2):
    p, q = 0.3 * triple2.p / np.linalg.norm(triple2.p, 2), 0.2 * np.eye(2)
    r = triple2.r + 2 * np.eye(2)
    vinv = np.linalg.inv(triple2.similarity)
    values = []
    for a, b, c in zip(*[np.diag(vinv @ m @ triple2.similarity) for m in (p, q, r)]):
        values.append(complex(mpmath.hyp2f1(a, b, c, 1)))
    expected = triple2.similarity @ np.diag(values) @ vinv
    result = two_f_one(p, q, r, 1.0)
    assert result.method == "richardson"
    assert relative_residual(result.value, expected) <= 1e-8


def test_extrapolation_without_room_falls_back_to_raw_sum():
    params = HyperParams.build([0.3, 0.2], [2.0])
    result = extrapolate_at_one(params, SeriesConfig(max_terms=20))
    assert result.method == "raw"
    assert not result.converged


def test_defective_numerator_does_not_terminate():
    jordan = np.array([[-1.0, 1.0], [0.0, -1.0]])
    params = HyperParams.build([jordan, np.eye(2)], [2 * np.eye(2)])
    assert params.termination_index() is None
    z = 0.5

    def f(a):
        return mpmath.hyp2f1(a, 1, 2, z)

    value, slope = complex(f(-1)), complex(mpmath.diff(f, -1))
    assert abs(value - 0.75) <= 1e-14
    expected = np.array([[value, slope], [0, value]])
    result = pfq(params, z)
    assert result.converged
    assert relative_residual(result.value, expected) <= 1e-12


def test_zero_argument_of_divergent_series():
    params = HyperParams.build([1.0, 2.0, 0.5, 1.5], [2.5], dim=2)
    result = pfq(params, 0.0)
    np.testing.assert_array_equal(result.value, np.eye(2))
    assert result.converged


def test_numerator_order_is_immaterial(triple3):
    z = 0.6
    forward = two_f_one(triple3.p, triple3.q, triple3.r, z)
    swapped = two_f_one(triple3.q, triple3.p, triple3.r, z)
    assert relative_residual(forward.value, swapped.value) <= 1e-13

    eye = np.eye(3)
    first = pfq(HyperParams.build([triple3.p, triple3.q, eye], [triple3.r, triple3.q + eye]), z)
    second = pfq(HyperParams.build([eye, triple3.p, triple3.q], [triple3.q + eye, triple3.r]), z)
    assert relative_residual(first.value, second.value) <= 1e-13


def test_terms_match_the_product_form(triple2):
    z = 0.7
    params = HyperParams.build([triple2.p, triple2.q], [triple2.r])
    terms = list(series_terms(params, z, count=30))
    assert len(terms) == 31
    for m, term in enumerate(terms):
        numerator = pochhammer(triple2.p, m) @ pochhammer(triple2.q, m)
        expected = numerator @ np.linalg.inv(pochhammer(triple2.r, m)) * (z**m / math.factorial(m))
        assert relative_residual(term, expected) <= 1e-12
