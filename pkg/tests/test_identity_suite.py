import json
import math

import mpmath
import numpy as np
import pytest

from common import AccuracyError, InputFormatError
from identity_suite import (
    DISCREPANCY_THRESHOLD,
    T7_KERNEL_MAX_TERMS,
    T7_KERNEL_TOL,
    IdentityCase,
    IdentityId,
    case_from_dict,
    case_to_dict,
    generate_cases,
    run_cases,
    run_suite,
    scalar_triple,
    theorem7_discrepancy,
    _kernel_coefficients,
    verify_case,
)

mpmath.mp.dps = 30

LN3 = 1.0986122886681098
TWO_LN2 = 1.3862943611198906


def verify(identity, triple, tol=1e-7, **scalars):
    return verify_case(IdentityCase(identity, triple, scalars, tol))


def lhs_value(report):
    return complex(report.lhs[0, 0])


@pytest.fixture(scope="module")
def small_suite():
    return run_suite(42, [1], 1)


def test_theorem1_scalar():
    report = verify(IdentityId.T1, scalar_triple(1.0, 1.0, 2.0), z=0.25)
    assert report.passed
    assert abs(lhs_value(report) - LN3) <= 1e-12
    assert report.lhs_route.startswith("series 3F2")
    assert report.rhs_route.startswith("quadrature")


def test_corollary_of_theorem1_is_polynomial():
    report = verify(IdentityId.C_T1, scalar_triple(-2.0, 1.0, 2.0), z=0.5, k=2)
    assert report.passed
    assert report.terms_or_nodes["lhs"] == 3


def test_theorem4_scalar():
    report = verify(IdentityId.T4, scalar_triple(1.0, 1.0, 2.0), z=0.5, q=1)
    assert report.passed
    assert abs(lhs_value(report) - TWO_LN2) <= 1e-12


def test_theorem4_matrix(triple2):
    report = verify(IdentityId.T4, triple2, z=-0.5, q=4)
    assert report.passed, report.note


def test_theorem4_at_q_two_is_theorem1(triple2):
    t1 = verify(IdentityId.T1, triple2, z=0.5)
    t4 = verify(IdentityId.T4, triple2, z=0.5, q=2)
    assert np.max(np.abs(t1.lhs - t4.lhs)) <= 1e-12
    assert np.max(np.abs(t1.rhs - t4.rhs)) <= 1e-12


def test_theorem2_scalar():
    report = verify(IdentityId.T2, scalar_triple(0.2, 0.3, 2.0))
    expected = complex(mpmath.hyp3f2(0.2, 0.15, 0.65, 1.0, 1.5, 1))
    assert report.passed, report.note
    assert abs(lhs_value(report) - expected) <= 1e-8
    assert report.lhs_route == "series 3F2 richardson"
    assert "series skipped" not in report.note
    assert report.extra_residuals["series-vs-quadrature"] <= 1e-8


def test_corollary1_scalar():
    report = verify(IdentityId.C1, scalar_triple(-1.0, 0.5, 2.0), n=1)
    assert report.passed
    assert abs(lhs_value(report) - 0.875) <= 1e-13
    assert report.extra_residuals["corollary-vs-theorem"] <= 1e-10
    assert report.extra_residuals["series-vs-quadrature"] <= 1e-9


def test_theorem3_scalar():
    report = verify(IdentityId.T3, scalar_triple(1.0, 1.0, 2.0), tol=1e-6)
    assert report.passed, report.note
    assert abs(lhs_value(report) - math.sqrt(2) * math.asinh(1)) <= 1e-10


def test_corollary2_matches_theorem3_route():
    report = verify(IdentityId.C2, scalar_triple(0.5, 1.0, 2.0), tol=1e-6)
    assert report.passed, report.note
    assert report.extra_residuals["corollary-vs-theorem"] <= 1e-6


def test_theorem6_on_unit_circle():
    report = verify(IdentityId.T6, scalar_triple(1.0, 1.0, 2.0), tol=1e-6, w=-2.0)
    assert report.passed, report.note
    assert abs(lhs_value(report) - math.pi / 4) <= 1e-10
    assert report.extra_residuals["series-vs-quadrature"] <= 1e-9


@pytest.mark.parametrize("w, expected", [(10.0, 32 / 33), (0.5, 7 / 9)])
def test_theorem6_with_terminating_p(w, expected):
    report = verify(IdentityId.T6, scalar_triple(-1.0, 1.0, 2.0), tol=1e-6, w=w)
    assert report.passed, report.note
    assert abs(complex(report.rhs[0, 0]) - expected) <= 1e-12


def test_corollary3():
    report = verify(IdentityId.C3, scalar_triple(0.5, 1.0, 2.0), tol=1e-6, w=-2.0)
    assert report.passed, report.note


def test_theorem6_at_w_one_reuses_theorem3_route():
    triple = scalar_triple(0.5, 1.0, 2.0)
    t3 = verify(IdentityId.T3, triple, tol=1e-6)
    t6 = verify(IdentityId.T6, triple, tol=1e-6, w=1.0)
    np.testing.assert_array_equal(t6.rhs, t3.rhs)


@pytest.mark.parametrize("w, fragment", [(-1.0, "excluded"), (0.0, "excluded"), (1.2, "1.5")])
def test_forbidden_w_is_a_failed_report(w, fragment):
    report = verify(IdentityId.T6, scalar_triple(0.5, 1.0, 2.0), w=w)
    assert not report.passed
    assert report.residual == float("inf")
    assert fragment in report.note
    assert report.to_dict()["residual"] is None


@pytest.mark.parametrize("identity", [IdentityId.T1, IdentityId.T3])
def test_zero_p_gives_identity(identity):
    scalars = {"z": 0.5} if identity is IdentityId.T1 else {}
    report = verify(identity, scalar_triple(0.0, 1.0, 2.0), tol=1e-6, **scalars)
    assert report.passed
    assert abs(lhs_value(report) - 1.0) <= 1e-14


def test_theorem5_scalar():
    report = verify(IdentityId.T5, scalar_triple(0.2, 0.3, 2.0), tol=1e-6)
    expected = complex(mpmath.hyper([0.2, 0.1, 1.3 / 3, 2.3 / 3], [2 / 3, 1.0, 4 / 3], 1))
    assert abs(lhs_value(report) - expected) <= 1e-8
    assert report.passed, report.note
    assert report.lhs_route == "series 4F3 richardson"


def test_theorem7_readings_agree_at_q_two():
    triple = scalar_triple(1.0, 1.0, 3.0)
    expected = 2 * (LN3 - 2 * math.log(4 / 3))
    for identity in (IdentityId.T7_stmt, IdentityId.T7_proof):
        report = verify(identity, triple, tol=1e-6, q=2, z=0.25)
        assert report.passed, report.note
        assert abs(complex(report.rhs[0, 0]) - expected) <= 1e-10


def test_theorem7_readings_differ_for_q_three():
    triple = scalar_triple(0.5, 1.0, 3.5)
    proof = verify(IdentityId.T7_proof, triple, tol=1e-6, q=3, z=0.5)
    statement = verify(IdentityId.T7_stmt, triple, tol=1e-6, q=3, z=0.5)
    assert proof.residual <= 1e-6
    assert statement.residual > 1e-4
    assert "proof reading" in proof.rhs_route


def test_theorem7_notes_small_margin():
    report = verify(IdentityId.T7_proof, scalar_triple(0.5, 1.0, 1.8), tol=1e-6, q=2, z=0.25)
    assert "b(R-Q) <= 1" in report.note


def test_generate_cases_is_deterministic():
    first, skipped_first = generate_cases(11, [1, 2], 2)
    second, skipped_second = generate_cases(11, [1, 2], 2)
    assert [case_to_dict(c) for c in first] == [case_to_dict(c) for c in second]
    assert skipped_first == skipped_second


def test_generate_cases_covers_every_identity():
    cases, skipped = generate_cases(5, [1], 1)
    regular = [c for c in cases if not c.diagnostic]
    diagnostics = [c for c in cases if c.diagnostic]
    assert len(regular) + len(skipped) == len(IdentityId)
    t7 = [c for c in regular if c.identity_id in (IdentityId.T7_stmt, IdentityId.T7_proof)]
    assert len(diagnostics) == 2 * len(t7)
    assert all(c.scalars["q"] == 3 for c in diagnostics)
    assert all(c.scalars["q"] == 2 for c in t7)


STRICT = (IdentityId.T1, IdentityId.C_T1, IdentityId.T2, IdentityId.C1, IdentityId.T4)


def test_case_tolerances():
    cases, _ = generate_cases(5, [1, 4], 1, tol=1e-8)
    for case in cases:
        strict = case.identity_id in STRICT and case.triple.dim < 4
        assert case.tol == (1e-8 if strict else 1e-6)


@pytest.mark.parametrize("kwargs", [{"dims": [7]}, {"dims": []}, {"cases_per_identity": 0}])
def test_generate_cases_rejects(kwargs):
    arguments = {"seed": 1, "dims": [1], "cases_per_identity": 1}
    arguments.update(kwargs)
    with pytest.raises(ValueError):
        generate_cases(**arguments)


def test_case_json_round_trip():
    cases, _ = generate_cases(5, [2], 1)
    for case in cases:
        restored = case_from_dict(json.loads(json.dumps(case_to_dict(case))))
        assert restored.identity_id is case.identity_id
        assert restored.scalars == case.scalars
        assert restored.tol == case.tol
        assert restored.diagnostic == case.diagnostic
        assert restored.triple.seed == case.triple.seed
        np.testing.assert_array_equal(restored.triple.p, case.triple.p)
        np.testing.assert_array_equal(restored.triple.r, case.triple.r)
        np.testing.assert_array_equal(restored.triple.similarity, case.triple.similarity)


def test_case_from_dict_accepts_scalar_shorthand():
    case = case_from_dict({"identity": "T4", "params": {"P": 1, "Q": 1, "R": 2}, "scalars": {"q": 1, "z": 0.5}})
    assert case.triple.dim == 1
    assert case.scalars == {"q": 1, "z": 0.5}
    assert verify_case(case).passed


@pytest.mark.parametrize(
    "obj, path",
    [
        ([], r"^\$:"),
        ({"identity": "T9"}, r"\$\.identity"),
        ({"identity": "T1"}, r"\$\.params"),
        ({"identity": "T1", "params": {"P": 1, "Q": 1}}, r"\$\.params"),
        ({"identity": "T4", "params": {"P": 1, "Q": 1, "R": 2}, "scalars": {"q": 1.5, "z": 0.5}}, r"\$\.scalars\.q"),
        ({"identity": "T4", "params": {"P": 1, "Q": 1, "R": 2}, "scalars": {"q": 2}}, "missing scalar 'z'"),
        ({"identity": "T2", "params": {"P": 1, "Q": 1, "R": 2}, "tol": -1}, r"\$\.tol"),
        ({"identity": "T2", "params": {"P": 1, "Q": 1, "R": 2}, "seed": "x"}, r"\$\.seed"),
        ({"identity": "T2", "params": {"P": 1, "Q": {"dim": 2, "entries": [[1, 0], [0]]}, "R": 2}}, r"\$\.params\.Q"),
    ],
)
def test_case_from_dict_errors(obj, path):
    with pytest.raises(InputFormatError, match=path):
        case_from_dict(obj)


def test_small_suite_reports(small_suite):
    assert small_suite.all_passed
    by_identity = {r.case.identity_id: r for r in small_suite.reports if not r.diagnostic}
    for identity in (IdentityId.T1, IdentityId.T4):
        assert by_identity[identity].passed, by_identity[identity].note
    summary = small_suite.summary
    assert set(summary) == {identity.value for identity in IdentityId}
    total = sum(sum(counts.values()) for counts in summary.values())
    assert total == len(small_suite.reports) + len(small_suite.skipped)


def test_small_suite_names_the_reading(small_suite):
    discrepancy = small_suite.discrepancy
    assert discrepancy["threshold"] == DISCREPANCY_THRESHOLD
    assert discrepancy["cases"]["proof"] >= 1
    assert discrepancy["reading"] == "proof"


def test_suite_to_dict_is_json(small_suite):
    document = small_suite.to_dict()
    text = json.dumps(document, sort_keys=True)
    assert json.loads(text)["all_passed"] == small_suite.all_passed
    assert len(document["reports"]) == len(small_suite.reports)


def test_run_cases_is_thread_independent():
    cases, skipped = generate_cases(9, [1, 2], 1)
    subset = [c for c in cases if c.identity_id in (IdentityId.T1, IdentityId.T4, IdentityId.C_T1)]
    serial = run_cases(subset, threads=1, skipped=skipped)
    parallel = run_cases(subset, threads=2, skipped=skipped)
    assert json.dumps(serial.to_dict(), sort_keys=True) == json.dumps(parallel.to_dict(), sort_keys=True)


def test_run_cases_reports_progress():
    cases, _ = generate_cases(9, [1], 1)
    subset = [c for c in cases if c.identity_id in (IdentityId.T1, IdentityId.T4)]
    seen = []
    run_cases(subset, progress=lambda identity, reports: seen.append((identity, len(reports))))
    assert seen == [(IdentityId.T1, 1), (IdentityId.T4, 1)]


def test_discrepancy_with_no_diagnostics():
    result = theorem7_discrepancy([])
    assert result["reading"] is None
    assert result["uniform_pass"] == []


def test_negative_w_ratio_is_a_precondition_failure():
    report = verify(IdentityId.T6, scalar_triple(-1.0, 1.0, 2.0), tol=1e-6, w=-0.5)
    assert not report.passed
    assert report.residual == float("inf")
    assert "(w+1)/w" in report.note
    assert "DomainError" not in report.note


def test_kernel_expansion_flags_truncation():
    with pytest.raises(AccuracyError) as info:
        _kernel_coefficients(np.array([[1.5]], dtype=complex), 0.999)
    assert info.value.residual > T7_KERNEL_TOL


def test_kernel_expansion_for_small_argument():
    kernel = _kernel_coefficients(np.array([[1.5]], dtype=complex), 0.25)
    np.testing.assert_array_equal(kernel[0], np.eye(1))
    assert len(kernel) < T7_KERNEL_MAX_TERMS
    assert abs(kernel.sum() - 0.75**-1.5) <= 1e-14


def test_verification_is_bitwise_repeatable(triple2):
    first = verify(IdentityId.T1, triple2, z=0.5)
    verify(IdentityId.T1, triple2, z=-0.25)
    verify(IdentityId.T4, triple2, z=0.25, q=3)
    again = verify(IdentityId.T1, triple2, z=0.5)
    np.testing.assert_array_equal(first.lhs, again.lhs)
    np.testing.assert_array_equal(first.rhs, again.rhs)
    assert first.residual == again.residual
    assert first.terms_or_nodes == again.terms_or_nodes
