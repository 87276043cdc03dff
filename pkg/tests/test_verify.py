import pytest

from ftcl.lfun import LFunctionSpec
from ftcl.verify import (
    INTERPOLATION_RESIDUALS,
    _interpolation_failures,
    curve_periods,
    evaluate_lvalue,
    lfunction_from_request,
    selftest,
    survey,
    verify,
)


def test_m_dividing_3N_is_a_hypothesis_failure(settings, cache):
    report = verify("11a1", 3, settings=settings, cache=cache)
    assert report.status == "hypothesis_failure"
    assert report.exit_code == 2
    assert report.failed_stage == "hypotheses"
    assert report.failed_conditions == ["m_coprime_3N"]
    assert report.measure_rho is None


def test_rational_3_isogeny_is_a_hypothesis_failure(settings, cache):
    report = verify("19a1", 2, settings=settings, cache=cache)
    assert report.status == "hypothesis_failure"
    assert "no_rational_3_isogeny" in report.failed_conditions


def test_supersingular_curve_is_a_hypothesis_failure(settings, cache):
    report = verify("37a1", 2, settings=settings, cache=cache)
    assert report.exit_code == 2
    assert "ordinary" in report.failed_conditions


def test_singular_curve_is_reported_not_raised(settings, cache):
    report = verify("0,0,0,0,0", 2, settings=settings, cache=cache)
    assert report.status == "hypothesis_failure"
    assert report.failed_stage == "curve"
    assert report.a_invariants == []


def test_unknown_label_raises(settings, cache):
    with pytest.raises(ValueError, match="Unknown curve label"):
        verify("999z9", 2, settings=settings, cache=cache)


def test_lfunction_requests():
    assert lfunction_from_request("curve", "11a1").conductor == 11
    assert lfunction_from_request("dirichlet", character="3:2:0,1").conductor == 3
    assert isinstance(lfunction_from_request("rankin", "11a1", m=2), LFunctionSpec)
    with pytest.raises(ValueError, match="Unknown L-function kind"):
        lfunction_from_request("symmetric_square", "11a1")
    with pytest.raises(ValueError, match="needs a character"):
        lfunction_from_request("dirichlet")
    with pytest.raises(ValueError, match="needs a curve"):
        lfunction_from_request("twist", character="3:2:0,1")
    with pytest.raises(ValueError, match="needs m"):
        lfunction_from_request("rankin", "11a1")


def test_lvalue_and_periods_reports(curve_11a1):
    report = evaluate_lvalue(lfunction_from_request("curve", "11a1"), 1, 20)
    assert report.value.startswith("0.2538418608559")
    assert report.digits == 20
    periods = curve_periods(curve_11a1, 20)
    assert periods.omega_plus.startswith("1.26920930427955")


def test_survey_without_admissible_pairs(settings, cache):
    report = survey(["11a1", "37a1"], [3], settings=settings, cache=cache)
    assert report.rows == []
    assert len(report.skipped) == 2
    assert report.summary.message == "no admissible pairs among 2"
    assert report.exit_code == 0


def test_survey_skips_unknown_labels(settings, cache):
    report = survey("11a1,999z9", [3, 6], settings=settings, cache=cache)
    assert [(pair.curve, pair.m) for pair in report.skipped] == [("11a1", 3), ("11a1", 6), ("999z9", 3), ("999z9", 6)]
    assert "Unknown curve label" in report.skipped[-1].reasons[0]


def test_selftest_selected_suites(settings, cache):
    report = selftest(settings, cache, only=["rings", "measures"])
    assert [suite.name for suite in report.suites] == ["rings", "measures"]
    assert report.passed


def test_selftest_skips_precision_sensitive_suites(settings, cache):
    report = selftest(settings.with_overrides(precision=5), cache, only=["rings", "ordinary", "congruence"])
    statuses = {suite.name: suite.status for suite in report.suites}
    assert statuses == {"rings": "passed", "ordinary": "skipped", "congruence": "skipped"}
    assert report.passed



def test_interpolation_failures_name_every_bad_residual():
    residuals = dict.fromkeys(INTERPOLATION_RESIDUALS, 1e-20)
    assert _interpolation_failures(residuals) == []
    residuals.update(unit_free_ratio=0.5, interpolation_sigma=None)
    assert _interpolation_failures(residuals) == ["unit_free_ratio = 0.5", "interpolation_sigma missing"]

@pytest.mark.slow
def test_verify_11a1_m_2(settings, cache):
    report = verify("11a1", 2, settings=settings, cache=cache)
    assert report.status == "verified", report.summary_line()
    assert report.r == 3
    assert report.t == 44
    assert report.integral
    assert report.difference_valuation >= 1
    again = verify("11a1", 2, settings=settings, cache=cache)
    assert again.to_json() == report.to_json()


@pytest.mark.slow
def test_verify_11a1_m_2_with_interpolation(settings, cache):
    report = verify("11a1", 2, interpolation=True, settings=settings.with_overrides(digits=30), cache=cache)
    assert report.status == "verified", report.summary_line()
    assert set(report.residuals) == set(INTERPOLATION_RESIDUALS)
    assert all(value is not None and value < 1e-10 for value in report.residuals.values())


@pytest.mark.slow
def test_unreconciled_interpolation_is_a_computation_failure(settings, cache, monkeypatch):
    residuals = dict.fromkeys(INTERPOLATION_RESIDUALS, 1e-20) | {"interpolation_rho": 0.3}
    monkeypatch.setattr("ftcl.verify._interpolation_residuals", lambda *args: residuals)
    report = verify("11a1", 2, interpolation=True, settings=settings, cache=cache)
    assert report.status == "computation_failure"
    assert report.exit_code == 3
    assert report.failed_stage == "interpolation"
    assert "interpolation_rho = 0.3" in report.error
    assert report.difference_valuation >= 1


@pytest.mark.slow
def test_battery_of_curves(settings, cache):
    report = survey("11a1,19a1,37a1", [2], settings=settings, cache=cache)
    assert [(row.curve, row.status) for row in report.rows] == [("11a1", "verified")]
    assert [pair.curve for pair in report.skipped] == ["19a1", "37a1"]
    assert report.summary.message == "all 1 admissible pairs verified"
    assert report.exit_code == 0


@pytest.mark.slow
def test_relaxed_mode_with_a_nonempty_n_diff(settings, cache):
    strict = verify("1,1,0,4,11", 2, settings=settings, cache=cache)
    assert strict.failed_conditions == ["i_q_prime_to_3"]
    report = verify("1,1,0,4,11", 2, relaxed=True, settings=settings, cache=cache)
    assert report.relaxed_primes == [7]
    assert report.status == "verified", report.summary_line()
    assert report.difference_valuation >= 1


@pytest.mark.slow
def test_verify_11a1_with_an_unramified_twist(settings, cache):
    report = verify("11a1", 10, settings=settings, cache=cache)
    assert report.r == 1
    assert report.status == "verified", report.summary_line()
