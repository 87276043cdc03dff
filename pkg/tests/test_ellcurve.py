import mpmath as mp
import pytest

from ftcl.ellcurve import (
    SPLIT,
    an_list,
    ap,
    curve_from_label,
    has_rational_3_isogeny,
    hypothesis_filter,
    is_cube_free,
    load_curve_table,
    local_factor,
    minimal_model,
    n_diff,
    periods_agm,
    u_w,
)
from ftcl.errors import BadReduction, NotOrdinary, SingularCurve


def _omega_plus_by_quadrature(E, digits):
    """Least positive real period from x = e1 + t^2 on the real component."""
    b2, b4, b6, _ = E.b_invariants
    with mp.workdps(digits + 10):
        roots = mp.polyroots([4, b2, 2 * b4, b6], maxsteps=200, extraprec=200)
        if E.discriminant > 0:
            e1, e2, e3 = sorted((mp.re(r) for r in roots), reverse=True)
            value = 2 * mp.quad(lambda t: 1 / mp.sqrt((t * t + e1 - e2) * (t * t + e1 - e3)), [0, 1, mp.inf])
        else:
            e1 = mp.re(min(roots, key=lambda r: abs(mp.im(r))))
            e2 = next(r for r in roots if abs(mp.im(r)) > abs(mp.im(e1)) + mp.mpf(10) ** -digits)
            value = 2 * mp.quad(lambda t: 1 / abs(t * t + e1 - e2), [0, 1, mp.inf])
    return value


def test_11a1_invariants(curve_11a1):
    assert curve_11a1.a_invariants == (0, -1, 1, -10, -20)
    assert curve_11a1.discriminant == -161051
    assert curve_11a1.conductor == 11
    assert an_list(curve_11a1, 10)[1:] == [1, -2, -1, 2, 1, 2, -2, 0, -2, -2]


def test_11a1_local_data(curve_11a1):
    data = curve_11a1.local(11)
    assert data.reduction == SPLIT
    assert data.i_q == 5
    assert data.kodaira == "I5"
    assert data.tamagawa == 5
    assert local_factor(curve_11a1, 11) == (1, -1)
    assert local_factor(curve_11a1, 2) == (1, 2, 2)


def test_ap_refuses_bad_primes(curve_11a1):
    with pytest.raises(BadReduction):
        ap(curve_11a1, 11)


def test_37a1_point_counts(curve_37a1):
    assert [ap(curve_37a1, q) for q in (2, 3, 5, 7)] == [-2, -3, -2, -1]
    assert curve_37a1.conductor == 37


def test_minimal_model_undoes_scaling():
    E = minimal_model([0, -4, 8, -160, -1280])
    assert E.a_invariants == (0, -1, 1, -10, -20)
    assert E.conductor == 11


def test_singular_curve_is_refused():
    with pytest.raises(SingularCurve):
        minimal_model([0, 0, 0, 0, 0])


def test_unknown_label_is_refused():
    with pytest.raises(ValueError, match="Unknown curve label"):
        curve_from_label("999z9")


def test_bundled_table_has_minimal_models():
    table = load_curve_table()
    for label in ("11a1", "37a1", "389a1", "5077a1"):
        E = minimal_model(table[label], label)
        assert E.a_invariants == table[label]


def test_hypotheses_hold_for_11a1_and_m_2(curve_11a1):
    report = hypothesis_filter(curve_11a1, 2)
    assert report.passed
    assert report.failures == []


def test_hypotheses_report_m_sharing_a_factor_with_3N(curve_11a1):
    report = hypothesis_filter(curve_11a1, 3)
    assert report.failures == ["m_coprime_3N"]
    assert not report.relaxable
    assert "m_coprime_3N" in hypothesis_filter(curve_11a1, 22).failures


def test_hypotheses_report_supersingular_curves(curve_37a1):
    assert "ordinary" in hypothesis_filter(curve_37a1, 2).failures
    with pytest.raises(NotOrdinary):
        u_w(curve_37a1, 10)


def test_rational_3_isogeny_is_detected(curve_11a1):
    E = curve_from_label("19a1")
    assert has_rational_3_isogeny(E)
    assert not has_rational_3_isogeny(curve_11a1)
    assert "no_rational_3_isogeny" in hypothesis_filter(E, 2).failures
    assert n_diff(E) == [19]


def test_cube_free():
    assert is_cube_free(2)
    assert is_cube_free(100)
    assert not is_cube_free(16)
    assert not is_cube_free(0)


def test_unit_root_times_non_unit_root_is_three(curve_11a1):
    u, w = u_w(curve_11a1, 15)
    assert u * w == 3
    assert u + w == -1


@pytest.mark.parametrize("label, expected", [
    ("11a1", "1.26920930427955"),
    ("37a1", "2.99345864623196"),
])
def test_real_period_matches_known_values(label, expected):
    omega_plus, omega_minus = periods_agm(curve_from_label(label), 30)
    assert abs(omega_plus - mp.mpf(expected)) < mp.mpf(10) ** -13
    assert omega_minus.real == 0
    assert omega_minus.imag > 0


@pytest.mark.parametrize("label", ["11a1", "37a1", "14a1", "389a1"])
def test_agm_agrees_with_quadrature(label):
    E = curve_from_label(label)
    omega_plus, _ = periods_agm(E, 35)
    expected = _omega_plus_by_quadrature(E, 35)
    with mp.workdps(45):
        assert abs(omega_plus - expected) < mp.mpf(10) ** -25


def test_periods_keep_the_requested_precision(curve_11a1):
    omega_plus, omega_minus = periods_agm(curve_11a1, 40)
    with mp.workdps(50):
        assert abs(omega_plus - mp.mpf("1.2692093042795534216887")) < mp.mpf(10) ** -21
        assert omega_minus.imag > 0
