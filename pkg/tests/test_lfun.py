from fractions import Fraction

import mpmath as mp
import pytest

from ftcl.artin import EPS3, eps3, local_factor_sigma
from ftcl.ellcurve import an_list, curve_from_label, local_factor, periods_agm
from ftcl.errors import CoefficientShortfall, MissingLocalFactor
from ftcl.lfun import (
    RHO_RAMIFIED,
    RHO_UNRAMIFIED,
    SIGMA_AT_Q,
    EulerFactorTable,
    coefficients_from_euler,
    curve_spec,
    dirichlet_shift,
    dirichlet_spec,
    dump_coefficients_csv,
    fricke_pseudo_eigenvalue,
    inverse_series,
    remove_euler,
    rs_degree4_coeffs,
    solve_sign,
    tau_reduction,
    twist_spec,
    value_afe,
)
from ftcl.rings import recognize_rational
from ftcl.series import QExpansion

TOLERANCE = mp.mpf(10) ** -25


def test_inverse_series_of_a_linear_factor():
    assert inverse_series((1, -2), 5) == [1, 2, 4, 8, 16]


def test_euler_product_reproduces_the_curve_coefficients(curve_11a1):
    table = EulerFactorTable(lambda q: local_factor(curve_11a1, q), 2)
    assert coefficients_from_euler(table, 200) == an_list(curve_11a1, 200)


def test_degree_four_sigma_coefficients_factor_as_a_dirichlet_convolution(curve_11a1):
    an = an_list(curve_11a1, 150)
    twisted = [a * eps3(n) for n, a in enumerate(an)]
    expected = [sum(an[d] * twisted[n // d] for d in range(1, n + 1) if n % d == 0) for n in range(1, 151)]
    f_euler = EulerFactorTable(lambda q: local_factor(curve_11a1, q), 2)
    g_euler = EulerFactorTable(local_factor_sigma, 2)
    assert rs_degree4_coeffs(f_euler, g_euler, 150)[1:] == expected


def test_euler_table_rejects_malformed_factors():
    table = EulerFactorTable(lambda q: (2, 1), 1)
    with pytest.raises(ValueError):
        table[5]
    assert 5 not in table
    assert table.with_overrides({5: (1, 1)})[5] == (1, 1)


def test_dirichlet_l_value_of_eps3():
    result = value_afe(dirichlet_spec(EPS3), 1, 35)
    with mp.workdps(40):
        assert abs(result.value - mp.pi / (3 * mp.sqrt(3))) < TOLERANCE
    assert result.fe_residual < TOLERANCE


def test_curve_root_numbers(curve_11a1, curve_37a1):
    assert solve_sign(curve_spec(curve_11a1), 30) == 1
    assert solve_sign(curve_spec(curve_37a1), 30) == -1


def test_central_values(curve_11a1, curve_37a1):
    value, residual = value_afe(curve_spec(curve_11a1), 1, 35)
    with mp.workdps(40):
        assert abs(value - mp.mpf("0.253841860855910684337758923")) < TOLERANCE
        assert residual < TOLERANCE
        value, _ = value_afe(curve_spec(curve_37a1), 1, 35)
        assert abs(value) < TOLERANCE


def test_central_value_keeps_the_requested_precision(curve_11a1):
    spec = curve_spec(curve_11a1)
    low = value_afe(spec, 1, 20).value
    high = value_afe(spec, 1, 45).value
    with mp.workdps(50):
        assert abs(high - mp.mpf("0.253841860855910684337758923")) < mp.mpf(10) ** -26
        assert abs(low - high) < mp.mpf(10) ** -15


def test_central_value_over_the_real_period(curve_11a1):
    value = value_afe(curve_spec(curve_11a1), 1, 35).value
    omega_plus, _ = periods_agm(curve_11a1, 35)
    with mp.workdps(35):
        assert recognize_rational(value / omega_plus, 100, mp.mpf(10) ** -25) == Fraction(1, 5)


@pytest.mark.parametrize("label, expected", [("11a1", -1), ("37a1", 1)])
def test_fricke_eigenvalue_of_prime_level_newforms(label, expected):
    # f|W_N = -a_N f at prime level N
    E = curve_from_label(label)
    f = QExpansion.from_list(an_list(E, 200), 2, E.conductor)
    w = fricke_pseudo_eigenvalue(f, 2, E.conductor, 30)
    with mp.workdps(30):
        assert abs(w - expected) < mp.mpf(10) ** -20


def test_fricke_eigenvalue_needs_enough_coefficients(curve_11a1):
    f = QExpansion.from_list(an_list(curve_11a1, 10), 2, 11)
    with pytest.raises(CoefficientShortfall):
        fricke_pseudo_eigenvalue(f, 2, 11, 30)


def test_quadratic_twist_keeps_the_sign_computable(curve_11a1):
    spec = twist_spec(curve_11a1, EPS3)
    assert spec.conductor == 99
    result = value_afe(spec, 1, 25)
    assert result.fe_residual < mp.mpf(10) ** -12


def test_remove_euler(curve_11a1):
    spec = curve_spec(curve_11a1)
    assert remove_euler(mp.mpf(2), spec, [], 1) == 2
    # P_2(11a1, X) = 1 + 2X + 2X^2 at X = 1/2
    assert remove_euler(mp.mpf(1), spec, [2], 1) == mp.mpf(5) / 2
    broken = EulerFactorTable(lambda q: (3,), 2)
    spec.euler = broken
    with pytest.raises(MissingLocalFactor):
        remove_euler(mp.mpf(1), spec, [5], 1)


def test_tau_reduction_cases():
    unramified = tau_reduction(RHO_UNRAMIFIED, 1)
    assert [term.dilation for term in unramified] == [1, 3]
    assert abs(unramified[0].coefficient + 1 / mp.sqrt(3)) < TOLERANCE
    assert abs(unramified[1].coefficient - mp.sqrt(3)) < TOLERANCE
    assert [term.dilation for term in tau_reduction(RHO_RAMIFIED, 1)] == [1]
    (term,) = tau_reduction(SIGMA_AT_Q, 1, prime=7)
    assert abs(term.coefficient - mp.mpf(1) / 7) < TOLERANCE
    with pytest.raises(ValueError):
        tau_reduction("elsewhere", 1)


def test_dirichlet_shift_by_powers_of_three():
    assert dirichlet_shift(1, 1, 5) == 1
    assert dirichlet_shift(3, 1, Fraction(2)) == Fraction(2, 3)
    assert dirichlet_shift(9, 1, Fraction(2)) == Fraction(4, 9)
    assert dirichlet_shift(2, 1, Fraction(2), removed=(2,)) == 0
    with pytest.raises(ValueError):
        dirichlet_shift(5, 1, Fraction(2))


def test_coefficient_csv(tmp_path, curve_11a1):
    path = dump_coefficients_csv(curve_spec(curve_11a1), 5, tmp_path / "an.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "n,b(n)"
    assert lines[2] == "2,-2"
