from fractions import Fraction

import pytest
from sympy import factorint, primerange

from ftcl.artin import (
    EPS3,
    cubic_residue_class,
    eps3,
    euler_data,
    g_rho_coeffs,
    g_sigma_coeffs,
    local_factor_rho,
    local_factor_sigma,
    ramification_at_3,
    tensor_local_factor,
    trace_congruence_defect,
)
from ftcl.errors import BadPrime


def _cube_roots_of(m: int, q: int) -> int:
    return sum(1 for x in range(q) if (x * x * x - m) % q == 0)


def _ideal_sum(m: int, n: int) -> Fraction:
    """Sum of the cubic residue character (m/.)_3 over the ideals of Z[omega] of norm n."""
    total = Fraction(1)
    for q, e in factorint(n).items():
        if q == 3:
            # lambda = 1 - omega splits in the Kummer extension exactly when m is a 3-adic cube
            value = 1 if any((x ** 3 - m) % 3 ** 6 == 0 for x in range(3 ** 6)) else 0
            total *= value ** e
        elif m % q == 0:
            return Fraction(0)
        elif q % 3 == 2:
            if e % 2:
                return Fraction(0)
        elif _cube_roots_of(m, q):
            total *= e + 1
        else:
            # pi^i pibar^(e-i) contributes zeta^(2i-e) for a primitive cube root zeta
            counts = [0, 0, 0]
            for i in range(e + 1):
                counts[(2 * i - e) % 3] += 1
            total *= counts[0] - Fraction(counts[1] + counts[2], 2)
    return total


@pytest.mark.parametrize("m", [2, 10])
def test_theta_series_counts_cube_roots_at_primes(m):
    g = g_rho_coeffs(m, 2000)
    for q in primerange(5, 2000):
        if m % q == 0:
            assert g[q] == 0
        else:
            assert g[q] == _cube_roots_of(m, q) - 1


@pytest.mark.parametrize("m", [2, 10])
def test_theta_series_is_multiplicative(m):
    g = g_rho_coeffs(m, 2000)
    for q in primerange(5, 45):
        if m % q:
            assert g[q * q] == g[q] * g[q] - eps3(q)
    assert g[7 * 13] == g[7] * g[13]
    assert g[1] == 1


def test_eisenstein_series_of_eps3():
    g = g_sigma_coeffs(12)
    assert g[0] == Fraction(1, 6)
    assert [g[n] for n in range(1, 8)] == [1, 0, 1, 1, 0, 0, 2]
    assert g.level == 3
    assert g.character == EPS3


def test_ramification_at_three():
    assert ramification_at_3(10) == (1, True)
    assert ramification_at_3(17) == (1, True)
    assert ramification_at_3(2) == (3, False)
    assert euler_data(2).level_rho == 4 * 27
    assert euler_data(10).level_rho == 300


def test_cubic_residue_class():
    assert cubic_residue_class(2, 31) == "trivial"
    assert cubic_residue_class(2, 7) == "nontrivial"
    with pytest.raises(BadPrime):
        cubic_residue_class(2, 5)


def test_local_factors_at_three():
    assert local_factor_rho(2, 3) == (1,)
    assert local_factor_rho(10, 3) == (1, -1)
    assert local_factor_sigma(3) == (1, -1)
    assert local_factor_sigma(5) == (1, 0, -1)
    assert local_factor_rho(2, 5) == (1, 0, -1)


def test_tensor_of_degree_two_factors():
    # (1 - aX)(1 - bX) with a = 1, b = 2 against (1 - X)(1 + X)
    assert tensor_local_factor((1, -3, 2), (1, 0, -1)) == (1, 0, -5, 0, 4)
    assert tensor_local_factor((1, -1), (1, -3, 2)) == (1, -3, 2)
    assert tensor_local_factor((1,), (1, -3, 2)) == (1,)


@pytest.mark.parametrize("m", [2, 5, 7, 10, 11, 17])
def test_rho_and_sigma_are_congruent_mod_three(m):
    assert trace_congruence_defect(m, 1000) is None


@pytest.mark.slow
@pytest.mark.parametrize("m", [2, 5, 7, 10, 11, 17])
def test_rho_and_sigma_are_congruent_mod_three_up_to_ten_thousand(m):
    assert trace_congruence_defect(m, 10 ** 4) is None


def test_bad_m_is_refused():
    for m in (1, 3, 8, 12):
        with pytest.raises(ValueError):
            euler_data(m)


@pytest.mark.parametrize("m", [2, 10, 17, 19])
def test_coefficients_match_the_ideal_enumeration(m):
    g = g_rho_coeffs(m, 400)
    assert [g[n] for n in range(1, 401)] == [_ideal_sum(m, n) for n in range(1, 401)]


@pytest.mark.slow
@pytest.mark.parametrize("m", [2, 10])
def test_coefficients_match_the_ideal_enumeration_up_to_2000(m):
    g = g_rho_coeffs(m, 2000)
    assert [g[n] for n in range(1, 2001)] == [_ideal_sum(m, n) for n in range(1, 2001)]


@pytest.mark.parametrize("m", [10, 17, 19, 26, 28])
def test_prime_above_three_splits_when_unramified(m):
    assert ramification_at_3(m)[1]
    assert g_rho_coeffs(m, 3)[3] == 1 == _ideal_sum(m, 3)
