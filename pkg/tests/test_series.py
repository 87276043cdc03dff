from fractions import Fraction

import pytest

from ftcl.artin import euler_data, g_rho_coeffs, g_sigma_coeffs
from ftcl.ellcurve import an_list
from ftcl.errors import NotOrdinary, RingMismatch
from ftcl.rings import OMEGA, SQRT_M3, CycloElem, Padic3, embed_3adic
from ftcl.series import (
    QUADRATIC,
    DirichletCharacter,
    QExpansion,
    QuadraticOrderElem,
    coefficient_valuation,
    divisors,
    dumps,
    hecke_T,
    iota,
    loads,
    mul,
    p_stabilize,
    termwise_congruent,
    v_operator,
)


def test_eps3_is_the_odd_character_of_conductor_three():
    eps3 = DirichletCharacter.eps3()
    assert eps3(2) == -1
    assert eps3(4) == 1
    assert eps3(3) == 0
    assert eps3.parity == -1
    assert eps3.conductor == 3
    assert (eps3 * eps3).is_trivial()


def test_character_labels_survive_a_round_trip():
    chi = DirichletCharacter.eps3().extend(12)
    assert chi.label() == "12:2:0,1,0,1"
    assert DirichletCharacter.from_label(chi.label()) == chi
    assert chi.conductor == 3
    assert chi.primitive() == DirichletCharacter.eps3()


def test_from_function_rejects_non_multiplicative_tables():
    with pytest.raises(ValueError):
        DirichletCharacter.from_function(7, 3, lambda r: 1)


def test_divisors_are_sorted():
    assert divisors(12) == [1, 2, 3, 4, 6, 12]


def test_iota_removes_euler_factors_and_raises_the_level():
    g = g_sigma_coeffs(20)
    twisted = iota(g, 2)
    assert twisted.level == 12
    assert all(twisted[n] == 0 for n in range(2, 21, 2))
    assert twisted[0] == Fraction(1, 6)
    assert twisted[7] == g[7]


def test_hecke_T2_acts_by_a2_on_11a1(curve_11a1):
    f = QExpansion.from_list(an_list(curve_11a1, 60), 2, 11)
    image = hecke_T(f, 2)
    assert image.coefficients == f.truncate(image.n_max).scale(-2).coefficients


def test_v_operator_dilates(curve_11a1):
    f = QExpansion.from_list(an_list(curve_11a1, 10), 2, 11)
    g = v_operator(f, 3)
    assert g.level == 33
    assert g[6] == f[2]
    assert g[7] == 0


def test_stabilized_form_is_a_U3_eigenform(curve_11a1):
    f = QExpansion.from_list(an_list(curve_11a1, 60), 2, 11)
    f0 = p_stabilize(f)
    assert f0.ring == QUADRATIC
    assert f0.level == 33
    theta = QuadraticOrderElem.theta(-1)
    image = hecke_T(f0, 3)
    assert image.coefficients == f0.truncate(image.n_max).scale(theta).coefficients


def test_stabilization_needs_an_ordinary_form(curve_37a1):
    f = QExpansion.from_list(an_list(curve_37a1, 12), 2, 37)
    with pytest.raises(NotOrdinary):
        p_stabilize(f)


def test_theta_satisfies_its_hecke_polynomial():
    theta = QuadraticOrderElem.theta(-1)
    assert (theta * theta + theta + 3).is_zero()
    assert (theta * theta.inverse()) == 1


def test_product_of_weight_one_forms(curve_11a1):
    g = g_sigma_coeffs(20)
    square = mul(g, g)
    assert square.weight == 2
    assert square.character.is_trivial()
    assert square[0] == Fraction(1, 36)
    assert square[1] == 2 * g[0] * g[1]


def test_mul_refuses_mixed_rings(curve_11a1):
    f = QExpansion.from_list(an_list(curve_11a1, 20), 2, 11)
    with pytest.raises(RingMismatch):
        mul(f, p_stabilize(f))


def test_theta_series_is_congruent_to_the_eisenstein_series_mod_three():
    data = euler_data(2)
    rho, sigma = data.g("rho", 300), data.g("sigma", 300)
    assert termwise_congruent(rho, sigma, 1, restrict_to_units=True) is None
    assert termwise_congruent(rho, sigma, 2, restrict_to_units=True) is not None


def test_dump_and_load_preserve_a_stabilized_form(curve_11a1):
    f0 = p_stabilize(QExpansion.from_list(an_list(curve_11a1, 15), 2, 11))
    restored = loads(dumps(f0))
    assert restored == f0
    assert loads(dumps(g_rho_coeffs(5, 30))) == g_rho_coeffs(5, 30)


def test_coefficient_valuation_in_the_ramified_field():
    lam = 1 - OMEGA
    assert coefficient_valuation(lam, 20) == Fraction(1, 2)
    assert coefficient_valuation(lam * 3, 20) == Fraction(3, 2)
    assert coefficient_valuation(embed_3adic(SQRT_M3, 20), 20) == Fraction(1, 2)
    assert coefficient_valuation(embed_3adic(SQRT_M3 * 9, 20), 20) == Fraction(5, 2)
    assert coefficient_valuation(embed_3adic(lam - lam, 20), 20) is None
    assert coefficient_valuation(Padic3.from_int(18, 20), 20) == 2
    assert coefficient_valuation(Fraction(1, 3), 20) == -1


def test_termwise_congruence_modulo_lambda():
    one = CycloElem.from_rational(1, 3)
    f = QExpansion.from_list([one * 0, one, one, one], 1, 3)
    g = QExpansion.from_list([one * 0, OMEGA, one, OMEGA * OMEGA], 1, 3)
    # 1 - omega and 1 - omega^2 are associates of lambda
    assert termwise_congruent(f, g, Fraction(1, 2)) is None
    assert termwise_congruent(f, g, 1) == 1
    assert termwise_congruent(f, g, 1, restrict_to_units=True) == 1
