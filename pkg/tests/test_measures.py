from fractions import Fraction

import mpmath as mp
import pytest

from ftcl.artin import EPS3, euler_data
from ftcl.ellcurve import an_list, curve_from_label, hypothesis_filter, minimal_model
from ftcl.errors import ComputationFailure, ParityViolation, RecognitionFailure
from ftcl.lfun import TauTerm
from ftcl.measures import (
    AnalyticSide,
    ArithmeticMeasure,
    CharacterOnZ3Star,
    CongruenceVerdict,
    InterpolationResult,
    congruence_setup,
    congruence_verdict,
    descend_level,
    eisenstein_EmM,
    eval_form_measure,
    exact_measure_value,
    generalized_bernoulli,
    hida_linear_form,
    hida_linear_form_exact,
    interpolation_check,
    interpolation_rhs,
    is_integral,
    katz_evaluation,
    l_value_nonpositive,
    ordinary_project_form,
    reconcile_interpolation,
    relaxation_factor,
    stabilized_target_form,
    unit_free_ratio,
    unit_root_idempotent,
)
from ftcl.modsym import build_space, congruence_projector, target_system
from ftcl.rings import OMEGA, Padic3, hensel_unit_root
from ftcl.series import PADIC, DirichletCharacter, QExpansion, QuadraticOrderElem, p_stabilize

TRIVIAL = DirichletCharacter.trivial()


def test_bernoulli_numbers():
    assert generalized_bernoulli(TRIVIAL, 1) == Fraction(-1, 2)
    assert generalized_bernoulli(TRIVIAL, 2) == Fraction(1, 6)
    assert generalized_bernoulli(EPS3, 1) == Fraction(-1, 3)
    assert generalized_bernoulli(EPS3, 2) == 0
    assert l_value_nonpositive(TRIVIAL, 2) == Fraction(-1, 12)
    assert l_value_nonpositive(EPS3, 1) == Fraction(1, 3)


def test_weight_one_eisenstein_series_of_eps3():
    E = eisenstein_EmM(1, 3, EPS3, 10)
    assert E[0] == Fraction(1, 6)
    assert E[1] == 1
    assert E[4] == 1
    assert E[2] == 0
    assert E.level == 3


def test_eisenstein_parity_is_enforced():
    with pytest.raises(ParityViolation):
        eisenstein_EmM(1, 1, TRIVIAL, 5)
    with pytest.raises(ParityViolation):
        eisenstein_EmM(2, 1, EPS3, 5)


def test_katz_constant_terms():
    assert katz_evaluation(1, 1, EPS3, 10)[0] == 0
    E = katz_evaluation(2, 1, TRIVIAL, 10)
    # (1 - 3) zeta(-1) / 2
    assert E[0] == Fraction(1, 12)
    assert E[2] == 3
    assert E[3] == 0


def test_characters_of_Z3_units():
    assert CharacterOnZ3Star.trivial().label() == "0,1,0"
    quadratic = CharacterOnZ3Star.parse("1,1,0")
    assert quadratic == CharacterOnZ3Star.tame_quadratic()
    assert quadratic.conductor == 3
    assert quadratic(2) == -1
    wild = CharacterOnZ3Star.parse("0,2,1")
    assert wild.is_wild
    assert wild.conductor == 9
    assert wild(4) == OMEGA
    assert wild(2) == OMEGA * OMEGA
    assert wild(3) == 0
    assert wild.power(3) == CharacterOnZ3Star(0, 2, 0)


@pytest.mark.parametrize("text", ["x", "0,1", "2,1,0", "0,2,3"])
def test_malformed_characters_are_refused(text):
    with pytest.raises(ValueError):
        CharacterOnZ3Star.parse(text)


def test_form_measure_drops_multiples_of_three(curve_11a1):
    f = QExpansion.from_list(an_list(curve_11a1, 20), 2, 11)
    value = eval_form_measure(f, CharacterOnZ3Star.tame_quadratic())
    assert value[3] == 0
    assert value[2] == -f[2]
    assert value[4] == f[4]
    assert value.level == 99


def test_measure_evaluations_are_memoised():
    g = euler_data(2).g("sigma", 30)
    measure = ArithmeticMeasure.form_measure(g)
    phi = CharacterOnZ3Star.trivial()
    assert measure.evaluate(phi, 20) is measure.evaluate(phi, 20)
    with pytest.raises(ValueError):
        ArithmeticMeasure.convolution(ArithmeticMeasure.katz(4), 4, 2)


def test_integrality():
    assert is_integral(euler_data(2).g("rho", 40))
    assert not is_integral(euler_data(2).g("sigma", 40))


def test_unit_root_idempotent_separates_the_roots():
    M = 15
    e = unit_root_idempotent([3, 1, 1], M)
    u = hensel_unit_root(-1, M)
    w = -u - 1
    assert e[0] + e[1] * u == 1
    assert (e[0] + e[1] * w).is_zero()


def test_ordinary_projection_of_a_level_11_form(curve_11a1):
    M = 20
    f = QExpansion.from_list(an_list(curve_11a1, 400), 2, 11)
    projected = ordinary_project_form(f, M)
    assert projected.ring == PADIC
    assert projected.level == 33
    u = hensel_unit_root(-1, M)
    scale = u / (u * 2 + 1)
    f0 = p_stabilize(f)
    for n in range(1, 60):
        assert projected[n] == scale * f0[n].to_padic(M)


def test_descend_level():
    g = QExpansion.from_list(range(30), 2, 99)
    lowered = descend_level(g, 2)
    assert lowered.level == 33
    assert lowered[2] == 6
    with pytest.raises(ValueError):
        descend_level(g, 4)


@pytest.fixture(scope="module")
def projector_33():
    return congruence_projector(build_space(33, 0), target_system(curve_from_label("11a1"), 33), 20)


def test_hida_linear_form_of_the_target(projector_33):
    target = target_system(curve_from_label("11a1"), 33)
    h = stabilized_target_form(target, projector_33.bound)
    assert hida_linear_form_exact(h, projector_33) == 1
    assert hida_linear_form(h, projector_33, c=1, precision=20) == 1
    padic = h.map(lambda c: c.to_padic(20), PADIC)
    assert hida_linear_form(padic, projector_33, c=1, precision=20) == 1


def test_verdict_on_synthetic_values():
    M = 10
    holds = CongruenceVerdict(Padic3.from_int(4, M), Padic3.from_int(1, M))
    assert holds.integral and holds.difference_valuation == 1 and holds.holds
    fails = CongruenceVerdict(Padic3.from_int(5, M), Padic3.from_int(1, M))
    assert fails.difference_valuation == 0 and not fails.holds
    poles = CongruenceVerdict(Padic3.from_rational(Fraction(1, 3), M), Padic3.from_int(1, M))
    assert not poles.integral and poles.difference_valuation is None and not poles.holds


def test_relaxation_factor_over_no_primes(curve_11a1):
    assert relaxation_factor(curve_11a1, 2, "rho", []) == 1


def test_interpolation_check_is_relative():
    value = QuadraticOrderElem(Fraction(3), Fraction(1), -1)
    exact = value.to_complex(0)
    assert interpolation_check(value, exact) == 0
    assert abs(interpolation_check(value, 2 * exact) - mp.mpf(1) / 2) < mp.mpf(10) ** -12
    side = AnalyticSide("rho", 2, mp.mpc(1), mp.mpc(2), (TauTerm(mp.mpc(1), 1),), (), mp.mpf(1))
    assert unit_free_ratio(value, value, side, side, exact) < mp.mpf(10) ** -12


def test_wild_characters_are_refused_by_the_exact_route():
    data = euler_data(2)
    with pytest.raises(ComputationFailure, match="Gamma_1"):
        exact_measure_value(None, data, "rho", CharacterOnZ3Star.parse("0,2,1"))


@pytest.mark.slow
def test_11a1_congruence_for_m_2():
    E = curve_from_label("11a1")
    data = euler_data(2)
    setup = congruence_setup(E, 2, 20)
    assert setup.level == 132
    assert setup.t == 44
    rho = exact_measure_value(setup, data, "rho").to_padic(20)
    sigma = exact_measure_value(setup, data, "sigma").to_padic(20)
    verdict = congruence_verdict(setup, rho, sigma)
    assert verdict.integral
    assert verdict.holds


def test_value_does_not_depend_on_the_level_it_is_read_at(projector_33):
    # a U_3-eigenform read at level 3^beta L, brought down by U_3^(beta-1) and rescaled by theta^(1-beta)
    target = target_system(curve_from_label("11a1"), 33)
    bound = projector_33.bound
    an = an_list(curve_from_label("11a1"), 9 * bound + 1)
    f0 = stabilized_target_form(target, 9 * bound, an)
    theta = QuadraticOrderElem.theta(target.a3)
    for beta in (1, 2, 3):
        h = QExpansion(f0.coefficients, 2, 11 * 3 ** beta, f0.character, f0.ring)
        lowered = descend_level(h, beta)
        assert lowered.level == 33
        assert hida_linear_form_exact(lowered, projector_33) * theta ** (1 - beta) == 1


def test_relaxed_mode_over_a_prime_with_3_dividing_i_q():
    # Delta = -7^3 11^2, nonsplit at 7
    E = minimal_model([1, 1, 0, 4, 11])
    assert E.conductor == 77
    report = hypothesis_filter(E, 2)
    assert report.failures == ["i_q_prime_to_3"]
    assert report.relaxable
    assert report.n_diff == (7,)
    # P_7 at X = 1 is 1 - X + X^2 for rho and (1 + X)^2 for sigma
    rho = relaxation_factor(E, 2, "rho", report.n_diff)
    sigma = relaxation_factor(E, 2, "sigma", report.n_diff)
    assert (rho, sigma) == (1, 4)
    assert (rho - sigma) % 3 == 0


def test_relaxed_factors_enter_the_verdict():
    E = minimal_model([1, 1, 0, 4, 11])

    class Setup:
        curve, m, precision, t = E, 2, 10, 1
        u = Padic3.from_int(1, 10)

    plain = congruence_verdict(Setup, Padic3.from_int(2, 10), Padic3.from_int(1, 10))
    assert not plain.holds
    relaxed = congruence_verdict(Setup, Padic3.from_int(2, 10), Padic3.from_int(1, 10), (7,))
    assert relaxed.relaxed_primes == (7,)
    # 2 * 1 against 1 * 4
    assert relaxed.difference_valuation == 0
    assert congruence_verdict(Setup, Padic3.from_int(4, 10), Padic3.from_int(1, 10), (7,)).holds


def test_unramified_twist_parameter():
    data = euler_data(10)
    assert data.unramified
    assert data.r == 1
    assert data.level_rho == 300


def test_interpolation_rhs_constant():
    side = AnalyticSide("rho", 2, mp.mpc(1), mp.mpc(2), (TauTerm(mp.mpc(1), 1),), (), mp.mpf(1))
    # 3 * D / (8 pi^2 i^3 * pairing / (8 pi^2 i)) with D = 2 and pairing 2
    assert abs(interpolation_rhs(side, 1, 1, 1, 2) + 3) < mp.mpf(10) ** -12


def test_interpolation_result_normalizes_across_sides():
    exact_rho, exact_sigma = mp.mpc(3, 1), mp.mpc(-1, 2)
    scale = mp.mpc(0, 5)
    consistent = InterpolationResult(exact_rho, exact_sigma, exact_rho / scale, exact_sigma / scale)
    assert abs(consistent.normalization_rho - scale) < mp.mpf(10) ** -12
    assert consistent.residual_rho < mp.mpf(10) ** -12
    assert consistent.residual_sigma < mp.mpf(10) ** -12

    skewed = InterpolationResult(exact_rho, exact_sigma, exact_rho / scale, exact_sigma * mp.mpf("1.001") / scale)
    assert abs(skewed.residual_rho - mp.mpf("0.001")) < mp.mpf(10) ** -5
    assert skewed.residual_sigma > mp.mpf(10) ** -4

    with pytest.raises(RecognitionFailure):
        InterpolationResult(exact_rho, mp.mpc(0), exact_rho, exact_sigma)


@pytest.mark.slow
def test_11a1_interpolation_for_m_2():
    E = curve_from_label("11a1")
    data = euler_data(2)
    setup = congruence_setup(E, 2, 20)
    assert setup.interpolation_t == 44 * 11 * 2
    rho = exact_measure_value(setup, data, "rho")
    sigma = exact_measure_value(setup, data, "sigma")
    result = reconcile_interpolation(setup, data, rho, sigma, digits=30)
    assert result.residual_rho < mp.mpf(10) ** -10
    assert result.residual_sigma < mp.mpf(10) ** -10
