import random
from fractions import Fraction

import mpmath as mp
import pytest

from ftcl.errors import NoRecognition, NotOrdinary, PrecisionExhausted
from ftcl.rings import (
    OMEGA,
    SQRT_M3,
    CycloElem,
    Padic3,
    RamifiedPadic3,
    embed_3adic,
    hensel_unit_root,
    padic_roots,
    recognize_quadomega,
    recognize_rational,
    v3,
)


def test_v3_counts_powers_of_three():
    assert v3(18) == 2
    assert v3(Fraction(1, 9)) == -2
    assert v3(Fraction(10, 7)) == 0
    with pytest.raises(ValueError):
        v3(0)


def test_padic_from_rational_inverts_the_denominator():
    half = Padic3.from_rational(Fraction(1, 2), 5)
    assert half.valuation == 0
    assert half.unit == 122
    assert half * 2 == 1


def test_padic_digits_render_base_three():
    assert Padic3.from_int(5, 4).digits() == "12 + O(3^4)"
    assert Padic3.from_int(9, 4).digits() == "1e2 + O(3^4)"
    assert Padic3.zero(4).digits() == "O(3^4)"


def test_padic_precision_is_tracked_through_arithmetic():
    x = Padic3.from_int(3, 6)
    assert (x * x).valuation == 2
    assert (x * x).precision == 7
    assert Padic3.from_int(81, 4).is_zero()
    assert Padic3.from_int(7, 5).residue(1) == 1


def test_padic_inverse_of_zero_is_refused():
    with pytest.raises(PrecisionExhausted):
        Padic3.zero(5).inverse()
    with pytest.raises(PrecisionExhausted):
        Padic3.from_int(1, 3).residue(5)


def test_hensel_unit_root_solves_the_frobenius_polynomial():
    u = hensel_unit_root(-1, 20)
    assert (u * u + u + 3).is_zero()
    assert u.valuation == 0
    with pytest.raises(NotOrdinary):
        hensel_unit_root(3, 10)


def test_omega_is_a_primitive_cube_root_of_unity():
    assert OMEGA ** 3 == 1
    assert (OMEGA * OMEGA + OMEGA + 1).is_zero()
    assert OMEGA.conjugate() == OMEGA * OMEGA


def test_cyclo_inverse_and_lift():
    x = OMEGA * 3 + Fraction(1, 2)
    assert x * x.inverse() == 1
    zeta9 = CycloElem.root_of_unity(9, 1)
    assert zeta9 ** 3 == OMEGA


def test_sqrt_minus_three_embeds_complexly():
    z = SQRT_M3.to_complex()
    assert abs(z - mp.mpc(0, mp.sqrt(3))) < mp.mpf(10) ** -10
    assert SQRT_M3.quadratic_parts() == (Fraction(0), Fraction(1))


def test_recognize_rational_recovers_small_fractions():
    with mp.workdps(30):
        assert recognize_rational(mp.mpf(1) / 5, 100) == Fraction(1, 5)
        with pytest.raises(NoRecognition):
            recognize_rational(mp.pi, 100)


def test_recognize_quadomega_recovers_a_plus_b_sqrt_minus_three():
    with mp.workdps(30):
        z = mp.mpf(1) / 2 + mp.mpc(0, mp.sqrt(3)) / 3
        assert recognize_quadomega(z, 50) == CycloElem.from_rational(Fraction(1, 2), 3) + SQRT_M3 * Fraction(1, 3)


def test_embedded_sqrt_minus_three_squares_to_minus_three():
    pi = embed_3adic(SQRT_M3, 10)
    assert isinstance(pi, RamifiedPadic3)
    assert pi * pi == -3
    assert pi.valuation == 1


def test_padic_roots_finds_both_square_roots_of_seven():
    roots = padic_roots([-7, 0, 1], 10)
    assert len(roots) == 2
    for root in roots:
        assert root * root == 7


def test_valuation_at_lambda_sees_odd_powers():
    lam = 1 - OMEGA
    # the power-basis coefficients of 1 - omega are units, yet lambda^2 = -3 omega
    assert lam.valuation3() == Fraction(1, 2)
    assert (lam ** 3).valuation3() == Fraction(3, 2)
    assert (lam * lam).valuation3() == 1
    assert CycloElem.from_rational(Fraction(2, 9), 3).valuation3() == -2
    assert CycloElem.root_of_unity(9, 1).valuation3() == 0
    assert (1 - CycloElem.root_of_unity(9, 1)).valuation3() == Fraction(1, 6)
    assert CycloElem.from_rational(0, 3).valuation3() is None
    with pytest.raises(ValueError, match="splits"):
        CycloElem.root_of_unity(8, 1).valuation3()


def test_cyclo_norm():
    assert (1 - OMEGA).norm() == 3
    assert SQRT_M3.norm() == 3
    assert CycloElem.from_rational(2, 9).norm() == 2 ** 6
    assert (1 - CycloElem.root_of_unity(9, 1)).norm() == 3


def _rational(rng: random.Random) -> Fraction:
    return Fraction(rng.randint(-1000, 1000), rng.choice([1, 2, 3, 5, 9, 7, 27]))


def _nonzero_rational(rng: random.Random) -> Fraction:
    while (x := _rational(rng)) == 0:
        pass
    return x


def _cyclo(rng: random.Random, order: int) -> CycloElem:
    degree = CycloElem.from_rational(0, order).degree
    return CycloElem(order, tuple(_rational(rng) for _ in range(degree)))


@pytest.mark.parametrize("seed", range(5))
def test_padic_arithmetic_follows_the_rationals(seed):
    rng = random.Random(seed)
    M = 20
    for _ in range(20):
        a, b, c = _rational(rng), _rational(rng), _nonzero_rational(rng)
        x, y, z = (Padic3.from_rational(t, M) for t in (a, b, c))
        assert x + y == Padic3.from_rational(a + b, M)
        assert x * y == Padic3.from_rational(a * b, M)
        assert x / z == Padic3.from_rational(a / c, M)
        assert (x + y) * z == x * z + y * z
        assert (x * y) * z == x * (y * z)
        assert x - x == 0
        assert z * z.inverse() == 1


@pytest.mark.parametrize("seed", range(5))
def test_ramified_embedding_is_a_field_homomorphism(seed):
    rng = random.Random(seed)
    M = 20
    for _ in range(10):
        a = CycloElem.from_rational(_rational(rng), 3) + SQRT_M3 * _rational(rng)
        b = CycloElem.from_rational(_rational(rng), 3) + SQRT_M3 * _nonzero_rational(rng)
        x, y = embed_3adic(a, M), embed_3adic(b, M)
        assert x + y == embed_3adic(a + b, M)
        assert x * y == embed_3adic(a * b, M)
        assert x / y == embed_3adic(a / b, M)
        assert y.valuation == 2 * b.valuation3()
        if not a.is_zero():
            assert (x * y).valuation == x.valuation + y.valuation


@pytest.mark.parametrize("seed", range(5))
def test_cyclotomic_field_axioms(seed):
    rng = random.Random(seed)
    for order in (3, 9):
        for _ in range(5):
            x, y, z = (_cyclo(rng, order) for _ in range(3))
            assert (x + y) + z == x + (y + z)
            assert (x * y) * z == x * (y * z)
            assert x * y == y * x
            assert x * (y + z) == x * y + x * z
            assert (x - y) + y == x
            if not z.is_zero():
                assert z * z.inverse() == 1
                assert (x / z) * z == x
            if not x.is_zero() and not y.is_zero():
                assert (x * y).norm() == x.norm() * y.norm()
                assert (x * y).valuation3() == x.valuation3() + y.valuation3()
