"""Data attached to m: the cubic character of Q(mu_3, m^(1/3))/Q(mu_3) and its theta series.

rho is the two-dimensional Artin representation induced from the cubic
character chi_m of K = Q(sqrt(-3)); sigma = 1 + eps3 is the reducible
representation it is congruent to mod 3. Their weight-one forms are g_rho
(a theta series) and g_sigma = E_1(eps3).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import partial
from typing import Callable

from sympy import factorint, isprime

from .errors import BadPrime
from .series import DirichletCharacter, QExpansion, divisors, iota
from .ellcurve import smallest_prime_factors, is_cube_free

logger = logging.getLogger(__name__)

TRIVIAL = "trivial"
NONTRIVIAL = "nontrivial"

EPS3 = DirichletCharacter.eps3()


def eps3(n: int) -> int:
    """The quadratic character of conductor 3 as an integer."""
    return (0, 1, -1)[n % 3]


def _check_m(m: int) -> None:
    if m < 2 or m % 3 == 0 or not is_cube_free(m):
        raise ValueError(f"m must be a cube-free integer > 1 prime to 3, got {m}")


def cubic_residue_class(m: int, q: int) -> str:
    """Whether m is a cube modulo a prime q = 1 mod 3.

    Raises:
        BadPrime: If q is not a prime congruent to 1 mod 3 or q divides 3m.
    """
    if not isprime(q) or q % 3 != 1:
        raise BadPrime(f"{q} is not a prime congruent to 1 mod 3")
    if m % q == 0:
        raise BadPrime(f"{q} divides m = {m}")
    return TRIVIAL if pow(m, (q - 1) // 3, q) == 1 else NONTRIVIAL


def ramification_at_3(m: int) -> tuple[int, bool]:
    """(r, unramified): chi_m is unramified at 3 exactly when m = +-1 mod 9."""
    unramified = m % 9 in (1, 8)
    return (1 if unramified else 3), unramified


def level_rho(m: int) -> int:
    r, _ = ramification_at_3(m)
    return m * m * 3 ** r


def _prime_coefficient_rho(m: int, r: int, q: int) -> int:
    if q == 3:
        return 1 if r == 1 else 0
    if m % q == 0 or q % 3 == 2:
        return 0
    return 2 if cubic_residue_class(m, q) == TRIVIAL else -1


def g_rho_coeffs(m: int, n_max: int) -> QExpansion:
    """Theta series of chi_m: weight 1, level m^2 3^r, nebentypus eps3."""
    _check_m(m)
    r, _ = ramification_at_3(m)
    bad = 3 * m
    an = [0] * (n_max + 1)
    if n_max >= 1:
        an[1] = 1
    spf = smallest_prime_factors(n_max)
    for n in range(2, n_max + 1):
        q = spf[n]
        rest = n
        while rest % q == 0:
            rest //= q
        if rest > 1:
            an[n] = an[rest] * an[n // rest]
        elif n == q:
            an[n] = _prime_coefficient_rho(m, r, q)
        elif bad % q == 0:
            an[n] = an[q] * an[n // q]
        else:
            an[n] = an[q] * an[n // q] - eps3(q) * an[n // (q * q)]
    return QExpansion.from_list(an, 1, level_rho(m), EPS3)


def g_sigma_coeffs(n_max: int) -> QExpansion:
    """E_1(eps3): constant term L(0, eps3)/2 = 1/6, a(n) = sum over d | n of eps3(d)."""
    an = [Fraction(1, 6)] + [sum(eps3(d) for d in divisors(n)) for n in range(1, n_max + 1)]
    return QExpansion.from_list(an, 1, 3, EPS3)


def local_factor_rho(m: int, q: int) -> tuple[int, ...]:
    """Euler polynomial P_q(rho, X), constant term first."""
    r, _ = ramification_at_3(m)
    if q == 3:
        return (1, -1) if r == 1 else (1,)
    if m % q == 0:
        return (1,)
    return (1, -_prime_coefficient_rho(m, r, q), eps3(q))


def local_factor_sigma(q: int) -> tuple[int, ...]:
    """P_q(sigma, X) = (1 - X)(1 - eps3(q) X)."""
    if q == 3:
        return (1, -1)
    e = eps3(q)
    return (1, -(1 + e), e)


def tensor_local_factor(f: tuple, g: tuple) -> tuple:
    """Euler polynomial of a tensor product from the two factors (degrees at most 2)."""
    if len(f) == 1 or len(g) == 1:
        return (1,)
    if len(f) == 2:
        alpha = -f[1]
        return tuple(c * alpha ** i for i, c in enumerate(g))
    if len(g) == 2:
        return tensor_local_factor(g, f)
    if len(f) == 3 and len(g) == 3:
        a, b = -f[1], f[2]
        c, d = -g[1], g[2]
        return (1, -a * c, a * a * d + b * c * c - 2 * b * d, -a * b * c * d, b * b * d * d)
    raise ValueError(f"tensor of local factors of degrees {len(f) - 1} and {len(g) - 1} is not supported")


def twisted_local_factor(curve_factor: tuple, m: int, q: int, side: str) -> tuple:
    """P_q(E x rep, X) for rep in {'rho', 'sigma'}."""
    rep = local_factor_rho(m, q) if side == "rho" else local_factor_sigma(q)
    return tensor_local_factor(curve_factor, rep)


def evaluate_polynomial(coefficients: tuple, x) -> Fraction:
    return sum((Fraction(c) * Fraction(x) ** i for i, c in enumerate(coefficients)), Fraction(0))


@dataclass(frozen=True)
class ArtinTwistData:
    """Everything attached to m that the congruence needs."""

    m: int
    r: int
    level_rho: int
    P3_rho: tuple[int, ...]
    P3_sigma: tuple[int, ...]
    v3_level_rho: int
    v3_level_sigma: int
    g_rho: Callable[[int], QExpansion]
    g_sigma: Callable[[int], QExpansion]

    @property
    def unramified(self) -> bool:
        return self.r == 1

    @property
    def level_sigma_twist(self) -> int:
        """Level of g_sigma|iota_m."""
        return 3 * self.m * self.m

    def g(self, side: str, n_max: int) -> QExpansion:
        """g_rho, or g_sigma with the Euler factors at m removed."""
        if side == "rho":
            return self.g_rho(n_max)
        if side == "sigma":
            return iota(self.g_sigma(n_max), self.m)
        raise ValueError(f"side must be 'rho' or 'sigma', got {side!r}")


def euler_data(m: int) -> ArtinTwistData:
    _check_m(m)
    r, _ = ramification_at_3(m)
    data = ArtinTwistData(
        m=m,
        r=r,
        level_rho=level_rho(m),
        P3_rho=local_factor_rho(m, 3),
        P3_sigma=local_factor_sigma(3),
        v3_level_rho=r,
        v3_level_sigma=1,
        g_rho=partial(g_rho_coeffs, m),
        g_sigma=g_sigma_coeffs,
    )
    logger.debug("m=%d: r=%d, level %d, primes of m %s", m, r, data.level_rho, sorted(factorint(m)))
    return data


def trace_congruence_defect(m: int, n_max: int) -> int | None:
    """First n prime to 3 where a(n, g_rho) and a(n, g_sigma|iota_m) differ mod 3."""
    data = euler_data(m)
    rho, sigma = data.g("rho", n_max), data.g("sigma", n_max)
    for n in range(1, n_max + 1):
        if n % 3 and (rho[n] - sigma[n]) % 3 != 0:
            return n
    return None
