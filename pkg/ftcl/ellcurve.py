"""Elliptic curves over Q: minimal models, local data, a_n, hypotheses, periods.

Local data comes from Tate's algorithm run prime by prime; the same pass
detects non-minimal models and rescales them, so minimal_model and the
conductor computation share one implementation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import mpmath as mp
import numpy as np
from sympy import Poly, QQ, factorint, symbols

from .config import config
from .errors import BadReduction, NotOrdinary, SingularCurve
from .rings import Padic3, hensel_unit_root

logger = logging.getLogger(__name__)

_x = symbols("x")

GOOD = "good"
SPLIT = "split-mult"
NONSPLIT = "nonsplit-mult"
ADDITIVE = "additive"


def b_invariants(a: tuple[int, ...]) -> tuple[int, int, int, int]:
    a1, a2, a3, a4, a6 = a
    b2 = a1 * a1 + 4 * a2
    b4 = 2 * a4 + a1 * a3
    b6 = a3 * a3 + 4 * a6
    b8 = a1 * a1 * a6 + 4 * a2 * a6 - a1 * a3 * a4 + a2 * a3 * a3 - a4 * a4
    return b2, b4, b6, b8


def c_invariants(a: tuple[int, ...]) -> tuple[int, int, int]:
    b2, b4, b6, b8 = b_invariants(a)
    c4 = b2 * b2 - 24 * b4
    c6 = -b2 ** 3 + 36 * b2 * b4 - 216 * b6
    disc = -b2 * b2 * b8 - 8 * b4 ** 3 - 27 * b6 * b6 + 9 * b2 * b4 * b6
    return c4, c6, disc


def _transform(a: tuple[int, ...], r: int, s: int, t: int) -> tuple[int, ...]:
    """Change of variables x = x' + r, y = y' + s x' + t."""
    a1, a2, a3, a4, a6 = a
    return (
        a1 + 2 * s,
        a2 - s * a1 + 3 * r - s * s,
        a3 + r * a1 + 2 * t,
        a4 - s * a3 + 2 * r * a2 - (t + r * s) * a1 + 3 * r * r - 2 * s * t,
        a6 + r * a4 + r * r * a2 + r ** 3 - t * a3 - t * t - r * t * a1,
    )


def _val(n: int, p: int) -> int:
    if n == 0:
        return 10 ** 9
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def _is_square_mod(n: int, p: int) -> bool:
    n %= p
    return n == 0 or p == 2 or pow(n, (p - 1) // 2, p) == 1


def _quadratic_roots(b: int, c: int, p: int) -> tuple[bool, bool]:
    """For Y^2 + bY - c mod p return (distinct roots, roots in F_p)."""
    if p == 2:
        distinct = b % 2 == 1
        return distinct, distinct and c % 2 == 0
    disc = (b * b + 4 * c) % p
    return disc != 0, _is_square_mod(disc, p)


def _half_root(b: int, c: int, p: int) -> int:
    """The double root of Y^2 + bY - c mod p."""
    if p == 2:
        return c % 2
    return (-b * pow(2, -1, p)) % p


def _singular_point(a: tuple[int, ...], p: int) -> tuple[int, int]:
    """Singular point of the reduction of a curve with p | disc."""
    a1, a2, a3, a4, a6 = a
    if p <= 3:
        for x in range(p):
            for y in range(p):
                f = y * y + a1 * x * y + a3 * y - x ** 3 - a2 * x * x - a4 * x - a6
                fx = a1 * y - 3 * x * x - 2 * a2 * x - a4
                fy = 2 * y + a1 * x + a3
                if f % p == 0 and fx % p == 0 and fy % p == 0:
                    return x, y
        raise ValueError(f"no singular point modulo {p}")
    b2, b4, b6, _ = b_invariants(a)
    cubic = Poly([4, b2, 2 * b4, b6], _x, modulus=p)
    common = cubic.gcd(cubic.diff(_x))
    coeffs = [int(c) % p for c in common.all_coeffs()]
    if len(coeffs) == 2:
        x0 = -coeffs[1] * pow(coeffs[0], -1, p) % p
    else:
        # triple root: common = c (x - r)^2
        x0 = -coeffs[1] * pow(2 * coeffs[0], -1, p) % p
    y0 = -(a1 * x0 + a3) * pow(2, -1, p) % p
    return x0, y0


@dataclass(frozen=True)
class LocalData:
    """Reduction data at one prime of the minimal model."""

    prime: int
    reduction: str
    i_q: int
    conductor_exponent: int
    kodaira: str
    tamagawa: int

    @property
    def a_q(self) -> int:
        """a_q for bad primes: +1 split, -1 non-split, 0 additive."""
        return {SPLIT: 1, NONSPLIT: -1}.get(self.reduction, 0)


def _cubic_roots_mod(coeffs: list[int], p: int) -> tuple[int, list[int]]:
    """Multiplicity pattern of T^3 + a T^2 + b T + c mod p: (max multiplicity, F_p-roots)."""
    poly = Poly([1] + coeffs, _x, modulus=p)
    _, factors = poly.factor_list()
    roots = []
    top = 1
    for factor, mult in factors:
        top = max(top, mult)
        if factor.degree() == 1:
            c = [int(v) % p for v in factor.all_coeffs()]
            roots.append(-c[1] * pow(c[0], -1, p) % p)
    return top, roots


def _tate(a: tuple[int, ...], p: int) -> tuple[tuple[int, ...], LocalData]:
    """Tate's algorithm at p; returns a model minimal at p and its local data."""
    while True:
        _, _, disc = c_invariants(a)
        vd = _val(disc, p)
        if vd == 0:
            return a, LocalData(p, GOOD, 0, 0, "I0", 1)
        x0, y0 = _singular_point(a, p)
        a = _transform(a, x0, 0, y0)
        a1, a2, a3, a4, a6 = a
        b2, b4, b6, b8 = b_invariants(a)

        if b2 % p != 0:
            split = _quadratic_roots(a1, a2, p)[1]
            if p == 2:
                split = a2 % 2 == 0
            tamagawa = vd if split else (2 if vd % 2 == 0 else 1)
            return a, LocalData(p, SPLIT if split else NONSPLIT, vd, 1, f"I{vd}", tamagawa)
        if _val(a6, p) < 2:
            return a, LocalData(p, ADDITIVE, vd, vd, "II", 1)
        if _val(b8, p) < 3:
            return a, LocalData(p, ADDITIVE, vd, vd - 1, "III", 2)
        if _val(b6, p) < 3:
            roots = _quadratic_roots(a3 // p, a6 // (p * p), p)[1]
            return a, LocalData(p, ADDITIVE, vd, vd - 2, "IV", 3 if roots else 1)

        if p == 2:
            s = a2 % 2
            t = 2 * ((a6 // 4) % 2)
        else:
            s = -a1 * pow(2, -1, p) % p
            t = -a3 * pow(2, -1, p * p) % (p * p)
        a = _transform(a, 0, s, t)
        a1, a2, a3, a4, a6 = a

        top, roots = _cubic_roots_mod([a2 // p, a4 // (p * p), a6 // p ** 3], p)
        if top == 1:
            return a, LocalData(p, ADDITIVE, vd, vd - 4, "I0*", 1 + len(roots))
        if top == 2:
            # move the double root to T = 0
            double = next(r for r in roots if _is_double(a, p, r))
            a = _transform(a, double * p, 0, 0)
            ix, iy, mx, my = 3, 3, p * p, p * p
            while True:
                a1, a2, a3, a4, a6 = a
                xa2, xa3, xa6 = a2 // p, a3 // my, a6 // (mx * my)
                distinct, rooted = _quadratic_roots(xa3, xa6, p)
                if distinct:
                    tamagawa = 4 if rooted else 2
                    break
                a = _transform(a, 0, 0, my * _half_root(xa3, xa6, p))
                my *= p
                iy += 1
                a1, a2, a3, a4, a6 = a
                xa2, xa4, xa6 = a2 // p, a4 // (p * mx), a6 // (p * mx * mx)
                if p == 2:
                    distinct = xa4 % 2 == 1
                    rooted = distinct and xa6 % 2 == 0
                else:
                    d = (xa4 * xa4 - 4 * xa2 * xa6) % p
                    distinct, rooted = d != 0, _is_square_mod(d, p)
                if distinct:
                    tamagawa = 4 if rooted else 2
                    break
                if p == 2:
                    r = xa6 % 2
                else:
                    r = -xa4 * pow(2 * xa2, -1, p) % p
                a = _transform(a, mx * r, 0, 0)
                mx *= p
                ix += 1
            n = ix + iy - 5
            return a, LocalData(p, ADDITIVE, vd, vd - 4 - n, f"I{n}*", tamagawa)

        # triple root
        triple = roots[0] if roots else 0
        a = _transform(a, triple * p, 0, 0)
        a1, a2, a3, a4, a6 = a
        distinct, rooted = _quadratic_roots(a3 // (p * p), a6 // p ** 4, p)
        if distinct:
            return a, LocalData(p, ADDITIVE, vd, vd - 6, "IV*", 3 if rooted else 1)
        a = _transform(a, 0, 0, p * p * _half_root(a3 // (p * p), a6 // p ** 4, p))
        a1, a2, a3, a4, a6 = a
        if _val(a4, p) < 4:
            return a, LocalData(p, ADDITIVE, vd, vd - 7, "III*", 2)
        if _val(a6, p) < 6:
            return a, LocalData(p, ADDITIVE, vd, vd - 8, "II*", 1)
        logger.debug("model not minimal at %d, rescaling", p)
        a = tuple(ai // p ** i for ai, i in zip(a, (1, 2, 3, 4, 6)))


def _is_double(a: tuple[int, ...], p: int, r: int) -> bool:
    """Whether r is the double root of T^3 + a2/p T^2 + a4/p^2 T + a6/p^3 mod p."""
    _, a2, _, a4, a6 = a
    c2, c1 = a2 // p, a4 // (p * p)
    # derivative 3T^2 + 2 c2 T + c1 vanishes at a double root
    return (3 * r * r + 2 * c2 * r + c1) % p == 0


def _kraus_connell(a: tuple[int, ...]) -> tuple[int, ...]:
    """Normalise an integral model to a1, a3 in {0, 1} and a2 in {-1, 0, 1}."""
    a1, a2, a3, _, _ = a
    s = -(a1 - a1 % 2) // 2
    big_a = a2 - s * a1 - s * s
    r = -((big_a + 1) // 3)
    big_b = a3 + r * a1
    t = -(big_b - big_b % 2) // 2
    return _transform(a, r, s, t)


@dataclass(frozen=True)
class EllipticCurveQ:
    """Global minimal Weierstrass model with local data at the bad primes."""

    a_invariants: tuple[int, int, int, int, int]
    discriminant: int
    conductor: int
    local_data: tuple[LocalData, ...]
    label: str | None = field(default=None, compare=False)

    @cached_property
    def b_invariants(self) -> tuple[int, int, int, int]:
        return b_invariants(self.a_invariants)

    @cached_property
    def c_invariants(self) -> tuple[int, int]:
        c4, c6, _ = c_invariants(self.a_invariants)
        return c4, c6

    def local(self, q: int) -> LocalData:
        for data in self.local_data:
            if data.prime == q:
                return data
        return LocalData(q, GOOD, 0, 0, "I0", 1)

    @property
    def bad_primes(self) -> list[int]:
        return [d.prime for d in self.local_data]

    def is_semistable(self) -> bool:
        return all(d.conductor_exponent <= 1 for d in self.local_data)

    @property
    def name(self) -> str:
        return self.label or "[" + ",".join(str(c) for c in self.a_invariants) + "]"


def minimal_model(a_invariants, label: str | None = None) -> EllipticCurveQ:
    """Global minimal model (Laska-Kraus-Connell reduced) with local data.

    Raises:
        SingularCurve: If the discriminant vanishes.
    """
    a = tuple(int(c) for c in a_invariants)
    if len(a) != 5:
        raise ValueError(f"expected five a-invariants, got {len(a)}")
    _, _, disc = c_invariants(a)
    if disc == 0:
        raise SingularCurve(f"the curve {list(a)} has zero discriminant")
    for p in sorted(factorint(abs(disc))):
        a, _ = _tate(a, p)
    a = _kraus_connell(a)
    _, _, disc = c_invariants(a)
    local = []
    for p in sorted(factorint(abs(disc))):
        _, data = _tate(a, p)
        local.append(data)
    conductor = math.prod(d.prime ** d.conductor_exponent for d in local)
    return EllipticCurveQ(a, disc, conductor, tuple(local), label)


def _count_affine_points(a: tuple[int, ...], q: int) -> int:
    a1, a2, a3, a4, a6 = (c % q for c in a)
    if q == 2:
        return sum(
            1 for x in range(2) for y in range(2)
            if (y * y + a1 * x * y + a3 * y - x ** 3 - a2 * x * x - a4 * x - a6) % 2 == 0
        )
    xs = np.arange(q, dtype=np.int64)
    x2 = xs * xs % q
    x3 = x2 * xs % q
    rhs = (x3 + a2 * x2 % q + a4 * xs % q + a6) % q
    lin = (a1 * xs + a3) % q
    disc = (lin * lin % q + 4 * rhs) % q
    squares = np.zeros(q, dtype=bool)
    squares[xs * xs % q] = True
    chi = np.where(disc == 0, 0, np.where(squares[disc], 1, -1))
    return int(q + chi.sum())


def ap(E: EllipticCurveQ, q: int) -> int:
    """a_q = q + 1 - #E(F_q) by enumeration.

    Raises:
        BadReduction: If q divides the conductor.
    """
    if E.conductor % q == 0:
        data = E.local(q)
        raise BadReduction(f"{q} divides the conductor {E.conductor}: {data.reduction}, a_{q} = {data.a_q}")
    if q > config.point_count_bound:
        raise ValueError(f"q = {q} exceeds the point counting bound {config.point_count_bound}")
    value = q - _count_affine_points(E.a_invariants, q)
    if value * value > 4 * q:
        raise ArithmeticError(f"Hasse bound violated at {q}: a_q = {value}")
    return value


def a_prime(E: EllipticCurveQ, q: int) -> int:
    """a_q for any prime: point count at good primes, local data at bad ones."""
    if E.conductor % q == 0:
        return E.local(q).a_q
    return ap(E, q)


def smallest_prime_factors(bound: int) -> list[int]:
    spf = list(range(bound + 1))
    for i in range(2, math.isqrt(bound) + 1):
        if spf[i] == i:
            for j in range(i * i, bound + 1, i):
                if spf[j] == j:
                    spf[j] = i
    return spf


def an_list(E: EllipticCurveQ, bound: int) -> list[int]:
    """[a(0)=0, a(1), ..., a(bound)] by multiplicativity and the Hecke recursion."""
    an = [0] * (bound + 1)
    if bound >= 1:
        an[1] = 1
    spf = smallest_prime_factors(bound)
    for n in range(2, bound + 1):
        p = spf[n]
        m, k = n, 0
        while m % p == 0:
            m //= p
            k += 1
        if m > 1:
            an[n] = an[m] * an[n // m]
            continue
        # n = p^k
        if k == 1:
            an[n] = a_prime(E, p)
        elif E.conductor % p == 0:
            an[n] = an[p] * an[n // p]
        else:
            an[n] = an[p] * an[n // p] - p * an[n // (p * p)]
    return an


def local_factor(E: EllipticCurveQ, q: int) -> tuple[int, ...]:
    """Coefficients of the Euler polynomial P_q(X), constant term first."""
    if E.conductor % q == 0:
        a_q = E.local(q).a_q
        return (1, -a_q) if a_q else (1,)
    return (1, -ap(E, q), q)


def division_polynomial_3(E: EllipticCurveQ) -> Poly:
    b2, b4, b6, b8 = E.b_invariants
    return Poly([3, b2, 3 * b4, 3 * b6, b8], _x, domain=QQ)


def has_rational_3_isogeny(E: EllipticCurveQ) -> bool:
    """Rational root of psi_3, i.e. a Galois-stable subgroup of order 3."""
    _, factors = division_polynomial_3(E).factor_list()
    return any(factor.degree() == 1 for factor, _ in factors)


def is_cube_free(m: int) -> bool:
    return m >= 1 and all(e < 3 for e in factorint(m).values())


def n_diff(E: EllipticCurveQ) -> list[int]:
    """Bad primes q with 3 | i_q."""
    return [d.prime for d in E.local_data if d.i_q % 3 == 0]


@dataclass(frozen=True)
class Condition:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class HypothesisReport:
    """Per-condition outcome of the standing hypotheses for (E, m)."""

    conditions: tuple[Condition, ...]
    n_diff: tuple[int, ...] = ()

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    @property
    def failures(self) -> list[str]:
        return [c.name for c in self.conditions if not c.passed]

    @property
    def relaxable(self) -> bool:
        """Only the i_q condition fails, so the relaxed congruence applies."""
        return self.failures == ["i_q_prime_to_3"]


def hypothesis_filter(E: EllipticCurveQ, m: int) -> HypothesisReport:
    """Check the standing hypotheses for the pair (E, m) at p = 3."""
    conditions = []

    def check(name: str, passed: bool, detail: str) -> None:
        conditions.append(Condition(name, bool(passed), detail))

    squarefree = all(e == 1 for e in factorint(E.conductor).values())
    check("semistable", squarefree and E.is_semistable(), f"N = {E.conductor}")
    check("good_at_3", E.conductor % 3 != 0, f"3 {'divides' if E.conductor % 3 == 0 else 'does not divide'} N")
    if E.conductor % 3 != 0:
        a3 = ap(E, 3)
        check("ordinary", a3 % 3 != 0, f"a_3 = {a3}")
    else:
        check("ordinary", False, "bad reduction at 3")
    bad_iq = n_diff(E)
    check("i_q_prime_to_3", not bad_iq,
          "i_q = " + ", ".join(f"{d.i_q} at {d.prime}" for d in E.local_data))
    isogeny = has_rational_3_isogeny(E)
    check("no_rational_3_isogeny", not isogeny,
          "psi_3 has a rational root" if isogeny else "psi_3 has no rational root")
    check("m_cube_free", m > 1 and is_cube_free(m), f"m = {m}")
    check("m_coprime_3N", math.gcd(m, 3 * E.conductor) == 1, f"gcd(m, 3N) = {math.gcd(m, 3 * E.conductor)}")
    return HypothesisReport(tuple(conditions), tuple(bad_iq))


def periods_agm(E: EllipticCurveQ, digits: int | None = None) -> tuple[mp.mpf, mp.mpc]:
    """Neron periods (Omega_+, Omega_-) of the minimal model by the AGM.

    Omega_+ is the least positive real period; Omega_- is purely imaginary
    with positive imaginary part.
    """
    digits = digits or config.digits
    b2, b4, b6, _ = E.b_invariants
    with mp.workdps(digits + config.guard_digits):
        roots = mp.polyroots([4, b2, 2 * b4, b6], maxsteps=200, extraprec=4 * digits)
        if E.discriminant > 0:
            e1, e2, e3 = sorted((mp.re(r) for r in roots), reverse=True)
            omega_plus = mp.pi / mp.agm(mp.sqrt(e1 - e3), mp.sqrt(e1 - e2))
            omega_minus = mp.mpc(0, mp.pi / mp.agm(mp.sqrt(e1 - e3), mp.sqrt(e2 - e3)))
        else:
            e1 = mp.re(min(roots, key=lambda r: abs(mp.im(r))))
            beta = mp.sqrt(3 * e1 * e1 + b2 * e1 / 2 + mp.mpf(b4) / 2)
            alpha = 3 * e1 + mp.mpf(b2) / 4
            omega_plus = 2 * mp.pi / mp.agm(2 * mp.sqrt(beta), mp.sqrt(2 * beta + alpha))
            omega_minus = mp.mpc(0, 2 * mp.pi / mp.agm(2 * mp.sqrt(beta), mp.sqrt(2 * beta - alpha)))
        return omega_plus, omega_minus


def u_w(E: EllipticCurveQ, precision: int | None = None) -> tuple[Padic3, Padic3]:
    """Unit root u and non-unit root w = 3/u of X^2 - a_3 X + 3.

    Raises:
        NotOrdinary: If 3 divides a_3 or E has bad reduction at 3.
    """
    precision = precision or config.precision
    if E.conductor % 3 == 0:
        raise NotOrdinary(f"{E.name} has bad reduction at 3")
    u = hensel_unit_root(ap(E, 3), precision)
    return u, Padic3.from_int(3, precision) / u


def load_curve_table(path: Path | None = None) -> dict[str, tuple[int, ...]]:
    """Read `label a1 a2 a3 a4 a6` lines; '#' starts a comment."""
    table = {}
    path = path or config.curve_table
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 6:
            raise ValueError(f"{path}:{lineno}: expected 'label a1 a2 a3 a4 a6'")
        table[parts[0]] = tuple(int(c) for c in parts[1:])
    return table


def curve_from_label(label: str, path: Path | None = None) -> EllipticCurveQ:
    table = load_curve_table(path)
    if label not in table:
        raise ValueError(f"Unknown curve label '{label}'. Known labels: {', '.join(sorted(table)[:20])}, ...")
    return minimal_model(table[label], label=label)
