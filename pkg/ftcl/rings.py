"""Scalar rings: rationals, cyclotomic elements, capped 3-adics and complex floats.

The embedding Q(sqrt(-3)) -> Q_3(sqrt(-3)) sends sqrt(-3) to +pi, where pi is
the uniformiser with pi^2 = -3. Valuations in the ramified extension are
integers in pi-units, so v(3) = 2.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Union

import mpmath as mp
from sympy import Poly, QQ, symbols
from sympy.polys.specialpolys import cyclotomic_poly

from .errors import NoRecognition, NotOrdinary, PrecisionExhausted

logger = logging.getLogger(__name__)

P = 3

BigRational = Fraction
BigComplex = mp.mpc

Rational = Union[int, Fraction]

_x = symbols("x")


def v3(n: Rational) -> int:
    """3-adic valuation of a nonzero rational."""
    n = Fraction(n)
    if n == 0:
        raise ValueError("v3(0) is infinite")
    v = 0
    num, den = n.numerator, n.denominator
    while num % P == 0:
        num //= P
        v += 1
    while den % P == 0:
        den //= P
        v -= 1
    return v


def _check_order(order: int) -> int:
    if order < 1:
        raise ValueError(f"Cyclotomic order must be positive, got {order}")
    rest = order
    for q in (2, 3):
        while rest % q == 0:
            rest //= q
    if rest != 1:
        raise ValueError(f"Cyclotomic order must be of the form 2^a*3^b, got {order}")
    return order


@lru_cache(maxsize=None)
def _cyclotomic_coeffs(order: int) -> tuple[int, ...]:
    """Coefficients of the order-th cyclotomic polynomial, constant term first."""
    return tuple(int(c) for c in reversed(cyclotomic_poly(order, _x, polys=True).all_coeffs()))


def _reduce(poly: list[Fraction], order: int) -> tuple[Fraction, ...]:
    modulus = _cyclotomic_coeffs(order)
    degree = len(modulus) - 1
    poly = list(poly)
    for k in range(len(poly) - 1, degree - 1, -1):
        c = poly[k]
        if c:
            for j, m in enumerate(modulus):
                poly[k - degree + j] -= c * m
    poly = poly[:degree] + [Fraction(0)] * max(0, degree - len(poly))
    return tuple(Fraction(c) for c in poly)


@dataclass(frozen=True)
class CycloElem:
    """Element of Q(zeta_order) in the power basis 1, zeta, ..., zeta^(phi-1)."""

    order: int
    coefficients: tuple[Fraction, ...]

    def __post_init__(self):
        _check_order(self.order)
        if len(self.coefficients) != len(_cyclotomic_coeffs(self.order)) - 1:
            raise ValueError(
                f"Q(zeta_{self.order}) has degree {len(_cyclotomic_coeffs(self.order)) - 1}, "
                f"got {len(self.coefficients)} coefficients"
            )

    @classmethod
    def from_rational(cls, value: Rational, order: int = 1) -> CycloElem:
        degree = len(_cyclotomic_coeffs(_check_order(order))) - 1
        return cls(order, (Fraction(value),) + (Fraction(0),) * (degree - 1))

    @classmethod
    def root_of_unity(cls, order: int, k: int = 1) -> CycloElem:
        """zeta_order^k."""
        k %= order
        poly = [Fraction(0)] * (k + 1)
        poly[k] = Fraction(1)
        return cls(order, _reduce(poly, order))

    @property
    def degree(self) -> int:
        return len(self.coefficients)

    def lift(self, order: int) -> CycloElem:
        """View this element inside Q(zeta_order) for a multiple order."""
        if order == self.order:
            return self
        if order % self.order:
            raise ValueError(f"Cannot embed Q(zeta_{self.order}) into Q(zeta_{order})")
        step = order // self.order
        poly = [Fraction(0)] * (step * (self.degree - 1) + 1)
        for i, c in enumerate(self.coefficients):
            poly[i * step] += c
        return CycloElem(order, _reduce(poly, order))

    def _coerce(self, other) -> tuple[CycloElem, CycloElem]:
        if isinstance(other, (int, Fraction)):
            return self, CycloElem.from_rational(other, self.order)
        if not isinstance(other, CycloElem):
            return NotImplemented
        if self.order == other.order:
            return self, other
        common = self.order * other.order // _gcd(self.order, other.order)
        return self.lift(common), other.lift(common)

    def __add__(self, other):
        pair = self._coerce(other)
        if pair is NotImplemented:
            return NotImplemented
        a, b = pair
        return CycloElem(a.order, tuple(x + y for x, y in zip(a.coefficients, b.coefficients)))

    __radd__ = __add__

    def __neg__(self):
        return CycloElem(self.order, tuple(-c for c in self.coefficients))

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return CycloElem(self.order, tuple(c * other for c in self.coefficients))
        pair = self._coerce(other)
        if pair is NotImplemented:
            return NotImplemented
        a, b = pair
        poly = [Fraction(0)] * (a.degree + b.degree - 1)
        for i, x in enumerate(a.coefficients):
            if x:
                for j, y in enumerate(b.coefficients):
                    poly[i + j] += x * y
        return CycloElem(a.order, _reduce(poly, a.order))

    __rmul__ = __mul__

    def inverse(self) -> CycloElem:
        if self.is_zero():
            raise ZeroDivisionError("inverse of zero in a cyclotomic field")
        modulus = Poly(list(reversed(_cyclotomic_coeffs(self.order))), _x, domain=QQ)
        element = Poly([QQ(c.numerator, c.denominator) for c in reversed(self.coefficients)], _x, domain=QQ)
        inv = element.invert(modulus)
        coeffs = [Fraction(int(c.numerator), int(c.denominator)) for c in reversed(inv.all_coeffs())]
        return CycloElem(self.order, _reduce(coeffs, self.order))

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return CycloElem(self.order, tuple(c / Fraction(other) for c in self.coefficients))
        return self * other.inverse()

    def __rtruediv__(self, other):
        return self.inverse() * other

    def __pow__(self, exponent: int):
        if exponent < 0:
            return self.inverse() ** (-exponent)
        result = CycloElem.from_rational(1, self.order)
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            base = base * base
            exponent >>= 1
        return result

    def conjugate(self) -> CycloElem:
        """Complex conjugation zeta -> zeta^(-1)."""
        poly = [Fraction(0)] * self.order
        for i, c in enumerate(self.coefficients):
            poly[(-i) % self.order] += c
        return CycloElem(self.order, _reduce(poly, self.order))

    def is_zero(self) -> bool:
        return not any(self.coefficients)

    def is_rational(self) -> bool:
        return not any(self.coefficients[1:])

    def to_rational(self) -> Fraction:
        if not self.is_rational():
            raise ValueError(f"{self} is not rational")
        return self.coefficients[0]

    def quadratic_parts(self) -> tuple[Fraction, Fraction]:
        """Return (a, b) with self = a + b*sqrt(-3); raises if self is not in Q(sqrt(-3))."""
        if self.is_rational():
            return self.coefficients[0], Fraction(0)
        if self.order % 3:
            raise ValueError(f"{self} does not lie in Q(sqrt(-3))")
        sqrt_m3 = CycloElem.root_of_unity(self.order, self.order // 3) * 2 + 1
        j = next(i for i in range(1, self.degree) if sqrt_m3.coefficients[i])
        b = self.coefficients[j] / sqrt_m3.coefficients[j]
        a = self.coefficients[0] - b * sqrt_m3.coefficients[0]
        if a + b * sqrt_m3 != self:
            raise ValueError(f"{self} does not lie in Q(sqrt(-3))")
        return a, b

    def norm(self) -> Fraction:
        """N(x) from Q(zeta_order) down to Q, as the resultant with the cyclotomic polynomial."""
        modulus = Poly(list(reversed(_cyclotomic_coeffs(self.order))), _x, domain=QQ)
        element = Poly([QQ(c.numerator, c.denominator) for c in reversed(self.coefficients)], _x, domain=QQ)
        value = modulus.resultant(element)
        return Fraction(int(value.p), int(value.q))

    def valuation3(self) -> Fraction | None:
        """Valuation at the prime above 3, scaled so that v(3) = 1 (None for zero).

        In Q(sqrt(-3)) the prime is lambda = 1 - omega and v(lambda) = 1/2.

        Raises:
            ValueError: If 3 splits in Q(zeta_order), which happens when 8 divides the order.
        """
        if self.is_zero():
            return None
        if self.order % 8 == 0:
            raise ValueError(f"3 splits in Q(zeta_{self.order}); the valuation depends on the prime")
        return Fraction(v3(self.norm()), self.degree)

    def to_complex(self) -> mp.mpc:
        total = mp.mpc(0)
        for i, c in enumerate(self.coefficients):
            if c:
                total += mp.mpf(c.numerator) / c.denominator * mp.expjpi(mp.mpf(2 * i) / self.order)
        return total

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.is_rational() and self.coefficients[0] == other
        if not isinstance(other, CycloElem):
            return NotImplemented
        a, b = self._coerce(other)
        return a.coefficients == b.coefficients

    def __hash__(self):
        if self.is_rational():
            return hash(self.coefficients[0])
        return hash((self.order, self.coefficients))

    def __str__(self):
        terms = [f"{c}*z^{i}" if i else str(c) for i, c in enumerate(self.coefficients) if c]
        return f"[{' + '.join(terms) or '0'}]_{self.order}"


def _gcd(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return abs(a)


OMEGA = CycloElem.root_of_unity(3, 1)
SQRT_M3 = OMEGA * 2 + 1


@dataclass(frozen=True)
class Padic3:
    """3-adic number 3^valuation * unit known modulo 3^precision (absolute precision).

    The stored zero has ``valuation == precision`` and ``unit == 0``.
    """

    valuation: int
    unit: int
    precision: int

    def __post_init__(self):
        if self.valuation < self.precision and self.unit % P == 0:
            raise ValueError("Padic3 unit must not be divisible by 3")

    @classmethod
    def zero(cls, precision: int) -> Padic3:
        return cls(precision, 0, precision)

    @classmethod
    def from_int(cls, n: int, precision: int) -> Padic3:
        return cls.from_rational(Fraction(n), precision)

    @classmethod
    def from_rational(cls, q: Rational, precision: int) -> Padic3:
        q = Fraction(q)
        if q == 0:
            return cls.zero(precision)
        v = v3(q)
        if v >= precision:
            return cls.zero(precision)
        num = q.numerator // P ** max(v, 0) if v > 0 else q.numerator
        den = q.denominator // P ** max(-v, 0) if v < 0 else q.denominator
        modulus = P ** (precision - v)
        return cls(v, num * pow(den, -1, modulus) % modulus, precision)

    @property
    def relative_precision(self) -> int:
        return self.precision - self.valuation

    def is_zero(self) -> bool:
        return self.valuation >= self.precision

    def _coerce(self, other) -> Padic3:
        if isinstance(other, Padic3):
            return other
        if isinstance(other, (int, Fraction)):
            return Padic3.from_rational(other, self.precision)
        return NotImplemented

    def _normalise(self, value: int, scale: int, precision: int) -> Padic3:
        """Build 3^scale * value modulo 3^precision."""
        if precision <= scale:
            return Padic3.zero(precision)
        value %= P ** (precision - scale)
        if value == 0:
            return Padic3.zero(precision)
        while value % P == 0:
            value //= P
            scale += 1
        return Padic3(scale, value % P ** (precision - scale), precision)

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        precision = min(self.precision, other.precision)
        low = min(self.valuation, other.valuation)
        value = self.unit * P ** (self.valuation - low) + other.unit * P ** (other.valuation - low)
        return self._normalise(value, low, precision)

    __radd__ = __add__

    def __neg__(self):
        if self.is_zero():
            return self
        return Padic3(self.valuation, -self.unit % P ** self.relative_precision, self.precision)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        precision = min(self.precision + other.valuation, other.precision + self.valuation)
        return self._normalise(self.unit * other.unit, self.valuation + other.valuation, precision)

    __rmul__ = __mul__

    def inverse(self) -> Padic3:
        if self.is_zero():
            raise PrecisionExhausted(f"division by a 3-adic zero known to precision {self.precision}")
        rel = self.relative_precision
        return Padic3(-self.valuation, pow(self.unit, -1, P ** rel), rel - self.valuation)

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        result = self * other.inverse()
        if result.is_zero() and not self.is_zero():
            raise PrecisionExhausted("division consumed all 3-adic digits")
        return result

    def __rtruediv__(self, other):
        return self.inverse() * other

    def __pow__(self, exponent: int):
        if exponent < 0:
            return self.inverse() ** (-exponent)
        result = Padic3.from_int(1, self.precision)
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            base = base * base
            exponent >>= 1
        return result

    def __eq__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return (self - other).is_zero()

    def __hash__(self):
        return hash((self.valuation, self.unit, self.precision))

    def to_fraction(self) -> Fraction:
        """Representative 3^v * unit with unit in [0, 3^relative_precision)."""
        if self.is_zero():
            return Fraction(0)
        return Fraction(self.unit) * Fraction(P) ** self.valuation

    def residue(self, k: int) -> int:
        """Representative modulo 3^k of an integral element."""
        if self.valuation < 0:
            raise ValueError("element is not 3-integral")
        if k > self.precision:
            raise PrecisionExhausted(f"asked for {k} digits, only {self.precision} known")
        if self.is_zero():
            return 0
        return self.unit * P ** self.valuation % P ** k

    def digits(self) -> str:
        """Base-3 digits, most significant first, with an O(3^M) suffix."""
        if self.is_zero():
            return f"O(3^{self.precision})"
        n = self.unit
        out = []
        while n:
            out.append(str(n % P))
            n //= P
        body = "".join(reversed(out)) or "0"
        if self.valuation:
            return f"{body}e{self.valuation} + O(3^{self.precision})"
        return f"{body} + O(3^{self.precision})"

    def __str__(self):
        return self.digits()


@dataclass(frozen=True)
class RamifiedPadic3:
    """x + y*pi in Q_3(pi), pi^2 = -3."""

    x: Padic3
    y: Padic3

    @property
    def precision(self) -> int:
        """Absolute precision in pi-units."""
        return min(2 * self.x.precision, 2 * self.y.precision + 1)

    @property
    def valuation(self) -> int:
        """Valuation in pi-units (v(3) = 2); the precision for the stored zero."""
        return min(2 * self.x.valuation, 2 * self.y.valuation + 1, self.precision)

    def is_zero(self) -> bool:
        return self.x.is_zero() and self.y.is_zero()

    def _coerce(self, other) -> RamifiedPadic3:
        if isinstance(other, RamifiedPadic3):
            return other
        if isinstance(other, Padic3):
            return RamifiedPadic3(other, Padic3.zero(other.precision))
        if isinstance(other, (int, Fraction)):
            m = self.x.precision
            return RamifiedPadic3(Padic3.from_rational(other, m), Padic3.zero(m))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return RamifiedPadic3(self.x + other.x, self.y + other.y)

    __radd__ = __add__

    def __neg__(self):
        return RamifiedPadic3(-self.x, -self.y)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return RamifiedPadic3(
            self.x * other.x - self.y * other.y * 3,
            self.x * other.y + self.y * other.x,
        )

    __rmul__ = __mul__

    def conjugate(self) -> RamifiedPadic3:
        return RamifiedPadic3(self.x, -self.y)

    def norm(self) -> Padic3:
        return self.x * self.x + self.y * self.y * 3

    def inverse(self) -> RamifiedPadic3:
        n = self.norm()
        return RamifiedPadic3(self.x / n, -self.y / n)

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self * other.inverse()

    def __pow__(self, exponent: int):
        if exponent < 0:
            return self.inverse() ** (-exponent)
        result = self._coerce(1)
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            base = base * base
            exponent >>= 1
        return result

    def __eq__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return (self - other).is_zero()

    def __hash__(self):
        return hash((self.x, self.y))


def hensel_unit_root(a_p: int, precision: int) -> Padic3:
    """Unit root u of X^2 - a_p X + 3 to the given precision.

    Raises:
        NotOrdinary: If 3 divides a_p.
    """
    if a_p % P == 0:
        raise NotOrdinary(f"a_3 = {a_p} is divisible by 3; the curve is not ordinary at 3")
    modulus = P ** precision
    u = a_p % P
    known = 1
    while known < precision:
        known = min(2 * known, precision)
        mod = P ** known
        u = (u - (u * u - a_p * u + P) * pow(2 * u - a_p, -1, mod)) % mod
    root = Padic3.from_int(u % modulus, precision)
    logger.debug("unit root of X^2 - %d X + 3 is %s", a_p, root)
    return root


def _mpf_to_fraction(x: mp.mpf) -> Fraction:
    if x == 0:
        return Fraction(0)
    man, exp = x.man_exp
    return Fraction(int(man)) * Fraction(2) ** int(exp)


def default_tolerance(digits: int) -> mp.mpf:
    return mp.mpf(10) ** (-(digits - 5))


def recognize_rational(x, height: int, tol=None) -> Fraction:
    """Recover p/q with q <= height from a float via continued fractions.

    Raises:
        NoRecognition: If the imaginary part is not negligible or no convergent is close enough.
    """
    tol = default_tolerance(mp.mp.dps) if tol is None else mp.mpf(tol)
    z = mp.mpc(x)
    if abs(z.imag) >= tol:
        raise NoRecognition(f"imaginary part {mp.nstr(z.imag, 5)} is not negligible")
    best = _mpf_to_fraction(z.real).limit_denominator(height)
    if abs(z.real - mp.mpf(best.numerator) / best.denominator) >= tol:
        raise NoRecognition(f"{mp.nstr(z.real, 20)} has no rational approximation with denominator <= {height}")
    return best


def recognize_quadomega(z, height: int, tol=None) -> CycloElem:
    """Recover a + b*sqrt(-3) (a, b rational of height <= height) as an element of Q(omega)."""
    z = mp.mpc(z)
    tol = default_tolerance(mp.mp.dps) if tol is None else mp.mpf(tol)
    a = recognize_rational(z.real, height, tol)
    b = recognize_rational(z.imag / mp.sqrt(3), height, tol)
    return CycloElem.from_rational(a, 3) + SQRT_M3 * b


def embed_3adic(x: CycloElem, precision: int) -> RamifiedPadic3:
    """Embed an element of Q(sqrt(-3)) into Q_3(pi) with sqrt(-3) -> pi.

    Raises:
        PrecisionExhausted: If the denominators eat all available digits.
    """
    a, b = x.quadratic_parts()
    for part in (a, b):
        if part and -v3(part) >= precision:
            raise PrecisionExhausted(f"denominator of {part} exceeds 3-adic precision {precision}")
    return RamifiedPadic3(Padic3.from_rational(a, precision), Padic3.from_rational(b, precision))


def _horner(coefficients: list[int], x: int) -> int:
    value = 0
    for c in reversed(coefficients):
        value = value * x + c
    return value


def _newton_lift(coefficients: list[int], derivative: list[int], x: int, precision: int) -> int:
    """Lift an approximate root with v(f(x)) > 2 v(f'(x)) to the given precision."""
    d = _horner(derivative, x)
    vd = v3(d)
    target = precision + vd
    modulus = P ** (target + vd + 1)
    while True:
        fx = _horner(coefficients, x)
        if fx == 0 or v3(fx) >= target:
            return x
        d = _horner(derivative, x)
        unit = d // P ** vd
        step = (fx // P ** vd) * pow(unit, -1, modulus) % modulus
        x = (x - step) % modulus


def padic_roots(coefficients: list[int], precision: int, width: int = 729) -> list[Padic3]:
    """Roots in Z_3 of an integer polynomial (constant term first).

    Residues are refined digit by digit until Hensel's lemma applies to each
    branch, then lifted by Newton iteration.

    Raises:
        PrecisionExhausted: If the search tree grows past ``width`` branches
            or does not separate the roots within ``precision`` digits.
    """
    coefficients = [int(c) for c in coefficients]
    while len(coefficients) > 1 and coefficients[-1] == 0:
        coefficients.pop()
    derivative = [i * c for i, c in enumerate(coefficients)][1:]
    found: dict[int, Padic3] = {}
    candidates = [r for r in range(P) if _horner(coefficients, r) % P == 0]
    digits = 1
    while candidates:
        refined = []
        for r in candidates:
            fr = _horner(coefficients, r)
            dr = _horner(derivative, r) if derivative else 0
            if fr == 0 and (dr != 0 or digits >= precision):
                found.setdefault(r % P ** precision, Padic3.from_int(r % P ** precision, precision))
                continue
            if dr != 0 and v3(fr) > 2 * v3(dr):
                root = _newton_lift(coefficients, derivative, r, precision) % P ** precision
                found.setdefault(root, Padic3.from_int(root, precision))
                continue
            step = P ** digits
            refined.extend(r + j * step for j in range(P)
                           if _horner(coefficients, r + j * step) % (step * P) == 0)
        digits += 1
        if len(refined) > width or (refined and digits > 2 * precision):
            raise PrecisionExhausted(
                f"3-adic roots not separated after {digits} digits ({len(refined)} branches)")
        candidates = refined
    return sorted(found.values(), key=lambda x: x.to_fraction())
