"""Truncated q-expansions with weight, level and nebentypus metadata.

Hecke operators act through the nebentypus: f|sigma_l is replaced by the
scalar eps(l), so only expansions that carry a character can be operated on.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Any, Callable, Iterable, Sequence

import mpmath as mp
from sympy import factorint, primerange

from .errors import NotOrdinary, RingMismatch
from .rings import CycloElem, P, Padic3, RamifiedPadic3, hensel_unit_root, v3

logger = logging.getLogger(__name__)

RATIONAL = "rational"
CYCLO = "cyclo"
QUADRATIC = "quadratic"
PADIC = "padic"
COMPLEX = "complex"


@dataclass(frozen=True)
class DirichletCharacter:
    """Dirichlet character stored as exponents: chi(r) = zeta_order^k for each unit residue r."""

    modulus: int
    order: int
    exponents: tuple[tuple[int, int], ...]

    @classmethod
    def trivial(cls, modulus: int = 1) -> DirichletCharacter:
        return cls(modulus, 1, tuple((r, 0) for r in _units(modulus)))

    @classmethod
    def eps3(cls) -> DirichletCharacter:
        """The quadratic character of conductor 3."""
        return cls(3, 2, ((1, 0), (2, 1)))

    @classmethod
    def from_function(cls, modulus: int, order: int, exponent: Callable[[int], int]) -> DirichletCharacter:
        table = tuple((r, exponent(r) % order) for r in _units(modulus))
        chi = cls(modulus, order, table)
        chi._check_multiplicative()
        return chi

    @cached_property
    def _table(self) -> dict[int, int]:
        return dict(self.exponents)

    def _check_multiplicative(self) -> None:
        table = self._table
        for a in table:
            for b in table:
                if (table[a] + table[b]) % self.order != table[a * b % self.modulus]:
                    raise ValueError(f"values do not define a character modulo {self.modulus}")

    def exponent(self, n: int) -> int | None:
        """k with chi(n) = zeta^k, or None when gcd(n, modulus) > 1."""
        return self._table.get(n % self.modulus) if self.modulus > 1 else 0

    def __call__(self, n: int) -> Fraction | CycloElem:
        k = self.exponent(n)
        if k is None:
            return Fraction(0)
        if self.order <= 2:
            return Fraction(-1) ** k
        return CycloElem.root_of_unity(self.order, k)

    def is_trivial(self) -> bool:
        return all(k == 0 for _, k in self.exponents)

    @property
    def parity(self) -> int:
        """chi(-1) as +1 or -1."""
        return 1 if self.modulus <= 2 or self.exponent(-1) == 0 else -1

    @cached_property
    def conductor(self) -> int:
        for d in sorted(divisors(self.modulus)):
            if all(self.exponent(a) == 0 for a in self._table if a % d == 1 % d):
                return d
        return self.modulus

    def primitive(self) -> DirichletCharacter:
        f = self.conductor
        lifts = {}
        for r, k in self.exponents:
            lifts.setdefault(r % f, k)
        return DirichletCharacter(f, self.order, tuple((r, lifts[r]) for r in _units(f))).reduced()

    def reduced(self) -> DirichletCharacter:
        """Same character with the smallest order that holds its values."""
        g = math.gcd(self.order, *(k for _, k in self.exponents))
        return DirichletCharacter(self.modulus, self.order // g, tuple((r, k // g) for r, k in self.exponents))

    def extend(self, modulus: int) -> DirichletCharacter:
        """Induce to a multiple modulus."""
        if modulus % self.modulus:
            raise ValueError(f"{modulus} is not a multiple of {self.modulus}")
        return DirichletCharacter(modulus, self.order, tuple(
            (r, self.exponent(r)) for r in _units(modulus)))

    def __mul__(self, other: DirichletCharacter) -> DirichletCharacter:
        modulus = math.lcm(self.modulus, other.modulus)
        order = math.lcm(self.order, other.order)
        a, b = order // self.order, order // other.order
        return DirichletCharacter(modulus, order, tuple(
            (r, (self.exponent(r) * a + other.exponent(r) * b) % order) for r in _units(modulus))).reduced()

    def __pow__(self, e: int) -> DirichletCharacter:
        return DirichletCharacter(self.modulus, self.order, tuple(
            (r, (k * e) % self.order) for r, k in self.exponents)).reduced()

    def conjugate(self) -> DirichletCharacter:
        return self ** -1

    def label(self) -> str:
        return f"{self.modulus}:{self.order}:" + ",".join(str(k) for _, k in self.exponents)

    @classmethod
    def from_label(cls, label: str) -> DirichletCharacter:
        modulus, order, values = label.split(":")
        modulus, order = int(modulus), int(order)
        ks = [int(k) for k in values.split(",")] if values else []
        return cls(modulus, order, tuple(zip(_units(modulus), ks)))


def _units(modulus: int) -> list[int]:
    if modulus == 1:
        return [0]
    return [r for r in range(1, modulus) if math.gcd(r, modulus) == 1]


def divisors(n: int) -> list[int]:
    out = [1]
    for q, e in factorint(n).items():
        out = [d * q ** i for d in out for i in range(e + 1)]
    return sorted(out)


@dataclass(frozen=True)
class QuadraticOrderElem:
    """a + b*theta with theta^2 = ap*theta - p."""

    a: Fraction
    b: Fraction
    ap: int
    p: int = P

    @classmethod
    def theta(cls, ap: int, p: int = P) -> QuadraticOrderElem:
        return cls(Fraction(0), Fraction(1), ap, p)

    def _coerce(self, other) -> QuadraticOrderElem:
        if isinstance(other, QuadraticOrderElem):
            if (other.ap, other.p) != (self.ap, self.p):
                raise RingMismatch(f"theta^2 = {self.ap}theta - {self.p} vs {other.ap}theta - {other.p}")
            return other
        if isinstance(other, (int, Fraction)):
            return QuadraticOrderElem(Fraction(other), Fraction(0), self.ap, self.p)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return QuadraticOrderElem(self.a + other.a, self.b + other.b, self.ap, self.p)

    __radd__ = __add__

    def __neg__(self):
        return QuadraticOrderElem(-self.a, -self.b, self.ap, self.p)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        bb = self.b * other.b
        return QuadraticOrderElem(
            self.a * other.a - self.p * bb,
            self.a * other.b + self.b * other.a + self.ap * bb,
            self.ap, self.p,
        )

    __rmul__ = __mul__

    def norm(self) -> Fraction:
        return self.a * self.a + self.a * self.b * self.ap + self.b * self.b * self.p

    def conjugate(self) -> QuadraticOrderElem:
        """Galois conjugate theta -> ap - theta."""
        return QuadraticOrderElem(self.a + self.b * self.ap, -self.b, self.ap, self.p)

    def inverse(self) -> QuadraticOrderElem:
        n = self.norm()
        if n == 0:
            raise ZeroDivisionError("inverse of zero in Q(theta)")
        c = self.conjugate()
        return QuadraticOrderElem(c.a / n, c.b / n, self.ap, self.p)

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return QuadraticOrderElem(self.a / other, self.b / other, self.ap, self.p)
        return self * self._coerce(other).inverse()

    def __rtruediv__(self, other):
        return self.inverse() * other

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
        return self.a == other.a and self.b == other.b

    def __hash__(self):
        return hash((self.a, self.b, self.ap, self.p))

    def is_zero(self) -> bool:
        return self.a == 0 and self.b == 0

    def to_padic(self, precision: int) -> Padic3:
        """3-adic evaluation theta -> u, the unit root."""
        u = hensel_unit_root(self.ap, precision)
        return Padic3.from_rational(self.a, precision) + u * Padic3.from_rational(self.b, precision)

    def to_complex(self, root: int = 0) -> mp.mpc:
        """Complex evaluation theta -> (ap + (-1)^root sqrt(ap^2 - 4p)) / 2."""
        disc = mp.sqrt(mp.mpc(self.ap * self.ap - 4 * self.p))
        theta = (self.ap + (disc if root == 0 else -disc)) / 2
        return mp.mpf(self.a.numerator) / self.a.denominator + mp.mpf(self.b.numerator) / self.b.denominator * theta

    def __str__(self):
        return f"{self.a} + {self.b}*t"


def ring_of(value: Any) -> str:
    if isinstance(value, (int, Fraction)):
        return RATIONAL
    if isinstance(value, CycloElem):
        return RATIONAL if value.is_rational() else CYCLO
    if isinstance(value, QuadraticOrderElem):
        return QUADRATIC
    if isinstance(value, Padic3):
        return PADIC
    if isinstance(value, (mp.mpc, mp.mpf, complex, float)):
        return COMPLEX
    raise TypeError(f"unsupported coefficient type {type(value).__name__}")


def _zero_like(value: Any) -> Any:
    return value * 0 if not isinstance(value, Padic3) else Padic3.zero(value.precision)


@dataclass(frozen=True)
class QExpansion:
    """Truncated Fourier expansion a(0) + a(1)q + ... + a(n_max)q^n_max."""

    coefficients: tuple[Any, ...]
    weight: int
    level: int
    character: DirichletCharacter = field(default_factory=DirichletCharacter.trivial)
    ring: str = RATIONAL

    def __post_init__(self):
        if not self.coefficients:
            raise ValueError("a q-expansion needs at least the constant term")
        if self.level < 1:
            raise ValueError(f"level must be positive, got {self.level}")

    @classmethod
    def from_list(cls, coefficients: Iterable[Any], weight: int, level: int,
                  character: DirichletCharacter | None = None, ring: str | None = None) -> QExpansion:
        coefficients = tuple(Fraction(c) if isinstance(c, int) else c for c in coefficients)
        if ring is None:
            rings = {ring_of(c) for c in coefficients} - {RATIONAL}
            ring = rings.pop() if len(rings) == 1 else RATIONAL
            if rings:
                raise RingMismatch(f"mixed coefficient rings {sorted(rings | {ring})}")
        return cls(coefficients, weight, level, character or DirichletCharacter.trivial(), ring)

    @property
    def n_max(self) -> int:
        return len(self.coefficients) - 1

    def __getitem__(self, n: int) -> Any:
        return self.coefficients[n]

    def _replace(self, coefficients: Sequence[Any], **changes: Any) -> QExpansion:
        data = dict(weight=self.weight, level=self.level, character=self.character, ring=self.ring)
        data.update(changes)
        return QExpansion(tuple(coefficients), **data)

    def truncate(self, n_max: int) -> QExpansion:
        if n_max > self.n_max:
            raise ValueError(f"cannot extend a truncation from {self.n_max} to {n_max}")
        return self._replace(self.coefficients[:n_max + 1])

    def map(self, func: Callable[[Any], Any], ring: str) -> QExpansion:
        """Apply a ring map coefficientwise."""
        return self._replace([func(c) for c in self.coefficients], ring=ring)

    def __add__(self, other: QExpansion) -> QExpansion:
        _check_compatible(self, other)
        n = min(self.n_max, other.n_max)
        return self._replace([a + b for a, b in zip(self.coefficients[:n + 1], other.coefficients[:n + 1])],
                             level=math.lcm(self.level, other.level))

    def __neg__(self) -> QExpansion:
        return self._replace([-c for c in self.coefficients])

    def __sub__(self, other: QExpansion) -> QExpansion:
        return self + (-other)

    def scale(self, scalar: Any) -> QExpansion:
        out = [c * scalar for c in self.coefficients]
        ring = self.ring if ring_of(scalar) == RATIONAL else ring_of(scalar)
        return self._replace(out, ring=ring)


def _check_compatible(f: QExpansion, g: QExpansion) -> None:
    if f.ring != g.ring:
        raise RingMismatch(f"coefficient rings differ: {f.ring} vs {g.ring}")
    if f.weight != g.weight:
        raise ValueError(f"weights differ: {f.weight} vs {g.weight}")


def _character_scalar(f: QExpansion, ell: int) -> Any:
    value = f.character(ell)
    if f.ring == PADIC and isinstance(value, Fraction):
        return Padic3.from_rational(value, f.coefficients[0].precision)
    return value


def mul(f: QExpansion, g: QExpansion) -> QExpansion:
    """Cauchy product; weights add, levels take the lcm, characters multiply.

    Raises:
        RingMismatch: If the coefficient rings differ.
    """
    if f.ring != g.ring:
        raise RingMismatch(f"cannot multiply {f.ring} by {g.ring} expansions")
    n = min(f.n_max, g.n_max)
    a, b = f.coefficients, g.coefficients
    zero = _zero_like(a[0])
    out = [zero] * (n + 1)
    nz_a = [i for i in range(n + 1) if not _is_zero(a[i])]
    nz_b = [j for j in range(n + 1) if not _is_zero(b[j])]
    for i in nz_a:
        ai = a[i]
        for j in nz_b:
            if i + j > n:
                break
            out[i + j] = out[i + j] + ai * b[j]
    return QExpansion(tuple(out), f.weight + g.weight, math.lcm(f.level, g.level),
                      f.character * g.character, f.ring)


def _is_zero(value: Any) -> bool:
    if isinstance(value, (CycloElem, QuadraticOrderElem, Padic3)):
        return value.is_zero()
    return value == 0


def hecke_T(f: QExpansion, ell: int) -> QExpansion:
    """T(ell) for ell not dividing the level, U(ell) otherwise."""
    n_out = f.n_max // ell
    a = f.coefficients
    if f.level % ell == 0:
        return f._replace(a[ell * n] for n in range(n_out + 1))
    scalar = _character_scalar(f, ell) * Fraction(ell) ** (f.weight - 1)
    out = []
    for n in range(n_out + 1):
        value = a[ell * n]
        if n % ell == 0:
            value = value + scalar * a[n // ell]
        out.append(value)
    return f._replace(out)


def hecke_S(f: QExpansion, ell: int) -> QExpansion:
    """S(ell) f = eps(ell) ell^(k-2) f for ell not dividing the level, 0 otherwise."""
    if f.level % ell == 0:
        zero = _zero_like(f.coefficients[0])
        return f._replace([zero] * len(f.coefficients))
    return f.scale(_character_scalar(f, ell) * Fraction(ell) ** (f.weight - 2))


def v_operator(f: QExpansion, d: int) -> QExpansion:
    """f|[d](z) = f(dz)."""
    if d < 1:
        raise ValueError(f"V-operator needs a positive integer, got {d}")
    if d == 1:
        return f
    zero = _zero_like(f.coefficients[0])
    out = [zero] * (d * f.n_max + 1)
    for n, c in enumerate(f.coefficients):
        out[d * n] = c
    return f._replace(out, level=f.level * d)


def iota(f: QExpansion, m: int) -> QExpansion:
    """Remove the Euler factors at primes dividing m: a(n) -> 0 when gcd(n, m) > 1, n >= 1."""
    if m == 1:
        return f
    zero = _zero_like(f.coefficients[0])
    out = [c if n == 0 or math.gcd(n, m) == 1 else zero for n, c in enumerate(f.coefficients)]
    level = f.level
    for q in factorint(m):
        level *= q if level % q == 0 else q * q
    return f._replace(out, level=level)


def p_stabilize(f: QExpansion) -> QExpansion:
    """Ordinary 3-stabilisation f_0 = f - w f|[3] with exact coefficients in Z[theta].

    Raises:
        NotOrdinary: If 3 divides a(3, f).
    """
    if f.level % P == 0:
        raise ValueError(f"the level {f.level} of a form to stabilise must be prime to 3")
    a3 = f.coefficients[P]
    if Fraction(a3).denominator != 1 or int(a3) % P == 0:
        raise NotOrdinary(f"a(3) = {a3} is not a 3-adic unit")
    ap = int(a3)
    theta = QuadraticOrderElem.theta(ap)
    w = QuadraticOrderElem(Fraction(ap), Fraction(0), ap) - theta
    coefficients = []
    for n, c in enumerate(f.coefficients):
        value = QuadraticOrderElem(Fraction(c), Fraction(0), ap)
        if n % P == 0:
            value = value - w * f.coefficients[n // P]
        coefficients.append(value)
    return QExpansion(tuple(coefficients), f.weight, f.level * P, f.character, QUADRATIC)


def coefficient_valuation(value: Any, precision: int) -> int | Fraction | None:
    """3-adic valuation of a coefficient with v(3) = 1 (None for zero).

    Values in Q(sqrt(-3)) and Q_3(pi) are measured at lambda and pi, so their
    valuations may be half-integers.
    """
    if isinstance(value, Padic3):
        return None if value.is_zero() else value.valuation
    if isinstance(value, RamifiedPadic3):
        return None if value.is_zero() else Fraction(value.valuation, 2)
    if isinstance(value, QuadraticOrderElem):
        return coefficient_valuation(value.to_padic(precision), precision)
    if isinstance(value, CycloElem):
        return value.valuation3()
    value = Fraction(value)
    return None if value == 0 else v3(value)


def termwise_congruent(f: QExpansion, g: QExpansion, power: int | Fraction, restrict_to_units: bool = False,
                       precision: int = 20) -> int | None:
    """Smallest n >= 1 with v(a(n,f) - a(n,g)) < power, or None; power 1/2 tests congruence mod lambda."""
    n = min(f.n_max, g.n_max)
    for k in range(1, n + 1):
        if restrict_to_units and k % P == 0:
            continue
        v = coefficient_valuation(f.coefficients[k] - g.coefficients[k], precision)
        if v is not None and v < power:
            return k
    return None


def dumps(f: QExpansion) -> str:
    """Plain-text dump: header line then one exactly encoded coefficient per line."""
    lines = [f"qexp k={f.weight} N={f.level} chi={f.character.label()} nmax={f.n_max} ring={f.ring}"]
    lines.extend(_encode(c) for c in f.coefficients)
    return "\n".join(lines) + "\n"


def loads(text: str) -> QExpansion:
    header, *body = text.strip("\n").split("\n")
    fields = dict(item.split("=", 1) for item in header.split()[1:])
    if not header.startswith("qexp "):
        raise ValueError("not a q-expansion dump")
    coefficients = tuple(_decode(line) for line in body)
    if len(coefficients) != int(fields["nmax"]) + 1:
        raise ValueError(f"expected {int(fields['nmax']) + 1} coefficients, found {len(coefficients)}")
    return QExpansion(coefficients, int(fields["k"]), int(fields["N"]),
                      DirichletCharacter.from_label(fields["chi"]), fields.get("ring", RATIONAL))


def _encode(value: Any) -> str:
    if isinstance(value, CycloElem):
        return f"c {value.order} " + " ".join(str(c) for c in value.coefficients)
    if isinstance(value, QuadraticOrderElem):
        return f"t {value.ap} {value.p} {value.a} {value.b}"
    if isinstance(value, Padic3):
        return f"p {value.valuation} {value.unit} {value.precision}"
    return str(Fraction(value))


def _decode(line: str) -> Any:
    parts = line.split()
    if parts[0] == "c":
        return CycloElem(int(parts[1]), tuple(Fraction(c) for c in parts[2:]))
    if parts[0] == "t":
        return QuadraticOrderElem(Fraction(parts[3]), Fraction(parts[4]), int(parts[1]), int(parts[2]))
    if parts[0] == "p":
        return Padic3(int(parts[1]), int(parts[2]), int(parts[3]))
    return Fraction(parts[0])


def prime_list(bound: int) -> list[int]:
    return list(primerange(2, bound + 1))
