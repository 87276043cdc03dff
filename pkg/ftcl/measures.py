"""3-adic measures with values in q-expansions, specialised to p = 3.

A measure is known through its evaluations at finite-order characters of
Z_3^x: a form measure twists the coefficients prime to 3, the Eisenstein
measure evaluates to partial Eisenstein series E_{k,L3}(theta)|iota_3 and
the convolution multiplies the two. The Rankin-Selberg measure of the
stabilised newform f0~ against g is

    mu(phi) = c(f, m) * l_f0(e * (g_phi|[L/J] * E_phi))

with l_f0 computed exactly from the Hecke-duality coefficients of the
projector onto f0~ (see ``modsym.congruence_projector``).
"""

from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Any, Callable

import mpmath as mp
from sympy import Poly, bernoulli, primefactors, symbols

from .artin import EPS3, ArtinTwistData, eps3, evaluate_polynomial, twisted_local_factor
from .cache import Cache
from .config import config
from .ellcurve import EllipticCurveQ, an_list, ap, local_factor
from .errors import (
    CoefficientShortfall,
    ComputationFailure,
    HypothesisFailure,
    KrylovUnstable,
    NotOrdinary,
    ParityViolation,
    PrecisionExhausted,
    RecognitionFailure,
    RingMismatch,
)
from .lfun import (
    RHO_RAMIFIED,
    RHO_UNRAMIFIED,
    SIGMA_AT_P,
    TauTerm,
    analytic_D_value,
    dirichlet_shift,
    fricke_pseudo_eigenvalue,
    tau_reduction,
)
from .modsym import (
    HeckeProjector,
    ModularSymbolSpace,
    TargetSystem,
    build_space,
    congruence_projector,
    dm,
    load_hecke_matrices,
    period_integrals,
    period_terms,
    petersson_from_relation,
    solve,
    store_hecke_matrices,
    sturm_bound,
    to_rows,
)
from .rings import CycloElem, P, Padic3, hensel_unit_root, v3
from .series import (
    CYCLO,
    PADIC,
    QUADRATIC,
    RATIONAL,
    DirichletCharacter,
    QExpansion,
    QuadraticOrderElem,
    coefficient_valuation,
    iota,
    mul,
    v_operator,
)

logger = logging.getLogger(__name__)

_x = symbols("x")

FORM = "form"
KATZ = "katz"
CONVOLUTION = "convolution"


# Characters of Z_3^x

@dataclass(frozen=True)
class CharacterOnZ3Star:
    """phi = eps3^tame * (wild character of 1 + 3Z_3).

    The wild part sends the topological generator 4 of 1 + 3Z_3 to
    zeta_{3^(t-1)}^wild, so it factors through (Z/3^t)^x.
    """

    tame: int = 0
    t: int = 1
    wild: int = 0

    def __post_init__(self):
        if self.tame not in (0, 1):
            raise ValueError(f"tame exponent must be 0 or 1, got {self.tame}")
        if self.t < 1:
            raise ValueError(f"wild conductor exponent must be at least 1, got {self.t}")
        if not 0 <= self.wild < P ** (self.t - 1):
            raise ValueError(f"wild exponent must lie in [0, 3^{self.t - 1}), got {self.wild}")

    @classmethod
    def trivial(cls) -> CharacterOnZ3Star:
        return cls()

    @classmethod
    def tame_quadratic(cls) -> CharacterOnZ3Star:
        return cls(tame=1)

    @classmethod
    def parse(cls, text: str) -> CharacterOnZ3Star:
        """Read 'tame,t,wild' (e.g. '0,1,0' for the trivial character)."""
        try:
            tame, t, wild = (int(part) for part in text.split(","))
        except ValueError:
            raise ValueError(f"expected 'tame,t,wild', got {text!r}")
        return cls(tame, t, wild)

    @property
    def is_wild(self) -> bool:
        return self.wild != 0

    @property
    def wild_order(self) -> int:
        if not self.wild:
            return 1
        return P ** (self.t - 1) // math.gcd(self.wild, P ** (self.t - 1))

    @property
    def order(self) -> int:
        return math.lcm(2 if self.tame else 1, self.wild_order)

    @property
    def conductor(self) -> int:
        if self.is_wild:
            return P * self.wild_order
        return P if self.tame else 1

    @property
    def modulus(self) -> int:
        return P ** self.t

    def _log(self, n: int) -> int:
        """Discrete logarithm of <n> = eps3(n) n to base 4 modulo 3^t."""
        modulus = self.modulus
        target = (eps3(n) * n) % modulus
        x = 1
        for k in range(P ** (self.t - 1)):
            if x == target:
                return k
            x = x * 4 % modulus
        raise ValueError(f"{n} has no logarithm modulo {modulus}")

    def exponent(self, n: int) -> int | None:
        if n % P == 0:
            return None
        order = self.order
        k = 0
        if self.tame and eps3(n) == -1:
            k += order // 2
        if self.wild:
            reduced = self.wild // math.gcd(self.wild, P ** (self.t - 1))
            k += reduced * self._log(n) * (order // self.wild_order)
        return k % order

    @cached_property
    def dirichlet(self) -> DirichletCharacter:
        return DirichletCharacter.from_function(self.modulus, self.order, lambda r: self.exponent(r)).reduced()

    def __call__(self, n: int) -> Fraction | CycloElem:
        return self.dirichlet(n)

    def power(self, e: int) -> CharacterOnZ3Star:
        return CharacterOnZ3Star((self.tame * e) % 2, self.t, (self.wild * e) % P ** (self.t - 1))

    def label(self) -> str:
        return f"{self.tame},{self.t},{self.wild}"


# Bernoulli numbers and Eisenstein series

@lru_cache(maxsize=32)
def _bernoulli_polynomial(k: int) -> tuple[Fraction, ...]:
    """B_k(x) low degree first, with B_1(x) = x - 1/2."""
    poly = Poly(bernoulli(k, _x), _x)
    return tuple(Fraction(int(c.p), int(c.q)) for c in reversed(poly.all_coeffs()))


def _horner(coefficients, x: Fraction) -> Fraction:
    value = Fraction(0)
    for c in reversed(coefficients):
        value = value * x + c
    return value


def _rational_if_possible(value: Any) -> Any:
    if isinstance(value, CycloElem) and value.is_rational():
        return value.to_rational()
    return value


def generalized_bernoulli(theta: DirichletCharacter, k: int) -> Fraction | CycloElem:
    """B_{k,theta} = f^(k-1) sum_{a=1}^{f} theta(a) B_k(a/f), f the modulus of theta.

    For the character of modulus 1 the classical B_k = B_k(0) is returned,
    so B_1 = -1/2.
    """
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    poly = _bernoulli_polynomial(k)
    f = theta.modulus
    if f == 1:
        return _horner(poly, Fraction(0))
    total: Any = Fraction(0)
    for a in range(1, f + 1):
        value = theta(a)
        if value == 0:
            continue
        total = total + value * _horner(poly, Fraction(a, f))
    return _rational_if_possible(total * Fraction(f) ** (k - 1))


def l_value_nonpositive(theta: DirichletCharacter, k: int) -> Fraction | CycloElem:
    """L(1 - k, theta) for theta taken at its modulus (imprimitive factors included)."""
    if theta.modulus == 1:
        return -_horner(_bernoulli_polynomial(k), Fraction(1)) / k
    return _rational_if_possible(generalized_bernoulli(theta, k) * Fraction(-1, k))


def _radical(n: int) -> int:
    return math.prod(primefactors(n))


def _at_modulus(chi: DirichletCharacter, modulus: int) -> DirichletCharacter:
    return chi if modulus == chi.modulus else chi.extend(modulus)


def _restricted_divisor_sums(theta: DirichletCharacter, power: int, coprime: int, n_max: int) -> list:
    """sum over d | n with gcd(d, coprime) = 1 of theta(d) d^power, for 0 < n <= n_max."""
    out: list[Any] = [Fraction(0)] * (n_max + 1)
    for d in range(1, n_max + 1):
        if math.gcd(d, coprime) != 1:
            continue
        value = theta(d)
        if value == 0:
            continue
        term = value * Fraction(d) ** power
        for n in range(d, n_max + 1, d):
            out[n] = out[n] + term
    return out


def eisenstein_EmM(m_weight: int, M_level: int, theta: DirichletCharacter, n_max: int) -> QExpansion:
    """E_{m,M}(theta): constant term L_M(1 - m, theta)/2, a(n) over divisors prime to 3M.

    Raises:
        ParityViolation: If theta(-1) != (-1)^m.
    """
    if m_weight < 1:
        raise ValueError(f"Eisenstein weight must be positive, got {m_weight}")
    if theta.parity != (-1) ** m_weight:
        raise ParityViolation(f"theta(-1) = {theta.parity} does not match weight {m_weight}")
    modulus = math.lcm(theta.modulus, _radical(M_level))
    constant = l_value_nonpositive(_at_modulus(theta, modulus), m_weight) * Fraction(1, 2)
    coefficients = _restricted_divisor_sums(theta, m_weight - 1, 3 * M_level, n_max)
    coefficients[0] = _rational_if_possible(constant)
    return QExpansion.from_list(coefficients, m_weight, math.lcm(M_level, theta.modulus), theta)


def katz_evaluation(k: int, L: int, theta: DirichletCharacter, n_max: int) -> QExpansion:
    """The Eisenstein measure at a character: E_{k,3L}(theta)|iota_3.

    The constant term is the 3-adically interpolated value
    (1 - chi(3) 3^(k-1)) L_L(1 - k, chi) / 2 with chi = (theta eps3^k) primitive;
    it vanishes for theta = eps3 and k = 1.
    """
    E = iota(eisenstein_EmM(k, 3 * L, theta, n_max), P)
    chi = (theta * EPS3 ** k).primitive()
    euler = 1 - chi(P) * Fraction(P) ** (k - 1)
    modulus = math.lcm(chi.modulus, _radical(L))
    constant = _rational_if_possible(euler * l_value_nonpositive(_at_modulus(chi, modulus), k) * Fraction(1, 2))
    return QExpansion.from_list((constant,) + E.coefficients[1:], k, E.level, theta)


# Measures and their evaluations

def eval_form_measure(g: QExpansion, phi: CharacterOnZ3Star, n_max: int | None = None) -> QExpansion:
    """sum over n prime to 3 of phi(n) a(n, g) q^n."""
    n = g.n_max if n_max is None else n_max
    if n > g.n_max:
        raise CoefficientShortfall(f"form measure needs {n} coefficients, have {g.n_max}")
    coefficients: list[Any] = [Fraction(0)]
    for k in range(1, n + 1):
        coefficients.append(phi(k) * g[k] if k % P else Fraction(0))
    level = math.lcm(g.level * (P if g.level % P == 0 else P * P), phi.conductor ** 2)
    return QExpansion.from_list(coefficients, g.weight, level, g.character * phi.power(2).dirichlet)


def _prime_to_3(n: int) -> int:
    while n % P == 0:
        n //= P
    return n


def _common_ring(f: QExpansion, g: QExpansion) -> tuple[QExpansion, QExpansion]:
    if f.ring == g.ring:
        return f, g
    if f.ring == RATIONAL:
        return f.map(lambda c: c, g.ring), g
    if g.ring == RATIONAL:
        return f, g.map(lambda c: c, f.ring)
    raise RingMismatch(f"cannot convolve {f.ring} and {g.ring} expansions")


def eval_convolution(g: QExpansion, theta: DirichletCharacter, k: int, phi: CharacterOnZ3Star, L: int,
                     n_max: int, beta: int | None = None) -> QExpansion:
    """(phi-twist of g)|[L/J] * E_{k-l,3L}(theta)|iota_3, a weight-k expansion of level L 3^beta.

    J is the prime-to-3 level of g; beta defaults to max(2, v_3(level of g)).
    """
    if g.weight >= k:
        raise ValueError(f"convolution weight {k} must exceed the weight {g.weight} of g")
    J = _prime_to_3(g.level)
    if L % J:
        raise ValueError(f"L = {L} is not a multiple of the prime-to-3 level {J} of g")
    beta = beta or max(2, v3(g.level))
    dilation = L // J
    inner = -(-n_max // dilation)
    twisted = v_operator(eval_form_measure(g, phi, inner), dilation).truncate(n_max)
    eisenstein = katz_evaluation(k - g.weight, L, theta, n_max)
    twisted, eisenstein = _common_ring(twisted, eisenstein)
    product = mul(twisted, eisenstein)
    logger.debug("convolution at level %d * 3^%d with %d coefficients", L, beta, n_max)
    return QExpansion(product.coefficients, k, L * P ** beta, product.character, product.ring)


@dataclass(eq=False)
class ArithmeticMeasure:
    """A q-expansion valued measure on Z_3^x, known through its evaluations."""

    kind: str
    weight: int
    character: DirichletCharacter
    form: QExpansion | None = None
    level: int | None = None
    inner: ArithmeticMeasure | None = None
    _values: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @classmethod
    def form_measure(cls, g: QExpansion) -> ArithmeticMeasure:
        return cls(FORM, g.weight, g.character, form=g)

    @classmethod
    def katz(cls, L: int, weight: int = 1, character: DirichletCharacter = EPS3) -> ArithmeticMeasure:
        return cls(KATZ, weight, character, level=L)

    @classmethod
    def convolution(cls, inner: ArithmeticMeasure, L: int, k: int) -> ArithmeticMeasure:
        if inner.kind != FORM:
            raise ValueError("only form measures can be convolved with the Eisenstein measure")
        return cls(CONVOLUTION, k, DirichletCharacter.trivial(), inner=inner, level=L)

    def eisenstein_character(self, phi: CharacterOnZ3Star) -> DirichletCharacter:
        """theta with psi_g phi^2 theta trivial, so the convolution has trivial nebentypus."""
        return self.inner.character.conjugate() * phi.power(-2).dirichlet

    def evaluate(self, phi: CharacterOnZ3Star, n_max: int) -> QExpansion:
        key = (phi, n_max)
        with self._lock:
            if key in self._values:
                return self._values[key]
        if self.kind == FORM:
            value = eval_form_measure(self.form, phi, n_max)
        elif self.kind == KATZ:
            value = katz_evaluation(self.weight, self.level, self.character * phi.dirichlet, n_max)
        elif self.kind == CONVOLUTION:
            value = eval_convolution(self.inner.form, self.eisenstein_character(phi), self.weight, phi,
                                     self.level, n_max)
        else:
            raise ValueError(f"unknown measure kind {self.kind!r}")
        with self._lock:
            self._values[key] = value
        return value

    def is_integral(self, phi: CharacterOnZ3Star, n_max: int, precision: int | None = None) -> bool:
        """Every coefficient of the evaluation has non-negative 3-adic valuation."""
        return is_integral(self.evaluate(phi, n_max), precision)


def is_integral(f: QExpansion, precision: int | None = None) -> bool:
    M = precision or config.precision
    for c in f.coefficients:
        v = coefficient_valuation(c, M)
        if v is not None and v < 0:
            return False
    return True


# Ordinary projection

def _coordinates(h: QExpansion) -> tuple[int, Callable[[Any], list[Fraction]]]:
    if h.ring == RATIONAL:
        return 1, lambda c: [Fraction(c)]
    if h.ring == QUADRATIC:
        def quadratic(c):
            if isinstance(c, QuadraticOrderElem):
                return [c.a, c.b]
            return [Fraction(c), Fraction(0)]
        return 2, quadratic
    if h.ring == CYCLO:
        order = next(c.order for c in h.coefficients if isinstance(c, CycloElem))

        def cyclo(c):
            if not isinstance(c, CycloElem):
                c = CycloElem.from_rational(c, order)
            return list(c.lift(order).coefficients)
        width = len(cyclo(Fraction(0)))
        return width, cyclo
    raise RingMismatch(f"the Krylov span needs exact coefficients, not {h.ring}")


def _to_padic(value: Any, precision: int) -> Padic3:
    if isinstance(value, Padic3):
        return value
    if isinstance(value, QuadraticOrderElem):
        return value.to_padic(precision)
    if isinstance(value, CycloElem):
        if not value.is_rational():
            raise RingMismatch(f"{value} does not lie in Q_3")
        value = value.to_rational()
    return Padic3.from_rational(value, precision)


def _poly_mulmod(a: list[int], b: list[int], modulus_poly: list[int], modulus: int) -> list[int]:
    d = len(modulus_poly) - 1
    product = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                product[i + j] += x * y
    for i in range(len(product) - 1, d - 1, -1):
        c = product[i] % modulus
        if c:
            for j in range(d + 1):
                product[i - d + j] -= c * modulus_poly[j]
    return [c % modulus for c in (product + [0] * d)[:d]]


def _poly_powmod(exponent: int, modulus_poly: list[int], modulus: int) -> list[int]:
    d = len(modulus_poly) - 1
    result = [1] + [0] * (d - 1)
    base = _poly_mulmod([0, 1], [1], modulus_poly, modulus) if d > 1 else [(-modulus_poly[0]) % modulus]
    while exponent:
        if exponent & 1:
            result = _poly_mulmod(result, base, modulus_poly, modulus)
        base = _poly_mulmod(base, base, modulus_poly, modulus)
        exponent >>= 1
    return result


def unit_root_idempotent(minimal_polynomial: list[int], precision: int) -> list[int]:
    """E(X) mod 3^M with E(U) the projector onto the unit-root part of U, whose minimal polynomial is given.

    The polynomial is monic with integer coefficients, constant term first.
    """
    d = len(minimal_polynomial) - 1
    _, factors = Poly(list(reversed([c % P for c in minimal_polynomial])), _x, modulus=P).factor_list()
    orders = [P ** F.degree() - 1 for F, _ in factors if F.degree() > 0]
    exponent = P ** max(1, math.ceil(math.log(max(d, 1), P)) + 1) * math.lcm(1, *orders)
    e = _poly_powmod(exponent, [c % P for c in minimal_polynomial], P)
    modulus = P ** precision
    known = 1
    while known < precision:
        known = min(2 * known, precision)
        e2 = _poly_mulmod(e, e, minimal_polynomial, modulus)
        e3 = _poly_mulmod(e2, e, minimal_polynomial, modulus)
        e = [(3 * x - 2 * y) % modulus for x, y in zip(e2, e3)]
    return e


def _krylov_vector(h: QExpansion, flatten, j: int, count: int) -> list[Fraction]:
    step = P ** j
    out: list[Fraction] = []
    for n in range(count + 1):
        out.extend(flatten(h[step * n]))
    return out


def ordinary_project_form(h: QExpansion, precision: int | None = None, max_degree: int = 12) -> QExpansion:
    """e h for the ordinary projector e = lim U_3^(n!), with 3-adic coefficients.

    The minimal polynomial of U_3 on the Krylov span of h is found on the
    truncation and certified one U_3-step further; its unit-root idempotent
    is then applied to h.

    Raises:
        KrylovUnstable: If no certified relation is found, or the minimal
            polynomial is not 3-integral.
    """
    M = precision or config.precision
    width, flatten = _coordinates(h)
    relation = None
    for d in range(1, max_degree + 1):
        count = h.n_max // P ** d
        check = h.n_max // P ** (d + 1)
        if (check + 1) * width <= d:
            break
        columns = [_krylov_vector(h, flatten, j, count) for j in range(d)]
        A = dm([list(row) for row in zip(*columns)], d)
        b = dm([[x] for x in _krylov_vector(h, flatten, d, count)], 1)
        x = solve(A, b)
        if x is None:
            continue
        coefficients = [row[0] for row in to_rows(x)]
        shifted = [_krylov_vector(h, flatten, j + 1, check) for j in range(d)]
        combination = [sum((c * column[i] for c, column in zip(coefficients, shifted)), Fraction(0))
                       for i in range(len(shifted[0]))]
        if combination == _krylov_vector(h, flatten, d + 1, check):
            relation = coefficients
            break
        logger.debug("U_3 relation of degree %d does not survive the next step", d)
    if relation is None:
        raise KrylovUnstable(f"U_3 Krylov span did not stabilise within {h.n_max} coefficients")
    if any(c.denominator % P == 0 for c in relation):
        raise KrylovUnstable(f"minimal polynomial of U_3 is not 3-integral: {relation}")

    modulus = P ** M
    minimal = [(-c.numerator * pow(c.denominator, -1, modulus)) % modulus for c in relation] + [1]
    idempotent = unit_root_idempotent(minimal, M)
    degree = len(relation)
    count = h.n_max // P ** (degree - 1)
    out = []
    for n in range(count + 1):
        total = Padic3.zero(M)
        for j, e in enumerate(idempotent):
            if e:
                total = total + Padic3.from_int(e, M) * _to_padic(h[P ** j * n], M)
        out.append(total)
    level = _prime_to_3(h.level) * P
    logger.debug("ordinary projection: U_3 minimal polynomial of degree %d", degree)
    return QExpansion(tuple(out), h.weight, level, h.character, PADIC)


def descend_level(h: QExpansion, beta: int) -> QExpansion:
    """U_3^(beta-1) h, moving a form of level L 3^beta down to level L 3."""
    if beta < 1:
        raise ValueError(f"beta must be at least 1, got {beta}")
    step = P ** (beta - 1)
    if h.level % step:
        raise ValueError(f"level {h.level} is not divisible by 3^{beta - 1}")
    return QExpansion(h.coefficients[::step], h.weight, h.level // step, h.character, h.ring)


# Hida's linear form

def hida_linear_form_exact(h: QExpansion, projector: HeckeProjector) -> QuadraticOrderElem:
    """a(1, 1_f h) = sum c_n a(n, h), exactly in Q(theta).

    Raises:
        PrecisionExhausted: If h has fewer coefficients than the projector uses.
    """
    if projector.level % h.level:
        raise ValueError(f"expansion of level {h.level} does not live at the projector level {projector.level}")
    if h.n_max < projector.bound:
        raise PrecisionExhausted(f"linear form needs {projector.bound} coefficients, have {h.n_max}")
    if h.ring not in (RATIONAL, QUADRATIC):
        raise RingMismatch(f"exact linear form needs rational or quadratic coefficients, not {h.ring}")
    return projector.apply(h.coefficients)


def hida_linear_form(h: QExpansion, projector: HeckeProjector, c: int | Fraction | None = None,
                     precision: int | None = None) -> Padic3:
    """c * l_f(h) as a 3-adic number; c defaults to 3^c_valuation."""
    M = precision or config.precision
    scale = Fraction(c) if c is not None else Fraction(P) ** projector.c_valuation
    if h.ring != PADIC:
        return (hida_linear_form_exact(h, projector) * scale).to_padic(M)
    if projector.level % h.level:
        raise ValueError(f"expansion of level {h.level} does not live at the projector level {projector.level}")
    if h.n_max < projector.bound:
        raise PrecisionExhausted(f"linear form needs {projector.bound} coefficients, have {h.n_max}")
    working = M + projector.c_valuation
    total = Padic3.zero(working)
    for n in range(1, projector.bound + 1):
        cn = projector.coefficients[n]
        if not cn.is_zero() and not h[n].is_zero():
            total = total + cn.to_padic(working) * h[n]
    return total * Padic3.from_rational(scale, working)


# The Rankin-Selberg measure of f0~ against g_rho and g_sigma

@dataclass(frozen=True)
class CongruenceSetup:
    """Exact data at level 3 N m^2 shared by the rho and sigma measures."""

    curve: EllipticCurveQ
    m: int
    target: TargetSystem
    projector: HeckeProjector
    precision: int
    space: ModularSymbolSpace = field(compare=False, repr=False)

    @property
    def L(self) -> int:
        return self.curve.conductor * self.m * self.m

    @property
    def level(self) -> int:
        return P * self.L

    @property
    def t(self) -> int:
        """(-1)^k lcm(N, J) for k = 2 and J = m^2."""
        return math.lcm(self.curve.conductor, self.m * self.m)

    @property
    def interpolation_t(self) -> int:
        """(-1)^k lcm(N, J) N^(k/2) J^(l/2) Gamma(l) for k = 2, l = 1 and J = m^2."""
        return self.t * self.curve.conductor * self.m

    @property
    def c_valuation(self) -> int:
        return self.projector.c_valuation

    @property
    def theta(self) -> QuadraticOrderElem:
        """The unit root u as an exact element of Q(theta)."""
        return QuadraticOrderElem.theta(self.target.a3)

    @property
    def u(self) -> Padic3:
        return hensel_unit_root(self.target.a3, self.precision)


def congruence_setup(E: EllipticCurveQ, m: int, precision: int | None = None, cache: Cache | None = None,
                     an: list[int] | None = None) -> CongruenceSetup:
    """Build the modular symbols at level 3 N m^2 and the projector onto f0~.

    Raises:
        NotOrdinary: If E is not ordinary at 3.
        HypothesisFailure: If m is not prime to 3N.
    """
    M = precision or config.precision
    N = E.conductor
    if N % P == 0 or ap(E, P) % P == 0:
        raise NotOrdinary(f"{E.name} is not good ordinary at 3")
    if math.gcd(m, P * N) != 1:
        raise HypothesisFailure(f"m = {m} is not prime to 3N = {P * N}", ["m_coprime_3N"])
    level = P * N * m * m
    space = build_space(level, 0)
    if cache is not None:
        load_hecke_matrices(space, cache)
    bound = max(sturm_bound(level) + 1, 120)
    if an is None or len(an) <= bound:
        an = an_list(E, bound)
    target = TargetSystem(tuple(an[:bound + 1]), N, level)
    projector = congruence_projector(space, target, M)
    if cache is not None:
        store_hecke_matrices(space, cache)
    logger.info("setup for %s, m=%d at level %d: dimension %d, c_valuation %d",
                E.name, m, level, space.dimension, projector.c_valuation)
    return CongruenceSetup(E, m, target, projector, M, space)


def _beta(data: ArtinTwistData, side: str) -> int:
    if side == "rho":
        return 2 if data.unramified else 3
    if side == "sigma":
        return 2
    raise ValueError(f"side must be 'rho' or 'sigma', got {side!r}")


def exact_measure_value(setup: CongruenceSetup, data: ArtinTwistData, side: str,
                        phi: CharacterOnZ3Star | None = None) -> QuadraticOrderElem:
    """c(f, m) l_f0(e(mu_g^L * dE)(phi)) exactly in Q(theta).

    Raises:
        ComputationFailure: For wild phi, whose convolution leaves Gamma_0.
    """
    phi = phi or CharacterOnZ3Star.trivial()
    if phi.is_wild:
        raise ComputationFailure(f"wild character {phi.label()} needs Gamma_1 modular symbols")
    if data.m != setup.m:
        raise ValueError(f"twist data for m = {data.m} does not match the setup for m = {setup.m}")
    beta = _beta(data, side)
    n_max = P ** (beta - 1) * setup.projector.bound
    g = data.g(side, -(-n_max // setup.curve.conductor) + 1)
    measure = ArithmeticMeasure.convolution(ArithmeticMeasure.form_measure(g), setup.L, 2)
    h = measure.evaluate(phi, n_max)
    h = QExpansion(h.coefficients, h.weight, setup.L * P ** beta, h.character, h.ring)
    value = hida_linear_form_exact(descend_level(h, beta), setup.projector)
    value = value * setup.theta ** (1 - beta) * Fraction(P) ** setup.c_valuation
    logger.info("%s-side measure for %s, m=%d at phi=%s: valuation %s", side, setup.curve.name, setup.m,
                phi.label(), coefficient_valuation(value, setup.precision))
    return value


def measure_value_RS(setup: CongruenceSetup, data: ArtinTwistData, side: str,
                     phi: CharacterOnZ3Star | None = None) -> Padic3:
    """mu_{f0~ x g}(phi) in Z_3 for g = g_rho or g_sigma|iota_m."""
    return exact_measure_value(setup, data, side, phi).to_padic(setup.precision)


# Congruence verdict

@dataclass(frozen=True)
class CongruenceVerdict:
    r_rho: Padic3
    r_sigma: Padic3
    relaxed_primes: tuple[int, ...] = ()

    @property
    def integral(self) -> bool:
        return self.r_rho.valuation >= 0 and self.r_sigma.valuation >= 0

    @property
    def difference_valuation(self) -> int | None:
        if not self.integral:
            return None
        return (self.r_rho - self.r_sigma).valuation

    @property
    def holds(self) -> bool:
        v = self.difference_valuation
        return v is not None and v >= 1


def r_value(setup: CongruenceSetup, value: Padic3) -> Padic3:
    """measure / (u t)."""
    return value / (setup.u * Padic3.from_int(setup.t, setup.precision))


def relaxation_factor(E: EllipticCurveQ, m: int, side: str, primes) -> Fraction:
    """prod over q in primes of P_q(E x side, 1)."""
    factor = Fraction(1)
    for q in primes:
        factor *= evaluate_polynomial(twisted_local_factor(local_factor(E, q), m, q, side), 1)
    return factor


def congruence_verdict(setup: CongruenceSetup, rho_value: Padic3, sigma_value: Padic3,
                       relaxed_primes=()) -> CongruenceVerdict:
    """R(rho) against R(sigma), with the local factors at ``relaxed_primes`` multiplied in."""
    M = setup.precision
    r_rho, r_sigma = r_value(setup, rho_value), r_value(setup, sigma_value)
    if relaxed_primes:
        r_rho = r_rho * Padic3.from_rational(relaxation_factor(setup.curve, setup.m, "rho", relaxed_primes), M)
        r_sigma = r_sigma * Padic3.from_rational(relaxation_factor(setup.curve, setup.m, "sigma", relaxed_primes), M)
    return CongruenceVerdict(r_rho, r_sigma, tuple(relaxed_primes))


# Interpolation against complex L-values

def stabilized_target_form(target: TargetSystem, n_max: int, an: list[int] | None = None) -> QExpansion:
    """q-expansion of f0~: a(q) = 0 at the zero primes and a(3^k n) = theta^k a(n) when stabilised."""
    an = list(an if an is not None else target.an)
    if len(an) <= n_max:
        raise CoefficientShortfall(f"need {n_max} coefficients of f, have {len(an) - 1}")
    zero_primes = target.zero_primes
    theta = QuadraticOrderElem.theta(target.a3)
    zero = QuadraticOrderElem(Fraction(0), Fraction(0), target.a3)
    coefficients = [zero]
    for n in range(1, n_max + 1):
        if any(n % q == 0 for q in zero_primes):
            coefficients.append(zero)
            continue
        if not target.stabilized:
            coefficients.append(QuadraticOrderElem(Fraction(an[n]), Fraction(0), target.a3))
            continue
        k, rest = 0, n
        while rest % P == 0:
            rest //= P
            k += 1
        coefficients.append(theta ** k * an[rest])
    return QExpansion.from_list(coefficients, 2, target.level)


@dataclass(frozen=True)
class AnalyticSide:
    """Complex ingredients of the interpolation formula for one of rho, sigma."""

    side: str
    beta: int
    root_number: mp.mpc
    d_value: mp.mpc
    tau_terms: tuple[TauTerm, ...]
    removed: tuple[int, ...]
    correction: mp.mpf

    def twisted_d_value(self, u) -> mp.mpc:
        """D(f0~, (g|iota_3)|tau_beta, 1) from D(f0~, g, 1)."""
        shift = sum(term.coefficient * dirichlet_shift(term.dilation, mp.mpf(1), u, removed=self.removed)
                    for term in self.tau_terms)
        return shift * self.correction * self.d_value


def _fricke_terms(level: int, digits: int, y_factor=mp.mpf("1.1")) -> int:
    y = y_factor / mp.sqrt(level)
    smallest = min(y, 1 / (level * y))
    return int((digits + 5) * math.log(10) / (2 * math.pi * float(smallest))) + 2


def analytic_side(E: EllipticCurveQ, data: ArtinTwistData, side: str, u, digits: int | None = None) -> AnalyticSide:
    D = digits or config.digits
    if side == "rho":
        level = data.level_rho
        g = data.g_rho(_fricke_terms(level, D))
        case = RHO_UNRAMIFIED if data.unramified else RHO_RAMIFIED
        correction = mp.mpf(1)
    elif side == "sigma":
        level = P
        g = data.g_sigma(_fricke_terms(level, D))
        case = SIGMA_AT_P
        correction = mp.mpf(1)
        for q in primefactors(data.m):
            correction *= mp.mpf(eps3(q)) / q
    else:
        raise ValueError(f"side must be 'rho' or 'sigma', got {side!r}")
    w = fricke_pseudo_eigenvalue(g, 1, level, D)
    d_value = analytic_D_value(E, data, side, u, D)
    return AnalyticSide(side, _beta(data, side), w, d_value, tuple(tau_reduction(case, w)),
                        tuple(primefactors(data.m)), correction)


def _mp(x) -> mp.mpf:
    x = Fraction(x)
    return mp.mpf(x.numerator) / x.denominator


def interpolation_rhs(analytic: AnalyticSide, u, c, t, petersson) -> mp.mpc:
    """c t u^(1-beta) 3^(beta/2) D(f0~, (g|iota_3)|tau_beta, 1) / (2^3 pi^2 i^3 <f0~|tau, f0~>).

    ``t`` is the full constant lcm(N, J) N J^(1/2) of ``CongruenceSetup.interpolation_t``.
    ``petersson`` is the cup-product pairing c(f, m) Omega_Sigma of periods of
    2 pi i f(z) dz; the Petersson integral is that pairing over 8 pi^2 i.
    """
    u = mp.mpc(u)
    beta = analytic.beta
    integral = mp.mpc(petersson) / (8 * mp.pi ** 2 * mp.j)
    numerator = _mp(c) * _mp(t) * u ** (1 - beta) * mp.mpf(P) ** (mp.mpf(beta) / 2) * analytic.twisted_d_value(u)
    return numerator / (8 * mp.pi ** 2 * mp.j ** 3 * integral)


def embed_exact(value: Any) -> mp.mpc:
    """Complex image of an exact measure value (theta -> the root used for periods).

    Raises:
        RecognitionFailure: If the value is only known 3-adically.
    """
    if isinstance(value, QuadraticOrderElem):
        return value.to_complex(0)
    if isinstance(value, (int, Fraction)):
        value = Fraction(value)
        return mp.mpc(mp.mpf(value.numerator) / value.denominator)
    raise RecognitionFailure(f"cannot embed a {type(value).__name__} measure value into C")


def interpolation_check(value: Any, rhs) -> mp.mpf:
    """|exact - rhs| / |rhs|."""
    rhs = mp.mpc(rhs)
    if rhs == 0:
        raise RecognitionFailure("analytic side of the interpolation vanishes")
    return abs(embed_exact(value) - rhs) / abs(rhs)


def unit_free_ratio(rho_value: Any, sigma_value: Any, rho_side: AnalyticSide, sigma_side: AnalyticSide, u) -> mp.mpf:
    """Relative residual of mu(rho)/mu(sigma) against the ratio of interpolation formulas.

    c(f, m), t and the Petersson norm are common to both sides and cancel.
    """
    sigma = embed_exact(sigma_value)
    if sigma == 0:
        raise RecognitionFailure("sigma-side measure vanishes; the ratio is undefined")
    analytic = interpolation_rhs(rho_side, u, 1, 1, 1) / interpolation_rhs(sigma_side, u, 1, 1, 1)
    return abs(embed_exact(rho_value) / sigma - analytic) / abs(analytic)


def petersson_norm(setup: CongruenceSetup, digits: int | None = None) -> mp.mpc:
    """The pairing c(f, m) Omega_Sigma standing for <f0~|tau, f0~>, up to a 3-adic unit."""
    D = digits or config.digits
    terms = period_terms(setup.level, D)
    an = an_list(setup.curve, terms)
    form = stabilized_target_form(setup.target, terms, an)
    periods = period_integrals(setup.space, form, setup.target, D)
    return petersson_from_relation(Fraction(P) ** setup.c_valuation, periods.omega_sigma)


@dataclass(frozen=True)
class InterpolationResult:
    """Exact measure values against the interpolation formula on both sides.

    The period relation pins the Petersson norm down only up to a 3-adic unit.
    Each side is therefore compared with the normalization exact/rhs measured
    on the other side.
    """

    exact_rho: mp.mpc
    exact_sigma: mp.mpc
    rhs_rho: mp.mpc
    rhs_sigma: mp.mpc

    def __post_init__(self):
        if 0 in (self.exact_rho, self.exact_sigma, self.rhs_rho, self.rhs_sigma):
            raise RecognitionFailure("a vanishing side leaves the interpolation normalization undefined")

    @property
    def normalization_rho(self) -> mp.mpc:
        return self.exact_rho / self.rhs_rho

    @property
    def normalization_sigma(self) -> mp.mpc:
        return self.exact_sigma / self.rhs_sigma

    @property
    def residual_rho(self) -> mp.mpf:
        return abs(self.exact_rho - self.normalization_sigma * self.rhs_rho) / abs(self.exact_rho)

    @property
    def residual_sigma(self) -> mp.mpf:
        return abs(self.exact_sigma - self.normalization_rho * self.rhs_sigma) / abs(self.exact_sigma)


def reconcile_interpolation(setup: CongruenceSetup, data: ArtinTwistData, rho_value: QuadraticOrderElem,
                            sigma_value: QuadraticOrderElem, petersson=None,
                            digits: int | None = None) -> InterpolationResult:
    """Evaluate the interpolation formula for rho and sigma against the exact values.

    Raises:
        RecognitionFailure: If a measure value or an analytic side vanishes.
    """
    D = digits or config.digits
    if petersson is None:
        petersson = petersson_norm(setup, D)
    with mp.workdps(D + config.guard_digits):
        u = setup.theta.to_complex(0)
        c = Fraction(P) ** setup.c_valuation
        rhs = {side: interpolation_rhs(analytic_side(setup.curve, data, side, u, D), u, c,
                                       setup.interpolation_t, petersson)
               for side in ("rho", "sigma")}
        result = InterpolationResult(embed_exact(rho_value), embed_exact(sigma_value), rhs["rho"], rhs["sigma"])
        logger.info("interpolation for %s, m=%d: normalization %s, residuals %s / %s", setup.curve.name, setup.m,
                    mp.nstr(result.normalization_rho, 12), mp.nstr(result.residual_rho, 3),
                    mp.nstr(result.residual_sigma, 3))
        return result
