"""Numerical L-functions by the smoothed approximate functional equation.

For Lambda(s) = C^(s/2) gamma(s) L(s) with Lambda(s) = w * conj(Lambda)(k0 - s)
and any t > 0:

    Lambda(s) = sum b(n) n^-s G(s, n/t) + w sum conj(b(n)) n^(s-k0) G(k0-s, n t)

where G(s, y) is the incomplete Mellin transform of the inverse Mellin
transform of C^(s/2) gamma(s). Agreement between two values of t is the
consistency certificate of every evaluation and the basis of sign solving.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Sequence

import mpmath as mp
from sympy import primefactors

from .artin import ArtinTwistData, eps3, local_factor_rho, local_factor_sigma, tensor_local_factor
from .config import config
from .ellcurve import EllipticCurveQ, an_list, local_factor, smallest_prime_factors
from .errors import AmbiguousSign, CoefficientShortfall, EvaluationDegenerate, MissingLocalFactor, SignUnknown
from .rings import CycloElem, default_tolerance
from .series import DirichletCharacter, QExpansion, QuadraticOrderElem

logger = logging.getLogger(__name__)

GAMMA_R = "R"
GAMMA_C = "C"

# second smoothing parameter for the consistency certificate
_T_CHECK = mp.mpf("1.2")


def to_mp(value: Any) -> mp.mpc:
    """Complex embedding of an exact or floating coefficient."""
    if isinstance(value, (CycloElem, QuadraticOrderElem)):
        return mp.mpc(value.to_complex())
    if isinstance(value, Fraction):
        return mp.mpc(mp.mpf(value.numerator) / value.denominator)
    return mp.mpc(value)


class EulerFactorTable:
    """Local polynomials P_q(X), constant term first, generated on demand.

    ``overrides`` replace generated factors at individual primes.
    """

    def __init__(self, factor: Callable[[int], tuple], degree: int, overrides: dict[int, tuple] | None = None):
        self._factor = factor
        self._degree = degree
        self._overrides = dict(overrides or {})
        self._cache: dict[int, tuple] = {}

    @property
    def degree(self) -> int:
        return self._degree

    def __getitem__(self, q: int) -> tuple:
        if q in self._overrides:
            poly = self._overrides[q]
        elif q in self._cache:
            return self._cache[q]
        else:
            poly = tuple(self._factor(q))
        if poly[0] != 1 or len(poly) - 1 > self._degree:
            raise ValueError(f"invalid local factor at {q}: {poly}")
        self._cache[q] = poly
        return poly

    def __contains__(self, q: int) -> bool:
        try:
            self[q]
        except (ValueError, KeyError):
            return False
        return True

    def with_overrides(self, overrides: dict[int, tuple]) -> EulerFactorTable:
        merged = {**self._overrides, **overrides}
        return EulerFactorTable(self._factor, self._degree, merged)


def inverse_series(poly: Sequence, terms: int) -> list:
    """Coefficients of 1/P(X) up to X^(terms-1)."""
    out = [Fraction(1)] + [Fraction(0)] * (terms - 1)
    for k in range(1, terms):
        acc = Fraction(0)
        for i in range(1, min(k, len(poly) - 1) + 1):
            acc -= poly[i] * out[k - i]
        out[k] = acc
    return out


def coefficients_from_euler(table: EulerFactorTable, n_max: int) -> list:
    """Dirichlet coefficients [0, b(1), ..., b(n_max)] of the Euler product."""
    b = [Fraction(0)] * (n_max + 1)
    if n_max < 1:
        return b
    b[1] = Fraction(1)
    spf = smallest_prime_factors(n_max)
    local: dict[int, list] = {}
    for n in range(2, n_max + 1):
        q = spf[n]
        rest, k = n, 0
        while rest % q == 0:
            rest //= q
            k += 1
        if rest > 1:
            b[n] = b[rest] * b[n // rest]
            continue
        if q not in local:
            local[q] = inverse_series(table[q], int(math.log(n_max, q)) + 2)
        b[n] = local[q][k]
    return b


def rs_degree4_coeffs(f_euler: EulerFactorTable, g_euler: EulerFactorTable, n_max: int) -> list:
    """Coefficients of prod_q prod_(i,j) (1 - alpha_i(q,f) alpha_j(q,g) q^-s)^-1."""
    table = EulerFactorTable(lambda q: tensor_local_factor(f_euler[q], g_euler[q]), 4)
    return coefficients_from_euler(table, n_max)


@dataclass
class LFunctionSpec:
    """An entire L-function with its functional equation data.

    ``gamma_factors`` lists (kind, shift) pairs, kind "C" for
    Gamma_C(s + shift) = 2 (2 pi)^-(s+shift) Gamma(s + shift) and "R" for
    Gamma_R(s + shift) = pi^-(s+shift)/2 Gamma((s + shift)/2).
    """

    name: str
    degree: int
    conductor: int
    gamma_factors: tuple[tuple[str, int], ...]
    motivic_edge: int
    coefficients: Callable[[int], Sequence]
    euler: EulerFactorTable
    sign: Any = None
    self_dual: bool = True
    entire: bool = True
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.entire:
            raise ValueError(f"{self.name}: only entire L-functions are supported")
        if self.sign is not None and abs(abs(mp.mpc(self.sign)) - 1) > mp.mpf(10) ** -10:
            raise ValueError(f"{self.name}: the sign must have modulus 1, got {self.sign}")

    @property
    def shape(self) -> str:
        kinds = "".join(f"{kind}{shift}" for kind, shift in self.gamma_factors)
        if kinds not in ("R0", "R1", "C0", "C1", "C0C0"):
            raise ValueError(f"{self.name}: unsupported gamma factor {self.gamma_factors}")
        return kinds

    def coefficient_list(self, n_max: int) -> list[mp.mpc]:
        cached = self._cache.get("coefficients")
        if cached is None or len(cached) <= n_max:
            raw = list(self.coefficients(n_max))
            if len(raw) <= n_max:
                raise CoefficientShortfall(f"{self.name}: needed {n_max} coefficients, got {len(raw) - 1}")
            cached = [to_mp(c) for c in raw]
            self._cache["coefficients"] = cached
        return cached


def coefficient_demand(spec: LFunctionSpec, digits: int, t_max=_T_CHECK) -> int:
    """Number of Dirichlet coefficients the kernels need at the given precision."""
    target = (digits + 5) * math.log(10)
    root = math.sqrt(spec.conductor)
    shape = spec.shape
    if shape.startswith("R"):
        n = math.sqrt(spec.conductor * target / math.pi)
    elif shape == "C0C0":
        n = root / (4 * math.pi ** 2) * (target / 2 + 2) ** 2
    else:
        n = root * target / (2 * math.pi)
    return max(10, math.ceil(config.nmax_safety * float(t_max) * n))


def _gamma_factor(spec: LFunctionSpec, s) -> mp.mpc:
    value = mp.mpf(spec.conductor) ** (s / 2)
    for kind, shift in spec.gamma_factors:
        if kind == GAMMA_C:
            value *= 2 * (2 * mp.pi) ** (-(s + shift)) * mp.gamma(s + shift)
        else:
            value *= mp.pi ** (-(s + shift) / 2) * mp.gamma((s + shift) / 2)
    return value


def kernel(spec: LFunctionSpec, s, y) -> mp.mpc:
    """G(s, y): incomplete Mellin transform of the gamma factor."""
    shape = spec.shape
    if shape[0] == GAMMA_R:
        mu = spec.gamma_factors[0][1]
        q = mp.sqrt(spec.conductor)
        return q ** s * mp.pi ** (-(s + mu) / 2) * mp.gammainc((s + mu) / 2, mp.pi * y * y / (q * q))
    if shape == "C0C0":
        b = mp.sqrt(spec.conductor) / (4 * mp.pi ** 2)
        big_y = y / b
        if s == 1:
            root = mp.sqrt(big_y)
            return 4 * b * 2 * root * mp.besselk(1, 2 * root)
        integral = mp.quad(lambda u: 2 * mp.besselk(0, 2 * mp.sqrt(u)) * u ** (s - 1), [big_y, mp.inf])
        return 4 * b ** s * integral
    mu = spec.gamma_factors[0][1]
    b = mp.sqrt(spec.conductor) / (2 * mp.pi)
    return 2 * (2 * mp.pi) ** (-mu) * b ** s * mp.gammainc(s + mu, y / b)


def _partial_sums(spec: LFunctionSpec, s, t, n_max: int) -> tuple[mp.mpc, mp.mpc]:
    """(A_t, B_t) with Lambda(s) = A_t + w B_t."""
    b = spec.coefficient_list(n_max)
    k0 = spec.motivic_edge
    a_sum = mp.mpc(0)
    b_sum = mp.mpc(0)
    for n in range(1, n_max + 1):
        c = b[n]
        if c == 0:
            continue
        a_sum += c * mp.mpf(n) ** (-s) * kernel(spec, s, n / t)
        b_sum += mp.conj(c) * mp.mpf(n) ** (s - k0) * kernel(spec, k0 - s, n * t)
    return a_sum, b_sum


@dataclass(frozen=True)
class LValue:
    """Result of one AFE evaluation."""

    value: mp.mpc
    completed: mp.mpc
    fe_residual: mp.mpf
    sign: mp.mpc
    terms: int

    def __iter__(self):
        return iter((self.value, self.fe_residual))


def solve_sign(spec: LFunctionSpec, digits: int | None = None):
    """Root number from the t-independence of the approximate functional equation.

    Self-dual specs test w = +1 and w = -1; otherwise w is solved for.

    Raises:
        AmbiguousSign: If neither or both candidate signs are consistent.
    """
    digits = digits or config.digits
    with mp.workdps(digits + config.guard_digits):
        s = mp.mpf(spec.motivic_edge) / 2
        n_max = coefficient_demand(spec, digits)
        a1, b1 = _partial_sums(spec, s, mp.mpf(1), n_max)
        a2, b2 = _partial_sums(spec, s, _T_CHECK, n_max)
        tol = default_tolerance(digits) * max(1, abs(a1), abs(b1))
        if spec.self_dual:
            good = [w for w in (1, -1) if abs(a1 + w * b1 - a2 - w * b2) < tol]
            if len(good) != 1:
                raise AmbiguousSign(f"{spec.name}: consistent signs {good} at tolerance {mp.nstr(tol, 3)}")
            logger.info("%s: sign %+d", spec.name, good[0])
            return good[0]
        if abs(b2 - b1) < tol:
            raise AmbiguousSign(f"{spec.name}: the sign equation is degenerate")
        w = (a1 - a2) / (b2 - b1)
        if abs(abs(w) - 1) > mp.sqrt(tol):
            raise AmbiguousSign(f"{spec.name}: solved sign {mp.nstr(w, 10)} does not have modulus 1")
        return w


def value_afe(spec: LFunctionSpec, s0, digits: int | None = None) -> LValue:
    """L(s0) and Lambda(s0) with the two-smoothing consistency residual.

    Raises:
        SignUnknown: If the sign is unset and the spec is not self-dual.
        CoefficientShortfall: If the coefficient generator runs short.
    """
    digits = digits or config.digits
    if spec.sign is None:
        if not spec.self_dual:
            raise SignUnknown(f"{spec.name}: the sign is unset and the spec is not self-dual")
        spec.sign = solve_sign(spec, digits)
    with mp.workdps(digits + config.guard_digits):
        s = mp.mpmathify(s0)
        w = mp.mpc(spec.sign)
        n_max = coefficient_demand(spec, digits)
        a1, b1 = _partial_sums(spec, s, mp.mpf(1), n_max)
        a2, b2 = _partial_sums(spec, s, _T_CHECK, n_max)
        completed = a1 + w * b1
        other = a2 + w * b2
        residual = abs(completed - other) / max(1, abs(completed))
        value = completed / _gamma_factor(spec, s)
        if residual > default_tolerance(digits):
            logger.warning("%s: functional equation residual %s at s=%s",
                           spec.name, mp.nstr(residual, 3), mp.nstr(s, 5))
        return LValue(value, completed, residual, w, n_max)


def remove_euler(value, spec: LFunctionSpec, primes, s0):
    """value * prod over q in primes of P_q(q^-s0).

    Raises:
        MissingLocalFactor: If a prime has no local factor in the spec.
    """
    result = value
    for q in sorted(set(primes)):
        try:
            poly = spec.euler[q]
        except (KeyError, ValueError) as exc:
            raise MissingLocalFactor(f"{spec.name}: no local factor at {q}") from exc
        x = mp.mpf(q) ** (-mp.mpmathify(s0))
        result = result * sum(to_mp(c) * x ** i for i, c in enumerate(poly))
    return result


def evaluate_qexpansion(g: QExpansion, z) -> mp.mpc:
    q = mp.exp(2j * mp.pi * z)
    total = mp.mpc(0)
    power = mp.mpc(1)
    for c in g.coefficients:
        total += to_mp(c) * power
        power *= q
    return total


def fricke_pseudo_eigenvalue(g: QExpansion, k: int, level: int, digits: int | None = None,
                             y_factor=mp.mpf("1.1")) -> mp.mpc:
    """W with g|tau_L = W g, measured at z = i y_factor/sqrt(L).

    Raises:
        CoefficientShortfall: If the expansion is too short for the evaluation points.
        EvaluationDegenerate: If |g(z)| is too small to divide by.
    """
    digits = digits or config.digits
    with mp.workdps(digits + config.guard_digits):
        y = mp.mpf(y_factor) / mp.sqrt(level)
        smallest = min(y, 1 / (level * y))
        needed = int((digits + 5) * math.log(10) / (2 * math.pi * float(smallest))) + 1
        if g.n_max < needed:
            raise CoefficientShortfall(f"need {needed} coefficients at level {level}, have {g.n_max}")
        z = mp.mpc(0, y)
        value = evaluate_qexpansion(g, z)
        if abs(value) < default_tolerance(digits) ** mp.mpf("0.5"):
            raise EvaluationDegenerate(f"|g(z)| = {mp.nstr(abs(value), 3)} at z = {mp.nstr(z, 8)}")
        image = evaluate_qexpansion(g, -1 / (level * z))
        w = mp.mpf(level) ** (mp.mpf(k) / 2) * (level * z) ** (-k) * image / value
        return w


@dataclass(frozen=True)
class TauTerm:
    """coefficient * g|[dilation]."""

    coefficient: mp.mpc
    dilation: int


RHO_UNRAMIFIED = "rho_unramified"
RHO_RAMIFIED = "rho_ramified"
SIGMA_AT_P = "sigma_at_p"
SIGMA_AT_Q = "sigma_at_q"


def tau_reduction(case: str, w, prime: int = 3) -> list[TauTerm]:
    """Fricke action on g|iota as a combination of dilates of g."""
    w = mp.mpc(w)
    root = mp.sqrt(prime)
    if case in (RHO_UNRAMIFIED, SIGMA_AT_P):
        return [TauTerm(-w / root, 1), TauTerm(w * root, prime)]
    if case == RHO_RAMIFIED:
        return [TauTerm(w, 1)]
    if case == SIGMA_AT_Q:
        return [TauTerm(mp.mpf(eps3(prime)) / prime * w, 1)]
    raise ValueError(f"unknown tau reduction case {case!r}")


def dirichlet_shift(d: int, s, u, p: int = 3, removed: Sequence[int] = ()):
    """Scalar c with D(f0, g|[d], s) = c D(f0, g, s) for a U_p-eigenform f0.

    ``removed`` lists primes at which f0's coefficients vanish; dilations by
    them contribute nothing.
    """
    if d == 1:
        return 1
    if any(d % q == 0 for q in removed):
        return 0
    j, rest = 0, d
    while rest % p == 0:
        rest //= p
        j += 1
    if rest != 1:
        raise ValueError(f"dilation {d} is not a power of {p}")
    if isinstance(s, int):
        return u ** j * Fraction(1, p ** (j * s))
    return u ** j * mp.mpf(p) ** (-j * s)


def dirichlet_spec(chi: DirichletCharacter) -> LFunctionSpec:
    """L(s, chi) for a primitive character."""
    chi = chi.primitive()
    shift = 0 if chi.parity == 1 else 1
    real = chi.order <= 2

    def coefficients(n_max: int) -> list:
        return [0] + [chi(n) for n in range(1, n_max + 1)]

    euler = EulerFactorTable(lambda q: (1, -chi(q)) if chi(q) != 0 else (1,), 1)
    return LFunctionSpec(f"L(chi {chi.label()})", 1, chi.conductor, ((GAMMA_R, shift),), 1,
                         coefficients, euler, sign=1 if real else None, self_dual=real)


def curve_spec(E: EllipticCurveQ) -> LFunctionSpec:
    euler = EulerFactorTable(lambda q: local_factor(E, q), 2)
    return LFunctionSpec(f"L({E.name})", 2, E.conductor, ((GAMMA_C, 0),), 2,
                         lambda n: an_list(E, n), euler)


def twist_spec(E: EllipticCurveQ, chi: DirichletCharacter) -> LFunctionSpec:
    """L(E x chi) for a quadratic character of conductor prime to N."""
    chi = chi.primitive()
    if chi.order > 2 or math.gcd(chi.conductor, E.conductor) != 1:
        raise ValueError("twists need a quadratic character of conductor prime to N")

    def factor(q: int) -> tuple:
        c = chi(q)
        if c == 0:
            return (1,)
        return tuple(coef * c ** i for i, coef in enumerate(local_factor(E, q)))

    def coefficients(n_max: int) -> list:
        an = an_list(E, n_max)
        return [an[n] * chi(n) for n in range(n_max + 1)]

    return LFunctionSpec(f"L({E.name} x chi {chi.label()})", 2, E.conductor * chi.conductor ** 2,
                         ((GAMMA_C, 0),), 2, coefficients, EulerFactorTable(factor, 2))


def rankin_spec(E: EllipticCurveQ, data: ArtinTwistData, side: str) -> LFunctionSpec:
    """Degree-four L(E x rho) or L(E x sigma) = L(E) L(E x eps3)."""
    f_euler = EulerFactorTable(lambda q: local_factor(E, q), 2)
    if side == "rho":
        g_euler = EulerFactorTable(lambda q: local_factor_rho(data.m, q), 2)
        conductor = E.conductor ** 2 * data.level_rho ** 2
    elif side == "sigma":
        g_euler = EulerFactorTable(local_factor_sigma, 2)
        conductor = E.conductor ** 2 * 9
    else:
        raise ValueError(f"side must be 'rho' or 'sigma', got {side!r}")
    table = EulerFactorTable(lambda q: tensor_local_factor(f_euler[q], g_euler[q]), 4)
    return LFunctionSpec(f"L({E.name} x {side}, m={data.m})", 4, conductor,
                         ((GAMMA_C, 0), (GAMMA_C, 0)), 2,
                         lambda n: rs_degree4_coeffs(f_euler, g_euler, n), table)


def analytic_D_value(E: EllipticCurveQ, data: ArtinTwistData, side: str, u, digits: int | None = None) -> mp.mpc:
    """D(f0, g, 1) = sum a(n, f0) a(n, g) n^-1 from the degree-four L-value.

    f0 is the ordinary 3-stabilisation of f_E with U_3-eigenvalue ``u`` (a
    complex embedding of the unit root); g is g_rho or g_sigma|iota_m.
    """
    digits = digits or config.digits
    spec = rankin_spec(E, data, side)
    result = value_afe(spec, 1, digits)
    with mp.workdps(digits + config.guard_digits):
        value = result.value
        # at 3: f's factor replaced by the U_3-eigenvalue, g contributes a(3^k, g)
        value = remove_euler(value, spec, [3], 1)
        g3 = data.P3_rho if side == "rho" else data.P3_sigma
        if len(g3) > 1:
            value = value / (1 - mp.mpc(u) / 3)
        if side == "sigma":
            value = remove_euler(value, spec, primefactors(data.m), 1)
        # Rankin's identity: D = L(f x g) / L^(S)(1, eps3)
        l_eps3 = mp.pi / (3 * mp.sqrt(3))
        for q in sorted(set(primefactors(E.conductor)) | set(primefactors(data.m))):
            l_eps3 *= 1 - mp.mpf(eps3(q)) / q
        value = value / l_eps3
        return value


def dump_coefficients_csv(spec: LFunctionSpec, n_max: int, path: Path) -> Path:
    """Write (n, b(n)) rows for auditing."""
    raw = list(spec.coefficients(n_max))
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["n", "b(n)"])
        for n in range(1, n_max + 1):
            writer.writerow([n, str(raw[n])])
    logger.info("wrote %d coefficients of %s to %s", n_max, spec.name, path)
    return Path(path)
