"""Weight-2 modular symbols for Gamma_0(N).

A Manin symbol (c : d) in P^1(Z/N) stands for g{0, oo} with g in SL_2(Z)
having bottom row (c, d). Modulo the two-term relation x + xS = 0, the
three-term relation x + xt + xt^2 = 0 and, for a signed space, x = sign * x*,
the symbols present the homology of X_0(N) relative to the cusps.

All vectors are expressed in a Z-basis of the lattice spanned by the Manin
symbols, so Hecke matrices are integral. The Hecke module of the unsigned
space is faithful for M_2(Gamma_0(N)), which is what the projector onto an
eigenform needs.
"""

from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

import mpmath as mp
import numpy as np
from sympy import Poly, QQ, ZZ, factorint, primefactors, symbols, totient
from sympy.polys.matrices import DomainMatrix
from sympy.polys.matrices.normalforms import hermite_normal_form

from .cache import Cache
from .config import config
from .ellcurve import EllipticCurveQ, an_list
from .errors import InseparableBlock, PrecisionExhausted, SlowConvergence
from .rings import P, Padic3, hensel_unit_root, padic_roots, recognize_rational
from .series import QExpansion, QuadraticOrderElem, prime_list

logger = logging.getLogger(__name__)

_x = symbols("x")


# Arithmetic of Gamma_0(N)

def gcdex(a: int, b: int) -> tuple[int, int, int]:
    """Return (x, y, g) with g = gcd(a, b) and a*x + b*y == g."""
    if b == 0:
        return (-1, 0, -a) if a < 0 else (1, 0, a)
    q, r = divmod(a, b)
    x, y, g = gcdex(b, r)
    return y, x - y * q, g


def lift_unit(n: int, d: int, a: int) -> int:
    """Lift a unit a modulo a divisor d of n to a unit modulo n."""
    u, v = 1, n
    g = math.gcd(v, d)
    while g > 1:
        u *= g
        v //= g
        g = math.gcd(v, g)
    x, y, _ = gcdex(u, v)
    return (u * x + a * y * v) % n


def index_gamma0(N: int) -> int:
    return N * math.prod(q + 1 for q in primefactors(N)) // math.prod(primefactors(N))


def cusp_count(N: int) -> int:
    return sum(int(totient(math.gcd(d, N // d))) for d in range(1, N + 1) if N % d == 0)


def _elliptic_points(N: int) -> tuple[int, int]:
    primes = primefactors(N)
    nu2 = 0 if N % 4 == 0 else math.prod(1 + (0 if q == 2 else (1 if q % 4 == 1 else -1)) for q in primes)
    nu3 = 0 if N % 9 == 0 else math.prod(1 + (0 if q == 3 else (1 if q % 3 == 1 else -1)) for q in primes)
    return nu2, nu3


def genus_x0(N: int) -> int:
    nu2, nu3 = _elliptic_points(N)
    twelve_g = 12 + index_gamma0(N) - 3 * nu2 - 4 * nu3 - 6 * cusp_count(N)
    return twelve_g // 12


def sturm_bound(N: int, weight: int = 2) -> int:
    """Coefficients a(0..B) determine a weight-k form on Gamma_0(N)."""
    return weight * index_gamma0(N) // 12


def eisenstein_dimension(N: int) -> int:
    return cusp_count(N) - 1


@lru_cache(maxsize=64)
def merel(n: int) -> tuple[tuple[int, int, int, int], ...]:
    """Merel's set X_n of integer matrices (a, b, c, d) of determinant n."""
    out = []
    for a in range(1, n + 1):
        for d in range((n + a - 1) // a, n + 2 - a):
            bc = a * d - n
            if bc == 0:
                out.extend((a, b, 0, d) for b in range(a))
                out.extend((a, 0, c, d) for c in range(1, d))
            else:
                out.extend((a, b, bc // b, d) for b in range((bc - 1) // (d - 1) + 1, a) if bc % b == 0)
    return tuple(out)


class P1List:
    """Canonical representatives of P^1(Z/N) (Stein, Algorithms 8.29 and 8.32)."""

    def __init__(self, level: int):
        self.level = level
        reps = {(0, 1)} if level > 1 else set()
        reps.update((1, v) for v in range(level))
        for g in range(2, level):
            if level % g == 0:
                for v in range(level):
                    rep = self.normalize(g, v)
                    if rep is not None:
                        reps.add(rep)
        if level == 1:
            reps = {(0, 1)}
        self.reps = sorted(reps)
        self._position = {rep: i for i, rep in enumerate(self.reps)}
        self._memo: dict[tuple[int, int], int | None] = {}

    def __len__(self) -> int:
        return len(self.reps)

    def __getitem__(self, i: int) -> tuple[int, int]:
        return self.reps[i]

    def normalize(self, u: int, v: int) -> tuple[int, int] | None:
        """Canonical form of (u : v), or None when gcd(u, v, N) > 1."""
        N = self.level
        u %= N
        v %= N
        if u == 0:
            return (0, 1) if math.gcd(N, v) == 1 else None
        _, s, g = gcdex(N, u)
        if math.gcd(g, v) > 1:
            return None
        s = lift_unit(N, N // g, s)
        u, v = g, (s * v) % N
        if g == 1:
            return 1, v
        return g, min((v * t) % N for t in range(1, N, N // g) if math.gcd(N, t) == 1)

    def index(self, u: int, v: int) -> int | None:
        key = (u % self.level, v % self.level)
        if key not in self._memo:
            rep = self.normalize(*key)
            self._memo[key] = None if rep is None else self._position[rep]
        return self._memo[key]


# Exact linear algebra helpers

def _qq(x) -> object:
    x = Fraction(x)
    return QQ(x.numerator, x.denominator)


def _fraction(e) -> Fraction:
    return Fraction(int(e.numerator), int(e.denominator))


def _int(e) -> int:
    value = _fraction(e)
    if value.denominator != 1:
        raise ValueError(f"expected an integral entry, got {value}")
    return value.numerator


def dm(rows: Sequence[Sequence], ncols: int | None = None) -> DomainMatrix:
    """DomainMatrix over QQ from nested sequences of ints/Fractions."""
    rows = [list(r) for r in rows]
    n = ncols if ncols is not None else (len(rows[0]) if rows else 0)
    return DomainMatrix([[_qq(x) for x in r] for r in rows], (len(rows), n), QQ)


def from_array(a: np.ndarray) -> DomainMatrix:
    return DomainMatrix([[QQ(int(x)) for x in row] for row in a], a.shape, QQ)


def to_rows(M: DomainMatrix) -> list[list[Fraction]]:
    return [[_fraction(e) for e in row] for row in M.to_list()]


def identity(n: int) -> DomainMatrix:
    return DomainMatrix.eye(n, QQ)


def kernel(M: DomainMatrix) -> DomainMatrix:
    """Basis of the right kernel as the columns of a matrix."""
    nrows, ncols = M.shape
    if nrows == 0:
        return identity(ncols)
    reduced, pivots = M.rref()
    rows = reduced.to_list()
    free = [j for j in range(ncols) if j not in pivots]
    columns = []
    for f in free:
        vec = [QQ(0)] * ncols
        vec[f] = QQ(1)
        for i, p in enumerate(pivots):
            vec[p] = -rows[i][f]
        columns.append(vec)
    if not columns:
        return DomainMatrix.zeros((ncols, 0), QQ)
    return DomainMatrix(columns, (len(columns), ncols), QQ).transpose()


def independent_rows(M: DomainMatrix) -> list[int]:
    if M.shape[0] == 0 or M.shape[1] == 0:
        return []
    _, pivots = M.transpose().rref()
    return list(pivots)


def restrict(T: DomainMatrix, basis: DomainMatrix) -> DomainMatrix:
    """Matrix X with T * basis = basis * X for an invariant subspace.

    Raises:
        InseparableBlock: If the subspace is not invariant under T.
    """
    k = basis.shape[1]
    if k == 0:
        return DomainMatrix.zeros((0, 0), QQ)
    rows = independent_rows(basis)
    image = T * basis
    X = basis.extract(rows, list(range(k))).inv() * image.extract(rows, list(range(k)))
    if basis * X != image:
        raise InseparableBlock("subspace is not invariant under the Hecke operator")
    return X


def solve(A: DomainMatrix, b: DomainMatrix) -> DomainMatrix | None:
    """One solution x of A x = b (free variables zero), or None if inconsistent."""
    ncols = A.shape[1]
    reduced, pivots = A.hstack(b).rref()
    if ncols in pivots:
        return None
    rows = reduced.to_list()
    x = [QQ(0)] * ncols
    for i, p in enumerate(pivots):
        x[p] = rows[i][ncols]
    return DomainMatrix([[e] for e in x], (ncols, 1), QQ)


def polynomial_at(coefficients: Sequence, T: DomainMatrix) -> DomainMatrix:
    """sum c_i T^i for coefficients given constant term first."""
    n = T.shape[0]
    result = DomainMatrix.zeros((n, n), QQ)
    for c in reversed(coefficients):
        result = result * T + identity(n) * _qq(c)
    return result


# The space

@dataclass(eq=False)
class ModularSymbolSpace:
    """Manin-symbol presentation with an integral basis.

    ``lattice`` holds, for each P^1 representative, its coordinates in the
    integral basis (None for symbols killed by the relations).
    """

    level: int
    sign: int
    p1: P1List
    generators: tuple[int, ...]
    basis: DomainMatrix
    lattice: np.ndarray
    killed: frozenset[int]
    _hecke: dict[int, np.ndarray] = field(default_factory=dict, repr=False)
    _cuspidal: DomainMatrix | None = field(default=None, repr=False)
    _star: np.ndarray | None = field(default=None, repr=False)

    @property
    def dimension(self) -> int:
        return len(self.generators)

    def symbol_vector(self, c: int, d: int) -> np.ndarray:
        """Integral coordinates of the Manin symbol (c : d) (zero if not in P^1)."""
        i = self.p1.index(c, d)
        if i is None or i in self.killed:
            return np.zeros(self.dimension, dtype=np.int64)
        return self.lattice[:, i].copy()

    def _image_matrix(self, images) -> np.ndarray:
        """Integral matrix from the images of the free generators."""
        G = np.zeros((self.dimension, self.dimension), dtype=np.int64)
        for j, sym in enumerate(self.generators):
            counts: Counter = Counter()
            c, d = self.p1[sym]
            for coefficient, (u, v) in images(c, d):
                i = self.p1.index(u, v)
                if i is not None and i not in self.killed:
                    counts[i] += coefficient
            for i, k in counts.items():
                G[:, j] += k * self.lattice[:, i]
        product = from_array(G) * self.basis
        return np.array([[_int(e) for e in row] for row in product.to_list()], dtype=np.int64)

    def hecke_matrix(self, q: int) -> np.ndarray:
        """T_q (U_q for q | N) on the integral basis, from Merel's set X_q."""
        if q not in self._hecke:
            self._hecke[q] = self._image_matrix(
                lambda c, d: ((1, (a * c + cc * d, b * c + dd * d)) for a, b, cc, dd in merel(q)))
            logger.debug("T_%d at level %d computed", q, self.level)
        return self._hecke[q]

    def hecke_operator(self, n: int) -> np.ndarray:
        """T_n for any n >= 1 by multiplicativity and the prime-power recursion."""
        if n in self._hecke:
            return self._hecke[n]
        if n == 1:
            return np.eye(self.dimension, dtype=np.int64)
        factors = factorint(n)
        if len(factors) > 1:
            q, e = next(iter(factors.items()))
            result = self.hecke_operator(q ** e) @ self.hecke_operator(n // q ** e)
        else:
            q, e = next(iter(factors.items()))
            if e == 1:
                return self.hecke_matrix(q)
            Tq = self.hecke_matrix(q)
            result = Tq @ self.hecke_operator(q ** (e - 1))
            if self.level % q:
                result = result - q * self.hecke_operator(q ** (e - 2))
        self._hecke[n] = result
        return result

    def star_matrix(self) -> np.ndarray:
        """The involution (c : d) -> (-c : d)."""
        if self._star is None:
            self._star = self._image_matrix(lambda c, d: ((1, (-c, d)),))
        return self._star

    def star_eigenspace(self, eigenvalue: int) -> DomainMatrix:
        if self.sign:
            return identity(self.dimension) if eigenvalue == self.sign else DomainMatrix.zeros(
                (self.dimension, 0), QQ)
        return kernel(from_array(self.star_matrix() - eigenvalue * np.eye(self.dimension, dtype=np.int64)))

    def boundary_matrix(self) -> DomainMatrix:
        """delta(c : d) = [a/c] - [b/d] on cusp classes, in the integral basis."""
        classes: list[tuple[int, int]] = []
        dead: set[int] = set()

        def cusp_class(u: int, v: int) -> tuple[int, int]:
            for k, (u2, v2) in enumerate(classes):
                if self._cusps_equivalent((u, v), (u2, v2)):
                    return k, 1
                if self.sign and self._cusps_equivalent((u, v), (-u2, v2)):
                    return k, self.sign
            classes.append((u, v))
            k = len(classes) - 1
            if self.sign == -1 and self._cusps_equivalent((u, v), (-u, v)):
                dead.add(k)
            return k, 1

        columns: list[dict[int, int]] = []
        for sym in self.generators:
            c, d = self.p1[sym]
            a, b, _ = gcdex(d, -c)
            image: dict[int, int] = defaultdict(int)
            k, s = cusp_class(a, c)
            image[k] += s
            k, s = cusp_class(b, d)
            image[k] -= s
            columns.append(image)
        rows = [[(col.get(k, 0) if k not in dead else 0) for col in columns] for k in range(len(classes))]
        if not rows:
            return DomainMatrix.zeros((0, self.dimension), QQ)
        return dm(rows, self.dimension) * self.basis

    def _cusps_equivalent(self, p: tuple[int, int], q: tuple[int, int]) -> bool:
        u1, v1 = p
        u2, v2 = q
        s1 = gcdex(u1, v1)[0]
        s2 = gcdex(u2, v2)[0]
        return (s1 * v2 - s2 * v1) % math.gcd(self.level, (v1 * v2) % self.level) == 0

    def cuspidal_basis(self) -> DomainMatrix:
        """Kernel of the boundary map, as columns."""
        if self._cuspidal is None:
            self._cuspidal = kernel(self.boundary_matrix())
        return self._cuspidal

    @property
    def cuspidal_rank(self) -> int:
        return self.cuspidal_basis().shape[1]

    def manin_relations_hold(self) -> bool:
        """Two-term and three-term relations on every symbol, exactly."""
        for c, d in self.p1.reps:
            if np.any(self.symbol_vector(c, d) + self.symbol_vector(d, -c)):
                return False
            if np.any(self.symbol_vector(c, d) + self.symbol_vector(d, -c - d) + self.symbol_vector(-c - d, c)):
                return False
        return True

    def cusp_path_vector(self, a: int, c: int) -> np.ndarray:
        """The symbol {oo, a/c} from the continued fraction convergents of a/c."""
        vec = np.zeros(self.dimension, dtype=np.int64)
        p_prev, q_prev, p_cur, q_cur = 0, 1, 1, 0
        num, den = a, c
        j = 0
        while den:
            digit, rem = divmod(num, den)
            p_prev, q_prev, p_cur, q_cur = p_cur, q_cur, digit * p_cur + p_prev, digit * q_cur + q_prev
            vec += self.symbol_vector((1 if j % 2 else -1) * q_cur, q_prev)
            num, den = den, rem
            j += 1
        return vec


def _two_term_classes(p1: P1List, sign: int) -> tuple[list[int], list[int], set[int]]:
    """Classes under x = -xS (and x = sign x*): root and coefficient per symbol."""
    n = len(p1)
    edges: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for i, (c, d) in enumerate(p1.reps):
        j = p1.index(d, -c)
        edges[i].append((j, -1))
        edges[j].append((i, -1))
        if sign:
            j = p1.index(-c, d)
            edges[i].append((j, sign))
            edges[j].append((i, sign))
    root = [-1] * n
    coefficient = [0] * n
    killed: set[int] = set()
    for start in range(n):
        if root[start] >= 0:
            continue
        root[start], coefficient[start] = start, 1
        stack, contradiction = [start], False
        while stack:
            i = stack.pop()
            for j, c in edges[i]:
                want = c * coefficient[i]
                if root[j] < 0:
                    root[j], coefficient[j] = start, want
                    stack.append(j)
                elif coefficient[j] != want:
                    contradiction = True
        if contradiction:
            killed.add(start)
    return root, coefficient, killed


def build_space(level: int, sign: int = 0) -> ModularSymbolSpace:
    """Presentation of weight-2 modular symbols for Gamma_0(level)."""
    if level < 1:
        raise ValueError(f"level must be positive, got {level}")
    if sign not in (-1, 0, 1):
        raise ValueError(f"sign must be -1, 0 or 1, got {sign}")
    p1 = P1List(level)
    root, coefficient, dead_roots = _two_term_classes(p1, sign)
    classes = sorted({r for r in root if r not in dead_roots})
    column = {r: k for k, r in enumerate(classes)}

    relations = set()
    for i, (c, d) in enumerate(p1.reps):
        row: dict[int, int] = defaultdict(int)
        for j in (i, p1.index(d, -c - d), p1.index(-c - d, c)):
            if root[j] not in dead_roots:
                row[column[root[j]]] += coefficient[j]
        entries = tuple(sorted((k, v) for k, v in row.items() if v))
        if entries:
            relations.add(entries)

    ncls = len(classes)
    pivots: tuple[int, ...] = ()
    reduced_rows: list[list] = []
    if relations and ncls:
        rows = [[0] * ncls for _ in relations]
        for r, entries in enumerate(sorted(relations)):
            for k, v in entries:
                rows[r][k] = v
        reduced, pivots = dm(rows, ncls).rref()
        reduced_rows = reduced.to_list()
    free = [k for k in range(ncls) if k not in pivots]
    free_index = {k: f for f, k in enumerate(free)}
    dim = len(free)

    class_vectors: list[list[Fraction]] = [[Fraction(0)] * dim for _ in range(ncls)]
    for k in free:
        class_vectors[k][free_index[k]] = Fraction(1)
    for r, p in enumerate(pivots):
        for k in free:
            class_vectors[p][free_index[k]] = -_fraction(reduced_rows[r][k])

    killed = frozenset(i for i in range(len(p1)) if root[i] in dead_roots)
    symbol_free = np.zeros((dim, len(p1)), dtype=object)
    for i in range(len(p1)):
        if i not in killed:
            for f, value in enumerate(class_vectors[column[root[i]]]):
                symbol_free[f, i] = coefficient[i] * value
    killed = frozenset(i for i in range(len(p1)) if not any(symbol_free[:, i]))

    basis, lattice = _saturate(symbol_free, dim)
    space = ModularSymbolSpace(
        level=level, sign=sign, p1=p1,
        generators=tuple(classes[k] for k in free),
        basis=basis, lattice=lattice, killed=killed,
    )
    logger.info("modular symbols for Gamma_0(%d), sign %d: %d symbols, dimension %d",
                level, sign, len(p1), dim)
    return space


def _saturate(symbol_free: np.ndarray, dim: int) -> tuple[DomainMatrix, np.ndarray]:
    """Z-basis of the lattice spanned by the symbols, and symbol coordinates in it."""
    nsym = symbol_free.shape[1]
    if dim == 0:
        return DomainMatrix.zeros((0, 0), QQ), np.zeros((0, nsym), dtype=np.int64)
    den = math.lcm(*(Fraction(x).denominator for x in symbol_free.flat))
    distinct = sorted({tuple(int(Fraction(x) * den) for x in symbol_free[:, i]) for i in range(nsym)})
    distinct = [col for col in distinct if any(col)]
    integral = DomainMatrix([[ZZ(col[r]) for col in distinct] for r in range(dim)], (dim, len(distinct)), ZZ)
    hnf = hermite_normal_form(integral).to_list()
    columns = [j for j in range(len(hnf[0])) if any(row[j] for row in hnf)] if hnf else []
    if len(columns) != dim:
        raise ValueError(f"symbol lattice has rank {len(columns)}, expected {dim}")
    basis = DomainMatrix([[QQ(int(row[j]), den) for j in columns] for row in hnf], (dim, dim), QQ)
    coordinates = basis.inv() * dm(symbol_free.tolist(), nsym)
    lattice = np.array([[_int(e) for e in row] for row in coordinates.to_list()], dtype=np.int64)
    return basis, lattice


# Cache of Hecke matrices

def _dump_matrices(matrices: dict[int, np.ndarray]) -> str:
    lines = []
    for n, T in sorted(matrices.items()):
        lines.append(f"T {n} {T.shape[0]}")
        lines.extend(" ".join(str(int(x)) for x in row) for row in T)
    return "\n".join(lines) + "\n"


def _parse_matrices(text: str) -> dict[int, np.ndarray]:
    lines = text.splitlines()
    out: dict[int, np.ndarray] = {}
    i = 0
    while i < len(lines):
        tag, n, d = lines[i].split()
        if tag != "T":
            raise ValueError(f"unexpected line {lines[i]!r}")
        n, d = int(n), int(d)
        rows = [[int(Fraction(tok)) for tok in lines[i + 1 + r].split()] for r in range(d)]
        if any(len(r) != d for r in rows):
            raise ValueError(f"T_{n} is not square")
        out[n] = np.array(rows, dtype=np.int64).reshape(d, d)
        i += d + 1
    return out


def load_hecke_matrices(space: ModularSymbolSpace, cache: Cache) -> int:
    """Preload cached matrices; returns how many were loaded."""
    name = f"msym_{space.level}_{space.sign}.dat"
    with cache.lock(name):
        matrices = cache.read(name, _parse_matrices)
    if not matrices:
        return 0
    if any(T.shape != (space.dimension, space.dimension) for T in matrices.values()):
        logger.warning("cached matrices for level %d do not match the space; ignoring", space.level)
        return 0
    space._hecke.update(matrices)
    return len(matrices)


def store_hecke_matrices(space: ModularSymbolSpace, cache: Cache) -> None:
    name = f"msym_{space.level}_{space.sign}.dat"
    with cache.lock(name):
        cache.write(name, _dump_matrices(space._hecke))


# Target systems and old spaces

@dataclass(frozen=True)
class TargetSystem:
    """Hecke eigenvalues of the form a block is localised at.

    At level N * prod q^2 (* 3) the form is the newform of conductor N with
    a(q) = 0 for the primes q != 3 dividing the level quotient and, when 3
    divides the quotient, a(3) = theta, the unit root of X^2 - a_3 X + 3.
    """

    an: tuple[int, ...]
    conductor: int
    level: int

    def __post_init__(self):
        quotient, rem = divmod(self.level, self.conductor)
        if rem:
            raise ValueError(f"level {self.level} is not a multiple of the conductor {self.conductor}")
        for q, e in factorint(quotient).items():
            if q == 3 and e != 1 or q != 3 and e % 2:
                raise ValueError(f"level quotient {quotient} has {q}^{e}; expected 3^1 and even powers")

    @property
    def a3(self) -> int:
        return self.an[3]

    @property
    def zero_primes(self) -> tuple[int, ...]:
        return tuple(q for q in primefactors(self.level // self.conductor) if q != 3)

    @property
    def stabilized(self) -> bool:
        return (self.level // self.conductor) % 3 == 0

    def eigenvalue(self, q: int, precision: int) -> Padic3:
        """Target eigenvalue of T_q/U_q at this level, 3-adically."""
        if q in self.zero_primes:
            return Padic3.zero(precision)
        if q == 3 and self.stabilized:
            return hensel_unit_root(self.a3, precision)
        return Padic3.from_int(self.an[q], precision)

    def old_dimension(self) -> int:
        quotient = self.level // self.conductor
        return math.prod(e + 1 for e in factorint(quotient).values())


def target_system(E: EllipticCurveQ, level: int, n_max: int | None = None) -> TargetSystem:
    bound = n_max or max(sturm_bound(level), 120)
    return TargetSystem(tuple(an_list(E, bound)), E.conductor, level)


def old_space(space: ModularSymbolSpace, target: TargetSystem, star_sign: int | None = None,
              transpose: bool = False) -> DomainMatrix:
    """The f-old subspace: common kernel of T_l - a_l over good primes l.

    Raises:
        InseparableBlock: If the Sturm bound is reached before the kernel
            shrinks to the old-space dimension.
    """
    copies = 2 if space.sign == 0 and star_sign is None else 1
    expected = target.old_dimension() * copies
    if star_sign is not None:
        if space.sign == 0:
            star = space.star_matrix().T if transpose else space.star_matrix()
            basis = kernel(from_array(star - star_sign * np.eye(space.dimension, dtype=np.int64)))
        else:
            basis = space.star_eigenspace(star_sign)
    else:
        basis = identity(space.dimension)
    bound = sturm_bound(space.level)
    for ell in prime_list(bound + 1):
        if basis.shape[1] <= expected:
            break
        if space.level % ell == 0:
            continue
        T = space.hecke_matrix(ell)
        T = T.T if transpose else T
        shifted = from_array(T - target.an[ell] * np.eye(space.dimension, dtype=np.int64)) * basis
        basis = basis * kernel(shifted)
    if basis.shape[1] != expected:
        raise InseparableBlock(
            f"old space at level {space.level} has dimension {basis.shape[1]}, expected {expected}")
    return basis


@dataclass(frozen=True)
class ThetaVector:
    """rational + theta * irrational, with theta^2 = a3 theta - 3."""

    rational: tuple[Fraction, ...]
    irrational: tuple[Fraction, ...]
    a3: int

    def entries(self) -> list[QuadraticOrderElem]:
        return [QuadraticOrderElem(r, t, self.a3) for r, t in zip(self.rational, self.irrational)]

    def dot(self, other: ThetaVector | Sequence) -> QuadraticOrderElem:
        if not isinstance(other, ThetaVector):
            other = ThetaVector(tuple(Fraction(int(x)) for x in other), (Fraction(0),) * len(other), self.a3)
        rr = sum((a * b for a, b in zip(self.rational, other.rational)), Fraction(0))
        mixed = sum((a * b for a, b in zip(self.rational, other.irrational)), Fraction(0)) + sum(
            (a * b for a, b in zip(self.irrational, other.rational)), Fraction(0))
        tt = sum((a * b for a, b in zip(self.irrational, other.irrational)), Fraction(0))
        return QuadraticOrderElem(rr - P * tt, mixed + self.a3 * tt, self.a3)

    def scaled(self, s: Fraction) -> ThetaVector:
        return ThetaVector(tuple(x * s for x in self.rational), tuple(x * s for x in self.irrational), self.a3)

    def is_rational(self) -> bool:
        return not any(self.irrational)


def eigenvector(space: ModularSymbolSpace, target: TargetSystem, star_sign: int,
                transpose: bool = False) -> ThetaVector:
    """The target eigenline in one star eigenspace (right, or left if ``transpose``).

    Raises:
        InseparableBlock: If the line is not cut out by the target system.
    """
    basis = old_space(space, target, star_sign, transpose)
    for q in target.zero_primes:
        U = space.hecke_matrix(q)
        U = U.T if transpose else U
        basis = basis * kernel(restrict(from_array(U), basis))
    k = basis.shape[1]
    if k != (2 if target.stabilized else 1):
        raise InseparableBlock(f"target eigenspace has dimension {k} after removing U_q-kernels")
    first = dm([[1]] + [[0]] * (k - 1))
    if target.stabilized:
        U3 = space.hecke_matrix(3)
        U3 = U3.T if transpose else U3
        X = restrict(from_array(U3), basis)
        rational = basis * (X - identity(k) * QQ(target.a3)) * first
        irrational = basis * first
    else:
        rational = basis * first
        irrational = DomainMatrix.zeros((space.dimension, 1), QQ)
    return ThetaVector(
        tuple(_fraction(row[0]) for row in rational.to_list()),
        tuple(_fraction(row[0]) for row in irrational.to_list()),
        target.a3,
    )


def primitive(vector: ThetaVector, precision: int) -> ThetaVector:
    """Scale to a primitive integral vector (rational case) or to 3-adic content 1."""
    if vector.is_rational():
        den = math.lcm(*(x.denominator for x in vector.rational))
        ints = [int(x * den) for x in vector.rational]
        g = math.gcd(*ints)
        return vector.scaled(Fraction(den, g))
    lowest = min(e.to_padic(precision).valuation for e in vector.entries() if not e.is_zero())
    return vector.scaled(Fraction(P) ** (-lowest))


# Eigen-block and projector

@dataclass(frozen=True)
class EigenSystem:
    eigenvalues: tuple[tuple[int, Padic3], ...]
    degree: int

    def __getitem__(self, q: int) -> Padic3:
        return dict(self.eigenvalues)[q]


@dataclass(frozen=True)
class EigenBlock:
    """Q_3-rational Hecke eigen-systems congruent mod 3 to the target."""

    level: int
    operators: tuple[int, ...]
    systems: tuple[EigenSystem, ...]
    distinguished: int
    unresolved: int
    precision: int
    space: ModularSymbolSpace = field(compare=False, repr=False)
    target: TargetSystem = field(compare=False, repr=False)

    @property
    def size(self) -> int:
        return len(self.systems) + self.unresolved

    @property
    def target_system(self) -> EigenSystem:
        return self.systems[self.distinguished]


def _block_operators(level: int, separating: int) -> tuple[int, ...]:
    good = [q for q in prime_list(50 * separating + 100) if level % q][:separating]
    return tuple(good + primefactors(level))


def _polynomial_coefficients(G: DomainMatrix, T: DomainMatrix, degree: int) -> list[Fraction] | None:
    """Coefficients r with T = sum r_j G^j (j < degree), if they exist."""
    n = G.shape[0]
    powers = [identity(n)]
    for _ in range(degree - 1):
        powers.append(powers[-1] * G)
    columns = [[e for row in Pj.to_list() for e in row] for Pj in powers]
    A = DomainMatrix([list(col) for col in zip(*columns)], (n * n, degree), QQ)
    b = DomainMatrix([[e] for row in T.to_list() for e in row], (n * n, 1), QQ)
    x = solve(A, b)
    return None if x is None else [_fraction(row[0]) for row in x.to_list()]


def _evaluate(coefficients: Sequence[Fraction], alpha: Padic3) -> Padic3:
    result = Padic3.zero(alpha.precision)
    for c in reversed(coefficients):
        result = result * alpha + Padic3.from_rational(c, alpha.precision + 10)
    return result


def localized_block(space: ModularSymbolSpace, target: TargetSystem, precision: int | None = None,
                    separating: int = 6) -> EigenBlock:
    """Isolate the mod-3 block of the target among the eigen-systems on the star +1 part.

    Raises:
        InseparableBlock: If the generic operator does not separate the systems.
        PrecisionExhausted: If block systems still collide at the precision cap.
    """
    M = precision or config.precision
    operators = _block_operators(space.level, separating)
    plus = space.star_eigenspace(1)
    ops = {q: restrict(from_array(space.hecke_matrix(q)), plus) for q in operators}
    n = plus.shape[1]

    for weights in (range(1, len(operators) + 1), [2 ** i + 1 for i in range(len(operators))]):
        G = DomainMatrix.zeros((n, n), QQ)
        for w, q in zip(weights, operators):
            G = G + ops[q] * QQ(w)
        try:
            pieces = _factor_pieces(G, ops, operators)
            break
        except InseparableBlock:
            logger.debug("generic operator with weights %s does not separate; retrying", list(weights))
    else:
        raise InseparableBlock(f"no generic Hecke operator separates the systems at level {space.level}")

    target_residue = {q: target.eigenvalue(q, 1) for q in operators}
    generic_residue = sum(int(w) * target.eigenvalue(q, 1).residue(1) for w, q in zip(weights, operators)) % P

    while True:
        systems, unresolved = [], 0
        for F, degree, coefficients in pieces:
            roots = padic_roots(F, M)
            for alpha in roots:
                values = tuple((q, _evaluate(coefficients[q], alpha)) for q in operators)
                if all((value - target_residue[q]).valuation >= 1 for q, value in values):
                    systems.append(EigenSystem(values, degree))
            if len(roots) < degree and _horner_mod3(F, generic_residue) == 0:
                unresolved += degree - len(roots)
        collision = any(all(x == y for (_, x), (_, y) in zip(a.eigenvalues, b.eigenvalues))
                        for i, a in enumerate(systems) for b in systems[i + 1:])
        if not collision:
            break
        if 2 * M > config.precision_cap:
            raise PrecisionExhausted(f"block systems at level {space.level} collide at 3-adic precision {M}")
        logger.warning("block systems collide at precision %d; doubling", M)
        M *= 2

    wanted = {q: target.eigenvalue(q, M) for q in operators}
    matches = [i for i, s in enumerate(systems) if all(s[q] == wanted[q] for q in operators)]
    if len(matches) != 1:
        raise InseparableBlock(f"target system found {len(matches)} times in the block at level {space.level}")
    block = EigenBlock(space.level, operators, tuple(systems), matches[0], unresolved, M, space, target)
    logger.info("block at level %d: %d systems (%d unresolved)", space.level, len(systems), unresolved)
    return block


def _horner_mod3(coefficients: Sequence[int], x: int) -> int:
    value = 0
    for c in reversed(coefficients):
        value = (value * x + int(c)) % P
    return value


def _factor_pieces(G: DomainMatrix, ops: dict[int, DomainMatrix], operators: Sequence[int]):
    """Irreducible factors F of the characteristic polynomial of G, with each T_q as a polynomial in G."""
    _, factors = Poly([_int(c) for c in G.charpoly()], _x).factor_list()
    pieces = []
    for F, _ in factors:
        F = -F if F.LC() < 0 else F
        low_first = [int(c) for c in reversed(F.all_coeffs())]
        degree = len(low_first) - 1
        V = kernel(polynomial_at(low_first, G))
        GV = restrict(G, V)
        coefficients = {}
        for q in operators:
            r = _polynomial_coefficients(GV, restrict(ops[q], V), degree)
            if r is None:
                raise InseparableBlock(f"T_{q} is not a polynomial in the generic operator")
            coefficients[q] = r
        pieces.append((low_first, degree, coefficients))
    return pieces


@dataclass(frozen=True)
class HeckeProjector:
    """1_f = sum c_n T_n for n <= bound, c_n in Q(theta)."""

    level: int
    coefficients: tuple[QuadraticOrderElem, ...]
    c_valuation: int
    a3: int

    @property
    def bound(self) -> int:
        return len(self.coefficients) - 1

    def apply(self, values: Sequence) -> QuadraticOrderElem:
        """sum c_n * values[n] for exact values (a(1, T_n h) = a(n, h))."""
        total = QuadraticOrderElem(Fraction(0), Fraction(0), self.a3)
        for n in range(1, len(self.coefficients)):
            value = values[n]
            if isinstance(value, QuadraticOrderElem):
                if not value.is_zero():
                    total = total + self.coefficients[n] * value
            elif value:
                total = total + self.coefficients[n] * Fraction(value)
        return total


def congruence_projector(space: ModularSymbolSpace, target: TargetSystem,
                         precision: int | None = None) -> HeckeProjector:
    """Hecke-duality coefficients of the projector onto the target and the congruence valuation.

    The projector is assembled from right and left eigenlines in both star
    eigenspaces; c_valuation is minus the smallest 3-adic valuation of its
    coordinates in a Z-basis of the span of T_1..T_B.

    Raises:
        InseparableBlock: If the projector is not in the Hecke algebra.
    """
    if space.sign != 0:
        raise ValueError("the projector needs the unsigned space")
    M = precision or config.precision
    d = space.dimension
    bound = sturm_bound(space.level)
    mats = [space.hecke_operator(n) for n in range(1, bound + 1)]

    pr = [[Fraction(0)] * d for _ in range(d)]
    pt = [[Fraction(0)] * d for _ in range(d)]
    for s in (1, -1):
        right = eigenvector(space, target, s)
        left = eigenvector(space, target, s, transpose=True)
        scale = left.dot(right).inverse()
        for i, vi in enumerate(right.entries()):
            if vi.is_zero():
                continue
            for j, wj in enumerate(left.entries()):
                if not wj.is_zero():
                    entry = vi * wj * scale
                    pr[i][j] += entry.a
                    pt[i][j] += entry.b

    expected = genus_x0(space.level) + eisenstein_dimension(space.level)
    rows: list[tuple[int, int]] = []
    for j in range(d):
        rows.extend((i, j) for i in range(d))
        A = np.array([[int(T[i, jj]) for T in mats] for i, jj in rows], dtype=np.int64)
        chosen = independent_rows(from_array(A))
        if len(chosen) >= expected:
            break
    else:
        logger.warning("Hecke span rank %d below the expected %d at level %d", len(chosen), expected, space.level)
    selected = [rows[k] for k in chosen]
    A = np.array([[int(T[i, j]) for T in mats] for i, j in selected], dtype=np.int64)
    A_qq = from_array(A)
    b_r = dm([[pr[i][j]] for i, j in selected], 1)
    b_t = dm([[pt[i][j]] for i, j in selected], 1)
    c_r, c_t = solve(A_qq, b_r), solve(A_qq, b_t)
    if c_r is None or c_t is None:
        raise InseparableBlock(f"projector onto the target is not in the Hecke algebra at level {space.level}")
    c_r = [_fraction(row[0]) for row in c_r.to_list()]
    c_t = [_fraction(row[0]) for row in c_t.to_list()]

    stack = np.array(mats, dtype=object)
    for c, expected_matrix in ((c_r, pr), (c_t, pt)):
        combination = np.tensordot(np.array(c, dtype=object), stack, axes=1)
        if not (combination == np.array(expected_matrix, dtype=object)).all():
            raise InseparableBlock(f"projector onto the target is not in the Hecke algebra at level {space.level}")

    hnf = hermite_normal_form(DomainMatrix([[ZZ(int(x)) for x in row] for row in A], A.shape, ZZ))
    hnf = hnf.convert_to(QQ)
    inverse = hnf.inv()
    y_r = [_fraction(row[0]) for row in (inverse * b_r).to_list()]
    y_t = [_fraction(row[0]) for row in (inverse * b_t).to_list()]
    lowest = 0
    for a, b in zip(y_r, y_t):
        value = QuadraticOrderElem(a, b, target.a3)
        if not value.is_zero():
            lowest = min(lowest, value.to_padic(M).valuation)
    coefficients = (QuadraticOrderElem(Fraction(0), Fraction(0), target.a3),) + tuple(
        QuadraticOrderElem(a, b, target.a3) for a, b in zip(c_r, c_t))
    projector = HeckeProjector(space.level, coefficients, -lowest, target.a3)
    logger.info("projector at level %d: %d Hecke operators, c_valuation %d", space.level, bound, -lowest)
    return projector


def projector_and_congruence_number(block: EigenBlock, precision: int | None = None) -> tuple[HeckeProjector, int]:
    projector = congruence_projector(block.space, block.target, precision or block.precision)
    return projector, projector.c_valuation


# Ordinary idempotent

def _matmul_mod(A: np.ndarray, B: np.ndarray, modulus: int) -> np.ndarray:
    return (A @ B) % modulus


def _matpow_mod(A: np.ndarray, exponent: int, modulus: int) -> np.ndarray:
    result = np.eye(A.shape[0], dtype=A.dtype)
    base = A % modulus
    while exponent:
        if exponent & 1:
            result = _matmul_mod(result, base, modulus)
        base = _matmul_mod(base, base, modulus)
        exponent >>= 1
    return result


def ordinary_idempotent(T, precision: int | None = None) -> np.ndarray:
    """Projector onto the unit-root part of an integral matrix, modulo 3^M.

    A power of T itself, taken modulo 3^M, kills the nilpotent part mod 3 and
    is idempotent mod 3; Newton iteration e -> 3e^2 - 2e^3 lifts it. Both
    steps are polynomials in T, so the result commutes with T.
    """
    M = precision or config.precision
    A = np.array([[int(x) for x in row] for row in np.asarray(T, dtype=object)], dtype=object)
    n = A.shape[0]
    if n == 0:
        return A
    small = (A % P).astype(np.int64)
    charpoly = [_int(c) for c in from_array(small).charpoly()]
    _, factors = Poly(charpoly, _x, modulus=P).factor_list()
    orders = [P ** F.degree() - 1 for F, _ in factors if F.degree() > 0]
    exponent = P ** max(1, math.ceil(math.log(n, P)) + 1) * math.lcm(1, *orders)
    known, modulus = 1, P ** M
    e = _matpow_mod(A, exponent, modulus)
    while known < M:
        known = min(2 * known, M)
        e2 = _matmul_mod(e, e, modulus)
        e = (3 * e2 - 2 * _matmul_mod(e2, e, modulus)) % modulus
    return e


def idempotent_by_powers(T, precision: int | None = None, limit: int = 400) -> np.ndarray:
    """lim T^(k!) modulo 3^M, stopping at the first idempotent power."""
    M = precision or config.precision
    modulus = P ** M
    X = np.array([[int(x) for x in row] for row in np.asarray(T, dtype=object)], dtype=object) % modulus
    for k in range(2, limit + 1):
        X = _matpow_mod(X, k, modulus)
        if np.array_equal(_matmul_mod(X, X, modulus), X):
            return X
    raise PrecisionExhausted(f"T^(k!) did not stabilise modulo 3^{M} by k = {limit}")


# Periods

@dataclass(frozen=True)
class PeriodData:
    """Periods of an eigenform on integral star eigenclasses.

    ``matrix`` is A with [conj(omega), omega] = [x+, x-] A, so
    ``omega_sigma`` = det A = conj(P+) P- - P+ conj(P-).
    """

    level: int
    x_plus: ThetaVector
    x_minus: ThetaVector
    plus: mp.mpc
    minus: mp.mpc
    residual: mp.mpf

    @property
    def matrix(self) -> tuple[tuple[mp.mpc, mp.mpc], tuple[mp.mpc, mp.mpc]]:
        return ((mp.conj(self.plus), self.plus), (mp.conj(self.minus), self.minus))

    @property
    def omega_sigma(self) -> mp.mpc:
        (a, b), (c, d) = self.matrix
        return a * d - b * c


def period_terms(level: int, digits: int) -> int:
    """Coefficients needed for paths at height 1/level."""
    return math.ceil(level * (digits + 5) * math.log(10) / (2 * math.pi)) + 1


def _complex_coefficients(form: QExpansion) -> list[mp.mpc]:
    out = []
    for a in form.coefficients:
        if isinstance(a, QuadraticOrderElem):
            out.append(a.to_complex(0))
        else:
            out.append(mp.mpc(mp.mpf(Fraction(a).numerator) / Fraction(a).denominator))
    return out


def path_period(coefficients: Sequence[mp.mpc], a: int, c: int) -> mp.mpc:
    """2 pi i * integral of f from oo to a/c, for gamma in Gamma_0(level) with bottom row (c, d).

    The path z0 -> gamma z0 with z0 = (-d + i)/c runs at height 1/c.
    """
    d = pow(a, -1, c)
    q_end = mp.exp(2j * mp.pi * mp.mpc(a, 1) / c)
    q_start = mp.exp(2j * mp.pi * mp.mpc(-d, 1) / c)
    total = mp.mpc(0)
    power_end, power_start = mp.mpc(1), mp.mpc(1)
    for n in range(1, len(coefficients)):
        power_end *= q_end
        power_start *= q_start
        if coefficients[n]:
            total += coefficients[n] / n * (power_end - power_start)
    return total


def period_integrals(space: ModularSymbolSpace, form: QExpansion, target: TargetSystem,
                     digits: int | None = None, samples: int = 6) -> PeriodData:
    """Periods of ``form`` on the primitive integral x+ and x- of its eigenline.

    Raises:
        SlowConvergence: If the form has too few coefficients for the paths.
        InseparableBlock: If the sampled paths do not see both eigenclasses.
    """
    if space.sign != 0:
        raise ValueError("periods need the unsigned space")
    D = digits or config.digits
    level = space.level
    needed = period_terms(level, D)
    if form.n_max < needed:
        raise SlowConvergence(f"{form.n_max} coefficients given, paths at height 1/{level} need {needed}")
    M = config.precision
    with mp.workdps(D + config.guard_digits):
        coefficients = _complex_coefficients(form.truncate(needed))
        lines = {}
        for s in (1, -1):
            right = primitive(eigenvector(space, target, s), M)
            left = eigenvector(space, target, s, transpose=True)
            lines[s] = (right, left, left.dot(right))

        rows, values = [], []
        for a in range(1, level):
            if math.gcd(a, level) != 1:
                continue
            path = space.cusp_path_vector(a, level)
            alpha = [(lines[s][1].dot(path) / lines[s][2]).to_complex(0) for s in (1, -1)]
            if all(abs(x) < mp.mpf(10) ** (-D) for x in alpha):
                continue
            rows.append(alpha)
            values.append(path_period(coefficients, a, level))
            if len(rows) >= samples:
                break
        solved = _two_unknowns(rows, values, D)
        if solved is None:
            raise InseparableBlock(f"sampled paths at level {level} do not separate x+ and x-")
        plus, minus = solved
        residual = max((abs(r[0] * plus + r[1] * minus - v) for r, v in zip(rows, values)), default=mp.mpf(0))
        data = PeriodData(level, lines[1][0], lines[-1][0], plus, minus, residual)
    logger.info("periods at level %d: residual %s over %d paths", level, mp.nstr(residual, 3), len(rows))
    return data


def _two_unknowns(rows, values, digits) -> tuple[mp.mpc, mp.mpc] | None:
    tol = mp.mpf(10) ** (-digits // 2)
    for i in range(len(rows)):
        for j in range(i + 1, len(rows)):
            (a, b), (c, d) = rows[i], rows[j]
            det = a * d - b * c
            if abs(det) > tol:
                return (values[i] * d - values[j] * b) / det, (a * values[j] - c * values[i]) / det
    return None


def recognize_theta(z, a3: int, height: int) -> QuadraticOrderElem:
    """Recover a + b*theta from its complex image under theta -> to_complex(0)."""
    theta = QuadraticOrderElem.theta(a3).to_complex(0)
    z = mp.mpc(z)
    b = recognize_rational(z.imag / theta.imag, height)
    a = recognize_rational(z.real - mp.mpf(b.numerator) / b.denominator * theta.real, height)
    return QuadraticOrderElem(a, b, a3)


def petersson_from_relation(c: int | Fraction, omega_sigma) -> mp.mpc:
    """<g|tau, g> = c * Omega_Sigma."""
    return mp.mpf(Fraction(c).numerator) / Fraction(c).denominator * mp.mpc(omega_sigma)


def neron_period_ratio(omega_sigma, omega_plus, omega_minus) -> mp.mpc:
    """pi^2 i Omega(f) / (Omega_+ Omega_-), with Omega(f) the pairing of periods of f(z) dz.

    ``omega_sigma`` pairs periods of 2 pi i f(z) dz, so Omega(f) = omega_sigma / (2 pi i)^2.
    """
    omega_f = mp.mpc(omega_sigma) / (2 * mp.pi * mp.j) ** 2
    return mp.pi ** 2 * mp.j * omega_f / (mp.mpc(omega_plus) * mp.mpc(omega_minus))


def eigenvalues_on_line(space: ModularSymbolSpace, target: TargetSystem,
                        primes: Iterable[int]) -> dict[int, QuadraticOrderElem]:
    """Eigenvalue of T_q (U_q for q | level) on the star +1 target line, in Q(theta).

    Raises:
        InseparableBlock: If the line is not an eigenline of some T_q.
    """
    line = eigenvector(space, target, 1)
    entries = line.entries()
    pivot = next(i for i, x in enumerate(entries) if not x.is_zero())
    rational = np.array(line.rational, dtype=object)
    irrational = np.array(line.irrational, dtype=object)
    out = {}
    for q in primes:
        T = space.hecke_matrix(q).astype(object)
        image = [QuadraticOrderElem(Fraction(r), Fraction(s), line.a3)
                 for r, s in zip(T @ rational, T @ irrational)]
        eigenvalue = image[pivot] / entries[pivot]
        if any(x != eigenvalue * e for x, e in zip(image, entries)):
            raise InseparableBlock(f"the target line at level {space.level} is not stable under T_{q}")
        out[q] = eigenvalue
    return out