"""MacLane's Q-complex for abelian groups.

``Q(M)_n = Z[M^(2^n)]``.  The differentials are pinned by asking that the
identity be a homotopy between the two maps ``sigma_1, sigma_2: Q(M^2) -> Q(M)``
(add internally, add externally).  That gives the recursion

    d_{n+1}^M = sigma_1 - sigma_2 - d_n^{M^2}

once ``(M^2)^(2^n)`` is identified with ``M^(2^(n+1))``.  We use the block
identification: the tuple ``((a_0,b_0), ..., (a_{K-1},b_{K-1}))`` corresponds to
``(a_0, ..., a_{K-1}, b_0, ..., b_{K-1})``.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Hashable, Iterable, Mapping

from .errors import BudgetExceeded, DomainError

DEGREE_CAP = 3
MATRIX_CAP = 5_000_000


# Groups

class Group:
    def add(self, a, b):
        raise NotImplementedError

    def neg(self, a):
        raise NotImplementedError

    @property
    def zero(self):
        raise NotImplementedError

    def elements(self) -> list:
        raise DomainError(f"{self!r} is infinite")

    def total(self, items: Iterable):
        acc = self.zero
        for x in items:
            acc = self.add(acc, x)
        return acc


@dataclass(frozen=True)
class FinAbGroup(Group):
    """``Z/d_1 x ... x Z/d_t``; elements are residue tuples."""

    factors: tuple[int, ...]

    def __post_init__(self):
        if any(d < 2 for d in self.factors):
            raise DomainError("cyclic factors must be >= 2")

    def add(self, a, b):
        return tuple((x + y) % d for x, y, d in zip(a, b, self.factors))

    def neg(self, a):
        return tuple(-x % d for x, d in zip(a, self.factors))

    @property
    def zero(self):
        return (0,) * len(self.factors)

    @property
    def order(self) -> int:
        return math.prod(self.factors)

    def elements(self) -> list:
        return list(itertools.product(*(range(d) for d in self.factors)))


def cyclic(*factors: int) -> FinAbGroup:
    return FinAbGroup(tuple(factors))


@dataclass(frozen=True)
class IntegerGroup(Group):
    def add(self, a, b):
        return a + b

    def neg(self, a):
        return -a

    @property
    def zero(self):
        return 0


Z = IntegerGroup()


@dataclass(frozen=True)
class Power(Group):
    """``G^k`` with componentwise addition; elements are ``k``-tuples."""

    base: Group
    k: int

    def add(self, a, b):
        return tuple(self.base.add(x, y) for x, y in zip(a, b))

    def neg(self, a):
        return tuple(self.base.neg(x) for x in a)

    @property
    def zero(self):
        return (self.base.zero,) * self.k

    def elements(self) -> list:
        return list(itertools.product(self.base.elements(), repeat=self.k))


def square(G: Group) -> Power:
    return Power(G, 2)


# Chains

@dataclass(frozen=True)
class QChain:
    degree: int
    terms: Mapping[tuple, int]

    def __post_init__(self):
        size = 2**self.degree
        clean = {}
        for t, a in self.terms.items():
            if len(t) != size:
                raise DomainError(f"tuple of length {len(t)} in degree {self.degree}")
            if a:
                clean[t] = a
        object.__setattr__(self, "terms", clean)

    @classmethod
    def basis(cls, t: tuple) -> "QChain":
        return cls(int(math.log2(len(t))), {t: 1})

    @classmethod
    def zero(cls, degree: int) -> "QChain":
        return cls(degree, {})

    def __add__(self, other: "QChain") -> "QChain":
        if self.degree != other.degree:
            raise DomainError("degree mismatch")
        out = dict(self.terms)
        for t, a in other.terms.items():
            out[t] = out.get(t, 0) + a
        return QChain(self.degree, out)

    def __neg__(self) -> "QChain":
        return QChain(self.degree, {t: -a for t, a in self.terms.items()})

    def __sub__(self, other: "QChain") -> "QChain":
        return self + (-other)

    def scale(self, k: int) -> "QChain":
        return QChain(self.degree, {t: k * a for t, a in self.terms.items()})

    def map_tuples(self, fn: Callable[[tuple], tuple], degree: int | None = None) -> "QChain":
        out: dict[tuple, int] = {}
        for t, a in self.terms.items():
            u = fn(t)
            out[u] = out.get(u, 0) + a
        return QChain(self.degree if degree is None else degree, out)

    def to_json(self) -> dict:
        return {"degree": self.degree, "terms": [[list(t), a] for t, a in sorted(self.terms.items(), key=repr)]}


def _acc(out: dict, t: tuple, a: int) -> None:
    v = out.get(t, 0) + a
    if v:
        out[t] = v
    else:
        out.pop(t, None)


def unpair(pairs: tuple) -> tuple:
    """``((a_j, b_j))_j -> (a_0..a_{K-1}, b_0..b_{K-1})``."""
    return tuple(p[0] for p in pairs) + tuple(p[1] for p in pairs)


def pair_up(t: tuple) -> tuple:
    k = len(t) // 2
    return tuple((t[j], t[k + j]) for j in range(k))


@lru_cache(maxsize=None)
def _d_basis(G: Group, t: tuple) -> tuple[tuple[tuple, int], ...]:
    """``d`` of one basis tuple, by the recursion; returned as sorted items."""
    if len(t) == 1:
        return ()
    out: dict[tuple, int] = {}
    pairs = pair_up(t)
    _acc(out, tuple(G.add(a, b) for a, b in pairs), 1)
    _acc(out, tuple(a for a, _ in pairs), -1)
    _acc(out, tuple(b for _, b in pairs), -1)
    for u, c in _d_basis(square(G), pairs):
        _acc(out, unpair(u), -c)
    return tuple(out.items())


def q_differential(ch: QChain, G: Group) -> QChain:
    if ch.degree < 1:
        raise DomainError("d is defined from degree 1")
    out: dict[tuple, int] = {}
    for t, a in ch.terms.items():
        for u, c in _d_basis(G, t):
            _acc(out, u, a * c)
    return QChain(ch.degree - 1, out)


def d_cube(G: Group, t: tuple) -> dict[tuple, int]:
    """Independent face formula: for each direction, internal minus external sums."""
    n = int(math.log2(len(t)))
    out: dict[tuple, int] = {}
    for j in range(n):
        bit = n - 1 - j  # first index is most significant
        face0 = tuple(t[i] for i in range(len(t)) if not (i >> bit) & 1)
        face1 = tuple(t[i] for i in range(len(t)) if (i >> bit) & 1)
        sign = -1 if j % 2 else 1
        _acc(out, tuple(G.add(a, b) for a, b in zip(face0, face1)), sign)
        _acc(out, face0, -sign)
        _acc(out, face1, -sign)
    return out


def q_sigma(which: str, ch: QChain, G: Group | None = None) -> QChain:
    """``sigma_1`` (sum) or ``sigma_2`` (split) from ``Q(G^2)`` to ``Q(G)``; tuples hold pairs."""
    if which == "sum":
        if G is None:
            raise DomainError("sum needs the group")
        return ch.map_tuples(lambda t: tuple(G.add(a, b) for a, b in t))
    if which == "split":
        return ch.map_tuples(lambda t: tuple(a for a, _ in t)) + ch.map_tuples(lambda t: tuple(b for _, b in t))
    raise DomainError(f"unknown sigma {which!r}")


def q_homotopy(ch: QChain) -> QChain:
    """``h = id``: a chain over ``G^2`` in degree ``n`` read in ``Q(G)`` degree ``n+1``."""
    return ch.map_tuples(unpair, ch.degree + 1)


def basis_tuples(G: Group, n: int) -> Iterable[tuple]:
    return itertools.product(G.elements(), repeat=2**n)


def verify_homotopy(G: Group, n_max: int) -> tuple[bool, int]:
    """``sigma_1 - sigma_2 = d h + h d`` on every basis tuple of ``Q(G^2)`` in degrees ``<= n_max``."""
    G2 = square(G)
    checked = 0
    for n in range(n_max + 1):
        for t in basis_tuples(G2, n):
            x = QChain.basis(t)
            lhs = q_sigma("sum", x, G) - q_sigma("split", x)
            rhs = q_differential(q_homotopy(x), G)
            if n >= 1:
                rhs = rhs + q_homotopy(q_differential(x, G2))
            if lhs != rhs:
                return False, checked
            checked += 1
    return True, checked


def verify_dd_zero(G: Group, n: int) -> tuple[bool, int]:
    checked = 0
    for t in basis_tuples(G, n):
        x = q_differential(q_differential(QChain.basis(t), G), G) if n >= 2 else QChain.zero(0)
        if x.terms:
            return False, checked
        checked += 1
    return True, checked


def verify_cube_agreement(G: Group, n: int) -> bool:
    return all(dict(_d_basis(G, t)) == d_cube(G, t) for t in basis_tuples(G, n))


def printed_d2(m11, m12, m21, m22, G: Group) -> dict[tuple, int]:
    """The six-term degree-2 differential as displayed in the source."""
    out: dict[tuple, int] = {}
    _acc(out, (G.add(m11, m21), G.add(m12, m22)), 1)
    _acc(out, (m11, m12), -1)
    _acc(out, (m21, m22), -1)
    _acc(out, (G.add(m11, m12), G.add(m21, m22)), -1)
    _acc(out, (m11, m21), 1)
    _acc(out, (m12, m22), 1)
    return out


# Homology

def diagonalize(rows: list[list[int]]) -> list[int]:
    """Nonzero diagonal entries of an integer diagonal form (unimodular row/column ops)."""
    A = [list(r) for r in rows]
    m = len(A)
    n = len(A[0]) if m else 0
    diag = []
    for t in range(min(m, n)):
        best = None
        for i in range(t, m):
            row = A[i]
            for j in range(t, n):
                v = row[j]
                if v and (best is None or abs(v) < best[0]):
                    best = (abs(v), i, j)
                    if best[0] == 1:
                        break
            if best and best[0] == 1:
                break
        if best is None:
            break
        _, i, j = best
        A[t], A[i] = A[i], A[t]
        for r in A:
            r[t], r[j] = r[j], r[t]
        while True:
            p = A[t][t]
            moved = False
            for i in range(t + 1, m):
                if A[i][t]:
                    q = A[i][t] // p
                    if q:
                        ri, rt = A[i], A[t]
                        for j in range(t, n):
                            if rt[j]:
                                ri[j] -= q * rt[j]
                    if A[i][t]:
                        A[t], A[i] = A[i], A[t]
                        moved = True
                        break
            if moved:
                continue
            p = A[t][t]
            for j in range(t + 1, n):
                if A[t][j]:
                    q = A[t][j] // p
                    if q:
                        for r in A[t:]:
                            if r[t]:
                                r[j] -= q * r[t]
                    if A[t][j]:
                        for r in A:
                            r[t], r[j] = r[j], r[t]
                        moved = True
                        break
            if not moved:
                break
        diag.append(abs(A[t][t]))
    return diag


def _prime_powers(d: int) -> list[int]:
    out = []
    q = 2
    while q * q <= d:
        if d % q == 0:
            e = 1
            while d % q == 0:
                d //= q
                e *= q
            out.append(e)
        q += 1
    if d > 1:
        out.append(d)
    return out


@dataclass(frozen=True)
class AbelianGroupInvariants:
    free_rank: int
    torsion: tuple[int, ...]  # invariant factors d_1 | d_2 | ..., all > 1

    @classmethod
    def from_cyclic(cls, free_rank: int, orders: Iterable[int]) -> "AbelianGroupInvariants":
        by_prime: dict[int, list[int]] = {}
        for d in orders:
            for q in _prime_powers(d):
                base = min(p for p in range(2, q + 1) if q % p == 0)
                by_prime.setdefault(base, []).append(q)
        for v in by_prime.values():
            v.sort(reverse=True)
        length = max((len(v) for v in by_prime.values()), default=0)
        factors = []
        for i in range(length):
            factors.append(math.prod(v[i] for v in by_prime.values() if i < len(v)))
        return cls(free_rank, tuple(sorted(factors)))

    def primary(self) -> tuple[int, ...]:
        return tuple(sorted(q for d in self.torsion for q in _prime_powers(d)))

    def direct_sum(self, other: "AbelianGroupInvariants") -> "AbelianGroupInvariants":
        return AbelianGroupInvariants.from_cyclic(self.free_rank + other.free_rank,
                                                  self.torsion + other.torsion)

    def elementary_divisors(self) -> list[int]:
        return [0] * self.free_rank + list(self.torsion)


def group_invariants(G: FinAbGroup) -> AbelianGroupInvariants:
    return AbelianGroupInvariants.from_cyclic(0, G.factors)


def boundary_matrix(G: Group, n: int, d: Callable = None) -> list[list[int]]:
    """Matrix of ``d_n: Q_n -> Q_{n-1}`` (rows index degree ``n-1`` tuples)."""
    elems = G.elements()
    rows_n = len(elems) ** (2 ** (n - 1))
    cols_n = len(elems) ** (2**n)
    if rows_n * cols_n > MATRIX_CAP * 50 or cols_n > MATRIX_CAP:
        raise BudgetExceeded(f"boundary matrix {rows_n} x {cols_n}")
    index = {t: i for i, t in enumerate(basis_tuples(G, n - 1))}
    A = [[0] * cols_n for _ in range(rows_n)]
    for j, t in enumerate(basis_tuples(G, n)):
        items = d(G, t).items() if d else _d_basis(G, t)
        for u, c in items:
            A[index[u]][j] += c
    return A


def q_homology(G: FinAbGroup, i: int, d: Callable | None = None) -> AbelianGroupInvariants:
    """``H_i(Q(G))`` from diagonal forms of the boundary matrices."""
    if i > DEGREE_CAP:
        raise BudgetExceeded(f"degree {i} above cap {DEGREE_CAP}")
    dim_i = G.order ** (2**i)
    rank_in = 0 if i == 0 else len(diagonalize(boundary_matrix(G, i, d)))
    out_diag = diagonalize(boundary_matrix(G, i + 1, d))
    free = dim_i - rank_in - len(out_diag)
    return AbelianGroupInvariants.from_cyclic(free, [v for v in out_diag if v > 1])


# Filtrations

def _level_tuples(elems_le: Callable[[float], list], n: int, bound) -> Iterable[tuple]:
    return itertools.product(elems_le(bound), repeat=2**n)


def integer_ball(limit) -> list[int]:
    k = math.floor(limit)
    return list(range(-k, k + 1)) if limit >= 0 else []


def filtered_check(G: Group, norm: Callable, elems_le: Callable, c, n_max: int,
                   target_scale=1) -> tuple[bool, str]:
    """Differentials, sigmas and ``h`` respect the levels ``2^-n c`` (product max-norm).

    ``elems_le(b)`` lists the group elements of norm ``<= b``.  ``target_scale``
    shrinks only the target levels; values below 1 serve as a negative control.
    """
    def within(t: tuple, bound) -> bool:
        return all(norm(x) <= bound for x in t)

    c = c
    tc = c * target_scale
    G2 = square(G)
    norm2 = lambda pr: max(norm(pr[0]), norm(pr[1]))

    for n in range(1, n_max + 1):
        for t in _level_tuples(elems_le, n, c / 2**n):
            for u, _ in _d_basis(G, t):
                if not within(u, tc / 2 ** (n - 1)):
                    return False, f"d_{n} leaves the filtration at {t}"
    for n in range(0, n_max):
        lvl = c / 2 / 2**n
        pair_elems = [(a, b) for a in elems_le(lvl) for b in elems_le(lvl)]
        for t in itertools.product(pair_elems, repeat=2**n):
            if not all(norm2(pr) <= lvl for pr in t):
                continue
            x = QChain.basis(t)
            for part in (q_sigma("sum", x, G), q_sigma("split", x)):
                if not all(within(u, tc / 2**n) for u in part.terms):
                    return False, f"sigma leaves the filtration at {t}"
            if not all(within(u, tc / 2 ** (n + 1)) for u in q_homotopy(x).terms):
                return False, f"h leaves the filtration at {t}"
    return True, "ok"


# N-fold homotopy

def _sum_map(G: Group, e: tuple):
    return G.total(e)


def homotopy_N(G: Group, N: int, ch: QChain) -> QChain:
    """Homotopy ``Q(G^N)_n -> Q(G)_{n+1}`` between ``sigma_{1,N}`` and ``sigma_{2,N}``.

    Elements of ``G^N`` are flat ``N``-tuples.  Composition of the pairwise
    homotopies gives ``h^N = sigma_{1,N/2} h^H + h^{N/2} sigma_2^H`` with
    ``H = G^(N/2)``.
    """
    if N < 1 or N & (N - 1):
        raise DomainError("N must be a power of two")
    if N == 1:
        return QChain.zero(ch.degree + 1)
    if N == 2:
        return q_homotopy(ch)
    half = N // 2
    first = ch.map_tuples(
        lambda t: tuple(G.total(e[:half]) for e in t) + tuple(G.total(e[half:]) for e in t),
        ch.degree + 1,
    )
    lower = ch.map_tuples(lambda t: tuple(e[:half] for e in t)) + ch.map_tuples(lambda t: tuple(e[half:] for e in t))
    return first + homotopy_N(G, half, lower)


def sigma_N(which: str, G: Group, ch: QChain) -> QChain:
    if which == "sum":
        return ch.map_tuples(lambda t: tuple(G.total(e) for e in t))
    out = QChain.zero(ch.degree)
    N = len(next(iter(ch.terms))[0]) if ch.terms else 0
    for i in range(N):
        out = out + ch.map_tuples(lambda t, i=i: tuple(e[i] for e in t))
    return out


def verify_homotopy_N(G: FinAbGroup, N: int, n_max: int) -> tuple[bool, int]:
    GN = Power(G, N)
    checked = 0
    for n in range(n_max + 1):
        for t in basis_tuples(GN, n):
            x = QChain.basis(t)
            lhs = sigma_N("sum", G, x) - sigma_N("split", G, x)
            rhs = q_differential(homotopy_N(G, N, x), G)
            if n >= 1:
                rhs = rhs + homotopy_N(G, N, q_differential(x, GN))
            if lhs != rhs:
                return False, checked
            checked += 1
    return True, checked


def filtered_homotopy_N(N: int, c, n_max: int, norm=abs, elems_le=integer_ball) -> tuple[bool, str]:
    """``h^N`` maps ``M^(2^n N)`` at level ``2^-n c/N`` into ``M^(2^(n+1))`` at ``2^-(n+1) c``."""
    for n in range(n_max + 1):
        lvl = c / N / 2**n
        comps = list(itertools.product(elems_le(lvl), repeat=N))
        for t in itertools.product(comps, repeat=2**n):
            out = homotopy_N(Z, N, QChain.basis(t))
            for u in out.terms:
                if not all(norm(x) <= c / 2 ** (n + 1) for x in u):
                    return False, f"h^{N} leaves the filtration at {t}"
    return True, "ok"
