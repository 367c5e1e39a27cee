"""Polyhedral lattices, Hilbert bases and the N-fold splitting of lattice measures."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable, Mapping, Sequence

import numpy as np

from .errors import BudgetExceeded, DomainError, IncompleteDigitSet
from .laurent import as_fraction, make_radius

BOX_CAP = 2_000_000

Vec = tuple[int, ...]


def dot(u: Sequence, v: Sequence):
    return sum(a * b for a, b in zip(u, v))


def _primitive(v: Sequence[Fraction]) -> Vec:
    den = math.lcm(*(Fraction(x).denominator for x in v))
    ints = [int(Fraction(x) * den) for x in v]
    g = math.gcd(*ints)
    return tuple(x // g for x in ints) if g else tuple(ints)


def _rank(rows: Sequence[Sequence]) -> int:
    A = [[Fraction(x) for x in r] for r in rows]
    rank = 0
    cols = len(A[0]) if A else 0
    for c in range(cols):
        piv = next((i for i in range(rank, len(A)) if A[i][c] != 0), None)
        if piv is None:
            continue
        A[rank], A[piv] = A[piv], A[rank]
        for i in range(len(A)):
            if i != rank and A[i][c] != 0:
                f = A[i][c] / A[rank][c]
                A[i] = [a - f * b for a, b in zip(A[i], A[rank])]
        rank += 1
    return rank


def _nullspace(rows: Sequence[Sequence], k: int) -> list[list[Fraction]]:
    A = [[Fraction(x) for x in r] for r in rows]
    pivots = []
    rank = 0
    for c in range(k):
        piv = next((i for i in range(rank, len(A)) if A[i][c] != 0), None)
        if piv is None:
            continue
        A[rank], A[piv] = A[piv], A[rank]
        A[rank] = [a / A[rank][c] for a in A[rank]]
        for i in range(len(A)):
            if i != rank and A[i][c] != 0:
                f = A[i][c]
                A[i] = [a - f * b for a, b in zip(A[i], A[rank])]
        pivots.append(c)
        rank += 1
    free = [c for c in range(k) if c not in pivots]
    basis = []
    for fc in free:
        v = [Fraction(0)] * k
        v[fc] = Fraction(1)
        for r, pc in enumerate(pivots):
            v[pc] = -A[r][fc]
        basis.append(v)
    return basis


def extreme_rays(k: int, constraints: Sequence[Sequence]) -> list[Vec]:
    """Primitive extreme rays of the pointed cone ``{x : c.x >= 0}``."""
    if _rank(constraints) < k:
        raise DomainError("cone is not pointed (constraints do not span)")
    rays = set()
    for sub in itertools.combinations(constraints, k - 1):
        if k > 1 and _rank(sub) < k - 1:
            continue
        ns = _nullspace(list(sub), k)
        if len(ns) != 1:
            continue
        v = _primitive(ns[0])
        for s in (v, tuple(-x for x in v)):
            if all(dot(c, s) >= 0 for c in constraints):
                rays.add(s)
    return sorted(rays)


def _det_adj(R: list[Vec]) -> tuple[int, list[list[int]]]:
    """Determinant and adjugate of the square matrix with columns ``R``."""
    k = len(R)
    M = [[Fraction(R[j][i]) for j in range(k)] for i in range(k)]
    inv = [[Fraction(int(i == j)) for j in range(k)] for i in range(k)]
    det = Fraction(1)
    for c in range(k):
        piv = next(i for i in range(c, k) if M[i][c] != 0)
        if piv != c:
            M[c], M[piv] = M[piv], M[c]
            inv[c], inv[piv] = inv[piv], inv[c]
            det = -det
        p = M[c][c]
        det *= p
        M[c] = [a / p for a in M[c]]
        inv[c] = [a / p for a in inv[c]]
        for i in range(k):
            if i != c and M[i][c] != 0:
                f = M[i][c]
                M[i] = [a - f * b for a, b in zip(M[i], M[c])]
                inv[i] = [a - f * b for a, b in zip(inv[i], inv[c])]
    D = int(det)
    return D, [[int(x * D) for x in row] for row in inv]


def parallelepiped_points(R: list[Vec]) -> list[Vec]:
    """Lattice points ``sum t_j r_j`` with every ``t_j in [0, 1)``."""
    k = len(R)
    D, adj = _det_adj(R)
    lo = [sum(min(0, r[i]) for r in R) for i in range(k)]
    hi = [sum(max(0, r[i]) for r in R) for i in range(k)]
    size = math.prod(h - l + 1 for l, h in zip(lo, hi))
    if size > BOX_CAP:
        raise BudgetExceeded(f"parallelepiped box has {size} points")
    grids = np.meshgrid(*(np.arange(l, h + 1) for l, h in zip(lo, hi)), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)
    t = pts @ np.array(adj, dtype=np.int64).T
    if D < 0:
        t, D = -t, -D
    keep = np.all((t >= 0) & (t < D), axis=1)
    return [tuple(int(v) for v in row) for row in pts[keep]]


def _in_cone(x: Vec, constraints) -> bool:
    return all(dot(c, x) >= 0 for c in constraints)


def irreducible(cands: Sequence[Vec], constraints) -> list[Vec]:
    """Elements not of the form ``y + z`` with ``y`` in the set and ``z`` a nonzero cone point."""
    cands = sorted({c for c in cands if any(c)})
    out = []
    for x in cands:
        red = False
        for y in cands:
            if y == x:
                continue
            z = tuple(a - b for a, b in zip(x, y))
            if any(z) and _in_cone(z, constraints):
                red = True
                break
        if not red:
            out.append(x)
    return out


def hilbert_basis(k: int, constraints: Sequence[Sequence]) -> list[Vec]:
    """Minimal generating set of the lattice points of ``{x in Z^k : c.x >= 0}``."""
    if k == 0:
        return []
    rays = extreme_rays(k, constraints)
    cands = set(rays)
    for sub in itertools.combinations(rays, k):
        if _rank(sub) < k:
            continue
        cands.update(parallelepiped_points(list(sub)))
    return irreducible(sorted(cands), constraints)


def cone_facets(rays: Sequence[Vec]) -> list[Vec]:
    """Inward facet normals of the full-dimensional cone spanned by ``rays``."""
    k = len(rays[0])
    if _rank(rays) < k:
        raise DomainError("rays do not span a full-dimensional cone")
    out = set()
    for sub in itertools.combinations(rays, k - 1):
        if k > 1 and _rank(sub) < k - 1:
            continue
        ns = _nullspace(list(sub), k)
        if len(ns) != 1:
            continue
        v = _primitive(ns[0])
        for s in (v, tuple(-x for x in v)):
            if all(dot(s, r) >= 0 for r in rays):
                out.add(s)
    return sorted(out)


def hilbert_basis_from_rays(rays: Sequence[Vec]) -> list[Vec]:
    rays = [tuple(int(v) for v in r) for r in rays]
    return hilbert_basis(len(rays[0]), cone_facets(rays))


# Polyhedral lattices

@dataclass(frozen=True)
class PolyLattice:
    """``Z^k`` with norm ``max_phi phi(v)`` over a symmetric set of rational covectors."""

    rank: int
    functionals: tuple[tuple[Fraction, ...], ...]
    generators: tuple[Vec, ...]

    def __post_init__(self):
        F = tuple(tuple(as_fraction(x) for x in phi) for phi in self.functionals)
        object.__setattr__(self, "functionals", F)
        object.__setattr__(self, "generators", tuple(tuple(int(x) for x in g) for g in self.generators))
        fs = set(F)
        if any(tuple(-x for x in phi) not in fs for phi in F):
            raise DomainError("functionals must satisfy F = -F")
        for i in range(self.rank):
            e = tuple(int(i == j) for j in range(self.rank))
            if self.norm(e) <= 0:
                raise DomainError("norm is not positive on basis vectors")

    def norm(self, v: Sequence[int]) -> Fraction:
        if not self.functionals:
            return Fraction(0)
        return max(dot(phi, v) for phi in self.functionals)

    @classmethod
    def scalar(cls) -> "PolyLattice":
        return cls(1, ((1,), (-1,)), ((1,),))

    @classmethod
    def l1(cls, k: int) -> "PolyLattice":
        F = tuple(itertools.product((-1, 1), repeat=k))
        gens = tuple(tuple(int(i == j) for j in range(k)) for i in range(k))
        return cls(k, F, gens)

    @classmethod
    def linf(cls, k: int) -> "PolyLattice":
        F = tuple(tuple(s * x for x in tuple(int(i == j) for j in range(k))) for i in range(k) for s in (1, -1))
        gens = tuple((1,) + tuple(s) for s in itertools.product((1, -1), repeat=k - 1))
        return cls(k, F, gens)

    def to_json(self) -> dict:
        return {"rank": self.rank,
                "functionals": [[str(x) for x in phi] for phi in self.functionals],
                "generators": [list(g) for g in self.generators]}

    @property
    def is_scalar(self) -> bool:
        return self.rank == 1 and set(self.functionals) == {(1,), (-1,)} and self.generators == ((1,),)


def digit_set(L: PolyLattice, N: int) -> list[Vec]:
    """Finite ``A`` such that every dual vector splits as ``N x0 + x'`` with ``x' in A`` and matching signs."""
    if L.rank == 0:
        return [()]
    if N < 1:
        raise DomainError("N must be positive")
    zero = (0,) * L.rank
    A = {zero}
    if N == 1:
        return [zero]
    for signs in itertools.product((1, -1), repeat=len(L.generators)):
        cons = [tuple(s * x for x in g) for s, g in zip(signs, L.generators)]
        ys = hilbert_basis(L.rank, cons)
        for ns in itertools.product(range(N), repeat=len(ys)):
            A.add(tuple(sum(n * y[i] for n, y in zip(ns, ys)) for i in range(L.rank)))
    return sorted(A)


def _same_sign(u: int, v: int) -> bool:
    return (u >= 0 and v >= 0) or (u <= 0 and v <= 0)


class DigitIndex:
    """``A`` bucketed by residue mod ``N`` for fast lookups."""

    def __init__(self, L: PolyLattice, N: int, A: Sequence[Vec]):
        self.L, self.N, self.A = L, N, list(A)
        self.by_res: dict[Vec, list[Vec]] = {}
        for a in self.A:
            self.by_res.setdefault(tuple(x % N for x in a), []).append(a)


def same_sign_decompose(x: Sequence[int], N: int, A: Sequence[Vec] | DigitIndex,
                        L: PolyLattice) -> tuple[Vec, Vec]:
    """``x = N*x0 + x1`` with ``x1 in A`` and ``x1(l), (x - x1)(l)`` of equal weak sign."""
    x = tuple(int(v) for v in x)
    idx = A if isinstance(A, DigitIndex) else DigitIndex(L, N, A)
    for a in idx.by_res.get(tuple(v % N for v in x), []):
        rest = tuple(u - v for u, v in zip(x, a))
        if all(_same_sign(dot(a, g), dot(rest, g)) for g in L.generators):
            return tuple(v // N for v in rest), a
    raise IncompleteDigitSet(f"no digit fits {x} with N={N}")


@dataclass(frozen=True)
class LatticeMeasure:
    """``sum_{n,s} x_{n,s} T^n [s]`` with ``x_{n,s}`` dual vectors and ``1 <= n <= m``."""

    support: tuple[Hashable, ...]
    m: int
    rp: Fraction
    coeffs: Mapping[tuple[Hashable, int], Vec]
    rank: int

    def __post_init__(self):
        object.__setattr__(self, "rp", make_radius(self.rp))
        clean = {}
        for (s, n), v in self.coeffs.items():
            v = tuple(int(a) for a in v)
            if len(v) != self.rank:
                raise DomainError("coefficient has the wrong rank")
            if not 1 <= n <= self.m or s not in self.support:
                raise DomainError(f"coefficient at ({s!r}, {n}) outside the model")
            if any(v):
                clean[(s, n)] = v
        object.__setattr__(self, "coeffs", clean)

    def nu(self, lam: Sequence[int]) -> Fraction:
        return sum((abs(dot(v, lam)) * self.rp**n for (_, n), v in self.coeffs.items()), Fraction(0))

    def norms(self, L: PolyLattice) -> list[Fraction]:
        return [self.nu(g) for g in L.generators]

    def within(self, L: PolyLattice, c) -> bool:
        c = as_fraction(c)
        return all(self.nu(g) <= c * L.norm(g) for g in L.generators)

    def __add__(self, other: "LatticeMeasure") -> "LatticeMeasure":
        out = dict(self.coeffs)
        for key, v in other.coeffs.items():
            out[key] = tuple(a + b for a, b in zip(out.get(key, (0,) * self.rank), v))
        return LatticeMeasure(self.support, self.m, self.rp, out, self.rank)

    @classmethod
    def zero_like(cls, w: "LatticeMeasure") -> "LatticeMeasure":
        return cls(w.support, w.m, w.rp, {}, w.rank)


def _balance(items: list[tuple[Fraction, object]], N: int) -> list[list[object]]:
    """Greedy: heaviest item first, always into the currently lightest bin."""
    bins: list[list[object]] = [[] for _ in range(N)]
    load = [Fraction(0)] * N
    for wgt, tag in sorted(items, key=lambda t: (-t[0], repr(t[1]))):
        j = min(range(N), key=lambda i: (load[i], i))
        bins[j].append(tag)
        load[j] += wgt
    return bins


@dataclass
class KeyDecomposition:
    parts: list[LatticeMeasure]
    d: Fraction
    x0: LatticeMeasure | None = None
    indicators: dict[Vec, list[tuple[Hashable, int]]] = field(default_factory=dict)


def key_constant(L: PolyLattice, A: Sequence[Vec]) -> Fraction:
    """``max_i sum_{a in A} |a(l_i)|``, divided by ``||l_i||`` when that is below 1."""
    best = Fraction(0)
    for g in L.generators:
        di = Fraction(sum(abs(dot(a, g)) for a in A))
        best = max(best, di, di / L.norm(g))
    return best


def key_decompose(w: LatticeMeasure, N: int, L: PolyLattice, c=None) -> KeyDecomposition:
    """Split ``w`` into ``N`` parts of size at most ``c/N + d``."""
    if L.rank == 0:
        return KeyDecomposition([LatticeMeasure.zero_like(w) for _ in range(N)], Fraction(0))
    if c is not None and not w.within(L, c):
        raise DomainError("w is not in the stated ball")
    if L.is_scalar:
        return _key_decompose_scalar(w, N)
    A = digit_set(L, N)
    idx = DigitIndex(L, N, A)
    x0: dict = {}
    ind: dict[Vec, list] = {}
    for key, v in w.coeffs.items():
        q, a = same_sign_decompose(v, N, idx, L)
        if any(q):
            x0[key] = q
        if any(a):
            ind.setdefault(a, []).append(key)
    base = LatticeMeasure(w.support, w.m, w.rp, x0, w.rank)
    parts_coeffs: list[dict] = [dict(x0) for _ in range(N)]
    for a, keys in ind.items():
        bins = _balance([(w.rp ** key[1], key) for key in keys], N)
        for j, b in enumerate(bins):
            for key in b:
                cur = parts_coeffs[j].get(key, (0,) * w.rank)
                parts_coeffs[j][key] = tuple(u + v for u, v in zip(cur, a))
    parts = [LatticeMeasure(w.support, w.m, w.rp, pc, w.rank) for pc in parts_coeffs]
    return KeyDecomposition(parts, key_constant(L, A), base, ind)


def _key_decompose_scalar(w: LatticeMeasure, N: int) -> KeyDecomposition:
    """Rank one: every coefficient becomes unit items of one sign, balanced across bins."""
    items = []
    for key, (v,) in w.coeffs.items():
        sign = 1 if v > 0 else -1
        items += [(w.rp ** key[1], (key, sign, i)) for i in range(abs(v))]
    bins = _balance(items, N)
    parts = []
    for b in bins:
        pc: dict = {}
        for key, sign, _ in b:
            pc[key] = (pc.get(key, (0,))[0] + sign,)
        parts.append(LatticeMeasure(w.support, w.m, w.rp, pc, 1))
    return KeyDecomposition(parts, Fraction(1))


def reconstructs(dec: KeyDecomposition, w: LatticeMeasure) -> bool:
    total = LatticeMeasure.zero_like(w)
    for p in dec.parts:
        total = total + p
    return total.coeffs == w.coeffs


def parts_within(dec: KeyDecomposition, L: PolyLattice, c, N: int) -> bool:
    bound = as_fraction(c) / N + dec.d
    return all(p.within(L, bound) for p in dec.parts)


def mass_identity(dec: KeyDecomposition, w: LatticeMeasure, L: PolyLattice, N: int) -> bool:
    """``nu_i(w) = N nu_i(x0) + sum_a |a(l_i)| nu(x_a)`` for every generator."""
    if dec.x0 is None:
        return True
    for g in L.generators:
        rhs = N * dec.x0.nu(g)
        for a, keys in dec.indicators.items():
            rhs += abs(dot(a, g)) * sum((w.rp ** n for _, n in keys), Fraction(0))
        if rhs != w.nu(g):
            return False
    return True
