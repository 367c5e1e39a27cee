"""Exact arithmetic in Z((T)) with weighted l1 norms.

A series is stored as a sparse ``{exponent: coefficient}`` mapping with
Python integers.  ``order`` records the truncation: when it is an integer
``m`` only the coefficients of ``T^n`` with ``n < m`` are known; when it is
``None`` the series is exact (finite support, nothing truncated).
"""

from __future__ import annotations

import os
import re
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator, Mapping, Sequence

import mpmath

from .errors import BudgetExceeded, DomainError, NotAUnit

DEFAULT_ENUM_CAP = 10**7
CAP_ENV = "LIQUIDKIT_BUDGET_CAP"


def enumeration_cap() -> int:
    return int(os.environ.get(CAP_ENV, DEFAULT_ENUM_CAP))


def stream_cap() -> int | None:
    """Cap for streamed sweeps, which never hold the ball in memory: only an explicit override applies."""
    v = os.environ.get(CAP_ENV)
    return int(v) if v else None


def as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        raise TypeError("floats are not accepted where an exact rational is required")
    return Fraction(value)


def make_radius(value) -> Fraction:
    """Validate and normalise a rational radius ``0 < r < 1``."""
    r = as_fraction(value)
    if not 0 < r < 1:
        raise DomainError(f"radius must lie in (0, 1), got {r}")
    return r


def _min_order(a: int | None, b: int | None) -> int | None:
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


class Laurent:
    """Integer Laurent series, exact or known modulo ``T^order``."""

    __slots__ = ("_coeffs", "order")

    def __init__(self, coeffs: Mapping[int, int] | None = None, order: int | None = None):
        clean = {}
        for n, a in (coeffs or {}).items():
            a = int(a)
            if a and (order is None or n < order):
                clean[int(n)] = a
        self._coeffs = clean
        self.order = order

    # construction helpers
    @classmethod
    def monomial(cls, n: int, a: int = 1, order: int | None = None) -> "Laurent":
        return cls({n: a}, order)

    @classmethod
    def from_list(cls, digits: Sequence[int], lead: int = 0, order: int | None = None) -> "Laurent":
        return cls({lead + i: a for i, a in enumerate(digits)}, order)

    @classmethod
    def zero(cls, order: int | None = None) -> "Laurent":
        return cls({}, order)

    @classmethod
    def one(cls, order: int | None = None) -> "Laurent":
        return cls({0: 1}, order)

    # accessors
    @property
    def coeffs(self) -> dict[int, int]:
        return dict(self._coeffs)

    def __getitem__(self, n: int) -> int:
        if self.order is not None and n >= self.order:
            raise IndexError(f"coefficient of T^{n} is unknown (order {self.order})")
        return self._coeffs.get(n, 0)

    def terms(self) -> list[tuple[int, int]]:
        return sorted(self._coeffs.items())

    @property
    def is_exact(self) -> bool:
        return self.order is None

    def is_zero(self) -> bool:
        return not self._coeffs

    @property
    def lead(self) -> int | None:
        """Lowest exponent that may carry a nonzero coefficient."""
        if self._coeffs:
            return min(self._coeffs)
        return self.order

    @property
    def degree(self) -> int | None:
        return max(self._coeffs) if self._coeffs else None

    # ring structure
    def __add__(self, other: "Laurent") -> "Laurent":
        if not isinstance(other, Laurent):
            return NotImplemented
        out = dict(self._coeffs)
        for n, a in other._coeffs.items():
            out[n] = out.get(n, 0) + a
        return Laurent(out, _min_order(self.order, other.order))

    def __neg__(self) -> "Laurent":
        return Laurent({n: -a for n, a in self._coeffs.items()}, self.order)

    def __sub__(self, other: "Laurent") -> "Laurent":
        return self + (-other)

    def __mul__(self, other) -> "Laurent":
        if isinstance(other, int):
            return Laurent({n: other * a for n, a in self._coeffs.items()}, self.order)
        if not isinstance(other, Laurent):
            return NotImplemented
        return ring_mul(self, other)

    __rmul__ = __mul__

    def shift(self, k: int) -> "Laurent":
        """Multiply by ``T^k``."""
        order = None if self.order is None else self.order + k
        return Laurent({n + k: a for n, a in self._coeffs.items()}, order)

    def truncate(self, m: int) -> "Laurent":
        return Laurent(self._coeffs, _min_order(self.order, m))

    def substitute_neg(self) -> "Laurent":
        """Image under the involution ``T -> -T``."""
        return Laurent({n: (-a if n % 2 else a) for n, a in self._coeffs.items()}, self.order)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Laurent):
            return NotImplemented
        return self._coeffs == other._coeffs and self.order == other.order

    def __hash__(self) -> int:
        return hash((frozenset(self._coeffs.items()), self.order))

    def congruent(self, other: "Laurent", m: int) -> bool:
        """Equality of the coefficients below ``T^m``."""
        a = {n: c for n, c in self._coeffs.items() if n < m}
        b = {n: c for n, c in other._coeffs.items() if n < m}
        return a == b

    def __repr__(self) -> str:
        suffix = "" if self.order is None else f" + O(T^{self.order})"
        return f"Laurent({to_text(self)}{suffix})"

    def __str__(self) -> str:
        return to_text(self)


# Aliases matching the two roles a series plays: finite exact elements and
# jets known modulo a power of T.
ExactLaurent = Laurent
JetLaurent = Laurent


def weighted_norm(f: Laurent, r) -> Fraction | mpmath.mpf:
    """``sum |a_n| r^n``; exact when ``r`` is rational, mpmath otherwise."""
    if isinstance(r, (int, Fraction)):
        r = as_fraction(r)
        return sum((abs(a) * r**n for n, a in f._coeffs.items()), Fraction(0))
    r = mpmath.mpf(r)
    return mpmath.fsum(abs(a) * r**n for n, a in f._coeffs.items())


def ring_add(f: Laurent, g: Laurent) -> Laurent:
    return f + g


def ring_mul(f: Laurent, g: Laurent) -> Laurent:
    """Cauchy product with the tightest order the inputs justify."""
    if f.is_exact and f.is_zero() or g.is_exact and g.is_zero():
        return Laurent.zero()
    order = None
    if f.order is not None:
        order = _min_order(order, f.order + g.lead)
    if g.order is not None:
        order = _min_order(order, g.order + f.lead)
    out: dict[int, int] = {}
    for n, a in f._coeffs.items():
        for k, b in g._coeffs.items():
            e = n + k
            if order is None or e < order:
                out[e] = out.get(e, 0) + a * b
    return Laurent(out, order)


def invert_unit(f: Laurent, m: int) -> Laurent:
    """Return ``g`` with ``f*g = 1 mod T^m`` (measured after removing ``T^k``).

    ``f`` must have the form ``T^k * u`` with ``u(0) = +-1``; the returned
    series is ``T^-k * (u^-1 mod T^m)``.
    """
    if not f._coeffs:
        raise NotAUnit("zero series is not invertible")
    k = min(f._coeffs)
    u0 = f._coeffs[k]
    if u0 not in (1, -1):
        raise NotAUnit(f"lowest coefficient {u0} is not +-1")
    q = m if f.order is None else min(m, f.order - k)
    u = [f._coeffs.get(k + i, 0) for i in range(q)]
    inv = [0] * q
    for i in range(q):
        acc = 1 if i == 0 else 0
        for j in range(1, i + 1):
            acc -= u[j] * inv[i - j]
        inv[i] = acc * u0  # u0 == 1/u0
    return Laurent({i - k: c for i, c in enumerate(inv)}, q - k)


def count_weighted_box(weights: Sequence[Fraction], c: Fraction) -> int:
    """Number of integer vectors with ``sum |a_i| w_i <= c``."""
    weights = tuple(as_fraction(w) for w in weights)

    @lru_cache(maxsize=None)
    def count(i: int, budget: Fraction) -> int:
        if i == len(weights):
            return 1
        w = weights[i]
        top = int(budget // w)
        total = count(i + 1, budget)
        for a in range(1, top + 1):
            total += 2 * count(i + 1, budget - a * w)
        return total

    if c < 0:
        return 0
    return count(0, as_fraction(c))


def iter_weighted_box(weights: Sequence[Fraction], c: Fraction) -> Iterator[tuple[int, ...]]:
    """Yield every integer vector with ``sum |a_i| w_i <= c`` exactly once."""
    weights = [as_fraction(w) for w in weights]
    c = as_fraction(c)
    if c < 0:
        return
    prefix = [0] * len(weights)

    def rec(i: int, budget: Fraction):
        if i == len(weights):
            yield tuple(prefix)
            return
        w = weights[i]
        top = int(budget // w)
        for a in range(-top, top + 1):
            prefix[i] = a
            yield from rec(i + 1, budget - abs(a) * w)
        prefix[i] = 0

    yield from rec(0, c)


def enumerate_ball(r, c, m: int, cap: int | None = None) -> list[Laurent]:
    """All integer jets supported in ``[0, m]`` with ``sum |a_n| r^n <= c``."""
    r = make_radius(r)
    c = as_fraction(c)
    if c < 0:
        raise DomainError("ball radius must be nonnegative")
    cap = enumeration_cap() if cap is None else cap
    weights = [r**n for n in range(m + 1)]
    size = count_weighted_box(weights, c)
    if size > cap:
        raise BudgetExceeded(f"ball has {size} elements, cap is {cap}")
    return [Laurent.from_list(v, 0, m + 1) for v in iter_weighted_box(weights, c)]


def mod_p_lift(digits: Sequence[int] | Mapping[int, int], p: int, m: int | None = None) -> Laurent:
    """Lift an F_p-series (digits in ``[0, p-1]``) to Z using the digit section."""
    items = digits.items() if isinstance(digits, Mapping) else enumerate(digits)
    items = list(items)
    if m is None:
        m = max((n for n, _ in items), default=-1) + 1
    out = {}
    for n, a in items:
        if not 0 <= a < p:
            raise DomainError(f"digit {a} is not in [0, {p - 1}]")
        out[n] = a
    return Laurent(out, m)


def reduce_mod_p(f: Laurent, p: int) -> dict[int, int]:
    return {n: a % p for n, a in f._coeffs.items() if a % p}


# text and JSON forms

def to_text(f: Laurent) -> str:
    if not f._coeffs:
        return "0"
    return " + ".join(f"{a}*T^{n}" for n, a in f.terms())


_TERM = re.compile(r"^\s*([+-]?\d+)\s*\*\s*T\s*\^\s*([+-]?\d+)\s*$")


def parse_text(text: str, order: int | None = None) -> Laurent:
    """Inverse of :func:`to_text`; also accepts ``-`` separators."""
    text = text.strip()
    if text == "0":
        return Laurent.zero(order)
    # normalise "a - b" into "a + -b"
    text = re.sub(r"(?<=\d)\s+-\s+", " + -", text)
    out: dict[int, int] = {}
    for chunk in text.split("+"):
        if not chunk.strip():
            continue
        match = _TERM.match(chunk)
        if not match:
            raise ValueError(f"cannot parse term {chunk!r}")
        a, n = int(match.group(1)), int(match.group(2))
        out[n] = out.get(n, 0) + a
    return Laurent(out, order)


def to_json(f: Laurent) -> dict:
    return {"terms": [[n, str(a)] for n, a in f.terms()], "order": f.order}


def from_json(obj: dict) -> Laurent:
    return Laurent({int(n): int(a) for n, a in obj["terms"]}, obj.get("order"))


def from_iterable(pairs: Iterable[tuple[int, int]], order: int | None = None) -> Laurent:
    out: dict[int, int] = {}
    for n, a in pairs:
        out[n] = out.get(n, 0) + a
    return Laurent(out, order)


# Streaming exhaustive evaluation.  Large balls (10^9 points) cannot be
# materialised as Laurent objects; instead the leading coordinates are
# enumerated one prefix at a time and the trailing coordinates are kept as a
# cached integer block per remaining budget, so linear forms over the whole
# ball are evaluated in vectorised chunks.  Every point is visited once.

def _suffix_block(weights: tuple[Fraction, ...], budget: Fraction, memo: dict):
    import numpy as np

    key = (len(weights), budget)
    if key in memo:
        return memo[key]
    if not weights:
        out = np.zeros((1, 0), dtype=np.int64)
    else:
        w0, rest = weights[0], weights[1:]
        top = int(budget // w0) if w0 else 0
        parts = []
        for a in range(-top, top + 1):
            sub = _suffix_block(rest, budget - abs(a) * w0, memo)
            col = np.full((sub.shape[0], 1), a, dtype=np.int64)
            parts.append(np.hstack([col, sub]))
        out = np.vstack(parts)
    memo[key] = out
    return out


def stream_weighted_box(weights: Sequence[Fraction], c, split: int | None = None,
                        suffix_cap: int = 8_000_000):
    """Yield ``(prefix, block)`` pairs covering every integer vector in the box.

    ``prefix`` is a tuple for the first ``split`` coordinates and ``block`` an
    int64 array whose rows are all admissible completions.  The default split
    keeps every suffix block below ``suffix_cap`` rows.
    """
    weights = tuple(as_fraction(w) for w in weights)
    c = as_fraction(c)
    if split is None:
        split = len(weights)
        while split > 0 and count_weighted_box(weights[split - 1:], c) <= suffix_cap:
            split -= 1
    head, tail = weights[:split], weights[split:]
    memo: dict = {}
    for prefix in iter_weighted_box(head, c):
        budget = c - sum((abs(a) * w for a, w in zip(prefix, head)), Fraction(0))
        yield prefix, _suffix_block(tail, budget, memo)


def stream_linear_forms(weights: Sequence[Fraction], c, forms, abs_forms=(), dtype=None):
    """Evaluate linear forms on every point of the box, chunk by chunk.

    ``forms`` act on the coefficients, ``abs_forms`` on their absolute values.
    Yields ``(prefix, block, values)`` with one array per form, in order.
    Suffix products are cached per block, so each prefix costs one addition.
    """
    import numpy as np

    dtype = dtype or np.longdouble
    forms = [np.asarray(f, dtype=dtype) for f in forms]
    abs_forms = [np.asarray(f, dtype=dtype) for f in abs_forms]
    cache: dict[int, list] = {}
    for prefix, block in stream_weighted_box(weights, c):
        k = len(prefix)
        tails = cache.get(id(block))
        if tails is None:
            b = block.astype(dtype)
            tails = [b @ f[k:] for f in forms] + [np.abs(b) @ f[k:] for f in abs_forms]
            cache[id(block)] = tails
        heads = [sum((dtype(a) * f[i] for i, a in enumerate(prefix)), dtype(0)) for f in forms]
        heads += [sum((dtype(abs(a)) * f[i] for i, a in enumerate(prefix)), dtype(0)) for f in abs_forms]
        yield prefix, block, [h + t for h, t in zip(heads, tails)]
