"""Evaluation maps, digit expansions and kernel generators.

Real points are exact rationals.  Complex points are Gaussian rationals so
that ``theta_x(g) = 0`` can be checked without rounding.  p-adic points are
integers ``x = u * p^m`` handled modulo ``p^K``.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

import mpmath
import numpy as np

from .errors import DomainError, PrecisionExhausted
from .laurent import (
    Laurent,
    as_fraction,
    count_weighted_box,
    make_radius,
    ring_mul,
    stream_cap,
    stream_linear_forms,
    weighted_norm,
)

mpmath.mp.dps = 50

MARGIN = 1e-9


@dataclass(frozen=True)
class Interval:
    lo: Fraction
    hi: Fraction

    def contains(self, v) -> bool:
        return self.lo <= v <= self.hi

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    def __add__(self, other: "Interval") -> "Interval":
        return Interval(self.lo + other.lo, self.hi + other.hi)

    def issubset(self, other: "Interval") -> bool:
        return other.lo <= self.lo and self.hi <= other.hi


@dataclass(frozen=True)
class GaussianRational:
    re: Fraction
    im: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "re", as_fraction(self.re))
        object.__setattr__(self, "im", as_fraction(self.im))

    @staticmethod
    def lift(v) -> "GaussianRational":
        return v if isinstance(v, GaussianRational) else GaussianRational(as_fraction(v))

    def __add__(self, o):
        o = GaussianRational.lift(o)
        return GaussianRational(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __sub__(self, o):
        return self + (-GaussianRational.lift(o))

    def __mul__(self, o):
        o = GaussianRational.lift(o)
        return GaussianRational(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def conj(self):
        return GaussianRational(self.re, -self.im)

    def abs2(self) -> Fraction:
        return self.re * self.re + self.im * self.im

    def inverse(self):
        n = self.abs2()
        if n == 0:
            raise ZeroDivisionError("inverse of 0")
        return GaussianRational(self.re / n, -self.im / n)

    def __pow__(self, k: int):
        base, out = (self, GaussianRational(1)) if k >= 0 else (self.inverse(), GaussianRational(1))
        for _ in range(abs(k)):
            out = out * base
        return out

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0


Point = Union[Fraction, GaussianRational]


def _is_complex(x) -> bool:
    return isinstance(x, GaussianRational) and x.im != 0


def _abs2(x) -> Fraction:
    return x.abs2() if isinstance(x, GaussianRational) else x * x


def theta_exact(f: Laurent, x):
    """Value of the known coefficients of ``f`` at ``x`` (no tail)."""
    if isinstance(x, GaussianRational):
        acc = GaussianRational(0)
        for n, a in f.terms():
            acc = acc + x**n * a
        return acc
    x = as_fraction(x)
    return sum((a * x**n for n, a in f.terms()), Fraction(0))


def theta_eval(f: Laurent, x, tail_coeff_bound=0) -> Interval:
    """Enclosure of ``theta_x(f)``; jets are widened by the geometric tail."""
    x = as_fraction(x)
    if x == 0 or abs(x) >= 1:
        raise DomainError("evaluation point must satisfy 0 < |x| < 1")
    v = theta_exact(f, x)
    if f.order is None:
        return Interval(v, v)
    tail = as_fraction(tail_coeff_bound) * abs(x) ** f.order / (1 - abs(x))
    return Interval(v - tail, v + tail)


def _min_exponent(base: Fraction, y: Fraction) -> int:
    """Smallest integer ``n`` with ``base^n <= y`` for ``0 < base < 1``, ``y > 0``."""
    # logs of the parts separately: the numerator may exceed float range
    n = math.ceil((math.log(y.numerator) - math.log(y.denominator)) / math.log(base))
    while base**n > y:
        n += 1
    while base ** (n - 1) <= y:
        n -= 1
    return n


def real_digit_expand(y, x, N: int, terms: int = 64) -> Laurent:
    """Greedy expansion of ``y >= 0`` in powers of ``x`` with digits in ``[0, N-1]``.

    Each step uses the largest power ``x^n`` not exceeding the remainder, so the
    exponents increase and the remainder after the last digit is below ``x^n``.
    """
    y, x = as_fraction(y), as_fraction(x)
    if y < 0:
        raise DomainError("y must be nonnegative")
    if not 0 < x < 1:
        raise DomainError("x must lie in (0, 1)")
    if x < Fraction(1, N):
        raise DomainError(f"x = {x} is smaller than 1/N = 1/{N}")
    digits: dict[int, int] = {}
    rem = y
    for _ in range(terms):
        if rem == 0:
            break
        n = _min_exponent(x, rem)
        a = int(rem // x**n)
        assert 1 <= a <= N - 1, "digit bound violated"
        digits[n] = a
        rem -= a * x**n
    return Laurent(digits)


def bounded_digit_expand(z, r, rp, terms: int = 64) -> Laurent:
    """Expansion ``z = sum a_i rp^i`` with ``|a_i| <= 1/rp`` and increasing exponents.

    ``r`` is only validated here; the norm bound is checked by
    :func:`c4_bound_check`.
    """
    z, rp = as_fraction(z), as_fraction(rp)
    if not 0 < rp < 1:
        raise DomainError("rp must lie in (0, 1)")
    if not 0 < float(r) < 1:
        raise DomainError("r must lie in (0, 1)")
    digits: dict[int, int] = {}
    rem = z
    for _ in range(terms):
        if rem == 0:
            break
        n = _min_exponent(rp, abs(rem))
        a = int(abs(rem) // rp**n)
        if rem < 0:
            a = -a
        digits[n] = a
        rem -= a * rp**n
    return Laurent(digits)


def exponent_p(r, rp) -> mpmath.mpf:
    return mpmath.log(mpmath.mpf(_mp(r))) / mpmath.log(mpmath.mpf(_mp(rp)))


def _mp(v):
    if isinstance(v, Fraction):
        return mpmath.mpf(v.numerator) / v.denominator
    return mpmath.mpf(v)


def c4_bound_check(z, g: Laurent, r, rp) -> tuple[bool, mpmath.mpf, mpmath.mpf]:
    """``nu_r(g) <= |z|^p / (rp (1 - r))`` with relative margin; returns (ok, lhs, rhs)."""
    nu = _mp(weighted_norm(g, r if isinstance(r, Fraction) else mpmath.mpf(r)))
    p = exponent_p(r, rp)
    bound = abs(_mp(as_fraction(z))) ** p / (_mp(rp) * (1 - _mp(r)))
    return bool(nu <= bound + MARGIN * max(1, bound)), nu, bound


# p-adic digits

@dataclass(frozen=True)
class PadicPoint:
    p: int
    x: int
    K: int
    m: int = field(init=False)
    unit: int = field(init=False)

    def __post_init__(self):
        if self.p < 2 or any(self.p % q == 0 for q in range(2, math.isqrt(self.p) + 1)):
            raise DomainError(f"{self.p} is not prime")
        x = self.x % self.p**self.K
        if x == 0:
            raise DomainError("x vanishes at the working precision")
        m = 0
        while x % self.p == 0:
            x //= self.p
            m += 1
        if m < 1:
            raise DomainError("x must be divisible by p")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "unit", x)

    @property
    def max_digits(self) -> int:
        return self.K // self.m


def padic_digit_expand(y: int, pt: PadicPoint, digits: int | None = None) -> Laurent:
    """Unique ``sum a_j T^j`` with ``a_j in [0, p^m)`` and ``theta_x = y`` mod ``p^(m*digits)``."""
    p, m, K = pt.p, pt.m, pt.K
    if digits is None:
        digits = pt.max_digits
    if digits > pt.max_digits:
        raise PrecisionExhausted(f"{digits} digits requested, only {pt.max_digits} available at K={K}")
    pm = p**m
    prec = K
    cur = y % p**prec
    out: dict[int, int] = {}
    for j in range(digits):
        a = cur % pm
        if a:
            out[j] = a
        prec -= m
        if prec <= 0:
            break
        mod = p**prec
        cur = ((cur - a) // pm) * pow(pt.unit, -1, mod) % mod
    return Laurent(out)


def padic_theta(f: Laurent, pt: PadicPoint) -> int:
    mod = pt.p**pt.K
    return sum(a * pow(pt.x, n, mod) for n, a in f.terms()) % mod


# Kernel generators

@dataclass
class GeneratorCertificate:
    f: Laurent
    x: Point
    r: Fraction
    n: int
    coeff_bound: Fraction
    residual_bound: Fraction
    g: list[Fraction]
    g_vanishes: bool
    h_margin: Fraction  # 1 - (1/2) r^n / (1 - r), exact and positive


def _poly_mul(a: list[Fraction], b: list[Fraction]) -> list[Fraction]:
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, u in enumerate(a):
        if u:
            for j, v in enumerate(b):
                out[i + j] += u * v
    return out


def _poly_eval(coeffs: list[Fraction], x):
    acc = GaussianRational(0) if isinstance(x, GaussianRational) else Fraction(0)
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def construct_generator(x, r, M: int = 200) -> GeneratorCertificate:
    """Integer series ``f = g*h`` mod ``T^M`` whose only zero in ``|T| <= r`` is ``x``.

    ``g`` is a polynomial with an exact zero at ``x`` (and ``conj(x)``), whose
    coefficients of ``T^1..T^(n-1)`` are cleared; ``h`` is chosen greedily with
    ``|h_k| <= 1/2`` so that ``g*h`` has integer coefficients.
    """
    r = make_radius(r)
    if isinstance(x, GaussianRational) and x.im == 0:
        x = x.re
    complex_pt = _is_complex(x)
    if not complex_pt:
        x = as_fraction(x)
    if _abs2(x) == 0 or _abs2(x) > r * r:
        raise DomainError(f"need 0 < |x| <= r, got |x|^2 = {_abs2(x)}, r = {r}")

    flip = not complex_pt and x < 0
    base = -x if flip else x
    if complex_pt:
        inv = base.inverse()
        g = [Fraction(1), -2 * inv.re, inv.abs2()]
    else:
        g = [Fraction(1), -1 / base]

    n = 1
    while r**n >= 2 * (1 - r):
        n += 1
    for j in range(1, n):
        a = g[j] if j < len(g) else Fraction(0)
        if a == 0:
            continue
        mult = math.floor(abs(a)) + 1
        factor = [Fraction(1)] + [Fraction(0)] * (j - 1) + [-a / mult]
        for _ in range(mult):
            g = _poly_mul(g, factor)
        assert g[j] == 0

    h = [Fraction(1)]
    f = [1]
    for k in range(1, M):
        u = sum((g[j] * h[k - j] for j in range(1, min(k, len(g) - 1) + 1)), Fraction(0))
        fk = math.floor(u + Fraction(1, 2))
        h.append(fk - u)
        f.append(fk)

    series = Laurent(dict(enumerate(f)), order=M)
    if flip:
        series = series.substitute_neg()
    bound = max(abs(c) for c in g) + sum(abs(c) for c in g) / 2
    ax = abs(base) if not complex_pt else None
    if complex_pt:
        # |x| <= r, and r bounds the tail geometric ratio rationally
        resid = bound * r**M / (1 - r)
    else:
        resid = bound * ax**M / (1 - ax)
    g_zero = _poly_eval(g, base)
    vanishes = g_zero.is_zero() if isinstance(g_zero, GaussianRational) else g_zero == 0
    margin = 1 - Fraction(1, 2) * r**n / (1 - r)
    if margin <= 0:
        raise AssertionError("stopping rule failed to make h nonvanishing")
    return GeneratorCertificate(series, x, r, n, bound, resid, g, vanishes, margin)


def certificate_holds(cert: GeneratorCertificate) -> bool:
    """Recheck the certificate from its recorded data."""
    f = cert.f
    ints = all(isinstance(a, int) for _, a in f.terms()) and f[0] == 1
    coeffs_ok = all(abs(a) <= cert.coeff_bound for _, a in f.terms())
    if _is_complex(cert.x):
        val = theta_exact(f, cert.x)
        resid_ok = val.abs2() <= cert.residual_bound**2
    else:
        resid_ok = theta_eval(f, cert.x, cert.coeff_bound).contains(0)
    return ints and coeffs_ok and resid_ok and cert.g_vanishes and cert.h_margin > 0


# Jet evaluation

def theta_jet_eval(f: Laurent, rp, n: int):
    """Image of ``f`` under ``T -> [rp] = rp^(1+X)`` in ``R[X]/X^n``."""
    from .lp_measures import RealJet

    lr = math.log(float(rp))
    std = [0.0] * n
    for j, a in f.terms():
        base = a * float(rp) ** j
        for k in range(n):
            std[k] += base * (j * lr) ** k / math.factorial(k)
    return RealJet.from_std(std)


# Constant checks

@dataclass
class C3Result:
    points: int
    expected: int
    violations: int
    worst_excess: float
    witness: tuple[int, ...] | None


def check_c3_exhaustive(r, c, m: int, rp=None, p=None) -> C3Result:
    """Check ``|theta_rp(g)|^p <= nu_r(g)`` for every integer jet in the ball.

    Give either a rational ``rp`` (then ``p = log r / log rp`` and logarithms
    are compared in extended precision) or a rational ``p`` (then
    ``rp = r^(1/p)`` and the comparison ``|theta|^a <= nu^b`` for ``p = a/b``
    uses only products).
    """
    r, c = make_radius(r), as_fraction(c)
    ld = np.longdouble
    if p is not None:
        p = as_fraction(p)
        rp_val = ld(str(mpmath.power(_mp(r), 1 / _mp(p))))
        a_pow, b_pow = p.numerator, p.denominator
    else:
        rp = make_radius(rp)
        rp_val = ld(rp.numerator) / ld(rp.denominator)
        p_val = ld(str(exponent_p(r, rp)))
    weights = [r**n for n in range(m + 1)]
    tw = np.array([rp_val**n for n in range(m + 1)], dtype=ld)
    nw = np.array([ld(w.numerator) / ld(w.denominator) for w in weights], dtype=ld)
    seen = viol = 0
    worst, witness = -np.inf, None
    for prefix, block, (th, nu) in stream_linear_forms(weights, c, [tw], [nw]):
        th = np.abs(th)
        if p is not None:
            excess = th**a_pow - nu**b_pow
        else:
            with np.errstate(divide="ignore"):
                excess = np.where(th > 0, p_val * np.log(th) - np.log(np.where(nu > 0, nu, 1)), -np.inf)
        seen += len(block)
        viol += int((excess > MARGIN).sum())
        i = int(np.argmax(excess))
        if excess[i] > worst:
            worst, witness = float(excess[i]), tuple(prefix) + tuple(int(v) for v in block[i])
    return C3Result(seen, count_weighted_box(tuple(weights), c), viol, worst, witness)


def _random_ball_element(rng: random.Random, r: Fraction, c: Fraction, m: int) -> Laurent:
    coeffs = {}
    budget = c
    for n in rng.sample(range(m + 1), m + 1):
        top = int(budget // r**n)
        if top:
            a = rng.randint(-top, top)
            coeffs[n] = a
            budget -= abs(a) * r**n
    return Laurent(coeffs)


def verify_lec7_constants(r, rp, m: int = 6, samples: int = 200, seed: int = 0,
                          jet_n: int = 2, jet_constant: float | None = None) -> list[dict]:
    """Rows for the two quantitative propositions of the kernel-generator section."""
    r, rp = make_radius(r), make_radius(rp)
    if not rp < r:
        raise DomainError("need rp < r")
    rng = random.Random(seed)
    rows: list[dict] = []
    p = exponent_p(r, rp)

    size, cap = count_weighted_box(tuple(r**n for n in range(m + 1)), Fraction(1)), stream_cap()
    if cap is not None and size > cap:
        rows.append(dict(check="C3=1 exhaustive", inputs=f"r={r} rp={rp} c=1 m={m}",
                         claim="|theta(g)|^p <= nu_r(g)", observed=f"budget: {size} points, cap is {cap}",
                         margin=0, status="skipped-budget"))
    else:
        c3 = check_c3_exhaustive(r, 1, m, rp=rp)
        rows.append(dict(check="C3=1 exhaustive", inputs=f"r={r} rp={rp} c=1 m={m}",
                         claim="|theta(g)|^p <= nu_r(g)", observed=f"{c3.violations} violations / {c3.points}",
                         margin=MARGIN, status="pass" if c3.violations == 0 and c3.points == c3.expected else "fail"))

    worst = mpmath.mpf(0)
    ok = True
    for _ in range(samples):
        z = Fraction(rng.randint(-10**7, 10**7), 10**6)
        g = bounded_digit_expand(z, r, rp)
        good, nu, bound = c4_bound_check(z, g, r, rp)
        ok &= good
        if bound > 0:
            worst = max(worst, nu / bound)
    rows.append(dict(check="C4 digit expansion", inputs=f"r={r} rp={rp} samples={samples}",
                     claim="nu_r(g) <= |z|^p/(rp(1-r))", observed=mpmath.nstr(worst, 12),
                     margin=MARGIN, status="pass" if ok else "fail"))

    cert = construct_generator(rp, r, M=64)
    f = cert.f
    nu_f = weighted_norm(f, r) + cert.coeff_bound * r**f.order / (1 - r)
    c1 = Fraction(0)
    c2 = Fraction(0)
    for _ in range(samples):
        g = _random_ball_element(rng, r, Fraction(1), m)
        if g.is_zero():
            continue
        fg = ring_mul(f, g)
        ng = weighted_norm(g, r)
        nfg = weighted_norm(fg, r)
        c1 = max(c1, nfg / ng)
        if nfg:
            c2 = max(c2, ng / nfg)
    rows.append(dict(check="C1 multiplication", inputs=f"r={r} rp={rp} samples={samples}",
                     claim=f"nu(fg)/nu(g) <= nu(f) = {float(nu_f):.12g}", observed=f"{float(c1):.12g}",
                     margin=0, status="pass" if c1 <= nu_f else "fail"))
    rows.append(dict(check="C2 division", inputs=f"r={r} rp={rp} samples={samples}",
                     claim="sup nu(g)/nu(fg) finite (no explicit value)", observed=f"{float(c2):.12g}",
                     margin=0, status="pass" if math.isfinite(float(c2)) else "fail"))

    if jet_constant is None:
        from .lp_measures import estimate_constants

        jet_constant = estimate_constants("pushforward", jet_n, float(p), trials=2000, seed=seed)["sup"]
    exceed = 0
    worst_ratio = 0.0
    for _ in range(samples):
        g = _random_ball_element(rng, r, Fraction(1), m)
        if g.is_zero():
            continue
        jet = theta_jet_eval(g, rp, jet_n)
        ratio = jet.lp_norm(float(p)) / float(weighted_norm(g, r))
        worst_ratio = max(worst_ratio, ratio)
        exceed += ratio > jet_constant * (1 + MARGIN)
    rows.append(dict(check="C3=C jet version", inputs=f"r={r} rp={rp} n={jet_n} samples={samples}",
                     claim=f"lp norm of theta_n(g) <= C nu(g), C = {jet_constant:.12g}",
                     observed=f"{worst_ratio:.12g}", margin=MARGIN, status="pass" if exceed == 0 else "fail"))
    return rows
