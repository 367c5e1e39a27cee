"""lp measures on finite sets, Teichmueller jet coordinates, and integer measure modules."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Hashable, Mapping, Sequence

import numpy as np

from .errors import DomainError
from .laurent import as_fraction, make_radius


def _xlog(x: float, k: int) -> float:
    if x == 0:
        return 0.0
    return x * math.log(abs(x)) ** k / math.factorial(k)


def teich_std(x: float, n: int) -> list[float]:
    """Standard coordinates of ``[x] = x|x|^X`` in ``R[X]/X^n``."""
    return [_xlog(x, k) for k in range(n)]


def teich_coords(std: Sequence[float]) -> list[float]:
    """Unique ``x_i`` with ``sum [x_i] X^i = sum b_i X^i``, by peeling off one term at a time."""
    rem = [float(b) for b in std]
    n = len(rem)
    out = []
    for i in range(n):
        x = rem[i]
        out.append(x)
        for k, v in enumerate(teich_std(x, n - i)):
            rem[i + k] -= v
    return out


def teich_coords_closed(std: Sequence[float]) -> list[float]:
    """Closed formulas for ``n <= 3``; used to cross-check the peeling."""
    n = len(std)
    if n > 3:
        raise DomainError("closed form only for n <= 3")
    a = std[0]
    out = [a]
    if n >= 2:
        x1 = std[1] - _xlog(a, 1)
        out.append(x1)
    if n == 3:
        out.append(std[2] - _xlog(x1, 1) - _xlog(a, 2))
    return out


def _xlog_arr(x: np.ndarray, k: int) -> np.ndarray:
    ax = np.abs(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        v = x * np.log(np.where(ax > 0, ax, 1.0)) ** k / math.factorial(k)
    return np.where(ax > 0, v, 0.0)


def teich_to_std_array(teich: np.ndarray) -> np.ndarray:
    """Vectorised ``sum [x_i] X^i`` over the last axis."""
    n = teich.shape[-1]
    std = np.zeros_like(teich, dtype=float)
    for i in range(n):
        for k in range(n - i):
            std[..., i + k] += _xlog_arr(teich[..., i], k)
    return std


def std_to_teich_array(std: np.ndarray) -> np.ndarray:
    rem = np.array(std, dtype=float, copy=True)
    n = rem.shape[-1]
    out = np.zeros_like(rem)
    for i in range(n):
        x = rem[..., i].copy()
        out[..., i] = x
        for k in range(n - i):
            rem[..., i + k] -= _xlog_arr(x, k)
    return out


def lp_norm(v: Sequence[float], p: float) -> float:
    if not 0 < p <= 1:
        raise DomainError("p must lie in (0, 1]")
    return math.fsum(abs(a) ** p for a in v if a != 0)


@dataclass(frozen=True)
class RealJet:
    """Element of ``R[X]/X^n`` in standard and Teichmueller coordinates."""

    std: tuple[float, ...]
    teich: tuple[float, ...]

    @property
    def n(self) -> int:
        return len(self.std)

    @classmethod
    def from_std(cls, std: Sequence[float]) -> "RealJet":
        return cls(tuple(float(b) for b in std), tuple(teich_coords(std)))

    @classmethod
    def from_teich(cls, teich: Sequence[float]) -> "RealJet":
        n = len(teich)
        std = [0.0] * n
        for i, x in enumerate(teich):
            for k, v in enumerate(teich_std(x, n - i)):
                std[i + k] += v
        return cls(tuple(std), tuple(float(x) for x in teich))

    def __add__(self, other: "RealJet") -> "RealJet":
        return RealJet.from_std([a + b for a, b in zip(self.std, other.std)])

    def __mul__(self, other: "RealJet") -> "RealJet":
        n = self.n
        out = [0.0] * n
        for i, a in enumerate(self.std):
            for j in range(n - i):
                out[i + j] += a * other.std[j]
        return RealJet.from_std(out)

    def scale(self, lam: float) -> "RealJet":
        return RealJet.from_std([lam * b for b in self.std])

    def lp_norm(self, p: float) -> float:
        return lp_norm(self.teich, p)


def teich_expand(x: float, n: int) -> RealJet:
    return RealJet(tuple(teich_std(x, n)), (float(x),) + (0.0,) * (n - 1))


@dataclass(frozen=True)
class JetMeasure:
    jets: Mapping[Hashable, RealJet]
    p: float

    def norm(self) -> float:
        return math.fsum(j.lp_norm(self.p) for j in self.jets.values())

    def to_json(self) -> dict:
        keys = list(self.jets)
        return {
            "set": [str(s) for s in keys],
            "n": self.jets[keys[0]].n if keys else 0,
            "p": self.p,
            "teich": [list(self.jets[s].teich) for s in keys],
            "std": [list(self.jets[s].std) for s in keys],
        }


def pushforward(w: JetMeasure, f: Callable[[Hashable], Hashable] | Mapping) -> JetMeasure:
    """Fibrewise sum in standard coordinates, then fresh Teichmueller coordinates."""
    fn = f.__getitem__ if isinstance(f, Mapping) else f
    sums: dict[Hashable, list[float]] = {}
    for s, jet in w.jets.items():
        t = fn(s)
        acc = sums.setdefault(t, [0.0] * jet.n)
        for k, b in enumerate(jet.std):
            acc[k] += b
    return JetMeasure({t: RealJet.from_std(v) for t, v in sums.items()}, w.p)


def uniform_witness_ratio(k: int, p: float = 1.0) -> float:
    """Pushforward ratio of ``k`` copies of ``[1/k]`` collapsed to a point (n = 2)."""
    w = JetMeasure({i: teich_expand(1 / k, 2) for i in range(k)}, p)
    return pushforward(w, lambda s: 0).norm() / w.norm()


def _log_uniform(rng: np.random.Generator, shape) -> np.ndarray:
    mag = np.exp(rng.uniform(math.log(1e-6), math.log(1e2), size=shape))
    return mag * rng.choice([-1.0, 1.0], size=shape)


def _pushforward_batch(teich: np.ndarray, mask: np.ndarray, p: float) -> np.ndarray:
    """Ratios for a batch of measures on ``k <= kmax`` points collapsed to one point."""
    teich = np.where(mask[..., None], teich, 0.0)
    before = (np.abs(teich) ** p).sum(axis=(1, 2))
    out = std_to_teich_array(teich_to_std_array(teich).sum(axis=1))
    after = (np.abs(out) ** p).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(before > 0, after / before, 0.0)


def _structured_batch(rng: np.random.Generator, trials: int, n: int, kmax: int) -> np.ndarray:
    """Multisets of ``[+-rho^j]``: the inputs that arise from integer series."""
    rho = rng.uniform(0.05, 0.95, size=(trials, 1))
    exps = rng.integers(0, 12, size=(trials, kmax))
    signs = rng.choice([-1.0, 1.0], size=(trials, kmax))
    teich = np.zeros((trials, kmax, n))
    teich[..., 0] = signs * rho**exps
    return teich


def estimate_constants(kind: str, n: int, p: float, trials: int = 10_000, seed: int = 0,
                       kmax: int = 8) -> dict:
    """Empirical sup of output norm over input norm, with the maximising input."""
    if not 0 < p <= 1:
        raise DomainError("p must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    if kind == "pushforward":
        half = trials // 2
        k = rng.integers(1, kmax + 1, size=trials)
        mask = np.arange(kmax)[None, :] < k[:, None]
        teich = np.concatenate([_log_uniform(rng, (half, kmax, n)),
                                _structured_batch(rng, trials - half, n, kmax)])
        ratios = _pushforward_batch(teich, mask, p)
        i = int(np.argmax(ratios))
        sup, witness = float(ratios[i]), teich[i][mask[i]].tolist()
        for kk in (2, 4, 16, 64):
            r = uniform_witness_ratio(kk, p) if n == 2 else 0.0
            if r > sup:
                sup, witness = r, [[1 / kk, 0.0]] * kk
    elif kind == "addition":
        u = _log_uniform(rng, (trials, n))
        v = _log_uniform(rng, (trials, n))
        su = teich_to_std_array(u)
        sv = teich_to_std_array(v)
        out = std_to_teich_array(su + sv)
        nu = (np.abs(u) ** p).sum(1)
        nv = (np.abs(v) ** p).sum(1)
        ratios = (np.abs(out) ** p).sum(1) / np.maximum(nu, nv)
        i = int(np.argmax(ratios))
        sup, witness = float(ratios[i]), [u[i].tolist(), v[i].tolist()]
    elif kind == "scalar":
        u = _log_uniform(rng, (trials, n))
        lam = rng.uniform(-1.0, 1.0, size=(trials, 1))
        out = std_to_teich_array(lam * teich_to_std_array(u))
        ratios = (np.abs(out) ** p).sum(1) / (np.abs(u) ** p).sum(1)
        i = int(np.argmax(ratios))
        sup, witness = float(ratios[i]), [float(lam[i, 0]), u[i].tolist()]
    else:
        raise DomainError(f"unknown kind {kind!r}")
    return {"kind": kind, "n": n, "p": p, "trials": trials, "sup": sup, "witness": witness}


# Integer measure modules

@dataclass(frozen=True)
class TruncatedMeasure:
    """Finitely supported ``sum_{n,s} a_{n,s} T^n [s]`` with exact weighted norm."""

    support: tuple[Hashable, ...]
    m: int
    r: Fraction
    coeffs: Mapping[tuple[Hashable, int], int]
    reduced: bool = False

    def __post_init__(self):
        object.__setattr__(self, "r", make_radius(self.r))
        low = 1 if self.reduced else 0
        clean = {}
        for (s, n), a in self.coeffs.items():
            if s not in self.support or not low <= n <= self.m:
                raise DomainError(f"coefficient at ({s!r}, {n}) outside the model")
            if a:
                clean[(s, n)] = int(a)
        object.__setattr__(self, "coeffs", clean)

    def norm(self) -> Fraction:
        return sum((abs(a) * self.r**n for (_, n), a in self.coeffs.items()), Fraction(0))


def measure_pushforward(w: TruncatedMeasure, f: Callable | Mapping,
                        target: Sequence[Hashable] | None = None) -> TruncatedMeasure:
    fn = f.__getitem__ if isinstance(f, Mapping) else f
    out: dict[tuple[Hashable, int], int] = {}
    for (s, n), a in w.coeffs.items():
        key = (fn(s), n)
        out[key] = out.get(key, 0) + a
    if target is None:
        target = tuple(dict.fromkeys(fn(s) for s in w.support))
    return TruncatedMeasure(tuple(target), w.m, w.r, out, w.reduced)


def double_null_factorize(lam: Sequence[Sequence[float]]) -> tuple[list[float], list[float]]:
    """Nonincreasing bounds with ``lam[n][m] <= row[n] * col[m]``.

    Both sequences are ``sqrt`` of the tail maxima over ``max(n', m') >= n``.
    """
    a = np.asarray(lam, dtype=float)
    if a.size and (a.min() <= 0 or a.max() > 1):
        raise DomainError("entries must lie in (0, 1]")
    rows, cols = a.shape
    size = max(rows, cols)
    tail = [0.0] * (size + 1)
    for k in range(size - 1, -1, -1):
        band = max(a[k, :].max() if k < rows else 0.0, a[:, k].max() if k < cols else 0.0)
        tail[k] = max(tail[k + 1], band)
    bounds = [math.sqrt(t) for t in tail[:size]]
    return bounds[:rows], bounds[:cols]


def quotient_iso_check(S: int, r, rp, c, m: int, n: int = 1, samples: int = 500,
                       seed: int = 0, jet_constant: float | None = None) -> list[dict]:
    """Forward and backward halves of the measure-module identification."""
    from .laurent import Laurent, count_weighted_box, stream_cap, stream_linear_forms, weighted_norm
    from .theta import (MARGIN, bounded_digit_expand, exponent_p, theta_jet_eval)

    r, rp, c = make_radius(r), make_radius(rp), as_fraction(c)
    if not rp < r:
        raise DomainError("need rp < r")
    p = float(exponent_p(r, rp))
    rows: list[dict] = []
    rng = np.random.default_rng(seed)

    size, cap = count_weighted_box(tuple(r**j for j in range(m + 1)) * S, c), stream_cap()
    if n == 1 and cap is not None and size > cap:
        rows.append(dict(check="forward n=1 exhaustive", inputs=f"|S|={S} r={r} rp={rp} c={c} m={m}",
                         claim="sum_s |theta(w_s)|^p <= nu(w)", observed=f"budget: {size} points, cap is {cap}",
                         margin=0, status="skipped-budget"))
    elif n == 1:
        ld = np.longdouble
        weights = [r**j for j in range(m + 1)] * S
        tw = np.array([(ld(rp.numerator) / ld(rp.denominator)) ** j for j in range(m + 1)] * S)
        nw = np.array([ld(w.numerator) / ld(w.denominator) for w in weights])
        p_ld = ld(str(exponent_p(r, rp)))
        # order coordinates by decreasing weight so the streamed suffix is small
        order = sorted(range(len(weights)), key=lambda i: -weights[i])
        weights = [weights[i] for i in order]
        tw, nw = tw[order], nw[order]
        owner = np.array([i // (m + 1) for i in order])
        theta_forms = [np.where(owner == s, tw, 0) for s in range(S)]
        seen = viol = 0
        for prefix, block, vals in stream_linear_forms(weights, c, theta_forms, [nw]):
            img = sum(np.abs(v) ** p_ld for v in vals[:S])
            excess = img - vals[S]
            seen += len(block)
            viol += int((excess > MARGIN).sum())
        expected = count_weighted_box(tuple(weights), c)
        rows.append(dict(check="forward n=1 exhaustive", inputs=f"|S|={S} r={r} rp={rp} c={c} m={m}",
                         claim="sum_s |theta(w_s)|^p <= nu(w)", observed=f"{viol} violations / {seen}",
                         margin=MARGIN, status="pass" if viol == 0 and seen == expected else "fail"))
    else:
        if jet_constant is None:
            jet_constant = estimate_constants("pushforward", n, p, trials=20_000, seed=seed)["sup"]
        exceed = 0
        worst_ratio = 0.0
        for _ in range(samples):
            coeffs = {}
            budget = c
            for s in range(S):
                for j in rng.permutation(m + 1):
                    top = int(budget // r ** int(j))
                    if top:
                        a = int(rng.integers(-top, top + 1))
                        coeffs[(s, int(j))] = a
                        budget -= abs(a) * r ** int(j)
            nu = sum((abs(a) * r**j for (_, j), a in coeffs.items()), Fraction(0))
            if nu == 0:
                continue
            img = 0.0
            for s in range(S):
                g = Laurent({j: a for (t, j), a in coeffs.items() if t == s})
                img += theta_jet_eval(g, rp, n).lp_norm(p)
            ratio = img / float(nu)
            worst_ratio = max(worst_ratio, ratio)
            exceed += ratio > jet_constant * (1 + MARGIN)
        rows.append(dict(check=f"forward n={n} sampled", inputs=f"|S|={S} r={r} rp={rp} c={c} m={m}",
                         claim=f"lp norm of theta_n(w) <= C nu(w), C = {jet_constant:.12g}",
                         observed=f"{worst_ratio:.12g}", margin=MARGIN,
                         status="pass" if exceed == 0 else "fail"))

    c4 = 1 / (float(rp) * (1 - float(r)))
    bad = 0
    worst_back = 0.0
    for _ in range(samples):
        raw = np.abs(rng.standard_normal(S)) + 1e-3
        scale = (float(c) / (raw**p).sum()) ** (1 / p) * rng.uniform(0.01, 1.0)
        zs = [Fraction(int(round(v * scale * 10**9)), 10**9) * int(rng.choice([-1, 1])) for v in raw]
        lp = sum(abs(float(z)) ** p for z in zs)
        nu = sum(float(weighted_norm(bounded_digit_expand(z, r, rp), r)) for z in zs)
        if lp > 0:
            worst_back = max(worst_back, nu / lp)
        bad += nu > c4 * lp * (1 + MARGIN) + MARGIN
    rows.append(dict(check="backward lift", inputs=f"|S|={S} r={r} rp={rp} samples={samples}",
                     claim=f"nu(lift) <= C4 * lp(z), C4 = {c4:.12g}", observed=f"{worst_back:.12g}",
                     margin=MARGIN, status="pass" if bad == 0 else "fail"))
    return rows
