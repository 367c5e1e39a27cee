"""Entropy functional and the Ribe extension."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, LengthMismatch

RIBE_CONSTANT = 1 + 2 * math.log(2)


def _xlogx(x: float) -> float:
    return x * math.log(abs(x)) if x else 0.0


def entropy_defect(s: float, t: float) -> float:
    """``|s log|s| + t log|t| - (s+t) log|s+t||`` with ``0 log 0 = 0``."""
    return abs(_xlogx(s) + _xlogx(t) - _xlogx(s + t))


def entropy_H(x: Sequence[float]) -> float:
    s = math.fsum(x)
    return _xlogx(s) - math.fsum(_xlogx(v) for v in x)


def defect_ratio_sup(grid: int = 2000, samples: int = 10_000, seed: int = 0) -> tuple[float, tuple[float, float]]:
    """Sup of ``defect(s,t)/(|s|+|t|)`` over the normalised slice plus random rescalings.

    The slice fixes ``t = 1`` and takes ``s`` on a log-scaled grid in ``[-1, 1]``
    in both coordinates; rescalings by random ``lam`` use homogeneity of degree 1.
    """
    mags = np.concatenate([[0.0], np.geomspace(1e-12, 1.0, grid - 1)])
    s_vals = np.concatenate([-mags[::-1], mags[1:]])
    t_vals = np.geomspace(1e-12, 1.0, grid)
    S, T = np.meshgrid(s_vals, np.concatenate([t_vals, [1.0]]), indexing="ij")

    def xlog(a):
        aa = np.abs(a)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(aa > 0, a * np.log(np.where(aa > 0, aa, 1.0)), 0.0)

    d = np.abs(xlog(S) + xlog(T) - xlog(S + T)) / (np.abs(S) + np.abs(T))
    i = np.unravel_index(int(np.argmax(d)), d.shape)
    best, arg = float(d[i]), (float(S[i]), float(T[i]))

    rng = np.random.default_rng(seed)
    for _ in range(samples):
        s, t = rng.uniform(-1, 1, size=2)
        lam = math.exp(rng.uniform(-20, 20))
        v = entropy_defect(lam * s, lam * t) / (lam * (abs(s) + abs(t))) if (s or t) else 0.0
        if v > best:
            best, arg = v, (lam * s, lam * t)
    return best, arg


@dataclass(frozen=True)
class RibeElement:
    x: tuple[float, ...]
    y: tuple[float, ...]

    def __post_init__(self):
        if len(self.x) != len(self.y):
            raise LengthMismatch("x and y must have equal length")

    def norm(self) -> float:
        return math.fsum(abs(a) + abs(b - _xlogx(a)) for a, b in zip(self.x, self.y))

    def __neg__(self) -> "RibeElement":
        return RibeElement(tuple(-a for a in self.x), tuple(-b for b in self.y))


def ribe_add(u: RibeElement, v: RibeElement) -> RibeElement:
    if len(u.x) != len(v.x):
        raise LengthMismatch(f"lengths {len(u.x)} and {len(v.x)} differ")
    return RibeElement(tuple(a + b for a, b in zip(u.x, v.x)), tuple(a + b for a, b in zip(u.y, v.y)))


@dataclass(frozen=True)
class NonsplitWitness:
    n: int
    H: float
    defect_lower: float


def nonsplit_witness(L: float, eps: float) -> NonsplitWitness:
    """Uniform vector whose entropy escapes every functional bounded by ``L`` on the basis.

    A functional with ``|f(e_i)| <= L`` gives ``|f(z_n)| <= L`` on ``z_n = (1/n, ...)``,
    while ``H(z_n) = log n``.
    """
    if L < 0:
        raise DomainError("L must be nonnegative")
    n = math.ceil(math.exp(L + eps))
    H = entropy_H([1 / n] * n)
    lower = H - L
    assert lower >= eps - 1e-12
    return NonsplitWitness(n, H, lower)
