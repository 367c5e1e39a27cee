"""Normed homological algebra at desk scale.

Complexes are finite-dimensional real vector spaces with polyhedral norms
``||v|| = min_w ||A v + B w||`` (``B`` empty except for quotient norms), in
either the l1 or the l-infinity flavour.  Restrictions between levels are the
scalars ``(c/c')^alpha``.  Best preimages are found exactly by linear
programming, so a reported pass carries an explicit witness ``y``.

A finite set of probes can only falsify exactness, never prove it; reports
therefore say "no violation found".
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import GridMismatch, HypothesisFailure, SolverFailure, TailBudget
from .laurent import as_fraction, iter_weighted_box, make_radius

TOL = 1e-9
NO_VIOLATION = "no violation found (finite probes falsify, they do not verify)"


# ---------------------------------------------------------------- norms

def _vec_norm(v: np.ndarray, kind: str) -> float:
    if v.size == 0:
        return 0.0
    return float(np.abs(v).sum()) if kind == "l1" else float(np.abs(v).max())


def _as2d(x, rows: int) -> np.ndarray:
    x = np.asarray(x, float)
    if x.ndim == 2:
        return x
    return x.reshape(rows, x.size // rows if rows else 0)


def lp_min(c: np.ndarray, G: np.ndarray, kind: str) -> tuple[float, np.ndarray, float]:
    """``min_z ||c + G z||``.

    Returns ``(value, z, lower)``: ``value`` is the norm actually attained at
    the returned ``z`` (a sound upper bound on the minimum) and ``lower`` the
    LP optimum reported by the solver.
    """
    c = np.asarray(c, float)
    G = _as2d(G, c.size)
    nz = G.shape[1]
    if nz == 0 or c.size == 0 or not np.any(c):
        z = np.zeros(nz)
        v = _vec_norm(c, kind)
        return v, z, v
    s = float(np.abs(c).max())
    c = c / s
    gs = np.abs(G).max(axis=0)
    gs[gs == 0] = 1.0
    G = G / gs
    R = c.size
    nt = R if kind == "l1" else 1
    E = np.eye(R) if kind == "l1" else np.ones((R, 1))
    A_ub = np.block([[G, -E], [-G, -E]])
    b_ub = np.concatenate([-c, c])
    obj = np.concatenate([np.zeros(nz), np.ones(nt)])
    bounds = [(None, None)] * nz + [(0, None)] * nt
    res = linprog(obj, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status != 0:
        raise SolverFailure(f"linprog: {res.message}")
    z = _polish(c, G, res.x[:nz], kind)
    return s * _vec_norm(c + G @ z, kind), s * z / gs, s * float(res.fun)


def _polish(c: np.ndarray, G: np.ndarray, z: np.ndarray, kind: str) -> np.ndarray:
    """Re-solve the rows the LP left (nearly) tight; keep whichever ``z`` is better."""
    r = c + G @ z
    best, val = z, _vec_norm(r, kind)
    if kind == "l1":
        act = np.abs(r) <= 1e-6
        if act.any():
            z2 = np.linalg.lstsq(G[act], -c[act], rcond=None)[0]
            v2 = _vec_norm(c + G @ z2, kind)
            if v2 < val:
                best, val = z2, v2
    return best


@dataclass
class Norm:
    """``||v|| = min_w ||A v + B w||_kind``; ``B`` is ``None`` for an honest polyhedral norm."""

    A: np.ndarray
    kind: str = "l1"
    B: np.ndarray | None = None

    def __post_init__(self):
        A = np.asarray(self.A, float)
        self.A = A if A.ndim == 2 else (np.zeros((0, 0)) if A.size == 0 else np.atleast_2d(A))
        if self.kind not in ("l1", "linf"):
            raise ValueError(f"unknown norm kind {self.kind!r}")
        if self.B is not None:
            self.B = _as2d(self.B, self.A.shape[0])
            if self.B.shape[1] == 0:
                self.B = None

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @classmethod
    def standard(cls, n: int, kind: str = "l1") -> "Norm":
        return cls(np.eye(n), kind)

    def __call__(self, v) -> float:
        v = np.asarray(v, float)
        if self.B is None:
            return _vec_norm(self.A @ v, self.kind)
        return lp_min(self.A @ v, self.B, self.kind)[0]

    def dist(self, b, D: np.ndarray) -> tuple[float, np.ndarray, float]:
        """``min_y ||b - D y||``; returns ``(value, y, lower)``."""
        b = np.asarray(b, float)
        D = _as2d(D, self.dim)
        G = -self.A @ D
        if self.B is not None:
            G = np.hstack([G, self.B])
        val, z, low = lp_min(self.A @ b, G, self.kind)
        return val, z[: D.shape[1]], low

    def scaled(self, t: float) -> "Norm":
        return Norm(t * self.A, self.kind, None if self.B is None else t * self.B)

    def to_json(self) -> dict:
        out = {"kind": self.kind, "A": self.A.tolist()}
        if self.B is not None:
            out["B"] = self.B.tolist()
        return out


def _pq(M: np.ndarray, p: str, q: str) -> float:
    if M.size == 0:
        return 0.0
    aM = np.abs(M)
    if p == "l1" and q == "l1":
        return float(aM.sum(axis=0).max())
    if p == "linf" and q == "linf":
        return float(aM.sum(axis=1).max())
    if p == "l1":
        return float(aM.max())
    n = M.shape[1]
    if n > 14:
        return float(aM.sum())
    # the l-inf ball is the cube; its vertices realise the maximum
    best = 0.0
    for signs in itertools.product((1.0, -1.0), repeat=n - 1):
        v = np.array((1.0,) + signs)
        best = max(best, float(np.abs(M @ v).sum()))
    return best


def op_bound(M, src: Norm, dst: Norm) -> float:
    """Upper bound on the operator norm of ``M`` from ``src`` to ``dst``.

    Uses ``v = L A v`` for a left inverse ``L`` of ``src.A``; a quotient target
    is bounded by its ambient norm (``w = 0``).
    """
    if src.B is not None:
        raise ValueError("source must not be a quotient norm")
    M = np.asarray(M, float).reshape(dst.dim, src.dim)
    if src.dim == 0 or dst.dim == 0:
        return 0.0
    if np.linalg.matrix_rank(src.A) < src.dim:
        raise ValueError("source norm matrix is not injective")
    return _pq(dst.A @ M @ np.linalg.pinv(src.A), src.kind, dst.kind)


# ---------------------------------------------------------------- systems

def _rank(M: np.ndarray) -> int:
    return int(np.linalg.matrix_rank(M, tol=1e-9 * max(1.0, float(np.abs(M).max(initial=0.0))))) if M.size else 0


def _nullspace(M: np.ndarray) -> np.ndarray:
    n = M.shape[1]
    if M.size == 0:
        return np.eye(n)
    _, s, vt = np.linalg.svd(M)
    r = int((s > 1e-9 * max(1.0, s.max(initial=0.0))).sum())
    return vt[r:].T


@dataclass
class NormedComplex:
    """``C^0 -> C^1 -> ... -> C^L`` with ``d[i]: C^i -> C^(i+1)``."""

    norms: list[Norm]
    d: list[np.ndarray]

    def __post_init__(self):
        self.d = [np.asarray(x, float).reshape(self.norms[i + 1].dim, self.norms[i].dim) for i, x in enumerate(self.d)]
        if len(self.d) != len(self.norms) - 1:
            raise ValueError("need one differential between consecutive terms")

    @property
    def length(self) -> int:
        return len(self.norms) - 1

    def dims(self) -> list[int]:
        return [n.dim for n in self.norms]

    def dd_zero(self) -> float:
        return max((float(np.abs(b @ a).max(initial=0.0)) for a, b in zip(self.d, self.d[1:])), default=0.0)

    def incoming(self, i: int) -> np.ndarray:
        return self.d[i - 1] if i > 0 else np.zeros((self.norms[0].dim, 0))

    def exact_at(self, i: int) -> bool:
        return _rank(self.incoming(i)) + _rank(self.d[i]) == self.norms[i].dim

    def section_bound(self, i: int) -> float:
        """Bound on ``||sigma||`` for ``sigma = pinv(d^i)``.

        If the complex is exact at ``i``, ``x - sigma d x`` is a boundary, so
        ``min_y ||x - d y|| <= ||sigma|| * ||d x||``.
        """
        return op_bound(np.linalg.pinv(self.d[i]), self.norms[i + 1], self.norms[i])

    def scaled(self, t: float) -> "NormedComplex":
        """Norm in degree ``i`` multiplied by ``t**i``."""
        return NormedComplex([n.scaled(t ** i) for i, n in enumerate(self.norms)], list(self.d))

    def to_json(self) -> dict:
        return {"norms": [n.to_json() for n in self.norms], "d": [x.tolist() for x in self.d]}


@dataclass
class AdmissibleSystem:
    """Level-independent complex with restrictions ``res_{c',c} = (c/c')^alpha``."""

    complex: NormedComplex
    grid: list[Fraction]
    alpha: Fraction = Fraction(0)

    def __post_init__(self):
        self.grid = sorted(as_fraction(c) for c in self.grid)
        self.alpha = as_fraction(self.alpha)
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")

    def complex_at(self, c) -> NormedComplex:
        if as_fraction(c) not in self.grid:
            raise GridMismatch(f"level {c} not on the grid")
        return self.complex

    def res(self, cp, c) -> float:
        cp, c = as_fraction(cp), as_fraction(c)
        if c > cp:
            raise GridMismatch("restriction goes from a larger level to a smaller one")
        return float(c / cp) ** float(self.alpha)

    def admissibility(self) -> float:
        """Largest operator bound among the differentials (restrictions are <= 1)."""
        C = self.complex
        return max((op_bound(x, C.norms[i], C.norms[i + 1]) for i, x in enumerate(C.d)), default=0.0)


def admissible_scale(C: NormedComplex) -> tuple[NormedComplex, float]:
    """Rescale norms by ``t**i`` so every differential becomes norm-nonincreasing."""
    worst = max((op_bound(x, C.norms[i], C.norms[i + 1]) for i, x in enumerate(C.d)), default=0.0)
    t = 1.0 / max(1.0, worst)
    return C.scaled(t), t


# ---------------------------------------------------------------- exactness

@dataclass
class ExactnessReport:
    k: float
    m: int
    rows: list[dict] = field(default_factory=list)

    @property
    def violations(self) -> int:
        return sum(not r["ok"] for r in self.rows)

    @property
    def worst_ratio(self) -> float:
        return max((r["ratio"] for r in self.rows), default=0.0)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    @property
    def note(self) -> str:
        return NO_VIOLATION if self.passed else f"{self.violations} violation(s)"


def _probe_vectors(C: NormedComplex, i: int, probes: int, rng: np.random.Generator) -> list[np.ndarray]:
    n = C.norms[i].dim
    if n == 0:
        return [np.zeros(0)]
    out = [np.eye(n)[j] for j in range(n)]
    K = _nullspace(C.d[i]) if i < C.length else np.eye(n)
    while len(out) < max(probes, n):
        if K.shape[1] and len(out) % 3 == 0:
            out.append(K @ rng.normal(size=K.shape[1]))
        else:
            out.append(rng.integers(-3, 4, size=n).astype(float) + rng.normal(size=n) * (len(out) % 2))
    return out


def exactness_defect(C: NormedComplex, i: int, x, scale: float) -> tuple[float, float, np.ndarray]:
    """``(min_y ||scale*x - d y||, ||d x||, y)`` in degree ``i``."""
    x = np.asarray(x, float)
    lhs, y, _ = C.norms[i].dist(scale * x, C.incoming(i))
    rhs = C.norms[i + 1](C.d[i] @ x) if i < C.length else 0.0
    return lhs, rhs, y


def check_k_exact(sys: AdmissibleSystem, k, m: int, c0=None, probes: int = 12, seed: int = 0,
                  level_ratio=None, vectors: dict[int, Sequence] | None = None) -> ExactnessReport:
    """Probe ``||res_{kc,c}(x) - d y|| <= k ||d x||`` in degrees ``<= m``.

    ``level_ratio`` (default ``k``) fixes which levels are compared; keeping it
    fixed while raising ``k`` makes the check monotone in ``k``.
    """
    kk = float(k)
    ratio = as_fraction(level_ratio if level_ratio is not None else k)
    c0 = sys.grid[0] if c0 is None else as_fraction(c0)
    levels = [c for c in sys.grid if c >= c0 and c * ratio in sys.grid]
    if not levels:
        raise GridMismatch(f"no level c >= {c0} with {ratio}*c on the grid {sys.grid}")
    C = sys.complex
    rng = np.random.default_rng(seed)
    rep = ExactnessReport(kk, m)
    for c in levels:
        s = sys.res(ratio * c, c)
        for i in range(min(m, C.length - 1) + 1):
            xs = vectors[i] if vectors and i in vectors else _probe_vectors(C, i, probes, rng)
            for x in xs:
                lhs, dx, _ = exactness_defect(C, i, x, s)
                rhs = kk * dx
                tol = TOL * max(1.0, C.norms[i](x))
                ok = lhs <= rhs + tol
                ratio_obs = lhs / dx if dx > TOL else (0.0 if lhs <= tol else math.inf)
                rep.rows.append({"c": c, "degree": i, "lhs": lhs, "rhs": rhs, "ratio": ratio_obs, "ok": ok})
    return rep


def certified_constant(C: NormedComplex, m: int, alpha=0) -> float:
    """Smallest ``k`` certified by sections: ``k^(1+alpha) >= max_i ||sigma_i||``.

    Raises ``HypothesisFailure`` if the complex is not exact in degrees ``<= m``.
    """
    worst = 0.0
    for i in range(m + 1):
        if i >= C.length or not C.exact_at(i):
            raise HypothesisFailure(f"complex not exact in degree {i}")
        worst = max(worst, C.section_bound(i))
    return max(1.0, worst ** (1.0 / (1.0 + float(alpha))))


def round_up(x: float, den: int = 16) -> Fraction:
    return Fraction(math.ceil(x * den - 1e-12), den)


# ---------------------------------------------------------------- completion

@dataclass
class LiftResult:
    x: np.ndarray
    norm: float
    bound: float
    calls: int
    residual: float


def complete_exact_lift(y_hat, approx: Callable, solve: Callable, norm0: Callable, norm1: Callable,
                        C: float, eps: float, max_iter: int = 60, tol: float = 0.0) -> LiftResult:
    """Lift ``y_hat`` along ``d`` with ``||x|| <= (C + eps)||y_hat||``.

    ``approx(y, t)`` returns a dense-subgroup cycle within ``t`` of ``y``;
    ``solve(y)`` returns ``x`` with ``d x = y`` and ``||x|| <= C||y||``.  The
    budget ``eps_i = ||y_hat|| eps / (2C) * 2^-i`` sums to ``||y_hat|| eps / (2C)``.
    """
    y_hat = np.asarray(y_hat, float)
    ny = norm1(y_hat)
    if ny == 0:
        return LiftResult(np.zeros_like(np.asarray(solve(np.zeros_like(y_hat)), float)), 0.0, 0.0, 0, 0.0)
    budget = ny * eps / (2 * C)

    def e(i):
        return budget * 2.0 ** -i

    x_hat = None
    partial = np.zeros_like(y_hat)
    calls = 0
    for i in range(max_iter):
        target = y_hat - partial
        yi = np.asarray(approx(target, 0.5 * e(i + 1)), float)
        if norm1(target - yi) > 0.5 * e(i + 1) * (1 + 1e-12):
            raise SolverFailure(f"approximation oracle missed its tolerance at step {i}")
        if i > 0 and norm1(yi) > e(i) * (1 + 1e-12):
            raise SolverFailure(f"correction {i} exceeds its budget")
        xi = np.asarray(solve(yi), float)
        calls += 1
        if norm0(xi) > C * norm1(yi) * (1 + 1e-12) + 1e-300:
            raise SolverFailure(f"lift oracle exceeded C at step {i}")
        x_hat = xi if x_hat is None else x_hat + xi
        partial = partial + yi
        if norm1(y_hat - partial) <= tol:
            break
    return LiftResult(x_hat, norm0(x_hat), (C + eps) * ny, calls, norm1(y_hat - partial))


# ---------------------------------------------------------------- random complexes

def random_invertible(rng: np.random.Generator, n: int, lo: int = -2, hi: int = 2) -> np.ndarray:
    if n == 0:
        return np.zeros((0, 0))
    while True:
        B = rng.integers(lo, hi + 1, size=(n, n)).astype(float)
        if abs(np.linalg.det(B)) >= 0.5:
            return B


def random_exact_complex(rng: np.random.Generator, ranks: Sequence[int], extra: int = 0) -> list[np.ndarray]:
    """Differentials ``d^0..d^m`` exact in degrees ``0..m``; ``ranks[i] = rank d^i``.

    ``dim C^i = ranks[i-1] + ranks[i]`` and the top term gets ``extra`` more dimensions.
    """
    m = len(ranks) - 1
    dims = [(ranks[i - 1] if i else 0) + ranks[i] for i in range(m + 1)] + [ranks[m] + extra]
    Bs = [random_invertible(rng, n) for n in dims]
    ds = []
    for i in range(m + 1):
        E = np.zeros((dims[i + 1], dims[i]))
        lo = ranks[i - 1] if i else 0
        for j in range(ranks[i]):
            E[j, lo + j] = 1.0
        ds.append(Bs[i + 1] @ E @ np.linalg.inv(Bs[i]) if dims[i] and dims[i + 1] else E)
    return ds


def random_complex(rng: np.random.Generator, dims: Sequence[int]) -> list[np.ndarray]:
    """Integer complex with the given dims, each map drawn from the left null space of the previous one."""
    ds = []
    for i in range(len(dims) - 1):
        R = rng.integers(-2, 3, size=(dims[i + 1], dims[i])).astype(float)
        if ds:
            K = _nullspace(ds[-1].T).T  # rows annihilating the previous image
            R = rng.integers(-2, 3, size=(dims[i + 1], K.shape[0])).astype(float) @ K if K.size else np.zeros((dims[i + 1], dims[i]))
        ds.append(R)
    return ds


def K_snake(k: float) -> float:
    return max(k ** 4, k ** 3 + k + 1)


# ---------------------------------------------------------------- snake lemma

@dataclass
class SnakeInstance:
    """``M -> M'`` with ``M' = M (+) Q`` twisted by ``phi``; ``N = M'/M`` carries the quotient norm."""

    m: int
    dM: list[np.ndarray]
    dQ: list[np.ndarray]
    phi: list[np.ndarray]
    A: list[np.ndarray]
    kind: str
    lam: float
    alpha: Fraction
    scale: float = 1.0

    def nM(self, i):
        return self.dM[i].shape[1] if i <= self.m else self.dM[-1].shape[0]

    def nQ(self, i):
        return self.dQ[i].shape[1] if i <= self.m else self.dQ[-1].shape[0]

    def _A(self, i):
        return self.scale ** i * self.A[i]

    def dprime(self) -> list[np.ndarray]:
        return [np.block([[self.dM[i], self.phi[i]], [np.zeros((self.nQ(i + 1), self.nM(i))), self.dQ[i]]])
                for i in range(self.m + 1)]

    def f(self, i) -> np.ndarray:
        return np.vstack([np.eye(self.nM(i)), np.zeros((self.nQ(i), self.nM(i)))])

    def complexes(self) -> tuple[NormedComplex, NormedComplex, NormedComplex]:
        L = self.m + 2
        Mp = NormedComplex([Norm(self._A(i), self.kind) for i in range(L)], self.dprime())
        M = NormedComplex([Norm(self.lam * self._A(i)[:, : self.nM(i)], self.kind) for i in range(L)], self.dM)
        N = NormedComplex([Norm(self._A(i)[:, self.nM(i):], self.kind, self._A(i)[:, : self.nM(i)]) for i in range(L)],
                          self.dQ)
        return M, Mp, N

    def to_json(self) -> dict:
        return {"m": self.m, "kind": self.kind, "lam": self.lam, "alpha": f"{self.alpha.numerator}/{self.alpha.denominator}",
                "scale": self.scale, "dM": [x.tolist() for x in self.dM], "dQ": [x.tolist() for x in self.dQ],
                "phi": [x.tolist() for x in self.phi], "A": [x.tolist() for x in self.A]}


def snake_from_parts(m: int, dM, dQ, psi, A, kind="l1", lam=1.0, alpha=Fraction(0)) -> SnakeInstance:
    """Build the twist ``phi^i = dM^i psi^i - psi^(i+1) dQ^i`` and rescale to admissibility."""
    phi = [dM[i] @ psi[i] - psi[i + 1] @ dQ[i] for i in range(m + 1)]
    inst = SnakeInstance(m, dM, dQ, phi, [np.asarray(a, float) for a in A], kind, float(lam), as_fraction(alpha))
    M, Mp, _ = inst.complexes()
    worst = max([op_bound(x, Mp.norms[i], Mp.norms[i + 1]) for i, x in enumerate(Mp.d)]
                + [op_bound(x, M.norms[i], M.norms[i + 1]) for i, x in enumerate(M.d)] + [1.0])
    inst.scale = 1.0 / worst
    return inst


def random_snake_instance(rng: np.random.Generator, m: int | None = None, max_dim: int = 4) -> SnakeInstance:
    m = int(rng.integers(1, 3)) if m is None else m
    half = max_dim // 2

    def ranks():
        while True:
            r = [int(x) for x in rng.integers(0, half + 1, size=m + 1)]
            dims = [(r[i - 1] if i else 0) + r[i] for i in range(m + 1)]
            if max(dims) <= half:
                return r

    rM, rQ = ranks(), ranks()
    eM, eQ = int(rng.integers(0, 2)) * (rM[-1] < half), int(rng.integers(0, 2)) * (rQ[-1] < half)
    dM = random_exact_complex(rng, rM, eM)
    dQ = random_exact_complex(rng, rQ, eQ)
    L = m + 2
    nM = [dM[i].shape[1] for i in range(m + 1)] + [dM[-1].shape[0]]
    nQ = [dQ[i].shape[1] for i in range(m + 1)] + [dQ[-1].shape[0]]
    psi = [rng.integers(-2, 3, size=(nM[i], nQ[i])).astype(float) for i in range(L)]
    A = [random_invertible(rng, nM[i] + nQ[i]) for i in range(L)]
    kind = ("l1", "linf")[int(rng.integers(0, 2))]
    lam = (1.0, 1.5, 2.0, 4.0)[int(rng.integers(0, 4))]
    alpha = (Fraction(0), Fraction(1, 2), Fraction(1))[int(rng.integers(0, 3))]
    return snake_from_parts(m, dM, dQ, psi, A, kind, lam, alpha)


@dataclass
class SnakeReport:
    k: Fraction
    K: Fraction
    hypotheses: dict
    conclusion: ExactnessReport

    @property
    def violations(self) -> int:
        return self.conclusion.violations


def snake_quotient_check(inst: SnakeInstance, k=None, probes: int = 8, seed: int = 0) -> SnakeReport:
    """Verify the snake hypotheses at ``k`` then probe ``N`` at ``max(k^4, k^3+k+1)`` in degrees ``<= m-1``.

    With ``k=None`` the smallest certified ``k`` (rounded up to 1/16) is used.
    """
    M, Mp, N = inst.complexes()
    m, a = inst.m, inst.alpha
    for C, name in ((M, "M"), (Mp, "M'")):
        if C.dd_zero() > 1e-8:
            raise HypothesisFailure(f"{name} is not a complex")
        if AdmissibleSystem(C, [1]).admissibility() > 1 + 1e-9:
            raise HypothesisFailure(f"{name} is not admissible")
    need = max(certified_constant(M, m, a), certified_constant(Mp, m, a), inst.lam ** (1 / (1 + float(a))))
    k = round_up(need) if k is None else as_fraction(k)
    if float(k) < need * (1 - 1e-12):
        raise HypothesisFailure(f"k={k} below the certified requirement {need:.6g}")
    K = max(k ** 4, k ** 3 + k + 1)
    grid = [Fraction(1), k, K]
    rng = np.random.default_rng(seed)
    # displayed bound ||res x||_M <= k ||f x||_M'
    s = float(1 / k) ** float(a)
    worst = 0.0
    for i in range(m + 2):
        for x in _probe_vectors(M, i, probes, rng):
            fx = Mp.norms[i](inst.f(i) @ x)
            lhs = s * M.norms[i](x)
            if lhs > float(k) * fx + TOL * max(1.0, lhs):
                raise HypothesisFailure(f"res/f bound fails in degree {i}")
            if fx > TOL:
                worst = max(worst, lhs / fx)
    hyp = {"res_f_ratio": worst, "certified_k": need}
    for C, name in ((M, "M"), (Mp, "M'")):
        r = check_k_exact(AdmissibleSystem(C, grid, a), k, m, probes=probes, seed=seed)
        if not r.passed:
            raise HypothesisFailure(f"{name} probe violates <= k exactness")
        hyp[name] = r.worst_ratio
    concl = check_k_exact(AdmissibleSystem(N, grid, a), K, m - 1, probes=probes, seed=seed + 1)
    return SnakeReport(k, K, hyp, concl)


def run_snake_search(accepted: int = 200, seed: int = 0, probes: int = 6, max_tries: int | None = None) -> dict:
    """Random search; rejected instances are not counted, violating ones are serialised."""
    rng = np.random.default_rng(seed)
    acc = rej = 0
    worst = 0.0
    bad = []
    tries = 0
    while acc < accepted and (max_tries is None or tries < max_tries):
        tries += 1
        inst = random_snake_instance(rng)
        try:
            rep = snake_quotient_check(inst, probes=probes, seed=int(rng.integers(2 ** 31)))
        except HypothesisFailure:
            rej += 1
            continue
        acc += 1
        worst = max(worst, rep.conclusion.worst_ratio / float(rep.K))
        if rep.violations:
            bad.append(inst.to_json())
    return {"accepted": acc, "rejected": rej, "violations": len(bad), "worst_ratio_over_K": worst, "instances": bad}


# ---------------------------------------------------------------- key proposition

def K_key(k: float, m: int) -> tuple[float, float]:
    """``(k0, eps)`` for the double-complex criterion.

    ``m = 0`` gives ``(k, 1/(2k))``; each further degree passes to the quotient
    double complex, whose constant is ``max(k^4, k^3+k+1)``.
    """
    if m == 0:
        return k, 1 / (2 * k)
    k0, e = K_key(K_snake(k), m - 1)
    return max(k, k0), min(1 / (2 * k), e)


@dataclass
class DoubleComplexInstance:
    """Rows ``p = 0..m+1`` and columns ``q = 0..m+1``; ``alpha = 0`` so restrictions are identities."""

    m: int
    dims: list[list[int]]
    dv: dict            # (p, q) -> M^{p,q} -> M^{p+1,q}
    dh: dict            # (p, q) -> M^{p,q} -> M^{p,q+1}
    h: list[np.ndarray]  # h^q : M^{0,q+1} -> M^{1,q}
    norms: dict          # (p, q) -> Norm

    @property
    def size(self) -> int:
        return self.m + 2

    def row(self, p: int) -> NormedComplex:
        n = self.size
        return NormedComplex([self.norms[p, q] for q in range(n)], [self.dh[p, q] for q in range(n - 1)])

    def column(self, q: int) -> NormedComplex:
        n = self.size
        return NormedComplex([self.norms[p, q] for p in range(n)], [self.dv[p, q] for p in range(n - 1)])

    def delta(self, q: int) -> np.ndarray:
        """``d^{0,q} + h^q d'^{0,q} + d'^{1,q-1} h^{q-1}``."""
        out = self.dv[0, q] + self.h[q] @ self.dh[0, q]
        if q > 0:
            out = out + self.dh[1, q - 1] @ self.h[q - 1]
        return out

    def commutes(self) -> float:
        err = 0.0
        n = self.size
        for p in range(n - 1):
            for q in range(n - 1):
                err = max(err, float(np.abs(self.dh[p + 1, q] @ self.dv[p, q] - self.dv[p, q + 1] @ self.dh[p, q]).max(initial=0.0)))
        return err

    def to_json(self) -> dict:
        key = lambda t: f"{t[0]},{t[1]}"
        return {"m": self.m, "dims": self.dims,
                "dv": {key(t): v.tolist() for t, v in sorted(self.dv.items())},
                "dh": {key(t): v.tolist() for t, v in sorted(self.dh.items())},
                "h": [x.tolist() for x in self.h],
                "norms": {key(t): v.to_json() for t, v in sorted(self.norms.items())}}


def _cokernel(D: np.ndarray) -> np.ndarray:
    """Rows spanning the annihilator of ``im D``."""
    return _nullspace(D.T).T


def random_double_complex(rng: np.random.Generator, m: int = 1, max_dim: int = 3,
                          eta: float | None = None) -> DoubleComplexInstance:
    """Rows 0 and 1 random; ``d^{0,.} = eta*(d'U + Ud') - (h d' + d' h)``; row 2 is the cokernel."""
    n = m + 2
    n1 = [int(x) for x in rng.integers(1, max_dim + 1, size=n)]
    n0 = [int(rng.integers(1, a + 1)) for a in n1]
    R0, R1 = random_complex(rng, n0), random_complex(rng, n1)
    H = [rng.integers(-2, 3, size=(n1[q], n0[q + 1])).astype(float) for q in range(n - 1)]
    V = [rng.integers(-2, 3, size=(n1[q - 1], n0[q])).astype(float) if q else None for q in range(n)]
    eta = 10.0 ** -rng.uniform(2, 9) if eta is None else eta
    D = []
    for q in range(n):
        g = np.zeros((n1[q], n0[q]))
        if q > 0:
            g += R1[q - 1] @ V[q]
        if q < n - 1:
            g += V[q + 1] @ R0[q]
        hom = (H[q] @ R0[q] if q < n - 1 else 0) + (R1[q - 1] @ H[q - 1] if q > 0 else 0)
        D.append(eta * g - hom)
    dv, dh = {}, {}
    dims = [n0, n1]
    for q in range(n):
        dv[0, q] = D[q]
    for q in range(n - 1):
        dh[0, q], dh[1, q] = R0[q], R1[q]
    if m >= 1:
        P = [_cokernel(D[q]) for q in range(n)]
        n2 = [p.shape[0] for p in P]
        for q in range(n):
            dv[1, q] = P[q]
        for q in range(n - 1):
            dh[2, q] = P[q + 1] @ R1[q] @ np.linalg.pinv(P[q]) if n2[q] and n2[q + 1] else np.zeros((n2[q + 1], n2[q]))
        dims.append(n2)
    kind = ("l1", "linf")[int(rng.integers(0, 2))]
    norms = {(p, q): Norm(random_invertible(rng, dims[p][q]), kind) for p in range(n) for q in range(n)}
    inst = DoubleComplexInstance(m, dims, dv, dh, H, norms)
    # one scalar t per cell, t^(p+q), keeps every square commuting and h's ratio unchanged
    worst = 1.0
    for (p, q), M in dv.items():
        worst = max(worst, op_bound(M, norms[p, q], norms[p + 1, q]))
    for (p, q), M in dh.items():
        worst = max(worst, op_bound(M, norms[p, q], norms[p, q + 1]))
    t = 1.0 / worst
    inst.norms = {(p, q): nm.scaled(t ** (p + q)) for (p, q), nm in norms.items()}
    return inst


def zero_double_complex(m: int = 1) -> DoubleComplexInstance:
    n = m + 2
    z = lambda a, b: np.zeros((a, b))
    dv = {(p, q): z(0, 0) for p in range(n - 1) for q in range(n)}
    dh = {(p, q): z(0, 0) for p in range(n) for q in range(n - 1)}
    return DoubleComplexInstance(m, [[0] * n for _ in range(n)], dv, dh, [z(0, 0)] * (n - 1),
                                 {(p, q): Norm(z(0, 0)) for p in range(n) for q in range(n)})


@dataclass
class KeyReport:
    k: Fraction
    kp: float
    k0: float
    eps: float
    H: float
    K: float
    hypotheses: dict
    conclusion: ExactnessReport
    chain: dict | None = None

    @property
    def violations(self) -> int:
        return self.conclusion.violations + (self.chain["violations"] if self.chain else 0)


def double_complex_check(inst: DoubleComplexInstance, k=None, kp=None, H=None, probes: int = 8,
                         seed: int = 0) -> KeyReport:
    """Verify hypotheses (rows, columns, homotopy) then probe row 0 at ``max(k'^2, 2 k0 H)``."""
    m, n = inst.m, inst.size
    if inst.commutes() > 1e-8:
        raise HypothesisFailure("squares do not commute")
    for p in range(n):
        if inst.row(p).dd_zero() > 1e-8:
            raise HypothesisFailure(f"row {p} is not a complex")
    for q in range(n):
        if inst.column(q).dd_zero() > 1e-8:
            raise HypothesisFailure(f"column {q} is not a complex")
    need = 1.0
    for p in range(m + 2):
        if m >= 1:
            need = max(need, certified_constant(inst.row(p), m - 1))
    for q in range(m + 1):
        need = max(need, certified_constant(inst.column(q), m))
    k = round_up(need) if k is None else as_fraction(k)
    if float(k) < need * (1 - 1e-12):
        raise HypothesisFailure(f"k={k} below the certified requirement {need:.6g}")
    k0, eps = K_key(float(k), m)
    kp = k0 if kp is None else float(kp)
    if kp < k0:
        raise HypothesisFailure("k' below k0")
    Hb = max((op_bound(inst.h[q], inst.norms[0, q + 1], inst.norms[1, q]) for q in range(m + 1)), default=0.0)
    H = (Hb if Hb > 0 else 1.0) if H is None else float(H)
    if Hb > H * (1 + 1e-12):
        raise HypothesisFailure("h exceeds H")
    e_obs = max((op_bound(inst.delta(q), inst.norms[0, q], inst.norms[1, q]) for q in range(m + 1)), default=0.0)
    if e_obs > eps:
        raise HypothesisFailure(f"homotopic map bound {e_obs:.3g} exceeds eps={eps:.3g}")
    hyp = {"certified_k": need, "H_bound": Hb, "eps_observed": e_obs}
    kf = Fraction(k)
    grid = [Fraction(1), kf]
    for p in range(m + 2):
        if m >= 1:
            r = check_k_exact(AdmissibleSystem(inst.row(p), grid), kf, m - 1, probes=probes, seed=seed)
            if not r.passed:
                raise HypothesisFailure(f"row {p} probe violates <= k exactness")
    for q in range(m + 1):
        r = check_k_exact(AdmissibleSystem(inst.column(q), grid), kf, m, probes=probes, seed=seed)
        if not r.passed:
            raise HypothesisFailure(f"column {q} probe violates <= k exactness")
    K = max(kp ** 2, 2 * k0 * H)
    Kf = Fraction(K)
    concl = check_k_exact(AdmissibleSystem(inst.row(0), [Fraction(1), Kf]), Kf, m, probes=probes, seed=seed + 1)
    chain = None
    if m == 0:
        # the base case bound ||x|| <= 2kH ||d'x|| on M^{0,0}
        R = inst.row(0)
        rng = np.random.default_rng(seed + 2)
        bad, worst = 0, 0.0
        for x in _probe_vectors(R, 0, probes, rng):
            lhs, dx = R.norms[0](x), R.norms[1](R.d[0] @ x)
            if lhs > 2 * float(k) * H * dx + TOL * max(1.0, lhs):
                bad += 1
            if dx > TOL:
                worst = max(worst, lhs / dx)
        chain = {"bound": 2 * float(k) * H, "worst_ratio": worst, "violations": bad}
    return KeyReport(kf, kp, k0, eps, H, K, hyp, concl, chain)


def run_key_search(accepted: int = 200, seed: int = 0, m: int | None = None, probes: int = 6,
                   max_tries: int | None = None) -> dict:
    rng = np.random.default_rng(seed)
    acc = rej = 0
    worst = 0.0
    bad = []
    by_m: dict[int, int] = {}
    tries = 0
    while acc < accepted and (max_tries is None or tries < max_tries):
        tries += 1
        mm = int(rng.integers(0, 2)) if m is None else m
        inst = random_double_complex(rng, mm)
        try:
            rep = double_complex_check(inst, probes=probes, seed=int(rng.integers(2 ** 31)))
        except HypothesisFailure:
            rej += 1
            continue
        acc += 1
        by_m[mm] = by_m.get(mm, 0) + 1
        worst = max(worst, rep.conclusion.worst_ratio / rep.K)
        if rep.violations:
            bad.append(inst.to_json())
    return {"accepted": acc, "by_m": dict(sorted(by_m.items())), "rejected": rej, "violations": len(bad),
            "worst_ratio_over_K": worst, "instances": bad}


# ---------------------------------------------------------------- Tinv

@dataclass
class RNormedModule:
    """``V = R^d`` with ``T = r * (signed permutation)``, so ``||T v|| = r ||v||`` exactly."""

    r: Fraction
    perm: tuple[int, ...]
    signs: tuple[int, ...]
    kind: str = "l1"

    def __post_init__(self):
        self.r = make_radius(self.r)
        if sorted(self.perm) != list(range(len(self.perm))) or len(self.signs) != len(self.perm):
            raise ValueError("perm must be a permutation with one sign per slot")
        d = len(self.perm)
        P = np.zeros((d, d))
        for i, (j, s) in enumerate(zip(self.perm, self.signs)):
            P[j, i] = s
        self._T = float(self.r) * P
        self._Tinv = P.T / float(self.r)

    @classmethod
    def identity(cls, r, d: int = 1, kind: str = "l1") -> "RNormedModule":
        return cls(r, tuple(range(d)), (1,) * d, kind)

    @property
    def dim(self) -> int:
        return len(self.perm)

    def norm(self, v) -> float:
        return _vec_norm(np.asarray(v, float), self.kind)

    def T(self, v):
        return self._T @ v

    def Tinv(self, v):
        return self._Tinv @ v

    def scaling_defect(self, vs) -> float:
        return max(abs(self.norm(self.T(v)) - float(self.r) * self.norm(v)) for v in vs)


@dataclass
class MeasureBall:
    """Integer measures ``sum a_{s,n} T^n`` on ``|S| = s``, ``1 <= n <= m``, weight ``rp^n``, norm ``<= c``.

    The ``T^0`` part is divided out, so ``T^{-1}`` shifts down and drops the ``T^1`` coefficient.
    """

    s: int
    m: int
    rp: Fraction
    c: Fraction

    def __post_init__(self):
        self.rp = make_radius(self.rp)
        self.c = as_fraction(self.c)

    def weights(self) -> list[Fraction]:
        return [self.rp ** n for _ in range(self.s) for n in range(1, self.m + 1)]

    def points(self, c=None) -> list[tuple[int, ...]]:
        return list(iter_weighted_box(self.weights(), self.c if c is None else as_fraction(c)))

    def norm(self, x) -> Fraction:
        return sum((abs(a) * w for a, w in zip(x, self.weights())), Fraction(0))

    def shift(self, x: tuple[int, ...]) -> tuple[int, ...]:
        out = []
        for j in range(self.s):
            blk = x[j * self.m:(j + 1) * self.m]
            out.extend(blk[1:] + (0,))
        return tuple(out)

    def zero(self) -> tuple[int, ...]:
        return (0,) * (self.s * self.m)


@dataclass
class TinvResult:
    g: dict
    norm_f: float
    norm_g: float
    bound: float
    max_residual: float
    tail_bound: float


def _table_norm(t: dict, V: RNormedModule) -> float:
    return max((V.norm(v) for v in t.values()), default=0.0)


def tinv_apply(g: dict, V: RNormedModule, ball: MeasureBall) -> dict:
    """``x -> T^{-1} g(x) - g(T^{-1} x)`` on the small ball ``||x|| <= rp*c``."""
    return {x: V.Tinv(g[x]) - g[ball.shift(x)] for x in ball.points(ball.rp * ball.c)}


def tinv_solve(f: dict, V: RNormedModule, ball: MeasureBall, eps: float = 0.0, terms: int | None = None,
               tol: float = 1e-10) -> TinvResult:
    """Solve ``f(x) = T^{-1} g(x) - g(T^{-1} x)`` by ``g(x) = sum_k T^{k+1} f~(T^{-k} x)``.

    ``f~`` extends ``f`` by zero off the small ball.  Shifting ``m`` times kills
    every point, so the remaining sum is ``T^{m+1}(1-T)^{-1} f(0)`` in closed
    form.  With ``terms`` set the series is cut after that many terms instead
    and ``TailBudget`` is raised if the neglected tail may exceed ``tol``.
    """
    small = set(ball.points(ball.rp * ball.c))
    if set(f) != small:
        raise ValueError("f must be tabulated exactly on the ball of radius rp*c")
    f = {x: np.asarray(v, float) for x, v in f.items()}
    nf = _table_norm(f, V)
    r = float(V.r)
    zero = ball.zero()
    d = V.dim
    tail_bound = 0.0
    if terms is None:
        Tp = np.linalg.matrix_power(V._T, ball.m + 1)
        tail = Tp @ np.linalg.solve(np.eye(d) - V._T, f[zero])
        K = ball.m
    else:
        tail_bound = r ** (terms + 1) / (1 - r) * nf
        if tail_bound > tol:
            raise TailBudget(f"tail after {terms} terms may reach {tail_bound:.3g} > {tol}")
        tail = np.zeros(d)
        K = terms
    g = {}
    for x in ball.points():
        acc = np.zeros(d)
        y = x
        Tk = V._T.copy()
        for _ in range(K):
            if y in small:
                acc += Tk @ f[y]
            y = ball.shift(y)
            Tk = V._T @ Tk
        g[x] = acc + tail
    back = tinv_apply(g, V, ball)
    resid = max((V.norm(back[x] - f[x]) for x in small), default=0.0)
    return TinvResult(g, nf, _table_norm(g, V), r / (1 - r) * (1 + eps) * nf, resid, tail_bound)


def tinv_operator_ratio(V: RNormedModule, ball: MeasureBall, trials: int = 50, seed: int = 0) -> float:
    """Largest ``||T^{-1}g(x) - g(T^{-1}x)|| / ||g||`` over random tables ``g``; claim ``<= 1/r + 1``."""
    rng = np.random.default_rng(seed)
    pts = ball.points()
    worst = 0.0
    for _ in range(trials):
        g = {x: rng.normal(size=V.dim) * rng.uniform(0.1, 10) for x in pts}
        ng = _table_norm(g, V)
        worst = max(worst, _table_norm(tinv_apply(g, V, ball), V) / ng)
    return worst
