"""Suite configuration and dispatch."""

from __future__ import annotations

import configparser
import contextlib
import itertools
import math
import os
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import __version__
from .errors import BudgetExceeded, DomainError, GridMismatch, HypothesisFailure, LiquidKitError, TailBudget, UnknownSuite
from .laurent import CAP_ENV, Laurent, as_fraction
from .report import Report

SUITES = ("entropy", "lec7-constants", "stableimage", "qcomplex", "keylemma", "snake", "tinv", "propkey",
          "quotient-iso")

DEFAULTS: dict[str, dict] = {
    "entropy": {"grid": 2000, "samples": 10000, "n_max": 10000, "ribe_samples": 2000},
    "lec7-constants": {"r": Fraction(1, 2), "rp": Fraction(1, 4), "m": 6, "samples": 200, "order": 200,
                       "generators": "1/2:1/2,1/2:3/10,7/10:1/2"},
    "stableimage": {"n": 2, "p": Fraction(1, 2), "trials": 100000, "k": 150, "jets": 200},
    "qcomplex": {"groups": "2,3", "degree": 3, "homotopy_degree": 2, "N": 4},
    "keylemma": {"instances": 200, "N": "2,4,8", "entries": 6, "cones": 300, "ray_bound": 5},
    "snake": {"accepted": 200, "probes": 6},
    "tinv": {"radii": "1/3,1/2", "eps": 0.05, "support": 2, "m": 3, "rp": Fraction(1, 2), "c": 2, "dim": 3,
             "trials": 20},
    "propkey": {"accepted": 200, "probes": 6},
    "quotient-iso": {"S": 2, "r": Fraction(1, 2), "rp": Fraction(1, 4), "c": 1, "m": 4, "samples": 200},
}

RADII = {"r", "rp", "p"}


def _coerce(default, text: str):
    if isinstance(default, bool):
        return text.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, Fraction):
        return Fraction(text.strip())
    if isinstance(default, float):
        return float(text)
    return text.strip()


@dataclass
class SuiteConfig:
    suite: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    out: str | None = None
    cap: int | None = None

    def __post_init__(self):
        if self.suite not in SUITES:
            raise UnknownSuite(self.suite)
        merged = dict(DEFAULTS[self.suite])
        for k, v in self.params.items():
            if k not in merged:
                raise DomainError(f"unknown parameter {k!r} for suite {self.suite}")
            merged[k] = _coerce(merged[k], v) if isinstance(v, str) else v
        self.params = merged
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if self.cap is not None and self.cap <= 0:
            raise DomainError("cap must be positive")
        for k in RADII & set(merged):
            if not 0 < merged[k] < 1:
                raise DomainError(f"{k} must lie in (0, 1)")

    @classmethod
    def from_ini(cls, path: str, suite: str, seed: int | None = None, overrides: dict | None = None,
                 out: str | None = None) -> "SuiteConfig":
        cp = configparser.ConfigParser()
        if not cp.read(path):
            raise DomainError(f"cannot read config {path}")
        params: dict = {}
        cfg_seed, cap = 0, None
        for sec in ("common", suite):
            if cp.has_section(sec):
                for k, v in cp.items(sec):
                    if k == "seed":
                        cfg_seed = int(v)
                    elif k == "cap":
                        cap = int(v)
                    elif k == "out":
                        out = out or v
                    elif sec == suite:
                        params[k] = v
        params.update(overrides or {})
        return cls(suite, params, cfg_seed if seed is None else seed, out, cap)

    def echo(self) -> dict:
        out = {"seed": self.seed}
        if self.cap is not None:
            out["cap"] = self.cap
        out.update(self.params)
        return out


def substream(seed: int, i: int) -> int:
    """Per-row seed derived from the master seed and the row index."""
    return int(np.random.SeedSequence([seed, i]).generate_state(1)[0])


def _fracs(text: str) -> list[Fraction]:
    return [Fraction(t.strip()) for t in str(text).split(",") if t.strip()]


def _ints(text: str) -> list[int]:
    return [int(t) for t in str(text).split(",") if t.strip()]


@contextlib.contextmanager
def _cap(cap: int | None):
    if cap is None:
        yield
        return
    old = os.environ.get(CAP_ENV)
    os.environ[CAP_ENV] = str(cap)
    try:
        yield
    finally:
        if old is None:
            os.environ.pop(CAP_ENV, None)
        else:
            os.environ[CAP_ENV] = old


class _Runner:
    """Wraps each check so ``BudgetExceeded`` becomes a skipped row."""

    def __init__(self, rep: Report, seed: int):
        self.rep, self.seed, self.i = rep, seed, 0

    def next_seed(self) -> int:
        self.i += 1
        return substream(self.seed, self.i)

    def guard(self, name: str, fn: Callable[[], None]) -> None:
        try:
            fn()
        except BudgetExceeded as e:
            self.rep.add(name, "", "", f"budget: {e}", 0, None)


# ---------------------------------------------------------------- suites

def _entropy(P: dict, run: _Runner) -> None:
    from .entropy import RIBE_CONSTANT, RibeElement, defect_ratio_sup, entropy_H, nonsplit_witness, ribe_add

    rep = run.rep

    def defect():
        sup, arg = defect_ratio_sup(P["grid"], P["samples"], run.next_seed())
        bound = 2 * math.log(2)
        rep.add("entropy defect", f"grid={P['grid']} samples={P['samples']}",
                f"sup defect/(|s|+|t|) <= 2 log 2 = {bound!r}", f"{sup!r} at {arg!r}", 1e-9, sup <= bound + 1e-9)

    def uniform():
        ns = sorted({1, 2, 3, 10, 100, 1000, P["n_max"]} | set(range(1, 30)))
        err = max(abs(entropy_H([1 / n] * n) - math.log(n)) for n in ns)
        rep.add("H(uniform n)", f"n in {ns[0]}..{ns[-1]} ({len(ns)} values)", "H = log n", f"{err!r}", 1e-12,
                err <= 1e-12)

    def witness():
        for L in (1.0, 5.0, 10.0):
            w = nonsplit_witness(L, 0.5)
            rep.add("nonsplit witness", f"L={L} eps=0.5", "H(z_n) - L >= eps", f"n={w.n} gap={w.defect_lower!r}",
                    0, w.defect_lower >= 0.5 - 1e-12)

    def ribe():
        rng = np.random.default_rng(run.next_seed())
        worst = 0.0
        for _ in range(P["ribe_samples"]):
            n = int(rng.integers(1, 6))
            u = RibeElement(tuple(rng.normal(size=n)), tuple(rng.normal(size=n)))
            v = RibeElement(tuple(rng.normal(size=n)), tuple(rng.normal(size=n)))
            den = u.norm() + v.norm()
            if den:
                worst = max(worst, ribe_add(u, v).norm() / den)
        rep.add("Ribe quasi-triangle", f"samples={P['ribe_samples']}", f"||u+v|| <= {RIBE_CONSTANT!r} (||u||+||v||)",
                f"{worst!r}", 1e-12, worst <= RIBE_CONSTANT + 1e-12)

    for name, fn in (("entropy defect", defect), ("H(uniform n)", uniform), ("nonsplit witness", witness),
                     ("Ribe quasi-triangle", ribe)):
        run.guard(name, fn)


def _lec7(P: dict, run: _Runner) -> None:
    from .laurent import to_text
    from .theta import certificate_holds, construct_generator, theta_eval, verify_lec7_constants

    rep = run.rep

    def special():
        f = Laurent({0: 2, -1: -1})
        iv = theta_eval(f, Fraction(1, 2))
        rep.add("specialisation", "f=2-T^-1 x=1/2", "theta(f) = 0 exactly", f"[{iv.lo}, {iv.hi}]", 0,
                iv.lo == 0 and iv.hi == 0)

    def generators():
        for pair in str(P["generators"]).split(","):
            r, x = (Fraction(t) for t in pair.split(":"))
            cert = construct_generator(x, r, M=P["order"])
            iv = theta_eval(cert.f, x, cert.coeff_bound)
            lhs = Fraction(1, 2) * r ** cert.n / (1 - r)
            ok = certificate_holds(cert) and lhs < 1 and iv.contains(0) and iv.width <= 1e-10
            rep.add("generator", f"r={r} x={x} order={P['order']}", "(1/2) r^n/(1-r) < 1 and 0 in theta(f), width <= 1e-10",
                    f"n={cert.n} lhs={lhs} width={float(iv.width):.3e} lead={to_text(cert.f.truncate(4))}", 1e-10, ok)

    def constants():
        rep.extend(verify_lec7_constants(P["r"], P["rp"], P["m"], P["samples"], run.next_seed()))

    for name, fn in (("specialisation", special), ("generator", generators), ("constants", constants)):
        run.guard(name, fn)


def _stableimage(P: dict, run: _Runner) -> None:
    from .lp_measures import estimate_constants, teich_coords, teich_coords_closed, teich_expand, uniform_witness_ratio

    rep = run.rep
    p = float(P["p"])

    def l1_failure():
        k = P["k"]
        ratio = uniform_witness_ratio(k, 1.0)
        closed = 1 + math.log(k)
        rep.add("l1 pushforward failure", f"n=2 p=1 k={k}", "ratio > 5 and equals 1 + log k",
                f"{ratio!r} vs {closed!r}", 1e-9, ratio > 5 and abs(ratio - closed) <= 1e-9 * closed)

    def sup(kind):
        def go():
            est = estimate_constants(kind, P["n"], p, P["trials"], run.next_seed())
            rep.add(f"{kind} constant", f"n={P['n']} p={P['p']} trials={P['trials']}", "empirical sup finite",
                    f"{est['sup']!r}", 0, math.isfinite(est["sup"]))
        return go

    def teich():
        rng = np.random.default_rng(run.next_seed())
        worst = 0.0
        for _ in range(P["jets"]):
            x = float(rng.normal() * 10 ** rng.uniform(-3, 3))
            std = teich_expand(x, 3).std
            a, b = teich_coords(std), teich_coords_closed(std)
            worst = max(worst, max(abs(u - v) / max(1.0, abs(u)) for u, v in zip(a, b)))
        rep.add("Teichmueller coordinates", f"n=3 samples={P['jets']}", "peeling agrees with the closed form",
                f"{worst!r}", 1e-9, worst <= 1e-9)

    for name, fn in (("l1 pushforward failure", l1_failure), ("pushforward", sup("pushforward")),
                     ("addition", sup("addition")), ("scalar", sup("scalar")), ("Teichmueller", teich)):
        run.guard(name, fn)


def _parse_group(tok: str):
    from .qcomplex import cyclic

    return cyclic(*(int(t) for t in tok.split("x")))


def _qcomplex(P: dict, run: _Runner) -> None:
    from .qcomplex import (Z, filtered_homotopy_N, group_invariants, printed_d2, q_differential, q_homology,
                           QChain, verify_dd_zero, verify_homotopy, verify_homotopy_N, cyclic)

    rep = run.rep
    groups = [t.strip() for t in str(P["groups"]).split(",") if t.strip()]

    def per_group(tok):
        def go():
            G = _parse_group(tok)
            for n in range(2, P["degree"] + 1):
                ok, cnt = verify_dd_zero(G, n)
                rep.add("d d = 0", f"M=Z/{tok} degree={n}", "d_{n-1} d_n = 0", f"{cnt} basis tuples", 0, ok)
            ok, cnt = verify_homotopy(G, P["homotopy_degree"])
            rep.add("h = id homotopy", f"M=Z/{tok} degrees<={P['homotopy_degree']}", "sigma1 - sigma2 = dh + hd",
                    f"{cnt} basis tuples", 0, ok)
            H0 = q_homology(G, 0)
            rep.add("H0", f"M=Z/{tok}", "H0(Q(M)) = M", f"{H0}", 0, H0 == group_invariants(G))
        return go

    def additivity():
        a, b, ab = (q_homology(cyclic(n), 1) for n in (2, 3, 6))
        rep.add("H1 additivity", "Z/2, Z/3, Z/6", "H1(Z/2) + H1(Z/3) = H1(Z/6)",
                f"{a.torsion} + {b.torsion} vs {ab.torsion}", 0, a.direct_sum(b).primary() == ab.primary())

    def d2():
        G = cyclic(5)
        ok = True
        cnt = 0
        for t in itertools.product(range(5), repeat=4):
            m11, m12, m21, m22 = ((x,) for x in t)
            got = q_differential(QChain.basis((m11, m12, m21, m22)), G).terms
            ok &= dict(got) == printed_d2(m11, m12, m21, m22, G)
            cnt += 1
        rep.add("printed d2", f"M=Z/5 ({cnt} tuples)", "recursion d2 = displayed six-term formula", f"{cnt} tuples",
                0, ok)

    def nfold():
        N = P["N"]
        ok, cnt = verify_homotopy_N(cyclic(2), N, 1)
        rep.add("N-fold homotopy", f"M=Z/2 N={N} degrees<=1", "sum - split = d h^N + h^N d", f"{cnt} basis tuples",
                0, ok)
        ok, msg = filtered_homotopy_N(N, Fraction(N), 1)
        rep.add("N-fold filtration", f"M=Z N={N} c={N}", "h^N respects the filtration", msg, 0, ok)

    for tok in groups:
        run.guard(f"group {tok}", per_group(tok))
    for name, fn in (("H1 additivity", additivity), ("printed d2", d2), ("N-fold homotopy", nfold)):
        run.guard(name, fn)


def random_lattice_measure(rng: np.random.Generator, rank: int, entries: int, m: int = 3,
                           rp: Fraction = Fraction(1, 2), support=("a", "b")):
    from .polyhedral import LatticeMeasure

    coeffs = {}
    for s in support:
        for n in range(1, m + 1):
            if rng.random() < 0.7:
                coeffs[(s, n)] = tuple(int(v) for v in rng.integers(-entries, entries + 1, size=rank))
    return LatticeMeasure(tuple(support), m, rp, coeffs, rank)


def hilbert_oracle_2d(r1, r2) -> set:
    """Irreducible lattice points of ``cone(r1, r2)`` by brute force over a box."""
    det = r1[0] * r2[1] - r1[1] * r2[0]
    B = abs(r1[0]) + abs(r2[0]) + abs(r1[1]) + abs(r2[1])

    def inside(x):
        # x = a r1 + b r2 with a, b >= 0
        a = x[0] * r2[1] - x[1] * r2[0]
        b = r1[0] * x[1] - r1[1] * x[0]
        return a * det >= 0 and b * det >= 0

    pts = [x for x in itertools.product(range(-B, B + 1), repeat=2) if x != (0, 0) and inside(x)]
    ps = set(pts)
    out = set()
    for x in pts:
        if not any(u != x and (x[0] - u[0], x[1] - u[1]) in ps for u in pts):
            out.add(x)
    return out


def _keylemma(P: dict, run: _Runner) -> None:
    from .polyhedral import PolyLattice, digit_set, dot, hilbert_basis_from_rays, key_decompose, parts_within, reconstructs

    rep = run.rep
    Ns = _ints(P["N"])
    lattices = [("Z", PolyLattice.scalar()), ("Z^2 l1", PolyLattice.l1(2)), ("Z^2 linf", PolyLattice.linf(2))]

    def instances():
        rng = np.random.default_rng(run.next_seed())
        bad = []
        worst = Fraction(0)
        dcache = {}
        for i in range(P["instances"]):
            name, L = lattices[i % len(lattices)]
            N = Ns[(i // len(lattices)) % len(Ns)]
            w = random_lattice_measure(rng, L.rank, P["entries"])
            c = max((w.nu(g) / L.norm(g) for g in L.generators), default=Fraction(0))
            dec = key_decompose(w, N, L, c)
            if (name, N) not in dcache:
                A = digit_set(L, N)
                dcache[name, N] = Fraction(1) if L.is_scalar else max(
                    Fraction(sum(abs(dot(a, g)) for a in A)) for g in L.generators)
            d = dcache[name, N]
            ok = reconstructs(dec, w) and dec.d == d and parts_within(dec, L, c, N) and (not L.is_scalar or dec.d == 1)
            if not ok:
                bad.append((name, N, i))
            for part in dec.parts:
                for g in L.generators:
                    if c:
                        worst = max(worst, (part.nu(g) / L.norm(g) - c / N) / d)
        rep.add("key decomposition", f"{P['instances']} instances, lattices Z, Z^2 (l1, linf), N in {Ns}",
                "sum of parts = w and every part within c/N + d", f"failures={bad[:5]} worst excess/d={float(worst):.6g}",
                0, not bad)

    def hilbert():
        B = P["ray_bound"]
        prims = sorted({v for v in itertools.product(range(-B, B + 1), repeat=2)
                        if v != (0, 0) and math.gcd(*v) == 1})
        pairs = [(u, v) for u, v in itertools.combinations(prims, 2) if u[0] * v[1] - u[1] * v[0] != 0]
        rng = np.random.default_rng(run.next_seed())
        if P["cones"] and P["cones"] < len(pairs):
            pairs = [pairs[j] for j in sorted(rng.choice(len(pairs), P["cones"], replace=False))]
        bad = [(u, v) for u, v in pairs if set(hilbert_basis_from_rays([u, v])) != hilbert_oracle_2d(u, v)]
        rep.add("Hilbert basis", f"{len(pairs)} 2-D cones, |ray entries| <= {B}", "agrees with brute-force oracle",
                f"mismatches={bad[:3]}", 0, not bad)

    run.guard("key decomposition", instances)
    run.guard("Hilbert basis", hilbert)


def _negative_control(rep: Report, k: Fraction) -> None:
    from .normed import AdmissibleSystem, Norm, NormedComplex, check_k_exact

    # d = 1/(2k^2) on R -> R: x = 1 gives lhs 1 against k * 1/(2k^2), a factor 2k too large
    C = NormedComplex([Norm.standard(1), Norm.standard(1)], [np.array([[float(1 / (2 * k * k))]])])
    r = check_k_exact(AdmissibleSystem(C, [1, k]), k, 0, vectors={0: [np.array([1.0])]})
    rep.add("negative control", f"1-dim system, d=1/(2k^2), k={k}", "violation is reported",
            f"ratio={r.worst_ratio!r} vs k", 0, not r.passed and abs(r.worst_ratio / float(k) - 2 * float(k)) < 1e-9)


def _snake(P: dict, run: _Runner) -> None:
    from .normed import NO_VIOLATION, run_snake_search

    rep = run.rep

    def search():
        res = run_snake_search(P["accepted"], run.next_seed(), P["probes"])
        rep.add("snake lemma", f"accepted={res['accepted']} rejected={res['rejected']} probes={P['probes']}",
                "N is <= max(k^4, k^3+k+1)-exact in degrees <= m-1",
                f"violations={res['violations']} worst ratio/K={res['worst_ratio_over_K']!r}; "
                + (NO_VIOLATION if not res["violations"] else f"instances={res['instances']}"),
                1e-9, res["violations"] == 0 and res["accepted"] >= P["accepted"])

    run.guard("snake lemma", search)
    run.guard("negative control", lambda: _negative_control(rep, Fraction(3)))


def _propkey(P: dict, run: _Runner) -> None:
    from .normed import NO_VIOLATION, run_key_search

    rep = run.rep

    def search():
        res = run_key_search(P["accepted"], run.next_seed(), probes=P["probes"])
        rep.add("double complex criterion", f"accepted={res['accepted']} by m={res['by_m']} rejected={res['rejected']}",
                "row 0 is <= max(k'^2, 2 k0 H)-exact in degrees <= m",
                f"violations={res['violations']} worst ratio/K={res['worst_ratio_over_K']!r}; "
                + (NO_VIOLATION if not res["violations"] else f"instances={res['instances']}"),
                1e-9, res["violations"] == 0 and res["accepted"] >= P["accepted"])

    run.guard("double complex criterion", search)


def _tinv(P: dict, run: _Runner) -> None:
    from .normed import MeasureBall, RNormedModule, tinv_operator_ratio, tinv_solve

    rep = run.rep
    ball_txt = f"|S|={P['support']} m={P['m']} rp={P['rp']} c={P['c']}"

    def one(r):
        def go():
            rng = np.random.default_rng(run.next_seed())
            d = P["dim"]
            perm = tuple(int(v) for v in rng.permutation(d))
            signs = tuple(int(v) for v in rng.choice([-1, 1], size=d))
            V = RNormedModule(r, perm, signs)
            ball = MeasureBall(P["support"], P["m"], P["rp"], P["c"])
            f = {x: rng.normal(size=d) for x in ball.points(ball.rp * ball.c)}
            res = tinv_solve(f, V, ball, P["eps"])
            rep.add("tinv identity", f"r={r} {ball_txt} d={d} points={len(res.g)}", "f = T^-1 g - g(T^-1 .)",
                    f"{res.max_residual!r}", 1e-10, res.max_residual <= 1e-10)
            rep.add("tinv bound", f"r={r} eps={P['eps']}", "||g|| <= r/(1-r) (1+eps) ||f||",
                    f"{res.norm_g!r} <= {res.bound!r}", 0, res.norm_g <= res.bound)
            ratio = tinv_operator_ratio(V, ball, P["trials"], run.next_seed())
            rep.add("tinv operator norm", f"r={r} trials={P['trials']}", f"<= 1/r + 1 = {1 / float(r) + 1!r}",
                    f"{ratio!r}", 1e-12, ratio <= 1 / float(r) + 1 + 1e-12)
            try:
                tinv_solve(f, V, ball, P["eps"], terms=2)
                raised = False
            except TailBudget:
                raised = True
            rep.add("tinv tail budget", f"r={r} terms=2", "TailBudget when truncation is too short",
                    "raised" if raised else "not raised", 0, raised)
        return go

    for r in _fracs(P["radii"]):
        run.guard(f"tinv r={r}", one(r))


def _quotient_iso(P: dict, run: _Runner) -> None:
    from .lp_measures import quotient_iso_check

    def go():
        run.rep.extend(quotient_iso_check(P["S"], P["r"], P["rp"], P["c"], P["m"], 1, P["samples"], run.next_seed()))
        run.rep.extend(quotient_iso_check(P["S"], P["r"], P["rp"], P["c"], P["m"], 2, P["samples"], run.next_seed()))

    run.guard("quotient-iso", go)


DISPATCH = {"entropy": _entropy, "lec7-constants": _lec7, "stableimage": _stableimage, "qcomplex": _qcomplex,
            "keylemma": _keylemma, "snake": _snake, "tinv": _tinv, "propkey": _propkey,
            "quotient-iso": _quotient_iso}


def run_suite(cfg: SuiteConfig) -> Report:
    if cfg.suite not in DISPATCH:
        raise UnknownSuite(cfg.suite)
    rep = Report(cfg.suite, cfg.echo(), version=__version__)
    t0 = time.perf_counter()
    with _cap(cfg.cap):
        DISPATCH[cfg.suite](cfg.params, _Runner(rep, cfg.seed))
    rep.wall_time = time.perf_counter() - t0
    return rep
