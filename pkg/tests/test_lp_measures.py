import math
import random
from fractions import Fraction

import numpy as np
import pytest

from liquidkit.errors import DomainError
from liquidkit.lp_measures import (JetMeasure, RealJet, TruncatedMeasure, double_null_factorize, estimate_constants,
                                   lp_norm, measure_pushforward, pushforward, quotient_iso_check, std_to_teich_array,
                                   teich_coords, teich_coords_closed, teich_expand, teich_to_std_array,
                                   uniform_witness_ratio)


def log_uniform(rng):
    return math.copysign(10 ** rng.uniform(-6, 2), rng.choice((-1, 1)))


def test_lp_norm():
    assert lp_norm([1, 0, 0], 0.3) == 1
    for k in (2, 5, 17):
        assert lp_norm([1 / k] * k, 0.5) == pytest.approx(k ** 0.5, rel=1e-12)
    assert lp_norm([0.5, -0.25], 1.0) == 0.75
    with pytest.raises(DomainError):
        lp_norm([1.0], 1.5)


def test_teich_expand():
    assert teich_expand(1.0, 4).std == (1.0, 0.0, 0.0, 0.0)
    assert teich_expand(0.0, 3).std == (0.0, 0.0, 0.0)
    x = -0.3
    lx = math.log(0.3)
    assert teich_expand(x, 3).std == pytest.approx((x, x * lx, x * lx * lx / 2), rel=1e-15)
    rng = random.Random(0)
    for _ in range(300):
        a, b = log_uniform(rng), log_uniform(rng)
        lhs = teich_expand(a * b, 4).std
        rhs = (teich_expand(a, 4) * teich_expand(b, 4)).std
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)


def test_teich_coords_low_order_formulas():
    a, b, c = 0.7, -1.3, 2.2
    x1 = b - a * math.log(abs(a))
    x2 = c - x1 * math.log(abs(x1)) - 0.5 * a * math.log(abs(a)) ** 2
    assert teich_coords([a, b]) == pytest.approx([a, x1], rel=1e-14)
    assert teich_coords([a, b, c]) == pytest.approx([a, x1, x2], rel=1e-14)
    assert teich_coords_closed([a, b, c]) == pytest.approx([a, x1, x2], rel=1e-14)


def test_teich_round_trip():
    rng = random.Random(1)
    for _ in range(1000):
        n = rng.randint(1, 5)
        teich = [log_uniform(rng) for _ in range(n)]
        jet = RealJet.from_teich(teich)
        assert teich_coords(jet.std) == pytest.approx(teich, rel=1e-9, abs=1e-9)
    arr = np.array([[log_uniform(rng) for _ in range(4)] for _ in range(200)])
    assert np.allclose(std_to_teich_array(teich_to_std_array(arr)), arr, rtol=1e-9, atol=1e-9)


def test_pushforward_identity_and_one_jet():
    rng = random.Random(2)
    w = JetMeasure({s: RealJet.from_teich([log_uniform(rng) for _ in range(3)]) for s in "abc"}, 0.5)
    same = pushforward(w, lambda s: s)
    for s in "abc":
        assert same.jets[s].teich == pytest.approx(w.jets[s].teich, rel=1e-9)
    for _ in range(200):
        w = JetMeasure({i: RealJet.from_teich([log_uniform(rng)]) for i in range(rng.randint(1, 6))}, rng.uniform(0.1, 1))
        assert pushforward(w, lambda s: 0).norm() <= w.norm() * (1 + 1e-12)


def test_uniform_collapse_closed_form():
    for k in (2, 3, 10, 150):
        w = JetMeasure({i: teich_expand(1 / k, 2) for i in range(k)}, 1.0)
        out = pushforward(w, lambda s: 0).jets[0]
        assert out.std == pytest.approx((1.0, -math.log(k)), rel=1e-12)
        assert out.teich == pytest.approx((1.0, -math.log(k)), rel=1e-12)
        assert uniform_witness_ratio(k) >= 1 + math.log(k) - 1e-6
    assert uniform_witness_ratio(150) > 5


def test_estimate_constants():
    assert estimate_constants("pushforward", 1, 0.5, trials=5000, seed=3)["sup"] <= 1 + 1e-12
    est = estimate_constants("pushforward", 2, 1.0, trials=2000, seed=3)
    assert est["sup"] >= 1 + math.log(64) - 1e-9
    a = estimate_constants("addition", 2, 0.5, trials=2000, seed=4)
    b = estimate_constants("addition", 2, 0.5, trials=2000, seed=4)
    assert a == b and math.isfinite(a["sup"])
    assert set(a) == {"kind", "n", "p", "trials", "sup", "witness"}
    with pytest.raises(DomainError):
        estimate_constants("nonsense", 2, 0.5)


def test_jet_measure_json():
    w = JetMeasure({"s": teich_expand(0.5, 2)}, 0.5)
    js = w.to_json()
    assert js["set"] == ["s"] and js["n"] == 2 and js["teich"] == [[0.5, 0.0]]


def rand_measure(rng, support, m, r):
    coeffs = {(s, n): rng.randint(-3, 3) for s in support for n in range(m + 1) if rng.random() < 0.6}
    return TruncatedMeasure(tuple(support), m, r, coeffs)


def test_measure_pushforward():
    r = Fraction(1, 3)
    w = TruncatedMeasure(("a", "b"), 2, r, {("a", 1): 1, ("b", 1): -1})
    out = measure_pushforward(w, {"a": "x", "b": "x"})
    assert out.coeffs == {} and out.norm() == 0 and w.norm() == 2 * r
    rng = random.Random(5)
    for _ in range(1000):
        w = rand_measure(rng, "abcd", 3, r)
        assert measure_pushforward(w, lambda s: s) == w
        f = {s: rng.choice("xy") for s in "abcd"}
        g = {"x": 0, "y": rng.choice((0, 1))}
        once = measure_pushforward(w, f)
        assert once.norm() <= w.norm()
        assert measure_pushforward(once, g).coeffs == measure_pushforward(w, lambda s: g[f[s]]).coeffs
    with pytest.raises(DomainError):
        TruncatedMeasure(("a",), 2, r, {("a", 0): 1}, reduced=True)


def test_double_null_factorize():
    lam = np.full((4, 6), 0.25)
    rows, cols = double_null_factorize(lam)
    assert rows == pytest.approx([0.5] * 4) and cols == pytest.approx([0.5] * 6)
    a, b = 0.9 ** np.arange(7), 0.5 ** np.arange(5)
    rows, cols = double_null_factorize(np.outer(a, b))
    assert all(a[i] * b[j] <= rows[i] * cols[j] + 1e-15 for i in range(7) for j in range(5))
    rng = np.random.default_rng(6)
    for _ in range(20):
        lam = rng.uniform(1e-6, 1, size=(50, 50)) * np.minimum.outer(0.9 ** np.arange(50), 0.95 ** np.arange(50))
        rows, cols = double_null_factorize(lam)
        assert (lam <= np.outer(rows, cols) * (1 + 1e-12)).all()
        assert all(0 < v <= 1 for v in rows + cols)
        assert rows == sorted(rows, reverse=True) and cols == sorted(cols, reverse=True)
    with pytest.raises(DomainError):
        double_null_factorize([[0.0, 1.0]])


def test_quotient_iso_rows():
    for n in (1, 2):
        rows = quotient_iso_check(2, Fraction(1, 2), Fraction(1, 4), 1, 3, n, samples=100, seed=n)
        assert [row["status"] for row in rows] == ["pass", "pass"]
    with pytest.raises(DomainError):
        quotient_iso_check(2, Fraction(1, 4), Fraction(1, 2), 1, 3)
