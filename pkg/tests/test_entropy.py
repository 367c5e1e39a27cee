import math
import random

import mpmath
import pytest

from liquidkit.entropy import (RIBE_CONSTANT, RibeElement, defect_ratio_sup, entropy_defect, entropy_H, nonsplit_witness,
                               ribe_add)
from liquidkit.errors import DomainError, LengthMismatch


def test_defect_examples():
    assert entropy_defect(1.0, 0.0) == 0.0
    assert entropy_defect(0.3, -0.3) == pytest.approx(0.0, abs=1e-15)
    assert entropy_defect(1.0, 1.0) == pytest.approx(2 * math.log(2), rel=1e-15)


def test_defect_is_homogeneous():
    rng = random.Random(0)
    for _ in range(500):
        s, t = rng.uniform(-5, 5), rng.uniform(-5, 5)
        lam = math.exp(rng.uniform(-8, 8))
        assert entropy_defect(lam * s, lam * t) == pytest.approx(lam * entropy_defect(s, t), rel=1e-12, abs=1e-300)


def test_defect_sup_against_high_precision():
    sup, (s, t) = defect_ratio_sup(400, 2000, seed=1)
    assert sup <= 2 * math.log(2) + 1e-9

    # independent maximisation on the slice t = 1 with mpmath
    def ratio(x):
        x = mpmath.mpf(x)
        xl = (lambda a: a * mpmath.log(abs(a)) if a else mpmath.mpf(0))
        return abs(xl(x) + xl(1) - xl(x + 1)) / (abs(x) + 1)

    grid = max(ratio(mpmath.mpf(k) / 1000) for k in range(-1000, 1001))
    assert sup >= float(grid) - 1e-9
    assert float(grid) <= 2 * math.log(2)


def test_entropy_H():
    assert entropy_H([1.0, 0.0, 0.0]) == 0.0
    for n in (1, 2, 7, 1000, 10_000):
        assert entropy_H([1 / n] * n) == pytest.approx(math.log(n), abs=1e-12)
    rng = random.Random(2)
    for _ in range(200):
        x = [rng.uniform(-3, 3) for _ in range(rng.randint(1, 8))]
        a = math.exp(rng.uniform(-4, 4))
        assert entropy_H([a * v for v in x]) == pytest.approx(a * entropy_H(x), rel=1e-10, abs=1e-10)


def test_ribe_arithmetic():
    u = RibeElement((1.0, -2.0), (0.5, 3.0))
    zero = RibeElement((0.0, 0.0), (0.0, 0.0))
    assert ribe_add(u, zero) == u
    assert ribe_add(u, -u).norm() == 0.0
    assert (-u).norm() == pytest.approx(u.norm(), rel=1e-15)
    assert zero.norm() == 0.0
    with pytest.raises(LengthMismatch):
        ribe_add(u, RibeElement((1.0,), (1.0,)))
    with pytest.raises(LengthMismatch):
        RibeElement((1.0,), ())


def test_ribe_quasi_triangle():
    rng = random.Random(3)
    worst = 0.0
    for _ in range(10_000):
        n = rng.randint(1, 5)
        u = RibeElement(tuple(rng.gauss(0, 1) for _ in range(n)), tuple(rng.gauss(0, 1) for _ in range(n)))
        v = RibeElement(tuple(rng.gauss(0, 1) for _ in range(n)), tuple(rng.gauss(0, 1) for _ in range(n)))
        worst = max(worst, ribe_add(u, v).norm() / (u.norm() + v.norm()))
    assert worst <= RIBE_CONSTANT
    assert RIBE_CONSTANT == 1 + 2 * math.log(2)


def test_nonsplit_witness():
    w = nonsplit_witness(0.0, 0.5)
    assert w.n == math.ceil(math.exp(0.5)) and w.defect_lower >= 0.5
    w = nonsplit_witness(5.0, 1.0)
    assert w.n == 404 and w.defect_lower >= 1.0
    assert nonsplit_witness(3.0, 2.0).defect_lower >= nonsplit_witness(3.0, 1.0).defect_lower
    with pytest.raises(DomainError):
        nonsplit_witness(-1.0, 1.0)
