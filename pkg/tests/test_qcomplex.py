import itertools
import json
from fractions import Fraction

import pytest
from sympy import ZZ
from sympy.polys.matrices import DomainMatrix
from sympy.polys.matrices.normalforms import invariant_factors

from liquidkit.errors import BudgetExceeded, DomainError
from liquidkit.qcomplex import (AbelianGroupInvariants, QChain, Z, boundary_matrix, cyclic, d_cube, diagonalize,
                                filtered_check, filtered_homotopy_N, group_invariants, homotopy_N, integer_ball,
                                printed_d2, q_differential, q_homology, q_homotopy, q_sigma, square, verify_cube_agreement,
                                verify_dd_zero, verify_homotopy, verify_homotopy_N)

Z2, Z3 = cyclic(2), cyclic(3)


def test_d1_formula():
    G = cyclic(5)
    for a, b in itertools.product(range(5), repeat=2):
        d = q_differential(QChain.basis(((a,), (b,))), G).terms
        expect = {}
        for t, c in ((((a + b) % 5,),), 1), (((a,),), -1), (((b,),), -1):
            expect[t] = expect.get(t, 0) + c
        assert d == {t: c for t, c in expect.items() if c}
    assert q_differential(QChain.basis(((3,), (0,))), G).terms == {((0,),): -1}


def test_d2_printed_formula():
    G = cyclic(3)
    for t in itertools.product(G.elements(), repeat=4):
        assert q_differential(QChain.basis(t), G).terms == printed_d2(*t, G)


def test_recursion_agrees_with_face_formula():
    for G in (Z2, Z3):
        for n in (1, 2, 3):
            assert verify_cube_agreement(G, n)


def test_sigma_degree_zero():
    G = cyclic(4)
    x = QChain.basis((((1,), (2,)),))
    assert q_sigma("sum", x, G).terms == {((3,),): 1}
    assert q_sigma("split", x).terms == {((1,),): 1, ((2,),): 1}
    # sigma_1 - sigma_2 in degree 0 is d_1 of the unpaired tuple
    assert (q_sigma("sum", x, G) - q_sigma("split", x)) == q_differential(q_homotopy(x), G)
    with pytest.raises(DomainError):
        q_sigma("other", x, G)


@pytest.mark.parametrize("G", [Z2, Z3, cyclic(4), cyclic(2, 2)], ids=["Z2", "Z3", "Z4", "Z2xZ2"])
def test_dd_zero(G):
    for n in (2, 3):
        ok, count = verify_dd_zero(G, n)
        assert ok and count == G.order ** (2**n)


@pytest.mark.parametrize("G", [Z2, Z3], ids=["Z2", "Z3"])
def test_homotopy_identity(G):
    ok, count = verify_homotopy(G, 2)
    assert ok and count == sum(G.order ** (2 * 2**n) for n in range(3))


def _sympy_homology(G, i):
    def factors(n):
        A = boundary_matrix(G, n, d_cube)
        return [int(v) for v in invariant_factors(DomainMatrix([[ZZ(v) for v in row] for row in A],
                                                               (len(A), len(A[0])), ZZ))]
    rank_in = 0 if i == 0 else sum(1 for v in factors(i) if v)
    out = [v for v in factors(i + 1) if v]
    return G.order ** (2**i) - rank_in - len(out), sorted(v for v in out if v > 1)


@pytest.mark.parametrize("n,expected", [(2, (2, 2)), (3, (3, 3)), (6, (6, 6))])
def test_h1_against_sympy_normal_form(n, expected):
    G = cyclic(n)
    free, torsion = _sympy_homology(G, 1)
    assert (free, tuple(torsion)) == (0, expected)
    assert q_homology(G, 1) == AbelianGroupInvariants(0, expected)


@pytest.mark.parametrize("factors", [(2,), (3,), (4,), (2, 2)])
def test_h0_is_the_group(factors):
    G = cyclic(*factors)
    assert q_homology(G, 0) == group_invariants(G)
    free, torsion = _sympy_homology(G, 0)
    assert free == 0 and AbelianGroupInvariants.from_cyclic(0, torsion) == group_invariants(G)


def test_h1_additivity():
    a, b, ab = (q_homology(cyclic(n), 1) for n in (2, 3, 6))
    assert a.direct_sum(b) == ab
    assert a.direct_sum(b).primary() == (2, 2, 3, 3)


def test_invariants_and_diagonal_form():
    assert AbelianGroupInvariants.from_cyclic(1, [4, 6, 2]).torsion == (2, 2, 12)
    assert AbelianGroupInvariants.from_cyclic(0, [2, 2]).elementary_divisors() == [2, 2]
    assert sorted(diagonalize([[2, 4, 4], [-6, 6, 12], [10, -4, -16]])) == [2, 6, 12]
    assert diagonalize([[0, 0], [0, 0]]) == []


def test_homology_cap():
    with pytest.raises(BudgetExceeded):
        q_homology(Z2, 4)


def test_filtered_check():
    ok, _ = filtered_check(Z, abs, integer_ball, 4, 2)
    assert ok
    ok, _ = filtered_check(Z, abs, integer_ball, 0, 2)
    assert ok
    ok, msg = filtered_check(Z, abs, integer_ball, 4, 2, target_scale=Fraction(1, 2))
    assert not ok and "leaves the filtration" in msg


def test_homotopy_N():
    x = QChain.basis((((1,), (0,)),))
    assert homotopy_N(Z2, 2, x) == q_homotopy(x)
    ok, count = verify_homotopy_N(Z2, 4, 1)
    assert ok and count == 2**4 + 2**8
    assert verify_homotopy_N(Z3, 2, 1)[0]
    assert filtered_homotopy_N(4, 8, 1) == (True, "ok")
    assert not filtered_homotopy_N(4, 8, 1, norm=lambda v: 2 * abs(v))[0]
    with pytest.raises(DomainError):
        homotopy_N(Z2, 3, x)


def test_chain_json_and_validation():
    ch = QChain(1, {((0,), (1,)): 2, ((1,), (1,)): 0})
    assert json.loads(json.dumps(ch.to_json())) == {"degree": 1, "terms": [[[[0], [1]], 2]]}
    with pytest.raises(DomainError):
        QChain(2, {((0,), (1,)): 1})
    with pytest.raises(DomainError):
        QChain.zero(1) + QChain.zero(2)
    assert square(Z2).elements()[1] == ((0,), (1,))
