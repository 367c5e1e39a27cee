import itertools
from fractions import Fraction

import numpy as np
import pytest

from liquidkit.errors import DomainError
from liquidkit.polyhedral import (LatticeMeasure, PolyLattice, cone_facets, digit_set, dot, extreme_rays, hilbert_basis,
                                  hilbert_basis_from_rays, key_constant, key_decompose, mass_identity, parts_within,
                                  reconstructs, same_sign_decompose)


def brute_irreducibles(k, constraints, box):
    pts = {x for x in itertools.product(range(-box, box + 1), repeat=k)
           if any(x) and all(dot(c, x) >= 0 for c in constraints)}
    return {x for x in pts if not any(tuple(a - b for a, b in zip(x, u)) in pts for u in pts if u != x)}


def generated(gens, target, box):
    """Monoid points reachable from ``gens`` inside the box, by closure."""
    reach = {tuple([0] * len(target))}
    frontier = list(reach)
    while frontier:
        nxt = []
        for p in frontier:
            for g in gens:
                q = tuple(a + b for a, b in zip(p, g))
                if max(map(abs, q)) <= box and q not in reach:
                    reach.add(q)
                    nxt.append(q)
        frontier = nxt
    return reach


def test_hilbert_examples():
    assert sorted(hilbert_basis(2, [(1, 0), (0, 1)])) == [(0, 1), (1, 0)]
    assert sorted(hilbert_basis_from_rays([(1, 0), (1, 2)])) == [(1, 0), (1, 1), (1, 2)]
    assert hilbert_basis(1, [(1,)]) == [(1,)]
    assert hilbert_basis(0, []) == []


def test_hilbert_small_2d_cones_against_box_search():
    for u, v in [((1, 0), (1, 5)), ((2, -1), (-1, 3)), ((3, 2), (-2, 5)), ((1, 1), (-4, 1))]:
        box = sum(map(abs, u + v))
        assert set(hilbert_basis_from_rays([u, v])) == brute_irreducibles(2, hilbert_facets(u, v), box)


def hilbert_facets(u, v):
    det = u[0] * v[1] - u[1] * v[0]
    s = 1 if det > 0 else -1
    # inward normals: x . n >= 0 on the cone spanned by u and v
    return [(-s * u[1], s * u[0]), (s * v[1], -s * v[0])]


@pytest.mark.parametrize("rays", [
    [(1, 0, 0), (0, 1, 0), (1, 1, 2)],
    [(1, 0, 1), (0, 1, 1), (-1, 0, 1), (0, -1, 1)],
    [(2, 1, 1), (1, 2, 1), (1, 1, 2)],
])
def test_hilbert_3d_generates_box(rays):
    H = hilbert_basis_from_rays(rays)
    facets = [tuple(int(x) for x in f) for f in cone_facets(rays)]
    box = 2 * max(sum(abs(h[i]) for h in H) for i in range(3))
    box = min(box, 8)
    cone_pts = {x for x in itertools.product(range(-box, box + 1), repeat=3) if all(dot(f, x) >= 0 for f in facets)}
    assert cone_pts <= generated(H, (0, 0, 0), box)
    assert set(H) == brute_irreducibles(3, facets, box)


def test_extreme_rays_of_orthant():
    assert sorted(extreme_rays(3, [(1, 0, 0), (0, 1, 0), (0, 0, 1)])) == [(0, 0, 1), (0, 1, 0), (1, 0, 0)]


def test_poly_lattice():
    L = PolyLattice.l1(2)
    assert L.norm((3, -4)) == 7
    assert PolyLattice.linf(2).norm((3, -4)) == 4
    assert PolyLattice.scalar().is_scalar and not L.is_scalar
    assert L.to_json()["generators"] == [[1, 0], [0, 1]]
    with pytest.raises(DomainError):
        PolyLattice(1, ((1,),), ((1,),))


def check_digit_post(L, N, A, box):
    for x in itertools.product(range(-box, box + 1), repeat=L.rank):
        x0, x1 = same_sign_decompose(x, N, A, L)
        assert x1 in A
        assert tuple(N * a + b for a, b in zip(x0, x1)) == x
        rest = tuple(a - b for a, b in zip(x, x1))
        for g in L.generators:
            u, v = dot(x1, g), dot(rest, g)
            assert (u >= 0 and v >= 0) or (u <= 0 and v <= 0)


def test_digit_set_scalar():
    L = PolyLattice.scalar()
    A = digit_set(L, 2)
    assert {(0,), (1,), (-1,)} <= set(A)
    check_digit_post(L, 2, A, 20)
    assert same_sign_decompose((5,), 2, A, L) == ((2,), (1,))
    assert same_sign_decompose((0,), 2, A, L) == ((0,), (0,))
    assert digit_set(L, 1) == [(0,)]


@pytest.mark.parametrize("L", [PolyLattice.l1(2), PolyLattice.linf(2)], ids=["l1", "linf"])
@pytest.mark.parametrize("N", [2, 3, 4])
def test_digit_set_postcondition_on_box(L, N):
    check_digit_post(L, N, digit_set(L, N), 3 * N)


def measure(rank, coeffs, m=5, rp=Fraction(1, 2), support=("a", "b", "c")):
    return LatticeMeasure(support, m, rp, coeffs, rank)


def test_key_divisible_case():
    L = PolyLattice.l1(2)
    v = (2, -1)
    w = measure(2, {("a", 2): (4 * v[0], 4 * v[1])})
    c = max(w.nu(g) / L.norm(g) for g in L.generators)
    dec = key_decompose(w, 4, L, c)
    assert reconstructs(dec, w)
    assert all(p.coeffs == {("a", 2): v} for p in dec.parts)
    assert all(p.nu(g) == w.nu(g) / 4 for p in dec.parts for g in L.generators)


def test_key_scalar_balancing():
    L = PolyLattice.scalar()
    rng = np.random.default_rng(0)
    for N in (2, 3, 5):
        for _ in range(30):
            coeffs = {(s, n): (int(rng.integers(0, 2)),) for s in "abc" for n in range(1, 6)}
            w = measure(1, coeffs)
            dec = key_decompose(w, N, L)
            assert dec.d == 1 and reconstructs(dec, w)
            sums = [p.nu((1,)) for p in dec.parts]
            assert max(sums) - min(sums) <= 1
            assert parts_within(dec, L, w.nu((1,)), N)


def test_key_random_rank_two():
    rng = np.random.default_rng(1)
    for L in (PolyLattice.l1(2), PolyLattice.linf(2)):
        for N in (2, 4):
            A = digit_set(L, N)
            d = max(Fraction(sum(abs(dot(a, g)) for a in A)) for g in L.generators)
            for _ in range(20):
                coeffs = {(s, n): tuple(int(x) for x in rng.integers(-6, 7, size=2))
                          for s in "abc" for n in range(1, 6) if rng.random() < 0.7}
                w = measure(2, coeffs)
                c = max(w.nu(g) / L.norm(g) for g in L.generators)
                dec = key_decompose(w, N, L, c)
                assert dec.d == d == key_constant(L, A)
                assert reconstructs(dec, w)
                assert mass_identity(dec, w, L, N)
                for p in dec.parts:
                    for g in L.generators:
                        assert p.nu(g) <= (c / N + d) * L.norm(g)


def test_key_rejects_outside_ball_and_rank_zero():
    L = PolyLattice.scalar()
    w = measure(1, {("a", 1): (3,)})
    with pytest.raises(DomainError):
        key_decompose(w, 2, L, Fraction(1))
    L0 = PolyLattice(0, (), ())
    dec = key_decompose(measure(0, {}), 3, L0)
    assert len(dec.parts) == 3 and all(not p.coeffs for p in dec.parts)
    assert digit_set(L0, 3) == [()]
