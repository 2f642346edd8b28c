import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from disjsos.bnb import in_cone, in_hull
from disjsos.disjunction import (SIMPLEX_HULL, SPHERE_CONE, AlgebraicDisjunction,
                                 CapDisjunction, SimplicialDisjunction, bisect_longest_edge,
                                 build_cap_disjunction, cap_cosine, cap_polynomial,
                                 disjunction_from_json, generate_net, h_poly, h_squares,
                                 initial_orthants, initial_regular_simplex, orthant_subdivision,
                                 regular_simplex_vectors, subdivide_simplex, t_param)
from disjsos.poly import FLOAT, RATIONAL, LinearMap, Polynomial, parse

from conftest import unit_vectors


def test_h2_is_projection_gap():
    x = np.array([0.6, 0.8, 0.0])
    h = h_poly(x, 2)
    xs = Polynomial.variables(3, FLOAT)
    lin = xs[0] * 0.6 + xs[1] * 0.8
    expect = xs[0] * xs[0] + xs[1] * xs[1] + xs[2] * xs[2] - lin * lin
    assert max((abs(c) for c in (h - expect).terms.values()), default=0.0) < 1e-12


def test_h_vanishes_at_center():
    x = np.array([1.0, 2.0, 2.0]) / 3
    for d in (2, 4, 6):
        assert abs(h_poly(x, d)(x)) < 1e-12


def test_h_value_by_angle(rng):
    for d in (2, 4, 6):
        X = unit_vectors(rng, 100, 3)
        S = unit_vectors(rng, 100, 3)
        for x, s in zip(X, S):
            c = float(x @ s)
            sn2 = 1 - c * c
            expect = sum(sn2 ** k * c ** (d - 2 * k) for k in range(1, d // 2 + 1))
            assert h_poly(s, d)(x) == pytest.approx(expect, abs=1e-10)


def test_h_rejects_bad_input():
    with pytest.raises(ValueError):
        h_poly([1.0, 0.0], 3)
    with pytest.raises(ValueError):
        h_poly([1.0, 1.0], 2)


@pytest.mark.parametrize("d", [2, 4, 6])
def test_h_squares_expand_exactly(d):
    x = [Fraction(3, 13), Fraction(4, 13), Fraction(12, 13)]
    total = Polynomial.zero(3)
    for w, q in h_squares(x, d):
        total = total + (q * q).scale(w)
    assert total == h_poly(x, d, RATIONAL)


def test_cap_polynomial_examples():
    e1 = [1, 0, 0]
    c = cap_polynomial(e1, 2, 1, RATIONAL)
    assert c == parse("2*x1^2 - x1^2 - x2^2 - x3^2", 3)
    assert cap_polynomial(np.array([0.0, 0.6, 0.8]), 4, 7.0)([0.0, 0.6, 0.8]) == pytest.approx(1)


def test_t_param_values():
    for m in range(1, 20):
        assert t_param(m, 2) == m * m
        assert t_param(m, 4) == Fraction(m ** 4, m * m + 1)


def test_t_param_lower_bound():
    for d in (2, 4, 6, 8):
        for m in range(1, 101):
            assert t_param(m, d) >= Fraction(2 * m * m, d)


@pytest.mark.parametrize("m,dprime", [(1, 2), (2, 2), (3, 4), (2, 6)])
def test_cap_sign_matches_inner_product(m, dprime, rng):
    s = unit_vectors(rng, 1, 3)[0]
    cap = cap_polynomial(s, dprime, float(t_param(m, dprime)))
    X = unit_vectors(rng, 10_000, 3)
    ip = X @ s
    vals = cap.evaluate_many(X)
    far = np.abs(ip - cap_cosine(m)) > 1e-9
    # even powers make the cap symmetric under x -> -x
    inside = np.abs(ip) >= cap_cosine(m)
    assert np.array_equal((vals >= 0)[far], inside[far])


def test_net_small_case():
    net = generate_net(2, 1, antipodal=False)
    ang = np.sort(np.arctan2(net[:, 1], net[:, 0]))
    gaps = np.diff(np.concatenate([ang, [ang[0] + 2 * np.pi]]))
    assert gaps.max() <= np.pi / 2 + 1e-12
    assert np.allclose(np.linalg.norm(net, axis=1), 1, atol=1e-12)


@pytest.mark.parametrize("n,m", [(2, 2), (3, 1), (3, 3), (4, 2)])
def test_net_covers_sphere(n, m):
    cap = build_cap_disjunction(n, m, 2)
    ok, witness = cap.covers(10_000, seed=3)
    assert ok, witness
    assert np.allclose(np.linalg.norm(cap.net, axis=1), 1, atol=1e-12)


def test_cap_disjunction_rejects_non_unit_points():
    with pytest.raises(ValueError):
        CapDisjunction(np.array([[1.0, 1.0]]), 2, 2)


def test_initial_orthants():
    hemi = initial_orthants(2, hemisphere=True)
    assert [g.array.tolist() for g in hemi.generators] == [[[1, 0], [0, 1]], [[-1, 0], [0, 1]]]
    assert len(initial_orthants(3, hemisphere=True)) == 4
    full = initial_orthants(3, hemisphere=False)
    assert len(full) == 8
    assert full.covers(10_000)[0]
    assert initial_orthants(3).covers(10_000, hemisphere=True)[0]


@pytest.mark.parametrize("n", [2, 3, 4, 6])
def test_regular_simplex_geometry(n):
    C = regular_simplex_vectors(n)
    assert np.allclose(np.linalg.norm(C, axis=1), 1, atol=1e-12)
    G = C @ C.T
    off = G[~np.eye(n + 1, dtype=bool)]
    assert np.allclose(off, -1 / n, atol=1e-12)
    disj = initial_regular_simplex(n)
    assert len(disj) == n + 1
    assert disj.covers(10_000)[0]


def test_subdivision_counts():
    I2 = LinearMap([[1, 0], [0, 1]], RATIONAL)
    assert len(subdivide_simplex(I2, 2)) == 2
    I3 = LinearMap([[int(i == j) for j in range(3)] for i in range(3)], RATIONAL)
    assert len(subdivide_simplex(I3, 2)) == 4


@given(st.integers(2, 4), st.integers(1, 4))
def test_subdivision_count_property(n, m):
    V = LinearMap([[int(i == j) for j in range(n)] for i in range(n)], RATIONAL)
    kids = subdivide_simplex(V, m)
    assert len(kids) == m ** (n - 1)
    for k in kids:
        for col in range(n):
            colsum = sum(k.rows[i][col] for i in range(n))
            assert colsum == 1
            assert all((k.rows[i][col] * m).denominator == 1 for i in range(n))


@pytest.mark.parametrize("n,m", [(2, 3), (3, 2), (3, 4), (4, 2)])
def test_subdivision_tiles_parent(n, m):
    parent = LinearMap(np.eye(n))
    kids = SimplicialDisjunction(subdivide_simplex(parent, m), SIMPLEX_HULL)
    assert kids.covers(10_000)[0]


def test_orthant_subdivision_covers_space():
    disj = orthant_subdivision(3, 2)
    assert len(disj) == 8 * 4
    assert disj.covers(10_000)[0]


def test_bisect_simplex_mode():
    plus, minus = bisect_longest_edge(LinearMap(np.eye(2)), SIMPLEX_HULL)
    assert np.allclose(plus.array[:, -1], [0.5, 0.5])
    assert np.allclose(minus.array[:, -1], [0.5, 0.5])


def test_bisect_sphere_mode():
    plus, minus = bisect_longest_edge(LinearMap(np.eye(2)), SPHERE_CONE)
    w = np.array([1.0, 1.0]) / math.sqrt(2)
    assert np.allclose(plus.array[:, -1], w)
    assert np.allclose(minus.array[:, -1], w)


def test_bisect_rejects_antipodal():
    with pytest.raises(ValueError):
        bisect_longest_edge(LinearMap(np.array([[1.0, -1.0], [0.0, 0.0]]) + np.array(
            [[0, 0], [0, 0]])), SPHERE_CONE)


def test_bisect_tie_break_is_lexicographic():
    plus, minus = bisect_longest_edge(LinearMap(np.eye(3)), SIMPLEX_HULL)
    # edges all have length sqrt(2); the first pair (0, 1) is split
    assert np.allclose(plus.array[:, -1], [0.5, 0.5, 0])


@pytest.mark.parametrize("mode", [SPHERE_CONE, SIMPLEX_HULL])
def test_bisection_children_tile_parent(mode, rng):
    if mode == SPHERE_CONE:
        V = LinearMap(unit_vectors(rng, 3, 3).T)
    else:
        V = LinearMap(rng.dirichlet(np.ones(3), size=3).T)
    a, b = bisect_longest_edge(V, mode)
    inside = in_cone if mode == SPHERE_CONE else in_hull
    W = rng.dirichlet(np.ones(3), size=2000)
    for x in W @ V.array.T:
        assert inside(a, x, tol=1e-8) or inside(b, x, tol=1e-8)
    if mode == SPHERE_CONE:
        for child in (a, b):
            assert np.allclose(np.linalg.norm(child.array, axis=0), 1)


def test_algebraic_disjunction_coverage():
    x1x2 = parse("x1*x2", 2)
    assert AlgebraicDisjunction(2, [[x1x2], [-x1x2]]).covers()[0]
    assert not AlgebraicDisjunction(2, [[x1x2]]).covers()[0]


def test_json_round_trips():
    cap = build_cap_disjunction(3, 2, 2)
    again = disjunction_from_json(cap.to_json())
    assert np.allclose(again.net, cap.net) and again.t == cap.t
    simp = orthant_subdivision(2, 2)
    again = disjunction_from_json(simp.to_json())
    assert [g.rows for g in again.generators] == [g.rows for g in simp.generators]
    alg = AlgebraicDisjunction(2, [[parse("x1", 2)], [parse("-x1", 2)]])
    assert disjunction_from_json(alg.to_json()).subsets == alg.subsets


def test_singular_generator_rejected():
    with pytest.raises(ValueError):
        SimplicialDisjunction([LinearMap(np.ones((2, 2)))])
