import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from disjsos.bench import (classic_form, horn_matrix, motzkin_affine, oracle_grid_min_simplex,
                           oracle_grid_min_sphere)
from disjsos.bnb import (algorithm2, algorithm3, clique_number_bounds, in_cone, in_hull,
                         kkt_residual, nnls_active_set, pgd_simplex, pgd_sphere, phi,
                         project_cone, project_hull, read_node_log, simplex_projection_sort)
from disjsos.disjunction import initial_regular_simplex
from disjsos.poly import FLOAT, LinearMap, Polynomial, parse, sphere_power

from conftest import unit_vectors

vectors = arrays(np.float64, 4, elements=st.floats(-5, 5, allow_nan=False, width=32))


def test_projection_examples():
    I = np.eye(3)
    y = np.array([0.3, -1.0, 2.0])
    assert np.allclose(project_cone(I, y), [0.3, 0.0, 2.0])
    assert np.allclose(project_cone(I, -np.ones(3)), 0)
    inside = np.array([0.2, 0.5, 0.1])
    assert np.allclose(project_cone(I, inside), inside)


@given(vectors)
def test_hull_projection_matches_sorting_oracle(y):
    z = project_hull(np.eye(4), y)
    assert np.allclose(z, simplex_projection_sort(y), atol=1e-9)


@given(vectors, st.integers(0, 10_000))
def test_projection_kkt(y, seed):
    V = np.random.default_rng(seed).uniform(-1, 1, (4, 4)) + 2 * np.eye(4)
    for simplex in (False, True):
        z = nnls_active_set(V, y, simplex)
        assert kkt_residual(V, y, z, simplex) <= 1e-9


def test_pgd_sphere_fixed_point():
    p = sphere_power(2, 1, FLOAT)
    x0 = np.array([0.6, 0.8])
    assert np.allclose(pgd_sphere(p, np.eye(2), x0, K=5), x0)


def test_pgd_sphere_moves_downhill():
    p = parse("x1^2 + 2*x2^2", 2, FLOAT)
    x = pgd_sphere(p, np.eye(2), np.array([0.0, 1.0]) + np.array([1e-3, 0]), K=10, beta=0.1,
                   expand=0)
    assert p(x) < 2.0
    assert x[0] > 1e-3


def test_pgd_sphere_output_feasible(rng):
    p = classic_form("Robinson-1").to_float()
    for _ in range(100):
        V = LinearMap(unit_vectors(rng, 3, 3).T)
        w = V.array @ rng.dirichlet(np.ones(3))
        w /= np.linalg.norm(w)
        x = pgd_sphere(p, V, w, K=3)
        coords = np.linalg.solve(V.array, x)
        assert coords.min() >= -1e-9
        assert abs(np.linalg.norm(x) - 1) <= 1e-9


def test_pgd_simplex_reaches_centroid():
    x = pgd_simplex(np.eye(3), np.eye(3), np.array([1.0, 0, 0]), K=200, beta=0.1, expand=0,
                    halvings=0)
    assert np.allclose(x, np.ones(3) / 3, atol=1e-6)


def test_pgd_simplex_eigenvector_is_fixed():
    Q = np.ones((3, 3)) + np.eye(3)
    x0 = np.ones(3) / 3
    assert np.allclose(pgd_simplex(Q, np.eye(3), x0, K=5), x0)


def test_pgd_simplex_feasible(rng):
    for _ in range(100):
        B = rng.standard_normal((4, 4))
        Q = B + B.T
        V = LinearMap(rng.dirichlet(np.ones(4), size=4).T)
        x0 = V.array @ rng.dirichlet(np.ones(4))
        x = pgd_simplex(Q, V, x0, K=5)
        bary = np.linalg.solve(V.array, x)
        assert bary.min() >= -1e-9 and abs(bary.sum() - 1) <= 1e-9


def test_phi_examples(rng):
    A = rng.standard_normal((3, 3))
    Q = A @ A.T
    V = LinearMap(unit_vectors(rng, 3, 3).T)
    assert phi(V, Polynomial.quadratic_form(Q, FLOAT)) >= np.linalg.eigvalsh(Q)[0] - 1e-6
    assert phi(V, sphere_power(3, 2, FLOAT)) == pytest.approx(1.0, abs=1e-6)
    val = phi(LinearMap(np.eye(3)), classic_form("Motzkin"))
    assert -0.1 <= val <= 1e-6


def test_phi_certificate_verifies():
    from disjsos.sos import verify_certificate

    val, cert = phi(LinearMap(np.eye(3)), classic_form("Robinson-1"), with_certificate=True)
    assert verify_certificate(cert.target, cert) <= 1e-6


def test_algorithm2_motzkin():
    res = algorithm2(classic_form("Motzkin"), 1e-4, "orthants")
    assert res.reason == "converged"
    assert res.U - res.L <= 1e-4 * (1 + abs(res.L) + abs(res.U))
    assert res.subregion_count <= 16
    assert res.U == pytest.approx(classic_form("Motzkin").to_float()(res.x), abs=0)


def test_algorithm2_psd_quadratic(rng):
    A = rng.standard_normal((3, 3))
    Q = A @ A.T + 0.5 * np.eye(3)
    res = algorithm2(Polynomial.quadratic_form(Q, FLOAT), 1e-4, "orthants")
    lam = np.linalg.eigvalsh(Q)[0]
    assert res.reason == "converged"
    assert abs(res.L - lam) <= 1e-4 * (1 + 2 * abs(lam))


def test_algorithm2_rejects_odd_forms():
    with pytest.raises(ValueError):
        algorithm2(parse("x1^3", 1), 1e-4)


def _check_sound(res, true_min, tol=1e-6):
    Ls = [row[5] for row in res.log]
    Us = [row[6] for row in res.log]
    assert all(L <= true_min + tol for L in Ls)
    assert all(U >= true_min - tol for U in Us)
    assert all(b >= a - 1e-12 for a, b in zip(Ls, Ls[1:]))
    assert all(b <= a + 1e-12 for a, b in zip(Us, Us[1:]))


@pytest.mark.parametrize("name", ["Motzkin", "Robinson-1", "Choi-Lam-2", "Schmudgen"])
@pytest.mark.parametrize("init", ["orthants", "regular"])
def test_algorithm2_sound_against_grid(name, init):
    p = classic_form(name)
    grid, _ = oracle_grid_min_sphere(p, 1 / 40)
    res = algorithm2(p, 1e-4, init)
    # the grid value is an upper estimate of the true minimum
    _check_sound(res, min(grid, res.U))
    assert res.L <= grid + 1e-6


def test_algorithm2_witness_in_region():
    res = algorithm2(classic_form("Choi-Lam-1"), 1e-4, "regular")
    for leaf in res.leaves:
        assert in_cone(leaf.V, leaf.witness, tol=1e-9)
        assert abs(np.linalg.norm(leaf.witness) - 1) <= 1e-9


@pytest.mark.parametrize("seed", range(20))
def test_algorithm3_sound_against_grid(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    B = rng.uniform(-1, 1, (n, n))
    Q = B + B.T
    oracle = oracle_grid_min_simplex(Q, 1 / 60)
    res = algorithm3(Q, 1e-6, 5)
    assert res.reason == "converged"
    _check_sound(res, res.U)
    assert res.L <= oracle + 1e-6
    # the grid can only overshoot the true minimum by its resolution
    assert res.U <= oracle + 1e-9
    assert oracle - res.U <= 0.05
    for leaf in res.leaves:
        assert in_hull(leaf.V, leaf.witness, tol=1e-9)


def test_algorithm3_identity():
    res = algorithm3(np.eye(4), 1e-6, 5)
    assert res.L == pytest.approx(0.25, abs=1e-6)
    assert res.verdict == "copositive"


def test_algorithm3_horn_verdict():
    res = algorithm3(horn_matrix(), 1e-6, 5)
    assert res.verdict == "copositive"
    assert res.L >= -1e-6


def test_algorithm3_not_copositive():
    Q = np.array([[1.0, -2.0], [-2.0, 1.0]])
    res = algorithm3(Q, 1e-6, 5)
    assert res.verdict == "not_copositive"
    assert res.x @ Q @ res.x < 0


def test_determinism_and_log_round_trip():
    p = classic_form("Robinson-1")
    a = algorithm2(p, 1e-4, "regular", workers=1)
    b = algorithm2(p, 1e-4, "regular", workers=1)
    assert a.deterministic_log() == b.deterministic_log()
    back = read_node_log(a.log_csv())
    assert [r[:-1] for r in back] == a.deterministic_log()
    Q = np.random.default_rng(3).uniform(-1, 1, (4, 4))
    Q = Q + Q.T
    assert algorithm3(Q).deterministic_log() == algorithm3(Q).deterministic_log()


def test_workers_give_same_bounds():
    p = classic_form("Robinson-1")
    a = algorithm2(p, 1e-4, "regular", workers=1)
    b = algorithm2(p, 1e-4, "regular", workers=3)
    assert a.deterministic_log() == b.deterministic_log()


def test_node_cap_is_reported():
    res = algorithm2(classic_form("Robinson-2"), 1e-9, "regular", node_cap=8)
    assert res.reason == "cap"
    assert res.subregion_count >= 8


def test_regular_init_covers_sphere():
    assert initial_regular_simplex(5).covers(10_000)[0]


def test_clique_complete_and_cycle():
    K5 = np.ones((5, 5), int) - np.eye(5, dtype=int)
    lo, hi, _ = clique_number_bounds(K5)
    assert lo == hi == 5
    C5 = np.zeros((5, 5), int)
    for i in range(5):
        C5[i, (i + 1) % 5] = C5[(i + 1) % 5, i] = 1
    lo, hi, _ = clique_number_bounds(C5)
    assert lo == hi == 2


def test_clique_integer_gap_stops_early():
    A = np.ones((6, 6), dtype=int) - np.eye(6, dtype=int)
    A[0, 1] = A[1, 0] = 0
    lo, hi, res = clique_number_bounds(A, int_gap=5)
    assert hi - lo <= 5
    assert res.subregion_count == 1
    lo, hi, _ = clique_number_bounds(A)
    assert lo == hi == 5
