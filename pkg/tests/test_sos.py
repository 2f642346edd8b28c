from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from disjsos.bench import classic_form, motzkin_affine, stored_certificates
from disjsos.conic import INFEASIBLE, OPTIMAL, ConicProblem, SolverSettings
from disjsos.poly import FLOAT, RATIONAL, Polynomial, parse, sphere_power
from disjsos.sos import (GramBasis, RegionProof, SosCertificate, SosPart, extract_squares,
                         gram_encode, rational_ldl_squares, solve_sos_bound, sos_feasibility,
                         verify_certificate)


def test_conic_backends_agree_on_small_sdp():
    # max -t s.t. [[t, 1], [1, t]] PSD  ->  t = 1
    vals = []
    for backend in ("clarabel", "scs"):
        prob = ConicProblem()
        blk = prob.add_psd(2)
        t = prob.add_free()[0]
        i00, s00 = blk.entry(0, 0)
        i11, s11 = blk.entry(1, 1)
        i01, s01 = blk.entry(0, 1)
        prob.add_eq({i00: s00, t: -1.0})
        prob.add_eq({i11: s11, t: -1.0})
        prob.add_eq({i01: s01}, 1.0)
        prob.set_objective({t: -1.0})
        sol = prob.solve(SolverSettings(backend=backend, tol=1e-7))
        assert sol.status == OPTIMAL
        vals.append(sol.x[t])
    assert vals == pytest.approx([1.0, 1.0], abs=1e-4)


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        SolverSettings(backend="nope").resolved_backend()


def test_gram_sum_of_squares_feasible():
    sol, G = sos_feasibility(parse("x1^2 + x2^2", 2, FLOAT), GramBasis.for_form(2, 1))
    assert sol.ok
    assert np.allclose(G, np.eye(2), atol=1e-6)


def test_gram_cross_term_infeasible():
    sol, _ = sos_feasibility(parse("x1*x2", 2, FLOAT), GramBasis.for_form(2, 1))
    assert sol.status == INFEASIBLE


def test_motzkin_form_not_sos():
    basis = GramBasis.for_form(3, 3)
    assert len(basis) == 10
    sol, _ = sos_feasibility(classic_form("Motzkin"), basis)
    assert sol.status == INFEASIBLE


def test_gram_encode_degree_checks():
    with pytest.raises(ValueError):
        gram_encode(ConicProblem(), parse("x1^4", 1, FLOAT), GramBasis.for_form(1, 1))
    with pytest.raises(ValueError):
        gram_encode(ConicProblem(), parse("x1^2 + 1", 1, FLOAT), GramBasis.for_form(1, 1))


def test_motzkin_two_piece_bound():
    M = motzkin_affine()
    h = parse("x1*x2", 2)
    gamma, cert = solve_sos_bound(M, [[h], [-h]], dbar=6)
    assert gamma >= -1e-6
    assert verify_certificate(M, cert) <= 1e-6


def test_sos_polynomial_bound_nonnegative():
    p = parse("(x1 - x2)^2 + (x1*x2 - 1)^2", 2)
    gamma, _ = solve_sos_bound(p)
    assert gamma >= -1e-7


def test_quadratic_bound_is_min_eigenvalue(rng):
    A = rng.standard_normal((3, 3))
    Q = A @ A.T + 0.1 * np.eye(3)
    gamma, _ = solve_sos_bound(Polynomial.quadratic_form(Q, FLOAT))
    assert gamma == pytest.approx(np.linalg.eigvalsh(Q)[0], abs=1e-6)


def test_bound_monotone_in_dbar():
    M = motzkin_affine()
    h = parse("x1", 2)
    g6, _ = solve_sos_bound(M, [[h], [-h]], dbar=6)
    g8, _ = solve_sos_bound(M, [[h], [-h]], dbar=8)
    assert g8 >= g6 - 1e-6


def test_infeasible_region_gives_sentinel():
    # a form that is negative somewhere cannot be bounded with N = 0 on R^n
    p = parse("x1^2 - x2^2", 2)
    gamma, cert = solve_sos_bound(p, normalizer=Polynomial.zero(2))
    assert gamma == float("-inf")


def test_extract_squares_identity_and_rank_one():
    basis = GramBasis.for_form(2, 1)
    sq = extract_squares(np.eye(2), basis)
    assert sum((q * q for q in sq), Polynomial.zero(2, FLOAT)).terms == pytest.approx(
        parse("x1^2 + x2^2", 2, FLOAT).terms)
    (q,) = extract_squares(np.ones((2, 2)), basis)
    assert abs(q.coeff((1, 0))) == pytest.approx(1) and q.coeff((1, 0)) == pytest.approx(
        q.coeff((0, 1)))


def test_extract_squares_rejects_indefinite():
    with pytest.raises(ValueError):
        extract_squares(np.diag([1.0, -1.0]), GramBasis.for_form(2, 1))


def test_extract_squares_known_sum():
    p = parse("(1 - x1*x2)^2 + (x1^2*x2 - x1*x2^2)^2", 2, FLOAT)
    basis = GramBasis.affine(2, 3)
    sol, G = sos_feasibility(p, basis)
    sq = extract_squares(G, basis, tol=1e-6)
    back = sum((q * q for q in sq), Polynomial.zero(2, FLOAT))
    diff = (back - p).terms
    assert max(abs(v) for v in diff.values()) <= 1e-6 * (1 + np.abs(G).max())


@st.composite
def psd_matrices(draw, size=4):
    entries = draw(st.lists(st.integers(-3, 3), min_size=size * size, max_size=size * size))
    B = np.array(entries, dtype=float).reshape(size, size)
    return B @ B.T


@given(psd_matrices())
def test_extract_squares_round_trip(G):
    basis = GramBasis.for_form(2, 3)
    back = sum((q * q for q in extract_squares(G, basis)), Polynomial.zero(2, FLOAT))
    target = basis.form(G, FLOAT)
    keys = set(back.terms) | set(target.terms)
    err = max((abs(back.coeff(k) - target.coeff(k)) for k in keys), default=0.0)
    assert err <= 1e-6 * (1 + np.abs(G).max())


@given(st.lists(st.integers(-3, 3), min_size=9, max_size=9))
def test_gram_encode_accepts_its_own_gram(entries):
    B = np.array(entries, dtype=object).reshape(3, 3)
    G = (B @ B.T).tolist()
    G = [[Fraction(v) for v in row] for row in G]
    basis = GramBasis.for_form(3, 1)
    p = basis.form(G, RATIONAL)
    # the exact Gram matrix reproduces p, and the LDL squares match it too
    sq = rational_ldl_squares(G, basis)
    back = Polynomial.zero(3)
    for w, q in sq:
        back = back + (q * q).scale(w)
    assert back == p


def test_stored_identities_verify_exactly():
    for inst, cert in stored_certificates():
        if isinstance(cert, SosCertificate):
            assert verify_certificate(cert.target, cert) == 0, inst.name


def test_corrupted_identity_has_unit_residual():
    inst, cert = stored_certificates()[1]
    region = cert.regions[0]
    bad_base = SosPart(squares=list(region.base.squares) + [(Fraction(1), parse("x1", 2))])
    bad = SosCertificate(cert.target, [RegionProof(region.constraints, region.multipliers,
                                                   bad_base, region.bound, "exact")]
                         + cert.regions[1:], None, cert.bound)
    assert verify_certificate(cert.target, bad) == 1


def test_certificate_json_round_trip():
    M = motzkin_affine()
    h = parse("x1*x2", 2)
    _, cert = solve_sos_bound(M, [[h], [-h]], dbar=6)
    again = SosCertificate.from_json(cert.to_json())
    assert verify_certificate(M, again) == pytest.approx(verify_certificate(M, cert), abs=1e-12)


def test_certificate_implies_sampled_bound(rng):
    M = motzkin_affine()
    h = parse("x1*x2", 2)
    gamma, cert = solve_sos_bound(M, [[h], [-h]], dbar=6)
    assert verify_certificate(M, cert) <= 1e-6
    X = rng.uniform(-2, 2, size=(10_000, 2))
    vals = M.to_float().evaluate_many(X)
    assert np.all(vals >= gamma - 1e-4 * (1 + np.abs(vals)))


def test_sphere_power_normalizer_bound():
    p = sphere_power(3, 2)
    gamma, _ = solve_sos_bound(p)
    assert gamma == pytest.approx(1.0, abs=1e-6)
