"""Global nonnegativity engines.

* :func:`algorithm1` - spherical-cap hierarchy of sos lower bounds for a form
  on the unit sphere.
* :func:`nc_check` / :func:`nc_certify` - optimization-free certificates from
  coefficient signs of ``p(Vx)`` over simplicial cones.
* :func:`local_certificate` - explicit cap identity around a point where
  ``p`` is positive, built from a diagonally dominant Gram matrix.
* :func:`alternating_max` - alternating search for ``h_j`` and sos
  multipliers in disjunctions ``{+-h_j >= 0}``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .conic import ConicProblem, SolverSettings
from .disjunction import (CapDisjunction, SimplicialDisjunction, build_cap_disjunction,
                          cap_polynomial, h_squares, orthant_subdivision)
from .poly import (FLOAT, RATIONAL, LinearMap, Polynomial, _compositions, compose_linear,
                   dehomogenize, monomials, multinomial, norms, sphere_power)
from .sos import (NEG_INF, GramBasis, LinearPolynomial, RegionProof, SosCertificate, SosPart,
                  rational_ldl_squares, solve_region, solve_sos_bound, verify_certificate)

HIERARCHY_VERSION = "disjsos-hierarchy v1"
HIERARCHY_COLUMNS = ("m", "r_m", "L_m", "U_m", "L", "U", "wall_ms")


# -- spherical-cap hierarchy ------------------------------------------------

@dataclass
class LevelRecord:
    m: int
    r_m: int
    L_m: float
    U_m: float
    L: float
    U: float
    wall_ms: float
    statuses: dict = field(default_factory=dict)
    net_level: int = 0


@dataclass
class HierarchyResult:
    levels: list[LevelRecord]
    L: float
    U: float
    x: np.ndarray | None
    converged: bool

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# {HIERARCHY_VERSION}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(HIERARCHY_COLUMNS)
        for r in self.levels:
            w.writerow([r.m, r.r_m, repr(r.L_m), repr(r.U_m), repr(r.L), repr(r.U),
                        f"{r.wall_ms:.3f}"])
        return buf.getvalue()

    @staticmethod
    def read_csv(text: str) -> list[tuple]:
        lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
        rows = list(csv.reader(lines))
        if tuple(rows[0]) != HIERARCHY_COLUMNS:
            raise ValueError(f"unexpected hierarchy header {rows[0]}")
        return [(int(r[0]), int(r[1]), *map(float, r[2:])) for r in rows[1:]]


def _check_form(p: Polynomial):
    if not p.is_homogeneous():
        raise ValueError("input must be a form (homogeneous polynomial)")
    if p.degree % 2:
        raise ValueError(f"form degree must be even, got {p.degree}")


def cap_level_bound(p: Polynomial, caps: CapDisjunction, settings: SolverSettings | None = None,
                    workers: int = 1) -> tuple[float, list[float], list[str]]:
    """Per-cap sos bounds ``max gamma: p - gamma ||x||^d = s_i + cap_i * shat_i``."""
    pf = p.to_float()
    d = p.degree
    normalizer = sphere_power(p.nvars, d // 2, FLOAT)
    polys = caps.polynomials()

    def run(i):
        v, proof = solve_region(pf, [polys[i]], d, normalizer, True, settings)
        return v, proof.status

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            out = list(pool.map(run, range(len(polys))))
    else:
        out = [run(i) for i in range(len(polys))]
    values = [v for v, _ in out]
    statuses = [s for _, s in out]
    return min(values), values, statuses


def algorithm1(p: Polynomial, dprime: int = 2, eps: float = 1e-3, max_m: int = 8,
               levels: Sequence[int] | None = None, settings: SolverSettings | None = None,
               workers: int = 1) -> HierarchyResult:
    """Spherical-cap hierarchy; stops when ``U - L <= eps`` (absolute) or levels run out.

    ``levels`` overrides the default schedule ``1, 2, ..., max_m``.
    """
    _check_form(p)
    d = p.degree
    if dprime < 2 or dprime % 2 or dprime > d:
        raise ValueError(f"dprime must be even in [2, {d}], got {dprime}")
    pf = p.to_float()
    schedule = list(levels) if levels is not None else list(range(1, max_m + 1))
    L, U, xbar = NEG_INF, math.inf, None
    records = []
    converged = False
    for m in schedule:
        t0 = time.perf_counter()
        caps = build_cap_disjunction(p.nvars, m, dprime, verify_samples=2000)
        Lm, _, statuses = cap_level_bound(p, caps, settings, workers)
        vals = pf.evaluate_many(caps.net)
        i = int(np.argmin(vals))
        Um = float(vals[i])
        if Um < U:
            U, xbar = Um, caps.net[i].copy()
        L = max(L, Lm)
        counts: dict[str, int] = {}
        for s in statuses:
            counts[s] = counts.get(s, 0) + 1
        records.append(LevelRecord(m, len(caps), Lm, Um, L, U,
                                   (time.perf_counter() - t0) * 1000, counts, caps.level))
        if U - L <= eps:
            converged = True
            break
    return HierarchyResult(records, L, U, xbar, converged)


# -- coefficient-sign certificates -------------------------------------------

@dataclass
class NcCertificate:
    disjunction: SimplicialDisjunction
    level: int
    transformed: list[Polynomial]
    nonnegative: list[bool]

    @property
    def valid(self) -> bool:
        return all(self.nonnegative)

    def to_json(self) -> dict:
        return {"type": "nc", "level": self.level,
                "disjunction": self.disjunction.to_json(),
                "transformed": [q.to_json() for q in self.transformed],
                "nonnegative": list(self.nonnegative)}

    @classmethod
    def from_json(cls, d) -> "NcCertificate":
        from .disjunction import disjunction_from_json

        if isinstance(d, str):
            d = json.loads(d)
        return cls(disjunction_from_json(d["disjunction"]), d["level"],
                   [Polynomial.from_json(q) for q in d["transformed"]], list(d["nonnegative"]))

    def recheck(self, p: Polynomial) -> bool:
        """Recompute every ``p(V_k x)`` and its coefficient signs."""
        return all(_compose(p, g) == q and _nonneg(q)
                   for g, q in zip(self.disjunction.generators, self.transformed))


@dataclass
class NcFailure:
    level: int
    worst_generator: LinearMap | None
    worst_coefficient: float
    worst_monomial: tuple | None


def nc_check(p: Polynomial, V) -> bool:
    """True iff every coefficient of ``p(Vx)`` is nonnegative."""
    q = _compose(p, V)
    return _nonneg(q)


def _compose(p: Polynomial, V) -> Polynomial:
    if not isinstance(V, LinearMap):
        V = LinearMap(V)
    if V.mode != p.mode:
        return compose_linear(p.to_float(), V.to_float())
    return compose_linear(p, V)


def _nonneg(q: Polynomial) -> bool:
    if q.mode == RATIONAL:
        return all(c >= 0 for _, c in q.items())
    tol = 1e-12 * float(norms(q)[0])
    return all(c >= -tol for _, c in q.items())


def nc_certify(p: Polynomial, max_level: int = 8) -> NcCertificate | NcFailure:
    """First level m whose orthant-times-subdivision family passes ``nc_check`` everywhere.

    Only orthants with a nonnegative last sign are used: for even degree
    ``p(-Vx) = p(Vx)``, so the opposite orthants add nothing.
    """
    _check_form(p)
    n = p.nvars
    worst = NcFailure(max_level, None, math.inf, None)
    for m in range(1, max_level + 1):
        disj = orthant_subdivision(n, m)
        gens = [g for g in disj.generators if _last_sign(g) > 0]
        transformed, flags = [], []
        level_worst = (math.inf, None, None)
        for g in gens:
            q = _compose(p, g)
            ok = _nonneg(q)
            transformed.append(q)
            flags.append(ok)
            if not ok:
                e, c = min(q.items(), key=lambda t: t[1])
                if float(c) < level_worst[0]:
                    level_worst = (float(c), g, e)
        if all(flags):
            return NcCertificate(SimplicialDisjunction(gens), m, transformed, flags)
        worst = NcFailure(m, level_worst[1], level_worst[0], level_worst[2])
    return worst


def _last_sign(g: LinearMap) -> int:
    row = g.rows[-1] if g.mode == RATIONAL else g.array[-1]
    s = sum(row)
    return 1 if s > 0 else -1


# -- local certificates ------------------------------------------------------

def householder(xstar, mode: str) -> LinearMap:
    """Orthogonal symmetric ``U`` with ``U e_1 = x*``."""
    n = len(xstar)
    if mode == RATIONAL:
        x = [Fraction(v) for v in xstar]
        v = [Fraction(int(i == 0)) - x[i] for i in range(n)]
        vv = sum(c * c for c in v)
        if vv == 0:
            return LinearMap([[int(i == j) for j in range(n)] for i in range(n)], RATIONAL)
        return LinearMap([[Fraction(int(i == j)) - 2 * v[i] * v[j] / vv for j in range(n)]
                          for i in range(n)], RATIONAL)
    x = np.asarray(xstar, dtype=float)
    v = np.eye(n)[0] - x
    vv = float(v @ v)
    if vv <= 1e-30:
        return LinearMap(np.eye(n), FLOAT)
    return LinearMap(np.eye(n) - 2 * np.outer(v, v) / vv, FLOAT)


@dataclass
class LocalGram:
    """Data of the dehomogenized construction at ``x* = e_1`` after rotation."""

    t: object
    basis: GramBasis
    gram: list
    linear_squares: list[tuple[object, Polynomial]]
    p0: object


def _g_squares(nvars: int, ks, mode: str) -> list[tuple[object, Polynomial]]:
    """Weighted squares of ``sum_k ||z||^(2k)`` over ``k in ks``."""
    out = []
    one = Fraction(1) if mode == RATIONAL else 1.0
    for k in ks:
        for beta in _compositions(k, nvars):
            w = multinomial(beta)
            out.append((Fraction(w) if mode == RATIONAL else float(w),
                        Polynomial.monomial(beta, one, mode)))
    return out


def local_gram(pt: Polynomial, t=None, degree: int | None = None) -> LocalGram:
    """Gram data for ``pt(z) + t g_d(z) - pt(0)/2`` with ``g_d = sum_k ||z||^(2k)``.

    The Gram part is diagonally dominant for the default ``t``.
    """
    mode = pt.mode
    m = pt.nvars
    d = degree if degree is not None else pt.degree + (pt.degree % 2)
    half = d // 2
    zero = (0,) * m
    p0 = pt.coeff(zero)
    if p0 <= 0:
        raise ValueError("the polynomial must be positive at the expansion point")
    q = pt - Polynomial.constant(m, p0, mode)
    qinf, q1 = norms(q)
    if t is None:
        # n here is the ambient dimension m + 1, which only enlarges t
        t = Fraction(m + 1) / (2 * p0) * qinf * qinf + q1 if mode == RATIONAL else \
            (m + 1) / (2 * p0) * qinf * qinf + q1
    basis = GramBasis.affine(m, half)
    index = {b: i for i, b in enumerate(basis.monomials)}
    k = len(basis)
    zero_v = Fraction(0) if mode == RATIONAL else 0.0
    G = [[zero_v] * k for _ in range(k)]
    lin = [zero_v] * m
    for e, c in q.items():
        deg = sum(e)
        if deg == 1:
            lin[e.index(1)] = c
            continue
        b1, b2 = _split(e, half)
        i, j = index[b1], index[b2]
        if i == j:
            G[i][i] += c
        else:
            G[i][j] += c / 2
            G[j][i] += c / 2
    # t * g_d on the diagonal
    for b, i in index.items():
        if any(b):
            G[i][i] += t * multinomial(b)
    # linear terms move into (p0 / 2m) sum_i (1 + m q_i z_i / p0)^2
    squares = []
    for i in range(m):
        e = tuple(int(j == i) for j in range(m))
        G[index[e]][index[e]] -= m * lin[i] * lin[i] / (2 * p0)
        root = Polynomial(m, {zero: 1, e: m * lin[i] / p0}, mode)
        squares.append((p0 / (2 * m), root))
    return LocalGram(t, basis, G, squares, p0)


def _split(e: tuple[int, ...], half: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Canonical ``e = b1 + b2`` with both parts nonzero and of degree <= half."""
    total = sum(e)
    k1 = (total + 1) // 2
    b1, rem = [], k1
    for a in e:
        take = min(a, rem)
        b1.append(take)
        rem -= take
    b1 = tuple(b1)
    b2 = tuple(a - b for a, b in zip(e, b1))
    if sum(b1) > half or sum(b2) > half:
        raise ValueError(f"monomial {e} exceeds twice the half degree {half}")
    return b1, b2


def is_diagonally_dominant(G) -> bool:
    k = len(G)
    return all(G[i][i] >= sum(abs(G[i][j]) for j in range(k) if j != i) for i in range(k))


def _front_homogenize(f: Polynomial, deg: int) -> Polynomial:
    terms = {(deg - sum(e),) + e: c for e, c in f.items()}
    return Polynomial(f.nvars + 1, terms, f.mode)


def local_certificate(p: Polynomial, xstar, dprime: int | None = None,
                      t=None) -> SosCertificate:
    """Explicit identity certifying ``p >= 0`` on a cap around ``x*``.

    ``dprime = d`` (default) gives
    ``p = (p(x*)/2 (x^T x*)^d - t h_d(x; x*)) + sigma``; smaller even
    ``dprime`` gives
    ``p = (p(x*)/2 (x^T x*)^d' - t h_d'(x; x*)) ((x^T x*)^(d-d') + h_(d-d')(x; x*)) + sigma``.
    Rational input with rational unit ``x*`` yields an exact certificate.
    """
    _check_form(p)
    d = p.degree
    dprime = d if dprime is None else dprime
    if dprime < 2 or dprime % 2 or dprime > d:
        raise ValueError(f"dprime must be even in [2, {d}]")
    mode = p.mode
    if mode == RATIONAL and any(isinstance(v, float) for v in xstar):
        mode = FLOAT
    pm = p if mode == p.mode else p.to_float()
    xs = [Fraction(v) for v in xstar] if mode == RATIONAL else [float(v) for v in xstar]
    n = p.nvars
    U = householder(xs, mode)
    pU = compose_linear(pm, U)
    pt = dehomogenize(pU, 0)
    p_star = pt.coeff((0,) * (n - 1))
    if p_star <= 0:
        raise ValueError(f"p(x*) = {float(p_star)} must be positive")
    lg = local_gram(pt, t, d)
    t_val = lg.t
    A = p_star / 2
    sq = [(w, r) for w, r in lg.linear_squares]
    sq += [(w, r) for w, r in _gram_squares(lg.gram, lg.basis, mode)]
    if dprime < d:
        # sigma_hat = sigma + A (g_d - g_{d-d'}) + t_hat g_{d'-2} g_{d-d'}
        t_hat = t_val + A
        m = n - 1
        sq += [(w * A, r) for w, r in
               _g_squares(m, range((d - dprime) // 2 + 1, d // 2 + 1), mode)]
        for a in range(1, (dprime - 2) // 2 + 1):
            for b in range(1, (d - dprime) // 2 + 1):
                sq += [(w * t_hat, r) for w, r in _g_squares(m, [a + b], mode)]
        t_used = t_hat
    else:
        t_used = t_val
    # homogenize each square root at degree d/2 with x1 in front, then rotate back
    squares = []
    for w, r in sq:
        if w == 0 or r.is_zero():
            continue
        root = compose_linear(_front_homogenize(r, d // 2), U)
        squares.append((w, root))
    base = SosPart(squares=squares)
    lin = Polynomial.linear_form(xs, mode)
    cap = lin ** dprime * A - _h(xs, dprime, mode) * t_used
    if dprime < d:
        mult = SosPart(squares=[(Fraction(1) if mode == RATIONAL else 1.0,
                                 lin ** ((d - dprime) // 2))]
                       + h_squares(xs, d - dprime, mode))
    else:
        mult = SosPart(squares=[(Fraction(1) if mode == RATIONAL else 1.0,
                                 Polynomial.constant(n, 1, mode))])
    region = RegionProof([cap], [mult], base, Fraction(0) if mode == RATIONAL else 0.0,
                         "constructed",
                         {"xstar": [str(v) for v in xs], "dprime": dprime, "t": str(t_used)})
    cert = SosCertificate(pm, [region], None, region.bound, float("nan"), "constructed")
    cert.residual = float(verify_certificate(pm, cert))
    return cert


def _h(xs, d, mode):
    from .disjunction import h_poly

    return h_poly(xs, d, mode)


def _gram_squares(G, basis: GramBasis, mode: str):
    if mode == RATIONAL:
        return rational_ldl_squares(G, basis)
    A = np.array(G, dtype=float)
    lam, vecs = np.linalg.eigh((A + A.T) / 2)
    out = []
    for k in range(len(lam)):
        if lam[k] <= 0:
            continue
        terms = {m: float(c) for m, c in zip(basis.monomials, vecs[:, k]) if c != 0}
        out.append((float(lam[k]), Polynomial(basis.nvars, terms, FLOAT)))
    return out


# -- alternating maximization ------------------------------------------------

class StepInfeasible(RuntimeError):
    pass


@dataclass
class AltMaxResult:
    gamma: float
    certificate: SosCertificate
    h: list[Polynomial]
    history: list[float]
    iterations: int


def _sign_patterns(ell: int) -> list[tuple[int, ...]]:
    import itertools

    return list(itertools.product((1, -1), repeat=ell))


def random_polynomial(nvars: int, degree: int, rng: np.random.Generator) -> Polynomial:
    mons = monomials(nvars, degree, exact=False)
    return Polynomial(nvars, {m: float(rng.uniform(-1, 1)) for m in mons}, FLOAT)


def alternating_max(p: Polynomial, ell: int = 1, dbar: int | None = None,
                    init_degree: int | Sequence[int] = 1, iters: int = 20, seed: int = 0,
                    settings: SolverSettings | None = None, h0: Sequence[Polynomial] | None = None,
                    target: float | None = None, normalizer: str | Polynomial = "ball"
                    ) -> AltMaxResult:
    """Alternate between the sos multipliers (multiplier step) and the ``h_j`` (split step).

    Both steps maximize ``gamma`` in ``p - gamma*N = s_k0 + sum_j eps_kj h_j s_kj``.
    ``normalizer="ball"`` uses ``N = (1 + ||x||^2)^(dbar/2)``, which keeps the
    multiplier step strictly feasible for any ``h``; ``"one"`` uses ``N = 1``.
    Each step admits the previous solution, so the recorded bounds are
    nondecreasing up to solver tolerance.  ``target`` stops early once reached.
    """
    n = p.nvars
    dbar = p.degree if dbar is None else dbar
    if dbar < p.degree:
        raise ValueError("dbar must be at least deg p")
    pf = p.to_float()
    if isinstance(normalizer, Polynomial):
        N = normalizer.to_float()
    elif normalizer == "ball":
        N = (sphere_power(n, 1, FLOAT) + Polynomial.constant(n, 1, FLOAT)) ** (dbar // 2)
    elif normalizer == "one":
        N = Polynomial.constant(n, 1, FLOAT)
    else:
        raise ValueError(f"unknown normalizer {normalizer!r}")
    rng = np.random.default_rng(seed)
    degs = [init_degree] * ell if isinstance(init_degree, int) else list(init_degree)
    if h0 is not None:
        hs = [h.to_float() for h in h0]
        degs = [max(h.degree, 0) for h in hs]
    else:
        hs = [random_polynomial(n, degs[j], rng) for j in range(ell)]
    if any(dq > dbar for dq in degs):
        raise ValueError("every h_j must have degree at most dbar")
    patterns = _sign_patterns(len(hs))
    history: list[float] = []
    best = (NEG_INF, None, list(hs))
    rounds = 0
    for it in range(iters):
        rounds = it + 1
        regions = [[h.scale(eps_j) for eps_j, h in zip(pat, hs)] for pat in patterns]
        g1, cert1 = _step1(pf, regions, dbar, degs, N, settings)
        if not math.isfinite(g1):
            if it == 0:
                raise StepInfeasible("multiplier step infeasible at the initial h; reseed")
            break
        history.append(g1)
        if g1 > best[0]:
            best = (g1, cert1, list(hs))
        if target is not None and g1 >= target:
            break
        mults = [[s.polynomial(n, FLOAT) for s in reg.multipliers] for reg in cert1.regions]
        g2, hs_new, cert2 = _step2(pf, patterns, mults, cert1, dbar, degs, settings, N)
        if not math.isfinite(g2):
            if it == 0:
                raise StepInfeasible("split step infeasible in the first round; reseed")
            break
        history.append(g2)
        if g2 > best[0]:
            best = (g2, cert2, list(hs_new))
        hs = hs_new
        if target is not None and g2 >= target:
            break
    return AltMaxResult(best[0], best[1], best[2], history, rounds)


def _step1(pf, regions, dbar, degs, one, settings):
    n = pf.nvars
    proofs = []
    values = []
    for reg in regions:
        prob = ConicProblem()
        gamma = int(prob.add_free(1)[0])
        lin = LinearPolynomial(n).add_poly(pf, scale=-1.0).add_poly(one, var=gamma)
        blocks = []
        for q, dq in zip(reg, degs):
            basis = GramBasis.affine(n, (dbar - dq) // 2)
            blk = prob.add_psd(len(basis))
            lin.add_gram(blk, basis, multiplier=q)
            blocks.append((blk, basis))
        base_basis = GramBasis.affine(n, dbar // 2)
        bblk = prob.add_psd(len(base_basis))
        lin.add_gram(bblk, base_basis)
        lin.emit_zero(prob)
        prob.set_objective({gamma: 1.0})
        sol = prob.solve(settings)
        if not sol.ok:
            values.append(NEG_INF)
            proofs.append(RegionProof(list(reg), [SosPart() for _ in reg], SosPart(), NEG_INF,
                                      sol.status))
            continue
        x = sol.x
        values.append(float(x[gamma]))
        proofs.append(RegionProof(list(reg), [SosPart(b, blk.matrix(x)) for blk, b in blocks],
                                  SosPart(base_basis, bblk.matrix(x)), float(x[gamma]),
                                  sol.status))
    g = min(values)
    cert = SosCertificate(pf, proofs, one, g, float("nan"), "optimal")
    if math.isfinite(g):
        cert.residual = float(verify_certificate(pf, cert))
    return g, cert


def _step2(pf, patterns, mults, cert1, dbar, degs, settings, one):
    n = pf.nvars
    prob = ConicProblem()
    gamma = int(prob.add_free(1)[0])
    hvars = []
    for dq in degs:
        mons = monomials(n, dq, exact=False)
        hvars.append((mons, prob.add_free(len(mons))))
    base_basis = GramBasis.affine(n, dbar // 2)
    base_blocks = []
    for k, pat in enumerate(patterns):
        lin = LinearPolynomial(n).add_poly(pf, scale=-1.0).add_poly(one, var=gamma)
        for j, eps_j in enumerate(pat):
            mons, idx = hvars[j]
            s = mults[k][j]
            for mon, var in zip(mons, idx):
                for e, c in s.items():
                    ee = tuple(a + b for a, b in zip(mon, e))
                    lin.terms[ee][int(var)] += eps_j * float(c)
        blk = prob.add_psd(len(base_basis))
        lin.add_gram(blk, base_basis)
        lin.emit_zero(prob)
        base_blocks.append(blk)
    prob.set_objective({gamma: 1.0})
    sol = prob.solve(settings)
    if not sol.ok:
        return NEG_INF, None, None
    x = sol.x
    hs = [Polynomial(n, {m: float(x[v]) for m, v in zip(mons, idx)}, FLOAT).prune(1e-12)
          for mons, idx in hvars]
    g = float(x[gamma])
    proofs = []
    for k, pat in enumerate(patterns):
        reg = [h.scale(e) for e, h in zip(pat, hs)]
        proofs.append(RegionProof(reg, cert1.regions[k].multipliers,
                                  SosPart(base_basis, base_blocks[k].matrix(x)), g, sol.status))
    cert = SosCertificate(pf, proofs, one, g, float("nan"), sol.status)
    cert.residual = float(verify_certificate(pf, cert))
    return g, hs, cert
