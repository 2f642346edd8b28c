"""Gram-matrix encoding of sum-of-squares constraints and disjunctive sos bounds.

The central object is the region identity

    p - gamma * normalizer = s_0 + sum_j s_j * q_j,

with every ``s`` a sum of squares.  :func:`solve_sos_bound` maximizes
``gamma`` for each region independently and returns the smallest value,
together with an :class:`SosCertificate` that can be re-expanded and checked
by :func:`verify_certificate`.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .conic import INFEASIBLE, ConicProblem, ConicSolution, PsdBlock, SolverSettings
from .poly import FLOAT, RATIONAL, Polynomial, grlex_key, monomials, multinomial, sphere_power

NEG_INF = float("-inf")
CERT_TOL = 1e-6


# -- bases -------------------------------------------------------------------

@dataclass(frozen=True)
class GramBasis:
    """Monomial vector ``z(x)`` of a Gram form ``z^T G z``."""

    monomials: tuple[tuple[int, ...], ...]
    nvars: int
    half_degree: int
    homogeneous: bool = True

    @classmethod
    def for_form(cls, nvars: int, half_degree: int) -> "GramBasis":
        return cls(tuple(monomials(nvars, half_degree, exact=True)), nvars, half_degree, True)

    @classmethod
    def affine(cls, nvars: int, half_degree: int) -> "GramBasis":
        return cls(tuple(monomials(nvars, half_degree, exact=False)), nvars, half_degree, False)

    @classmethod
    def for_target(cls, nvars: int, degree: int, homogeneous: bool) -> "GramBasis":
        half = max(degree, 0) // 2
        return cls.for_form(nvars, half) if homogeneous else cls.affine(nvars, half)

    def __len__(self):
        return len(self.monomials)

    def prune(self, target: Polynomial) -> "GramBasis":
        """Drop monomials whose doubled exponent leaves the per-variable degree box."""
        bounds = target.variable_degree_bounds()
        keep = tuple(b for b in self.monomials
                     if all(lo <= 2 * a <= hi for a, (lo, hi) in zip(b, bounds)))
        return GramBasis(keep, self.nvars, self.half_degree, self.homogeneous)

    def parity_blocks(self) -> list["GramBasis"]:
        """Split by exponent parity; exact when the problem is sign-symmetric in every variable."""
        groups: dict[tuple[int, ...], list] = defaultdict(list)
        for b in self.monomials:
            groups[tuple(a % 2 for a in b)].append(b)
        return [GramBasis(tuple(groups[k]), self.nvars, self.half_degree, self.homogeneous)
                for k in sorted(groups)]

    def form(self, G, mode: str = FLOAT) -> Polynomial:
        """Expand ``z^T G z``."""
        terms: dict = {}
        k = len(self.monomials)
        for i in range(k):
            for j in range(k):
                c = G[i][j]
                if c == 0:
                    continue
                e = tuple(a + b for a, b in zip(self.monomials[i], self.monomials[j]))
                terms[e] = terms.get(e, 0) + (c if mode == RATIONAL else float(c))
        return Polynomial(self.nvars, terms, mode)

    def to_json(self):
        return {"monomials": [list(m) for m in self.monomials], "nvars": self.nvars,
                "half_degree": self.half_degree, "homogeneous": self.homogeneous}

    @classmethod
    def from_json(cls, d):
        return cls(tuple(tuple(m) for m in d["monomials"]), d["nvars"], d["half_degree"],
                   d.get("homogeneous", True))


# -- sos parts and certificates ---------------------------------------------

@dataclass
class SosPart:
    """An sos polynomial given either as a Gram matrix or as weighted squares."""

    basis: GramBasis | None = None
    gram: object = None
    squares: list[tuple[object, Polynomial]] | None = None

    @classmethod
    def from_squares(cls, squares: Sequence) -> "SosPart":
        out = []
        for item in squares:
            if isinstance(item, Polynomial):
                item = (1, item)
            out.append((item[0], item[1]))
        return cls(squares=out)

    @property
    def mode(self) -> str:
        if self.squares is not None:
            return self.squares[0][1].mode if self.squares else RATIONAL
        return RATIONAL if _is_rational_matrix(self.gram) else FLOAT

    def polynomial(self, nvars: int, mode: str | None = None) -> Polynomial:
        mode = mode or self.mode
        total = Polynomial.zero(nvars, mode)
        if self.squares is not None:
            for w, q in self.squares:
                q = q.to_float() if mode == FLOAT else q
                total = total + (q * q).scale(w if mode == RATIONAL else float(w))
            return total
        if self.basis is None or len(self.basis) == 0:
            return total
        G = self.gram if mode == RATIONAL else np.asarray(self.gram, dtype=float)
        return self.basis.form(G, mode)

    def psd_ok(self, tol: float = 1e-8) -> bool:
        if self.squares is not None:
            return all(w >= 0 for w, _ in self.squares)
        if self.basis is None or len(self.basis) == 0:
            return True
        if _is_rational_matrix(self.gram):
            return rational_psd(self.gram)
        G = np.asarray(self.gram, dtype=float)
        if not np.allclose(G, G.T, atol=1e-12 * (1 + np.abs(G).max())):
            return False
        lam = np.linalg.eigvalsh(G)
        return bool(lam.min() >= -tol * (1.0 + np.trace(G)))

    def min_eig(self) -> float:
        if self.squares is not None:
            return float(min((w for w, _ in self.squares), default=0.0))
        if self.basis is None or len(self.basis) == 0:
            return 0.0
        return float(np.linalg.eigvalsh(np.asarray(self.gram, dtype=float)).min())

    def to_json(self):
        if self.squares is not None:
            return {"squares": [{"weight": str(w), "poly": q.to_json()} for w, q in self.squares]}
        if _is_rational_matrix(self.gram):
            gram = [[str(v) for v in row] for row in self.gram]
        else:
            gram = np.asarray(self.gram, dtype=float).tolist() if self.gram is not None else []
        return {"basis": self.basis.to_json() if self.basis else None, "gram": gram}

    @classmethod
    def from_json(cls, d):
        if "squares" in d:
            return cls(squares=[(Fraction(s["weight"]) if s["poly"]["mode"] == RATIONAL
                                 else float(s["weight"]), Polynomial.from_json(s["poly"]))
                                for s in d["squares"]])
        basis = GramBasis.from_json(d["basis"]) if d.get("basis") else None
        gram = d.get("gram") or []
        if gram and isinstance(gram[0][0], str):
            gram = [[Fraction(v) for v in row] for row in gram]
        else:
            gram = np.asarray(gram, dtype=float)
        return cls(basis=basis, gram=gram)


def _is_rational_matrix(G) -> bool:
    if G is None or isinstance(G, np.ndarray):
        return False
    try:
        return isinstance(G[0][0], (Fraction, int))
    except (IndexError, TypeError):
        return False


def rational_psd(G) -> bool:
    """Exact PSD test by symmetric Gaussian elimination with zero-pivot handling."""
    A = [[Fraction(v) for v in row] for row in G]
    n = len(A)
    if any(A[i][j] != A[j][i] for i in range(n) for j in range(i)):
        return False
    active = list(range(n))
    while active:
        k = active[0]
        piv = A[k][k]
        if piv < 0:
            return False
        if piv == 0:
            if any(A[k][j] != 0 for j in active):
                return False
            active.pop(0)
            continue
        rest = active[1:]
        for i in rest:
            f = A[i][k] / piv
            if f:
                for j in rest:
                    A[i][j] -= f * A[k][j]
        active = rest
    return True


def rational_ldl_squares(G, basis: GramBasis) -> list[tuple[Fraction, Polynomial]]:
    """Exact ``G = L D L^T`` turned into weighted squares ``d_i (L_i^T z)^2``."""
    A = [[Fraction(v) for v in row] for row in G]
    n = len(A)
    squares = []
    active = list(range(n))
    while active:
        k = active[0]
        piv = A[k][k]
        if piv == 0:
            if any(A[k][j] != 0 for j in active):
                raise ValueError("Gram matrix is not PSD (zero pivot with nonzero row)")
            active.pop(0)
            continue
        if piv < 0:
            raise ValueError("Gram matrix is not PSD (negative pivot)")
        row = {j: A[k][j] / piv for j in active if A[k][j] != 0}
        terms = {basis.monomials[j]: c for j, c in row.items()}
        squares.append((piv, Polynomial(basis.nvars, terms, RATIONAL)))
        rest = active[1:]
        for i in rest:
            f = A[i][k] / piv
            if f:
                for j in rest:
                    A[i][j] -= f * A[k][j]
        active = rest
    return squares


@dataclass
class RegionProof:
    """One region identity ``p - bound*normalizer = base + sum_j multipliers[j]*constraints[j]``."""

    constraints: list[Polynomial]
    multipliers: list[SosPart]
    base: SosPart
    bound: object
    status: str = "optimal"
    descriptor: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "descriptor": self.descriptor,
            "constraints": [q.to_json() for q in self.constraints],
            "multipliers": [s.to_json() for s in self.multipliers],
            "base": self.base.to_json(),
            "bound": _num_json(self.bound),
            "status": self.status,
        }

    @classmethod
    def from_json(cls, d):
        return cls([Polynomial.from_json(q) for q in d["constraints"]],
                   [SosPart.from_json(s) for s in d["multipliers"]],
                   SosPart.from_json(d["base"]), _num_from_json(d["bound"]),
                   d.get("status", "optimal"), d.get("descriptor", {}))


def _num_json(v):
    if isinstance(v, Fraction):
        return str(v)
    v = float(v)
    if math.isinf(v):
        return "-inf" if v < 0 else "inf"
    return v


def _num_from_json(v):
    if isinstance(v, str):
        if v in ("-inf", "inf"):
            return float(v)
        return Fraction(v)
    return float(v)


@dataclass
class SosCertificate:
    target: Polynomial
    regions: list[RegionProof]
    normalizer: Polynomial | None = None
    bound: object = 0
    residual: float = float("nan")
    solver_status: str = "optimal"

    def to_json(self) -> dict:
        return {
            "target": self.target.to_json(),
            "normalizer": self.normalizer.to_json() if self.normalizer is not None else None,
            "bound": _num_json(self.bound),
            "residual": _num_json(self.residual) if not math.isnan(self.residual) else None,
            "solver_status": self.solver_status,
            "regions": [r.to_json() for r in self.regions],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)

    @classmethod
    def from_json(cls, d) -> "SosCertificate":
        if isinstance(d, str):
            d = json.loads(d)
        res = d.get("residual")
        return cls(Polynomial.from_json(d["target"]),
                   [RegionProof.from_json(r) for r in d["regions"]],
                   Polynomial.from_json(d["normalizer"]) if d.get("normalizer") else None,
                   _num_from_json(d["bound"]),
                   float("nan") if res is None else float(_num_from_json(res)),
                   d.get("solver_status", "optimal"))


def region_defect(p: Polynomial, region: RegionProof, normalizer: Polynomial | None,
                  bound=None) -> Polynomial:
    """``p - bound*normalizer - base - sum s_j q_j`` in the certificate's scalar mode."""
    modes = {p.mode, region.base.mode}
    modes.update(s.mode for s in region.multipliers)
    modes.update(q.mode for q in region.constraints)
    b = region.bound if bound is None else bound
    if isinstance(b, float):
        modes.add(FLOAT)
    mode = RATIONAL if modes == {RATIONAL} else FLOAT
    conv = (lambda q: q) if mode == RATIONAL else (lambda q: q.to_float())
    n = p.nvars
    defect = conv(p)
    if normalizer is not None and b != 0:
        defect = defect - conv(normalizer).scale(b if mode == RATIONAL else float(b))
    defect = defect - region.base.polynomial(n, mode)
    if len(region.multipliers) != len(region.constraints):
        raise ValueError("each region constraint needs exactly one multiplier")
    for s, q in zip(region.multipliers, region.constraints):
        if q.nvars != n:
            raise ValueError(f"region polynomial has {q.nvars} variables, expected {n}")
        defect = defect - s.polynomial(n, mode) * conv(q)
    return defect


def verify_certificate(p: Polynomial, cert: SosCertificate, psd_tol: float = 1e-8) -> float:
    """Max coefficientwise defect over all region identities.

    Returns ``inf`` when a multiplier fails the PSD check.  Regions carrying the
    ``-inf`` sentinel bound are skipped (they certify nothing).
    """
    worst = 0.0 if p.mode == FLOAT else Fraction(0)
    for region in cert.regions:
        if isinstance(region.bound, float) and math.isinf(region.bound):
            continue
        parts = [region.base, *region.multipliers]
        if not all(s.psd_ok(psd_tol) for s in parts):
            return math.inf
        defect = region_defect(p, region, cert.normalizer)
        for _, c in defect.items():
            if abs(c) > worst:
                worst = abs(c)
    return worst if isinstance(worst, Fraction) else float(worst)


# -- identity assembly -------------------------------------------------------

class LinearPolynomial:
    """Polynomial whose coefficients are affine in conic variables.

    ``terms[exp]`` maps variable index to coefficient; key ``None`` holds the
    constant part.
    """

    def __init__(self, nvars: int):
        self.nvars = nvars
        self.terms: dict[tuple[int, ...], dict] = defaultdict(lambda: defaultdict(float))

    def add_poly(self, poly: Polynomial, var: int | None = None, scale: float = 1.0):
        for e, c in poly.items():
            self.terms[e][var] += scale * float(c)
        return self

    def add_gram(self, block: PsdBlock, basis: GramBasis, multiplier: Polynomial | None = None,
                 scale: float = 1.0, weights: Sequence[float] | None = None):
        """Add ``scale * multiplier * z^T G z`` with ``G`` the block's matrix.

        With ``weights`` the basis is ``w_i z_i`` instead, so the block holds
        ``W^-1 G W^-1``.
        """
        mult = list(multiplier.items()) if multiplier is not None else [
            ((0,) * self.nvars, 1.0)]
        mons = basis.monomials
        k = len(mons)
        wts = weights if weights is not None else [1.0] * k
        for i in range(k):
            for j in range(i, k):
                base = tuple(a + b for a, b in zip(mons[i], mons[j]))
                idx, f = block.entry(i, j)
                w = scale * f * (1.0 if i == j else 2.0) * wts[i] * wts[j]
                for g, c in mult:
                    e = tuple(a + b for a, b in zip(base, g))
                    self.terms[e][idx] += w * float(c)
        return self

    def emit_zero(self, prob: ConicProblem) -> int:
        """Add equalities setting every coefficient to zero; returns the row count."""
        rows = 0
        for e in sorted(self.terms, key=grlex_key):
            row = self.terms[e]
            const = row.get(None, 0.0)
            coeffs = {k: v for k, v in row.items() if k is not None and v != 0.0}
            if not coeffs:
                if abs(const) > 0.0:
                    # constant mismatch: keep an infeasible row so the solver reports it
                    prob.add_eq({}, -const)
                    rows += 1
                continue
            prob.add_eq(coeffs, -const)
            rows += 1
        return rows


def gram_encode(prob: ConicProblem, target: Polynomial | LinearPolynomial,
                basis: GramBasis) -> PsdBlock:
    """Add a PSD block ``G`` and equalities ``target == z^T G z``."""
    if isinstance(target, Polynomial):
        lin = LinearPolynomial(target.nvars).add_poly(target)
        degree = target.degree
        homog = target.is_homogeneous()
    else:
        lin = target
        degs = {sum(e) for e, row in target.terms.items() if any(v for v in row.values())}
        degree = max(degs, default=0)
        homog = len(degs) <= 1
    if degree > 2 * basis.half_degree:
        raise ValueError(f"target degree {degree} exceeds Gram degree {2 * basis.half_degree}")
    if basis.homogeneous and not homog:
        raise ValueError("inhomogeneous target with homogeneous Gram basis")
    block = prob.add_psd(len(basis))
    lin.add_gram(block, basis, scale=-1.0)
    lin.emit_zero(prob)
    return block


def sos_feasibility(p: Polynomial, basis: GramBasis | None = None,
                    settings: SolverSettings | None = None) -> tuple[ConicSolution, np.ndarray | None]:
    """Pure Gram feasibility ``p = z^T G z, G PSD``."""
    if basis is None:
        basis = GramBasis.for_target(p.nvars, p.degree, p.is_homogeneous())
    prob = ConicProblem()
    block = gram_encode(prob, p.to_float(), basis)
    sol = prob.solve(settings)
    G = block.matrix(sol.x) if sol.ok else None
    return sol, G


# -- bound problems ----------------------------------------------------------

def default_normalizer(p: Polynomial) -> Polynomial:
    """``||x||^d`` for forms, the constant 1 otherwise."""
    if p.is_homogeneous() and p.degree > 0 and p.degree % 2 == 0:
        return sphere_power(p.nvars, p.degree // 2, p.mode)
    return Polynomial.constant(p.nvars, 1, p.mode)


def solve_region(p: Polynomial, constraints: Sequence[Polynomial], dbar: int,
                 normalizer: Polynomial, homogeneous: bool,
                 settings: SolverSettings | None = None, symmetric: bool = False,
                 prune: bool = False, descriptor: dict | None = None,
                 weighted: bool = False) -> tuple[float, RegionProof]:
    """Maximize gamma with ``p - gamma*normalizer - sum s_j q_j`` sos.

    ``weighted`` scales base monomials by ``sqrt(multinomial)``, which makes
    ``||x||^d`` the identity Gram matrix and conditions high-degree forms.
    """
    n = p.nvars
    pf = p.to_float()
    prob = ConicProblem()
    gamma = int(prob.add_free(1)[0])
    lin = LinearPolynomial(n).add_poly(pf, scale=-1.0)
    lin.add_poly(normalizer.to_float(), var=gamma)
    mult_blocks = []
    for q in constraints:
        qf = q.to_float()
        room = dbar - q.degree
        if homogeneous and room % 2:
            raise ValueError(f"multiplier degree {room} for constraint of degree {q.degree} "
                             "must be even in homogeneous mode")
        if room < 0:
            raise ValueError(f"constraint degree {q.degree} exceeds dbar={dbar}")
        basis = GramBasis.for_target(n, room, homogeneous)
        block = prob.add_psd(len(basis))
        lin.add_gram(block, basis, multiplier=qf)
        mult_blocks.append((block, basis))
    base_basis = GramBasis.for_target(n, dbar, homogeneous)
    if prune:
        base_basis = base_basis.prune(pf)
    pieces = base_basis.parity_blocks() if symmetric else [base_basis]
    base_blocks = []
    for piece in pieces:
        if len(piece) == 0:
            continue
        block = prob.add_psd(len(piece))
        wts = [math.sqrt(multinomial(m)) for m in piece.monomials] if weighted else None
        lin.add_gram(block, piece, weights=wts)
        base_blocks.append((block, piece, wts))
    lin.emit_zero(prob)
    prob.set_objective({gamma: 1.0})
    sol = prob.solve(settings)
    descriptor = descriptor or {}
    if not sol.ok:
        status = "infeasible" if sol.status == INFEASIBLE else sol.status
        if sol.status == "unbounded":
            status = "unbounded"
        proof = RegionProof(list(constraints), [SosPart() for _ in constraints], SosPart(),
                            NEG_INF, status, descriptor)
        return NEG_INF, proof
    x = sol.x
    value = float(x[gamma])
    multipliers = [SosPart(basis, block.matrix(x)) for block, basis in mult_blocks]
    mats = []
    for block, piece, wts in base_blocks:
        M = block.matrix(x)
        if wts is not None:
            M = M * np.outer(wts, wts)
        mats.append((M, piece))
    base = _merge_blocks(mats, base_basis)
    proof = RegionProof(list(constraints), multipliers, base, value, sol.status, descriptor)
    return value, proof


def _merge_blocks(blocks, full: GramBasis) -> SosPart:
    if len(blocks) == 1 and blocks[0][1].monomials == full.monomials:
        return SosPart(full, blocks[0][0])
    index = {m: i for i, m in enumerate(full.monomials)}
    G = np.zeros((len(full), len(full)))
    for M, piece in blocks:
        ids = [index[m] for m in piece.monomials]
        G[np.ix_(ids, ids)] = M
    return SosPart(full, G)


def solve_sos_bound(p: Polynomial, regions: Sequence[Sequence[Polynomial]] | None = None,
                    dbar: int | None = None, normalizer: Polynomial | None = None,
                    settings: SolverSettings | None = None, workers: int = 1,
                    symmetric: bool = False, prune: bool = False,
                    descriptors: Sequence[dict] | None = None) -> tuple[float, SosCertificate]:
    """Disjunctive sos lower bound: min over regions of the per-region optimum.

    ``regions`` is a list of constraint lists; ``None`` means one unconstrained
    region.  Forms with form constraints use exact-degree Gram bases, anything
    else uses all monomials up to ``dbar / 2``.
    """
    if regions is None or len(regions) == 0:
        regions = [[]]
    dbar = p.degree if dbar is None else dbar
    if dbar < p.degree:
        raise ValueError(f"dbar={dbar} is below deg p = {p.degree}")
    normalizer = default_normalizer(p) if normalizer is None else normalizer
    homogeneous = (p.is_homogeneous() and p.degree == dbar
                   and normalizer.is_homogeneous() and normalizer.degree in (dbar, -1)
                   and all(q.is_homogeneous() for reg in regions for q in reg))
    descriptors = list(descriptors) if descriptors is not None else [{} for _ in regions]

    def run(k):
        return solve_region(p, regions[k], dbar, normalizer, homogeneous, settings,
                            symmetric, prune, descriptors[k])

    if workers > 1 and len(regions) > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, range(len(regions))))
    else:
        results = [run(k) for k in range(len(regions))]
    values = [v for v, _ in results]
    proofs = [r for _, r in results]
    bound = min(values)
    statuses = sorted({r.status for r in proofs})
    cert = SosCertificate(p, proofs, normalizer, bound, float("nan"),
                          statuses[0] if len(statuses) == 1 else ",".join(statuses))
    if math.isfinite(bound):
        cert.residual = float(verify_certificate(p.to_float(), cert))
    return bound, cert


def extract_squares(G, basis: GramBasis, tol: float = 1e-8) -> list[Polynomial]:
    """Factor ``G = sum v_i v_i^T`` (eigen) and return the polynomials ``v_i^T z``."""
    G = np.asarray(G, dtype=float)
    G = (G + G.T) / 2
    lam, vecs = np.linalg.eigh(G)
    scale = max(1.0, float(np.abs(G).max(initial=0.0)))
    if lam.size and lam.min() < -tol * scale:
        raise ValueError(f"Gram matrix is indefinite (min eigenvalue {lam.min():.3e})")
    out = []
    for k in range(len(lam) - 1, -1, -1):
        if lam[k] <= 1e-14 * scale:
            continue
        v = np.sqrt(lam[k]) * vecs[:, k]
        terms = {m: float(c) for m, c in zip(basis.monomials, v) if c != 0.0}
        out.append(Polynomial(basis.nvars, terms, FLOAT))
    return out
