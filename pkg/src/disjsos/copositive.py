"""Copositivity tests: P+N decompositions, the psi lower bound, and clique programs."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .conic import ConicProblem, SolverSettings
from .poly import FLOAT, RATIONAL, LinearMap

NEG_INF = float("-inf")
EPS_ABS = 1e-8


def is_exact_matrix(Q) -> bool:
    if isinstance(Q, np.ndarray):
        return Q.dtype == object and all(isinstance(v, (int, Fraction)) for v in Q.ravel())
    try:
        return all(isinstance(v, (int, Fraction)) for row in Q for v in row)
    except TypeError:
        return False


def as_matrix(Q, exact: bool | None = None):
    """Symmetric matrix as a float array, or as nested Fraction lists when exact."""
    if isinstance(Q, LinearMap):
        Q = Q.rows if Q.mode == RATIONAL else Q.array
    if exact is None:
        exact = is_exact_matrix(Q)
    if exact:
        M = [[Fraction(v) for v in row] for row in Q]
        n = len(M)
        if any(len(r) != n for r in M):
            raise ValueError("matrix must be square")
        if any(M[i][j] != M[j][i] for i in range(n) for j in range(i)):
            raise ValueError("matrix must be symmetric")
        return M
    A = np.array(Q, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got shape {A.shape}")
    if not np.allclose(A, A.T, rtol=0, atol=1e-12 * (1 + np.abs(A).max(initial=0))):
        raise ValueError("matrix must be symmetric")
    return (A + A.T) / 2


def _float(M) -> np.ndarray:
    return np.array([[float(v) for v in row] for row in M]) if not isinstance(M, np.ndarray) else M


def congruence(Q, V: LinearMap):
    """``V^T Q V``, exact when both are rational."""
    exact = is_exact_matrix(Q) and V.mode == RATIONAL
    if not exact:
        A = V.array
        return A.T @ _float(Q) @ A
    Qm = as_matrix(Q, True)
    R = V.rows
    n = V.n
    QV = [[sum((Qm[i][k] * R[k][j] for k in range(n)), Fraction(0)) for j in range(n)]
          for i in range(n)]
    return [[sum((R[k][i] * QV[k][j] for k in range(n)), Fraction(0)) for j in range(n)]
            for i in range(n)]


@dataclass
class PnRegion:
    V: LinearMap
    P: object
    N: object

    def to_json(self):
        enc = lambda M: ([[str(v) for v in row] for row in M] if not isinstance(M, np.ndarray)
                         else M.tolist())
        return {"generator": self.V.tolist(), "exact": self.V.mode == RATIONAL,
                "P": enc(self.P), "N": enc(self.N)}

    @classmethod
    def from_json(cls, d):
        dec = lambda M: ([[Fraction(v) for v in row] for row in M] if M and isinstance(M[0][0], str)
                         else np.asarray(M, dtype=float))
        V = (LinearMap([[Fraction(v) for v in row] for row in d["generator"]], RATIONAL)
             if d.get("exact") else LinearMap(np.asarray(d["generator"], dtype=float), FLOAT))
        return cls(V, dec(d["P"]), dec(d["N"]))


@dataclass
class PnCertificate:
    Q: object
    regions: list[PnRegion] = field(default_factory=list)
    residual: float = float("nan")

    def verify(self, psd_tol: float = 1e-8, nonneg_tol: float = 1e-12) -> float:
        """Max reconstruction defect; ``inf`` if some P is not PSD or some N negative."""
        worst = Fraction(0)
        for reg in self.regions:
            M = congruence(self.Q, reg.V)
            exact = not isinstance(M, np.ndarray) and not isinstance(reg.P, np.ndarray) \
                and not isinstance(reg.N, np.ndarray)
            Pf, Nf = _float(reg.P), _float(reg.N)
            if Nf.min(initial=0) < -nonneg_tol:
                return math.inf
            lam = np.linalg.eigvalsh((Pf + Pf.T) / 2)
            if lam.min() < -psd_tol * (1 + np.trace(Pf)):
                return math.inf
            n = len(M)
            if exact:
                for i in range(n):
                    for j in range(n):
                        worst = max(worst, abs(M[i][j] - reg.P[i][j] - reg.N[i][j]))
            else:
                d = float(np.abs(_float(M) - Pf - Nf).max())
                worst = max(float(worst), d)
        self.residual = worst
        return worst

    def to_json(self):
        Q = self.Q
        Qj = [[str(v) for v in row] for row in Q] if not isinstance(Q, np.ndarray) else Q.tolist()
        res = self.residual
        return {"type": "pn", "Q": Qj, "residual": str(res) if isinstance(res, Fraction) else res,
                "regions": [r.to_json() for r in self.regions]}

    @classmethod
    def from_json(cls, d):
        if isinstance(d, str):
            d = json.loads(d)
        Q = d["Q"]
        Q = [[Fraction(v) for v in row] for row in Q] if isinstance(Q[0][0], str) else np.asarray(Q)
        return cls(Q, [PnRegion.from_json(r) for r in d["regions"]])


def _pn_sdp(M: np.ndarray, settings: SolverSettings | None, with_t: bool):
    """max t s.t. M - t*J = P + N (t fixed to 0 unless ``with_t``)."""
    n = M.shape[0]
    prob = ConicProblem()
    t = int(prob.add_free(1)[0]) if with_t else None
    N = {}
    for j in range(n):
        for i in range(j + 1):
            N[i, j] = int(prob.add_nonneg(1)[0])
    P = prob.add_psd(n)
    for j in range(n):
        for i in range(j + 1):
            idx, f = P.entry(i, j)
            row = {idx: f, N[i, j]: 1.0}
            if with_t:
                row[t] = 1.0
            prob.add_eq(row, M[i, j])
    if with_t:
        prob.set_objective({t: 1.0})
    sol = prob.solve(settings)
    if not sol.ok:
        return sol, None, None, None
    x = sol.x
    Nm = np.zeros((n, n))
    for (i, j), k in N.items():
        Nm[i, j] = Nm[j, i] = x[k]
    return sol, (float(x[t]) if with_t else 0.0), P.matrix(x), Nm


def decompose_pn(M, settings: SolverSettings | None = None, psd_tol: float = 1e-8):
    """Try ``M = P + N``; returns ``(P, N)`` (exact when ``M`` is) or ``None``."""
    exact = not isinstance(M, np.ndarray)
    Mf = _float(M)
    sol, _, _, Nm = _pn_sdp(Mf, settings, with_t=False)
    if Nm is None:
        return None
    Nm = np.maximum(Nm, 0.0)
    Nm[np.abs(Nm) < 1e-12] = 0.0
    if exact:
        n = len(M)
        Nq = [[Fraction(float(Nm[i, j])) for j in range(n)] for i in range(n)]
        Pq = [[M[i][j] - Nq[i][j] for j in range(n)] for i in range(n)]
        Pf = _float(Pq)
        if np.linalg.eigvalsh(Pf).min() < -psd_tol * (1 + np.trace(Pf)):
            return None
        return Pq, Nq
    Pm = Mf - Nm
    if np.linalg.eigvalsh(Pm).min() < -psd_tol * (1 + np.trace(Pm)):
        return None
    return Pm, Nm


def pn_test(Q, settings: SolverSettings | None = None) -> PnCertificate | None:
    """Single-region P+N test (``V = I``)."""
    M = as_matrix(Q)
    n = len(M)
    eye = LinearMap([[int(i == j) for j in range(n)] for i in range(n)], RATIONAL)
    dec = decompose_pn(M, settings)
    if dec is None:
        return None
    cert = PnCertificate(M, [PnRegion(eye, dec[0], dec[1])])
    cert.verify()
    return cert


def disjunctive_pn(Q, generators: Sequence[LinearMap], settings: SolverSettings | None = None,
                   workers: int = 1, check_coverage: bool = True) -> PnCertificate | None:
    """P+N test of ``V_k^T Q V_k`` for every generator; ``None`` if any fails."""
    from .disjunction import SIMPLEX_HULL, SimplicialDisjunction

    M = as_matrix(Q)
    gens = [g if isinstance(g, LinearMap) else LinearMap(g) for g in generators]
    if check_coverage:
        ok, witness = SimplicialDisjunction(gens, SIMPLEX_HULL).covers(samples=10_000)
        if not ok:
            raise ValueError(f"generators do not cover the simplex (missed {witness})")

    def run(V):
        return decompose_pn(congruence(M, V), settings)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            decs = list(pool.map(run, gens))
    else:
        decs = [run(V) for V in gens]
    if any(d is None for d in decs):
        return None
    cert = PnCertificate(M, [PnRegion(V, d[0], d[1]) for V, d in zip(gens, decs)])
    cert.verify()
    return cert


def psi(V: LinearMap, Q, settings: SolverSettings | None = None) -> float:
    """max t with ``V^T (Q - tJ) V - N`` PSD and ``N >= 0``; ``-inf`` on solver failure."""
    if not isinstance(V, LinearMap):
        V = LinearMap(V)
    A = V.array
    Qf = _float(as_matrix(Q)) if not isinstance(Q, np.ndarray) else Q
    M = A.T @ Qf @ A
    s = A.sum(axis=0)
    W = np.outer(s, s)
    n = M.shape[0]
    prob = ConicProblem()
    t = int(prob.add_free(1)[0])
    P = prob.add_psd(n)
    for j in range(n):
        for i in range(j + 1):
            idx, f = P.entry(i, j)
            nij = int(prob.add_nonneg(1)[0])
            prob.add_eq({idx: f, nij: 1.0, t: W[i, j]}, M[i, j])
    prob.set_objective({t: 1.0})
    sol = prob.solve(settings)
    if not sol.ok:
        return NEG_INF
    return float(sol.x[t])


def copositivity_verdict(L: float, U: float, eps_abs: float = EPS_ABS) -> str:
    if L >= -eps_abs:
        return "copositive"
    if U < -eps_abs:
        return "not_copositive"
    return "inconclusive"


# -- cliques -----------------------------------------------------------------

def check_adjacency(A) -> np.ndarray:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("adjacency must be square")
    if not np.isin(A, (0, 1)).all():
        raise ValueError("adjacency must be 0/1")
    if not (A == A.T).all():
        raise ValueError("adjacency must be symmetric")
    if np.any(np.diag(A) != 0):
        raise ValueError("adjacency must have zero diagonal")
    return A.astype(int)


def clique_program(adjacency):
    """Quadratic form ``I + complement adjacency`` and the family ``k(I + Abar) - J``."""
    A = check_adjacency(adjacency)
    n = A.shape[0]
    Abar = 1 - A - np.eye(n, dtype=int)
    Q = np.eye(n, dtype=int) + Abar
    Qf = Q.astype(float)

    def family(k: float) -> np.ndarray:
        return k * Qf - np.ones((n, n))

    return Qf, family


def clique_bounds(L: float, U: float, guard: float = 1e-9) -> tuple[int, int]:
    """Integer clique bounds from bounds on ``min x^T (I + Abar) x = 1/omega``."""
    upper = math.floor(1.0 / L + guard) if L > 0 else math.inf
    lower = math.ceil(1.0 / U - guard) if U > 0 else 1
    return max(lower, 1), upper
