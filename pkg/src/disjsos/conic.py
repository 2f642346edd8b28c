"""Small conic-program builder with Clarabel and SCS backends.

Variables live in one vector made of free scalars, nonnegative scalars and
symmetric PSD blocks.  A PSD block of size ``n`` is stored in scaled
upper-triangular column-major order (diagonal entries as is, off-diagonal
entries multiplied by ``sqrt(2)``), which is Clarabel's native convention.
The backend is picked by the ``DISJSOS_SOLVER`` environment variable
(``clarabel`` by default, or ``scs``).
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

SQRT2 = float(np.sqrt(2.0))

OPTIMAL = "optimal"
INACCURATE = "inaccurate"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ERROR = "error"


@dataclass
class SolverSettings:
    backend: str | None = None
    tol: float = 1e-8
    max_iter: int = 400
    verbose: bool = False

    def resolved_backend(self) -> str:
        name = (self.backend or os.environ.get("DISJSOS_SOLVER") or "clarabel").lower()
        if name not in BACKENDS:
            raise ValueError(f"unknown solver backend {name!r}; choose from {sorted(BACKENDS)}")
        return name


@dataclass
class PsdBlock:
    size: int
    offset: int

    @property
    def length(self) -> int:
        return self.size * (self.size + 1) // 2

    def index(self, i: int, j: int) -> int:
        if i > j:
            i, j = j, i
        return self.offset + j * (j + 1) // 2 + i

    def entry(self, i: int, j: int) -> tuple[int, float]:
        """Variable index and factor with ``X[i, j] = factor * x[index]``."""
        return self.index(i, j), (1.0 if i == j else 1.0 / SQRT2)

    def matrix(self, x: np.ndarray) -> np.ndarray:
        n = self.size
        X = np.empty((n, n))
        for j in range(n):
            for i in range(j + 1):
                v = x[self.index(i, j)]
                if i != j:
                    v /= SQRT2
                X[i, j] = X[j, i] = v
        return X


@dataclass
class ConicSolution:
    status: str
    x: np.ndarray | None
    objective: float
    raw_status: str
    primal_residual: float = float("nan")
    dual_residual: float = float("nan")
    iterations: int = 0
    solve_time: float = 0.0
    backend: str = ""

    @property
    def ok(self) -> bool:
        return self.status in (OPTIMAL, INACCURATE) and self.x is not None


@dataclass
class ConicProblem:
    """Maximize ``c @ x`` subject to ``A_eq x = b_eq`` and cone membership."""

    n_vars: int = 0
    nonneg: list[int] = field(default_factory=list)
    psd: list[PsdBlock] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)
    _rows: list[int] = field(default_factory=list)
    _cols: list[int] = field(default_factory=list)
    _vals: list[float] = field(default_factory=list)
    rhs: list[float] = field(default_factory=list)

    def add_free(self, k: int = 1) -> np.ndarray:
        idx = np.arange(self.n_vars, self.n_vars + k)
        self.n_vars += k
        return idx

    def add_nonneg(self, k: int = 1) -> np.ndarray:
        idx = self.add_free(k)
        self.nonneg.extend(int(i) for i in idx)
        return idx

    def add_psd(self, size: int) -> PsdBlock:
        block = PsdBlock(size, self.n_vars)
        self.n_vars += block.length
        self.psd.append(block)
        return block

    def add_eq(self, coeffs: dict[int, float], rhs: float = 0.0) -> None:
        row = len(self.rhs)
        for col, val in coeffs.items():
            if val != 0.0:
                self._rows.append(row)
                self._cols.append(int(col))
                self._vals.append(float(val))
        self.rhs.append(float(rhs))

    def set_objective(self, coeffs: dict[int, float]) -> None:
        self.objective = {int(k): float(v) for k, v in coeffs.items()}

    @property
    def n_eq(self) -> int:
        return len(self.rhs)

    def eq_matrix(self) -> sp.csc_matrix:
        return sp.csc_matrix((self._vals, (self._rows, self._cols)),
                             shape=(self.n_eq, self.n_vars))

    def cost_vector(self) -> np.ndarray:
        c = np.zeros(self.n_vars)
        for k, v in self.objective.items():
            c[k] += v
        return c

    def solve(self, settings: SolverSettings | None = None) -> ConicSolution:
        settings = settings or SolverSettings()
        backend = settings.resolved_backend()
        return BACKENDS[backend](self, settings)


def _cone_rows(prob: ConicProblem, scs_order: bool):
    """Rows ``-x_k + s = 0`` placing variables into the cone slack."""
    rows, cols, vals = [], [], []
    r = 0
    for k in prob.nonneg:
        rows.append(r)
        cols.append(k)
        vals.append(-1.0)
        r += 1
    for block in prob.psd:
        n = block.size
        if scs_order:
            # SCS: lower triangle, column-major
            order = [(i, j) for j in range(n) for i in range(j, n)]
        else:
            order = [(i, j) for j in range(n) for i in range(j + 1)]
        for i, j in order:
            rows.append(r)
            cols.append(block.index(i, j))
            vals.append(-1.0)
            r += 1
    return sp.csc_matrix((vals, (rows, cols)), shape=(r, prob.n_vars)), r


def _solve_clarabel(prob: ConicProblem, settings: SolverSettings) -> ConicSolution:
    import clarabel

    A_eq = prob.eq_matrix()
    A_cone, n_cone = _cone_rows(prob, scs_order=False)
    A = sp.vstack([A_eq, A_cone], format="csc")
    b = np.concatenate([np.asarray(prob.rhs, dtype=float), np.zeros(n_cone)])
    q = -prob.cost_vector()
    P = sp.csc_matrix((prob.n_vars, prob.n_vars))
    cones = []
    if prob.n_eq:
        cones.append(clarabel.ZeroConeT(prob.n_eq))
    if prob.nonneg:
        cones.append(clarabel.NonnegativeConeT(len(prob.nonneg)))
    for block in prob.psd:
        cones.append(clarabel.PSDTriangleConeT(block.size))
    opts = clarabel.DefaultSettings()
    opts.verbose = settings.verbose
    opts.max_iter = settings.max_iter
    opts.tol_gap_abs = settings.tol
    opts.tol_gap_rel = settings.tol
    opts.tol_feas = settings.tol
    t0 = time.perf_counter()
    try:
        solver = clarabel.DefaultSolver(P, q, A, b, cones, opts)
        res = solver.solve()
    except Exception as exc:  # backend failures become a status, not a crash
        return ConicSolution(ERROR, None, float("nan"), repr(exc), backend="clarabel",
                             solve_time=time.perf_counter() - t0)
    raw = str(res.status)
    name = raw.split(".")[-1]
    if name == "Solved":
        status = OPTIMAL
    elif name == "AlmostSolved":
        status = INACCURATE
    elif name in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
        status = INFEASIBLE
    elif name in ("DualInfeasible", "AlmostDualInfeasible"):
        status = UNBOUNDED
    elif name in ("MaxIterations", "MaxTime", "InsufficientProgress", "NumericalError"):
        status = INACCURATE if _usable(res) else ERROR
    else:
        status = ERROR
    x = np.asarray(res.x, dtype=float) if status in (OPTIMAL, INACCURATE) else None
    obj = -float(res.obj_val) if x is not None else float("nan")
    return ConicSolution(status, x, obj, name, float(res.r_prim), float(res.r_dual),
                         int(res.iterations), time.perf_counter() - t0, "clarabel")


def _usable(res) -> bool:
    return np.isfinite(res.r_prim) and res.r_prim < 1e-5 and np.all(np.isfinite(res.x))


def _solve_scs(prob: ConicProblem, settings: SolverSettings) -> ConicSolution:
    import scs

    A_eq = prob.eq_matrix()
    A_cone, n_cone = _cone_rows(prob, scs_order=True)
    A = sp.vstack([A_eq, A_cone], format="csc")
    b = np.concatenate([np.asarray(prob.rhs, dtype=float), np.zeros(n_cone)])
    c = -prob.cost_vector()
    cone = {"z": prob.n_eq, "l": len(prob.nonneg), "s": [blk.size for blk in prob.psd]}
    t0 = time.perf_counter()
    try:
        solver = scs.SCS({"A": A, "b": b, "c": c}, cone, eps_abs=settings.tol,
                         eps_rel=settings.tol, max_iters=max(settings.max_iter, 20000),
                         verbose=settings.verbose)
        res = solver.solve()
    except Exception as exc:
        return ConicSolution(ERROR, None, float("nan"), repr(exc), backend="scs",
                             solve_time=time.perf_counter() - t0)
    info = res["info"]
    val = int(info["status_val"])
    status = {1: OPTIMAL, 2: INACCURATE, -2: INFEASIBLE, -7: INFEASIBLE,
              -1: UNBOUNDED, -6: UNBOUNDED}.get(val, ERROR)
    x = np.asarray(res["x"], dtype=float) if status in (OPTIMAL, INACCURATE) else None
    obj = -float(info["pobj"]) if x is not None else float("nan")
    return ConicSolution(status, x, obj, str(info["status"]), float(info.get("res_pri", np.nan)),
                         float(info.get("res_dual", np.nan)), int(info.get("iter", 0)),
                         time.perf_counter() - t0, "scs")


BACKENDS = {"clarabel": _solve_clarabel, "scs": _solve_scs}
