"""Spatial branch-and-bound over simplicial cones (sphere) and simplices.

``algorithm2`` minimizes a form over the unit sphere using the sos bound
``phi``; ``algorithm3`` minimizes a quadratic form over the unit simplex
using ``psi``.  Both share one best-first engine with longest-edge bisection,
projected-gradient upper bounds and parent-bound tightening.
"""

from __future__ import annotations

import csv
import heapq
import io
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .conic import SolverSettings
from .copositive import EPS_ABS, as_matrix, clique_bounds, clique_program, copositivity_verdict, psi
from .disjunction import (SIMPLEX_HULL, SPHERE_CONE, bisect_longest_edge, initial_orthants,
                          initial_regular_simplex)
from .poly import LinearMap, Polynomial, compose_linear, gradient, norms, sphere_power, \
    substitute_squares
from .sos import NEG_INF, SosCertificate, solve_region

LOG_VERSION = "disjsos-nodelog v1"
LOG_COLUMNS = ("iter", "node_id", "parent_id", "bound", "local_upper", "global_L", "global_U",
               "wall_ms")


class ProjectionError(RuntimeError):
    pass


# -- projections -------------------------------------------------------------

def _lsq_free(V: np.ndarray, y: np.ndarray, free: list[int], simplex: bool) -> np.ndarray:
    n = V.shape[1]
    z = np.zeros(n)
    if not free:
        return z
    if not simplex:
        z[free] = np.linalg.lstsq(V[:, free], y, rcond=None)[0]
        return z
    if len(free) == 1:
        z[free[0]] = 1.0
        return z
    last = free[-1]
    head = free[:-1]
    A = V[:, head] - V[:, [last]]
    u = np.linalg.lstsq(A, y - V[:, last], rcond=None)[0]
    z[head] = u
    z[last] = 1.0 - u.sum()
    return z


def kkt_residual(V: np.ndarray, y: np.ndarray, z: np.ndarray, simplex: bool) -> float:
    """Scaled KKT violation of ``min ||Vz - y||^2 / 2`` over ``z >= 0`` (and ``sum z = 1``)."""
    g = V.T @ (V @ z - y)
    pos = z > 1e-12
    nu = float(np.mean(g[pos])) if simplex and pos.any() else (
        float(g.min()) if simplex else 0.0)
    mu = g - nu
    scale = 1.0 + np.abs(V.T @ y).max() + np.abs(V.T @ V).max() * np.abs(z).max()
    viol = max(
        float(np.maximum(-z, 0).max()),
        float(np.maximum(-mu, 0).max()) / scale,
        float(np.abs(mu[pos]).max()) / scale if pos.any() else 0.0,
        abs(z.sum() - 1.0) if simplex else 0.0,
    )
    return viol


def nnls_active_set(V: np.ndarray, y: np.ndarray, simplex: bool = False,
                    max_iter: int | None = None, tol: float = 1e-9) -> np.ndarray:
    """Primal active-set solve of ``min ||Vz - y||`` with ``z >= 0`` (and ``sum z = 1``)."""
    V = np.asarray(V, dtype=float)
    y = np.asarray(y, dtype=float)
    n = V.shape[1]
    max_iter = max_iter or 20 * n + 50
    if simplex:
        z = np.full(n, 1.0 / n)
        active: set[int] = set()
    else:
        z = np.zeros(n)
        active = set(range(n))
    for _ in range(max_iter):
        free = [i for i in range(n) if i not in active]
        zs = _lsq_free(V, y, free, simplex)
        if all(zs[i] >= -1e-15 for i in free):
            z = np.maximum(zs, 0.0)
            if simplex and z.sum() > 0:
                z /= z.sum()
            g = V.T @ (V @ z - y)
            nu = float(np.mean(g[free])) if simplex and free else 0.0
            mu = g - nu
            cand = [i for i in sorted(active) if mu[i] < -tol * (1 + abs(mu).max())]
            if not cand:
                return z
            worst = min(cand, key=lambda i: (mu[i], i))
            active.discard(worst)
            continue
        # step towards zs until a free coordinate hits zero
        alpha, block = 1.0, None
        for i in free:
            if zs[i] < 0:
                a = z[i] / (z[i] - zs[i]) if z[i] - zs[i] > 0 else 0.0
                if a < alpha or block is None:
                    alpha, block = a, i
        z = z + alpha * (zs - z)
        z[block] = 0.0
        z = np.maximum(z, 0.0)
        active.add(block)
        for i in free:
            if z[i] <= 1e-15:
                active.add(i)
                z[i] = 0.0
    raise ProjectionError(f"active-set projection did not converge in {max_iter} iterations "
                          f"(n={n}, simplex={simplex}, y={y})")


def project_cone(V, y, check: bool = True) -> np.ndarray:
    """Euclidean projection of ``y`` onto ``cone{columns of V}``."""
    A = V.array if isinstance(V, LinearMap) else np.asarray(V, dtype=float)
    z = nnls_active_set(A, y, simplex=False)
    if check and kkt_residual(A, np.asarray(y, dtype=float), z, False) > 1e-9:
        raise ProjectionError("cone projection failed the KKT check")
    return A @ z


def project_hull(V, y, check: bool = True) -> np.ndarray:
    """Euclidean projection of ``y`` onto ``conv{columns of V}``."""
    A = V.array if isinstance(V, LinearMap) else np.asarray(V, dtype=float)
    z = nnls_active_set(A, y, simplex=True)
    if check and kkt_residual(A, np.asarray(y, dtype=float), z, True) > 1e-9:
        raise ProjectionError("hull projection failed the KKT check")
    return A @ z


def in_cone(V, x, tol: float = 1e-9) -> bool:
    x = np.asarray(x, dtype=float)
    return float(np.linalg.norm(project_cone(V, x, check=False) - x)) <= tol * (1 + np.linalg.norm(x))


def in_hull(V, x, tol: float = 1e-9) -> bool:
    x = np.asarray(x, dtype=float)
    return float(np.linalg.norm(project_hull(V, x, check=False) - x)) <= tol * (1 + np.linalg.norm(x))


def simplex_projection_sort(y) -> np.ndarray:
    """Projection onto the unit simplex by sorting (reference implementation)."""
    y = np.asarray(y, dtype=float)
    u = np.sort(y)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, len(y) + 1)
    rho = np.nonzero(u - (css - 1) / k > 0)[0][-1]
    theta = (css[rho] - 1) / (rho + 1)
    return np.maximum(y - theta, 0)


# -- local search ------------------------------------------------------------

def default_beta_form(p: Polynomial) -> float:
    return 1.0 / (p.degree * float(norms(p)[1]))


def default_beta_quadratic(Q) -> float:
    return 1.0 / (2.0 * float(np.linalg.norm(Q, "fro")))


STEP_EXPAND = 12
TIE_TOL = 1e-6


def _step_ladder(beta: float, expand: int, halvings: int) -> list[float]:
    return [beta * 2.0 ** j for j in range(expand, -halvings - 1, -1)]


def pgd_sphere(p: Polynomial, V, x0, K: int = 1, beta: float | None = None,
               halvings: int = 10, expand: int = STEP_EXPAND) -> np.ndarray:
    """Projected gradient on ``cone{V}`` followed by normalization, ``K`` steps.

    Each step tries the stepsizes ``beta * 2^j`` for ``j = expand, ..., -halvings``
    and keeps the candidate with the smallest value of ``p``.  With ``expand=0``
    this is plain backtracking from ``beta``: the first non-increasing candidate
    is taken.  A step that improves on nothing ends the run early.
    """
    pf = p.to_float()
    beta = default_beta_form(pf) if beta is None else beta
    x = np.asarray(x0, dtype=float)
    fx = pf(x)
    for _ in range(K):
        g = gradient(pf, x)
        if not np.any(g):
            break
        best_x, best_f = None, fx
        for step in _step_ladder(beta, expand, halvings):
            y = project_cone(V, x - step * g)
            ny = np.linalg.norm(y)
            if ny <= 1e-14:
                continue
            cand = y / ny
            fc = pf(cand)
            if fc <= best_f:
                best_x, best_f = cand, fc
                if expand == 0:
                    break
        if best_x is None:
            break
        x, fx = best_x, best_f
    return x


def pgd_simplex(Q, V, x0, K: int = 5, beta: float | None = None,
                halvings: int = 10, expand: int = STEP_EXPAND) -> np.ndarray:
    """``x <- proj_conv{V}(x - 2 s Q x)``, ``K`` times.

    ``s`` is the best of ``beta * 2^j`` for ``j = expand, ..., -halvings``;
    ``expand=0, halvings=0`` gives the fixed-step iteration.
    """
    Q = np.asarray(Q, dtype=float)
    beta = default_beta_quadratic(Q) if beta is None else beta
    x = np.asarray(x0, dtype=float)
    if expand == 0 and halvings == 0:
        for _ in range(K):
            x = project_hull(V, x - 2 * beta * (Q @ x))
        return x
    fx = float(x @ Q @ x)
    for _ in range(K):
        g = 2 * (Q @ x)
        best_x, best_f = None, fx
        for step in _step_ladder(beta, expand, halvings):
            cand = project_hull(V, x - step * g)
            fc = float(cand @ Q @ cand)
            if fc < best_f:
                best_x, best_f = cand, fc
        if best_x is None:
            break
        x, fx = best_x, best_f
    return x


# -- bounds ------------------------------------------------------------------

def phi(V, p: Polynomial, settings: SolverSettings | None = None,
        with_certificate: bool = False):
    """max gamma with ``p(V(x.^2)) - gamma ||V(x.^2)||^d`` an sos form."""
    if not isinstance(V, LinearMap):
        V = LinearMap(V)
    if p.mode != V.mode:
        p = p.to_float()
        V = V.to_float()
    d = p.degree
    if d % 2 or not p.is_homogeneous():
        raise ValueError("phi needs a form of even degree")
    target = substitute_squares(compose_linear(p, V))
    normalizer = substitute_squares(compose_linear(sphere_power(p.nvars, d // 2, p.mode), V))
    value, proof = solve_region(target, [], 2 * d, normalizer, True, settings, symmetric=True,
                                weighted=True,
                                descriptor={"generator": V.tolist()})
    if with_certificate:
        cert = SosCertificate(target, [proof], normalizer, value, float("nan"), proof.status)
        return value, cert
    return value


# -- engine ------------------------------------------------------------------

@dataclass
class BnbConfig:
    eps: float = 1e-4
    K: int = 1
    beta: float | None = None
    node_cap: int = 10_000
    workers: int = 1
    time_limit: float | None = None
    settings: SolverSettings | None = None
    expand: int = STEP_EXPAND
    # bounds this close (relative) to the best count as tied; the newest tied node wins
    tie_tol: float = TIE_TOL


def pop_best(heap: list[tuple[float, int]], tie_tol: float) -> tuple[float, int]:
    """Pop the node with the smallest bound, preferring the newest among near-ties.

    Bounds from a conic solver carry noise of roughly its tolerance, so exact
    ordering among them is arbitrary. Taking the newest tied node keeps the
    search refining one region instead of spreading over equivalent ones.
    With ``tie_tol == 0`` this is plain smallest-bound, smallest-id order.
    """
    first = heapq.heappop(heap)
    if tie_tol <= 0:
        return first
    limit = first[0] + tie_tol * (1 + abs(first[0]))
    tied = [first]
    while heap and heap[0][0] <= limit:
        tied.append(heapq.heappop(heap))
    pick = max(tied, key=lambda t: t[1])
    for t in tied:
        if t is not pick:
            heapq.heappush(heap, t)
    return pick


@dataclass(order=False)
class BnbNode:
    V: LinearMap
    lower: float
    upper: float
    witness: np.ndarray
    depth: int
    id: int
    parent: int = -1
    raw_bound: float = NEG_INF


@dataclass
class BnbResult:
    L: float
    U: float
    x: np.ndarray
    subregion_count: int
    log: list[tuple] = field(default_factory=list)
    reason: str = "converged"
    iterations: int = 0
    leaves: list[BnbNode] = field(default_factory=list)
    verdict: str | None = None
    wall_time: float = 0.0

    def log_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# {LOG_VERSION}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LOG_COLUMNS)
        for row in self.log:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()

    def deterministic_log(self) -> list[tuple]:
        """Node log without the wall-clock column."""
        return [row[:-1] for row in self.log]


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def read_node_log(text: str) -> list[tuple]:
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    header = tuple(rows[0])
    if header != LOG_COLUMNS:
        raise ValueError(f"unexpected node-log header {header}")
    out = []
    for r in rows[1:]:
        out.append((int(r[0]), int(r[1]), int(r[2]), float(r[3]), float(r[4]), float(r[5]),
                    float(r[6]), float(r[7])))
    return out


def gap_closed(L: float, U: float, eps: float) -> bool:
    if not (math.isfinite(L) and math.isfinite(U)):
        return False
    return U - L <= eps * (1 + abs(L) + abs(U))


def run_bnb(roots: Sequence[LinearMap],
            bound_fn: Callable[[LinearMap], float],
            root_upper: Callable[[LinearMap], tuple[np.ndarray, float]],
            local_fn: Callable[[LinearMap, np.ndarray], tuple[np.ndarray, float]],
            mode: str, cfg: BnbConfig,
            stop: Callable[[float, float], bool] | None = None) -> BnbResult:
    """Best-first branch and bound; children bounds are tightened by the parent's."""
    t0 = time.perf_counter()
    stop = stop or (lambda L, U: gap_closed(L, U, cfg.eps))
    pool = ThreadPoolExecutor(cfg.workers) if cfg.workers > 1 else None

    def fan(fn, items):
        return list(pool.map(fn, items)) if pool else [fn(i) for i in items]

    def ms():
        return (time.perf_counter() - t0) * 1000.0

    heap: list[tuple[float, int]] = []
    leaves: dict[int, BnbNode] = {}
    log: list[tuple] = []
    next_id = 0
    U, xbar = math.inf, None

    raw = fan(bound_fn, list(roots))
    uppers = fan(root_upper, list(roots))
    for V, b, (x, u) in zip(roots, raw, uppers):
        node = BnbNode(V, b, u, x, 0, next_id, -1, b)
        next_id += 1
        leaves[node.id] = node
        heapq.heappush(heap, (node.lower, node.id))
        if u < U:
            U, xbar = u, x
    L = heap[0][0]
    for node in sorted(leaves.values(), key=lambda nd: nd.id):
        log.append((0, node.id, -1, node.lower, node.upper, L, U, ms()))

    iteration = 0
    reason = "converged"
    try:
        while True:
            L = heap[0][0]
            if stop(L, U):
                break
            if len(leaves) >= cfg.node_cap:
                reason = "cap"
                break
            if cfg.time_limit is not None and time.perf_counter() - t0 > cfg.time_limit:
                reason = "time"
                break
            iteration += 1
            _, nid = pop_best(heap, cfg.tie_tol)
            parent = leaves.pop(nid)
            Vp, Vm = bisect_longest_edge(parent.V, mode)
            w = Vp.array[:, -1].copy()
            kids = [Vp, Vm]
            bounds = fan(bound_fn, kids)
            locals_ = fan(lambda V: local_fn(V, w), kids)
            born = []
            for V, b, (x, u) in zip(kids, bounds, locals_):
                node = BnbNode(V, max(b, parent.lower), u, x, parent.depth + 1, next_id,
                               parent.id, b)
                next_id += 1
                leaves[node.id] = node
                heapq.heappush(heap, (node.lower, node.id))
                if u < U:
                    U, xbar = u, x
                born.append((node, U))
            # log the global lower bound once both children are in the tree
            L = heap[0][0]
            for node, U_then in born:
                log.append((iteration, node.id, parent.id, node.lower, node.upper, L, U_then,
                            ms()))
    finally:
        if pool:
            pool.shutdown()
    L = min(heap[0][0], U)
    return BnbResult(L, U, np.asarray(xbar), len(leaves), log, reason, iteration,
                     sorted(leaves.values(), key=lambda nd: nd.id),
                     wall_time=time.perf_counter() - t0)


# -- algorithm drivers -------------------------------------------------------

def algorithm2(p: Polynomial, eps: float = 1e-4, init: str = "orthants", K: int = 1,
               beta: float | None = None, node_cap: int = 10_000, workers: int = 1,
               settings: SolverSettings | None = None,
               time_limit: float | None = None, expand: int = STEP_EXPAND,
               tie_tol: float = TIE_TOL) -> BnbResult:
    """Minimize a form over the unit sphere by branching on simplicial cones.

    ``expand`` sets how many stepsize doublings the upper-bound search tries
    (0 gives plain backtracking from ``beta``). ``tie_tol`` is passed to
    :func:`pop_best`.
    """
    if not p.is_homogeneous() or p.degree % 2:
        raise ValueError("algorithm2 needs a form of even degree")
    n = p.nvars
    if init in ("orthants", "init1", "1"):
        roots = initial_orthants(n, hemisphere=True).generators
    elif init in ("regular", "regular_simplex", "init2", "2"):
        roots = initial_regular_simplex(n).generators
    else:
        raise ValueError(f"unknown init {init!r}")
    pf = p.to_float()
    beta = default_beta_form(pf) if beta is None else beta
    cfg = BnbConfig(eps, K, beta, node_cap, workers, time_limit, settings, expand, tie_tol)

    def bound(V):
        return phi(V, p if V.mode == p.mode else pf, settings)

    def root_upper(V):
        best_x, best = None, math.inf
        for j in range(n):
            col = V.array[:, j]
            col = col / np.linalg.norm(col)
            v = pf(col)
            if v < best:
                best_x, best = col, v
        return best_x, best

    def local(V, w):
        x = pgd_sphere(pf, V, w, K, beta, expand=expand)
        return x, pf(x)

    return run_bnb(roots, bound, root_upper, local, SPHERE_CONE, cfg)


def algorithm3(Q, eps: float = 1e-6, K: int = 5, beta: float | None = None,
               node_cap: int = 10_000, workers: int = 1,
               settings: SolverSettings | None = None, time_limit: float | None = None,
               stop: Callable[[float, float], bool] | None = None,
               eps_abs: float = EPS_ABS, expand: int = STEP_EXPAND,
               tie_tol: float = TIE_TOL) -> BnbResult:
    """Minimize ``x^T Q x`` over the unit simplex; reports a copositivity verdict."""
    M = as_matrix(Q)
    Qf = np.array([[float(v) for v in row] for row in M])
    n = Qf.shape[0]
    beta = default_beta_quadratic(Qf) if beta is None else beta
    # the verdict threshold is 1e-8, so psi needs a tighter gap than that
    settings = settings or SolverSettings(tol=1e-9)
    cfg = BnbConfig(eps, K, beta, node_cap, workers, time_limit, settings, expand, tie_tol)
    root = LinearMap(np.eye(n))

    def bound(V):
        return psi(V, Qf, settings)

    def root_upper(V):
        diag = np.diag(Qf)
        i = int(np.argmin(diag))
        x = np.zeros(n)
        x[i] = 1.0
        return x, float(diag[i])

    def local(V, w):
        x = pgd_simplex(Qf, V, w, K, beta, expand=expand)
        return x, float(x @ Qf @ x)

    res = run_bnb([root], bound, root_upper, local, SIMPLEX_HULL, cfg, stop)
    res.verdict = copositivity_verdict(res.L, res.U, eps_abs)
    return res


def clique_number_bounds(adjacency, K: int = 10, node_cap: int = 10_000, workers: int = 1,
                         settings: SolverSettings | None = None, eps: float = 1e-6,
                         time_limit: float | None = None, int_gap: int = 0):
    """Simplex branch and bound on the Motzkin-Straus program; stops once the integer bounds meet.

    ``int_gap`` stops earlier, once ``upper - lower <= int_gap``.

    Returns ``(omega_lower, omega_upper, result)``.
    """
    Q, _ = clique_program(adjacency)

    def stop(L, U):
        lo, hi = clique_bounds(L, U)
        return hi - lo <= int_gap or gap_closed(L, U, eps)

    res = algorithm3(Q, eps=eps, K=K, node_cap=node_cap, workers=workers, settings=settings,
                     time_limit=time_limit, stop=stop)
    lo, hi = clique_bounds(res.L, res.U)
    return lo, hi, res
