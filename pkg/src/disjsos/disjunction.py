"""Algebraic, spherical-cap and simplicial disjunctions.

A disjunction is a finite family of sets whose union covers a target region
(all of R^n, the unit sphere, or the unit simplex).  This module builds the
families used by the certifiers and the branch-and-bound engines and checks
coverage by sampling.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .poly import FLOAT, RATIONAL, LinearMap, Polynomial, sphere_power

SPHERE_CONE = "sphere_cone"
SIMPLEX_HULL = "simplex_hull"


# -- cap polynomials ---------------------------------------------------------

def _as_point(xstar, mode: str):
    if mode == RATIONAL:
        pt = [Fraction(v) if not isinstance(v, float) else Fraction(v) for v in xstar]
        norm2 = sum(v * v for v in pt)
        if abs(float(norm2) - 1.0) > 1e-9:
            raise ValueError(f"x* must be a unit vector (norm^2 = {float(norm2)})")
        return pt
    pt = np.asarray(xstar, dtype=float).ravel()
    if abs(float(pt @ pt) - 1.0) > 2e-9:
        raise ValueError(f"x* must be a unit vector (norm = {np.linalg.norm(pt)})")
    return [float(v) for v in pt]


def _even(d: int, name: str = "d"):
    if d < 2 or d % 2:
        raise ValueError(f"{name} must be an even integer >= 2, got {d}")


def h_poly(xstar, d: int, mode: str = FLOAT) -> Polynomial:
    """``sum_{k=1}^{d/2} (||x||^2 - (x^T x*)^2)^k (x^T x*)^(d-2k)``."""
    _even(d)
    pt = _as_point(xstar, mode)
    n = len(pt)
    lin = Polynomial.linear_form(pt, mode)
    lin2 = lin * lin
    gap = sphere_power(n, 1, mode) - lin2
    total = Polynomial.zero(n, mode)
    gap_k = Polynomial.constant(n, 1, mode)
    for k in range(1, d // 2 + 1):
        gap_k = gap_k * gap
        total = total + gap_k * lin ** (d - 2 * k)
    return total


def cap_polynomial(xstar, dprime: int, t, mode: str = FLOAT) -> Polynomial:
    """``(x^T x*)^d' - t * h_d'(x; x*)``."""
    pt = _as_point(xstar, mode)
    lin = Polynomial.linear_form(pt, mode)
    tt = Fraction(t) if mode == RATIONAL else float(t)
    return lin ** dprime - h_poly(pt, dprime, mode).scale(tt)


def t_param(m: int, dprime: int) -> Fraction:
    """``(sum_{k=1}^{d'/2} m^(-2k))^(-1)`` as an exact rational."""
    if m < 1:
        raise ValueError("m must be >= 1")
    _even(dprime, "dprime")
    return 1 / sum(Fraction(1, m ** (2 * k)) for k in range(1, dprime // 2 + 1))


def cap_cosine(m: int) -> float:
    """Half-angle cosine ``m / sqrt(m^2 + 1)`` of the level-m caps."""
    return m / math.sqrt(m * m + 1)


def h_squares(xstar, d: int, mode: str = RATIONAL) -> list[tuple[object, Polynomial]]:
    """Explicit weighted squares summing to ``h_d(x; x*)`` for unit ``x*``.

    Uses ``||x||^2 - (x^T x*)^2 = ||x - (x^T x*) x*||^2`` when ``||x*|| = 1``.
    Each summand ``g^k l^(d-2k)`` with ``g = sum_i r_i^2`` expands into
    multinomial-weighted squares of ``r^beta l^(d/2-k)``.
    """
    _even(d)
    pt = _as_point(xstar, mode)
    n = len(pt)
    lin = Polynomial.linear_form(pt, mode)
    xs = Polynomial.variables(n, mode)
    resid = [xs[i] - lin.scale(pt[i]) for i in range(n)]
    squares = []
    from .poly import _compositions, multinomial

    for k in range(1, d // 2 + 1):
        lpow = lin ** (d // 2 - k)
        for beta in _compositions(k, n):
            root = lpow
            for i, b in enumerate(beta):
                if b:
                    root = root * resid[i] ** b
            weight = multinomial(beta)
            squares.append((Fraction(weight) if mode == RATIONAL else float(weight), root))
    return squares


# -- disjunction containers --------------------------------------------------

@dataclass
class AlgebraicDisjunction:
    nvars: int
    subsets: list[list[Polynomial]]

    def covers(self, samples: int = 10_000, seed: int = 0, tol: float = 1e-9,
               scale: float = 3.0) -> tuple[bool, np.ndarray | None]:
        rng = np.random.default_rng(seed)
        X = rng.normal(scale=scale, size=(samples, self.nvars))
        inside = np.zeros(samples, dtype=bool)
        for subset in self.subsets:
            ok = np.ones(samples, dtype=bool)
            for q in subset:
                v = q.evaluate_many(X)
                ok &= v >= -tol * (1 + np.abs(v))
            inside |= ok
        bad = np.flatnonzero(~inside)
        return (not bad.size), (X[bad[0]] if bad.size else None)

    def to_json(self):
        return {"type": "algebraic", "nvars": self.nvars,
                "subsets": [[q.to_json() for q in s] for s in self.subsets]}


@dataclass
class CapDisjunction:
    net: np.ndarray
    m: int
    dprime: int
    t: Fraction = field(init=False)
    level: int = 0
    antipodal: bool = True

    def __post_init__(self):
        self.net = np.asarray(self.net, dtype=float)
        norms = np.linalg.norm(self.net, axis=1)
        if np.any(np.abs(norms - 1) > 1e-12):
            raise ValueError("net points must be unit vectors")
        self.t = t_param(self.m, self.dprime)

    @property
    def nvars(self) -> int:
        return self.net.shape[1]

    def __len__(self):
        return self.net.shape[0]

    def polynomials(self) -> list[Polynomial]:
        return [cap_polynomial(u, self.dprime, self.t, FLOAT) for u in self.net]

    def covers(self, samples: int = 10_000, seed: int = 0,
               tol: float = 1e-12) -> tuple[bool, np.ndarray | None]:
        rng = np.random.default_rng(seed)
        Y = rng.normal(size=(samples, self.nvars))
        Y /= np.linalg.norm(Y, axis=1, keepdims=True)
        ip = Y @ self.net.T
        if self.antipodal:
            ip = np.abs(ip)
        best = ip.max(axis=1)
        bad = np.flatnonzero(best < cap_cosine(self.m) - tol)
        return (not bad.size), (Y[bad[0]] if bad.size else None)

    def to_json(self):
        return {"type": "cap", "m": self.m, "dprime": self.dprime, "t": str(self.t),
                "level": self.level, "antipodal": self.antipodal, "net": self.net.tolist()}


@dataclass
class SimplicialDisjunction:
    generators: list[LinearMap]
    mode: str = SPHERE_CONE

    def __post_init__(self):
        self.generators = [g if isinstance(g, LinearMap) else LinearMap(g)
                           for g in self.generators]
        for g in self.generators:
            if not g.invertible:
                raise ValueError(f"generator is singular (cond = {g.cond:.3e})")
        if self.mode == SIMPLEX_HULL:
            for g in self.generators:
                A = g.array
                if np.any(A < -1e-12) or np.any(np.abs(A.sum(axis=0) - 1) > 1e-9):
                    raise ValueError("simplex_hull generators need columns in the unit simplex")

    def __len__(self):
        return len(self.generators)

    @property
    def nvars(self) -> int:
        return self.generators[0].n

    def covers(self, samples: int = 10_000, seed: int = 0, tol: float = 1e-9,
               hemisphere: bool = False, region: LinearMap | None = None
               ) -> tuple[bool, np.ndarray | None]:
        """Sampled coverage of R^n (sphere_cone) or of a simplex (simplex_hull)."""
        from .bnb import in_cone, in_hull

        rng = np.random.default_rng(seed)
        n = self.nvars
        if self.mode == SPHERE_CONE:
            X = rng.normal(size=(samples, n))
            if hemisphere:
                X[X[:, -1] < 0] *= -1
            test = in_cone
        else:
            W = rng.dirichlet(np.ones(n), size=samples)
            base = np.eye(n) if region is None else region.array
            X = W @ base.T
            test = in_hull
        # fast path via inverse coordinates, NNLS only for near-boundary cases
        inside = np.zeros(samples, dtype=bool)
        for g in self.generators:
            Z = np.linalg.solve(g.array, X.T).T
            ok = np.all(Z >= -tol, axis=1)
            if self.mode == SIMPLEX_HULL:
                ok &= np.abs(Z.sum(axis=1) - 1) <= 1e-7
            inside |= ok
        for i in np.flatnonzero(~inside):
            if any(test(g, X[i], tol=1e-7) for g in self.generators):
                inside[i] = True
        bad = np.flatnonzero(~inside)
        return (not bad.size), (X[bad[0]] if bad.size else None)

    def to_json(self):
        return {"type": "simplicial", "mode": self.mode,
                "generators": [g.tolist() for g in self.generators],
                "exact": [g.mode == RATIONAL for g in self.generators]}


def disjunction_from_json(data):
    if isinstance(data, str):
        data = json.loads(data)
    kind = data["type"]
    if kind == "cap":
        cap = CapDisjunction(np.asarray(data["net"]), int(data["m"]), int(data["dprime"]),
                             int(data.get("level", 0)), bool(data.get("antipodal", True)))
        return cap
    if kind == "simplicial":
        gens = []
        for g, exact in zip(data["generators"], data.get("exact", [False] * len(data["generators"]))):
            gens.append(LinearMap([[Fraction(v) for v in row] for row in g], RATIONAL)
                        if exact else LinearMap(np.asarray(g, dtype=float), FLOAT))
        return SimplicialDisjunction(gens, data.get("mode", SPHERE_CONE))
    if kind == "algebraic":
        return AlgebraicDisjunction(int(data["nvars"]),
                                    [[Polynomial.from_json(q) for q in s]
                                     for s in data["subsets"]])
    raise ValueError(f"unknown disjunction type {kind!r}")


# -- simplicial constructions ------------------------------------------------

def initial_orthants(n: int, hemisphere: bool = True) -> SimplicialDisjunction:
    """Sign-pattern matrices; hemisphere mode fixes the last column to ``+e_n``."""
    free = n - 1 if hemisphere else n
    gens = []
    for signs in itertools.product((1, -1), repeat=free):
        diag = list(signs) + ([1] if hemisphere else [])
        gens.append(LinearMap([[diag[i] if i == j else 0 for j in range(n)] for i in range(n)],
                              RATIONAL))
    return SimplicialDisjunction(gens, SPHERE_CONE)


def regular_simplex_vectors(n: int) -> np.ndarray:
    """Rows ``c_1 .. c_{n+1}``: unit vectors with pairwise inner products ``-1/n``."""
    if n < 2:
        raise ValueError("n must be >= 2")
    C = np.empty((n + 1, n))
    shift = n ** -1.5 * (math.sqrt(n + 1) - 1)
    for i in range(n):
        C[i] = -shift
        C[i, i] += math.sqrt(1 + 1 / n)
    C[n] = -1 / math.sqrt(n)
    return C


def initial_regular_simplex(n: int) -> SimplicialDisjunction:
    C = regular_simplex_vectors(n)
    gens = []
    for omit in range(n + 1):
        cols = [C[i] for i in range(n + 1) if i != omit]
        gens.append(LinearMap(np.column_stack(cols), FLOAT))
    return SimplicialDisjunction(gens, SPHERE_CONE)


@lru_cache(maxsize=64)
def edgewise_barycentric(n: int, m: int) -> np.ndarray:
    """Integer barycentric vertices of the level-m edgewise subdivision.

    Returns an array of shape ``(m^(n-1), n, n)``: entry ``[s, k]`` is the
    barycentric vector (summing to ``m``) of vertex ``k`` of sub-simplex ``s``.
    Sub-simplices come from the Kuhn triangulation of the order simplex
    ``m >= y_1 >= ... >= y_{n-1} >= 0`` with ``y_i = alpha_i + ... + alpha_{n-1}``.
    """
    if m < 1 or n < 1:
        raise ValueError("need n >= 1 and m >= 1")
    if n == 1:
        return np.array([[[m]]], dtype=np.int64)
    dim = n - 1
    out = []
    for b in itertools.product(range(m), repeat=dim):
        if any(b[i] < b[i + 1] for i in range(dim - 1)):
            continue
        for perm in itertools.permutations(range(dim)):
            pos = {axis: k for k, axis in enumerate(perm)}
            if any(b[i] == b[i + 1] and pos[i] > pos[i + 1] for i in range(dim - 1)):
                continue
            y = list(b)
            verts = [_y_to_alpha(y, m)]
            for axis in perm:
                y[axis] += 1
                verts.append(_y_to_alpha(y, m))
            out.append(verts)
    arr = np.array(out, dtype=np.int64)
    arr.setflags(write=False)
    return arr


def _y_to_alpha(y: Sequence[int], m: int) -> list[int]:
    alpha = [m - y[0]]
    for i in range(len(y) - 1):
        alpha.append(y[i] - y[i + 1])
    alpha.append(y[-1])
    return alpha


def subdivide_simplex(V: LinearMap, m: int) -> list[LinearMap]:
    """Level-m edgewise subdivision of ``conv{columns of V}`` into ``m^(n-1)`` pieces.

    Child columns are ``sum_k alpha_k v_k / m``; exact when ``V`` is rational.
    """
    if not isinstance(V, LinearMap):
        V = LinearMap(V)
    n = V.n
    bary = edgewise_barycentric(n, m)
    children = []
    if V.mode == RATIONAL:
        rows = V.rows
        for simplex in bary:
            cols = [[sum((Fraction(int(a)) * rows[i][k] for k, a in enumerate(alpha)),
                         Fraction(0)) / m for i in range(n)] for alpha in simplex]
            children.append(LinearMap([[cols[j][i] for j in range(n)] for i in range(n)],
                                      RATIONAL))
    else:
        A = V.array
        for simplex in bary:
            children.append(LinearMap(A @ (simplex.T / m), FLOAT))
    return children


def bisect_longest_edge(V: LinearMap, mode: str = SPHERE_CONE) -> tuple[LinearMap, LinearMap]:
    """Split along the longest edge ``(v_i, v_j)``; ties go to the smallest ``(i, j)``."""
    if not isinstance(V, LinearMap):
        V = LinearMap(V)
    n = V.n
    best, bi, bj = None, 0, 1
    for i in range(n):
        for j in range(i + 1, n):
            if V.mode == RATIONAL:
                dist = sum((V.rows[r][i] - V.rows[r][j]) ** 2 for r in range(n))
            else:
                diff = V.array[:, i] - V.array[:, j]
                dist = float(diff @ diff)
            # float distances within rounding noise count as ties
            slack = best * 1e-12 if best is not None and V.mode != RATIONAL else 0
            if best is None or dist > best + slack:
                best, bi, bj = dist, i, j
    if mode == SIMPLEX_HULL and V.mode == RATIONAL:
        w = [(V.rows[r][bi] + V.rows[r][bj]) / 2 for r in range(n)]
        cols = [[V.rows[r][c] for r in range(n)] for c in range(n)]
        plus = [cols[c] for c in range(n) if c != bi] + [w]
        minus = [cols[c] for c in range(n) if c != bj] + [w]
        to_map = lambda cs: LinearMap([[cs[c][r] for c in range(n)] for r in range(n)],
                                      RATIONAL)
        return to_map(plus), to_map(minus)
    A = V.array
    s = A[:, bi] + A[:, bj]
    if mode == SPHERE_CONE:
        norm = np.linalg.norm(s)
        if norm <= 1e-14:
            raise ValueError(f"antipodal columns {bi} and {bj} cannot be bisected")
        w = s / norm
    else:
        w = s / 2
    plus = np.column_stack([A[:, c] for c in range(n) if c != bi] + [w])
    minus = np.column_stack([A[:, c] for c in range(n) if c != bj] + [w])
    return LinearMap(plus, FLOAT), LinearMap(minus, FLOAT)


def orthant_subdivision(n: int, m: int) -> SimplicialDisjunction:
    """All ``2^n`` orthants, each edgewise subdivided at level m.

    Columns are the unnormalized (rational) subdivision vertices with signs
    applied.  Positive column scaling leaves coefficient signs of ``p(Vx)``
    unchanged, so these generators serve coefficient-sign tests directly.
    """
    base = subdivide_simplex(LinearMap([[int(i == j) for j in range(n)] for i in range(n)],
                                       RATIONAL), m)
    gens = []
    for signs in itertools.product((1, -1), repeat=n):
        for child in base:
            gens.append(LinearMap([[signs[i] * child.rows[i][j] for j in range(n)]
                                   for i in range(n)], RATIONAL))
    return SimplicialDisjunction(gens, SPHERE_CONE)


# -- sphere nets -------------------------------------------------------------

def subdivision_chord(n: int, level: int) -> float:
    """Largest distance between normalized vertices of one level-``level`` sub-simplex."""
    bary = edgewise_barycentric(n, level).astype(float)
    P = bary / np.linalg.norm(bary, axis=2, keepdims=True)
    worst = 0.0
    for a in range(n):
        for b in range(a + 1, n):
            worst = max(worst, float(np.linalg.norm(P[:, a] - P[:, b], axis=1).max()))
    return worst


def net_level(n: int, m: int, max_level: int = 512) -> int:
    """Smallest subdivision level whose normalized vertices form a level-m net.

    If a unit vector ``y`` lies in the cone of unit vectors ``u_k`` with
    pairwise distances at most ``D``, then ``<y, u_k> >= 1 - D^2 / 2`` for all
    ``k``.  The level is chosen so that this bound reaches ``m / sqrt(m^2 + 1)``.
    """
    chord = math.sqrt(2 * (1 - cap_cosine(m)))
    for level in range(1, max_level + 1):
        if subdivision_chord(n, level) <= chord:
            return level
    raise ValueError(f"no subdivision level <= {max_level} yields a level-{m} net")


def generate_net(n: int, m: int, antipodal: bool = True, verify_samples: int = 10_000,
                 seed: int = 0, level: int | None = None) -> np.ndarray:
    """Unit vectors with ``max_i <y, x^i> >= m / sqrt(m^2+1)`` for every unit ``y``.

    With ``antipodal=True`` only one of each ``+-x`` pair is kept (points with
    first nonzero coordinate positive); the covering then holds for
    ``max_i |<y, x^i>|``, which is what even-degree cap polynomials see.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if m < 1:
        raise ValueError("m must be >= 1")
    level = net_level(n, m) if level is None else level
    pts = {}
    bary = _lattice_points(n, level)
    for signs in itertools.product((1, -1), repeat=n):
        S = bary * np.array(signs)
        for row in S:
            key = tuple(int(v) for v in row)
            if antipodal:
                nz = next(v for v in key if v != 0)
                if nz < 0:
                    key = tuple(-v for v in key)
            pts[key] = None
    keys = sorted(pts, reverse=True)
    net = np.array(keys, dtype=float)
    net /= np.linalg.norm(net, axis=1, keepdims=True)
    if verify_samples:
        cap = CapDisjunction(net, m, 2, level, antipodal)
        ok, witness = cap.covers(verify_samples, seed)
        if not ok:
            raise RuntimeError(f"net covering check failed at direction {witness}")
    return net


@lru_cache(maxsize=64)
def _lattice_points(n: int, level: int) -> np.ndarray:
    from .poly import _compositions

    return np.array(list(_compositions(level, n)), dtype=np.int64)


def build_cap_disjunction(n: int, m: int, dprime: int, **kw) -> CapDisjunction:
    level = kw.pop("level", None)
    level = net_level(n, m) if level is None else level
    net = generate_net(n, m, level=level, **kw)
    return CapDisjunction(net, m, dprime, level, kw.get("antipodal", True))
