"""Instance library and brute-force oracles.

The oracles here never touch a conic solver: grid minimization over the
simplex or the sphere, and exact maximum clique search.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .copositive import PnCertificate, PnRegion
from .poly import FLOAT, RATIONAL, LinearMap, Polynomial, parse
from .sos import RegionProof, SosCertificate, SosPart, verify_certificate


@dataclass
class NamedInstance:
    name: str
    kind: str  # form | matrix | graph | certificate
    payload: object
    note: str = ""


# -- classical forms ---------------------------------------------------------

_FORMS = {
    "motzkin": (3, "x1^4*x2^2 + x1^2*x2^4 - 3*x1^2*x2^2*x3^2 + x3^6"),
    "robinson-1": (3, "x1^6 + x2^6 + x3^6 - (x1^4*x2^2 + x1^2*x2^4 + x1^4*x3^2 + x1^2*x3^4"
                      " + x2^4*x3^2 + x2^2*x3^4) + 3*x1^2*x2^2*x3^2"),
    "robinson-2": (4, "x1^2*(x1-x4)^2 + x2^2*(x2-x4)^2 + x3^2*(x3-x4)^2"
                      " + 2*x1*x2*x3*(x1+x2+x3-2*x4)"),
    "choi-lam-1": (4, "x1^2*x2^2 + x1^2*x3^2 + x2^2*x3^2 + x4^4 - 4*x4*x1*x2*x3"),
    "choi-lam-2": (3, "x1^4*x2^2 + x2^4*x3^2 + x3^4*x1^2 - 3*x1^2*x2^2*x3^2"),
    "schmudgen": (3, "200*(x1^3 - 4*x1*x3^2)^2 + 200*(x2^3 - 4*x2*x3^2)^2"
                     " + (x2^2 - x1^2)*x1*(x1 + 2*x3)*(x1^2 - 2*x1*x3 + 2*x2^2 - 8*x3^2)"),
    "partition": (6, "(x1+x2+x3+x4+x5)^2*x6^2 + (x1^2-x6^2)^2 + (x2^2-x6^2)^2"
                     " + (x3^2-x6^2)^2 + (x4^2-x6^2)^2 + (x5^2-x6^2)^2"),
    "delzell": (4, "x1^4*x2^2*x4^2 + x2^4*x3^2*x4^2 + x1^2*x3^4*x4^2"
                   " - 3*x1^2*x2^2*x3^2*x4^2 + x3^8"),
}

FORM_SUITE = ["Motzkin", "Robinson-1", "Robinson-2", "Choi-Lam-1", "Choi-Lam-2", "Lax",
          "Schmudgen", "PARTITION", "Delzell", "Stengle-1", "Stengle-2", "Stengle-3",
          "Stengle-4", "Stengle-5"]

# target subregion counts (orthant init, regular-simplex init) per form
FORM_COUNTS = {
    "Motzkin": (4, 7), "Robinson-1": (4, 8), "Robinson-2": (8, 19), "Choi-Lam-1": (5, 15),
    "Choi-Lam-2": (4, 8), "Lax": (98, 149), "Schmudgen": (4, 5), "PARTITION": (69, 161),
    "Delzell": (8, 5), "Stengle-1": (4, 10), "Stengle-2": (4, 4), "Stengle-3": (4, 4),
    "Stengle-4": (4, 4), "Stengle-5": (4, 4),
}

QP_COUNTS = {1: 2, 2: 42, 3: 5, 4: 17}


def _norm_name(name: str) -> str:
    return name.strip().lower().replace("ü", "u").replace("_", "-").replace(" ", "-")


def lax_form(mode: str = RATIONAL) -> Polynomial:
    xs = Polynomial.variables(5, mode)
    total = Polynomial.zero(5, mode)
    for i in range(5):
        term = Polynomial.constant(5, 1, mode)
        for j in range(5):
            if j != i:
                term = term * (xs[i] - xs[j])
        total = total + term
    return total


def stengle_form(k: int, mode: str = RATIONAL) -> Polynomial:
    if k < 1:
        raise ValueError("Stengle-k needs k >= 1")
    a = 2 * k + 1
    text = f"x1^{a}*x3^{a} + (x2^2*x3^{2 * k - 1} - x1^{a} - x1*x3^{2 * k})^2"
    return parse(text, 3, mode)


def classic_form(name: str, mode: str = RATIONAL) -> Polynomial:
    """A suite form by name (case-insensitive; ``Stengle-k`` for any k >= 1)."""
    key = _norm_name(name)
    if key in _FORMS:
        n, text = _FORMS[key]
        return parse(text, n, mode)
    if key == "lax":
        return lax_form(mode)
    m = re.fullmatch(r"stengle-?(\d+)", key)
    if m:
        return stengle_form(int(m.group(1)), mode)
    raise KeyError(f"unknown instance {name!r}; known: {', '.join(FORM_SUITE)}, Stengle-k")


def motzkin_affine(mode: str = RATIONAL) -> Polynomial:
    """Two-variable Motzkin polynomial (the ``x3 = 1`` slice of the form)."""
    return parse("x1^4*x2^2 + x1^2*x2^4 - 3*x1^2*x2^2 + 1", 2, mode)


# -- matrices ----------------------------------------------------------------

def horn_matrix() -> list[list[Fraction]]:
    rows = [[1, -1, 1, 1, -1],
            [-1, 1, -1, 1, 1],
            [1, -1, 1, -1, 1],
            [1, 1, -1, 1, -1],
            [-1, 1, 1, -1, 1]]
    return [[Fraction(v) for v in r] for r in rows]


def horn_generators() -> list[LinearMap]:
    h = Fraction(1, 2)
    V1 = [[1, 0, 0, 0, 0], [0, 1, 0, 0, 0], [0, 0, 1, 0, 0], [0, 0, 0, 1, h], [0, 0, 0, 0, h]]
    V2 = [[1, 0, 0, 0, 0], [0, 1, 0, 0, 0], [0, 0, 1, 0, 0], [0, 0, 0, h, 0], [0, 0, 0, h, 1]]
    return [LinearMap(V1, RATIONAL), LinearMap(V2, RATIONAL)]


_Q2 = """
1 0 0 0 0 0 1 1 1 1 1 1
0 1 0 0 1 1 0 0 1 1 1 1
0 0 1 1 0 1 0 1 0 1 1 1
0 0 1 1 1 0 1 0 1 0 1 1
0 1 0 1 1 0 1 1 0 1 0 1
0 1 1 0 0 1 1 1 1 0 0 1
1 0 0 1 1 1 1 0 0 1 1 0
1 0 1 0 1 1 0 1 1 0 1 0
1 1 0 1 0 1 0 1 1 1 0 0
1 1 1 0 1 0 1 0 1 1 0 0
1 1 1 1 0 0 1 1 0 0 1 0
1 1 1 1 1 1 0 0 0 0 0 1
"""

_QP = {
    1: """
1 0 1 1 0
0 1 0 1 1
1 0 1 0 1
1 1 0 1 0
0 1 1 0 1
""",
    2: _Q2,
    3: """
-14 -15 -16 0 0
-15 -14 -12.5 -22.5 -15
-16 -12.5 -10 -26.5 -16
0 -22.5 -26.5 0 0
0 -15 -16 0 -14
""",
    4: """
0.9044 0.1054 0.5140 0.3322 0
0.1054 0.8715 0.7385 0.5866 0.9751
0.5140 0.7385 0.6936 0.5368 0.8086
0.3322 0.5866 0.5368 0.5633 0.7478
0 0.9751 0.8086 0.7478 1.2932
""",
}


def qp_instance(k: int) -> list[list[Fraction]]:
    """QP matrix ``Q_k`` as exact rationals (decimals read exactly)."""
    if k not in _QP:
        raise ValueError(f"QP instance must be 1..4, got {k}")
    return [[Fraction(v) for v in line.split()] for line in _QP[k].strip().splitlines()]


def to_float_matrix(M) -> np.ndarray:
    return np.array([[float(v) for v in row] for row in M])


# -- stored identities -------------------------------------------------------

def _sq(text: str, n: int, weight=1) -> tuple[Fraction, Polynomial]:
    return Fraction(weight), parse(text, n, RATIONAL)


def _region(h: Polynomial, base, mult) -> RegionProof:
    return RegionProof([h], [SosPart(squares=mult)], SosPart(squares=base), Fraction(0),
                       "exact")


def _two_sided(p: Polynomial, h: Polynomial, base_plus, mult_plus, base_minus, mult_minus,
               ) -> SosCertificate:
    """``p = base_plus + h*mult_plus = base_minus - h*mult_minus``."""
    regions = [_region(h, base_plus, mult_plus), _region(-h, base_minus, mult_minus)]
    return SosCertificate(p, regions, None, Fraction(0), float("nan"), "exact")


def stored_certificates() -> list[tuple[NamedInstance, object]]:
    """All stored exact identities; each verifies with residual exactly 0."""
    out = []
    M = motzkin_affine()

    # multiplier identity: (x1^2 + x2^2) M is a sum of squares
    target = parse("x1^2 + x2^2", 2) * M
    base = [_sq("x1*(1 - x2^2)", 2), _sq("x2*(1 - x1^2)", 2), _sq("x1*x2*(x1^2 + x2^2 - 2)", 2)]
    cert = SosCertificate(target, [RegionProof([], [], SosPart(squares=base), Fraction(0),
                                               "exact")], None, Fraction(0), float("nan"),
                          "exact")
    out.append((NamedInstance("motzkin-multiplier", "certificate", target,
                              "(x1^2+x2^2)*M is sos"), cert))

    h = parse("x1*x2", 2)
    cert = _two_sided(M, h,
                      [_sq("1 - x1*x2", 2), _sq("x1^2*x2 - x1*x2^2", 2)], [_sq("1 - x1*x2", 2, 2)],
                      [_sq("1 + x1*x2", 2), _sq("x1^2*x2 + x1*x2^2", 2)], [_sq("1 + x1*x2", 2, 2)])
    out.append((NamedInstance("motzkin-x1x2", "certificate", M, "split on +-x1*x2"), cert))

    h = parse("x1", 2)
    cert = _two_sided(M, h,
                      [_sq("1 - x1*x2^2", 2), _sq("x1^2*x2 - x1*x2", 2)], [_sq("x1*x2 - x2", 2, 2)],
                      [_sq("1 + x1*x2^2", 2), _sq("x1^2*x2 + x1*x2", 2)], [_sq("x1*x2 + x2", 2, 2)])
    out.append((NamedInstance("motzkin-x1", "certificate", M, "split on +-x1"), cert))

    h = parse("x1^4 - x2^4 - 2*x1^2 + 2*x2^2", 2)
    half = Fraction(1, 2)
    cert = _two_sided(M, h,
                      [_sq("x1^2*x2 + x2^3 - 2*x2", 2, half), _sq("x2^2 - 1", 2)],
                      [_sq("x2", 2, half)],
                      [_sq("x1^3 + x1*x2^2 - 2*x1", 2, half), _sq("x1^2 - 1", 2)],
                      [_sq("x1", 2, half)])
    out.append((NamedInstance("motzkin-quartic", "certificate", M, "split on a quartic h"), cert))

    CL1 = classic_form("Choi-Lam-1")
    cert = _two_sided(CL1, parse("x1*x2", 4),
                      [_sq("x1*x3 - x2*x3", 4), _sq("x1*x2 - x4^2", 4)], [_sq("-x3 + x4", 4, 2)],
                      [_sq("x1*x3 + x2*x3", 4), _sq("x1*x2 + x4^2", 4)], [_sq("x3 + x4", 4, 2)])
    out.append((NamedInstance("choi-lam-1", "certificate", CL1, "split on +-x1*x2"), cert))

    CL2 = classic_form("Choi-Lam-2")
    cert = _two_sided(CL2, parse("x1*x2", 3),
                      [_sq("-x1*x3^2 + x1^2*x2", 3), _sq("-x1*x2*x3 + x2^2*x3", 3)],
                      [_sq("-x1*x3 + x2*x3", 3, 2)],
                      [_sq("x1*x3^2 + x1^2*x2", 3), _sq("x1*x2*x3 + x2^2*x3", 3)],
                      [_sq("x1*x3 + x2*x3", 3, 2)])
    out.append((NamedInstance("choi-lam-2", "certificate", CL2, "split on +-x1*x2"), cert))

    S1 = classic_form("Stengle-1")
    F = Fraction
    cert = _two_sided(S1, parse("x1*x3", 3),
                      [_sq("-x1*x3^2 - x1^3 + x2^2*x3", 3)], [_sq("x1*x3", 3)],
                      [_sq("x1*x3^2 + 1/2*x1^2*x3 + 7/10*x1^3 - 6/7*x2^2*x3", 3),
                       _sq("x1*x2*x3", 3, F(1, 14)),
                       _sq("x1^2*x3 - x1^3 + 5/7*x2^2*x3", 3, F(7, 20)),
                       _sq("x1^3 - 5/7*x2^2*x3", 3, F(4, 25)),
                       _sq("x2^2*x3", 3, F(1, 196))],
                      [_sq("-1/2*x1*x2 + x2*x3", 3, F(2, 7))])
    out.append((NamedInstance("stengle-1", "certificate", S1, "split on +-x1*x3"), cert))

    H = horn_matrix()
    V1, V2 = horn_generators()
    P1 = [[1, -1, 1, -1, 0], [-1, 1, -1, 1, 0], [1, -1, 1, -1, 0], [-1, 1, -1, 1, 0],
          [0, 0, 0, 0, 0]]
    N1 = [[0, 0, 0, 2, 0], [0, 0, 0, 0, 1], [0, 0, 0, 0, 0], [2, 0, 0, 0, 0], [0, 1, 0, 0, 0]]
    P2 = [[1, -1, 1, 0, -1], [-1, 1, -1, 0, 1], [1, -1, 1, 0, -1], [0, 0, 0, 0, 0],
          [-1, 1, -1, 0, 1]]
    N2 = [[0, 0, 0, 0, 0], [0, 0, 0, 1, 0], [0, 0, 0, 0, 2], [0, 1, 0, 0, 0], [0, 0, 2, 0, 0]]
    fr = lambda A: [[Fraction(v) for v in r] for r in A]
    pn = PnCertificate(H, [PnRegion(V1, fr(P1), fr(N1)), PnRegion(V2, fr(P2), fr(N2))])
    out.append((NamedInstance("horn", "certificate", H, "disjunctive P+N on {V1, V2}"), pn))

    D = classic_form("Delzell")
    cert = _two_sided(D, parse("x1*x2", 4),
                      [_sq("x1^2*x2*x4 - x1*x3^2*x4", 4), _sq("x2^2*x3*x4 - x1*x2*x3*x4", 4),
                       _sq("x3^4", 4)],
                      [_sq("x1*x3*x4 - x2*x3*x4", 4, 2)],
                      [_sq("x1^2*x2*x4 + x1*x3^2*x4", 4), _sq("x2^2*x3*x4 + x1*x2*x3*x4", 4),
                       _sq("x3^4", 4)],
                      [_sq("x1*x3*x4 + x2*x3*x4", 4, 2)])
    out.append((NamedInstance("delzell", "certificate", D, "split on +-x1*x2"), cert))
    return out


paper_certificates = stored_certificates


def verify_stored(cert) -> object:
    """Residual of a stored identity (exact ``Fraction`` for rational data)."""
    if isinstance(cert, PnCertificate):
        return cert.verify()
    return verify_certificate(cert.target, cert)


# -- graphs ------------------------------------------------------------------

def erdos_renyi(n: int, p: float, seed: int | None = None) -> np.ndarray:
    if not 0 < p < 1:
        raise ValueError(f"edge probability must be in (0, 1), got {p}")
    rng = np.random.default_rng(seed)
    upper = np.triu(rng.random((n, n)) < p, k=1)
    return (upper | upper.T).astype(int)


def write_edge_list(adj) -> str:
    A = np.asarray(adj)
    lines = [f"# n {A.shape[0]}"]
    lines += [f"{i} {j}" for i in range(A.shape[0]) for j in range(i + 1, A.shape[0]) if A[i, j]]
    return "\n".join(lines) + "\n"


def read_edge_list(text: str, n: int | None = None) -> np.ndarray:
    """Edge list with 0-based vertex pairs; ``# n N`` sets the vertex count."""
    edges = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = re.match(r"#\s*n\s+(\d+)", line)
            if m and n is None:
                n = int(m.group(1))
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected two vertex ids, got {line!r}")
        i, j = int(parts[0]), int(parts[1])
        if i == j:
            raise ValueError(f"line {lineno}: self-loop {i}")
        edges.append((i, j))
    if n is None:
        n = 1 + max((max(e) for e in edges), default=-1)
    A = np.zeros((n, n), dtype=int)
    for i, j in edges:
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"edge ({i}, {j}) outside 0..{n - 1}")
        A[i, j] = A[j, i] = 1
    return A


# -- oracles -----------------------------------------------------------------

def _grid_blocks(total: int, parts: int):
    """All compositions of ``total`` into ``parts`` parts, in numpy blocks."""
    if parts == 1:
        yield np.array([[total]], dtype=np.int64)
        return
    if parts == 2:
        a = np.arange(total + 1)
        yield np.column_stack([a, total - a])
        return
    if parts == 3:
        rows = [(a, b, total - a - b) for a in range(total + 1) for b in range(total + 1 - a)]
        yield np.array(rows, dtype=np.int64)
        return
    for a in range(total + 1):
        for blk in _grid_blocks(total - a, parts - 1):
            yield np.column_stack([np.full(len(blk), a), blk])


def oracle_grid_min_simplex(Q, resolution: float = 1 / 120, max_points: float = 5e7) -> float:
    """Minimum of ``x^T Q x`` over the barycentric grid of step ``resolution``."""
    A = to_float_matrix(Q) if not isinstance(Q, np.ndarray) else np.asarray(Q, dtype=float)
    n = A.shape[0]
    N = int(round(1 / resolution))
    if n > 6 or math.comb(N + n - 1, n - 1) > max_points:
        raise ValueError(f"grid too large for n={n} at resolution 1/{N}")
    best = math.inf
    for blk in _grid_blocks(N, n):
        X = blk / N
        vals = np.einsum("ij,jk,ik->i", X, A, X)
        best = min(best, float(vals.min()))
    return best


def oracle_qp_value(Q, resolution: float = 1 / 120) -> float:
    """Simplex minimum of ``x^T Q x`` from an oracle that does not touch a solver.

    Uses the barycentric grid when it fits.  A larger 0/1 matrix with unit
    diagonal is read as ``I + A`` for the adjacency ``A`` of a graph's
    complement, whose simplex minimum is ``1/omega`` by Motzkin-Straus.
    """
    A = to_float_matrix(Q) if not isinstance(Q, np.ndarray) else np.asarray(Q, dtype=float)
    try:
        return oracle_grid_min_simplex(A, resolution)
    except ValueError:
        n = A.shape[0]
        off = A - np.eye(n)
        if not (np.allclose(np.diag(A), 1) and np.all((off == 0) | (off == 1))):
            raise
        adj = (1 - off - np.eye(n)).astype(int)
        return 1.0 / oracle_clique(adj)


def oracle_grid_min_sphere(p: Polynomial, resolution: float = 1 / 50,
                           max_points: float = 2e7) -> tuple[float, np.ndarray]:
    """Minimum of ``p`` over normalized points of a cube-surface grid.

    Points ``x`` with ``max |x_i| = 1`` on a grid of step ``resolution`` are
    projected onto the unit sphere.  For even forms only the ``x_i = +1``
    faces are needed.
    """
    n = p.nvars
    N = int(round(1 / resolution))
    axis = np.linspace(-1.0, 1.0, 2 * N + 1)
    even = p.is_homogeneous() and p.degree % 2 == 0
    faces = n * (1 if even else 2)
    count = faces * (2 * N + 1) ** (n - 1)
    if n > 6 or count > max_points:
        raise ValueError(f"sphere grid too large ({count:.3g} points)")
    pf = p.to_float()
    best, arg = math.inf, None
    for i in range(n):
        for s in ((1.0,) if even else (1.0, -1.0)):
            for head in itertools.product(range(2 * N + 1), repeat=max(n - 3, 0)):
                rest = n - 1 - len(head)
                mesh = np.meshgrid(*([axis] * rest), indexing="ij")
                cols = [np.full(mesh[0].size if rest else 1, axis[h]) for h in head]
                cols += [m.ravel() for m in mesh]
                Y = np.column_stack(cols) if cols else np.zeros((1, 0))
                X = np.insert(Y, i, s, axis=1)
                X /= np.linalg.norm(X, axis=1, keepdims=True)
                v = pf.evaluate_many(X)
                k = int(np.argmin(v))
                if v[k] < best:
                    best, arg = float(v[k]), X[k].copy()
    return best, arg


def oracle_clique(adjacency, max_n: int = 200) -> int:
    """Exact clique number by branch and bound with greedy-coloring bounds."""
    A = np.asarray(adjacency, dtype=bool)
    n = A.shape[0]
    if n > max_n:
        raise ValueError(f"graph too large for the clique oracle (n={n} > {max_n})")
    if n == 0:
        return 0
    nbrs = [frozenset(np.flatnonzero(A[i]).tolist()) for i in range(n)]
    best = 0

    def color_sort(cands: list[int]):
        classes: list[list[int]] = []
        for v in cands:
            for cls in classes:
                if not any(u in nbrs[v] for u in cls):
                    cls.append(v)
                    break
            else:
                classes.append([v])
        order, bounds = [], []
        for k, cls in enumerate(classes, 1):
            for v in cls:
                order.append(v)
                bounds.append(k)
        return order, bounds

    def expand(size: int, cands: list[int]):
        nonlocal best
        order, bounds = color_sort(cands)
        for idx in range(len(order) - 1, -1, -1):
            if size + bounds[idx] <= best:
                return
            v = order[idx]
            new = [u for u in order[:idx] if u in nbrs[v]]
            if new:
                expand(size + 1, new)
            elif size + 1 > best:
                best = size + 1

    start = sorted(range(n), key=lambda v: -len(nbrs[v]))
    expand(0, start)
    return best
