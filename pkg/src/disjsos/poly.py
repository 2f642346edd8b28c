"""Sparse multivariate polynomials over exact rationals or floats.

A polynomial is a map from exponent tuples to nonzero coefficients.  Two
scalar modes exist: ``"rational"`` (``fractions.Fraction`` coefficients, used
for certificate verification) and ``"float"`` (used on solver-facing paths).
Arithmetic between the two modes raises :class:`ModeError`; convert
explicitly with :meth:`Polynomial.to_float` / :meth:`Polynomial.to_rational`.

Instances are immutable after construction.
"""

from __future__ import annotations

import json
import math
import numbers
import re
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

RATIONAL = "rational"
FLOAT = "float"
MODES = (RATIONAL, FLOAT)


class ModeError(TypeError):
    """Raised on mixed rational/float arithmetic."""


class ParseError(ValueError):
    def __init__(self, message: str, text: str, pos: int):
        line = text.count("\n", 0, pos) + 1
        col = pos - (text.rfind("\n", 0, pos) + 1) + 1
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.column = col


# -- multi-indices -----------------------------------------------------------

def grlex_key(alpha: Sequence[int]):
    """Sort key: total degree first, then lexicographic with x1 dominant."""
    return (sum(alpha), tuple(-a for a in alpha))


def monomials(nvars: int, degree: int, exact: bool = True) -> list[tuple[int, ...]]:
    """All exponent tuples of total ``degree`` (or ``<= degree``) in grlex order."""
    degs = [degree] if exact else range(degree + 1)
    out = []
    for k in degs:
        out.extend(_compositions(k, nvars))
    out.sort(key=grlex_key)
    return out


def _compositions(total: int, parts: int):
    if parts == 0:
        if total == 0:
            yield ()
        return
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def multinomial(alpha: Sequence[int]) -> int:
    out = math.factorial(sum(alpha))
    for a in alpha:
        out //= math.factorial(a)
    return out


# -- scalar coercion ---------------------------------------------------------

def _coerce(value, mode: str):
    if mode == RATIONAL:
        if isinstance(value, Fraction):
            return value
        if isinstance(value, (bool, numbers.Integral)):
            return Fraction(int(value))
        if isinstance(value, str):
            return Fraction(value)
        raise ModeError(f"cannot use {type(value).__name__} {value!r} in rational mode")
    if isinstance(value, (numbers.Real, Fraction)):
        return float(value)
    if isinstance(value, str):
        return float(Fraction(value))
    raise TypeError(f"not a scalar: {value!r}")


def to_rational_scalar(value, max_denominator: int | None = None) -> Fraction:
    """Explicit float -> rational conversion (exact unless ``max_denominator``)."""
    if isinstance(value, str):
        f = Fraction(value)
    else:
        f = Fraction(value) if not isinstance(value, float) else Fraction(value)
    if max_denominator is not None:
        f = f.limit_denominator(max_denominator)
    return f


# -- linear maps -------------------------------------------------------------

class LinearMap:
    """Square matrix used as a change of variables ``x -> Vx``.

    Rational maps keep a tuple-of-tuples of ``Fraction``; float maps keep a
    read-only numpy array.
    """

    __slots__ = ("mode", "n", "_rows", "_array", "_cond")

    def __init__(self, matrix, mode: str | None = None):
        if isinstance(matrix, LinearMap):
            matrix = matrix.rows if (mode or matrix.mode) == RATIONAL else matrix.array
        if mode is None:
            mode = FLOAT if isinstance(matrix, np.ndarray) and matrix.dtype.kind == "f" else None
            if mode is None:
                try:
                    rows = [[_coerce(v, RATIONAL) for v in row] for row in matrix]
                    mode = RATIONAL
                except ModeError:
                    mode = FLOAT
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        self.mode = mode
        if mode == RATIONAL:
            rows = tuple(tuple(_coerce(v, RATIONAL) for v in row) for row in matrix)
            self._rows = rows
            self._array = np.array([[float(v) for v in row] for row in rows], dtype=float)
        else:
            arr = np.array(matrix, dtype=float)
            self._rows = None
            self._array = arr
        self._array.setflags(write=False)
        if self._array.ndim != 2 or self._array.shape[0] != self._array.shape[1]:
            raise ValueError(f"linear map must be square, got shape {self._array.shape}")
        self.n = self._array.shape[0]
        self._cond = None

    @property
    def array(self) -> np.ndarray:
        return self._array

    @property
    def rows(self):
        if self.mode != RATIONAL:
            raise ModeError("float linear map has no exact rows")
        return self._rows

    def entry(self, i: int, j: int):
        return self._rows[i][j] if self.mode == RATIONAL else float(self._array[i, j])

    @property
    def cond(self) -> float:
        if self._cond is None:
            self._cond = float(np.linalg.cond(self._array))
        return self._cond

    @property
    def invertible(self) -> bool:
        return bool(np.isfinite(self.cond) and self.cond < 1e14)

    def columns(self) -> list[np.ndarray]:
        return [self._array[:, j].copy() for j in range(self.n)]

    def to_float(self) -> "LinearMap":
        return self if self.mode == FLOAT else LinearMap(self._array.copy(), FLOAT)

    def __matmul__(self, other: "LinearMap") -> "LinearMap":
        if not isinstance(other, LinearMap):
            other = LinearMap(other, self.mode)
        if other.mode != self.mode:
            raise ModeError("cannot multiply rational and float linear maps")
        if self.mode == FLOAT:
            return LinearMap(self._array @ other._array, FLOAT)
        n = self.n
        rows = [[sum((self._rows[i][k] * other._rows[k][j] for k in range(n)), Fraction(0))
                 for j in range(n)] for i in range(n)]
        return LinearMap(rows, RATIONAL)

    def __eq__(self, other):
        if not isinstance(other, LinearMap) or other.mode != self.mode:
            return NotImplemented
        if self.mode == RATIONAL:
            return self._rows == other._rows
        return bool(np.array_equal(self._array, other._array))

    def __hash__(self):
        return hash((self.mode, self._rows if self._rows is not None else self._array.tobytes()))

    def __repr__(self):
        return f"LinearMap({self._array.tolist()!r}, mode={self.mode!r})"

    def tolist(self):
        if self.mode == RATIONAL:
            return [[str(v) for v in row] for row in self._rows]
        return self._array.tolist()


# -- polynomials -------------------------------------------------------------

class Polynomial:
    __slots__ = ("nvars", "mode", "_terms", "_degree")

    def __init__(self, nvars: int, terms: Mapping[Sequence[int], object] | None = None,
                 mode: str = RATIONAL):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        self.nvars = int(nvars)
        self.mode = mode
        clean: dict[tuple[int, ...], object] = {}
        for exp, c in (terms or {}).items():
            exp = tuple(int(a) for a in exp)
            if len(exp) != self.nvars:
                raise ValueError(f"exponent {exp} has length {len(exp)}, expected {self.nvars}")
            if any(a < 0 for a in exp):
                raise ValueError(f"negative exponent in {exp}")
            c = _coerce(c, mode)
            if exp in clean:
                c = clean[exp] + c
            if c:
                clean[exp] = c
            else:
                clean.pop(exp, None)
        self._terms = clean
        self._degree = max((sum(e) for e in clean), default=-1)

    # construction helpers
    @classmethod
    def _raw(cls, nvars: int, terms: dict, mode: str) -> "Polynomial":
        # trusted path: terms already coerced and pruned
        obj = cls.__new__(cls)
        obj.nvars = nvars
        obj.mode = mode
        obj._terms = terms
        obj._degree = max((sum(e) for e in terms), default=-1)
        return obj

    @classmethod
    def constant(cls, nvars: int, value, mode: str = RATIONAL) -> "Polynomial":
        return cls(nvars, {(0,) * nvars: value}, mode)

    @classmethod
    def zero(cls, nvars: int, mode: str = RATIONAL) -> "Polynomial":
        return cls._raw(nvars, {}, mode)

    @classmethod
    def variable(cls, nvars: int, index: int, mode: str = RATIONAL) -> "Polynomial":
        exp = [0] * nvars
        exp[index] = 1
        return cls(nvars, {tuple(exp): 1}, mode)

    @classmethod
    def variables(cls, nvars: int, mode: str = RATIONAL) -> list["Polynomial"]:
        return [cls.variable(nvars, i, mode) for i in range(nvars)]

    @classmethod
    def monomial(cls, exp: Sequence[int], coef=1, mode: str = RATIONAL) -> "Polynomial":
        return cls(len(exp), {tuple(exp): coef}, mode)

    @classmethod
    def linear_form(cls, coefs: Sequence, mode: str = RATIONAL) -> "Polynomial":
        n = len(coefs)
        terms = {}
        for i, c in enumerate(coefs):
            e = [0] * n
            e[i] = 1
            terms[tuple(e)] = c
        return cls(n, terms, mode)

    @classmethod
    def quadratic_form(cls, Q, mode: str = RATIONAL) -> "Polynomial":
        """``x^T Q x`` for a square (symmetric or not) matrix ``Q``."""
        rows = Q.rows if isinstance(Q, LinearMap) and mode == RATIONAL else (
            Q.array if isinstance(Q, LinearMap) else Q)
        n = len(rows)
        terms: dict = {}
        for i in range(n):
            for j in range(n):
                e = [0] * n
                e[i] += 1
                e[j] += 1
                e = tuple(e)
                terms[e] = terms.get(e, 0) + _coerce(rows[i][j], mode)
        return cls(n, terms, mode)

    # basic properties
    @property
    def degree(self) -> int:
        """Total degree; ``-1`` for the zero polynomial."""
        return self._degree

    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def items(self):
        """Terms in graded-lex order (deterministic)."""
        for e in sorted(self._terms, key=grlex_key):
            yield e, self._terms[e]

    def coeff(self, exp: Sequence[int]):
        return self._terms.get(tuple(exp), _coerce(0, self.mode))

    def __len__(self):
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_homogeneous(self) -> bool:
        return len({sum(e) for e in self._terms}) <= 1

    def min_degree(self) -> int:
        return min((sum(e) for e in self._terms), default=-1)

    def variable_degree_bounds(self) -> list[tuple[int, int]]:
        """Per-variable (min, max) exponent over the support."""
        if not self._terms:
            return [(0, 0)] * self.nvars
        exps = np.array(list(self._terms), dtype=int).reshape(-1, self.nvars)
        return [(int(lo), int(hi)) for lo, hi in zip(exps.min(axis=0), exps.max(axis=0))]

    # conversion
    def to_float(self) -> "Polynomial":
        if self.mode == FLOAT:
            return self
        return Polynomial._raw(self.nvars, {e: float(c) for e, c in self._terms.items()
                                            if float(c) != 0.0}, FLOAT)

    def to_rational(self, max_denominator: int | None = None) -> "Polynomial":
        if self.mode == RATIONAL and max_denominator is None:
            return self
        return Polynomial(self.nvars, {e: to_rational_scalar(c, max_denominator)
                                       for e, c in self._terms.items()}, RATIONAL)

    def with_nvars(self, nvars: int) -> "Polynomial":
        """Embed into more variables (appended, unused)."""
        if nvars < self.nvars:
            raise ValueError("cannot drop variables with with_nvars")
        pad = (0,) * (nvars - self.nvars)
        return Polynomial._raw(nvars, {e + pad: c for e, c in self._terms.items()}, self.mode)

    def prune(self, tol: float) -> "Polynomial":
        """Drop float coefficients with ``|c| <= tol``."""
        return Polynomial._raw(self.nvars, {e: c for e, c in self._terms.items() if abs(c) > tol},
                               self.mode)

    # arithmetic
    def _check(self, other: "Polynomial"):
        if other.mode != self.mode:
            raise ModeError(f"mixed-mode arithmetic ({self.mode} vs {other.mode})")
        if other.nvars != self.nvars:
            raise ValueError(f"dimension mismatch: {self.nvars} vs {other.nvars} variables")

    def _lift(self, other):
        if isinstance(other, Polynomial):
            self._check(other)
            return other
        return Polynomial.constant(self.nvars, other, self.mode)

    def __add__(self, other):
        other = self._lift(other)
        out = dict(self._terms)
        for e, c in other._terms.items():
            v = out.get(e, 0) + c
            if v:
                out[e] = v
            else:
                out.pop(e, None)
        return Polynomial._raw(self.nvars, out, self.mode)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial._raw(self.nvars, {e: -c for e, c in self._terms.items()}, self.mode)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def scale(self, s) -> "Polynomial":
        s = _coerce(s, self.mode)
        if not s:
            return Polynomial.zero(self.nvars, self.mode)
        return Polynomial._raw(self.nvars, {e: c * s for e, c in self._terms.items()}, self.mode)

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            return self.scale(other)
        self._check(other)
        out: dict = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return Polynomial._raw(self.nvars, {e: c for e, c in out.items() if c}, self.mode)

    def __rmul__(self, other):
        return self.scale(other)

    def __truediv__(self, s):
        s = _coerce(s, self.mode)
        return self.scale(1 / s)

    def __pow__(self, k: int):
        if not isinstance(k, numbers.Integral) or k < 0:
            raise ValueError("only nonnegative integer powers are supported")
        result = Polynomial.constant(self.nvars, 1, self.mode)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            if isinstance(other, numbers.Number):
                return self == Polynomial.constant(self.nvars, other, self.mode) if (
                    self.mode == FLOAT or not isinstance(other, float)) else NotImplemented
            return NotImplemented
        return (self.nvars == other.nvars and self.mode == other.mode
                and self._terms == other._terms)

    def __hash__(self):
        return hash((self.nvars, self.mode, frozenset(self._terms.items())))

    # evaluation
    def __call__(self, x):
        return evaluate(self, x)

    def exponent_matrix(self) -> tuple[np.ndarray, np.ndarray]:
        """(T x n exponent array, length-T float coefficient array), grlex order."""
        items = list(self.items())
        E = np.array([e for e, _ in items], dtype=int).reshape(len(items), self.nvars)
        c = np.array([float(v) for _, v in items], dtype=float)
        return E, c

    def evaluate_many(self, X: np.ndarray, chunk: int = 4096) -> np.ndarray:
        """Float evaluation at the rows of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.nvars:
            raise ValueError(f"dimension mismatch: points have {X.shape[1]} coordinates, "
                             f"polynomial has {self.nvars} variables")
        E, c = self.exponent_matrix()
        out = np.empty(X.shape[0])
        if len(c) == 0:
            out[:] = 0.0
            return out
        dmax = int(E.max()) if E.size else 0
        for s in range(0, X.shape[0], chunk):
            Xc = X[s:s + chunk]
            # powers[k][i, j] = Xc[i, j] ** k
            powers = np.ones((dmax + 1,) + Xc.shape)
            for k in range(1, dmax + 1):
                powers[k] = powers[k - 1] * Xc
            mon = np.ones((Xc.shape[0], len(c)))
            for j in range(self.nvars):
                mon *= powers[E[:, j], :, j].T
            out[s:s + chunk] = mon @ c
        return out

    def partial(self, i: int) -> "Polynomial":
        out = {}
        for e, c in self._terms.items():
            if e[i]:
                ne = list(e)
                ne[i] -= 1
                out[tuple(ne)] = c * e[i]
        return Polynomial._raw(self.nvars, out, self.mode)

    # text and json
    def __str__(self):
        return to_text(self)

    def __repr__(self):
        return f"Polynomial({self.nvars}, {to_text(self)!r}, mode={self.mode!r})"

    def to_json(self) -> dict:
        return {
            "nvars": self.nvars,
            "mode": self.mode,
            "terms": [{"exp": list(e), "coef": _coef_str(c)} for e, c in self.items()],
        }

    @classmethod
    def from_json(cls, data) -> "Polynomial":
        if isinstance(data, str):
            data = json.loads(data)
        mode = data.get("mode", RATIONAL)
        terms = {}
        for t in data["terms"]:
            c = t["coef"]
            if mode == RATIONAL:
                c = Fraction(str(c))
            else:
                c = float(Fraction(c)) if isinstance(c, str) and "/" in c else float(c)
            e = tuple(t["exp"])
            terms[e] = terms.get(e, 0) + c
        return cls(int(data["nvars"]), terms, mode)


def _coef_str(c) -> str:
    if isinstance(c, Fraction):
        return str(c)
    return repr(float(c))


# -- module-level operations -------------------------------------------------

def evaluate(p: Polynomial, x):
    """``sum_a c_a x^a``.  Exact if ``p`` is rational and ``x`` holds ints/Fractions."""
    x = list(x)
    if len(x) != p.nvars:
        raise ValueError(f"dimension mismatch: point has {len(x)} coordinates, "
                         f"polynomial has {p.nvars} variables")
    exact = p.mode == RATIONAL and all(isinstance(v, (numbers.Integral, Fraction)) for v in x)
    if exact:
        xs = [Fraction(v) for v in x]
        total = Fraction(0)
        for e, c in p._terms.items():
            term = c
            for xi, a in zip(xs, e):
                if a:
                    term *= xi ** a
            total += term
        return total
    xs = [float(v) for v in x]
    total = 0.0
    for e, c in p._terms.items():
        term = float(c)
        for xi, a in zip(xs, e):
            if a:
                term *= xi ** a
        total += term
    return total


def gradient(p: Polynomial, x) -> np.ndarray:
    """Gradient of ``p`` at ``x`` as a float vector."""
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != p.nvars:
        raise ValueError(f"dimension mismatch: point has {x.shape[0]} coordinates, "
                         f"polynomial has {p.nvars} variables")
    g = np.zeros(p.nvars)
    for e, c in p._terms.items():
        c = float(c)
        for i, a in enumerate(e):
            if a == 0:
                continue
            term = c * a
            for j, b in enumerate(e):
                k = b - 1 if j == i else b
                if k:
                    term *= x[j] ** k
            g[i] += term
    return g


def compose_linear(p: Polynomial, V) -> Polynomial:
    """Return ``q`` with ``q(x) = p(Vx)``."""
    if not isinstance(V, LinearMap):
        V = LinearMap(V, p.mode)
    if V.n != p.nvars:
        raise ValueError(f"dimension mismatch: map is {V.n}x{V.n}, polynomial has "
                         f"{p.nvars} variables")
    if V.mode != p.mode:
        raise ModeError(f"cannot compose {p.mode} polynomial with {V.mode} linear map")
    n = p.nvars
    if p.mode == RATIONAL:
        forms = [Polynomial.linear_form(V.rows[i], RATIONAL) for i in range(n)]
    else:
        forms = [Polynomial.linear_form(list(V.array[i]), FLOAT) for i in range(n)]
    cache: dict[tuple[int, int], Polynomial] = {}

    def power(i: int, k: int) -> Polynomial:
        key = (i, k)
        if key not in cache:
            if k == 0:
                cache[key] = Polynomial.constant(n, 1, p.mode)
            elif k == 1:
                cache[key] = forms[i]
            else:
                cache[key] = power(i, k - 1) * forms[i]
        return cache[key]

    out: dict = {}
    for e, c in p._terms.items():
        prod = None
        for i, a in enumerate(e):
            if a:
                prod = power(i, a) if prod is None else prod * power(i, a)
        if prod is None:
            prod = Polynomial.constant(n, 1, p.mode)
        for ee, cc in prod._terms.items():
            out[ee] = out.get(ee, 0) + c * cc
    return Polynomial._raw(n, {e: c for e, c in out.items() if c}, p.mode)


def homogenize(p: Polynomial, d: int) -> Polynomial:
    """``x_{n+1}^d p(x / x_{n+1})`` as a form in ``n + 1`` variables."""
    if d < p.degree:
        raise ValueError(f"homogenization degree {d} is below deg p = {p.degree}")
    return Polynomial._raw(p.nvars + 1, {e + (d - sum(e),): c for e, c in p._terms.items()},
                           p.mode)


def dehomogenize(p: Polynomial, var: int) -> Polynomial:
    """Substitute ``x_var = 1`` and drop that variable (0-based index)."""
    if not 0 <= var < p.nvars:
        raise IndexError(f"variable index {var} out of range for {p.nvars} variables")
    out: dict = {}
    for e, c in p._terms.items():
        ne = e[:var] + e[var + 1:]
        out[ne] = out.get(ne, 0) + c
    return Polynomial._raw(p.nvars - 1, {e: c for e, c in out.items() if c}, p.mode)


def substitute_squares(p: Polynomial) -> Polynomial:
    """``p(x.^2)``: every exponent doubles."""
    return Polynomial._raw(p.nvars, {tuple(2 * a for a in e): c for e, c in p._terms.items()},
                           p.mode)


def norms(p: Polynomial):
    """``(||p||_inf, ||p||_1)`` in the monomial basis."""
    vals = [abs(c) for c in p._terms.values()]
    zero = _coerce(0, p.mode)
    return (max(vals, default=zero), sum(vals, zero))


def sphere_power(nvars: int, k: int, mode: str = RATIONAL) -> Polynomial:
    """``||x||_2^(2k)`` expanded."""
    sq = Polynomial(nvars, {tuple(2 if j == i else 0 for j in range(nvars)): 1
                            for i in range(nvars)}, mode)
    return sq ** k


# -- text format -------------------------------------------------------------

def to_text(p: Polynomial) -> str:
    if p.is_zero():
        return "0"
    parts = []
    for e, c in sorted(p._terms.items(), key=lambda t: (sum(t[0]), t[0]), reverse=True):
        mono = "*".join(f"x{i + 1}" + (f"^{a}" if a > 1 else "") for i, a in enumerate(e) if a)
        neg = c < 0
        mag = -c if neg else c
        cs = _coef_str(mag)
        if mono:
            body = mono if mag == 1 else f"{cs}*{mono}"
        else:
            body = cs
        if not parts:
            parts.append(("-" if neg else "") + body)
        else:
            parts.append((" - " if neg else " + ") + body)
    return "".join(parts)


_TOKEN = re.compile(r"\s*(?:(\d+(?:\.\d*)?(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?)"
                    r"|(x(\d+))|(\*\*|[-+*/^()]))")


def parse(text: str, nvars: int | None = None, mode: str = RATIONAL) -> Polynomial:
    """Parse text such as ``x1^4*x2^2 - 3*x1^2*x2^2*x3^2 + x3^6``.

    Variables are ``x1 .. xn``.  Supports ``+ - * / ^ **`` and parentheses;
    division only by constants.  Numbers are read exactly in rational mode.
    """
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {text[bad]!r}", text, bad)
        start = m.start(m.lastindex)
        if m.group(1) is not None:
            tokens.append(("num", m.group(1), start))
        elif m.group(2) is not None:
            idx = int(m.group(3))
            if idx < 1:
                raise ParseError("variables are numbered from x1", text, start)
            tokens.append(("var", idx, start))
        else:
            op = m.group(4)
            tokens.append(("op", "^" if op == "**" else op, start))
        pos = m.end()
    tokens.append(("end", None, len(text)))
    n = nvars if nvars is not None else max((t[1] for t in tokens if t[0] == "var"), default=0)
    for kind, val, at in tokens:
        if kind == "var" and val > n:
            raise ParseError(f"variable x{val} exceeds nvars={n}", text, at)

    i = 0

    def peek():
        return tokens[i]

    def take():
        nonlocal i
        tok = tokens[i]
        i += 1
        return tok

    def expect(op):
        tok = take()
        if tok[0] != "op" or tok[1] != op:
            raise ParseError(f"expected {op!r}", text, tok[2])

    def expr():
        sign = 1
        tok = peek()
        if tok[0] == "op" and tok[1] in "+-":
            take()
            sign = -1 if tok[1] == "-" else 1
        acc = term()
        if sign < 0:
            acc = -acc
        while peek()[0] == "op" and peek()[1] in "+-":
            op = take()[1]
            rhs = term()
            acc = acc + rhs if op == "+" else acc - rhs
        return acc

    def term():
        acc = factor()
        while peek()[0] == "op" and peek()[1] in "*/":
            op, at = take()[1], peek()[2]
            rhs = factor()
            if op == "*":
                acc = acc * rhs
            else:
                if rhs.degree > 0:
                    raise ParseError("division by a non-constant", text, at)
                if rhs.is_zero():
                    raise ParseError("division by zero", text, at)
                acc = acc / rhs.coeff((0,) * n)
        return acc

    def factor():
        base = atom()
        if peek()[0] == "op" and peek()[1] == "^":
            take()
            tok = take()
            if tok[0] != "num" or not tok[1].isdigit():
                raise ParseError("exponent must be a nonnegative integer", text, tok[2])
            base = base ** int(tok[1])
        return base

    def atom():
        tok = take()
        kind, val, at = tok
        if kind == "num":
            return Polynomial.constant(n, Fraction(val) if mode == RATIONAL else float(val), mode)
        if kind == "var":
            return Polynomial.variable(n, val - 1, mode)
        if kind == "op" and val == "(":
            inner = expr()
            expect(")")
            return inner
        if kind == "op" and val == "-":
            return -factor()
        if kind == "end":
            raise ParseError("unexpected end of input", text, at)
        raise ParseError(f"unexpected token {val!r}", text, at)

    result = expr()
    tok = peek()
    if tok[0] != "end":
        raise ParseError(f"unexpected token {tok[1]!r}", text, tok[2])
    return result


def from_iterable_terms(nvars: int, items: Iterable[tuple[Sequence[int], object]],
                        mode: str = RATIONAL) -> Polynomial:
    terms: dict = {}
    for e, c in items:
        e = tuple(e)
        terms[e] = terms.get(e, 0) + _coerce(c, mode)
    return Polynomial(nvars, terms, mode)
