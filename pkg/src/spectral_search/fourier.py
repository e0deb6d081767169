"""
Fourier analysis of real-valued functions on the hypercube {-1,+1}^n.

Points are numpy arrays of -1/+1 entries.  A monomial is a sorted tuple of
0-based variable indices; ``()`` is the constant monomial.  Text
serialization uses 1-based indices.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

ZERO_TOL = 1e-12
ORACLE_CAP = 20
SUPPORT_CAP = 25

Monomial = tuple


class DimensionError(ValueError):
    """Point, monomial, or polynomial dimensions disagree."""


class CapExceededError(ValueError):
    """A brute-force routine was asked to enumerate beyond its configured cap."""


def as_point(alpha, n: int | None = None) -> np.ndarray:
    """Validate and return ``alpha`` as an int8 array of +/-1 values."""
    a = np.asarray(alpha)
    if a.ndim != 1:
        raise DimensionError(f"a point must be one-dimensional, got shape {a.shape}")
    if n is not None and a.shape[0] != n:
        raise DimensionError(f"point has dimension {a.shape[0]}, expected {n}")
    if not np.all((a == 1) | (a == -1)):
        raise ValueError("point entries must be exactly -1 or +1")
    return a.astype(np.int8)


def as_points(alphas, n: int | None = None) -> np.ndarray:
    """Validate a batch of points and return an (m, n) int8 array."""
    a = np.asarray(alphas)
    if a.ndim == 1:
        a = a.reshape(1, -1) if a.size else a.reshape(0, n or 0)
    if a.ndim != 2:
        raise DimensionError(f"expected an (m, n) array of points, got shape {a.shape}")
    if n is not None and a.shape[1] != n:
        raise DimensionError(f"points have dimension {a.shape[1]}, expected {n}")
    if not np.all((a == 1) | (a == -1)):
        raise ValueError("point entries must be exactly -1 or +1")
    return a.astype(np.int8)


def hypercube(n: int) -> np.ndarray:
    """All 2^n points in lexicographic order with -1 < +1.

    Row ``k`` has ``alpha[i] = +1`` iff bit ``n-1-i`` of ``k`` is set, so row 0
    is all -1 and the first coordinate is the most significant.
    """
    k = np.arange(2**n, dtype=np.int64)[:, None]
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)[None, :]
    bits = (k >> shifts) & 1
    return (2 * bits - 1).astype(np.int8)


def _check_monomial(S, n: int) -> tuple:
    S = tuple(int(i) for i in S)
    if any(b <= a for a, b in zip(S, S[1:])):
        raise ValueError(f"monomial {S} is not strictly increasing")
    if S and (S[0] < 0 or S[-1] >= n):
        raise DimensionError(f"monomial {S} has an index outside [0, {n})")
    return S


def parity(S: Iterable[int], alpha) -> int:
    """The parity function chi_S(alpha) = prod_{i in S} alpha_i.

    >>> parity((0, 2), [1, -1, -1, 1])
    -1
    """
    a = as_point(alpha)
    S = _check_monomial(S, a.shape[0])
    return int(np.prod(a[list(S)], dtype=np.int64)) if S else 1


def parity_columns(points: np.ndarray, monomials: Iterable[tuple]) -> np.ndarray:
    """Matrix of parities, entry (l, k) = chi_{S_k}(points[l]), as int8."""
    X = np.asarray(points, dtype=np.int8)
    monomials = list(monomials)
    out = np.empty((X.shape[0], len(monomials)), dtype=np.int8)
    # group by degree so each degree is one vectorized gather-and-multiply
    by_degree: dict[int, list[int]] = {}
    for k, S in enumerate(monomials):
        by_degree.setdefault(len(S), []).append(k)
    for deg, cols in by_degree.items():
        cols = np.asarray(cols)
        if deg == 0:
            out[:, cols] = 1
            continue
        idx = np.array([monomials[k] for k in cols], dtype=np.int64)
        prod = X[:, idx[:, 0]].copy()
        for j in range(1, deg):
            prod *= X[:, idx[:, j]]
        out[:, cols] = prod
    return out


@dataclass(frozen=True)
class BasisFamily:
    """All monomials over ``n`` variables of degree at most ``d``.

    Ordered by ascending degree, then lexicographically on the variables.
    """

    n: int
    d: int
    indices: tuple = field(repr=False)

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __getitem__(self, k):
        return self.indices[k]

    def position(self, S) -> int:
        return self._positions[tuple(S)]

    @property
    def _positions(self) -> dict:
        cache = self.__dict__.get("_pos_cache")
        if cache is None:
            cache = {S: k for k, S in enumerate(self.indices)}
            object.__setattr__(self, "_pos_cache", cache)
        return cache


def basis_size(n: int, d: int) -> int:
    return sum(math.comb(n, l) for l in range(d + 1))


def enumerate_basis(n: int, d: int) -> BasisFamily:
    """Canonically ordered degree-<=d monomials over n variables."""
    if n < 0 or d < 0:
        raise ValueError("n and d must be non-negative")
    if d > n:
        raise ValueError(f"degree d={d} exceeds dimension n={n}")
    indices = tuple(S for l in range(d + 1) for S in itertools.combinations(range(n), l))
    return BasisFamily(n=n, d=d, indices=indices)


@dataclass(frozen=True)
class SparsePolynomial:
    """A multilinear polynomial stored as {monomial: coefficient}.

    Zero coefficients are dropped on construction, so an empty mapping is the
    zero function.  Terms are kept in canonical (degree, lexicographic) order.
    """

    n: int
    terms: Mapping[tuple, float] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for S, c in dict(self.terms).items():
            S = _check_monomial(S, self.n)
            c = float(c)
            if not math.isfinite(c):
                raise ValueError(f"coefficient of {S} is not finite")
            if c != 0.0:
                clean[S] = clean.get(S, 0.0) + c
        ordered = {S: clean[S] for S in sorted(clean, key=lambda S: (len(S), S)) if clean[S] != 0.0}
        object.__setattr__(self, "terms", ordered)

    @property
    def degree(self) -> int:
        return max((len(S) for S in self.terms), default=0)

    @property
    def support_vars(self) -> tuple:
        return tuple(sorted({i for S in self.terms for i in S}))

    def __len__(self) -> int:
        return len(self.terms)

    def __call__(self, alpha) -> float:
        return poly_eval(self, alpha)

    def evaluate_many(self, points) -> np.ndarray:
        X = as_points(points, self.n)
        if not self.terms:
            return np.zeros(X.shape[0])
        chi = parity_columns(X, self.terms.keys()).astype(np.float64)
        return chi @ np.fromiter(self.terms.values(), dtype=np.float64)

    def as_vector(self, basis: BasisFamily) -> np.ndarray:
        """Coefficients laid out along ``basis``; every term must be in it."""
        if basis.n != self.n:
            raise DimensionError("basis and polynomial dimensions differ")
        x = np.zeros(len(basis))
        for S, c in self.terms.items():
            x[basis.position(S)] = c
        return x

    def to_text(self) -> str:
        return format_polynomial(self)


def poly_eval(p: SparsePolynomial, alpha) -> float:
    """Evaluate ``sum_S p[S] * chi_S(alpha)`` exactly over the stored terms."""
    a = as_point(alpha, p.n)
    total = 0.0
    for S, c in p.terms.items():
        total += c * (int(np.prod(a[list(S)], dtype=np.int64)) if S else 1)
    return total


def truth_table(p: SparsePolynomial) -> np.ndarray:
    """Values of ``p`` on :func:`hypercube` order."""
    return p.evaluate_many(hypercube(p.n))


def _table_dim(table: np.ndarray) -> int:
    size = table.shape[0]
    n = size.bit_length() - 1
    if table.ndim != 1 or size != 2**n:
        raise DimensionError(f"evaluation table must have 2^n entries, got {table.shape}")
    return n


def brute_force_transform(table, cap: int = ORACLE_CAP, tol: float = ZERO_TOL) -> SparsePolynomial:
    """Exact Fourier transform of a full evaluation table.

    ``table[k]`` is f at ``hypercube(n)[k]``.  Each coefficient is the uniform
    average of ``f * chi_S``, computed by contracting the 2x2 averaging
    matrix along every axis of the table reshaped to ``(2,)*n``.  Coefficients
    with magnitude <= ``tol`` are dropped.
    """
    f = np.asarray(table, dtype=np.float64)
    n = _table_dim(f)
    if n > cap:
        raise CapExceededError(
            f"brute-force transform refused: n={n} exceeds the oracle cap of {cap}"
        )
    t = f.reshape((2,) * n) if n else f.reshape(())
    # axis value 0 is alpha_i=-1, 1 is alpha_i=+1; output index 1 means i in S
    avg = np.array([[0.5, 0.5], [-0.5, 0.5]])
    for axis in range(n):
        t = np.moveaxis(np.tensordot(avg, t, axes=([1], [axis])), 0, axis)
    coeffs = t.reshape(-1)
    terms = {}
    for k in np.flatnonzero(np.abs(coeffs) > tol):
        S = tuple(i for i in range(n) if (int(k) >> (n - 1 - i)) & 1)
        terms[S] = coeffs[k]
    return SparsePolynomial(n, terms)


def fourier_coefficient(table, S) -> float:
    """One coefficient by the definition: mean of f(alpha) chi_S(alpha)."""
    f = np.asarray(table, dtype=np.float64)
    n = _table_dim(f)
    S = _check_monomial(S, n)
    chi = parity_columns(hypercube(n), [S])[:, 0]
    return float(np.mean(f * chi))


@dataclass(frozen=True)
class Restriction:
    """Fixed values for a subset of coordinates; the rest are free."""

    n: int
    fixed: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for i, v in dict(self.fixed).items():
            i, v = int(i), int(v)
            if not 0 <= i < self.n:
                raise DimensionError(f"fixed index {i} outside [0, {self.n})")
            if v not in (-1, 1):
                raise ValueError(f"fixed value for {i} must be -1 or +1")
            clean[i] = v
        object.__setattr__(self, "fixed", dict(sorted(clean.items())))

    @property
    def free(self) -> tuple:
        return tuple(i for i in range(self.n) if i not in self.fixed)

    def extend(self, assignment: Mapping[int, int]) -> "Restriction":
        """Fix more coordinates; already-fixed ones may not change."""
        clash = [i for i in assignment if i in self.fixed]
        if clash:
            raise ValueError(f"coordinates {clash} are already fixed")
        return Restriction(self.n, {**self.fixed, **assignment})

    def merge(self, free_values) -> np.ndarray:
        """Full point from values for the free coordinates (in ``free`` order)."""
        free = self.free
        x = as_point(free_values, len(free)) if free else np.zeros(0, dtype=np.int8)
        out = np.empty(self.n, dtype=np.int8)
        out[list(free)] = x
        for i, v in self.fixed.items():
            out[i] = v
        return out

    def agrees(self, alpha) -> bool:
        a = as_point(alpha, self.n)
        return all(a[i] == v for i, v in self.fixed.items())


def restrict(p: SparsePolynomial, r: Restriction) -> SparsePolynomial:
    """Substitute the fixed coordinates of ``r`` into ``p``.

    The result lives on the free coordinates, re-indexed ``0..len(r.free)-1``
    in increasing order of the original index.
    """
    if p.n != r.n:
        raise DimensionError(f"polynomial has n={p.n}, restriction has n={r.n}")
    local = {i: k for k, i in enumerate(r.free)}
    out: dict[tuple, float] = {}
    for S, c in p.terms.items():
        sign = 1
        rest = []
        for i in S:
            if i in r.fixed:
                sign *= r.fixed[i]
            else:
                rest.append(local[i])
        key = tuple(rest)
        out[key] = out.get(key, 0.0) + sign * c
    return SparsePolynomial(len(local), {S: c for S, c in out.items() if abs(c) > 0.0})


def minimize_over_support(p: SparsePolynomial, cap: int = SUPPORT_CAP, chunk: int = 1 << 16):
    """Exhaustive minimization of ``p`` over the subcube of its support variables.

    Returns ``(z, value)`` where ``z`` maps each support variable to -1/+1.
    Assignments are scanned in lexicographic order (-1 < +1, lowest index
    most significant) and the first minimizer wins ties.
    """
    vars_ = p.support_vars
    k = len(vars_)
    if k > cap:
        raise CapExceededError(
            f"support has {k} variables, above the enumeration cap of {cap}; lower s"
        )
    if k == 0:
        return {}, p.terms.get((), 0.0)
    pos = {v: j for j, v in enumerate(vars_)}
    local_terms = [(tuple(pos[i] for i in S), c) for S, c in p.terms.items()]
    best_val, best_idx = math.inf, -1
    total = 2**k
    shifts = np.arange(k - 1, -1, -1, dtype=np.int64)[None, :]
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        X = (2 * ((idx[:, None] >> shifts) & 1) - 1).astype(np.int8)
        vals = np.zeros(idx.shape[0])
        for S, c in local_terms:
            if S:
                vals += c * np.prod(X[:, list(S)], axis=1, dtype=np.int64)
            else:
                vals += c
        j = int(np.argmin(vals))
        if vals[j] < best_val:
            best_val, best_idx = float(vals[j]), int(idx[j])
    z = {v: (1 if (best_idx >> (k - 1 - j)) & 1 else -1) for j, v in enumerate(vars_)}
    return z, best_val


def format_polynomial(p: SparsePolynomial) -> str:
    """One ``indices : coefficient`` line per term, 1-based, constant as ``0``."""
    lines = []
    for S, c in p.terms.items():
        key = ",".join(str(i + 1) for i in S) if S else "0"
        lines.append(f"{key} : {c!r}")
    return "\n".join(lines) + ("\n" if lines else "")


def parse_polynomial(text: str, n: int) -> SparsePolynomial:
    terms = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            key, value = (part.strip() for part in line.split(":"))
            S = () if key == "0" else tuple(int(i) - 1 for i in key.split(","))
            terms[S] = float(value)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: cannot parse polynomial term {line!r}") from exc
    return SparsePolynomial(n, terms)
