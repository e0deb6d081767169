"""Sparse recovery of Fourier coefficients from sampled function values.

Both solvers work on the row-normalized system ``A / sqrt(m)``, ``y / sqrt(m)``
so that coefficients stay in Fourier units and ``lam`` is independent of the
number of measurements.  Objectives, in those normalized units:

* lasso:        ||y - A x||^2 + lam * ||x||_1
* group lasso:  1/2 ||y - A x||^2 + lam * sum_l w_l ||x_l||_2
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

from .fourier import BasisFamily, DimensionError, SparsePolynomial, as_points, parity_columns

log = logging.getLogger(__name__)

TOL = 1e-8
MAX_ITERS = 10_000


@dataclass(frozen=True)
class MeasurementMatrix:
    """Parity matrix ``entries[l, k] = chi_{S_k}(points[l])`` with its basis."""

    entries: np.ndarray = field(repr=False)
    basis: BasisFamily | None = None

    @property
    def shape(self):
        return self.entries.shape

    @property
    def scale(self) -> float:
        m = self.entries.shape[0]
        return 1.0 / math.sqrt(m) if m else 1.0

    def normalized(self) -> np.ndarray:
        return np.asfortranarray(self.entries, dtype=np.float64) * self.scale


def build_sampling_matrix(points, basis: BasisFamily) -> MeasurementMatrix:
    X = as_points(points, basis.n)
    if X.shape[0]:
        _, counts = np.unique(X, axis=0, return_counts=True)
        dup = int(np.sum(counts - 1))
        if dup:
            log.warning("%d duplicate sample point(s) kept in the measurement matrix", dup)
    return MeasurementMatrix(parity_columns(X, basis.indices), basis)


def _as_system(A, y):
    """Return the float system actually solved and the row scale applied."""
    if isinstance(A, MeasurementMatrix):
        M, scale = A.normalized(), A.scale
    else:
        M, scale = np.asfortranarray(A, dtype=np.float64), 1.0
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1 or y.shape[0] != M.shape[0]:
        raise DimensionError(f"y has shape {y.shape}, expected ({M.shape[0]},)")
    if not np.all(np.isfinite(y)):
        raise ValueError("measurement vector contains non-finite entries")
    return M, y * scale


@dataclass
class RecoverySolution:
    coef: np.ndarray
    objective: float
    iterations: int
    converged: bool
    objective_trace: np.ndarray = field(default=None, repr=False)

    @property
    def nonzero(self) -> np.ndarray:
        return np.flatnonzero(self.coef)


def lasso_objective(A, y, x, lam: float) -> float:
    M, ys = _as_system(A, y)
    r = ys - M @ x
    return float(r @ r + lam * np.abs(x).sum())


@numba.njit(cache=True)
def _cd_sweep(M, r, x, col_sq, lam, cols):
    max_step = 0.0
    half = 0.5 * lam
    m = M.shape[0]
    for j in cols:
        if col_sq[j] == 0.0:
            continue
        old = x[j]
        rho = col_sq[j] * old
        for i in range(m):
            rho += M[i, j] * r[i]
        if rho > half:
            new = (rho - half) / col_sq[j]
        elif rho < -half:
            new = (rho + half) / col_sq[j]
        else:
            new = 0.0
        delta = new - old
        if delta != 0.0:
            for i in range(m):
                r[i] -= M[i, j] * delta
            x[j] = new
            if abs(delta) > max_step:
                max_step = abs(delta)
    return max_step


@numba.njit(cache=True)
def _cd_lasso(M, y, lam, x, tol, max_iters):
    m, p = M.shape
    col_sq = np.empty(p)
    for j in range(p):
        s = 0.0
        for i in range(m):
            s += M[i, j] * M[i, j]
        col_sq[j] = s
    r = y - M @ x
    trace = np.empty(max_iters)
    all_cols = np.arange(p)
    iters = 0
    converged = False
    while iters < max_iters:
        # full sweep, then polish the active set until it settles
        step = _cd_sweep(M, r, x, col_sq, lam, all_cols)
        trace[iters] = r @ r + lam * np.abs(x).sum()
        iters += 1
        if step < tol:
            converged = True
            break
        active = np.flatnonzero(x)
        while iters < max_iters:
            step = _cd_sweep(M, r, x, col_sq, lam, active)
            trace[iters] = r @ r + lam * np.abs(x).sum()
            iters += 1
            if step < tol:
                break
    return x, iters, converged, trace[:iters]


def lasso(A, y, lam: float, *, tol: float = TOL, max_iters: int = MAX_ITERS, x0=None) -> RecoverySolution:
    """Cyclic coordinate descent for ``min ||y - Ax||^2 + lam ||x||_1``.

    ``A`` is a :class:`MeasurementMatrix` (rows normalized by 1/sqrt(m), ``y``
    likewise) or a plain array used as given.  Convergence means the largest
    coordinate change in a full sweep fell below ``tol``; otherwise the last
    iterate is returned with ``converged=False``.
    """
    if lam < 0:
        raise ValueError("lam must be non-negative")
    M, ys = _as_system(A, y)
    x = np.zeros(M.shape[1]) if x0 is None else np.array(x0, dtype=np.float64)
    x, iters, converged, trace = _cd_lasso(M, ys, float(lam), x, float(tol), int(max_iters))
    r = ys - M @ x
    obj = float(r @ r + lam * np.abs(x).sum())
    if not converged:
        log.warning("lasso did not converge in %d sweeps", iters)
    return RecoverySolution(x, obj, int(iters), bool(converged), trace.copy())


@dataclass(frozen=True)
class GroupStructure:
    """A partition of matrix columns into weighted blocks.

    Weights default to ``sqrt(block size)``.
    """

    groups: tuple
    weights: np.ndarray = None
    labels: tuple = None

    def __post_init__(self):
        groups = tuple(np.asarray(g, dtype=np.int64) for g in self.groups)
        if any(g.size == 0 for g in groups):
            raise ValueError("groups must be non-empty")
        object.__setattr__(self, "groups", groups)
        w = self.weights
        if w is None:
            w = np.sqrt([g.size for g in groups])
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (len(groups),) or np.any(w < 0):
            raise ValueError("need one non-negative weight per group")
        object.__setattr__(self, "weights", w)
        if self.labels is not None and len(self.labels) != len(groups):
            raise ValueError("need one label per group")

    @property
    def n_columns(self) -> int:
        return int(sum(g.size for g in self.groups))

    def validate(self, p: int) -> None:
        cols = np.concatenate(self.groups) if self.groups else np.zeros(0, dtype=np.int64)
        if cols.size != p or not np.array_equal(np.sort(cols), np.arange(p)):
            raise ValueError(f"groups do not partition the {p} columns")

    @classmethod
    def from_assignment(cls, assignment: Sequence, weights: dict | None = None) -> "GroupStructure":
        """Build from a per-column group label; labels keep first-seen order."""
        order: dict = {}
        for k, label in enumerate(assignment):
            order.setdefault(label, []).append(k)
        labels = tuple(order)
        w = None if weights is None else [weights.get(l, math.sqrt(len(order[l]))) for l in labels]
        return cls(tuple(order.values()), w, labels)


def group_lasso_objective(A, groups: GroupStructure, y, x, lam: float) -> float:
    M, ys = _as_system(A, y)
    r = ys - M @ x
    pen = sum(w * np.linalg.norm(x[g]) for g, w in zip(groups.groups, groups.weights))
    return float(0.5 * r @ r + lam * pen)


@numba.njit(cache=True)
def _bcd_group_lasso(M, y, x, cols, starts, Ls, thresh, tol, max_iters, inner_iters):
    m = M.shape[0]
    r = y - M @ x
    trace = np.empty(max_iters)
    iters = 0
    converged = False
    while iters < max_iters:
        max_step = 0.0
        for b in range(Ls.shape[0]):
            L = Ls[b]
            if L == 0.0:
                continue
            g = cols[starts[b]:starts[b + 1]]
            k = g.shape[0]
            old = x[g]
            cur = old.copy()
            z = np.empty(k)
            for _ in range(inner_iters):
                # proximal gradient step on this block: z = cur + M_g^T r / L
                for a in range(k):
                    acc = 0.0
                    j = g[a]
                    for i in range(m):
                        acc += M[i, j] * r[i]
                    z[a] = cur[a] + acc / L
                nz = np.sqrt(z @ z)
                t = thresh[b] / L
                scale = 0.0 if nz <= t else 1.0 - t / nz
                inner_step = 0.0
                for a in range(k):
                    d = scale * z[a] - cur[a]
                    if d != 0.0:
                        j = g[a]
                        for i in range(m):
                            r[i] -= M[i, j] * d
                        cur[a] += d
                        if abs(d) > inner_step:
                            inner_step = abs(d)
                if inner_step < 0.1 * tol:
                    break
            for a in range(k):
                step = abs(cur[a] - old[a])
                if step > max_step:
                    max_step = step
                x[g[a]] = cur[a]
        pen = 0.0
        for b in range(Ls.shape[0]):
            g = cols[starts[b]:starts[b + 1]]
            xg = x[g]
            pen += thresh[b] * np.sqrt(xg @ xg)
        trace[iters] = 0.5 * (r @ r) + pen
        iters += 1
        if max_step < tol:
            converged = True
            break
    return x, iters, converged, trace[:iters]


def group_lasso(A, groups: GroupStructure, y, lam: float, *, tol: float = TOL,
                max_iters: int = MAX_ITERS, x0=None, inner_iters: int = 100) -> RecoverySolution:
    """Block coordinate descent for the weighted group lasso.

    Each block is minimized by proximal-gradient steps with step ``1/L`` where
    ``L`` is the block's largest squared singular value; a block with
    orthonormal columns is solved exactly in one step.
    """
    if lam < 0:
        raise ValueError("lam must be non-negative")
    M, ys = _as_system(A, y)
    p = M.shape[1]
    groups.validate(p)
    x = np.zeros(p) if x0 is None else np.array(x0, dtype=np.float64)
    cols = np.concatenate(groups.groups).astype(np.int64)
    starts = np.concatenate([[0], np.cumsum([g.size for g in groups.groups])]).astype(np.int64)
    Ls = np.array([float(np.linalg.norm(M[:, g], 2) ** 2) if M.shape[0] else 0.0 for g in groups.groups])
    thresh = lam * groups.weights
    x, iters, converged, trace = _bcd_group_lasso(
        np.asfortranarray(M), ys, x, cols, starts, Ls, thresh, float(tol), int(max_iters), int(inner_iters))
    if not converged:
        log.warning("group lasso did not converge in %d sweeps", iters)
    obj = group_lasso_objective(M, groups, ys, x, lam)
    return RecoverySolution(x, obj, int(iters), bool(converged), trace.copy())


def top_s(sol, s: int, basis: BasisFamily) -> SparsePolynomial:
    """Keep the ``s`` largest-magnitude coefficients as a polynomial.

    Ties go to the earlier basis column.  ``sol`` may be a
    :class:`RecoverySolution` or a coefficient vector.
    """
    if s < 1:
        raise ValueError("s must be at least 1")
    coef = np.asarray(sol.coef if isinstance(sol, RecoverySolution) else sol, dtype=np.float64)
    if coef.shape != (len(basis),):
        raise DimensionError("coefficient vector does not match the basis")
    nz = np.flatnonzero(coef)
    order = nz[np.lexsort((nz, -np.abs(coef[nz])))][:s]
    return SparsePolynomial(basis.n, {basis[k]: coef[k] for k in order})


def save_matrix_text(path, M) -> None:
    """Row-major, space-separated dump (one matrix row per line)."""
    arr = M.entries if isinstance(M, MeasurementMatrix) else np.asarray(M)
    arr = np.atleast_2d(arr) if arr.ndim else arr.reshape(1, 1)
    fmt = "%d" if np.issubdtype(arr.dtype, np.integer) else "%.17g"
    np.savetxt(path, arr, fmt=fmt, delimiter=" ")


def load_matrix_text(path) -> np.ndarray:
    return np.loadtxt(path, dtype=np.float64, ndmin=2)


def save_vector_text(path, v) -> None:
    np.savetxt(path, np.asarray(v, dtype=np.float64).reshape(1, -1), fmt="%.17g", delimiter=" ")


def load_vector_text(path) -> np.ndarray:
    return np.loadtxt(path, dtype=np.float64, ndmin=1).reshape(-1)
