"""Architecture search over cell DAGs by sparse Fourier recovery and restriction.

An architecture encoder is a +/-1 vector with one bit per (edge, operation)
pair; +1 activates the edge.  Bits are ordered by cell, then successor node,
then predecessor node, then operation index.  Within a cell, nodes ``0`` and
``1`` are the two previous cell outputs (``c_{k-2}``, ``c_{k-1}``) and the
intermediate nodes follow.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .fourier import (
    Restriction,
    SparsePolynomial,
    as_point,
    enumerate_basis,
    format_polynomial,
    minimize_over_support,
)
from .recovery import build_sampling_matrix, lasso, top_s

log = logging.getLogger(__name__)

DEFAULT_OPS = ("sep_conv_3x3", "sep_conv_5x5", "max_pool_3x3", "avg_pool_3x3", "identity")
IDENTITY = "identity"


@dataclass(frozen=True)
class CellSpec:
    name: str
    n_intermediate: int = 4
    n_inputs: int = 2
    ops: tuple = DEFAULT_OPS

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        if self.n_inputs < 1 or self.n_intermediate < 1 or not self.ops:
            raise ValueError(f"cell {self.name}: need inputs, intermediate nodes and operations")

    @property
    def intermediate(self) -> range:
        return range(self.n_inputs, self.n_inputs + self.n_intermediate)

    def node_name(self, j: int) -> str:
        if j < self.n_inputs:
            return f"c_{{k-{self.n_inputs - j}}}"
        return str(j - self.n_inputs)

    def edges(self) -> list:
        """``(pred, succ, op)`` in canonical order."""
        return [(pred, succ, op) for succ in self.intermediate for pred in range(succ) for op in self.ops]


@dataclass(frozen=True)
class ArchitectureSpace:
    cells: tuple

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(self.cells))

    @classmethod
    def standard(cls, n_intermediate: int = 4, ops=DEFAULT_OPS, cells=("normal", "reduce")):
        return cls(tuple(CellSpec(name, n_intermediate, 2, tuple(ops)) for name in cells))

    @property
    def edge_table(self) -> list:
        """``(cell index, pred, succ, op)`` for every encoder bit."""
        return [(c, *e) for c, cell in enumerate(self.cells) for e in cell.edges()]

    @property
    def n(self) -> int:
        return sum(len(cell.edges()) for cell in self.cells)

    @classmethod
    def from_config(cls, spec) -> "ArchitectureSpace":
        cells = []
        for i, entry in enumerate(spec.get("cells", [{"name": "normal"}, {"name": "reduce"}])):
            cells.append(CellSpec(
                name=str(entry.get("name", f"cell{i}")),
                n_intermediate=int(entry.get("intermediate_nodes", spec.get("intermediate_nodes", 4))),
                n_inputs=int(entry.get("input_nodes", 2)),
                ops=tuple(entry.get("ops", spec.get("ops", DEFAULT_OPS))),
            ))
        return cls(tuple(cells))


@dataclass(frozen=True)
class Cell:
    """A decoded cell: the active ``(pred, succ, op)`` edges."""

    spec: CellSpec
    edges: tuple

    def incoming(self, node: int) -> list:
        return [e for e in self.edges if e[1] == node]

    def describe(self) -> str:
        lines = [f"cell {self.spec.name}",
                 "nodes " + " ".join(self.spec.node_name(j) for j in range(self.spec.n_inputs + self.spec.n_intermediate))]
        for pred, succ, op in self.edges:
            lines.append(f"edge {self.spec.node_name(pred)} -> {self.spec.node_name(succ)} {op}")
        return "\n".join(lines)


def _edge_order(spec: CellSpec, edge) -> tuple:
    pred, succ, op = edge
    op_rank = spec.ops.index(op) if op in spec.ops else len(spec.ops)
    return succ, pred, op_rank


def decode_cell(space: ArchitectureSpace, alpha) -> list:
    """Per cell, the edges whose encoder bit is +1, in canonical order."""
    a = as_point(alpha, space.n)
    cells, pos = [], 0
    for spec in space.cells:
        edges = spec.edges()
        bits = a[pos:pos + len(edges)]
        cells.append(Cell(spec, tuple(e for e, b in zip(edges, bits) if b > 0)))
        pos += len(edges)
    return cells


def encode_cells(space: ArchitectureSpace, cells) -> np.ndarray:
    """Inverse of :func:`decode_cell` for edges that have an encoder bit."""
    out = -np.ones(space.n, dtype=np.int8)
    pos = 0
    for spec, cell in zip(space.cells, cells):
        index = {e: pos + k for k, e in enumerate(spec.edges())}
        for e in cell.edges:
            if e not in index:
                raise ValueError(f"edge {e} has no encoder bit in cell {spec.name}")
            out[index[e]] = 1
        pos += len(index)
    return out


def repair_cell(cell: Cell) -> Cell:
    """Give every intermediate node without inputs an identity edge from ``c_{k-2}``."""
    missing = [j for j in cell.spec.intermediate if not cell.incoming(j)]
    if not missing:
        return cell
    edges = list(cell.edges) + [(0, j, IDENTITY) for j in missing]
    return Cell(cell.spec, tuple(sorted(edges, key=lambda e: _edge_order(cell.spec, e))))


def hamming(a, b) -> int:
    a, b = as_point(a), as_point(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    return int(np.count_nonzero(a != b))


def sample_encoder(n: int, restriction: Restriction | None, p: float, rng: np.random.Generator,
                   count: int | None = None) -> np.ndarray:
    """Encoders with free bits +1 w.p. ``p`` and fixed bits copied from ``restriction``.

    Returns one point, or a ``(count, n)`` batch when ``count`` is given.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie strictly between 0 and 1, got {p}")
    size = 1 if count is None else count
    pts = np.where(rng.random((size, n)) < p, 1, -1).astype(np.int8)
    if restriction is not None and restriction.fixed:
        if restriction.n != n:
            raise ValueError("restriction dimension does not match the encoder length")
        idx = np.fromiter(restriction.fixed.keys(), dtype=np.int64)
        pts[:, idx] = np.fromiter(restriction.fixed.values(), dtype=np.int8)
    return pts[0] if count is None else pts


@dataclass
class StageReport:
    stage: int
    n_free: int
    g: SparsePolynomial
    z: dict
    min_value: float
    y_stats: dict
    iterations: int
    converged: bool


@dataclass
class SearchState:
    n: int
    restriction: Restriction
    stages: list = field(default_factory=list)
    measurements: list = field(default_factory=list)
    stop_reason: str | None = None
    unfixed_value: int = -1

    @property
    def stage(self) -> int:
        return len(self.stages)

    def alpha_star(self) -> np.ndarray:
        out = np.full(self.n, self.unfixed_value, dtype=np.int8)
        for i, v in self.restriction.fixed.items():
            out[i] = v
        return out


class StageFailure(RuntimeError):
    pass


def recover_stage(points, y, restriction: Restriction, d: int, s: int, lam: float, stage: int = 1):
    """Lasso fit over the free coordinates and exhaustive minimization of its top terms.

    Returns a :class:`StageReport` whose ``g`` and ``z`` use global indices.
    Raises :class:`StageFailure` if the solver does not converge.
    """
    free = restriction.free
    X = np.asarray(points, dtype=np.int8)[:, list(free)]
    basis = enumerate_basis(len(free), min(d, len(free)))
    A = build_sampling_matrix(X, basis)
    sol = lasso(A, y, lam)
    if not sol.converged:
        raise StageFailure(f"stage {stage}: lasso did not converge after {sol.iterations} sweeps "
                           f"(m={X.shape[0]}, columns={len(basis)}, lam={lam})")
    g_local = top_s(sol, s, basis)
    z_local, val = minimize_over_support(g_local)
    g = SparsePolynomial(restriction.n, {tuple(free[i] for i in S): c for S, c in g_local.terms.items()})
    z = {free[i]: v for i, v in z_local.items()}
    y = np.asarray(y, dtype=np.float64)
    stats = {"count": int(y.size), "mean": float(y.mean()), "std": float(y.std()),
             "min": float(y.min()), "max": float(y.max())}
    return StageReport(stage, len(free), g, z, val, stats, sol.iterations, sol.converged)


def measure(evaluator, points, workers: int = 1) -> np.ndarray:
    """Evaluate every encoder; values come back in sample order."""
    if workers <= 1:
        return np.array([float(evaluator(a)) for a in points])
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return np.array(list(pool.map(lambda a: float(evaluator(a)), points)))


def conas_search(space, evaluator, m: int, t: int = 1, s: int = 10, d: int = 2, lam: float = 1.0,
                 p: float = 0.5, *, seed=0, workers: int = 1, restriction: Restriction | None = None):
    """Multi-stage recover-and-restrict search.

    ``space`` is an :class:`ArchitectureSpace` or a plain encoder length.
    Each stage draws ``m`` encoders consistent with the current restriction,
    fits a degree-``d`` lasso over the still-free bits, minimizes the top-``s``
    polynomial and fixes its support to the minimizer.  Bits never fixed end
    up inactive (-1).  Returns ``(alpha_star, state)``.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if t < 1:
        raise ValueError("t must be >= 1")
    n = space if isinstance(space, int) else space.n
    state = SearchState(n, restriction or Restriction(n))
    for stage in range(1, t + 1):
        if not state.restriction.free:
            state.stop_reason = f"no free bits left before stage {stage}"
            break
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stage,)))
        pts = sample_encoder(n, state.restriction, p, rng, count=m)
        y = measure(evaluator, pts, workers)
        if not np.all(np.isfinite(y)):
            raise ValueError(f"stage {stage}: evaluator returned non-finite losses")
        state.measurements.append((pts, y))
        try:
            report = recover_stage(pts, y, state.restriction, d, s, lam, stage)
        except StageFailure as exc:
            log.error("%s", exc)
            state.stop_reason = str(exc)
            break
        state.stages.append(report)
        if not report.z:
            state.stop_reason = f"stage {stage}: recovered polynomial has no variables; stopping"
            break
        state.restriction = state.restriction.extend(report.z)
    return state.alpha_star(), state


def write_search_report(path, alpha_star, state: SearchState, space: ArchitectureSpace | None = None,
                        meta: dict | None = None) -> None:
    lines = [f"# {k}: {v}" for k, v in (meta or {}).items()]
    lines.append(f"# unfixed bits set to {state.unfixed_value}")
    for rep in state.stages:
        lines.append(f"[stage {rep.stage}]")
        lines.append(f"free_bits: {rep.n_free}")
        lines.append("measurements: " + " ".join(f"{k}={v:.6g}" for k, v in rep.y_stats.items()))
        lines.append(f"lasso_sweeps: {rep.iterations}")
        lines.append("z: " + " ".join(f"{i + 1}={'+' if v > 0 else '-'}" for i, v in sorted(rep.z.items())))
        lines.append(f"g_min: {rep.min_value!r}")
        lines.append("g:")
        lines.extend("  " + ln for ln in format_polynomial(rep.g).splitlines())
    if state.stop_reason:
        lines.append(f"stopped: {state.stop_reason}")
    lines.append("alpha_star: " + "".join("+" if v > 0 else "-" for v in alpha_star))
    if space is not None:
        lines.append("")
        lines.append(describe_cells(space, alpha_star).rstrip("\n"))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def describe_cells(space: ArchitectureSpace, alpha_star, repair: bool = True) -> str:
    cells = decode_cell(space, alpha_star)
    if repair:
        cells = [repair_cell(c) for c in cells]
    return "\n\n".join(c.describe() for c in cells) + "\n"
