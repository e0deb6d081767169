"""Successive Halving, Hyperband, and Hyperband with sparse-recovery sampling.

Evaluators are called as ``evaluator(point, resource) -> loss``.  A call that
raises or returns a non-finite value is recorded with loss ``inf`` and the
run continues; a :class:`ProtocolError` from an external evaluator aborts.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .encoding import HyperparamSpace, group_columns
from .evaluators import EvaluationHistory, ProtocolError, resource_key
from .fourier import Restriction, SparsePolynomial, enumerate_basis, minimize_over_support
from .recovery import RecoverySolution, build_sampling_matrix, group_lasso, top_s

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SchedulerConfig:
    """Resource ``R`` per configuration, discard factor ``eta``, ``cycles`` outer loops."""

    R: float
    eta: float = 3
    cycles: int = 1

    def __post_init__(self):
        if not self.R >= 1:
            raise ValueError(f"R must be >= 1, got {self.R}")
        if not self.eta >= 2:
            raise ValueError(f"eta must be >= 2, got {self.eta}")
        if int(self.cycles) != self.cycles or self.cycles < 1:
            raise ValueError(f"cycles must be a positive integer, got {self.cycles}")

    @property
    def s_max(self) -> int:
        # floor(log_eta R) without floating-point log
        R, eta = Fraction(self.R), Fraction(self.eta)
        s = 0
        while eta ** (s + 1) <= R:
            s += 1
        return s

    @property
    def B(self) -> float:
        return (self.s_max + 1) * self.R

    def bracket(self, s: int) -> tuple:
        """``(n, r)`` for bracket ``s``: n = ceil(B/R * eta^s/(s+1)), r = R eta^-s."""
        if not 0 <= s <= self.s_max:
            raise ValueError(f"bracket {s} outside 0..{self.s_max}")
        eta = Fraction(self.eta)
        n = math.ceil(Fraction(self.s_max + 1) * eta**s / (s + 1))
        r = Fraction(self.R) / eta**s
        return n, float(r)

    def rounds(self, s: int) -> list:
        """``[(n_i, r_i)]`` for ``i = 0..s`` inside bracket ``s``."""
        n, _ = self.bracket(s)
        eta = Fraction(self.eta)
        return [(math.floor(n / eta**i), float(Fraction(self.R) * eta ** (i - s))) for i in range(s + 1)]

    def sh_rounds(self) -> list:
        """Plain Successive Halving rounds: start with n = R configs at r = 1."""
        eta = Fraction(self.eta)
        n = math.floor(Fraction(self.R))
        return [(math.floor(n / eta**i), float(eta**i)) for i in range(self.s_max + 1)]

    def keep(self, n_i: int) -> int:
        return math.floor(Fraction(n_i) / Fraction(self.eta))


@dataclass(frozen=True)
class PgsrConfig:
    """Sparsity, degree, minimum observations, reset probability, group-lasso lambda."""

    sparsity: int = 10
    degree: int = 2
    min_obs: float = 100
    rho: float = 0.1
    lam: float = 1.0

    def __post_init__(self):
        if self.sparsity < 1:
            raise ValueError("sparsity must be >= 1")
        if self.min_obs < 1:
            raise ValueError("min_obs must be >= 1")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        if self.degree < 0:
            raise ValueError("degree must be >= 0")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")


@dataclass(frozen=True)
class RoundLog:
    cycle: int
    s: int
    i: int
    n_i: int
    r_i: float
    evaluated: int
    best_loss: float


@dataclass
class SearchResult:
    best_point: np.ndarray
    best_loss: float
    history: EvaluationHistory
    rounds: list = field(default_factory=list)
    failures: int = 0
    recoveries: list = field(default_factory=list)


def top_k(configs, losses, k: int) -> list:
    """The ``k`` configurations with smallest loss; ties keep insertion order."""
    configs = list(configs)
    losses = np.asarray(losses, dtype=np.float64)
    if len(configs) != losses.shape[0]:
        raise ValueError("configs and losses differ in length")
    if not 0 <= k <= len(configs):
        raise ValueError(f"k={k} outside 0..{len(configs)}")
    losses = np.where(np.isnan(losses), np.inf, losses)
    order = np.argsort(losses, kind="stable")[:k]
    return [configs[j] for j in order]


def _call(evaluator, point, resource):
    t0 = time.perf_counter()
    try:
        loss = float(evaluator(point, resource))
        if not math.isfinite(loss):
            raise ValueError(f"non-finite loss {loss}")
        failed = False
    except ProtocolError:
        # a broken channel would fail every later call too
        raise
    except Exception as exc:  # noqa: BLE001 - any evaluator failure discards the config
        log.warning("evaluation failed at resource %s: %s", resource, exc)
        loss, failed = math.inf, True
    return loss, time.perf_counter() - t0, failed


def evaluate_batch(evaluator, points, resource, workers: int = 1) -> list:
    """``[(loss, seconds, failed)]`` in input order."""
    if workers <= 1 or len(points) <= 1:
        return [_call(evaluator, p, resource) for p in points]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda p: _call(evaluator, p, resource), points))


def _sampler_of(sampler) -> Callable:
    return sampler.sample if hasattr(sampler, "sample") else sampler


def _bracket_rng(seed, cycle: int, s: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(cycle, s)))


class _Run:
    def __init__(self, cfg, evaluator, history, workers, evaluator_id):
        self.cfg = cfg
        self.evaluator = evaluator
        self.history = history if history is not None else EvaluationHistory()
        self.workers = workers
        self.evaluator_id = evaluator_id
        self.rounds: list = []
        self.failures = 0

    def run_rounds(self, T, rounds, cycle: int, s: int):
        """Evaluate-and-discard loop; returns the final round's (configs, losses)."""
        T = [np.asarray(t, dtype=np.int8) for t in T]
        L: list = []
        for i, (n_i, r_i) in enumerate(rounds):
            results = evaluate_batch(self.evaluator, T, r_i, self.workers)
            L = [res[0] for res in results]
            for t, (loss, secs, failed) in zip(T, results):
                self.history.append(t, r_i, loss, secs, self.evaluator_id)
                self.failures += failed
            self.rounds.append(RoundLog(cycle, s, i, n_i, r_i, len(T), min(L, default=math.inf)))
            if i < len(rounds) - 1:
                T = top_k(T, L, min(self.cfg.keep(n_i), len(T)))
        return T, L

    def result(self, final_resource, recoveries=()) -> SearchResult:
        recs = self.history.at(final_resource)
        best = min(recs, key=lambda r: r.loss, default=None)  # min keeps the first of ties
        if best is None:
            raise RuntimeError("no evaluation reached the final resource")
        return SearchResult(np.array(best.point, dtype=np.int8), best.loss, self.history,
                            self.rounds, self.failures, list(recoveries))


def successive_halving(cfg: SchedulerConfig, sampler, evaluator, *, seed=0, workers: int = 1,
                       history: EvaluationHistory | None = None, evaluator_id: str = "") -> SearchResult:
    """One Successive Halving run starting from ``R`` configurations at resource 1."""
    run = _Run(cfg, evaluator, history, workers, evaluator_id)
    rounds = cfg.sh_rounds()
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    T = _sampler_of(sampler)(rounds[0][0], rng)
    T, L = run.run_rounds(T, rounds, 0, cfg.s_max)
    j = int(np.argmin(L))
    return SearchResult(np.asarray(T[j], dtype=np.int8), float(L[j]), run.history,
                        run.rounds, run.failures)


def hyperband(cfg: SchedulerConfig, sampler, evaluator, *, seed=0, workers: int = 1,
              history: EvaluationHistory | None = None, evaluator_id: str = "",
              start_cycle: int = 0) -> SearchResult:
    """Hyperband: brackets ``s = s_max..0`` for ``cfg.cycles`` cycles, uniform sampling."""
    run = _Run(cfg, evaluator, history, workers, evaluator_id)
    sample = _sampler_of(sampler)
    for cycle in range(start_cycle, start_cycle + cfg.cycles):
        for s in range(cfg.s_max, -1, -1):
            n, _ = cfg.bracket(s)
            T = sample(n, _bracket_rng(seed, cycle, s))
            run.run_rounds(T, cfg.rounds(s), cycle, s)
    return run.result(cfg.R)


@dataclass
class Recovery:
    """Outcome of one sparse-recovery step inside the sampler."""

    resource: float
    g: SparsePolynomial
    restriction: Restriction
    solution: RecoverySolution = field(repr=False)
    n_obs: int = 0


def recover_restriction(history: EvaluationHistory, pgsr: PgsrConfig,
                        space: HyperparamSpace) -> Recovery | None:
    """Group-sparse fit on the richest eligible resource level.

    Uses the largest resource with at least ``min_obs`` observations, fits the
    group lasso over the space's grouped degree-d basis, keeps the top
    ``sparsity`` terms and minimizes them exhaustively.  Returns ``None`` when
    no level qualifies or the solver does not converge.
    """
    counts = history.counts()
    eligible = [r for r, c in counts.items() if c >= pgsr.min_obs]
    if not eligible:
        return None
    r = max(eligible)
    X, y = history.inputs(r), history.outputs(r)
    ok = np.isfinite(y)
    X, y = X[ok], y[ok]
    if X.shape[0] == 0:
        return None
    basis = enumerate_basis(space.n, min(pgsr.degree, space.n))
    A = build_sampling_matrix(X, basis)
    sol = group_lasso(A, group_columns(space, basis), y, pgsr.lam)
    if not sol.converged:
        log.warning("group lasso did not converge; sampling uniformly this time")
        return None
    g = top_s(sol, pgsr.sparsity, basis)
    z, _ = minimize_over_support(g)
    return Recovery(r, g, Restriction(space.n, z), sol, int(X.shape[0]))


def sample_restricted(n: int, restriction: Restriction | None, rho: float, count: int,
                      rng: np.random.Generator) -> np.ndarray:
    """Uniform points; each row independently keeps the restriction with prob ``1 - rho``."""
    pts = (2 * rng.integers(0, 2, size=(count, n)) - 1).astype(np.int8)
    if restriction is None or not restriction.fixed:
        return pts
    keep = rng.random(count) >= rho
    idx = np.fromiter(restriction.fixed.keys(), dtype=np.int64)
    vals = np.fromiter(restriction.fixed.values(), dtype=np.int8)
    pts[np.ix_(keep, idx)] = vals
    return pts


def pgsr_sampling(history: EvaluationHistory, pgsr: PgsrConfig, space: HyperparamSpace,
                  count: int, rng: np.random.Generator, recovery: Recovery | None = None) -> np.ndarray:
    """Draw ``count`` configurations, steered by recovery once history suffices."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if recovery is None:
        recovery = recover_restriction(history, pgsr, space)
    if recovery is None:
        return space.sample(count, rng)
    return sample_restricted(space.n, recovery.restriction, pgsr.rho, count, rng)


def pgsr_hb(cfg: SchedulerConfig, pgsr: PgsrConfig, space: HyperparamSpace, evaluator, *,
            seed=0, workers: int = 1, history: EvaluationHistory | None = None,
            evaluator_id: str = "", start_cycle: int = 0) -> SearchResult:
    """Hyperband whose per-bracket sampler is :func:`pgsr_sampling`.

    Every evaluation at every resource level goes into ``history`` (a loaded
    history may be passed in to resume; ``start_cycle`` continues the seed
    streams).  Returns the smallest loss recorded at full resource ``R``.
    """
    run = _Run(cfg, evaluator, history, workers, evaluator_id)
    recoveries = []
    for cycle in range(start_cycle, start_cycle + cfg.cycles):
        for s in range(cfg.s_max, -1, -1):
            n, _ = cfg.bracket(s)
            rec = recover_restriction(run.history, pgsr, space)
            recoveries.append((cycle, s, rec))
            rng = _bracket_rng(seed, cycle, s)
            if rec is None:
                T = space.sample(n, rng)
            else:
                T = sample_restricted(space.n, rec.restriction, pgsr.rho, n, rng)
            run.run_rounds(T, cfg.rounds(s), cycle, s)
    return run.result(cfg.R, recoveries)


def bits_string(point) -> str:
    return "".join("+" if v > 0 else "-" for v in np.asarray(point))


def write_run_report(path, result: SearchResult, cfg: SchedulerConfig, space: HyperparamSpace | None = None,
                     meta: dict | None = None) -> None:
    """Plain-text report: metadata, one row per SH round, and the best configuration."""
    lines = []
    for k, v in (meta or {}).items():
        lines.append(f"# {k}: {v}")
    lines.append(f"# R={cfg.R} eta={cfg.eta} cycles={cfg.cycles} s_max={cfg.s_max} B={cfg.B}")
    lines.append("")
    lines.append(f"{'cycle':>5} {'s':>3} {'i':>3} {'n_i':>6} {'r_i':>10} {'evaluated':>9} {'best_loss':>14}")
    for rl in result.rounds:
        lines.append(f"{rl.cycle:>5} {rl.s:>3} {rl.i:>3} {rl.n_i:>6} {rl.r_i:>10.6g} {rl.evaluated:>9} {rl.best_loss:>14.6g}")
    lines.append("")
    applied = [(c, s, r) for c, s, r in result.recoveries if r is not None]
    if applied:
        lines.append("recoveries (cycle, bracket, resource, fixed bits):")
        for c, s, r in applied:
            fixed = " ".join(f"{i + 1}={'+' if v > 0 else '-'}" for i, v in r.restriction.fixed.items())
            lines.append(f"  {c} {s} {r.resource:g} {fixed}")
        lines.append("")
    lines.append(f"failures: {result.failures}")
    lines.append(f"evaluations: {len(result.history)}")
    lines.append(f"best_loss: {result.best_loss!r}")
    lines.append(f"best_bits: {bits_string(result.best_point)}")
    if space is not None:
        for name, value in space.decode_dict(result.best_point).items():
            lines.append(f"best.{name}: {value!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
