"""Recovery phase-transition experiments and the lasso-stability protocol."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .conas import hamming, measure, recover_stage, sample_encoder
from .encoding import HyperparamSpace, group_columns
from .evaluators import random_sparse_polynomial
from .fourier import Restriction, basis_size, enumerate_basis, minimize_over_support
from .recovery import build_sampling_matrix, group_lasso, lasso, top_s

MAX_COLUMNS = 10**6
CRITERIA = ("support", "argmin")


@dataclass(frozen=True)
class PhaseConfig:
    n: int = 20
    d: int = 2
    s_star: int = 5
    sigma: float = 0.0
    m_grid: tuple = tuple(range(50, 601, 50))
    trials: int = 50
    criterion: str = "support"
    delta: float = 0.4
    seed: int = 0
    lam: float = 0.1
    coef_low: float = 1.0
    coef_high: float = 2.0

    def __post_init__(self):
        grid = tuple(int(m) for m in self.m_grid)
        object.__setattr__(self, "m_grid", grid)
        if not grid:
            raise ValueError("m_grid must not be empty")
        if any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] < 1:
            raise ValueError("m_grid must be strictly increasing positive integers")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.criterion not in CRITERIA:
            raise ValueError(f"criterion must be one of {CRITERIA}")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")


@dataclass(frozen=True)
class PhaseRow:
    m: int
    success_rate: float
    mean_support_error: float
    successes: int
    trials: int


@dataclass
class PhaseResult:
    config: PhaseConfig
    rows: list
    reference_m: float
    columns: int
    trend_ok: bool = True
    trend_min_p: float = 1.0
    outcomes: dict = field(default_factory=dict, repr=False)


def reference_bound(n: int, d: int, s: int, delta: float) -> float:
    """Measurement bound with every hidden constant set to 1 (shape only).

    log^2(1/delta) * delta^-2 * s * log^2(s/delta) * d * log(n), natural logs.
    """
    return (math.log(1 / delta) ** 2 * delta**-2 * s * math.log(s / delta) ** 2 * d * math.log(n))


def run_trial(cfg: PhaseConfig, m: int, trial: int) -> tuple:
    """``(success, support_error)`` for one planted instance."""
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(m, trial)))
    planted = random_sparse_polynomial(cfg.n, cfg.d, cfg.s_star, rng, cfg.coef_low, cfg.coef_high)
    basis = enumerate_basis(cfg.n, cfg.d)
    pts = (2 * rng.integers(0, 2, size=(m, cfg.n)) - 1).astype(np.int8)
    y = planted.evaluate_many(pts)
    if cfg.sigma > 0:
        y = y + cfg.sigma * rng.standard_normal(m)
    sol = lasso(build_sampling_matrix(pts, basis), y, cfg.lam)
    g = top_s(sol, cfg.s_star, basis)
    err = len(set(g.terms) ^ set(planted.terms))
    if cfg.criterion == "support":
        ok = err == 0
    else:
        z_true, _ = minimize_over_support(planted)
        z_hat, _ = minimize_over_support(g)
        ok = all(z_hat.get(v) == val for v, val in z_true.items())
    return ok, err


def monotone_trend(successes, trials, alpha: float = 0.05) -> tuple:
    """Check that no larger-m grid point has a significantly lower success rate.

    Every pair ``i < j`` gets a one-sided Fisher exact test of
    ``rate_i > rate_j``; the trend holds if no p-value falls below ``alpha``.
    Returns ``(ok, smallest p-value)``.
    """
    min_p = 1.0
    for i in range(len(successes)):
        for j in range(i + 1, len(successes)):
            if successes[i] * trials[j] <= successes[j] * trials[i]:
                continue
            table = [[successes[i], trials[i] - successes[i]], [successes[j], trials[j] - successes[j]]]
            p = stats.fisher_exact(table, alternative="greater").pvalue
            min_p = min(min_p, float(p))
    return min_p >= alpha, min_p


def phase_transition(cfg: PhaseConfig, workers: int = 1) -> PhaseResult:
    cols = basis_size(cfg.n, cfg.d)
    if cols > MAX_COLUMNS:
        raise ValueError(f"basis has {cols} columns, above the limit of {MAX_COLUMNS}")
    jobs = [(m, k) for m in cfg.m_grid for k in range(cfg.trials)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(lambda job: run_trial(cfg, *job), jobs))
    else:
        outcomes = [run_trial(cfg, m, k) for m, k in jobs]
    by_m: dict = {}
    for (m, _), res in zip(jobs, outcomes):
        by_m.setdefault(m, []).append(res)
    rows = []
    for m in cfg.m_grid:
        res = by_m[m]
        wins = sum(ok for ok, _ in res)
        rows.append(PhaseRow(m, wins / len(res), float(np.mean([e for _, e in res])), wins, len(res)))
    ok, min_p = monotone_trend([r.successes for r in rows], [r.trials for r in rows])
    return PhaseResult(cfg, rows, reference_bound(cfg.n, cfg.d, cfg.s_star, cfg.delta), cols, ok, min_p, by_m)


@dataclass(frozen=True)
class LambdaRow:
    lam: float
    hamming: int
    support_size: int
    active_bits: int


def lambda_stability(space, evaluator, seed, lams, m: int = 1000, s: int = 10, d: int = 2,
                     p: float = 0.5, workers: int = 1) -> tuple:
    """Re-solve one frozen measurement set at several lasso penalties.

    The first entry of ``lams`` is the reference.  Returns ``(rows, points, y)``
    where each row holds the Hamming distance of that penalty's encoder to the
    reference encoder.
    """
    lams = list(lams)
    if not lams:
        raise ValueError("lams must not be empty")
    n = space if isinstance(space, int) else space.n
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))
    pts = sample_encoder(n, None, p, rng, count=m)
    y = measure(evaluator, pts, workers)
    rows, ref = [], None
    for lam in lams:
        report = recover_stage(pts, y, Restriction(n), d, s, lam)
        alpha = np.full(n, -1, dtype=np.int8)
        for i, v in report.z.items():
            alpha[i] = v
        if ref is None:
            ref = alpha
        rows.append(LambdaRow(float(lam), hamming(alpha, ref), len(report.g.support_vars),
                              int(np.count_nonzero(alpha > 0))))
    return rows, pts, y


@dataclass(frozen=True)
class GroupTrial:
    trial: int
    planted_groups: tuple
    lasso_ok: bool
    group_ok: bool


def group_vs_lasso(space: HyperparamSpace, m: int, trials: int, lam_lasso: float, lam_group: float, *,
                   d: int = 2, active: int = 2, sigma: float = 0.05, coef_low: float = 0.3,
                   coef_high: float = 1.0, seed=0) -> list:
    """Paired lasso / group-lasso recovery on group-structured planted signals.

    Each trial picks ``active`` non-constant groups of the space's grouped
    basis, fills every coefficient in them with a random sign and magnitude
    in ``[coef_low, coef_high]``, and draws ``m`` noisy uniform measurements.
    Both solvers see the same measurements; each keeps its top-k terms (k =
    number of planted coefficients) and succeeds when the groups those terms
    touch are exactly the planted ones.
    """
    basis = enumerate_basis(space.n, d)
    groups = group_columns(space, basis)
    candidates = [g for g, w in enumerate(groups.weights) if w > 0]
    if active > len(candidates):
        raise ValueError(f"cannot plant {active} groups among {len(candidates)}")
    col_group = np.empty(len(basis), dtype=np.int64)
    for g, cols in enumerate(groups.groups):
        col_group[cols] = g
    out = []
    for t in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(m, t)))
        planted = tuple(sorted(int(g) for g in rng.choice(candidates, size=active, replace=False)))
        x0 = np.zeros(len(basis))
        for g in planted:
            cols = groups.groups[g]
            x0[cols] = rng.uniform(coef_low, coef_high, cols.size) * rng.choice([-1.0, 1.0], cols.size)
        A = build_sampling_matrix(space.sample(m, rng), basis)
        y = A.entries @ x0 + sigma * rng.standard_normal(m)
        k = int(np.count_nonzero(x0))

        def touched(sol):
            kept = top_s(sol, k, basis)
            return tuple(sorted({int(col_group[basis.position(S)]) for S in kept.terms} - {0}))

        out.append(GroupTrial(t, planted, touched(lasso(A, y, lam_lasso)) == planted,
                              touched(group_lasso(A, groups, y, lam_group)) == planted))
    return out


def write_table(path, rows, delimiter: str = ",", meta: dict | None = None) -> None:
    """Header row plus one line per dataclass row; ``meta`` becomes leading ``#`` lines."""
    rows = list(rows)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for k, v in (meta or {}).items():
            fh.write(f"# {k}: {v}\n")
        if not rows:
            return
        w = csv.DictWriter(fh, fieldnames=list(asdict(rows[0])), delimiter=delimiter)
        w.writeheader()
        for r in rows:
            w.writerow(asdict(r))


def write_summary(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "__dataclass_fields__"):
        return asdict(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")
