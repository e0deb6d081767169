"""``spectral-search``: run searches and experiments from a YAML (or JSON) config.

Every config shares a ``run`` section (``seed``, ``workers``, ``out``,
``mode``); command-line flags override it.  Each subcommand reads its own
sections on top of that:

========  ===============================================================
hpo       ``space``, ``scheduler``, ``pgsr``, ``evaluator``, ``resume``
nas       ``architecture`` (or ``search.n``), ``search``, ``evaluator``
phase     ``phase``
lambda    ``architecture`` (or ``lambda.n``), ``lambda``, ``evaluator``
recover   ``recover`` (plus ``space`` for automatic grouping)
========  ===============================================================

Exit codes: 0 success, 1 invalid config or arguments, 2 runtime failure,
3 evaluator or protocol failure.
"""

from __future__ import annotations

import argparse
import contextlib
import copy
import hashlib
import json
import logging
import os
import shutil
import sys
import tempfile
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .conas import ArchitectureSpace, conas_search, describe_cells, write_search_report
from .encoding import HyperparamSpace, group_columns
from .evaluators import (
    EvaluatorError,
    ExternalEvaluator,
    PlantedObjective,
    basin_polynomial,
    load_history,
    random_sparse_polynomial,
    save_history,
)
from .experiments import MAX_COLUMNS, PhaseConfig, lambda_stability, phase_transition, write_summary, write_table
from .fourier import SparsePolynomial, basis_size, enumerate_basis, format_polynomial, parse_polynomial
from .hyperband import PgsrConfig, SchedulerConfig, bits_string, hyperband, pgsr_hb, successive_halving, write_run_report
from .recovery import GroupStructure, group_lasso, lasso, load_matrix_text, load_vector_text, top_s

log = logging.getLogger("spectral_search")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_EVALUATOR = 0, 1, 2, 3
SUBCOMMANDS = ("hpo", "nas", "phase", "lambda", "recover")
MODES = {
    "hpo": ("pgsr", "hyperband", "sh"),
    "nas": (),
    "phase": ("support", "argmin"),
    "lambda": (),
    "recover": ("lasso", "group"),
}
_MISSING = object()


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


# ----------------------------------------------------------------------------
# config plumbing
# ----------------------------------------------------------------------------

@dataclass
class RunContext:
    command: str
    config: dict
    base_dir: Path
    seed: int
    workers: int
    out: Path
    mode: str | None

    @property
    def config_hash(self) -> str:
        # out and workers do not influence results, so they stay out of the hash
        cfg = copy.deepcopy(self.config)
        run = cfg.setdefault("run", {})
        run.pop("out", None)
        run.pop("workers", None)
        run["seed"] = self.seed
        run["mode"] = self.mode
        blob = json.dumps(cfg, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()

    @property
    def meta(self) -> dict:
        return {"tool_version": __version__, "command": self.command,
                "config_hash": self.config_hash, "seed": self.seed}

    def path(self, value) -> Path:
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p


def load_config(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config: not valid YAML/JSON: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be a mapping")
    return data


def section(cfg: dict, name: str, required: bool = True) -> dict:
    if name not in cfg:
        if required:
            raise ConfigError(f"{name}: required section missing")
        return {}
    sec = cfg[name]
    if sec is None:
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(f"{name}: must be a mapping")
    return sec


def field(sec: dict, where: str, key: str, kind=float, default=_MISSING):
    if key not in sec or sec[key] is None:
        if default is _MISSING:
            raise ConfigError(f"{where}.{key}: required field missing")
        return default
    value = sec[key]
    try:
        if kind is int:
            if isinstance(value, bool) or float(value) != int(value):
                raise ValueError
            return int(value)
        if kind is float:
            if isinstance(value, bool):
                raise ValueError
            return float(value)
        if kind is bool:
            if not isinstance(value, bool):
                raise ValueError
            return value
        if kind is str:
            return str(value)
        if kind is list:
            if not isinstance(value, (list, tuple)):
                raise ValueError
            return list(value)
        if kind is dict:
            if not isinstance(value, dict):
                raise ValueError
            return value
    except (TypeError, ValueError):
        raise ConfigError(f"{where}.{key}: expected {kind.__name__}, got {value!r}") from None
    return value


def check_keys(sec: dict, where: str, allowed) -> None:
    extra = sorted(set(sec) - set(allowed))
    if extra:
        raise ConfigError(f"{where}.{extra[0]}: unknown field")


def build(factory, where: str, *args, **kwargs):
    """Construct a domain object, turning its ValueError into a ConfigError."""
    try:
        return factory(*args, **kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


# ----------------------------------------------------------------------------
# evaluators
# ----------------------------------------------------------------------------

EVALUATOR_KEYS = ("kind", "sigma", "seed", "max_resource", "penalty", "polynomial", "polynomial_file",
                  "basin", "random", "command", "timeout", "retries")


def planted_polynomial(ev: dict, n: int, ctx: RunContext, space: HyperparamSpace | None = None) -> SparsePolynomial:
    sources = [k for k in ("polynomial", "polynomial_file", "basin", "random") if k in ev]
    if len(sources) != 1:
        raise ConfigError("evaluator: give exactly one of polynomial, polynomial_file, basin, random")
    src = sources[0]
    if src == "polynomial":
        return build(parse_polynomial, "evaluator.polynomial", field(ev, "evaluator", "polynomial", str), n)
    if src == "polynomial_file":
        path = ctx.path(field(ev, "evaluator", "polynomial_file", str))
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"evaluator.polynomial_file: cannot read {path}: {exc.strerror}") from None
        return build(parse_polynomial, "evaluator.polynomial_file", text, n)
    if src == "basin":
        if space is None:
            raise ConfigError("evaluator.basin: only available with a hyperparameter space")
        b = field(ev, "evaluator", "basin", dict)
        check_keys(b, "evaluator.basin", ("targets", "weight", "mantissa_slope"))
        targets = field(b, "evaluator.basin", "targets", dict)
        unknown = sorted(set(targets) - {c.name for c in space.categories})
        if unknown:
            raise ConfigError(f"evaluator.basin.targets.{unknown[0]}: no such category")
        return build(basin_polynomial, "evaluator.basin", space, targets,
                     field(b, "evaluator.basin", "weight", float, 1.0),
                     field(b, "evaluator.basin", "mantissa_slope", float, 0.0))
    r = field(ev, "evaluator", "random", dict)
    check_keys(r, "evaluator.random", ("degree", "sparsity", "seed", "low", "high", "constant"))
    rng = np.random.default_rng(field(r, "evaluator.random", "seed", int, 0))
    return build(random_sparse_polynomial, "evaluator.random", n,
                 field(r, "evaluator.random", "degree", int, 2),
                 field(r, "evaluator.random", "sparsity", int),
                 rng, field(r, "evaluator.random", "low", float, 1.0),
                 field(r, "evaluator.random", "high", float, 2.0),
                 bool(r.get("constant", True)))


def make_evaluator(cfg: dict, n: int, ctx: RunContext, space: HyperparamSpace | None = None,
                   max_resource: float | None = None):
    """Returns ``(evaluator, evaluator_id, planted polynomial or None)``."""
    ev = section(cfg, "evaluator")
    check_keys(ev, "evaluator", EVALUATOR_KEYS)
    kind = field(ev, "evaluator", "kind", str)
    if kind == "planted":
        poly = planted_polynomial(ev, n, ctx, space)
        obj = build(PlantedObjective, "evaluator", poly,
                    sigma=field(ev, "evaluator", "sigma", float, 0.0),
                    seed=field(ev, "evaluator", "seed", int, ctx.seed),
                    max_resource=field(ev, "evaluator", "max_resource", float, max_resource),
                    penalty=field(ev, "evaluator", "penalty", float, 1.0))
        return obj, "planted", poly
    if kind == "external":
        cmd = [str(c) for c in field(ev, "evaluator", "command", list)]
        if not cmd:
            raise ConfigError("evaluator.command: must not be empty")
        cmd = [sys.executable if c == "{python}" else c for c in cmd]
        return ("external", cmd, field(ev, "evaluator", "timeout", float, 60.0),
                field(ev, "evaluator", "retries", int, 1)), "external", None
    raise ConfigError(f"evaluator.kind: expected 'planted' or 'external', got {kind!r}")


@contextlib.contextmanager
def opened(evaluator, n: int):
    """Start an external evaluator lazily so validation never spawns processes."""
    if isinstance(evaluator, tuple) and evaluator and evaluator[0] == "external":
        _, cmd, timeout, retries = evaluator
        with ExternalEvaluator(cmd, timeout=timeout, retries=retries) as ext:
            if ext.n != n:
                raise EvaluatorError(f"evaluator reports dimension {ext.n}, expected {n}")
            yield ext
    else:
        yield evaluator


# ----------------------------------------------------------------------------
# output directory
# ----------------------------------------------------------------------------

@contextlib.contextmanager
def atomic_output(out: Path):
    """Yield a scratch directory that is renamed to ``out`` only on success."""
    out = Path(out)
    if out.exists() and (not out.is_dir() or any(out.iterdir())):
        raise ConfigError(f"out: {out} already exists and is not an empty directory")
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    try:
        yield tmp
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    os.chmod(tmp, 0o755)
    if out.exists():
        out.rmdir()
    os.rename(tmp, out)


def write_json(path, payload: dict, ctx: RunContext) -> None:
    write_summary(path, {"meta": ctx.meta, **payload})


def write_text(path, text: str, ctx: RunContext) -> None:
    header = "".join(f"# {k}: {v}\n" for k, v in ctx.meta.items())
    Path(path).write_text(header + text, encoding="utf-8")


# ----------------------------------------------------------------------------
# subcommands: each returns a prepared job (validation) and a runner
# ----------------------------------------------------------------------------

def prepare_hpo(ctx: RunContext):
    cfg = ctx.config
    space_spec = cfg.get("space")
    if not isinstance(space_spec, list) or not space_spec:
        raise ConfigError("space: required list of categories")
    space = build(HyperparamSpace.from_config, "space", space_spec)
    sch = section(cfg, "scheduler")
    check_keys(sch, "scheduler", ("R", "eta", "cycles", "start_cycle"))
    sched = build(SchedulerConfig, "scheduler", field(sch, "scheduler", "R", float),
                  field(sch, "scheduler", "eta", float, 3.0), field(sch, "scheduler", "cycles", int, 1))
    start_cycle = field(sch, "scheduler", "start_cycle", int, 0)
    pg = section(cfg, "pgsr", required=False)
    check_keys(pg, "pgsr", ("sparsity", "degree", "min_obs", "rho", "lam"))
    pgsr = build(PgsrConfig, "pgsr", **{k: (field(pg, "pgsr", k, int) if k in ("sparsity", "degree")
                                            else field(pg, "pgsr", k, float)) for k in pg})
    mode = ctx.mode or "pgsr"
    evaluator, eid, _ = make_evaluator(cfg, space.n, ctx, space, max_resource=sched.R)
    resume = section(cfg, "resume", required=False)
    check_keys(resume, "resume", ("history",))
    history = None
    if resume:
        hpath = ctx.path(field(resume, "resume", "history", str))
        try:
            history = load_history(hpath)
        except OSError as exc:
            raise ConfigError(f"resume.history: cannot read {hpath}: {exc.strerror}") from None
        except ValueError as exc:
            raise ConfigError(f"resume.history: {exc}") from None

    def run(out: Path) -> str:
        with opened(evaluator, space.n) as ev:
            common = dict(seed=ctx.seed, workers=ctx.workers, history=history, evaluator_id=eid)
            if mode == "pgsr":
                res = pgsr_hb(sched, pgsr, space, ev, start_cycle=start_cycle, **common)
            elif mode == "hyperband":
                res = hyperband(sched, space, ev, start_cycle=start_cycle, **common)
            else:
                res = successive_halving(sched, space, ev, **common)
        write_run_report(out / "report.txt", res, sched, space, ctx.meta)
        save_history(res.history, out / "history.jsonl", ctx.meta)
        write_table(out / "rounds.csv", res.rounds, meta=ctx.meta)
        best = space.decode_dict(res.best_point)
        write_json(out / "summary.json", {
            "mode": mode, "best_loss": res.best_loss, "best_bits": bits_string(res.best_point),
            "best_config": best, "evaluations": len(res.history), "failures": res.failures,
            "recoveries": [{"cycle": c, "bracket": s, "resource": r.resource,
                            "fixed": {str(i + 1): v for i, v in r.restriction.fixed.items()}}
                           for c, s, r in res.recoveries if r is not None],
            "scheduler": asdict(sched), "pgsr": asdict(pgsr), "space": space.to_config(),
        }, ctx)
        cfg_txt = ", ".join(f"{k}={v:.6g}" for k, v in best.items())
        return f"best loss {res.best_loss:.6g}: {cfg_txt}"

    return run


def architecture_of(cfg: dict, sec: dict, where: str):
    """Return ``(ArchitectureSpace or None, n)``."""
    if "n" in sec:
        if "architecture" in cfg:
            raise ConfigError(f"{where}.n: give either n or an architecture section, not both")
        n = field(sec, where, "n", int)
        if n < 1:
            raise ConfigError(f"{where}.n: must be >= 1")
        return None, n
    arch = section(cfg, "architecture", required=False)
    check_keys(arch, "architecture", ("cells", "intermediate_nodes", "ops"))
    space = build(ArchitectureSpace.from_config, "architecture", arch)
    return space, space.n


def prepare_nas(ctx: RunContext):
    cfg = ctx.config
    sec = section(cfg, "search")
    check_keys(sec, "search", ("n", "m", "t", "s", "d", "lam", "p"))
    arch, n = architecture_of(cfg, sec, "search")
    kw = dict(m=field(sec, "search", "m", int), t=field(sec, "search", "t", int, 1),
              s=field(sec, "search", "s", int, 10), d=field(sec, "search", "d", int, 2),
              lam=field(sec, "search", "lam", float, 1.0), p=field(sec, "search", "p", float, 0.5))
    for k in ("m", "t", "s"):
        if kw[k] < 1:
            raise ConfigError(f"search.{k}: must be >= 1")
    if not 0 < kw["p"] < 1:
        raise ConfigError("search.p: must lie strictly between 0 and 1")
    if kw["d"] < 0 or kw["lam"] < 0:
        raise ConfigError("search.d and search.lam: must be >= 0")
    if basis_size(n, min(kw["d"], n)) > MAX_COLUMNS:
        raise ConfigError(f"search.d: basis has {basis_size(n, min(kw['d'], n))} columns, above {MAX_COLUMNS}")
    evaluator, _, planted = make_evaluator(cfg, n, ctx)

    def run(out: Path) -> str:
        with opened(evaluator, n) as ev:
            alpha, state = conas_search(arch if arch is not None else n, ev, seed=ctx.seed,
                                        workers=ctx.workers, **kw)
        write_search_report(out / "search_report.txt", alpha, state, arch, ctx.meta)
        if arch is not None:
            write_text(out / "cells.txt", describe_cells(arch, alpha), ctx)
        stages = [{"stage": r.stage, "free_bits": r.n_free, "fixed": {str(i + 1): v for i, v in sorted(r.z.items())},
                   "g": format_polynomial(r.g), "g_min": r.min_value, "lasso_sweeps": r.iterations,
                   "measurements": r.y_stats} for r in state.stages]
        payload = {"alpha_star": bits_string(alpha), "stages": stages, "stop_reason": state.stop_reason,
                   "search": kw, "n": n}
        if planted is not None:
            payload["planted"] = format_polynomial(planted)
        write_json(out / "summary.json", payload, ctx)
        return f"alpha_star {bits_string(alpha)} ({int(np.count_nonzero(alpha > 0))} active edges)"

    return run


PHASE_KEYS = ("n", "d", "s_star", "sigma", "m_grid", "trials", "criterion", "delta", "lam", "coef_low", "coef_high")


def prepare_phase(ctx: RunContext):
    sec = dict(section(ctx.config, "phase", required=False))
    check_keys(sec, "phase", PHASE_KEYS)
    if "m_grid" in sec:
        grid = sec["m_grid"]
        if isinstance(grid, dict):
            check_keys(grid, "phase.m_grid", ("start", "stop", "step"))
            grid = list(range(field(grid, "phase.m_grid", "start", int), field(grid, "phase.m_grid", "stop", int) + 1,
                              field(grid, "phase.m_grid", "step", int)))
        sec["m_grid"] = tuple(field({"m_grid": grid}, "phase", "m_grid", list))
    if ctx.mode:
        sec["criterion"] = ctx.mode
    kw = {}
    for k, v in sec.items():
        if k in ("n", "d", "s_star", "trials"):
            kw[k] = field(sec, "phase", k, int)
        elif k == "criterion":
            kw[k] = field(sec, "phase", k, str)
        elif k == "m_grid":
            kw[k] = v
        else:
            kw[k] = field(sec, "phase", k, float)
    pc = build(PhaseConfig, "phase", seed=ctx.seed, **kw)
    cols = basis_size(pc.n, pc.d) if pc.d <= pc.n else 0
    if pc.d > pc.n or cols > MAX_COLUMNS:
        raise ConfigError(f"phase.d: basis for n={pc.n}, d={pc.d} is infeasible ({cols} columns)")

    def run(out: Path) -> str:
        res = phase_transition(pc, workers=ctx.workers)
        write_table(out / "phase.csv", res.rows, meta=ctx.meta)
        write_json(out / "summary.json", {
            "config": asdict(pc), "columns": res.columns, "reference_m": res.reference_m,
            "reference_note": "constant set to 1; shape only",
            "trend_ok": res.trend_ok, "trend_min_p": res.trend_min_p,
            "rows": [asdict(r) for r in res.rows],
        }, ctx)
        lines = [f"m={r.m:>5} success={r.success_rate:.3f}" for r in res.rows]
        return "\n".join(lines + [f"reference m (constant 1): {res.reference_m:.1f}; trend ok: {res.trend_ok}"])

    return run


def prepare_lambda(ctx: RunContext):
    cfg = ctx.config
    sec = section(cfg, "lambda")
    check_keys(sec, "lambda", ("n", "lams", "m", "s", "d", "p"))
    arch, n = architecture_of(cfg, sec, "lambda")
    lams = [float(v) for v in field(sec, "lambda", "lams", list)]
    if not lams:
        raise ConfigError("lambda.lams: must not be empty")
    if any(v < 0 for v in lams):
        raise ConfigError("lambda.lams: entries must be >= 0")
    kw = dict(m=field(sec, "lambda", "m", int, 1000), s=field(sec, "lambda", "s", int, 10),
              d=field(sec, "lambda", "d", int, 2), p=field(sec, "lambda", "p", float, 0.5))
    if kw["m"] < 1 or kw["s"] < 1:
        raise ConfigError("lambda.m and lambda.s: must be >= 1")
    if not 0 < kw["p"] < 1:
        raise ConfigError("lambda.p: must lie strictly between 0 and 1")
    evaluator, _, planted = make_evaluator(cfg, n, ctx)

    def run(out: Path) -> str:
        with opened(evaluator, n) as ev:
            rows, _, _ = lambda_stability(n, ev, ctx.seed, lams, workers=ctx.workers, **kw)
        write_table(out / "lambda.csv", rows, meta=ctx.meta)
        payload = {"rows": [asdict(r) for r in rows], "settings": kw, "n": n}
        if planted is not None:
            payload["planted"] = format_polynomial(planted)
        write_json(out / "summary.json", payload, ctx)
        return "\n".join(f"lambda={r.lam:g} hamming={r.hamming} support={r.support_size}" for r in rows)

    return run


def prepare_recover(ctx: RunContext):
    cfg = ctx.config
    sec = section(cfg, "recover")
    check_keys(sec, "recover", ("matrix", "y", "lam", "basis", "sparsity", "groups", "normalize"))
    mode = ctx.mode or "lasso"
    paths = {k: ctx.path(field(sec, "recover", k, str)) for k in ("matrix", "y")}
    try:
        M = load_matrix_text(paths["matrix"])
        y = load_vector_text(paths["y"])
    except OSError as exc:
        raise ConfigError(f"recover: cannot read input: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"recover: malformed dump: {exc}") from None
    if M.shape[0] != y.shape[0]:
        raise ConfigError(f"recover.y: {y.shape[0]} entries for a matrix with {M.shape[0]} rows")
    lam = field(sec, "recover", "lam", float)
    if lam < 0:
        raise ConfigError("recover.lam: must be >= 0")
    basis = None
    if "basis" in sec:
        b = field(sec, "recover", "basis", dict)
        check_keys(b, "recover.basis", ("n", "d"))
        basis = build(enumerate_basis, "recover.basis", field(b, "recover.basis", "n", int),
                      field(b, "recover.basis", "d", int))
        if len(basis) != M.shape[1]:
            raise ConfigError(f"recover.basis: {len(basis)} basis columns, matrix has {M.shape[1]}")
    if field(sec, "recover", "normalize", bool, True):
        A, yy = M / np.sqrt(M.shape[0]), y / np.sqrt(M.shape[0])
    else:
        A, yy = M, y
    sparsity = field(sec, "recover", "sparsity", int, None)
    if sparsity is not None and (sparsity < 1 or basis is None):
        raise ConfigError("recover.sparsity: needs recover.basis and a value >= 1")
    groups = None
    if mode == "group":
        if "groups" in sec:
            assignment = field(sec, "recover", "groups", list)
            if len(assignment) != M.shape[1]:
                raise ConfigError(f"recover.groups: {len(assignment)} labels for {M.shape[1]} columns")
            groups = build(GroupStructure.from_assignment, "recover.groups", assignment)
        elif "space" in cfg and basis is not None:
            space = build(HyperparamSpace.from_config, "space", cfg["space"])
            if space.n != basis.n:
                raise ConfigError(f"space: {space.n} bits but recover.basis.n is {basis.n}")
            groups = group_columns(space, basis)
        else:
            raise ConfigError("recover.groups: group mode needs recover.groups or space + recover.basis")

    def run(out: Path) -> str:
        sol = lasso(A, yy, lam) if groups is None else group_lasso(A, groups, yy, lam)
        header = "\n".join(f"{k}: {v}" for k, v in ctx.meta.items())
        np.savetxt(out / "coefficients.txt", sol.coef.reshape(1, -1), fmt="%.17g", header=header)
        payload = {"mode": mode, "lam": lam, "objective": sol.objective, "iterations": sol.iterations,
                   "converged": sol.converged, "nonzero": [int(k) for k in sol.nonzero]}
        if basis is not None:
            g = top_s(sol, sparsity or len(basis), basis)
            write_text(out / "polynomial.txt", format_polynomial(g) + "\n", ctx)
            payload["polynomial"] = format_polynomial(g)
        write_json(out / "summary.json", payload, ctx)
        status = "converged" if sol.converged else "NOT converged"
        return f"{status} after {sol.iterations} sweeps; {len(sol.nonzero)} nonzero coefficients"

    return run


PREPARE = {"hpo": prepare_hpo, "nas": prepare_nas, "phase": prepare_phase,
           "lambda": prepare_lambda, "recover": prepare_recover}


# ----------------------------------------------------------------------------
# entry point
# ----------------------------------------------------------------------------

def parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spectral-search", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "phase", help="YAML or JSON configuration file")
        p.add_argument("--seed", type=int, help="master seed (overrides run.seed)")
        p.add_argument("--workers", type=int, help="evaluation threads (overrides run.workers)")
        p.add_argument("--out", help="output directory; created atomically (overrides run.out)")
        if MODES[name]:
            p.add_argument("--mode", choices=MODES[name], help="variant (overrides run.mode)")
    return ap


def configure_logging() -> None:
    level = os.environ.get("SPECTRAL_SEARCH_LOG", "WARNING").strip().upper()
    numeric = int(level) if level.isdigit() else getattr(logging, level, None)
    if not isinstance(numeric, int):
        numeric = logging.WARNING
    logging.basicConfig(level=numeric, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def context(args) -> RunContext:
    cfg = load_config(args.config) if args.config else {}
    run = section(cfg, "run", required=False)
    check_keys(run, "run", ("seed", "workers", "out", "mode"))
    seed = args.seed if args.seed is not None else field(run, "run", "seed", int, 0)
    workers = args.workers if args.workers is not None else field(run, "run", "workers", int, 1)
    if workers < 1:
        raise ConfigError("run.workers: must be >= 1")
    if seed < 0:
        raise ConfigError("run.seed: must be >= 0")
    mode = getattr(args, "mode", None) or run.get("mode")
    if mode is not None and mode not in MODES[args.command]:
        allowed = ", ".join(MODES[args.command]) or "none"
        raise ConfigError(f"run.mode: {mode!r} not valid for {args.command} (allowed: {allowed})")
    base = Path(args.config).resolve().parent if args.config else Path.cwd()
    ctx = RunContext(args.command, cfg, base, seed, workers, Path("."), mode)
    out = args.out or run.get("out")
    ctx.out = Path(out) if out else Path(f"{args.command}-{ctx.config_hash[:8]}-seed{seed}")
    return ctx


def main(argv=None) -> int:
    configure_logging()
    try:
        args = parser().parse_args(argv)
    except SystemExit as exc:  # argparse: --help/--version exit 0, bad usage exits 2
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        ctx = context(args)
        job = PREPARE[args.command](ctx)
        with atomic_output(ctx.out) as tmp:
            message = job(tmp)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EvaluatorError as exc:
        print(f"evaluator error: {exc}", file=sys.stderr)
        return EXIT_EVALUATOR
    except Exception as exc:  # noqa: BLE001 - anything else is a runtime failure
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(message)
    print(f"outputs written to {ctx.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
