"""Objective backends and evaluation history storage."""

from __future__ import annotations

import json
import logging
import math
import queue
import subprocess
import threading
from concurrent.futures import Future
from concurrent.futures import TimeoutError as FutureTimeout
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .encoding import HyperparamSpace
from .fourier import SparsePolynomial, as_point, enumerate_basis, poly_eval

log = logging.getLogger(__name__)


class EvaluatorError(RuntimeError):
    """The evaluator reported a failure for one request."""


class EvaluatorTimeout(EvaluatorError):
    """No response arrived in time; the request may be retried."""


class ProtocolError(EvaluatorError):
    """The evaluator broke the wire protocol."""

    def __init__(self, message: str, raw: str | None = None):
        super().__init__(message if raw is None else f"{message}: {raw!r}")
        self.raw = raw


class HistoryFormatError(ValueError):
    pass


def resource_key(r: float) -> float:
    return round(float(r), 6)


# ----------------------------------------------------------------------------
# planted objectives
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class PlantedObjective:
    """A known sparse polynomial plus seeded Gaussian noise and a resource curve.

    ``loss(alpha, r) = f*(alpha) + noise + penalty * (R - r) / R``.  The noise
    draw is a pure function of ``(seed, alpha, r, sequence)``, so evaluation
    order and parallel dispatch cannot change any value.  Without a
    ``max_resource`` the resource argument is ignored.
    """

    poly: SparsePolynomial
    sigma: float = 0.0
    seed: int = 0
    max_resource: float | None = None
    penalty: float = 1.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")

    @property
    def n(self) -> int:
        return self.poly.n

    def noise(self, alpha, resource=None, sequence: int = 0) -> float:
        if self.sigma == 0:
            return 0.0
        a = as_point(alpha, self.n)
        packed = int.from_bytes(np.packbits(a > 0).tobytes(), "big")
        r_key = 0 if resource is None else int(round(float(resource) * 1e6))
        ss = np.random.SeedSequence([self.seed, int(sequence), r_key, self.n, packed])
        return float(self.sigma * np.random.default_rng(ss).standard_normal())

    def __call__(self, alpha, resource=None, sequence: int = 0) -> float:
        value = poly_eval(self.poly, alpha)
        if self.max_resource is not None and resource is not None:
            R = float(self.max_resource)
            if not 0 < resource <= R:
                raise ValueError(f"resource {resource} outside (0, {R}]")
            value = value + self.penalty * (R - resource) / R
        return value + self.noise(alpha, resource, sequence)


planted_eval = PlantedObjective.__call__


def random_sparse_polynomial(n: int, d: int, s: int, rng: np.random.Generator,
                             low: float = 1.0, high: float = 2.0,
                             include_constant: bool = True) -> SparsePolynomial:
    """``s`` distinct basis monomials with magnitudes in [low, high] and random signs."""
    basis = enumerate_basis(n, d)
    pool = np.arange(len(basis)) if include_constant else np.arange(1, len(basis))
    if s > pool.size:
        raise ValueError(f"cannot plant {s} terms in a basis of {pool.size}")
    picks = rng.choice(pool, size=s, replace=False)
    mags = rng.uniform(low, high, size=s)
    signs = rng.choice([-1.0, 1.0], size=s)
    return SparsePolynomial(n, {basis[int(k)]: m * sg for k, m, sg in zip(picks, mags, signs)})


def basin_polynomial(space: HyperparamSpace, targets: dict, weight: float = 1.0,
                     mantissa_slope: float = 0.0) -> SparsePolynomial:
    """Quadratic bowl over decoded exponents, written exactly in the +/-1 bits.

    ``loss = weight * sum_c (e_c - targets[c])**2 + mantissa_slope * sum_c j_c``
    where ``e_c`` is category c's decoded exponent and ``j_c`` its mantissa
    table index.  The integer decode is affine in the bits, so the bowl is a
    degree-2 polynomial and its minimizers form the subcube with every listed
    exponent at its target.
    """
    terms: dict = {}

    def add(S, c):
        terms[S] = terms.get(S, 0.0) + c

    pos = 0
    for cat in space.categories:
        e_bits = list(range(pos, pos + cat.exponent_bits))
        m_bits = list(range(pos + cat.exponent_bits, pos + cat.width))
        pos += cat.width
        if cat.name in targets:
            lo, hi = cat.exponent_range
            target = int(targets[cat.name])
            if not lo <= target <= hi:
                raise ValueError(f"{cat.name}: target exponent {target} outside [{lo}, {hi}]")
            # e - target = c0 + sum_k a_k x_k with bit k weighted 2^(width-1-k)
            a = [2.0 ** (len(e_bits) - 1 - k) / 2 for k in range(len(e_bits))]
            c0 = lo + sum(a) - target
            add((), weight * (c0 * c0 + sum(v * v for v in a)))
            for k, i in enumerate(e_bits):
                add((i,), weight * 2 * c0 * a[k])
            for k1 in range(len(e_bits)):
                for k2 in range(k1 + 1, len(e_bits)):
                    add((e_bits[k1], e_bits[k2]), weight * 2 * a[k1] * a[k2])
        if mantissa_slope and m_bits:
            b = [2.0 ** (len(m_bits) - 1 - k) / 2 for k in range(len(m_bits))]
            add((), mantissa_slope * sum(b))
            for k, i in enumerate(m_bits):
                add((i,), mantissa_slope * b[k])
    return SparsePolynomial(space.n, terms)


# ----------------------------------------------------------------------------
# evaluation history
# ----------------------------------------------------------------------------

RECORD_FIELDS = ("point", "resource", "loss", "wall_time", "evaluator_id", "seq")


@dataclass(frozen=True)
class EvaluationRecord:
    point: tuple
    resource: float
    loss: float
    wall_time: float = 0.0
    evaluator_id: str = ""
    seq: int = 0

    def key(self) -> tuple:
        """Identity of the record ignoring wall-clock time."""
        return (self.point, resource_key(self.resource), self.loss, self.evaluator_id, self.seq)


@dataclass
class EvaluationHistory:
    """Append-only log of evaluations, viewable per resource level."""

    records: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def append(self, point, resource: float, loss: float, wall_time: float = 0.0,
               evaluator_id: str = "") -> EvaluationRecord:
        seq = self.records[-1].seq + 1 if self.records else 0
        rec = EvaluationRecord(tuple(int(v) for v in point), float(resource), float(loss),
                               float(wall_time), str(evaluator_id), seq)
        self.records.append(rec)
        return rec

    def levels(self) -> list:
        return sorted({resource_key(r.resource) for r in self.records})

    def at(self, resource: float) -> list:
        key = resource_key(resource)
        return [r for r in self.records if resource_key(r.resource) == key]

    def inputs(self, resource: float) -> np.ndarray:
        recs = self.at(resource)
        if not recs:
            return np.zeros((0, 0), dtype=np.int8)
        return np.array([r.point for r in recs], dtype=np.int8)

    def outputs(self, resource: float) -> np.ndarray:
        return np.array([r.loss for r in self.at(resource)], dtype=np.float64)

    def counts(self) -> dict:
        out: dict = {}
        for r in self.records:
            k = resource_key(r.resource)
            out[k] = out.get(k, 0) + 1
        return out

    def keys(self) -> list:
        return [r.key() for r in self.records]

    def copy(self) -> "EvaluationHistory":
        return EvaluationHistory(list(self.records))


def save_history(history: EvaluationHistory, path, meta: dict | None = None) -> None:
    """One JSON object per line, UTF-8, fields exactly those of a record.

    ``meta`` entries go first as ``# key: value`` lines, which the loader skips.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for k, v in (meta or {}).items():
            fh.write(f"# {k}: {v}\n")
        for rec in history.records:
            d = asdict(rec)
            d["point"] = list(rec.point)
            fh.write(json.dumps(d) + "\n")


def load_history(path) -> EvaluationHistory:
    history = EvaluationHistory()
    n = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip() or line.startswith("#"):
                continue
            try:
                d = json.loads(line)
                if not isinstance(d, dict) or set(d) != set(RECORD_FIELDS):
                    raise ValueError(f"fields must be exactly {RECORD_FIELDS}")
                point = tuple(int(v) for v in d["point"])
                if any(v not in (-1, 1) for v in point) or any(v != w for v, w in zip(point, d["point"])):
                    raise ValueError("point entries must be -1 or +1")
                if n is None:
                    n = len(point)
                elif len(point) != n:
                    raise ValueError(f"point has dimension {len(point)}, expected {n}")
                seq = d["seq"]
                if not isinstance(seq, int) or (history.records and seq <= history.records[-1].seq):
                    raise ValueError("sequence numbers must be strictly increasing integers")
                rec = EvaluationRecord(point, float(d["resource"]), float(d["loss"]),
                                       float(d["wall_time"]), str(d["evaluator_id"]), seq)
            except (ValueError, TypeError, KeyError) as exc:
                raise HistoryFormatError(f"{path}: line {lineno}: {exc}") from exc
            history.records.append(rec)
    return history


# ----------------------------------------------------------------------------
# external process evaluator
# ----------------------------------------------------------------------------

PROTOCOL_VERSION = 1


class ExternalEvaluator:
    """Client for an evaluator subprocess speaking newline-delimited JSON.

    The evaluator first prints ``{"proto": 1, "n": <dim>}``; afterwards each
    request ``{"id", "point", "resource"}`` on its stdin is answered on stdout
    by ``{"id", "loss"}`` or ``{"id", "error"}``.  Responses may arrive in any
    order and are matched to requests by id, so several requests can be in
    flight on one process.
    """

    def __init__(self, command: Sequence[str], timeout: float = 60.0, retries: int = 1,
                 handshake_timeout: float = 30.0, evaluator_id: str = "external"):
        self.command = list(command)
        self.timeout = timeout
        self.retries = retries
        self.evaluator_id = evaluator_id
        self._pending: dict[int, Future] = {}
        self._lock = threading.Lock()
        self._write_lock = threading.Lock()
        self._next_id = 0
        self._handshake: queue.Queue = queue.Queue(maxsize=1)
        self._proc = subprocess.Popen(
            self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            text=True, encoding="utf-8", bufsize=1,
        )
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()
        try:
            hello = self._handshake.get(timeout=handshake_timeout)
        except queue.Empty:
            self.close()
            raise EvaluatorTimeout("no handshake from evaluator") from None
        if isinstance(hello, Exception):
            self.close()
            raise hello
        self.n = hello

    def _read_loop(self):
        first = True
        for raw in self._proc.stdout:
            raw = raw.rstrip("\n")
            if not raw.strip():
                continue
            try:
                msg = json.loads(raw)
                if not isinstance(msg, dict):
                    raise ValueError("not an object")
            except ValueError:
                log.error("malformed evaluator output: %r", raw)
                err = ProtocolError("malformed evaluator output", raw)
                if first:
                    self._handshake.put(err)
                    return
                self._fail_all(err)
                continue
            if first:
                first = False
                if msg.get("proto") != PROTOCOL_VERSION or not isinstance(msg.get("n"), int):
                    self._handshake.put(ProtocolError("bad handshake", raw))
                    return
                self._handshake.put(msg["n"])
                continue
            rid = msg.get("id")
            with self._lock:
                fut = self._pending.pop(rid, None) if isinstance(rid, int) else None
            if fut is None:
                log.error("response with unknown id: %r", raw)
                continue
            if "error" in msg:
                fut.set_exception(EvaluatorError(str(msg["error"])))
                continue
            loss = msg.get("loss")
            if isinstance(loss, bool) or not isinstance(loss, (int, float)) or not math.isfinite(loss):
                log.error("invalid loss from evaluator: %r", raw)
                fut.set_exception(ProtocolError("loss must be a finite number", raw))
            else:
                fut.set_result(float(loss))
        if first:
            self._handshake.put(ProtocolError("evaluator exited before handshake"))
        self._fail_all(EvaluatorError("evaluator process closed its output"))

    def _fail_all(self, exc: Exception):
        with self._lock:
            pending, self._pending = self._pending, {}
        for fut in pending.values():
            if not fut.done():
                fut.set_exception(exc)

    def submit(self, alpha, resource: float = 1.0) -> Future:
        a = as_point(alpha, self.n)
        fut: Future = Future()
        with self._lock:
            rid = self._next_id
            self._next_id += 1
            self._pending[rid] = fut
        line = json.dumps({"id": rid, "point": [int(v) for v in a], "resource": float(resource)})
        try:
            with self._write_lock:
                self._proc.stdin.write(line + "\n")
                self._proc.stdin.flush()
        except (BrokenPipeError, ValueError, OSError) as exc:
            with self._lock:
                self._pending.pop(rid, None)
            fut.set_exception(EvaluatorError(f"cannot write to evaluator: {exc}"))
        fut.request_id = rid
        return fut

    def __call__(self, alpha, resource: float = 1.0) -> float:
        for attempt in range(self.retries + 1):
            fut = self.submit(alpha, resource)
            try:
                return fut.result(timeout=self.timeout)
            except FutureTimeout:
                with self._lock:
                    self._pending.pop(fut.request_id, None)
                log.warning("evaluator request %d timed out (attempt %d)", fut.request_id, attempt + 1)
        raise EvaluatorTimeout(f"no response after {self.retries + 1} attempts")

    def close(self):
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def external_eval(endpoint: ExternalEvaluator, alpha, resource: float = 1.0) -> float:
    return endpoint(alpha, resource)


def echo_script_path() -> Path:
    return Path(__file__).with_name("echo_evaluator.py")
