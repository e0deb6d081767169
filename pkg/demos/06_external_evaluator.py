"""Driving an evaluator that runs in its own process.

The shipped echo evaluator returns the number of +1 bits.  It answers in
batches of four in reverse order, so replies arrive out of order and are
matched back by request id.

Run: python demos/06_external_evaluator.py
"""

import sys

import numpy as np

from spectral_search.evaluators import ExternalEvaluator

cmd = [sys.executable, "-m", "spectral_search.echo_evaluator", "--n", "8", "--batch", "4"]
rng = np.random.default_rng(0)
points = (2 * rng.integers(0, 2, (8, 8)) - 1).astype(np.int8)
with ExternalEvaluator(cmd, timeout=10) as ev:
    futures = [ev.submit(p) for p in points]
    for p, f in zip(points, futures):
        print("".join("+" if v > 0 else "-" for v in p), "->", f.result(timeout=10))
