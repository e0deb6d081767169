"""Hyperband against recovery-guided Hyperband on a planted bowl.

The objective is a quadratic in the decoded exponents of two log-scaled
hyperparameters with its minimum at learning rate 1e-3, weight decay 1e-5.
Once 60 evaluations exist at a resource level, the guided sampler fits a
group lasso, minimizes the fitted polynomial and samples mostly inside
the corresponding subcube.

Run: python demos/03_hyperband_pgsr.py
"""

import logging
import math

import numpy as np

from spectral_search.encoding import HyperparamSpace
from spectral_search.evaluators import PlantedObjective, basin_polynomial
from spectral_search.hyperband import PgsrConfig, SchedulerConfig, hyperband, pgsr_hb

logging.basicConfig(level=logging.ERROR)
space = HyperparamSpace.from_config([
    {"name": "lr", "exponent_bits": 3, "exponent_offset": -6, "mantissa_bits": 2},
    {"name": "wd", "exponent_bits": 3, "exponent_offset": -6, "mantissa_bits": 2},
])
targets = {"lr": -3, "wd": -5}
surface = basin_polynomial(space, targets, weight=0.1)
sched = SchedulerConfig(R=81, eta=3, cycles=2)
pgsr = PgsrConfig(sparsity=16, degree=2, min_obs=60, rho=0.1, lam=0.01)


def in_basin(point):
    vals = space.decode_dict(point)
    return all(math.floor(math.log10(vals[k]) + 1e-12) == e for k, e in targets.items())


for seed in range(3):
    obj = PlantedObjective(surface, sigma=0.05, seed=seed, max_resource=sched.R)
    hb = hyperband(sched, space, obj, seed=seed)
    pg = pgsr_hb(sched, pgsr, space, obj, seed=seed)
    share = lambda res: np.mean([in_basin(r.point) for r in res.history.records])
    print(f"seed {seed}: hyperband best {hb.best_loss:+.3f} ({share(hb):.0%} of samples in basin), "
          f"guided best {pg.best_loss:+.3f} ({share(pg):.0%} in basin)")
    fixed = next((r.restriction.fixed for _, _, r in pg.recoveries if r is not None), None)
    if fixed is not None and seed == 0:
        print("  first recovered restriction (bit: value):", {i + 1: v for i, v in fixed.items()})
