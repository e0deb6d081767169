"""Cell search at full scale against a planted objective.

140 encoder bits (two cells, four intermediate nodes, five operations),
degree-2 basis with 9871 columns, 1000 measurements, keep 10 terms.

Run: python demos/04_conas_planted.py
"""

import logging

import numpy as np

from spectral_search.conas import ArchitectureSpace, conas_search, describe_cells
from spectral_search.evaluators import PlantedObjective, random_sparse_polynomial
from spectral_search.fourier import format_polynomial, minimize_over_support

logging.basicConfig(level=logging.ERROR)
space = ArchitectureSpace.standard()
planted = random_sparse_polynomial(space.n, 2, 5, np.random.default_rng(3))
obj = PlantedObjective(planted, sigma=0.01, seed=0)
alpha, state = conas_search(space, obj, m=1000, t=1, s=10, d=2, lam=0.05, seed=0)
print("planted:\n" + format_polynomial(planted))
print("stage-1 fit (top 10 terms):\n" + format_polynomial(state.stages[0].g))
print("planted minimum", minimize_over_support(planted)[1], "value at alpha*", planted(alpha))
print(describe_cells(space, alpha))
