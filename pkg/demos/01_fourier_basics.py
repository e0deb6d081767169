"""Parity basis, exact transforms, restrictions, and subcube minimization.

Run: python demos/01_fourier_basics.py
"""

import numpy as np

from spectral_search.fourier import (
    Restriction,
    SparsePolynomial,
    brute_force_transform,
    enumerate_basis,
    format_polynomial,
    hypercube,
    minimize_over_support,
    restrict,
)

# Majority of three bits has weight only on odd-size subsets.
maj = np.sign(hypercube(3).sum(axis=1)).astype(float)
print("MAJ_3 =\n" + format_polynomial(brute_force_transform(maj)))

# A degree-2 basis on 140 bits is still small enough for a dense solver.
print("degree-2 basis on 140 bits:", len(enumerate_basis(140, 2)), "columns")

# Fixing a coordinate merges terms.
p = SparsePolynomial(2, {(0,): 2.0, (1,): 1.0, (0, 1): 1.0})
q = restrict(p, Restriction(2, {1: 1}))
print("p =", format_polynomial(p).strip().replace("\n", "; "), "-> fix bit 2 = +1 ->", format_polynomial(q).strip().replace("\n", "; "))

# Exhaustive minimization touches only the support variables.
g = SparsePolynomial(30, {(4,): 2.0, (4, 17): -1.0, (29,): 0.5})
z, value = minimize_over_support(g)
print("argmin on support:", {i + 1: v for i, v in z.items()}, "value", value)
