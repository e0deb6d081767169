"""Planted instances shared by several test modules."""

import numpy as np

from spectral_search.encoding import HyperparamSpace
from spectral_search.fourier import SparsePolynomial


def two_category_space():
    return HyperparamSpace.from_config([
        {"name": "lr", "exponent_bits": 3, "exponent_offset": -6, "mantissa_bits": 2},
        {"name": "wd", "exponent_bits": 3, "exponent_offset": -6, "mantissa_bits": 2},
    ])


BASIN_TARGETS = {"lr": -3, "wd": -5}


def two_scale_polynomial(n, seed):
    """Eight large terms and four small ones on disjoint variables.

    With s=8 the first stage can only keep large terms; once their variables
    are fixed the small terms dominate what is left.
    """
    rng = np.random.default_rng(seed)
    vs = list(rng.permutation(n))
    big, small = {}, {}
    for k in range(8):
        S = tuple(sorted(vs[:2])) if k % 2 else (vs[0],)
        vs = vs[len(S):]
        big[S] = rng.choice([-1, 1]) * rng.uniform(4, 6)
    for k in range(4):
        S = tuple(sorted(vs[:2])) if k % 2 else (vs[0],)
        vs = vs[len(S):]
        small[S] = rng.choice([-1, 1]) * rng.uniform(0.8, 1.2)
    return SparsePolynomial(n, {**big, **small}), big, small


def separated_polynomial(n=140):
    """Well-separated terms on disjoint variables, magnitudes 3 to 10."""
    return SparsePolynomial(n, {(): 10, (3,): 4, (10, 11): -5, (40,): 3.5, (70, 90): 4.5, (120,): -3})
