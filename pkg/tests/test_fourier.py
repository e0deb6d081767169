import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import all_points, exhaustive_min, naive_eval, naive_transform
from spectral_search.fourier import (
    BasisFamily,
    CapExceededError,
    DimensionError,
    Restriction,
    SparsePolynomial,
    basis_size,
    brute_force_transform,
    enumerate_basis,
    format_polynomial,
    fourier_coefficient,
    hypercube,
    minimize_over_support,
    parity,
    parity_columns,
    parse_polynomial,
    poly_eval,
    restrict,
    truth_table,
)


def polys(max_n=6):
    @st.composite
    def build(draw):
        n = draw(st.integers(1, max_n))
        subsets = [S for k in range(n + 1) for S in itertools.combinations(range(n), k)]
        chosen = draw(st.lists(st.sampled_from(subsets), max_size=8, unique=True))
        coefs = draw(st.lists(st.floats(-5, 5, allow_nan=False).filter(lambda c: abs(c) > 1e-3),
                              min_size=len(chosen), max_size=len(chosen)))
        return SparsePolynomial(n, dict(zip(chosen, coefs)))
    return build()


# --- parity and hypercube ---------------------------------------------------

def test_hypercube_order_matches_product():
    assert [tuple(p) for p in hypercube(3)] == all_points(3)


def test_parity_values():
    a = np.array([1, -1, -1, 1])
    assert parity((), a) == 1
    assert parity((1,), a) == -1
    assert parity((1, 2), a) == 1
    assert parity((0, 1, 2, 3), a) == 1


def test_parity_index_errors():
    with pytest.raises(DimensionError):
        parity((4,), np.ones(4))
    with pytest.raises(ValueError):
        parity((0,), np.array([1, 0, 1]))


def test_parity_columns_agrees_with_parity():
    rng = np.random.default_rng(0)
    X = (2 * rng.integers(0, 2, (30, 6)) - 1).astype(np.int8)
    basis = enumerate_basis(6, 3)
    C = parity_columns(X, basis)
    for r in range(30):
        for k, S in enumerate(basis):
            assert C[r, k] == parity(S, X[r])


# --- basis ------------------------------------------------------------------

@pytest.mark.parametrize("n,d", [(1, 0), (1, 1), (5, 2), (8, 3), (20, 2), (140, 2)])
def test_basis_size_formula(n, d):
    b = enumerate_basis(n, d)
    assert len(b) == basis_size(n, d) == sum(math.comb(n, k) for k in range(d + 1))


def test_basis_order_degree_then_lex():
    b = list(enumerate_basis(4, 2))
    assert b[:6] == [(), (0,), (1,), (2,), (3,), (0, 1)]
    assert b == sorted(b, key=lambda S: (len(S), S))
    assert len(set(b)) == len(b)


def test_basis_degree_above_n():
    with pytest.raises(ValueError):
        enumerate_basis(3, 4)


def test_basis_position_roundtrip():
    b = enumerate_basis(7, 3)
    for k, S in enumerate(b):
        assert b.position(S) == k
    assert isinstance(b, BasisFamily)


# --- transform --------------------------------------------------------------

def test_majority_on_three_bits():
    table = np.sign(hypercube(3).sum(axis=1)).astype(float)
    p = brute_force_transform(table)
    assert p.terms == pytest.approx({(0,): 0.5, (1,): 0.5, (2,): 0.5, (0, 1, 2): -0.5})


@pytest.mark.parametrize("n", [1, 2, 3, 5, 7])
def test_transform_matches_definition(n):
    rng = np.random.default_rng(n)
    vals = rng.normal(size=2**n)
    expected = naive_transform(list(vals), n)
    got = brute_force_transform(vals, tol=0.0)
    for S, c in expected.items():
        assert got.terms.get(S, 0.0) == pytest.approx(c, abs=1e-12)
        assert fourier_coefficient(vals, S) == pytest.approx(c, abs=1e-12)


def test_constant_and_parity_functions():
    assert brute_force_transform(np.full(16, 3.0)).terms == {(): 3.0}
    table = np.array([parity((0, 2), a) for a in hypercube(4)], dtype=float)
    assert brute_force_transform(table).terms == {(0, 2): 1.0}


def test_transform_cap_and_shape():
    with pytest.raises(CapExceededError):
        brute_force_transform(np.zeros(2**5), cap=4)
    with pytest.raises(DimensionError):
        brute_force_transform(np.zeros(6))


@settings(max_examples=60, deadline=None)
@given(polys())
def test_roundtrip_polynomial_table(p):
    back = brute_force_transform(truth_table(p))
    assert set(back.terms) == set(p.terms)
    for S, c in p.terms.items():
        assert back.terms[S] == pytest.approx(c, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(polys())
def test_parseval(p):
    table = truth_table(p)
    assert np.mean(table**2) == pytest.approx(sum(c * c for c in p.terms.values()), abs=1e-10)


# --- polynomials ------------------------------------------------------------

def test_polynomial_drops_zeros_and_orders():
    p = SparsePolynomial(3, {(2,): 1.0, (): 0.0, (0, 1): 2.0, (0,): -1.0})
    assert list(p.terms) == [(0,), (2,), (0, 1)]
    assert p.degree == 2
    assert p.support_vars == (0, 1, 2)


def test_polynomial_rejects_bad_monomials():
    with pytest.raises(DimensionError):
        SparsePolynomial(2, {(2,): 1.0})
    with pytest.raises(ValueError):
        SparsePolynomial(2, {(0,): float("nan")})


@settings(max_examples=40, deadline=None)
@given(polys(5))
def test_eval_matches_oracle(p):
    pts = all_points(p.n)
    many = p.evaluate_many(np.array(pts))
    for a, v in zip(pts, many):
        assert poly_eval(p, np.array(a)) == pytest.approx(naive_eval(p.terms, a), abs=1e-12)
        assert v == pytest.approx(naive_eval(p.terms, a), abs=1e-12)


def test_text_roundtrip():
    p = SparsePolynomial(5, {(): 0.25, (0,): -1.5, (1, 4): 1 / 3})
    text = format_polynomial(p)
    assert text.splitlines()[0] == "0 : 0.25"
    assert "2,5 : " in text
    assert parse_polynomial(text, 5) == p
    with pytest.raises(ValueError, match="line 1"):
        parse_polynomial("1,2 - 3", 5)


# --- restriction and minimization ---------------------------------------------

def test_restriction_merges_terms():
    p = SparsePolynomial(2, {(0,): 2, (1,): 1, (0, 1): 1})
    q = restrict(p, Restriction(2, {1: 1}))
    assert q.terms == {(): 1.0, (0,): 3.0}


@settings(max_examples=40, deadline=None)
@given(polys(6), st.data())
def test_restriction_agrees_with_evaluation(p, data):
    fixed_vars = data.draw(st.lists(st.integers(0, p.n - 1), unique=True, max_size=p.n))
    fixed = {i: data.draw(st.sampled_from([-1, 1])) for i in fixed_vars}
    r = Restriction(p.n, fixed)
    q = restrict(p, r)
    assert q.n == len(r.free)
    for z in itertools.product((-1, 1), repeat=len(r.free)):
        full = r.merge(np.array(z, dtype=np.int8)) if r.free else r.merge([])
        assert q(np.array(z, dtype=np.int8)) == pytest.approx(p(full), abs=1e-9)


def test_restriction_validation():
    with pytest.raises(DimensionError):
        Restriction(3, {3: 1})
    with pytest.raises(ValueError):
        Restriction(3, {0: 0})
    r = Restriction(3, {0: 1})
    with pytest.raises(ValueError):
        r.extend({0: -1})
    assert r.extend({2: -1}).free == (1,)
    assert r.agrees(np.array([1, -1, 1])) and not r.agrees(np.array([-1, 1, 1]))


def test_minimize_small_example():
    z, v = minimize_over_support(SparsePolynomial(2, {(0,): 2, (0, 1): -1}))
    assert z == {0: -1, 1: -1}
    assert v == -3


def test_minimize_tie_break_prefers_lexicographically_first():
    z, v = minimize_over_support(SparsePolynomial(3, {(0, 2): 1.0}))
    assert v == -1
    assert z == {0: -1, 2: 1}


def test_minimize_empty_and_cap():
    assert minimize_over_support(SparsePolynomial(4, {(): 2.5})) == ({}, 2.5)
    with pytest.raises(CapExceededError):
        minimize_over_support(SparsePolynomial(6, {(i,): 1.0 for i in range(6)}), cap=5)


@settings(max_examples=40, deadline=None)
@given(polys(7))
def test_minimize_matches_exhaustive(p):
    z, v = minimize_over_support(p, chunk=8)
    assert v == pytest.approx(exhaustive_min(p.terms, p.n), abs=1e-9)
    alpha = np.ones(p.n, dtype=np.int8)
    for i, val in z.items():
        alpha[i] = val
    assert p(alpha) == pytest.approx(v, abs=1e-9)
