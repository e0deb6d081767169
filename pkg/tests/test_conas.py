import numpy as np
import pytest

from frozen import BASIS_SIZE_140_2, SMALL_CELL_BITS, STANDARD_CELL_BITS
from instances import two_scale_polynomial
from spectral_search.conas import (
    ArchitectureSpace,
    Cell,
    SearchState,
    conas_search,
    decode_cell,
    describe_cells,
    encode_cells,
    hamming,
    recover_stage,
    repair_cell,
    sample_encoder,
    write_search_report,
)
from spectral_search.evaluators import PlantedObjective, random_sparse_polynomial
from spectral_search.fourier import Restriction, SparsePolynomial, basis_size, minimize_over_support


def test_encoder_lengths():
    assert ArchitectureSpace.standard().n == STANDARD_CELL_BITS
    assert ArchitectureSpace.standard(n_intermediate=2).n == SMALL_CELL_BITS
    assert basis_size(STANDARD_CELL_BITS, 2) == BASIS_SIZE_140_2


def test_edge_order():
    table = ArchitectureSpace.standard().edge_table
    assert table[0] == (0, 0, 2, "sep_conv_3x3")
    assert table[4] == (0, 0, 2, "identity")
    assert table[5] == (0, 1, 2, "sep_conv_3x3")
    assert table[10] == (0, 0, 3, "sep_conv_3x3")
    assert table[70] == (1, 0, 2, "sep_conv_3x3")


def test_decode_encode_roundtrip():
    space = ArchitectureSpace.standard()
    rng = np.random.default_rng(0)
    for _ in range(20):
        a = sample_encoder(space.n, None, 0.3, rng)
        assert np.array_equal(encode_cells(space, decode_cell(space, a)), a)


def test_all_inactive_and_all_active():
    space = ArchitectureSpace.standard()
    assert all(not c.edges for c in decode_cell(space, -np.ones(space.n)))
    full = decode_cell(space, np.ones(space.n))
    assert all(len(c.edges) == 70 for c in full)


def test_repair_adds_identity_edges():
    space = ArchitectureSpace.standard()
    spec = space.cells[0]
    cell = Cell(spec, ((1, 2, "sep_conv_3x3"),))
    fixed = repair_cell(cell)
    for j in spec.intermediate:
        assert fixed.incoming(j)
    assert (0, 3, "identity") in fixed.edges
    assert repair_cell(fixed) == fixed
    text = describe_cells(space, encode_cells(space, [cell, Cell(space.cells[1], ())]))
    assert "edge c_{k-1} -> 0 sep_conv_3x3" in text


def test_hamming():
    assert hamming([1, -1, 1], [1, 1, -1]) == 2
    with pytest.raises(ValueError):
        hamming([1, 1], [1, 1, 1])


def test_sample_encoder_probabilities_and_restriction():
    rng = np.random.default_rng(1)
    r = Restriction(40, {0: 1, 5: -1})
    X = sample_encoder(40, r, 0.25, rng, count=4000)
    assert np.all(X[:, 0] == 1) and np.all(X[:, 5] == -1)
    assert abs(np.mean(X[:, 1:5] > 0) - 0.25) < 0.02
    with pytest.raises(ValueError):
        sample_encoder(4, None, 1.0, rng)


def test_stage_recovers_small_planted_instance():
    n = 30
    rng = np.random.default_rng(3)
    f = random_sparse_polynomial(n, 2, 5, rng)
    obj = PlantedObjective(f, sigma=0.01, seed=1)
    alpha, state = conas_search(n, obj, m=300, t=1, s=10, d=2, lam=0.05, seed=7)
    z = state.stages[0].z
    assert set(f.support_vars) <= set(z)
    assert f(alpha) == pytest.approx(minimize_over_support(f)[1], abs=1e-9)


def test_unfixed_bits_are_inactive():
    f = SparsePolynomial(12, {(0,): 2.0, (1,): -1.0})
    alpha, state = conas_search(12, PlantedObjective(f), m=100, s=3, d=1, lam=0.01)
    assert alpha[0] == -1 and alpha[1] == 1
    assert all(alpha[i] == -1 for i in state.restriction.free)


def test_two_scale_multistage_finds_more():
    n = 40
    f, big, small = two_scale_polynomial(n, 0)
    obj = PlantedObjective(f, sigma=0.01, seed=0)

    def found(t):
        _, state = conas_search(n, obj, m=400, t=t, s=8, d=2, lam=0.05, seed=0)
        return set().union(*(set(r.g.terms) for r in state.stages)) & set(f.terms)

    one, two = found(1), found(2)
    assert one <= set(big)
    assert len(two) > len(one)


def test_stops_when_no_variables_recovered():
    f = SparsePolynomial(8, {(): 3.0})
    alpha, state = conas_search(8, PlantedObjective(f), m=50, t=3, s=4, d=1, lam=0.5)
    assert state.stop_reason and "no variables" in state.stop_reason
    assert len(state.stages) == 1
    assert np.all(alpha == -1)


def test_nonconvergence_aborts_stage(monkeypatch):
    import spectral_search.conas as conas_mod
    from spectral_search.recovery import RecoverySolution

    def never(A, y, lam):
        return RecoverySolution(np.zeros(A.shape[1]), 0.0, 10000, False, np.zeros(0))

    monkeypatch.setattr(conas_mod, "lasso", never)
    f = SparsePolynomial(6, {(0,): 1.0})
    _, state = conas_search(6, PlantedObjective(f), m=20, t=2, s=2, d=1)
    assert not state.stages
    assert "did not converge" in state.stop_reason


def test_t4_accepted_and_report(tmp_path):
    space = ArchitectureSpace.standard(n_intermediate=2)
    f = random_sparse_polynomial(space.n, 2, 4, np.random.default_rng(2))
    alpha, state = conas_search(space, PlantedObjective(f, sigma=0.01), m=200, t=4, s=6, d=2, lam=0.05, seed=1)
    assert 1 <= len(state.stages) <= 4
    write_search_report(tmp_path / "rep.txt", alpha, state, space, {"seed": 1})
    text = (tmp_path / "rep.txt").read_text()
    assert "[stage 1]" in text and "cell normal" in text and "alpha_star:" in text


def test_recover_stage_uses_global_indices():
    r = Restriction(10, {0: 1, 1: -1})
    f = SparsePolynomial(10, {(5,): 1.0, (7, 9): -1.0})
    rng = np.random.default_rng(0)
    X = sample_encoder(10, r, 0.5, rng, count=80)
    rep = recover_stage(X, f.evaluate_many(X), r, d=2, s=2, lam=0.01)
    assert set(rep.g.terms) == {(5,), (7, 9)}
    assert set(rep.z) == {5, 7, 9}
    assert isinstance(SearchState(10, r).alpha_star(), np.ndarray)
