import math
from functools import reduce
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from egoe.ensemble import draw_coefficients, member_stream
from egoe.fock import (
    annihilate_subset,
    build_H0_matrix,
    build_V_matrix,
    create_subset,
    dump_matrix,
    enumerate_basis,
    kbody_structure,
    levels_of,
    load_matrix,
    mask_of,
    popcount,
    sp_energies,
    subset_index,
)


def jw_creation(N):
    """Dense a+_i on the 2^N Fock space; sign = (-1)^(occupied levels below i)."""
    dim = 1 << N
    ops = []
    for i in range(N):
        a = np.zeros((dim, dim))
        for s in range(dim):
            if not s >> i & 1:
                a[s | 1 << i, s] = (-1) ** popcount(s & ((1 << i) - 1))
        ops.append(a)
    return ops


def dense_V(N, m, k, coeffs):
    """Oracle: sum_ab v[a, b] alpha+ beta with explicit operator products."""
    cdag = jw_creation(N)
    subsets = sorted(combinations(range(N), k), key=lambda c: sum(1 << i for i in c))
    strings = [reduce(np.matmul, [cdag[i] for i in c]) for c in subsets]
    full = sum(
        coeffs[a, b] * strings[a] @ strings[b].T
        for a in range(len(subsets))
        for b in range(len(subsets))
    )
    basis = enumerate_basis(N, m)
    return full[np.ix_(basis, basis)]


def random_coeffs(N, k, seed=0):
    return draw_coefficients(N, k, member_stream(seed, 0))


class TestBasis:
    def test_small(self):
        got = [levels_of(int(s)) for s in enumerate_basis(4, 2)]
        assert got == [[1, 2], [1, 3], [2, 3], [1, 4], [2, 4], [3, 4]]

    @pytest.mark.parametrize("N,m", [(10, 5), (12, 6), (7, 0), (6, 6), (20, 3)])
    def test_counts_and_order(self, N, m):
        b = enumerate_basis(N, m)
        assert len(b) == math.comb(N, m)
        assert np.all(np.diff(b) > 0)
        assert all(popcount(int(s)) == m for s in b)

    def test_errors(self):
        with pytest.raises(ValueError):
            enumerate_basis(4, 5)
        with pytest.raises(ValueError):
            enumerate_basis(64, 1)

    def test_subset_rank_bijection(self):
        idx = subset_index(8, 3)
        assert sorted(idx.values()) == list(range(56))
        assert len(set(idx)) == 56


class TestOperators:
    def test_annihilate_examples(self):
        assert annihilate_subset(mask_of([1, 3]), mask_of([1, 3])) == (0, 1)
        assert annihilate_subset(mask_of([1, 3]), mask_of([3])) == (mask_of([1]), -1)
        assert annihilate_subset(mask_of([1, 3]), mask_of([2])) is None

    def test_create_examples(self):
        assert create_subset(0, mask_of([1, 3])) == (mask_of([1, 3]), 1)
        assert create_subset(mask_of([2]), mask_of([1])) == (mask_of([1, 2]), 1)
        assert create_subset(mask_of([1]), mask_of([1])) is None

    @given(st.integers(0, (1 << 12) - 1), st.integers(0, (1 << 12) - 1))
    def test_round_trip(self, state, raw):
        sub = state & raw
        rest, ph1 = annihilate_subset(state, sub)
        back, ph2 = create_subset(rest, sub)
        assert back == state
        assert ph1 * ph2 == 1

    @given(st.integers(0, (1 << 6) - 1), st.integers(1, (1 << 6) - 1))
    def test_matches_jordan_wigner(self, state, sub):
        N = 6
        cdag = jw_creation(N)
        string = reduce(np.matmul, [cdag[lv - 1] for lv in levels_of(sub)])
        ket = np.zeros(1 << N)
        ket[state] = 1.0
        created = string @ ket
        res = create_subset(state, sub)
        if res is None:
            assert not created.any()
        else:
            s, ph = res
            assert created[s] == ph and np.count_nonzero(created) == 1
        removed = string.T @ ket
        res = annihilate_subset(state, sub)
        if res is None:
            assert not removed.any()
        else:
            s, ph = res
            assert removed[s] == ph and np.count_nonzero(removed) == 1


class TestVMatrix:
    @pytest.mark.parametrize("N,m,k", [(5, 2, 1), (5, 2, 2), (5, 3, 1), (5, 3, 2), (6, 3, 2), (6, 4, 3)])
    def test_against_dense_operators(self, N, m, k):
        v = random_coeffs(N, k, seed=N * 100 + m * 10 + k)
        np.testing.assert_allclose(build_V_matrix(N, m, k, v), dense_V(N, m, k, v), atol=1e-12)

    @pytest.mark.parametrize("N,m", [(10, 5), (6, 3), (8, 2)])
    def test_goe_reduction_bit_identical(self, N, m):
        v = random_coeffs(N, m, seed=3)
        V = build_V_matrix(N, m, m, v)
        assert np.array_equal(V, v)

    def test_two_level(self):
        v = np.array([[0.3, -1.2], [-1.2, 2.5]])
        assert np.array_equal(build_V_matrix(2, 1, 1, v), v)

    @pytest.mark.parametrize("N,m,k", [(10, 5, 1), (10, 5, 2), (10, 5, 3), (8, 4, 2)])
    def test_symmetry_and_selection_rule(self, N, m, k):
        V = build_V_matrix(N, m, k, random_coeffs(N, k, seed=k))
        assert np.array_equal(V, V.T)
        basis = enumerate_basis(N, m)
        diff = np.array([[popcount(int(a) ^ int(b)) for b in basis] for a in basis])
        assert np.all(V[diff > 2 * k] == 0)
        # every allowed pair carries weight for generic coefficients
        assert np.all(V[diff <= 2 * k] != 0)

    def test_number_conservation(self):
        st_ = kbody_structure(9, 4, 2)
        basis = enumerate_basis(9, 4)
        pc = np.array([popcount(int(s)) for s in basis])
        assert np.all(pc[st_.row] == pc[st_.col])

    def test_structure_size(self):
        N, m, k = 10, 5, 2
        st_ = kbody_structure(N, m, k)
        d = math.comb(N, m)
        total = d * math.comb(m, k) * math.comb(N - m + k, k)
        # diagonal terms (alpha == beta) appear once, the rest are split over the triangles
        diag = d * math.comb(m, k)
        assert len(st_.row) == diag + (total - diag) // 2
        assert np.all(st_.row <= st_.col)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            build_V_matrix(6, 3, 2, np.zeros((10, 10)))


class TestH0:
    def test_entries(self):
        H0 = build_H0_matrix(4, 2, sp_energies(4))
        assert H0[0, 0] == pytest.approx(4.5)
        assert np.count_nonzero(H0 - np.diag(np.diag(H0))) == 0

    def test_empty(self):
        H0 = build_H0_matrix(4, 0, sp_energies(4))
        assert H0.shape == (1, 1) and H0[0, 0] == 0.0

    def test_sp_energies(self):
        eps = sp_energies(200)
        assert eps[0] == 2.0
        assert eps[9] == pytest.approx(10.1)
        assert np.diff(eps)[-1] == pytest.approx(1.0, abs=1e-4)


def test_dump_round_trip(tmp_path):
    H = build_V_matrix(6, 3, 2, random_coeffs(6, 2))
    path = tmp_path / "m.bin"
    dump_matrix(path, H, 6, 3, 2)
    back, hdr = load_matrix(path)
    assert hdr == (6, 3, 2)
    assert np.array_equal(back, H)
    assert path.stat().st_size == 8 + 32 + 8 * H.size
