import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from monarchcim import monarch
from monarchcim.errors import DimensionError
from monarchcim.monarch import (
    BlockDiagonalFactor,
    MonarchMatrix,
    PermutationSpec,
    block_diag_mvm,
    counters,
    d2s_project,
    expand_to_dense,
    fold_permutations,
    monarch_mvm,
    pad_to_square,
    permute,
    rank1_approx,
    random_monarch,
)


def svd_2x2(a):
    """Closed-form singular values of a 2x2 matrix (test oracle)."""
    t = np.trace(a.T @ a)
    det = np.linalg.det(a)
    disc = max(t * t - 4.0 * det * det, 0.0)
    s1 = np.sqrt(max((t + np.sqrt(disc)) / 2.0, 0.0))
    s2 = np.sqrt(max((t - np.sqrt(disc)) / 2.0, 0.0))
    return s1, s2


class TestPermute:
    def test_identity_n1(self):
        spec = PermutationSpec(n=1, b=1)
        np.testing.assert_array_equal(permute(np.array([5.0]), spec), [5.0])

    def test_n4_transpose(self):
        spec = PermutationSpec(n=4, b=2)
        x = np.array([0.0, 1.0, 2.0, 3.0])
        np.testing.assert_array_equal(permute(x, spec), [0.0, 2.0, 1.0, 3.0])

    def test_involution_n16(self):
        spec = PermutationSpec(n=16, b=4)
        x = np.random.default_rng(0).standard_normal(16)
        np.testing.assert_array_equal(permute(permute(x, spec), spec), x)

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            permute(np.zeros(5), PermutationSpec(n=4, b=2))

    @given(st.sampled_from([1, 2, 3, 4, 5]), st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_bijection_property(self, b, seed):
        n = b * b
        spec = PermutationSpec(n=n, b=b)
        x = np.arange(n, dtype=float)
        out = permute(x, spec)
        assert sorted(out.tolist()) == x.tolist()
        np.testing.assert_array_equal(permute(out, spec), x)

    def test_matches_index_array(self):
        spec = PermutationSpec(n=12, b=3)
        x = np.random.default_rng(1).standard_normal(12)
        p = monarch.permutation_indices(spec)
        np.testing.assert_array_equal(permute(x, spec), x[p])


class TestBlockDiagMvm:
    def test_single_block_is_dense_matvec(self):
        rng = np.random.default_rng(2)
        blocks = rng.standard_normal((1, 3, 3))
        x = rng.standard_normal(3)
        f = BlockDiagonalFactor(blocks)
        np.testing.assert_allclose(block_diag_mvm(f, x), blocks[0] @ x)

    def test_identity_blocks(self):
        f = BlockDiagonalFactor(np.broadcast_to(np.eye(4), (3, 4, 4)).copy())
        x = np.random.default_rng(3).standard_normal(12)
        np.testing.assert_array_equal(block_diag_mvm(f, x), x)

    def test_matches_dense_expansion(self):
        rng = np.random.default_rng(4)
        f = BlockDiagonalFactor(rng.standard_normal((2, 2, 2)))
        x = rng.standard_normal(4)
        dense = f.to_dense()
        got = block_diag_mvm(f, x)
        np.testing.assert_allclose(got, dense @ x, rtol=1e-12)

    def test_interleaved_matches_dense(self):
        rng = np.random.default_rng(5)
        f = BlockDiagonalFactor(rng.standard_normal((3, 3, 3)), layout="interleaved")
        x = rng.standard_normal(9)
        np.testing.assert_allclose(block_diag_mvm(f, x), f.to_dense() @ x, rtol=1e-12)

    def test_flop_counter(self):
        f = BlockDiagonalFactor(np.zeros((4, 2, 2)))
        counters.reset()
        block_diag_mvm(f, np.zeros(8))
        assert counters.flops == 2 * 8 * 2

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            block_diag_mvm(BlockDiagonalFactor(np.zeros((2, 2, 2))), np.zeros(5))


class TestMonarchMvm:
    def test_b1_scalar_diagonal(self):
        rng = np.random.default_rng(6)
        l = rng.standard_normal((4, 1, 1))
        r = rng.standard_normal((4, 1, 1))
        m = MonarchMatrix(
            BlockDiagonalFactor(l), BlockDiagonalFactor(r), PermutationSpec(4, 1)
        )
        x = rng.standard_normal(4)
        np.testing.assert_allclose(
            monarch_mvm(m, x), l[:, 0, 0] * r[:, 0, 0] * x, rtol=1e-12
        )

    def test_matches_dense_oracle_n16(self):
        rng = np.random.default_rng(7)
        m = random_monarch(16, rng)
        x = rng.standard_normal(16)
        want = expand_to_dense(m) @ x
        got = monarch_mvm(m, x)
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)

    def test_zero_input(self):
        m = random_monarch(16, np.random.default_rng(8))
        np.testing.assert_array_equal(monarch_mvm(m, np.zeros(16)), np.zeros(16))

    def test_batched_inputs(self):
        rng = np.random.default_rng(9)
        m = random_monarch(16, rng)
        xs = rng.standard_normal((16, 5))
        got = monarch_mvm(m, xs)
        for j in range(5):
            np.testing.assert_allclose(got[:, j], monarch_mvm(m, xs[:, j]))

    def test_flop_total_4nb(self):
        m = random_monarch(16, np.random.default_rng(10))
        counters.reset()
        monarch_mvm(m, np.zeros(16))
        assert counters.flops == 4 * 16 * 4


class TestExpandToDense:
    def test_identity_factors_give_permutation(self):
        n, b = 16, 4
        eye = np.broadcast_to(np.eye(b), (b, b, b)).copy()
        m = MonarchMatrix(
            BlockDiagonalFactor(eye.copy()),
            BlockDiagonalFactor(eye.copy()),
            PermutationSpec(n, b),
        )
        p = monarch.permutation_indices(m.perm)
        pm = np.zeros((n, n))
        pm[np.arange(n), p] = 1.0
        np.testing.assert_allclose(expand_to_dense(m), pm)

    def test_b1_is_diagonal(self):
        m = random_monarch(1, np.random.default_rng(11))
        dense = expand_to_dense(m)
        assert dense.shape == (1, 1)

    def test_basis_vector_sweep(self):
        rng = np.random.default_rng(12)
        m = random_monarch(16, rng)
        dense = expand_to_dense(m)
        for k in range(16):
            e = np.zeros(16)
            e[k] = 1.0
            np.testing.assert_allclose(dense[:, k], monarch_mvm(m, e), rtol=1e-12,
                                       atol=1e-12)


class TestFold:
    def test_folded_matches_unfolded(self):
        rng = np.random.default_rng(13)
        m = random_monarch(16, rng)
        mf = fold_permutations(m)
        for _ in range(100):
            x = rng.standard_normal(16)
            a, b_ = monarch_mvm(m, x), monarch_mvm(mf, x)
            np.testing.assert_allclose(a, b_, rtol=1e-12, atol=1e-12)

    def test_identity_factors_fold_to_single_permute(self):
        n, b = 16, 4
        eye = np.broadcast_to(np.eye(b), (b, b, b)).copy()
        m = MonarchMatrix(
            BlockDiagonalFactor(eye.copy()),
            BlockDiagonalFactor(eye.copy()),
            PermutationSpec(n, b),
        )
        mf = fold_permutations(m)
        x = np.random.default_rng(14).standard_normal(n)
        np.testing.assert_allclose(monarch_mvm(mf, x), permute(x, m.perm))

    def test_permutation_counts_1_vs_3(self):
        m = random_monarch(16, np.random.default_rng(15))
        x = np.zeros(16)
        counters.reset()
        monarch_mvm(m, x)
        assert counters.permutes == 3
        counters.reset()
        monarch_mvm(fold_permutations(m), x)
        assert counters.permutes == 1

    def test_folded_dense_matches_unfolded_dense(self):
        m = random_monarch(16, np.random.default_rng(16))
        np.testing.assert_allclose(
            expand_to_dense(m), expand_to_dense(fold_permutations(m)), rtol=1e-12
        )


class TestRank1Approx:
    def test_exact_rank1(self):
        a = np.outer([1.0, 2.0], [3.0, 4.0])
        u, v, res = rank1_approx(a)
        assert res <= 1e-10
        np.testing.assert_allclose(np.outer(u, v), a, atol=1e-10)

    def test_zero_matrix(self):
        u, v, res = rank1_approx(np.zeros((3, 3)))
        assert res == 0.0
        assert not u.any() and not v.any()

    def test_residual_matches_closed_form_2x2(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            a = rng.standard_normal((2, 2))
            _, _, res = rank1_approx(a)
            _, s2 = svd_2x2(a)
            assert abs(res - s2) < 1e-10

    def test_ones_orthogonal_to_dominant(self):
        # dominant right singular vector [1, -1]/sqrt(2) is orthogonal to ones
        a = np.array([[2.0, -2.0], [-2.0, 2.0]])
        u, v, res = rank1_approx(a)
        np.testing.assert_allclose(np.outer(u, v), a, atol=1e-9)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            rank1_approx(np.array([[np.nan, 0.0], [0.0, 1.0]]))


class TestD2SProject:
    def test_lossless_round_trip_n16(self):
        rng = np.random.default_rng(18)
        w = expand_to_dense(random_monarch(16, rng))
        _, err = d2s_project(w, 4)
        assert err <= 1e-8 * np.linalg.norm(w)

    def test_zero_matrix(self):
        m, err = d2s_project(np.zeros((4, 4)), 2)
        assert err == 0.0
        assert not m.L.blocks.any() and not m.R.blocks.any()

    def test_error_matches_per_slice_svd_n4(self):
        rng = np.random.default_rng(19)
        w = rng.standard_normal((4, 4))
        _, err = d2s_project(w, 2)
        stride = 2 * np.arange(2)
        want = 0.0
        for alpha in range(2):
            for betap in range(2):
                a = w[np.ix_(stride + alpha, stride + betap)]
                _, s2 = svd_2x2(a)
                want += s2 * s2
        assert abs(err - np.sqrt(want)) < 1e-8

    def test_rejects_bad_block_size(self):
        with pytest.raises(DimensionError):
            d2s_project(np.zeros((6, 6)), 2)

    def test_slice_residual_dominates_random_rank1(self):
        # Monte Carlo dominance: no random rank-1 candidate beats the projection
        rng = np.random.default_rng(20)
        w = rng.standard_normal((4, 4))
        stride = 2 * np.arange(2)
        for alpha in range(2):
            for betap in range(2):
                a = w[np.ix_(stride + alpha, stride + betap)]
                _, _, res = rank1_approx(a)
                for _ in range(1000):
                    u = rng.standard_normal(2)
                    v = rng.standard_normal(2)
                    scale = u @ a @ v / ((u @ u) * (v @ v))
                    cand = np.linalg.norm(a - scale * np.outer(u, v))
                    assert res <= cand + 1e-12


class TestPadToSquare:
    def test_square_power_of_4_passthrough(self):
        w = np.ones((16, 16))
        padded, n, b = pad_to_square(w)
        assert n == 16 and b == 4
        np.testing.assert_array_equal(padded, w)

    def test_rectangular_1024x3072(self):
        w = np.zeros((4, 12))
        padded, n, b = pad_to_square(w)
        assert n == 16 and b == 4
        assert padded.shape == (16, 16)
