import numpy as np
import pytest

from gossipopt.linalg import (
    as_matrix,
    check_finite,
    column_mean,
    consensus_residual,
    frobenius_sq,
    matmul,
    operator_norm_sq,
    symmetric_eigenpairs,
    symmetric_eigenvalues,
)


class TestMatmul:
    def test_identity_left(self):
        m = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(matmul(np.eye(2), m), m)

    def test_hand_product(self):
        out = matmul([[1.0, 2.0], [3.0, 4.0]], [[0.0], [1.0]])
        np.testing.assert_array_equal(out, [[2.0], [4.0]])

    def test_matches_triple_loop(self):
        """Random product agrees with the naive three-loop evaluation."""
        gen = np.random.default_rng(42)
        a = gen.normal(size=(3, 4))
        b = gen.normal(size=(4, 2))
        expect = np.zeros((3, 2))
        for i in range(3):
            for j in range(2):
                for k in range(4):
                    expect[i, j] += a[i, k] * b[k, j]
        np.testing.assert_allclose(matmul(a, b), expect, atol=1e-14)

    def test_inner_dimension_error_names_both_shapes(self):
        with pytest.raises(ValueError, match=r"\(2, 3\).*\(2, 2\)"):
            matmul(np.ones((2, 3)), np.ones((2, 2)))

    def test_rejects_non_finite(self):
        bad = np.array([[np.inf, 0.0], [0.0, 1.0]])
        with np.errstate(invalid="ignore"), pytest.raises(FloatingPointError):
            matmul(bad, np.eye(2))


class TestColumnMean:
    def test_identical_columns(self):
        c = np.array([2.0, -1.0, 5.0])
        m = np.tile(c[:, None], (1, 4))
        np.testing.assert_array_equal(column_mean(m), c)

    def test_hand_value(self):
        np.testing.assert_array_equal(column_mean([[1.0, 3.0], [2.0, 4.0]]), [2.0, 3.0])

    def test_residual_mean_is_zero(self):
        gen = np.random.default_rng(7)
        m = gen.normal(size=(5, 8))
        np.testing.assert_allclose(
            column_mean(consensus_residual(m)), np.zeros(5), atol=1e-12
        )


class TestConsensusResidual:
    def test_consensus_matrix_gives_zero(self):
        m = np.tile(np.array([[1.0], [2.0]]), (1, 3))
        np.testing.assert_array_equal(consensus_residual(m), np.zeros((2, 3)))

    def test_hand_value(self):
        np.testing.assert_array_equal(consensus_residual([[1.0, 3.0]]), [[-1.0, 1.0]])

    def test_rows_sum_to_zero(self):
        gen = np.random.default_rng(3)
        m = gen.normal(size=(4, 6)) * 100
        sums = consensus_residual(m).sum(axis=1)
        assert np.max(np.abs(sums)) <= 1e-12 * max(1.0, float(np.max(np.abs(m))))

    def test_pythagorean_split(self):
        """||M||_F^2 = ||residual||_F^2 + n ||mean||^2."""
        gen = np.random.default_rng(11)
        m = gen.normal(size=(6, 9))
        lhs = frobenius_sq(m)
        rhs = frobenius_sq(consensus_residual(m)) + 9 * float(
            np.sum(column_mean(m) ** 2)
        )
        np.testing.assert_allclose(lhs, rhs, rtol=1e-10)


class TestFrobenius:
    def test_zero(self):
        assert frobenius_sq(np.zeros((3, 3))) == 0.0

    def test_hand_value(self):
        assert frobenius_sq([[3.0], [4.0]]) == 25.0

    def test_matches_eigenvalue_sum(self):
        """Squared Frobenius norm equals the sum of eigenvalues of A^T A."""
        gen = np.random.default_rng(5)
        a = gen.normal(size=(4, 4))
        np.testing.assert_allclose(
            frobenius_sq(a), float(np.sum(symmetric_eigenvalues(a.T @ a))), rtol=1e-12
        )


class TestSymmetricEigenvalues:
    def test_identity(self):
        np.testing.assert_array_equal(symmetric_eigenvalues(np.eye(3)), [1.0, 1.0, 1.0])

    def test_diagonal_sorted_descending(self):
        np.testing.assert_array_equal(
            symmetric_eigenvalues(np.diag([5.0, -2.0, 0.0])), [5.0, 0.0, -2.0]
        )

    def test_ring4_metropolis_spectrum(self):
        """4-ring Metropolis matrix has the circulant spectrum {1, 1/3, 1/3, -1/3}."""
        w = np.array(
            [
                [1 / 3, 1 / 3, 0.0, 1 / 3],
                [1 / 3, 1 / 3, 1 / 3, 0.0],
                [0.0, 1 / 3, 1 / 3, 1 / 3],
                [1 / 3, 0.0, 1 / 3, 1 / 3],
            ]
        )
        np.testing.assert_allclose(
            symmetric_eigenvalues(w), [1.0, 1 / 3, 1 / 3, -1 / 3], atol=1e-12
        )

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError, match="not symmetric"):
            symmetric_eigenvalues([[0.0, 1.0], [0.5, 0.0]])

    def test_eigenpairs_reconstruct(self):
        gen = np.random.default_rng(9)
        a = gen.normal(size=(5, 5))
        s = (a + a.T) / 2
        vals, vecs = symmetric_eigenpairs(s)
        np.testing.assert_allclose(vecs @ np.diag(vals) @ vecs.T, s, atol=1e-12)


class TestOperatorNormSq:
    def test_zero(self):
        assert operator_norm_sq(np.zeros((2, 2))) == 0.0

    def test_uniform_averaging_increment(self):
        """W - I for the 2-node uniform matrix has squared norm 1."""
        w = np.full((2, 2), 0.5)
        np.testing.assert_allclose(operator_norm_sq(w - np.eye(2)), 1.0, atol=1e-14)

    def test_doubly_stochastic_bound(self):
        """||W - I||^2 <= 4 for any symmetric doubly stochastic W."""
        gen = np.random.default_rng(13)
        for _ in range(20):
            a = gen.random((5, 5))
            s = a + a.T
            # Sinkhorn-style balancing to (approximately) doubly stochastic
            for _ in range(200):
                s = s / s.sum(axis=1, keepdims=True)
                s = (s + s.T) / 2
            assert operator_norm_sq(s - np.eye(5)) <= 4.0 + 1e-9


class TestCoercions:
    def test_as_matrix_rejects_vector(self):
        with pytest.raises(ValueError, match="2-d"):
            as_matrix(np.ones(3))

    def test_check_finite_passes_through(self):
        m = np.ones((2, 2))
        assert check_finite(m) is m

    def test_check_finite_names_label(self):
        with pytest.raises(FloatingPointError, match="iterates"):
            check_finite(np.array([np.nan]), "iterates")
