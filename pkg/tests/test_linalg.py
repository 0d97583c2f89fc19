import numpy as np
import pytest

from corank.linalg import (
    CorrelationMatrix,
    correlation_matrix,
    normalized_rank,
    numerical_rank,
    rank_with_gap,
    singular_values,
    thresholded_rank,
)

from reference_impls import dot_product_matrix, jacobi_singular_values


class TestCorrelationMatrix:
    def test_zero_solutions_give_zero_matrix(self):
        rng = np.random.default_rng(0)
        out = correlation_matrix(np.zeros((3, 4)), rng.standard_normal((2, 4)))
        assert out.m == 3 and out.n == 2
        assert np.array_equal(out.entries, np.zeros((3, 2)))

    def test_orthonormal_basis_gives_identity(self):
        basis = np.eye(3)
        out = correlation_matrix(basis, basis)
        assert np.array_equal(out.entries, np.eye(3))

    def test_matches_double_loop_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(5):
            sol = rng.standard_normal((5, 8))
            prob = rng.standard_normal((5, 8))[:5]
            got = correlation_matrix(sol, prob, "raw").entries
            want = dot_product_matrix(sol, prob)
            np.testing.assert_allclose(got, want, rtol=1e-12)

    def test_unit_rows_mode_normalizes_before_product(self):
        rng = np.random.default_rng(1)
        sol = rng.standard_normal((4, 6)) * 7.0
        prob = rng.standard_normal((3, 6)) * 0.01
        got = correlation_matrix(sol, prob, "unit-rows").entries
        sol_u = sol / np.linalg.norm(sol, axis=1, keepdims=True)
        prob_u = prob / np.linalg.norm(prob, axis=1, keepdims=True)
        np.testing.assert_allclose(got, dot_product_matrix(sol_u, prob_u), rtol=1e-12)
        assert np.all(np.abs(got) <= 1.0 + 1e-12)

    def test_spectral_mode_uses_raw_products(self):
        rng = np.random.default_rng(2)
        sol = rng.standard_normal((4, 6))
        prob = rng.standard_normal((3, 6))
        raw = correlation_matrix(sol, prob, "raw").entries
        spectral = correlation_matrix(sol, prob, "spectral").entries
        assert np.array_equal(raw, spectral)

    def test_dimension_mismatch_rejected_with_dims(self):
        with pytest.raises(ValueError, match=r"solution d=4, problem d=5"):
            correlation_matrix(np.ones((2, 4)), np.ones((2, 5)))

    def test_non_finite_input_rejected_with_row(self):
        sol = np.ones((3, 2))
        sol[1, 0] = np.nan
        with pytest.raises(ValueError, match=r"solution_reps.*row 1"):
            correlation_matrix(sol, np.ones((2, 2)))

    def test_empty_inputs_rejected(self):
        with pytest.raises(ValueError, match="non-empty"):
            correlation_matrix(np.zeros((0, 3)), np.ones((2, 3)))

    def test_zero_row_under_unit_rows_rejected(self):
        sol = np.ones((3, 2))
        sol[2] = 0.0
        with pytest.raises(ValueError, match="zero row 2"):
            correlation_matrix(sol, np.ones((2, 2)), "unit-rows")

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError, match="unknown normalization mode"):
            correlation_matrix(np.ones((1, 1)), np.ones((1, 1)), "cosine")


class TestSingularValues:
    def test_diagonal_matrix(self):
        np.testing.assert_allclose(singular_values(np.diag([3.0, 2.0, 1.0])), [3.0, 2.0, 1.0])

    def test_rank_one_outer_product(self):
        u = np.array([2.0, 0.0, 0.0])
        v = np.array([0.0, 3.0, 0.0, 0.0])
        s = singular_values(np.outer(u, v))
        np.testing.assert_allclose(s[0], 6.0)
        np.testing.assert_allclose(s[1:], 0.0, atol=1e-12)

    def test_matches_jacobi_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            mat = rng.standard_normal((6, 4))
            got = singular_values(mat)
            want = jacobi_singular_values(mat)
            np.testing.assert_allclose(got, want, rtol=1e-8, atol=1e-10)

    def test_frobenius_identity(self):
        rng = np.random.default_rng(8)
        mat = rng.standard_normal((7, 5))
        s = singular_values(mat)
        assert abs((s**2).sum() - (mat**2).sum()) <= 1e-8 * (mat**2).sum()

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError, match="non-finite"):
            singular_values(np.array([[np.inf, 1.0]]))


class TestThresholdedRank:
    def test_direct_count(self):
        assert thresholded_rank([3.0, 2.0, 1.0], 1.5) == 2

    def test_delta_zero_counts_positive(self):
        assert thresholded_rank([3.0, 2.0, 1.0], 0.0) == 3
        assert thresholded_rank([3.0, 2.0, 0.0], 0.0) == 2

    def test_rank_two_construction(self):
        rng = np.random.default_rng(3)
        mat = np.outer(rng.standard_normal(6), rng.standard_normal(5))
        mat += np.outer(rng.standard_normal(6), rng.standard_normal(5))
        s = singular_values(mat)
        assert thresholded_rank(s, s[1] * 0.5) == 2

    def test_all_zero_spectrum(self):
        assert thresholded_rank([0.0, 0.0], 0.0) == 0
        assert thresholded_rank([], 1.0) == 0

    def test_noise_below_relative_cutoff_zeroed(self):
        assert thresholded_rank([1.0, 1e-12], 0.0) == 1

    def test_spectral_mode_ratio(self):
        assert thresholded_rank([10.0, 5.0, 1.0], 0.4, "spectral") == 2
        assert thresholded_rank([10.0, 5.0, 1.0], 0.4, "spectral", sigma_max_ref=20.0) == 1

    def test_negative_delta_rejected(self):
        with pytest.raises(ValueError, match="delta"):
            thresholded_rank([1.0], -0.1)

    def test_increasing_spectrum_rejected(self):
        with pytest.raises(ValueError, match="non-increasing"):
            thresholded_rank([1.0, 2.0], 0.0)

    def test_negative_spectrum_rejected(self):
        with pytest.raises(ValueError, match="non-negative"):
            thresholded_rank([1.0, -0.5], 0.0)


class TestNormalizedRank:
    def test_direct_division(self):
        # 4x6 matrix with three values above the threshold
        mat = np.zeros((4, 6))
        mat[0, 0], mat[1, 1], mat[2, 2], mat[3, 3] = 5.0, 4.0, 3.0, 0.5
        est = normalized_rank(CorrelationMatrix(mat), 2.0)
        assert est.raw_rank == 3
        assert est.normalized_rank == 0.75

    def test_row_duplication_halves_normalized_rank(self):
        rng = np.random.default_rng(4)
        sol = rng.standard_normal((5, 7))
        prob = rng.standard_normal((4, 7))
        single = normalized_rank(correlation_matrix(sol, prob), 0.3)
        doubled = normalized_rank(correlation_matrix(np.vstack([sol, sol]), prob), 0.3)
        assert doubled.raw_rank == single.raw_rank
        assert doubled.normalized_rank == pytest.approx(single.normalized_rank / 2)

    def test_oracle_recomputation(self):
        rng = np.random.default_rng(5)
        sol = rng.standard_normal((6, 9))
        prob = rng.standard_normal((5, 9))
        delta = 1.2
        est = normalized_rank(correlation_matrix(sol, prob), delta)
        spectrum = jacobi_singular_values(dot_product_matrix(sol, prob))
        expected = sum(1 for s in spectrum if s > delta)
        assert est.raw_rank == expected
        assert est.normalized_rank == expected / 6

    def test_mode_mismatch_rejected(self):
        mat = correlation_matrix(np.ones((2, 3)), np.ones((2, 3)), "raw")
        with pytest.raises(ValueError, match="built under mode"):
            normalized_rank(mat, 0.0, "unit-rows")


class TestRankProperties:
    """Randomized invariants, >= 200 instances each."""

    @staticmethod
    def _random_instance(rng):
        m = int(rng.integers(1, 9))
        n = int(rng.integers(1, 9))
        d = int(rng.integers(1, 7))
        sol = rng.standard_normal((m, d))
        prob = rng.standard_normal((n, d))
        return sol, prob

    def test_rank_bounded_by_min_dims(self):
        rng = np.random.default_rng(100)
        for _ in range(200):
            sol, prob = self._random_instance(rng)
            rank = numerical_rank(correlation_matrix(sol, prob).entries)
            assert rank <= min(sol.shape[0], prob.shape[0], sol.shape[1])

    def test_monotone_in_delta(self):
        rng = np.random.default_rng(101)
        for _ in range(200):
            sol, prob = self._random_instance(rng)
            s = correlation_matrix(sol, prob).spectrum
            deltas = np.sort(rng.uniform(0.0, float(s[0]) + 1.0, size=4))
            ranks = [thresholded_rank(s, d) for d in deltas]
            assert all(a >= b for a, b in zip(ranks, ranks[1:]))
            if s[0] > 0:
                assert thresholded_rank(s, 0.0) == int(np.count_nonzero(s > 1e-10 * s[0]))

    def test_permutation_invariance(self):
        rng = np.random.default_rng(102)
        for _ in range(200):
            sol, prob = self._random_instance(rng)
            base = correlation_matrix(sol, prob).spectrum
            permuted = correlation_matrix(
                sol[rng.permutation(sol.shape[0])], prob[rng.permutation(prob.shape[0])]
            ).spectrum
            np.testing.assert_allclose(base, permuted, rtol=1e-9, atol=1e-9)

    def test_duplication_scaling(self):
        # duplicating rows rescales singular values, so the invariance is a
        # rank statement: it holds exactly at delta = 0
        rng = np.random.default_rng(103)
        for _ in range(200):
            sol, prob = self._random_instance(rng)
            k = int(rng.integers(1, 4))
            base = normalized_rank(correlation_matrix(sol, prob), 0.0)
            extended = normalized_rank(
                correlation_matrix(np.vstack([sol] + [sol[:1]] * k), prob), 0.0
            )
            m = sol.shape[0]
            assert extended.raw_rank == base.raw_rank
            assert extended.normalized_rank == pytest.approx(
                base.normalized_rank * m / (m + k)
            )

    def test_frobenius_identity(self):
        rng = np.random.default_rng(104)
        for _ in range(200):
            sol, prob = self._random_instance(rng)
            entries = correlation_matrix(sol, prob).entries
            s = singular_values(entries)
            total = (entries**2).sum()
            assert abs((s**2).sum() - total) <= 1e-8 * max(total, 1e-300)

    def test_spectral_mode_scale_invariance(self):
        rng = np.random.default_rng(105)
        for _ in range(200):
            sol, prob = self._random_instance(rng)
            delta = float(rng.uniform(0.0, 1.0))
            c = float(rng.uniform(1e-3, 1e3))
            base = correlation_matrix(sol, prob, "spectral")
            scaled = correlation_matrix(c * sol, c * prob, "spectral")
            assert thresholded_rank(base.spectrum, delta, "spectral") == thresholded_rank(
                scaled.spectrum, delta, "spectral"
            )


class TestRankWithGap:
    def test_clean_gap(self):
        rank, gap = rank_with_gap(np.diag([4.0, 2.0, 0.0]))
        assert rank == 2
        assert gap == np.inf  # dropped value is exactly zero

    def test_finite_gap(self):
        rank, gap = rank_with_gap(np.diag([1.0, 1e-12]))
        assert rank == 1
        assert gap == pytest.approx(1e12, rel=1e-6)
