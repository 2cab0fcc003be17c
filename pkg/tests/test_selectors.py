import unittest

import numpy as np
import numpy.testing as npt
from pydantic import ValidationError

from mfalloc.linalg import gram, projection_residual
from mfalloc.selectors import (
    METHOD_NAMES,
    Method,
    SelectorConfig,
    Termination,
    group_lasso_objective,
    leverage_scores,
    parse_method,
    select,
    select_gomp,
    select_leverage,
    select_pivoted_cholesky,
    select_pivoted_lu,
    select_pivoted_qr,
    select_random,
)

TOY = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
TOY[:, 2] /= np.sqrt(2.0)


def gomp(m, **kwargs):
    return SelectorConfig(method="gomp", target_size=m, **kwargs)


class TestGomp(unittest.TestCase):

    def test_identity_tie_break(self):
        result = select_gomp(np.eye(3), gomp(1))
        self.assertEqual(result.ordered_indices, (0,))
        self.assertEqual(result.termination, Termination.REACHED_TARGET)

    def test_picks_largest_group_correlation(self):
        result = select_gomp(gram(TOY), gomp(1))
        self.assertEqual(result.ordered_indices, (2,))
        self.assertAlmostEqual(result.step_scores[0], np.sqrt(2.0), places=12)

    def test_exhausted_rank(self):
        result = select_gomp(gram(TOY), gomp(3))
        self.assertEqual(len(result), 2)
        self.assertEqual(result.ordered_indices[0], 2)
        self.assertEqual(result.termination, Termination.EXHAUSTED_RANK)

    def test_epsilon_stop(self):
        result = select_gomp(gram(TOY), gomp(3, gomp_epsilon=10.0))
        self.assertEqual(result.ordered_indices, ())
        self.assertEqual(result.termination, Termination.EPSILON_STOP)

    def test_lambda_stop(self):
        # one selection already gives ||B^T||_{2,1} well above 1 / lambda
        result = select_gomp(gram(TOY), gomp(3, gomp_lambda=1.0))
        self.assertEqual(len(result), 1)
        self.assertEqual(result.termination, Termination.LAMBDA_STOP)

    def test_coefficients_reproduce_ensemble(self):
        rng = np.random.default_rng(0)
        A = rng.standard_normal((4, 9))
        result = select_gomp(gram(A), gomp(4))
        B = result.coefficient_matrix
        self.assertEqual(B.shape, (4, 9))
        npt.assert_allclose(A[:, list(result.ordered_indices)] @ B, A, atol=1e-10)

    def test_normalized_selection_ignores_scale(self):
        rng = np.random.default_rng(1)
        A = rng.standard_normal((5, 8))
        scaled = A * np.array([1, 100, 0.01, 3, 5, 0.2, 7, 1])
        plain = select(gomp(4, normalize_columns=True), ensemble=A)
        rescaled = select(gomp(4, normalize_columns=True), ensemble=scaled)
        self.assertEqual(plain.ordered_indices, rescaled.ordered_indices)


class TestPivotedFactorizations(unittest.TestCase):

    def test_cholesky_diagonal(self):
        result = select_pivoted_cholesky(np.diag([1.0, 4.0, 2.0]), 2)
        self.assertEqual(result.ordered_indices, (1, 2))
        self.assertEqual(result.step_scores, (4.0, 2.0))

    def test_cholesky_unit_diagonal_tie(self):
        self.assertEqual(select_pivoted_cholesky(gram(TOY), 1).ordered_indices, (0,))

    def test_cholesky_rank_one(self):
        result = select_pivoted_cholesky(np.ones((2, 2)), 2)
        self.assertEqual(result.ordered_indices, (0,))
        self.assertEqual(result.termination, Termination.EXHAUSTED_RANK)

    def test_qr_orthogonal_columns_by_norm(self):
        A = np.diag([1.0, 3.0, 2.0])
        result = select_pivoted_qr(A, 3)
        self.assertEqual(result.ordered_indices, (1, 2, 0))
        npt.assert_allclose(result.step_scores, [3.0, 2.0, 1.0])

    def test_qr_tie_break(self):
        self.assertEqual(select_pivoted_qr(TOY, 1).ordered_indices, (0,))

    def test_lu_largest_entry(self):
        self.assertEqual(select_pivoted_lu(np.diag([1.0, 5.0, 2.0]), 1).ordered_indices, (1,))
        self.assertEqual(select_pivoted_lu(TOY, 1).ordered_indices, (0,))

    def test_lu_full_rank_square(self):
        rng = np.random.default_rng(4)
        A = rng.standard_normal((5, 5))
        result = select_pivoted_lu(A, 5)
        self.assertEqual(sorted(result.ordered_indices), list(range(5)))
        self.assertLess(projection_residual(A, result.ordered_indices), 1e-20)

    def test_qr_matches_cholesky_pivots(self):
        rng = np.random.default_rng(8)
        A = rng.standard_normal((10, 12))
        qr = select_pivoted_qr(A, 6)
        chol = select_pivoted_cholesky(gram(A), 6)
        self.assertEqual(qr.ordered_indices, chol.ordered_indices)
        npt.assert_allclose(np.square(qr.step_scores), chol.step_scores, rtol=1e-9)


class TestSampling(unittest.TestCase):

    def test_leverage_orthogonal_columns(self):
        A = np.diag([1.0, 3.0, 2.0, 5.0])
        result = select_leverage(A, 3, 4)
        self.assertEqual(result.ordered_indices, (0, 1, 2))
        npt.assert_allclose(result.step_scores, [1.0, 1.0, 1.0])

    def test_leverage_toy(self):
        npt.assert_allclose(leverage_scores(TOY, 1), [0.25, 0.25, 0.5], atol=1e-12)
        result = select_leverage(TOY, 1, 1)
        self.assertEqual(result.ordered_indices, (2,))
        self.assertAlmostEqual(result.step_scores[0], 0.5, places=12)

    def test_leverage_rank_out_of_range(self):
        with self.assertRaises(ValueError):
            select_leverage(TOY, 1, 3)

    def test_random_is_seeded(self):
        first = select_random(10, 3, 42)
        self.assertEqual(first.ordered_indices, select_random(10, 3, 42).ordered_indices)
        self.assertEqual(len(set(first.ordered_indices)), 3)
        self.assertEqual(first.step_scores, (0.0, 0.0, 0.0))

    def test_random_full_permutation(self):
        result = select_random(7, 7, 2**64 - 1)
        self.assertEqual(sorted(result.ordered_indices), list(range(7)))

    def test_random_seed_range(self):
        with self.assertRaises(ValueError):
            select_random(5, 2, 2**64)


class TestConfigAndDispatch(unittest.TestCase):

    def test_method_names(self):
        self.assertEqual(set(METHOD_NAMES), {"gomp", "chol", "qr", "lu", "lev", "rand"})
        self.assertIs(parse_method("Cholesky"), Method.CHOLESKY)
        with self.assertRaises(ValueError) as ctx:
            parse_method("svd")
        self.assertIn("gomp", str(ctx.exception))

    def test_config_validation(self):
        with self.assertRaises(ValidationError):
            SelectorConfig(method="gomp", target_size=0)
        with self.assertRaises(ValidationError):
            SelectorConfig(method="gomp", gomp_lambda=-1.0)
        with self.assertRaises(ValidationError):
            SelectorConfig(method="nope")
        config = SelectorConfig(method="lev", target_size=4)
        self.assertEqual(config.leverage_rank_for(10, 40), 4)
        self.assertEqual(config.leverage_rank_for(3, 40), 3)
        self.assertEqual(config.model_copy(update={"leverage_rank": 2}).leverage_rank_for(3, 40), 2)

    def test_target_larger_than_n(self):
        with self.assertRaises(ValueError):
            select(SelectorConfig(method="qr", target_size=4), ensemble=TOY)

    def test_gram_only_methods(self):
        Q = gram(TOY)
        self.assertEqual(select(SelectorConfig(method="chol", target_size=1), gram=Q).ordered_indices, (0,))
        with self.assertRaises(ValueError):
            select(SelectorConfig(method="qr", target_size=1), gram=Q)

    def test_result_dict_is_one_based(self):
        payload = select(SelectorConfig(method="gomp", target_size=1), ensemble=TOY).to_dict()
        self.assertEqual(payload["indices"], [3])
        self.assertEqual(payload["termination"], "reached_target")
        self.assertEqual(set(payload), {"method", "indices", "scores", "termination"})

    def test_greedy_prefixes_monotone(self):
        rng = np.random.default_rng(6)
        A = rng.standard_normal((8, 15))
        for method in ("gomp", "chol", "qr", "lu"):
            result = select(SelectorConfig(method=method, target_size=8), ensemble=A)
            residuals = [projection_residual(A, result.prefix(k)) for k in range(len(result) + 1)]
            for before, after in zip(residuals, residuals[1:]):
                self.assertLessEqual(after, before + 1e-9, method)


DETERMINISTIC = ("gomp", "chol", "qr", "lu", "lev")


class TestSelectorInvariants(unittest.TestCase):

    def setUp(self):
        self.A = np.random.default_rng(21).standard_normal((7, 14))

    def run_all(self, A, m=5):
        return {name: select(SelectorConfig(method=name, target_size=m), ensemble=A).ordered_indices for name in DETERMINISTIC}

    def test_permuting_columns_permutes_selections(self):
        perm = np.random.default_rng(3).permutation(self.A.shape[1])
        original = self.run_all(self.A)
        permuted = self.run_all(self.A[:, perm])
        for name in DETERMINISTIC:
            with self.subTest(method=name):
                self.assertEqual(tuple(int(perm[i]) for i in permuted[name]), original[name])

    def test_uniform_scaling_keeps_order(self):
        original = self.run_all(self.A)
        for c in (1e3, 0.37, 1e-3):
            scaled = self.run_all(c * self.A)
            for name in DETERMINISTIC:
                with self.subTest(method=name, c=c):
                    self.assertEqual(scaled[name], original[name])

    def test_gram_computed_two_ways(self):
        A = self.A
        _, R = np.linalg.qr(A)
        w = np.random.default_rng(8).uniform(0.5, 2.0, A.shape[0])
        pairs = [(gram(A), gram(R)), (gram(A, weights=w), gram(np.sqrt(w)[:, None] * A))]
        for first, second in pairs:
            self.assertEqual(select_gomp(first, gomp(6)).ordered_indices, select_gomp(second, gomp(6)).ordered_indices)
            self.assertEqual(
                select_pivoted_cholesky(first, 6).ordered_indices, select_pivoted_cholesky(second, 6).ordered_indices
            )

    def test_gomp_coefficients_solve_normal_equations(self):
        Q = gram(self.A)
        result = select_gomp(Q, gomp(5))
        active = list(result.ordered_indices)
        B = result.dense_coefficients()
        outside = np.setdiff1d(np.arange(Q.shape[0]), active)
        self.assertTrue(np.all(B[outside, :] == 0.0))
        residual = Q[np.ix_(active, active)] @ B[active, :] - Q[active, :]
        self.assertLess(np.abs(residual).max(), 1e-8)

    def test_dense_coefficients_need_gomp(self):
        with self.assertRaises(ValueError):
            select_pivoted_qr(self.A, 2).dense_coefficients()

    def test_random_selection_is_uniform(self):
        counts = np.zeros(5, dtype=int)
        for seed in range(10_000):
            counts[select_random(5, 1, seed).ordered_indices[0]] += 1
        sd = np.sqrt(10_000 * 0.2 * 0.8)
        npt.assert_array_less(np.abs(counts - 2000), 4 * sd)

    def test_leverage_rank_defaults_to_rank_bound(self):
        wide = np.random.default_rng(2).standard_normal((3, 10))
        result = select(SelectorConfig(method="lev", target_size=6), ensemble=wide)
        self.assertEqual(len(result), 6)
        npt.assert_allclose(result.step_scores, leverage_scores(wide, 3)[list(result.ordered_indices)])
        with self.assertRaises(ValueError):
            select(SelectorConfig(method="lev", target_size=6, leverage_rank=6), ensemble=wide)

    def test_result_records_its_config(self):
        config = SelectorConfig(method="qr", target_size=2)
        self.assertEqual(select(config, ensemble=TOY).config, config)


class TestGroupLassoObjective(unittest.TestCase):

    def test_examples(self):
        rng = np.random.default_rng(9)
        A = rng.standard_normal((3, 4))
        self.assertAlmostEqual(group_lasso_objective(A, np.eye(4), 0.0), 0.0, places=14)
        self.assertAlmostEqual(group_lasso_objective(A, np.zeros((4, 4)), 0.5), float(np.sum(A * A)), places=12)
        self.assertAlmostEqual(group_lasso_objective(A, np.eye(4), 1.0), 4.0, places=12)
        with self.assertRaises(ValueError):
            group_lasso_objective(A, np.eye(3), 1.0)


if __name__ == "__main__":
    unittest.main()
