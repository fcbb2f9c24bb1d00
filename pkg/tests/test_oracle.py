import unittest

import numpy as np

from ltuscore.utils.errors import ArgumentError, BoundViolationError
from ltuscore.utils.module_oracle import (
    JointPmf,
    PairStats,
    exact_expected_losses,
    exact_pair_stats,
    individual_pair_accuracies,
    joint_pmf_stats,
    theorem1_accuracy,
    theorem2_accuracy,
    threshold_metrics,
    zero_one_equality_check,
)

THREE_BY_THREE = [
    [0.24, 0.24, 0.12],
    [0.12, 0.12, 0.06],
    [0.04, 0.04, 0.02],
]


class TestOracle(unittest.TestCase):

    def test_gap_without_margin(self):
        loss_defender, loss_reserved = [0.0, 0.5], [0.3, 0.4]

        e_d, e_r = exact_expected_losses(loss_defender, loss_reserved)
        self.assertAlmostEqual(e_d, 0.25, delta=1e-12)
        self.assertAlmostEqual(e_r, 0.35, delta=1e-12)

        stats = exact_pair_stats(loss_defender, loss_reserved)
        self.assertAlmostEqual(stats.p_r - stats.p_d, 0.0, delta=1e-12)
        self.assertEqual(theorem1_accuracy(stats), 0.5)
        self.assertAlmostEqual(theorem2_accuracy(e_d, e_r), 0.55, delta=1e-12)

    def test_joint_pmf_margin_exceeds_gap(self):
        pmf = JointPmf([0.0, 0.5, 1.0], [0.0, 0.5, 1.0], THREE_BY_THREE)
        gap, margin = joint_pmf_stats(pmf)
        self.assertAlmostEqual(gap, 0.15, delta=1e-12)
        self.assertAlmostEqual(margin, 0.22, delta=1e-12)

        np.testing.assert_allclose(pmf.defender_marginal, [0.6, 0.3, 0.1], atol=1e-12)
        np.testing.assert_allclose(pmf.reserved_marginal, [0.4, 0.4, 0.2], atol=1e-12)

    def test_joint_pmf_product(self):
        pmf = JointPmf.product([0.0, 0.5, 1.0], [0.6, 0.3, 0.1], [0.0, 0.5, 1.0], [0.4, 0.4, 0.2])
        np.testing.assert_allclose(pmf.matrix, THREE_BY_THREE, atol=1e-12)

        gap, margin = joint_pmf_stats(pmf)
        self.assertAlmostEqual(gap, 0.15, delta=1e-12)
        self.assertAlmostEqual(margin, 0.22, delta=1e-12)

    def test_joint_pmf_validation(self):
        with self.assertRaises(ArgumentError):
            JointPmf([0.0, 1.0], [0.0, 1.0], [[0.5, 0.5], [0.5, 0.5]])
        with self.assertRaises(ArgumentError):
            JointPmf([0.0, 1.0], [0.0, 1.0], [[1.5, -0.5], [0.0, 0.0]])
        with self.assertRaises(ArgumentError):
            JointPmf([0.0, 1.0], [0.0], [[1.0]])

    def test_individual_metrics_disagree_with_pairwise(self):
        f_reserved = [0.4, 0.7, 0.9]
        for c, expected in ((0.6, 8 / 9), (0.8, 7 / 9), (0.95, 6 / 9)):
            f_defender = [0.1, 0.3, c]
            stats = exact_pair_stats(f_defender, f_reserved)
            self.assertEqual(stats.p_r, expected)

            metrics = threshold_metrics(f_defender, f_reserved, threshold=0.5)
            self.assertAlmostEqual(metrics["accuracy"], 2 / 3, delta=1e-12)
            self.assertAlmostEqual(metrics["false_positive_rate"], 1 / 3, delta=1e-12)
            self.assertAlmostEqual(metrics["false_negative_rate"], 1 / 3, delta=1e-12)

    def test_individual_pair_accuracies(self):
        acc_d, acc_r = individual_pair_accuracies([0.1, 0.3, 0.6], [0.4, 0.7, 0.9])
        np.testing.assert_allclose(acc_d, [1.0, 1.0, 2 / 3])
        np.testing.assert_allclose(acc_r, [2 / 3, 1.0, 1.0])
        self.assertAlmostEqual(acc_d.mean(), 8 / 9, delta=1e-12)

        acc_d, acc_r = individual_pair_accuracies([0.5, 0.5], [0.5])
        np.testing.assert_allclose(acc_d, [0.5, 0.5])
        np.testing.assert_allclose(acc_r, [0.5])

    def test_exact_pair_stats_matches_brute_force(self):
        rng = np.random.default_rng(2024)
        for _ in range(50):
            f_d = rng.integers(0, 5, size=rng.integers(1, 12)).astype(float)
            f_r = rng.integers(0, 5, size=rng.integers(1, 12)).astype(float)
            greater = sum(r > d for d in f_d for r in f_r)
            less = sum(r < d for d in f_d for r in f_r)
            total = len(f_d) * len(f_r)

            stats = exact_pair_stats(f_d, f_r)
            self.assertEqual(stats.p_r, greater / total)
            self.assertEqual(stats.p_d, less / total)
            self.assertAlmostEqual(stats.tie_prob, (total - greater - less) / total, delta=1e-15)

    def test_zero_one_equality(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            n_d, n_r = rng.integers(1, 40, size=2)
            loss_d = (rng.random(n_d) < rng.random()).astype(float)
            loss_r = (rng.random(n_r) < rng.random()).astype(float)
            margin, gap = zero_one_equality_check(loss_d, loss_r)
            self.assertAlmostEqual(margin, gap, delta=1e-12)

    def test_zero_one_equality_rejects_other_losses(self):
        with self.assertRaises(ArgumentError):
            zero_one_equality_check([0.0, 0.5], [1.0])

    def test_bound_violations(self):
        with self.assertRaises(BoundViolationError):
            exact_expected_losses([0.2, 1.2], [0.1])
        with self.assertRaises(BoundViolationError):
            theorem2_accuracy(-0.1, 0.5)
        with self.assertRaises(ArgumentError):
            exact_pair_stats([], [0.1])

    def test_pair_stats_validation(self):
        self.assertEqual(PairStats(0.2, 0.3, 0.5).to_dict(), {"p_r": 0.2, "p_d": 0.3, "tie_prob": 0.5})
        with self.assertRaises(ArgumentError):
            PairStats(0.6, 0.6, 0.0)


if __name__ == "__main__":
    unittest.main()
