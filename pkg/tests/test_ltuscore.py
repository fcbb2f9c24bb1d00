import math
import unittest
from dataclasses import replace

from ltuscore import LtuScore, utility_score
from ltuscore.utils.errors import ArgumentError, CapabilityError, ProtocolError, RoundError
from ltuscore.utils.module_attacker import AttackerSpec, OrderPolicy, SeedPolicy, Strategy
from ltuscore.utils.module_data import LabeledDataset, flip_labels, generate_blobs, split_source
from ltuscore.utils.module_defender import Algorithm, DefenderModel, LossKind, TrainerConfig, losses, predict
from ltuscore.utils.module_oracle import exact_expected_losses, theorem2_accuracy
from ltuscore.utils.utils import binomial_band


def _threshold_model() -> DefenderModel:
    """1-d logistic model predicting class 1 for x > 0"""
    return DefenderModel(
        config=TrainerConfig(),
        num_classes=2,
        dim=1,
        params={"weights": [[-1.0], [1.0]], "bias": [0.0, 0.0]},
    )


class TestLtuScore(unittest.TestCase):

    def setUp(self):
        source = generate_blobs(num_classes=2, dim=2, per_class=30, class_separation=4.0, noise_scale=1.0, seed=41)
        self.defender, self.reserved = split_source(source, 0.5, seed=42)

    def test_utility_score_is_exact(self):
        model = _threshold_model()
        reserved = LabeledDataset([[-1.0], [-2.0], [3.0], [4.0]], [0, 0, 1, 1], num_classes=2)
        self.assertEqual(utility_score(model, reserved).value, 1.0)

        wrong = reserved.with_labels([1, 1, 0, 0])
        self.assertEqual(utility_score(model, wrong).value, 0.0)

        half = reserved.with_labels([0, 0, 0, 0])
        self.assertEqual(utility_score(model, half).value, 0.0)

        with self.assertRaises(ArgumentError):
            utility_score(model, reserved.subset([]))

    def test_coin_attacker(self):
        scorer = LtuScore(attacker=AttackerSpec(strategy=Strategy.COIN))
        result = scorer.run_ltu(self.defender, self.reserved, n_rounds=1000, master_seed=1)
        # 99% band
        low, high = binomial_band(0.5, 1000, 0.99)
        self.assertTrue(low <= result.a_ltu <= high)
        self.assertEqual(result.ties, 0)
        self.assertEqual(len(result.per_round), 1000)

        result = scorer.run_ltu(self.defender, self.reserved, n_rounds=400, master_seed=2)
        self.assertGreaterEqual(result.privacy.value, 0.8)

    def test_deterministic_trainers_have_no_privacy(self):
        source = generate_blobs(num_classes=2, dim=2, per_class=200, class_separation=4.0, noise_scale=1.0, seed=43)
        attacker = AttackerSpec(strategy=Strategy.RETRAIN, seed_policy=SeedPolicy.SHARED)
        for algorithm in (Algorithm.LOGISTIC_GD, Algorithm.GAUSSIAN_NB):
            for seed in range(3):
                with self.subTest(algorithm=algorithm.value, seed=seed):
                    defender, reserved = split_source(source, 0.5, seed=seed)
                    scorer = LtuScore(TrainerConfig(algorithm=algorithm, epochs=100), attacker)
                    result = scorer.run_ltu(defender, reserved, n_rounds=100, master_seed=seed)
                    self.assertEqual(result.a_ltu, 1.0)
                    self.assertEqual(result.privacy.value, 0.0)
                    self.assertTrue(result.degenerate_stderr)

    def test_randomness_restores_privacy(self):
        source = generate_blobs(num_classes=2, dim=2, per_class=50, class_separation=8.0, noise_scale=1.0, seed=44)
        defender, reserved = split_source(source, 0.5, seed=45)
        attacker = AttackerSpec(
            strategy=Strategy.RETRAIN,
            seed_policy=SeedPolicy.FRESH,
            order_policy=OrderPolicy.RANDOM,
        )
        for trainer in (
            TrainerConfig(algorithm=Algorithm.PERCEPTRON_SGD),
            TrainerConfig(algorithm=Algorithm.MLP_SGD, epochs=30, hidden_width=8),
        ):
            with self.subTest(algorithm=trainer.algorithm.value):
                result = LtuScore(trainer, attacker).run_ltu(defender, reserved, n_rounds=100, master_seed=5)
                self.assertGreaterEqual(result.privacy.value, 0.8)

    def test_overfitting_lowers_privacy(self):
        source = generate_blobs(num_classes=3, dim=10, per_class=40, class_separation=2.5, noise_scale=1.0, seed=46)
        clean_defender, clean_reserved = split_source(source, 0.5, seed=47)
        noisy_defender = flip_labels(clean_defender, 0.2, seed=48)
        noisy_reserved = flip_labels(clean_reserved, 0.2, seed=49)
        attacker = AttackerSpec(strategy=Strategy.GRADIENT)
        n = 100

        overfit = TrainerConfig(
            algorithm=Algorithm.MLP_SGD,
            hidden_width=64,
            learning_rate=0.1,
            batch_size=16,
            epochs=4000,
        )
        scorer = LtuScore(overfit, attacker)
        model = scorer.train_defender(noisy_defender, seed=1)
        training_error = (predict(model, noisy_defender.features) != noisy_defender.labels).mean()
        self.assertLessEqual(training_error, 0.1)
        leaky = scorer.run_ltu(noisy_defender, noisy_reserved, n_rounds=n, master_seed=2, model=model)

        early = replace(overfit, epochs=500, early_stopping=True)
        clean = LtuScore(early, attacker).run_ltu(
            clean_defender, clean_reserved, n_rounds=n, master_seed=2, defender_seed=1,
        )

        self.assertGreaterEqual(clean.privacy.value - leaky.privacy.value, 0.25)

        e_d, e_r = exact_expected_losses(
            losses(model, noisy_defender, LossKind.BOUNDED_TRUE_CLASS),
            losses(model, noisy_reserved, LossKind.BOUNDED_TRUE_CLASS),
        )
        sigma = 0.5 / math.sqrt(n)
        self.assertGreaterEqual(leaky.a_ltu, theorem2_accuracy(e_d, e_r) - 2 * sigma)

    def test_individual_privacy(self):
        model = _threshold_model()
        defender = LabeledDataset([[5.0], [-0.1]], [1, 1], num_classes=2)
        reserved = LabeledDataset([[1.0], [2.0], [-1.0]], [1, 1, 0], num_classes=2)
        scorer = LtuScore(attacker=AttackerSpec(strategy=Strategy.GAP))

        exposed = scorer.individual_privacy(defender[0], reserved, defender.without(0), model, n_rounds=30, position=0)
        self.assertEqual(exposed.value, 0.0)
        hidden = scorer.individual_privacy(defender[1], reserved, defender.without(1), model, n_rounds=30, position=1)
        self.assertEqual(hidden.value, 1.0)

        with self.assertRaises(ProtocolError):
            scorer.individual_privacy(reserved[0], reserved, defender, model, n_rounds=5)
        with self.assertRaises(ArgumentError):
            scorer.individual_privacy(defender[0], reserved, defender.without(0), model, n_rounds=0)

    def test_individual_privacy_report_exact(self):
        model = _threshold_model()
        defender = LabeledDataset([[5.0], [-0.1]], [1, 1], num_classes=2)
        reserved = LabeledDataset([[1.0], [2.0], [-1.0]], [1, 1, 0], num_classes=2)
        scorer = LtuScore(attacker=AttackerSpec(strategy=Strategy.GAP))

        report = scorer.individual_privacy_report(defender, reserved, model, include_reserved=True, bins=4)
        self.assertEqual(report.mode, "exact")
        self.assertEqual([score.value for score in report.defender_scores], [0.0, 1.0])
        self.assertEqual(len(report.reserved_scores), 3)
        self.assertEqual(report.counts.tolist(), [1, 0, 0, 1])
        self.assertEqual(len(report.bin_edges), 5)

        rows = report.to_dict()
        self.assertEqual(len(rows["individual_scores"]), 5)
        self.assertEqual(rows["individual_scores"][2]["membership"], "Reserved")
        self.assertEqual(sum(row["count"] for row in rows["histogram"]), 2)

    def test_individual_privacy_report_monte_carlo(self):
        scorer = LtuScore(attacker=AttackerSpec(strategy=Strategy.BLF))
        model = scorer.train_defender(self.defender)
        report = scorer.individual_privacy_report(self.defender, self.reserved, model, n_rounds=10, seed=3)
        self.assertEqual(report.mode, "monte_carlo")
        self.assertEqual(len(report.defender_scores), len(self.defender))
        self.assertEqual(report.reserved_scores, [])
        self.assertEqual(int(report.counts.sum()), len(self.defender))
        for score in report.defender_scores:
            self.assertEqual(score.n, 10)

    def test_reproducible_rounds(self):
        scorer = LtuScore(attacker=AttackerSpec(strategy=Strategy.BLF))
        first = scorer.run_ltu(self.defender, self.reserved, n_rounds=50, master_seed=7)
        second = scorer.run_ltu(self.defender, self.reserved, n_rounds=50, master_seed=7)
        parallel = scorer.run_ltu(self.defender, self.reserved, n_rounds=50, master_seed=7, n_jobs=4)
        self.assertEqual(first.per_round, second.per_round)
        self.assertEqual(first.per_round, parallel.per_round)
        self.assertEqual(first.to_dict(), parallel.to_dict())

        other = scorer.run_ltu(self.defender, self.reserved, n_rounds=50, master_seed=8)
        self.assertNotEqual(
            [record.round_seed for record in first.per_round],
            [record.round_seed for record in other.per_round],
        )

    def test_round_errors_carry_the_round_index(self):
        scorer = LtuScore(TrainerConfig(algorithm=Algorithm.KNN), AttackerSpec(strategy=Strategy.GRADIENT))
        with self.assertRaises(RoundError) as context:
            scorer.run_ltu(self.defender, self.reserved, n_rounds=5)
        self.assertEqual(context.exception.index, 0)
        self.assertIsInstance(context.exception.__cause__, CapabilityError)

    def test_overlapping_sets(self):
        overlapping = self.reserved.with_sample(self.defender[0])
        with self.assertRaises(ProtocolError):
            LtuScore().run_ltu(self.defender, overlapping, n_rounds=5)
        with self.assertRaises(ArgumentError):
            LtuScore().run_ltu(self.defender, self.reserved, n_rounds=0)

    def test_compare_shares_rounds(self):
        scorer = LtuScore()
        gap = AttackerSpec(strategy=Strategy.GAP)
        comparison = scorer.compare(self.defender, self.reserved, [gap, gap], n_rounds=60, master_seed=3)
        self.assertEqual(comparison["agreement"], [[1.0, 1.0], [1.0, 1.0]])
        self.assertEqual(comparison["n"], 60)
        self.assertAlmostEqual(comparison["violation_threshold"], 0.5 + 2.0 * 0.5 / math.sqrt(60), places=12)
        first, second = comparison["results"]
        self.assertEqual(first.per_round, second.per_round)

        with self.assertRaises(ArgumentError):
            scorer.compare(self.defender, self.reserved, [gap])

    def test_compare_flags_violations(self):
        model = _threshold_model()
        defender = LabeledDataset([[3.0], [4.0], [-3.0], [-4.0]], [1, 1, 0, 0], num_classes=2)
        reserved = LabeledDataset([[-0.5], [0.5], [-0.2], [0.2]], [1, 0, 1, 0], num_classes=2)
        comparison = LtuScore().compare(
            defender,
            reserved,
            [AttackerSpec(strategy=Strategy.GAP), AttackerSpec(strategy=Strategy.COIN)],
            n_rounds=100,
            model=model,
        )
        gap, coin = comparison["attackers"]
        self.assertEqual(gap["a_ltu"], 1.0)
        self.assertTrue(gap["violation"])
        self.assertEqual(comparison["agreement"][0][0], 1.0)

    def test_theory(self):
        scorer = LtuScore()
        model = scorer.train_defender(self.defender)

        gap = scorer.theory(self.defender, self.reserved, model, AttackerSpec(discriminant="zero_one_loss"))
        blf = scorer.theory(self.defender, self.reserved, model, AttackerSpec(strategy="blf", loss_kind="zero_one"))
        # under the 0-1 loss both attackers have the same accuracy
        self.assertAlmostEqual(gap["gap_accuracy"], blf["bounded_loss_accuracy"], delta=1e-12)
        self.assertAlmostEqual(gap["gap_accuracy"], gap["bounded_loss_accuracy"], delta=1e-12)

        margin = scorer.theory(self.defender, self.reserved, model, AttackerSpec(discriminant="negative_margin"))
        self.assertIsNotNone(margin["gap_accuracy"])
        self.assertIsNone(margin["bounded_loss_accuracy"])

        self.assertIsNone(scorer.theory(self.defender, self.reserved, model, AttackerSpec(strategy="retrain")))

    def test_call(self):
        result = LtuScore()(self.defender, self.reserved, n_rounds=20, master_seed=4)
        self.assertEqual(set(result), {"utility", "privacy", "a_ltu", "attacker"})
        self.assertEqual(result["attacker"], "gap(bounded_loss)")
        self.assertEqual(result["privacy"]["n"], 20)

        three = LabeledDataset(self.reserved.features, self.reserved.labels, num_classes=3)
        with self.assertRaises(ArgumentError):
            LtuScore()(self.defender, three)

    def test_single_sample_sets(self):
        defender = LabeledDataset([[1.0]], [1], num_classes=2)
        reserved = LabeledDataset([[-1.0]], [1], num_classes=2)
        scorer = LtuScore(attacker=AttackerSpec(strategy=Strategy.GAP))
        result = scorer.run_ltu(defender, reserved, n_rounds=10, model=_threshold_model())
        self.assertEqual(result.a_ltu, 1.0)


if __name__ == "__main__":
    unittest.main()
