import unittest

import numpy as np

from ltuscore import LtuScore
from ltuscore.utils.errors import ArgumentError, BoundViolationError, CapabilityError, DiscriminantError
from ltuscore.utils.module_attacker import (
    AttackerSpec,
    DiscriminantFn,
    MembershipPrediction,
    OrderPolicy,
    SeedPolicy,
    Strategy,
    blf_attack,
    coin_attack,
    gap_attack,
    get_discriminant,
    gradient_attack,
    load_attacker,
    retrain_attack,
    trained_model_attack,
)
from ltuscore.utils.module_data import (
    LabeledDataset,
    MembershipLabel,
    flip_labels,
    generate_blobs,
    make_ltu_round,
    split_source,
)
from ltuscore.utils.module_defender import Algorithm, LossKind, TrainerConfig, train
from ltuscore.utils.utils import binomial_band, derive_seed, make_rng


def _first_feature(model, X, y):
    return X[:, 0]


class TestAttacker(unittest.TestCase):

    def setUp(self):
        source = generate_blobs(num_classes=3, dim=2, per_class=20, class_separation=3.0, noise_scale=1.0, seed=21)
        self.defender, self.reserved = split_source(source, 0.5, seed=22)
        self.model = train(TrainerConfig(), self.defender)

    def test_membership_prediction(self):
        prediction = MembershipPrediction(defender_index=1, confidence=0.2, strategy="gap")
        self.assertEqual(prediction.confidence, 0.5)
        self.assertEqual(prediction.assignment, (MembershipLabel.RESERVED, MembershipLabel.DEFENDER))
        with self.assertRaises(ArgumentError):
            MembershipPrediction(defender_index=2, confidence=1.0, strategy="gap")

    def test_coin_attack(self):
        ltu_round = make_ltu_round(self.defender, self.reserved, round_seed=1)
        prediction = coin_attack(ltu_round, make_rng(0))
        self.assertEqual(prediction.confidence, 0.5)
        self.assertEqual(prediction.strategy, "coin")

    def test_gap_attack_picks_smaller_value(self):
        defender = LabeledDataset([[0.0], [1.0], [2.0]], [0, 1, 0], num_classes=2)
        reserved = LabeledDataset([[10.0], [11.0]], [1, 0], num_classes=2)
        f = DiscriminantFn("first_feature", _first_feature)

        for seed in range(20):
            ltu_round = make_ltu_round(defender, reserved, round_seed=seed)
            prediction = gap_attack(ltu_round, self.model, f, make_rng(seed))
            self.assertEqual(prediction.defender_index, ltu_round.truth)
            self.assertEqual(prediction.confidence, 1.0)

        ltu_round = make_ltu_round(defender, reserved, round_seed=0)
        tie = gap_attack(ltu_round, self.model, "constant", make_rng(0))
        self.assertEqual(tie.confidence, 0.5)

    def test_discriminants(self):
        with self.assertRaises(ArgumentError):
            get_discriminant("nope")
        f = get_discriminant("bounded_loss")
        self.assertIs(get_discriminant(f), f)

        entropy = get_discriminant("entropy").batch(self.model, self.reserved)
        self.assertTrue(np.all(entropy >= 0.0))
        self.assertTrue(np.all(entropy <= np.log(3) + 1e-12))

        margin = get_discriminant("negative_margin").batch(self.model, self.reserved)
        self.assertTrue(np.all((margin >= -1.0) & (margin <= 1.0)))

        ltu_round = make_ltu_round(self.defender, self.reserved, round_seed=2)
        broken = DiscriminantFn("broken", lambda model, X, y: np.full(len(X), np.nan))
        with self.assertRaises(DiscriminantError):
            gap_attack(ltu_round, self.model, broken, make_rng(0))

    def _random_configurations(self, seed: int):
        """Twenty (dataset, model) draws from a seeded stream"""
        rng = make_rng(seed)
        for i in range(20):
            num_classes = int(rng.integers(2, 5))
            dim = int(rng.integers(2, 5))
            separation = float(rng.uniform(0.5, 5.0))
            source = generate_blobs(num_classes, dim, 20, separation, 1.0, seed=seed + i)
            defender, reserved = split_source(source, 0.5, seed=seed + 100 + i)
            yield i, defender, reserved, train(TrainerConfig(epochs=100), defender)

    def test_gap_attack_matches_pair_statistics(self):
        scorer = LtuScore()
        n = 10000
        discriminants = ("bounded_loss", "entropy", "negative_margin", "one_minus_confidence", "max_probability")
        passed = 0
        for i, defender, reserved, model in self._random_configurations(100):
            attacker = AttackerSpec(strategy=Strategy.GAP, discriminant=discriminants[i % len(discriminants)])

            expected = scorer.theory(defender, reserved, model, attacker)["gap_accuracy"]
            result = scorer.run_ltu(defender, reserved, attacker=attacker, n_rounds=n, master_seed=i, model=model)
            low, high = binomial_band(expected, n, 0.95)
            passed += low <= result.a_ltu <= high
        self.assertGreaterEqual(passed, 19)

    def test_blf_attack_matches_expected_losses(self):
        scorer = LtuScore()
        n = 10000
        kinds = list(LossKind)
        passed = 0
        for i, defender, reserved, model in self._random_configurations(300):
            attacker = AttackerSpec(strategy=Strategy.BLF, loss_kind=kinds[i % len(kinds)])

            expected = scorer.theory(defender, reserved, model, attacker)["bounded_loss_accuracy"]
            result = scorer.run_ltu(defender, reserved, attacker=attacker, n_rounds=n, master_seed=i, model=model)
            low, high = binomial_band(expected, n, 0.95)
            passed += low <= result.a_ltu <= high
        self.assertGreaterEqual(passed, 19)

    def test_blf_attack_rejects_unbounded_values(self):
        ltu_round = make_ltu_round(self.defender, self.reserved, round_seed=3)
        unbounded = DiscriminantFn("unbounded", lambda model, X, y: np.full(len(X), 2.0))
        with self.assertRaises(BoundViolationError):
            blf_attack(ltu_round, self.model, unbounded, make_rng(0))

        prediction = blf_attack(ltu_round, self.model, LossKind.BOUNDED_TRUE_CLASS, make_rng(0))
        self.assertGreaterEqual(prediction.confidence, 0.5)

    def test_retrain_attack_breaks_deterministic_trainers(self):
        for algorithm in (Algorithm.LOGISTIC_GD, Algorithm.GAUSSIAN_NB):
            with self.subTest(algorithm=algorithm.value):
                trainer = TrainerConfig(algorithm=algorithm, epochs=50)
                target = train(trainer, self.defender)
                for i in range(15):
                    ltu_round = make_ltu_round(self.defender, self.reserved, derive_seed(5, i))
                    prediction = retrain_attack(ltu_round, trainer, target, order_policy=OrderPolicy.RANDOM)
                    self.assertEqual(prediction.defender_index, ltu_round.truth)
                    self.assertEqual(prediction.confidence, 1.0)

    def test_retrain_attack_with_shared_seed_and_order(self):
        trainer = TrainerConfig(algorithm=Algorithm.MLP_SGD, epochs=15, hidden_width=8)
        target = train(trainer, self.defender, seed=77)
        for i in range(10):
            ltu_round = make_ltu_round(self.defender, self.reserved, derive_seed(6, i))
            prediction = retrain_attack(ltu_round, trainer, target, SeedPolicy.SHARED, make_rng(i))
            self.assertEqual(prediction.defender_index, ltu_round.truth)
            self.assertEqual(prediction.confidence, 1.0)

    def test_retrain_attack_wrong_seed(self):
        trainer = TrainerConfig(algorithm=Algorithm.PERCEPTRON_SGD, epochs=3)
        target = train(trainer, self.defender, seed=4)
        ltu_round = make_ltu_round(self.defender, self.reserved, round_seed=9)
        # the wrong seed never equals the Defender seed
        prediction = retrain_attack(ltu_round, trainer, target, SeedPolicy.WRONG, make_rng(0), wrong_seed=4)
        self.assertLess(prediction.confidence, 1.0)

    def test_retrain_attack_on_example_based_models(self):
        source = generate_blobs(num_classes=2, dim=2, per_class=20, class_separation=1.0, noise_scale=1.0, seed=31)
        defender, reserved = split_source(source, 0.5, seed=32)
        defender, reserved = flip_labels(defender, 0.3, seed=33), flip_labels(reserved, 0.3, seed=34)
        trainer = TrainerConfig(algorithm=Algorithm.KNN, k_neighbors=1)
        target = train(trainer, defender)

        result = LtuScore(trainer, AttackerSpec(strategy=Strategy.RETRAIN)).run_ltu(
            defender, reserved, n_rounds=40, master_seed=3, model=target,
        )
        # the true mock model always reproduces M_D, so only ties can be wrong
        for record in result.per_round:
            self.assertTrue(record.correct or record.confidence == 0.5)
        self.assertGreaterEqual(result.correct, result.n - result.ties)

        ltu_round = make_ltu_round(defender, reserved, round_seed=0)
        with self.assertRaises(CapabilityError):
            retrain_attack(ltu_round, trainer, target, distance="parameters")

    def test_gradient_attack(self):
        ltu_round = make_ltu_round(self.defender, self.reserved, round_seed=4)
        prediction = gradient_attack(ltu_round, self.model)
        self.assertEqual(prediction.strategy, "gradient")
        self.assertGreaterEqual(prediction.confidence, 0.5)

        bounded = gradient_attack(ltu_round, self.model, LossKind.BOUNDED_TRUE_CLASS, make_rng(0))
        self.assertIn(bounded.defender_index, (0, 1))

        knn = train(TrainerConfig(algorithm=Algorithm.KNN), self.defender)
        with self.assertRaises(CapabilityError):
            gradient_attack(ltu_round, knn)

    def test_trained_model_attack_is_reproducible(self):
        ltu_round = make_ltu_round(self.defender, self.reserved, round_seed=8)
        first = trained_model_attack(ltu_round, self.model, rng=make_rng(5))
        second = trained_model_attack(ltu_round, self.model, rng=make_rng(5))
        self.assertEqual(first, second)
        self.assertEqual(first.strategy, "trained")

        raw = trained_model_attack(
            ltu_round, self.model, features=("bounded_loss",), rng=make_rng(5), include_raw=True,
        )
        self.assertIn(raw.defender_index, (0, 1))

        empty = make_ltu_round(self.defender.subset([0]), self.reserved.subset([0]), round_seed=1)
        self.assertEqual(trained_model_attack(empty, self.model, rng=make_rng(1)).strategy, "coin")

    def test_output_attackers_on_overfit_model(self):
        source = generate_blobs(num_classes=3, dim=10, per_class=40, class_separation=2.5, noise_scale=1.0, seed=46)
        defender, reserved = split_source(source, 0.5, seed=47)
        defender, reserved = flip_labels(defender, 0.2, seed=48), flip_labels(reserved, 0.2, seed=49)
        trainer = TrainerConfig(
            algorithm=Algorithm.MLP_SGD,
            hidden_width=64,
            learning_rate=0.1,
            batch_size=16,
            epochs=4000,
        )
        scorer = LtuScore(trainer)
        model = scorer.train_defender(defender, seed=1)

        n = 100
        comparison = scorer.compare(
            defender,
            reserved,
            [
                AttackerSpec(strategy=Strategy.GAP),
                AttackerSpec(strategy=Strategy.TRAINED, features=("bounded_loss",)),
                AttackerSpec(strategy=Strategy.TRAINED),
                AttackerSpec(strategy=Strategy.TRAINED, features=("constant",)),
            ],
            n_rounds=n,
            master_seed=2,
            model=model,
        )
        gap, single, default, constant = (row["a_ltu"] for row in comparison["attackers"])

        self.assertGreaterEqual(single, gap - 0.05)
        self.assertGreater(default, 0.6)
        # constant features leave M_A nothing to learn from
        low, high = binomial_band(0.5, n, 0.95)
        self.assertTrue(low <= constant <= high)
        for record in comparison["results"][3].per_round:
            self.assertEqual(record.confidence, 0.5)

    def test_gradient_attack_on_regularized_model(self):
        source = generate_blobs(num_classes=2, dim=2, per_class=1000, class_separation=2.0, noise_scale=1.0, seed=51)
        defender, reserved = split_source(source, 0.5, seed=52)
        trainer = TrainerConfig(algorithm=Algorithm.LOGISTIC_GD, learning_rate=0.02, l2=50.0, epochs=100)

        n = 400
        result = LtuScore(trainer, AttackerSpec(strategy=Strategy.GRADIENT)).run_ltu(
            defender, reserved, n_rounds=n, master_seed=53,
        )
        low, high = binomial_band(0.5, n, 0.95)
        self.assertTrue(low <= result.a_ltu <= high)

    def test_load_attacker_dispatch(self):
        ltu_round = make_ltu_round(self.defender, self.reserved, round_seed=10)
        trainer = TrainerConfig()
        for strategy in Strategy:
            with self.subTest(strategy=strategy.value):
                attack = load_attacker(AttackerSpec(strategy=strategy))
                prediction = attack(ltu_round, self.model, trainer, make_rng(1))
                self.assertEqual(prediction.strategy, strategy.value)

    def test_attacker_spec(self):
        self.assertEqual(AttackerSpec().tag, "gap(bounded_loss)")
        self.assertEqual(AttackerSpec(strategy="blf").tag, "blf(bounded_true_class)")
        self.assertEqual(AttackerSpec(strategy="retrain", seed_policy="fresh").tag, "retrain(original,fresh)")
        self.assertEqual(AttackerSpec(strategy="gradient").tag, "gradient(training)")
        self.assertEqual(AttackerSpec(strategy="gradient", gradient_loss="bounded_true_class").tag,
                         "gradient(bounded_true_class)")
        self.assertEqual(AttackerSpec(strategy="trained", features=["entropy"]).tag, "trained(entropy)")
        self.assertEqual(AttackerSpec(strategy="coin").tag, "coin")

        spec = AttackerSpec(strategy="retrain", order_policy="random").to_dict()
        self.assertEqual(spec["strategy"], "retrain")
        self.assertEqual(spec["order_policy"], "random")
        self.assertIsNone(spec["attack_trainer"])

        for bad in ({"strategy": "oracle"}, {"discriminant": "nope"}, {"distance": "l1"}, {"features": ["nope"]}):
            with self.assertRaises(ArgumentError):
                AttackerSpec(**bad)


if __name__ == "__main__":
    unittest.main()
