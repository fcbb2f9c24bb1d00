import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from rich import print
from rich.progress import track

from ltuscore.utils.errors import ArgumentError, ProtocolError, RoundError
from ltuscore.utils.module_attacker import AttackerSpec, Strategy, get_discriminant, load_attacker
from ltuscore.utils.module_data import (
    LabeledDataset,
    LtuRound,
    MembershipLabel,
    Sample,
    check_disjoint,
    make_ltu_round,
)
from ltuscore.utils.module_defender import DefenderModel, LossKind, TrainerConfig, losses, predict, train
from ltuscore.utils.module_oracle import (
    exact_expected_losses,
    exact_pair_stats,
    individual_pair_accuracies,
    theorem1_accuracy,
    theorem2_accuracy,
)
from ltuscore.utils.utils import Config, ScoreWithError, derive_seed, make_rng, privacy_score, utility_from_counts

logger = logging.getLogger(__name__)


def reserved_accuracy(model: DefenderModel, reserved: LabeledDataset) -> int:
    """Number of Reserved samples the Defender model classifies correctly"""
    if len(reserved) == 0:
        raise ArgumentError("`reserved` must not be empty")
    return int((predict(model, reserved.features) == reserved.labels).sum())


def utility_score(model: DefenderModel, reserved: LabeledDataset) -> ScoreWithError:
    """
    Chance-corrected classification accuracy of the Defender model on Reserved data

    Args:
        model (DefenderModel): Defender model M_D
        reserved (LabeledDataset): Reserved data D_R

    Returns:
        ScoreWithError: utility score

    """
    correct = reserved_accuracy(model, reserved)
    return utility_from_counts(correct, len(reserved), model.num_classes)


@dataclass(frozen=True)
class RoundRecord:
    index: int
    round_seed: int
    claimed: int
    truth: int
    correct: bool
    confidence: float

    def to_dict(self) -> Dict:
        return {
            "index": self.index,
            "round_seed": self.round_seed,
            "claimed": self.claimed,
            "truth": self.truth,
            "correct": self.correct,
            "confidence": self.confidence,
        }


@dataclass(frozen=True)
class LtuResult:
    """
    Outcome of N LTU rounds against one attacker

    Args:
        attacker (str): attacker tag
        n (int): number of rounds N
        correct (int): rounds where both hidden labels were assigned correctly
        privacy (ScoreWithError): privacy score computed from a_ltu and N
        per_round (List[RoundRecord]): one record per round, in round order
        ties (int): rounds the attacker could only decide by a coin flip

    """

    attacker: str
    n: int
    correct: int
    privacy: ScoreWithError
    per_round: List[RoundRecord] = field(default_factory=list)
    ties: int = 0

    @property
    def a_ltu(self) -> float:
        return self.correct / self.n

    @property
    def degenerate_stderr(self) -> bool:
        return self.correct in (0, self.n)

    def to_dict(self) -> Dict:
        return {
            "attacker": self.attacker,
            "a_ltu": self.a_ltu,
            "correct": self.correct,
            "n": self.n,
            "privacy": self.privacy.to_dict(),
            "degenerate_stderr": self.degenerate_stderr,
            "ties": self.ties,
            "per_round": [record.to_dict() for record in self.per_round],
        }


@dataclass(frozen=True)
class IndividualPrivacyReport:
    """
    Individual privacy scores and their histogram

    Args:
        mode (str): `exact` (all pairs enumerated) or `monte_carlo`
        defender_scores (List[ScoreWithError]): one score per Defender sample
        reserved_scores (List[ScoreWithError]): one non-membership score per Reserved sample, may be empty
        bin_edges (np.ndarray): histogram bin edges over [0, 1]
        counts (np.ndarray): histogram counts of the Defender scores

    """

    mode: str
    defender_scores: List[ScoreWithError]
    reserved_scores: List[ScoreWithError]
    bin_edges: np.ndarray
    counts: np.ndarray

    def histogram_rows(self) -> List[Dict]:
        return [
            {"bin_low": float(low), "bin_high": float(high), "count": int(count)}
            for low, high, count in zip(self.bin_edges[:-1], self.bin_edges[1:], self.counts)
        ]

    def score_rows(self) -> List[Dict]:
        rows = list()
        for membership, scores in (
            (MembershipLabel.DEFENDER, self.defender_scores),
            (MembershipLabel.RESERVED, self.reserved_scores),
        ):
            for index, score in enumerate(scores):
                rows.append({
                    "membership": membership.value,
                    "index": index,
                    "score": score.value,
                    "stderr": score.stderr,
                    "n": score.n,
                })
        return rows

    def to_dict(self) -> Dict:
        return {
            "mode": self.mode,
            "individual_scores": self.score_rows(),
            "histogram": self.histogram_rows(),
        }


def _individual_score(pair_accuracy: float, n: int) -> ScoreWithError:
    # individual accuracies are exact fractions with ties counted half
    return privacy_score(min(max(pair_accuracy, 0.0), 1.0), n)


class LtuScore:
    def __init__(
        self,
        trainer: TrainerConfig = None,
        attacker: AttackerSpec = None,
        config: Config = None,
    ):
        """
        LtuScore object used to evaluate the utility and the membership inference privacy of a training algorithm

        Args:
            trainer (TrainerConfig, optional): Defender trainer T_D. Defaults to LogisticGD.
            attacker (AttackerSpec, optional): attacker used by default. Defaults to the loss gap attacker.
            config (Config, optional): library defaults. Defaults to None.

        """
        self.config = config if config is not None else Config()
        self.trainer = trainer if trainer is not None else TrainerConfig()
        self.attacker = attacker if attacker is not None else AttackerSpec()

    def train_defender(
        self,
        defender: LabeledDataset,
        trainer: TrainerConfig = None,
        seed: Optional[int] = None,
    ) -> DefenderModel:
        """
        Train the Defender model M_D once

        Args:
            defender (LabeledDataset): Defender data D_D
            trainer (TrainerConfig, optional): Defender trainer. Defaults to `self.trainer`.
            seed (int, optional): training seed. Defaults to None.

        Returns:
            DefenderModel: M_D

        """
        trainer = trainer if trainer is not None else self.trainer
        logger.info("Training Defender model (%s) on %d samples...", trainer.algorithm.value, len(defender))
        return train(trainer, defender, seed)

    def calculate_utility(
        self,
        model: DefenderModel,
        reserved: LabeledDataset,
        verbose: bool = False,
    ) -> ScoreWithError:
        score = utility_score(model, reserved)
        if verbose:
            print(f"Utility: {score}")
        return score

    def _run_round(
        self,
        index: int,
        ltu_round: LtuRound,
        attack,
        model: DefenderModel,
        trainer: TrainerConfig,
    ) -> RoundRecord:
        try:
            prediction = attack(ltu_round, model, trainer, make_rng(derive_seed(ltu_round.round_seed, "attack")))
        except Exception as error:
            raise RoundError(index, error) from error

        correct = prediction.defender_index == ltu_round.truth
        logger.debug(
            "round %d: claimed %d, truth %d, confidence %.3f",
            index,
            prediction.defender_index,
            ltu_round.truth,
            prediction.confidence,
        )
        return RoundRecord(
            index=index,
            round_seed=ltu_round.round_seed,
            claimed=prediction.defender_index,
            truth=ltu_round.truth,
            correct=correct,
            confidence=prediction.confidence,
        )

    def _run_rounds(
        self,
        rounds: Sequence[LtuRound],
        attacker: AttackerSpec,
        model: DefenderModel,
        trainer: TrainerConfig,
        n_jobs: int = 1,
        verbose: bool = False,
    ) -> LtuResult:
        attack = load_attacker(attacker)
        indices = range(len(rounds))

        if n_jobs > 1:
            with ThreadPoolExecutor(max_workers=n_jobs) as executor:
                records = list(
                    executor.map(lambda i: self._run_round(i, rounds[i], attack, model, trainer), indices)
                )
        else:
            iterator = track(indices, description=f"{attacker.tag}") if verbose else indices
            records = [self._run_round(i, rounds[i], attack, model, trainer) for i in iterator]

        correct = sum(record.correct for record in records)
        # claims decided by a coin flip on equal values carry confidence exactly 1/2
        ties = 0
        if attacker.strategy in (Strategy.GAP, Strategy.RETRAIN, Strategy.GRADIENT):
            ties = sum(record.confidence == 0.5 for record in records)
        result = LtuResult(
            attacker=attacker.tag,
            n=len(records),
            correct=correct,
            privacy=privacy_score(correct / len(records), len(records)),
            per_round=records,
            ties=ties,
        )

        if attacker.strategy == Strategy.RETRAIN and ties:
            logger.warning(
                "%d of %d rounds had indistinguishable mock models, the trainer may not be injective",
                ties,
                result.n,
            )
        if result.degenerate_stderr:
            logger.warning("a_ltu = %.1f, the normal-approximation standard error collapses to 0", result.a_ltu)
        return result

    def make_rounds(
        self,
        defender: LabeledDataset,
        reserved: LabeledDataset,
        n_rounds: int,
        master_seed: int,
    ) -> List[LtuRound]:
        """Draw N independent rounds, round i seeded by `derive_seed(master_seed, "round", i)`"""
        if n_rounds < 1:
            raise ArgumentError(f"`n_rounds` must be at least 1, got {n_rounds}")
        check_disjoint(defender, reserved)
        return [
            make_ltu_round(defender, reserved, derive_seed(master_seed, "round", i), check=False)
            for i in range(n_rounds)
        ]

    def run_ltu(
        self,
        defender: LabeledDataset,
        reserved: LabeledDataset,
        trainer: TrainerConfig = None,
        attacker: AttackerSpec = None,
        n_rounds: Optional[int] = None,
        master_seed: int = 0,
        model: Optional[DefenderModel] = None,
        defender_seed: Optional[int] = None,
        n_jobs: int = 1,
        verbose: bool = False,
    ) -> LtuResult:
        """
        Run N independent LTU rounds against a Defender model trained once

        Args:
            defender (LabeledDataset): Defender data D_D
            reserved (LabeledDataset): Reserved data D_R, disjoint from D_D
            trainer (TrainerConfig, optional): Defender trainer. Defaults to `self.trainer`.
            attacker (AttackerSpec, optional): attacker. Defaults to `self.attacker`.
            n_rounds (int, optional): number of rounds N. Defaults to `Config.ROUNDS`.
            master_seed (int, optional): seed every round stream derives from. Defaults to 0.
            model (DefenderModel, optional): already trained M_D. Defaults to None.
            defender_seed (int, optional): training seed of M_D. Defaults to `derive_seed(master_seed, "defender")`.
            n_jobs (int, optional): rounds evaluated concurrently. Defaults to 1.
            verbose (bool, optional): print the result. Defaults to False.

        Returns:
            LtuResult: LTU accuracy and privacy score

        """
        trainer = trainer if trainer is not None else self.trainer
        attacker = attacker if attacker is not None else self.attacker
        n_rounds = n_rounds if n_rounds is not None else self.config.ROUNDS

        rounds = self.make_rounds(defender, reserved, n_rounds, master_seed)
        if model is None:
            seed = defender_seed if defender_seed is not None else derive_seed(master_seed, "defender")
            model = self.train_defender(defender, trainer, seed)

        logger.info("Running %d LTU rounds with the %s attacker...", n_rounds, attacker.tag)
        result = self._run_rounds(rounds, attacker, model, trainer, n_jobs, verbose)

        if verbose:
            print(f"{attacker.tag}: A_ltu = {result.a_ltu:.3f}, Privacy: {result.privacy}")
        return result

    def individual_privacy(
        self,
        sample: Sample,
        others: LabeledDataset,
        rest: LabeledDataset,
        model: DefenderModel,
        trainer: TrainerConfig = None,
        attacker: AttackerSpec = None,
        n_rounds: Optional[int] = None,
        seed: int = 0,
        membership: MembershipLabel = MembershipLabel.DEFENDER,
        position: Optional[int] = None,
    ) -> ScoreWithError:
        """
        Individual privacy score of one sample: the sample is hidden in every round,
        its counterpart is drawn at random from the other set

        Args:
            sample (Sample): sample to score
            others (LabeledDataset): the other set (D_R for a Defender sample, D_D for a Reserved one)
            rest (LabeledDataset): the sample's own set without it
            model (DefenderModel): Defender model M_D
            trainer (TrainerConfig, optional): Defender trainer. Defaults to `self.trainer`.
            attacker (AttackerSpec, optional): attacker. Defaults to `self.attacker`.
            n_rounds (int, optional): number of rounds. Defaults to `Config.ROUNDS`.
            seed (int, optional): seed of the rounds. Defaults to 0.
            membership (MembershipLabel, optional): set the sample belongs to. Defaults to DEFENDER.
            position (int, optional): index of the sample in its own set. Defaults to the end of `rest`.

        Returns:
            ScoreWithError: individual (non-)membership privacy score

        """
        trainer = trainer if trainer is not None else self.trainer
        attacker = attacker if attacker is not None else self.attacker
        n_rounds = n_rounds if n_rounds is not None else self.config.ROUNDS
        membership = MembershipLabel(membership)

        if n_rounds < 1:
            raise ArgumentError(f"`n_rounds` must be at least 1, got {n_rounds}")
        if sample.key() in set(others.keys()):
            raise ProtocolError("the scored sample also belongs to the other set")

        position = position if position is not None else len(rest)
        own = rest.with_sample(sample, position)

        if membership == MembershipLabel.DEFENDER:
            defender, reserved, pins = own, others, {"defender_index": position}
        else:
            defender, reserved, pins = others, own, {"reserved_index": position}
        check_disjoint(defender, reserved)

        rounds = [
            make_ltu_round(defender, reserved, derive_seed(seed, "individual", i), check=False, **pins)
            for i in range(n_rounds)
        ]
        result = self._run_rounds(rounds, attacker, model, trainer)
        return result.privacy

    def individual_privacy_report(
        self,
        defender: LabeledDataset,
        reserved: LabeledDataset,
        model: DefenderModel,
        trainer: TrainerConfig = None,
        attacker: AttackerSpec = None,
        n_rounds: Optional[int] = None,
        seed: int = 0,
        include_reserved: bool = False,
        bins: Optional[int] = None,
    ) -> IndividualPrivacyReport:
        """
        Individual privacy score of every Defender sample (and optionally every Reserved sample)

        Gap attackers are scored exactly against every sample of the other set, other
        attackers by `n_rounds` Monte Carlo rounds per sample.

        Args:
            defender (LabeledDataset): Defender data D_D
            reserved (LabeledDataset): Reserved data D_R
            model (DefenderModel): Defender model M_D
            trainer (TrainerConfig, optional): Defender trainer. Defaults to `self.trainer`.
            attacker (AttackerSpec, optional): attacker. Defaults to `self.attacker`.
            n_rounds (int, optional): Monte Carlo rounds per sample. Defaults to `Config.INDIVIDUAL_ROUNDS`.
            seed (int, optional): seed of the Monte Carlo rounds. Defaults to 0.
            include_reserved (bool, optional): also score Reserved samples. Defaults to False.
            bins (int, optional): histogram bins on [0, 1]. Defaults to `Config.HISTOGRAM_BINS`.

        Returns:
            IndividualPrivacyReport: scores and histogram

        """
        trainer = trainer if trainer is not None else self.trainer
        attacker = attacker if attacker is not None else self.attacker
        n_rounds = n_rounds if n_rounds is not None else self.config.INDIVIDUAL_ROUNDS
        bins = bins if bins is not None else self.config.HISTOGRAM_BINS

        if attacker.strategy == Strategy.GAP:
            mode = "exact"
            f = get_discriminant(attacker.discriminant)
            acc_d, acc_r = individual_pair_accuracies(f.batch(model, defender), f.batch(model, reserved))
            defender_scores = [_individual_score(a, len(reserved)) for a in acc_d]
            reserved_scores = [_individual_score(a, len(defender)) for a in acc_r] if include_reserved else []
        else:
            mode = "monte_carlo"
            logger.info("Scoring %d samples with %d rounds each...", len(defender), n_rounds)
            defender_scores = [
                self.individual_privacy(
                    defender[j],
                    reserved,
                    defender.without(j),
                    model,
                    trainer,
                    attacker,
                    n_rounds,
                    derive_seed(seed, "defender", j),
                    MembershipLabel.DEFENDER,
                    position=j,
                )
                for j in range(len(defender))
            ]
            reserved_scores = list()
            if include_reserved:
                reserved_scores = [
                    self.individual_privacy(
                        reserved[j],
                        defender,
                        reserved.without(j),
                        model,
                        trainer,
                        attacker,
                        n_rounds,
                        derive_seed(seed, "reserved", j),
                        MembershipLabel.RESERVED,
                        position=j,
                    )
                    for j in range(len(reserved))
                ]

        counts, bin_edges = np.histogram([score.value for score in defender_scores], bins=bins, range=(0.0, 1.0))
        return IndividualPrivacyReport(
            mode=mode,
            defender_scores=defender_scores,
            reserved_scores=reserved_scores,
            bin_edges=bin_edges,
            counts=counts,
        )

    def theory(
        self,
        defender: LabeledDataset,
        reserved: LabeledDataset,
        model: DefenderModel,
        attacker: AttackerSpec = None,
    ) -> Optional[Dict]:
        """
        Oracle values of a discriminant-based attacker on the run's own data

        Args:
            defender (LabeledDataset): Defender data D_D
            reserved (LabeledDataset): Reserved data D_R
            model (DefenderModel): Defender model M_D
            attacker (AttackerSpec, optional): attacker. Defaults to `self.attacker`.

        Returns:
            Dict: p_R, p_D, tie and the smaller-f accuracy, plus e_D, e_R and the
                bounded-loss accuracy when f is bounded; None for other attackers

        """
        attacker = attacker if attacker is not None else self.attacker

        if attacker.strategy == Strategy.GAP:
            f = get_discriminant(attacker.discriminant)
            f_d, f_r = f.batch(model, defender), f.batch(model, reserved)
        elif attacker.strategy == Strategy.BLF:
            f_d = losses(model, defender, LossKind(attacker.loss_kind))
            f_r = losses(model, reserved, LossKind(attacker.loss_kind))
        else:
            return None

        stats = exact_pair_stats(f_d, f_r)
        block = {
            "p_r": stats.p_r,
            "p_d": stats.p_d,
            "tie": stats.tie_prob,
            "gap_accuracy": theorem1_accuracy(stats),
            "e_d": None,
            "e_r": None,
            "bounded_loss_accuracy": None,
        }
        if min(f_d.min(), f_r.min()) >= 0.0 and max(f_d.max(), f_r.max()) <= 1.0:
            e_d, e_r = exact_expected_losses(f_d, f_r)
            block.update(e_d=e_d, e_r=e_r, bounded_loss_accuracy=theorem2_accuracy(e_d, e_r))
        return block

    def compare(
        self,
        defender: LabeledDataset,
        reserved: LabeledDataset,
        attackers: Sequence[AttackerSpec],
        trainer: TrainerConfig = None,
        n_rounds: Optional[int] = None,
        master_seed: int = 0,
        model: Optional[DefenderModel] = None,
        defender_seed: Optional[int] = None,
        verbose: bool = False,
    ) -> Dict:
        """
        Evaluate several attackers on the identical round sequence

        Args:
            defender (LabeledDataset): Defender data D_D
            reserved (LabeledDataset): Reserved data D_R
            attackers (Sequence[AttackerSpec]): at least two attackers
            trainer (TrainerConfig, optional): Defender trainer. Defaults to `self.trainer`.
            n_rounds (int, optional): number of rounds N. Defaults to `Config.ROUNDS`.
            master_seed (int, optional): seed of the shared rounds. Defaults to 0.
            model (DefenderModel, optional): already trained M_D. Defaults to None.
            defender_seed (int, optional): training seed of M_D. Defaults to None.
            verbose (bool, optional): print the comparison. Defaults to False.

        Returns:
            Dict: per-attacker results with violation flags, and the pairwise agreement matrix

        """
        if len(attackers) < 2:
            raise ArgumentError("`attackers` must hold at least two attackers")

        trainer = trainer if trainer is not None else self.trainer
        n_rounds = n_rounds if n_rounds is not None else self.config.ROUNDS

        rounds = self.make_rounds(defender, reserved, n_rounds, master_seed)
        if model is None:
            seed = defender_seed if defender_seed is not None else derive_seed(master_seed, "defender")
            model = self.train_defender(defender, trainer, seed)

        results = [self._run_rounds(rounds, attacker, model, trainer) for attacker in attackers]
        claims = np.array([[record.claimed for record in result.per_round] for result in results])
        agreement = (claims[:, None, :] == claims[None, :, :]).mean(axis=2)

        threshold = 0.5 + self.config.VIOLATION_Z * 0.5 / math.sqrt(n_rounds)
        rows = [
            {
                "attacker": result.attacker,
                "a_ltu": result.a_ltu,
                "privacy": result.privacy.to_dict(),
                "violation": result.a_ltu > threshold,
            }
            for result in results
        ]

        if verbose:
            for row in rows:
                flag = " [red]privacy violation[/red]" if row["violation"] else ""
                print(f"{row['attacker']}: A_ltu = {row['a_ltu']:.3f}{flag}")

        return {
            "n": n_rounds,
            "violation_threshold": threshold,
            "attackers": rows,
            "agreement": agreement.tolist(),
            "results": results,
        }

    def __call__(
        self,
        defender: LabeledDataset,
        reserved: LabeledDataset,
        n_rounds: Optional[int] = None,
        master_seed: int = 0,
        verbose: bool = False,
    ) -> Dict:
        if defender.num_classes != reserved.num_classes:
            raise ArgumentError("`defender` and `reserved` must have the same number of classes!")

        model = self.train_defender(defender, seed=derive_seed(master_seed, "defender"))
        utility = self.calculate_utility(model, reserved, verbose)
        result = self.run_ltu(
            defender,
            reserved,
            n_rounds=n_rounds,
            master_seed=master_seed,
            model=model,
            verbose=verbose,
        )

        return {
            "utility": utility.to_dict(),
            "privacy": result.privacy.to_dict(),
            "a_ltu": result.a_ltu,
            "attacker": result.attacker,
        }
