import logging
from dataclasses import dataclass, field, fields
from enum import Enum
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from ltuscore.utils.errors import ArgumentError, BoundViolationError, CapabilityError, DiscriminantError
from ltuscore.utils.module_data import LabeledDataset, LtuRound, MembershipLabel, Sample
from ltuscore.utils.module_defender import (
    Algorithm,
    DefenderModel,
    LossKind,
    TrainerConfig,
    gradient,
    losses,
    output_distance,
    param_distance,
    predict_proba,
    train,
)
from ltuscore.utils.utils import make_rng

logger = logging.getLogger(__name__)


class Strategy(str, Enum):
    COIN = "coin"
    GAP = "gap"
    BLF = "blf"
    RETRAIN = "retrain"
    GRADIENT = "gradient"
    TRAINED = "trained"


class SeedPolicy(str, Enum):
    SHARED = "shared"
    WRONG = "wrong"
    FRESH = "fresh"


class OrderPolicy(str, Enum):
    ORIGINAL = "original"
    RANDOM = "random"


@dataclass(frozen=True)
class MembershipPrediction:
    """
    Attacker's claim for one round

    Args:
        defender_index (int): index in (u1, u2) claimed to be the Defender member
        confidence (float): descriptive confidence in [0.5, 1], 0.5 being a coin flip
        strategy (str): attacker tag

    """

    defender_index: int
    confidence: float
    strategy: str

    def __post_init__(self):
        if self.defender_index not in (0, 1):
            raise ArgumentError(f"`defender_index` must be 0 or 1, got {self.defender_index}")
        object.__setattr__(self, "confidence", float(min(max(self.confidence, 0.5), 1.0)))

    @property
    def assignment(self) -> Tuple[MembershipLabel, MembershipLabel]:
        if self.defender_index == 0:
            return MembershipLabel.DEFENDER, MembershipLabel.RESERVED
        return MembershipLabel.RESERVED, MembershipLabel.DEFENDER


@dataclass(frozen=True)
class DiscriminantFn:
    """
    Named real-valued function f(model, features, labels) evaluated row-wise

    Args:
        name (str): discriminant tag
        fn (Callable): maps (model, (n, k) features, (n,) labels) to (n,) values

    """

    name: str
    fn: Callable[[DefenderModel, np.ndarray, np.ndarray], np.ndarray] = field(compare=False)

    def batch(self, model: DefenderModel, data: LabeledDataset) -> np.ndarray:
        if len(data) == 0:
            return np.zeros(0)
        return self._checked(self.fn(model, data.features, data.labels))

    def __call__(self, model: DefenderModel, sample: Sample) -> float:
        values = self.fn(model, sample.features[None, :], np.array([sample.label]))
        return float(self._checked(values)[0])

    def _checked(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64).ravel()
        if not np.all(np.isfinite(values)):
            raise DiscriminantError(f"discriminant `{self.name}` returned a non-finite value")
        return values


def _as_dataset(model: DefenderModel, X: np.ndarray, y: np.ndarray) -> LabeledDataset:
    return LabeledDataset(X, y, model.num_classes)


def _loss_fn(kind: LossKind):
    return lambda model, X, y: losses(model, _as_dataset(model, X, y), kind)


def _max_probability(model, X, y):
    return predict_proba(model, X).max(axis=1)


def _one_minus_confidence(model, X, y):
    return 1.0 - predict_proba(model, X).max(axis=1)


def _entropy(model, X, y):
    P = predict_proba(model, X)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(P > 0, -P * np.log(P), 0.0)
    return terms.sum(axis=1)


def _negative_margin(model, X, y):
    P = predict_proba(model, X)
    true = P[np.arange(len(y)), y]
    others = P.copy()
    others[np.arange(len(y)), y] = -np.inf
    return others.max(axis=1) - true


def _gradient_norm_fn(kind: Optional[LossKind]):

    def gradient_norm(model, X, y):
        return np.array([
            np.linalg.norm(gradient(model, Sample(x, label), kind)) for x, label in zip(X, y)
        ])

    return gradient_norm


DISCRIMINANTS: Dict[str, DiscriminantFn] = {
    "bounded_loss": DiscriminantFn("bounded_loss", _loss_fn(LossKind.BOUNDED_TRUE_CLASS)),
    "zero_one_loss": DiscriminantFn("zero_one_loss", _loss_fn(LossKind.ZERO_ONE)),
    "gradient_norm": DiscriminantFn("gradient_norm", _gradient_norm_fn(None)),
    "bounded_gradient_norm": DiscriminantFn("bounded_gradient_norm", _gradient_norm_fn(LossKind.BOUNDED_TRUE_CLASS)),
    "max_probability": DiscriminantFn("max_probability", _max_probability),
    "one_minus_confidence": DiscriminantFn("one_minus_confidence", _one_minus_confidence),
    "entropy": DiscriminantFn("entropy", _entropy),
    "negative_margin": DiscriminantFn("negative_margin", _negative_margin),
    "constant": DiscriminantFn("constant", lambda model, X, y: np.zeros(len(X))),
}


def get_discriminant(name: Union[str, DiscriminantFn]) -> DiscriminantFn:
    if isinstance(name, DiscriminantFn):
        return name
    try:
        return DISCRIMINANTS[name]
    except KeyError as error:
        raise ArgumentError(f"unknown discriminant `{name}`, choose from {sorted(DISCRIMINANTS)}") from error


def _pick_smaller(values: Tuple[float, float], rng: np.random.Generator, strategy: str) -> MembershipPrediction:
    """Smaller value claimed Defender, ties decided by a fair coin"""
    v1, v2 = values
    if v1 < v2:
        index, confidence = 0, 1.0
    elif v2 < v1:
        index, confidence = 1, 1.0
    else:
        index, confidence = int(rng.integers(2)), 0.5
    return MembershipPrediction(defender_index=index, confidence=confidence, strategy=strategy)


def coin_attack(ltu_round: LtuRound, rng: np.random.Generator) -> MembershipPrediction:
    """Null attacker: a fair coin"""
    return MembershipPrediction(defender_index=int(rng.integers(2)), confidence=0.5, strategy=Strategy.COIN.value)


def gap_attack(
    ltu_round: LtuRound,
    model: DefenderModel,
    f: Union[str, DiscriminantFn],
    rng: np.random.Generator,
) -> MembershipPrediction:
    """
    Generalization gap attacker: the unlabeled sample with the smaller f is the Defender member

    Args:
        ltu_round (LtuRound): round to attack
        model (DefenderModel): Defender model M_D
        f (Union[str, DiscriminantFn]): discriminant function or its name
        rng (np.random.Generator): round stream, used for ties

    Returns:
        MembershipPrediction: claim

    """
    f = get_discriminant(f)
    u1, u2 = ltu_round.unlabeled
    return _pick_smaller((f(model, u1), f(model, u2)), rng, Strategy.GAP.value)


def blf_attack(
    ltu_round: LtuRound,
    model: DefenderModel,
    kind: Union[LossKind, str, DiscriminantFn],
    rng: np.random.Generator,
) -> MembershipPrediction:
    """
    Bounded-loss attacker: draw z ~ U(0, 1) and claim u1 Reserved iff z < loss(u1)

    Args:
        ltu_round (LtuRound): round to attack
        model (DefenderModel): Defender model M_D
        kind (Union[LossKind, str, DiscriminantFn]): loss kind, or a discriminant bounded in [0, 1]
        rng (np.random.Generator): round stream

    Returns:
        MembershipPrediction: claim

    """
    u1 = ltu_round.unlabeled[0]

    if isinstance(kind, DiscriminantFn):
        value = kind(model, u1)
    else:
        value = float(losses(model, LabeledDataset(u1.features[None, :], [u1.label], model.num_classes), kind)[0])
    if not 0.0 <= value <= 1.0:
        raise BoundViolationError(f"loss value {value} is outside [0, 1]")

    z = rng.uniform()
    index = 1 if z < value else 0
    return MembershipPrediction(defender_index=index, confidence=max(value, 1.0 - value), strategy=Strategy.BLF.value)


def _mock_training_set(
    ltu_round: LtuRound,
    candidate: Sample,
    order_policy: OrderPolicy,
    rng: np.random.Generator,
) -> LabeledDataset:
    if order_policy == OrderPolicy.ORIGINAL:
        return ltu_round.attack_defender.with_sample(candidate, ltu_round.held_out_index)
    return ltu_round.attack_defender.with_sample(candidate).permuted(rng)


def _attacker_seed(target: DefenderModel, seed_policy: SeedPolicy, wrong_seed: int, rng: np.random.Generator):
    if seed_policy == SeedPolicy.SHARED:
        return target.seed
    if seed_policy == SeedPolicy.WRONG:
        if target.seed is not None and wrong_seed == target.seed:
            return wrong_seed + 1
        return wrong_seed
    return int(rng.integers(2 ** 32))


def retrain_attack(
    ltu_round: LtuRound,
    trainer: TrainerConfig,
    target: DefenderModel,
    seed_policy: Union[SeedPolicy, str] = SeedPolicy.SHARED,
    rng: Optional[np.random.Generator] = None,
    order_policy: Union[OrderPolicy, str] = OrderPolicy.ORIGINAL,
    distance: str = "auto",
    wrong_seed: int = 0,
) -> MembershipPrediction:
    """
    Mock-model attacker: retrain the Defender trainer with u1 and with u2 in place of
    the hidden sample, and claim the one whose model is closest to M_D

    Args:
        ltu_round (LtuRound): round to attack
        trainer (TrainerConfig): Defender trainer, with all its hyper-parameters
        target (DefenderModel): Defender model M_D
        seed_policy (SeedPolicy, optional): reuse the Defender seed, a fixed wrong seed,
            or a fresh random seed. Defaults to SeedPolicy.SHARED.
        rng (np.random.Generator, optional): round stream. Defaults to a generator seeded by the round.
        order_policy (OrderPolicy, optional): insert the candidate at the held-out position,
            or train on a random permutation. Defaults to OrderPolicy.ORIGINAL.
        distance (str, optional): `parameters`, `proba`, `predict`, or `auto`
            (parameters, or `proba` for example-based models). Defaults to "auto".
        wrong_seed (int, optional): seed used by `SeedPolicy.WRONG`. Defaults to 0.

    Returns:
        MembershipPrediction: claim

    """
    seed_policy, order_policy = SeedPolicy(seed_policy), OrderPolicy(order_policy)
    rng = rng if rng is not None else make_rng(ltu_round.round_seed)

    if distance == "auto":
        distance = "proba" if trainer.capabilities.example_based else "parameters"

    probe = np.concatenate([
        ltu_round.attack_defender.features,
        ltu_round.attack_reserved.features,
        np.stack([u.features for u in ltu_round.unlabeled]),
    ])

    distances = list()
    for candidate in ltu_round.unlabeled:
        data = _mock_training_set(ltu_round, candidate, order_policy, rng)
        seed = _attacker_seed(target, seed_policy, wrong_seed, rng)
        mock = train(trainer, data, seed)
        if distance == "parameters":
            distances.append(param_distance(mock, target))
        else:
            distances.append(output_distance(mock, target, probe, distance))

    prediction = _pick_smaller(tuple(distances), rng, Strategy.RETRAIN.value)
    d1, d2 = distances
    if min(distances) == 0.0 and max(distances) > 0.0:
        confidence = 1.0
    elif d1 + d2 > 0:
        confidence = 0.5 + 0.5 * abs(d1 - d2) / (d1 + d2)
    else:
        logger.debug("Both mock models match the Defender model in round seed %d", ltu_round.round_seed)
        confidence = 0.5
    return MembershipPrediction(prediction.defender_index, confidence, prediction.strategy)


def gradient_attack(
    ltu_round: LtuRound,
    model: DefenderModel,
    kind: Optional[LossKind] = None,
    rng: Optional[np.random.Generator] = None,
) -> MembershipPrediction:
    """
    White-box attacker: the unlabeled sample with the smaller gradient norm at M_D is the Defender member

    Args:
        ltu_round (LtuRound): round to attack
        model (DefenderModel): differentiable Defender model
        kind (LossKind, optional): BOUNDED_TRUE_CLASS, or None for the trainer's loss. Defaults to None.
        rng (np.random.Generator, optional): round stream, used for ties. Defaults to a generator seeded by the round.

    Returns:
        MembershipPrediction: claim

    """
    if not model.capabilities.differentiable:
        raise CapabilityError(f"`{model.algorithm.value}` is not differentiable")
    rng = rng if rng is not None else make_rng(ltu_round.round_seed)

    norms = tuple(float(np.linalg.norm(gradient(model, u, kind))) for u in ltu_round.unlabeled)
    prediction = _pick_smaller(norms, rng, Strategy.GRADIENT.value)
    total = sum(norms)
    confidence = 0.5 + 0.5 * abs(norms[0] - norms[1]) / total if total > 0 else 0.5
    return MembershipPrediction(prediction.defender_index, confidence, prediction.strategy)


def _membership_features(
    model: DefenderModel,
    data: LabeledDataset,
    features: Sequence[DiscriminantFn],
    include_raw: bool,
) -> np.ndarray:
    columns = [f.batch(model, data) for f in features]
    matrix = np.column_stack(columns) if columns else np.zeros((len(data), 0))
    if include_raw:
        matrix = np.column_stack([matrix, data.features])
    return matrix


def default_attack_trainer() -> TrainerConfig:
    return TrainerConfig(algorithm=Algorithm.LOGISTIC_GD, learning_rate=0.5, epochs=300)


def trained_model_attack(
    ltu_round: LtuRound,
    model: DefenderModel,
    attack_trainer: Optional[TrainerConfig] = None,
    features: Sequence[Union[str, DiscriminantFn]] = ("bounded_loss", "max_probability", "entropy"),
    rng: Optional[np.random.Generator] = None,
    include_raw: bool = False,
) -> MembershipPrediction:
    """
    M_D-attacker: learn membership from M_D-derived features on the attack data D_A

    Args:
        ltu_round (LtuRound): round to attack
        model (DefenderModel): Defender model M_D
        attack_trainer (TrainerConfig, optional): trainer of the membership model M_A. Defaults to LogisticGD.
        features (Sequence, optional): discriminants used as input features.
            Defaults to (bounded loss, top-1 probability, entropy).
        rng (np.random.Generator, optional): round stream, used for ties and seeded trainers.
        include_raw (bool, optional): also feed the raw sample features to M_A. Defaults to False.

    Returns:
        MembershipPrediction: claim

    """
    attack_trainer = attack_trainer if attack_trainer is not None else default_attack_trainer()
    rng = rng if rng is not None else make_rng(ltu_round.round_seed)
    features = [get_discriminant(f) for f in features]

    defender_part = _membership_features(model, ltu_round.attack_defender, features, include_raw)
    reserved_part = _membership_features(model, ltu_round.attack_reserved, features, include_raw)
    X = np.concatenate([defender_part, reserved_part])
    # membership class 1 = Defender
    y = np.concatenate([np.ones(len(defender_part), dtype=np.int64), np.zeros(len(reserved_part), dtype=np.int64)])

    pair = LabeledDataset.from_samples(list(ltu_round.unlabeled), model.num_classes)
    U = _membership_features(model, pair, features, include_raw)

    if len(X) == 0 or X.shape[1] == 0:
        return coin_attack(ltu_round, rng)

    mean, std = X.mean(axis=0), X.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    membership = LabeledDataset((X - mean) / std, y, 2)

    attacker = train(attack_trainer, membership, int(rng.integers(2 ** 32)))
    p_defender = predict_proba(attacker, (U - mean) / std)[:, 1]

    # larger Defender probability wins, so compare negated values
    prediction = _pick_smaller((-p_defender[0], -p_defender[1]), rng, Strategy.TRAINED.value)
    confidence = 0.5 + 0.5 * abs(p_defender[0] - p_defender[1])
    return MembershipPrediction(prediction.defender_index, confidence, prediction.strategy)


@dataclass(frozen=True)
class AttackerSpec:
    """
    Attacker choice and its parameters

    Args:
        strategy (Strategy): which branch of the attacker taxonomy
        discriminant (str, optional): gap attacker's f. Defaults to "bounded_loss".
        loss_kind (LossKind, optional): blf attacker's bounded loss. Defaults to BOUNDED_TRUE_CLASS.
        gradient_loss (LossKind, optional): gradient attacker's loss, None for the trainer's loss.
        seed_policy (SeedPolicy, optional): retrain attacker's seed access. Defaults to SHARED.
        order_policy (OrderPolicy, optional): retrain attacker's sample order. Defaults to ORIGINAL.
        distance (str, optional): retrain attacker's model distance. Defaults to "auto".
        wrong_seed (int, optional): seed of SeedPolicy.WRONG. Defaults to 0.
        features (Tuple[str, ...], optional): trained attacker's input discriminants.
        include_raw (bool, optional): trained attacker also sees raw features. Defaults to False.
        attack_trainer (TrainerConfig, optional): trained attacker's M_A trainer. Defaults to LogisticGD.

    """

    strategy: Strategy = Strategy.GAP
    discriminant: str = "bounded_loss"
    loss_kind: LossKind = LossKind.BOUNDED_TRUE_CLASS
    gradient_loss: Optional[LossKind] = None
    seed_policy: SeedPolicy = SeedPolicy.SHARED
    order_policy: OrderPolicy = OrderPolicy.ORIGINAL
    distance: str = "auto"
    wrong_seed: int = 0
    features: Tuple[str, ...] = ("bounded_loss", "max_probability", "entropy")
    include_raw: bool = False
    attack_trainer: Optional[TrainerConfig] = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "strategy", Strategy(self.strategy))
            object.__setattr__(self, "loss_kind", LossKind(self.loss_kind))
            object.__setattr__(self, "seed_policy", SeedPolicy(self.seed_policy))
            object.__setattr__(self, "order_policy", OrderPolicy(self.order_policy))
            if self.gradient_loss is not None:
                object.__setattr__(self, "gradient_loss", LossKind(self.gradient_loss))
        except ValueError as error:
            raise ArgumentError(str(error)) from error
        if self.distance not in ("auto", "parameters", "proba", "predict"):
            raise ArgumentError(f"unknown distance `{self.distance}`")
        if self.strategy == Strategy.GAP:
            get_discriminant(self.discriminant)
        object.__setattr__(self, "features", tuple(self.features))
        for name in self.features:
            get_discriminant(name)

    @property
    def tag(self) -> str:
        if self.strategy == Strategy.GAP:
            return f"gap({self.discriminant})"
        if self.strategy == Strategy.BLF:
            return f"blf({self.loss_kind.value})"
        if self.strategy == Strategy.RETRAIN:
            return f"retrain({self.order_policy.value},{self.seed_policy.value})"
        if self.strategy == Strategy.GRADIENT:
            return f"gradient({self.gradient_loss.value if self.gradient_loss else 'training'})"
        if self.strategy == Strategy.TRAINED:
            return f"trained({','.join(self.features)})"
        return self.strategy.value

    def to_dict(self) -> Dict:
        result = {f.name: getattr(self, f.name) for f in fields(self)}
        for name, value in result.items():
            if isinstance(value, Enum):
                result[name] = value.value
        result["features"] = list(self.features)
        if self.attack_trainer is not None:
            result["attack_trainer"] = self.attack_trainer.to_dict()
        return result


Attacker = Callable[[LtuRound, DefenderModel, TrainerConfig, np.random.Generator], MembershipPrediction]


def load_attacker(spec: AttackerSpec) -> Attacker:
    """
    Build the attack function of an attacker spec

    Args:
        spec (AttackerSpec): attacker choice

    Returns:
        function: maps (round, M_D, T_D, round stream) to a membership prediction

    """

    def attack(ltu_round: LtuRound, model: DefenderModel, trainer: TrainerConfig, rng: np.random.Generator):
        if spec.strategy == Strategy.COIN:
            return coin_attack(ltu_round, rng)
        if spec.strategy == Strategy.GAP:
            return gap_attack(ltu_round, model, spec.discriminant, rng)
        if spec.strategy == Strategy.BLF:
            return blf_attack(ltu_round, model, spec.loss_kind, rng)
        if spec.strategy == Strategy.RETRAIN:
            return retrain_attack(
                ltu_round,
                trainer,
                model,
                seed_policy=spec.seed_policy,
                rng=rng,
                order_policy=spec.order_policy,
                distance=spec.distance,
                wrong_seed=spec.wrong_seed,
            )
        if spec.strategy == Strategy.GRADIENT:
            return gradient_attack(ltu_round, model, spec.gradient_loss, rng)
        return trained_model_attack(
            ltu_round,
            model,
            spec.attack_trainer,
            spec.features,
            rng,
            spec.include_raw,
        )

    return attack
