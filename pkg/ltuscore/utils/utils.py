import hashlib
import math
from dataclasses import asdict, dataclass
from typing import Dict, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from ltuscore.utils.errors import ArgumentError
from ltuscore.utils.module_oracle import exact_pair_stats


@dataclass
class Config:
    ROUNDS: int = 100
    TRIALS: int = 1
    HISTOGRAM_BINS: int = 10
    BAND_CONFIDENCE: float = 0.95
    INDIVIDUAL_ROUNDS: int = 20
    ATTACK_FEATURES: Tuple[str, ...] = ("bounded_loss", "max_probability", "entropy")
    VIOLATION_Z: float = 2.0


@dataclass(frozen=True)
class ScoreWithError:
    """
    A score in [0, 1] with its standard error

    Args:
        value (float): clipped score
        stderr (float): normal-approximation standard error, not clipped
        n (int): number of trials or samples behind the estimate

    """

    value: float
    stderr: float
    n: int

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ArgumentError(f"`value` must lie in [0, 1], got {self.value}")
        if not math.isfinite(self.stderr) or self.stderr < 0:
            raise ArgumentError(f"`stderr` must be finite and non-negative, got {self.stderr}")

    def to_dict(self) -> Dict:
        return asdict(self)

    def __str__(self) -> str:
        return f"{self.value:.2f} ± {self.stderr:.2f}"


def _check_rate(name: str, rate: float):
    if not 0.0 <= rate <= 1.0:
        raise ArgumentError(f"`{name}` must lie in [0, 1], got {rate}")


def privacy_score(a_ltu: float, n: int) -> ScoreWithError:
    """
    Global privacy score from the LTU membership classification accuracy

        Privacy = min{2 (1 - A_ltu), 1} ± 2 sqrt(A_ltu (1 - A_ltu) / N)

    Args:
        a_ltu (float): LTU membership classification accuracy
        n (int): number of LTU rounds

    Returns:
        ScoreWithError: privacy score

    """
    _check_rate("a_ltu", a_ltu)
    if n < 1:
        raise ArgumentError(f"`n` must be at least 1, got {n}")

    value = min(2.0 * (1.0 - a_ltu), 1.0)
    stderr = 2.0 * math.sqrt(a_ltu * (1.0 - a_ltu) / n)
    return ScoreWithError(value=value, stderr=stderr, n=n)


def utility_from_accuracy(a_d: float, num_classes: int, n: int) -> ScoreWithError:
    """
    Chance-corrected utility score from the classification accuracy on Reserved data

        Utility = max{(c A_D - 1) / (c - 1), 0} ± c sqrt(A_D (1 - A_D) / |D_R|)

    Args:
        a_d (float): classification accuracy of the Defender model
        num_classes (int): number of classes c
        n (int): number of Reserved samples

    Returns:
        ScoreWithError: utility score

    """
    _check_rate("a_d", a_d)
    if num_classes < 2:
        raise ArgumentError(f"`num_classes` must be at least 2, got {num_classes}")
    if n < 1:
        raise ArgumentError(f"`n` must be at least 1, got {n}")

    value = min(max((num_classes * a_d - 1.0) / (num_classes - 1.0), 0.0), 1.0)
    stderr = num_classes * math.sqrt(a_d * (1.0 - a_d) / n)
    return ScoreWithError(value=value, stderr=stderr, n=n)


def utility_from_counts(correct: int, n: int, num_classes: int) -> ScoreWithError:
    """
    Same as `utility_from_accuracy`, with the chance correction done in integers
    so that chance-level and perfect predictions give exactly 0 and 1

    Args:
        correct (int): number of correctly classified Reserved samples
        n (int): number of Reserved samples
        num_classes (int): number of classes c

    Returns:
        ScoreWithError: utility score

    """
    if not 0 <= correct <= n:
        raise ArgumentError(f"`correct` must lie in [0, {n}], got {correct}")

    score = utility_from_accuracy(correct / n, num_classes, n)
    value = max(num_classes * correct - n, 0) / ((num_classes - 1) * n)
    return ScoreWithError(value=value, stderr=score.stderr, n=n)


def pairwise_accuracy_from_scores(
    defender_scores: Sequence[float],
    reserved_scores: Sequence[float],
) -> float:
    """
    Exact LTU accuracy of a scoring attacker over every (Defender, Reserved) pair

    A pair counts as correct when the Reserved sample scores strictly higher,
    and as half correct on a tie. Larger scores mean "more likely Reserved".

    Args:
        defender_scores (Sequence[float]): scores of Defender samples
        reserved_scores (Sequence[float]): scores of Reserved samples

    Returns:
        float: pairwise accuracy

    """
    pair = exact_pair_stats(defender_scores, reserved_scores)
    return pair.p_r + 0.5 * pair.tie_prob


def binomial_band(p: float, n: int, confidence: float = 0.95) -> Tuple[float, float]:
    """
    Normal-approximation band around a binomial proportion

    Args:
        p (float): expected proportion
        n (int): number of trials
        confidence (float, optional): two-sided confidence level. Defaults to 0.95.

    Returns:
        Tuple[float, float]: (low, high) bounds of the band

    """
    _check_rate("p", p)
    z = stats.norm.ppf(0.5 + confidence / 2.0)
    half = z * math.sqrt(p * (1.0 - p) / n)
    return p - half, p + half


def _seed_word(key: Union[int, str]) -> int:
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ArgumentError(f"seed keys must be non-negative, got {key}")
        return int(key)
    digest = hashlib.sha256(str(key).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def derive_seed(master_seed: int, *keys: Union[int, str]) -> int:
    """
    Derive an independent 32-bit seed from a master seed and a key path

    Streams are derived with `numpy.random.SeedSequence`, so a round seeded with
    `derive_seed(master, i)` is reproducible on its own, in any order.

    Args:
        master_seed (int): non-negative master seed
        keys (Union[int, str]): round indices or stream names

    Returns:
        int: derived seed

    """
    words = [_seed_word(master_seed)] + [_seed_word(key) for key in keys]
    return int(np.random.SeedSequence(words).generate_state(1)[0])


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator, the single generator used across the package"""
    return np.random.default_rng(_seed_word(seed))
