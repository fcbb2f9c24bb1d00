"""
Exact, sampling-free computations over every (Defender, Reserved) pair and over
finite joint loss distributions, used as ground truth for the attackers.
"""
import math
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np

from ltuscore.utils.errors import ArgumentError, BoundViolationError

_TOLERANCE = 1e-12


@dataclass(frozen=True)
class PairStats:
    """
    Probabilities over a uniformly drawn cross pair (d, r)

    Args:
        p_r (float): Pr[f(r) > f(d)], f favors Reserved data
        p_d (float): Pr[f(r) < f(d)]
        tie_prob (float): Pr[f(r) = f(d)]

    """

    p_r: float
    p_d: float
    tie_prob: float

    def __post_init__(self):
        for name in ("p_r", "p_d", "tie_prob"):
            value = getattr(self, name)
            if not -_TOLERANCE <= value <= 1.0 + _TOLERANCE:
                raise ArgumentError(f"`{name}` must lie in [0, 1], got {value}")
        if abs(self.p_r + self.p_d + self.tie_prob - 1.0) > _TOLERANCE:
            raise ArgumentError("`p_r + p_d + tie_prob` must equal 1")

    def to_dict(self) -> Dict:
        return {"p_r": self.p_r, "p_d": self.p_d, "tie_prob": self.tie_prob}


def _values(name: str, values: Sequence[float]) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise ArgumentError(f"`{name}` must not be empty")
    return values


def _pair_counts(f_defender: np.ndarray, f_reserved: np.ndarray) -> Tuple[int, int, int]:
    """(#f(r) > f(d), #f(r) < f(d), #ties) over all pairs, in O(n log n)"""
    reserved = np.sort(f_reserved)
    left = np.searchsorted(reserved, f_defender, side="left")
    right = np.searchsorted(reserved, f_defender, side="right")
    greater = int((len(reserved) - right).sum())
    less = int(left.sum())
    ties = int((right - left).sum())
    return greater, less, ties


def exact_pair_stats(f_defender: Sequence[float], f_reserved: Sequence[float]) -> PairStats:
    """
    Enumerate every (d, r) pair and count which side the discriminant favors

    Args:
        f_defender (Sequence[float]): f over the Defender data
        f_reserved (Sequence[float]): f over the Reserved data

    Returns:
        PairStats: exact pair probabilities

    """
    f_defender, f_reserved = _values("f_defender", f_defender), _values("f_reserved", f_reserved)
    greater, less, ties = _pair_counts(f_defender, f_reserved)
    total = len(f_defender) * len(f_reserved)
    return PairStats(p_r=greater / total, p_d=less / total, tie_prob=ties / total)


def theorem1_accuracy(stats: PairStats) -> float:
    """Accuracy of the smaller-f-is-Defender rule with coin-flip ties: p_R + (1 - p_R - p_D) / 2"""
    return 0.5 + 0.5 * (stats.p_r - stats.p_d)


def _bounded(name: str, values: Sequence[float]) -> np.ndarray:
    values = _values(name, values)
    if values.min() < 0.0 or values.max() > 1.0:
        raise BoundViolationError(f"`{name}` must lie in [0, 1]")
    return values


def exact_expected_losses(
    loss_defender: Sequence[float],
    loss_reserved: Sequence[float],
) -> Tuple[float, float]:
    """
    Exact mean bounded loss on each side

    Args:
        loss_defender (Sequence[float]): losses in [0, 1] over the Defender data
        loss_reserved (Sequence[float]): losses in [0, 1] over the Reserved data

    Returns:
        Tuple[float, float]: (e_D, e_R)

    """
    loss_defender, loss_reserved = _bounded("loss_defender", loss_defender), _bounded("loss_reserved", loss_reserved)
    e_d = math.fsum(loss_defender) / len(loss_defender)
    e_r = math.fsum(loss_reserved) / len(loss_reserved)
    return e_d, e_r


def theorem2_accuracy(e_d: float, e_r: float) -> float:
    """Expected accuracy of the randomized bounded-loss rule: 1/2 + (e_R - e_D) / 2"""
    for name, value in (("e_d", e_d), ("e_r", e_r)):
        if not 0.0 <= value <= 1.0:
            raise BoundViolationError(f"`{name}` must lie in [0, 1], got {value}")
    return 0.5 + (e_r - e_d) / 2.0


@dataclass(frozen=True)
class JointPmf:
    """
    Joint probability mass function of (loss(d), loss(r))

    Args:
        defender_support (np.ndarray): values of loss(d), one per row
        reserved_support (np.ndarray): values of loss(r), one per column
        matrix (np.ndarray): probabilities, rows indexed by loss(d), columns by loss(r)

    """

    defender_support: np.ndarray
    reserved_support: np.ndarray
    matrix: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.defender_support, dtype=np.float64).ravel()
        r = np.asarray(self.reserved_support, dtype=np.float64).ravel()
        m = np.asarray(self.matrix, dtype=np.float64)

        if m.shape != (len(d), len(r)) or m.size == 0:
            raise ArgumentError(f"`matrix` must have shape ({len(d)}, {len(r)}), got {m.shape}")
        if np.any(m < 0):
            raise ArgumentError("`matrix` entries must be non-negative")
        if abs(math.fsum(m.ravel()) - 1.0) > _TOLERANCE:
            raise ArgumentError(f"`matrix` must sum to 1, got {math.fsum(m.ravel())}")

        object.__setattr__(self, "defender_support", d)
        object.__setattr__(self, "reserved_support", r)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def product(
        cls,
        defender_support: Sequence[float],
        defender_mass: Sequence[float],
        reserved_support: Sequence[float],
        reserved_mass: Sequence[float],
    ) -> "JointPmf":
        """Joint pmf of independent loss(d) and loss(r)"""
        return cls(defender_support, reserved_support, np.outer(defender_mass, reserved_mass))

    @property
    def defender_marginal(self) -> np.ndarray:
        return np.array([math.fsum(row) for row in self.matrix])

    @property
    def reserved_marginal(self) -> np.ndarray:
        return np.array([math.fsum(column) for column in self.matrix.T])


def joint_pmf_stats(pmf: JointPmf) -> Tuple[float, float]:
    """
    Generalization gap and pairwise margin of a joint loss distribution

    Args:
        pmf (JointPmf): joint pmf of (loss(d), loss(r))

    Returns:
        Tuple[float, float]: (e_R - e_D, Pr[loss(r) > loss(d)] - Pr[loss(r) < loss(d)])

    """
    e_d = math.fsum(pmf.defender_marginal * pmf.defender_support)
    e_r = math.fsum(pmf.reserved_marginal * pmf.reserved_support)

    d = pmf.defender_support[:, None]
    r = pmf.reserved_support[None, :]
    p_r = math.fsum(pmf.matrix[r > d])
    p_d = math.fsum(pmf.matrix[r < d])
    return e_r - e_d, p_r - p_d


def zero_one_equality_check(
    loss01_defender: Sequence[float],
    loss01_reserved: Sequence[float],
) -> Tuple[float, float]:
    """
    Compute p_R - p_D and e_R - e_D independently for 0-1 losses, which must agree

    Args:
        loss01_defender (Sequence[float]): 0-1 losses over the Defender data
        loss01_reserved (Sequence[float]): 0-1 losses over the Reserved data

    Returns:
        Tuple[float, float]: (p_R - p_D, e_R - e_D)

    """
    loss01_defender = _values("loss01_defender", loss01_defender)
    loss01_reserved = _values("loss01_reserved", loss01_reserved)
    for name, values in (("loss01_defender", loss01_defender), ("loss01_reserved", loss01_reserved)):
        if not np.all((values == 0.0) | (values == 1.0)):
            raise ArgumentError(f"`{name}` must only contain 0 and 1")

    stats = exact_pair_stats(loss01_defender, loss01_reserved)
    e_d, e_r = exact_expected_losses(loss01_defender, loss01_reserved)
    return stats.p_r - stats.p_d, e_r - e_d


def threshold_metrics(
    f_defender: Sequence[float],
    f_reserved: Sequence[float],
    threshold: float = 0.5,
) -> Dict[str, float]:
    """
    Per-sample membership metrics of "f > threshold means Reserved"

    Args:
        f_defender (Sequence[float]): f over the Defender data
        f_reserved (Sequence[float]): f over the Reserved data
        threshold (float, optional): decision threshold. Defaults to 0.5.

    Returns:
        Dict[str, float]: accuracy, false positive rate (Reserved called Defender)
            and false negative rate (Defender called Reserved)

    """
    f_defender, f_reserved = _values("f_defender", f_defender), _values("f_reserved", f_reserved)
    false_negatives = int((f_defender > threshold).sum())
    false_positives = int((f_reserved <= threshold).sum())
    total = len(f_defender) + len(f_reserved)
    return {
        "accuracy": (total - false_negatives - false_positives) / total,
        "false_positive_rate": false_positives / len(f_reserved),
        "false_negative_rate": false_negatives / len(f_defender),
    }


def individual_pair_accuracies(
    f_defender: Sequence[float],
    f_reserved: Sequence[float],
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Exact pairwise accuracy of each sample against every sample of the other set

    Args:
        f_defender (Sequence[float]): f over the Defender data
        f_reserved (Sequence[float]): f over the Reserved data

    Returns:
        Tuple[np.ndarray, np.ndarray]: accuracies of each Defender sample and of each Reserved sample

    """
    f_defender, f_reserved = _values("f_defender", f_defender), _values("f_reserved", f_reserved)

    sorted_reserved = np.sort(f_reserved)
    left = np.searchsorted(sorted_reserved, f_defender, side="left")
    right = np.searchsorted(sorted_reserved, f_defender, side="right")
    defender = ((len(f_reserved) - right) + 0.5 * (right - left)) / len(f_reserved)

    sorted_defender = np.sort(f_defender)
    left = np.searchsorted(sorted_defender, f_reserved, side="left")
    right = np.searchsorted(sorted_defender, f_reserved, side="right")
    reserved = (left + 0.5 * (right - left)) / len(f_defender)

    return defender, reserved
