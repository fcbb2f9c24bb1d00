import csv
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ltuscore.utils.errors import ArgumentError, ParseError, ProtocolError, SchemaError
from ltuscore.utils.utils import make_rng

logger = logging.getLogger(__name__)


class MembershipLabel(str, Enum):
    DEFENDER = "Defender"
    RESERVED = "Reserved"


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Sample:
    """
    One labeled example

    Args:
        features (np.ndarray): feature vector of dimension k
        label (int): class index

    """

    features: np.ndarray
    label: int

    def __post_init__(self):
        object.__setattr__(self, "features", _frozen(np.asarray(self.features, dtype=np.float64).ravel()))
        object.__setattr__(self, "label", int(self.label))

    def key(self) -> bytes:
        return self.features.tobytes() + int(self.label).to_bytes(8, "little", signed=True)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Sample):
            return NotImplemented
        return self.label == other.label and np.array_equal(self.features, other.features)

    def __hash__(self) -> int:
        return hash(self.key())


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """
    Ordered, immutable set of labeled examples

    Args:
        features (np.ndarray): (n, k) feature matrix
        labels (np.ndarray): (n,) integer class labels
        num_classes (int): number of classes c, every label must be below it

    """

    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels)

        if features.ndim != 2:
            raise ArgumentError(f"`features` must be a 2-d matrix, got shape {features.shape}")
        if labels.shape != (features.shape[0],):
            raise ArgumentError(f"`labels` must have shape ({features.shape[0]},), got {labels.shape}")
        if not np.all(np.isfinite(features)):
            raise ArgumentError("`features` must be finite")
        if labels.dtype.kind == "f" and not np.all(labels == np.round(labels)):
            raise ArgumentError("`labels` must be integral")
        labels = labels.astype(np.int64)
        if self.num_classes < 2:
            raise ArgumentError(f"`num_classes` must be at least 2, got {self.num_classes}")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise ArgumentError(f"every label must lie in [0, {self.num_classes - 1}]")

        object.__setattr__(self, "features", _frozen(features))
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "num_classes", int(self.num_classes))

    @classmethod
    def from_samples(cls, samples: Sequence[Sample], num_classes: int) -> "LabeledDataset":
        if not samples:
            raise ArgumentError("a dataset must not be empty")
        dims = {sample.features.shape[0] for sample in samples}
        if len(dims) != 1:
            raise ArgumentError(f"all samples must share one dimension, got {sorted(dims)}")
        return cls(
            np.stack([sample.features for sample in samples]),
            np.array([sample.label for sample in samples]),
            num_classes,
        )

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def samples(self) -> List[Sample]:
        return list(self)

    def __len__(self) -> int:
        return self.features.shape[0]

    def __getitem__(self, index: int) -> Sample:
        return Sample(self.features[index], self.labels[index])

    def __iter__(self) -> Iterator[Sample]:
        for index in range(len(self)):
            yield self[index]

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return (
            self.num_classes == other.num_classes
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )

    def keys(self) -> List[bytes]:
        return [sample.key() for sample in self]

    def subset(self, indices: Sequence[int]) -> "LabeledDataset":
        indices = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(self.features[indices], self.labels[indices], self.num_classes)

    def without(self, index: int) -> "LabeledDataset":
        """Copy of the dataset with the sample at `index` removed (order kept)"""
        return LabeledDataset(
            np.delete(self.features, index, axis=0),
            np.delete(self.labels, index),
            self.num_classes,
        )

    def with_sample(self, sample: Sample, position: Optional[int] = None) -> "LabeledDataset":
        """Copy of the dataset with `sample` inserted at `position` (appended by default)"""
        if sample.features.shape[0] != self.dim:
            raise ArgumentError(f"sample dimension {sample.features.shape[0]} does not match {self.dim}")
        position = len(self) if position is None else position
        return LabeledDataset(
            np.insert(self.features, position, sample.features, axis=0),
            np.insert(self.labels, position, sample.label),
            self.num_classes,
        )

    def permuted(self, rng: np.random.Generator) -> "LabeledDataset":
        return self.subset(rng.permutation(len(self)))

    def with_labels(self, labels: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(self.features, labels, self.num_classes)


@dataclass(frozen=True, eq=False)
class LtuRound:
    """
    One Leave-Two-Unlabeled round

    Attackers see the attack data, the unlabeled pair and `held_out_index`;
    `truth` is kept for the evaluator only.

    Args:
        attack_defender (LabeledDataset): Defender data minus d
        attack_reserved (LabeledDataset): Reserved data minus r
        unlabeled (Tuple[Sample, Sample]): (u1, u2) in random order
        truth (int): index in `unlabeled` of the Defender member
        round_seed (int): seed the round was drawn with
        held_out_index (int): position d occupied in the Defender data
        reserved_index (int): position r occupied in the Reserved data

    """

    attack_defender: LabeledDataset
    attack_reserved: LabeledDataset
    unlabeled: Tuple[Sample, Sample]
    truth: int = field(repr=False)
    round_seed: int
    held_out_index: int
    reserved_index: int

    @property
    def defender_sample(self) -> Sample:
        return self.unlabeled[self.truth]

    @property
    def reserved_sample(self) -> Sample:
        return self.unlabeled[1 - self.truth]


def generate_blobs(
    num_classes: int,
    dim: int,
    per_class: int,
    class_separation: float,
    noise_scale: float,
    seed: int,
) -> LabeledDataset:
    """
    Generate isotropic Gaussian blobs, one per class

    Class centers are drawn from a standard normal and rescaled so that the
    closest pair of centers sits exactly `class_separation` apart.

    Args:
        num_classes (int): number of classes c (>= 2)
        dim (int): feature dimension k (>= 1)
        per_class (int): samples per class (>= 1)
        class_separation (float): minimum distance between two class centers
        noise_scale (float): standard deviation of the isotropic noise (> 0)
        seed (int): generator seed

    Returns:
        LabeledDataset: samples grouped by class, class 0 first

    """
    if num_classes < 2:
        raise ArgumentError(f"`num_classes` must be at least 2, got {num_classes}")
    if dim < 1:
        raise ArgumentError(f"`dim` must be at least 1, got {dim}")
    if per_class < 1:
        raise ArgumentError(f"`per_class` must be at least 1, got {per_class}")
    if not noise_scale > 0:
        raise ArgumentError(f"`noise_scale` must be positive, got {noise_scale}")
    if class_separation < 0:
        raise ArgumentError(f"`class_separation` must be non-negative, got {class_separation}")

    rng = make_rng(seed)
    centers = rng.standard_normal((num_classes, dim))
    gaps = [
        np.linalg.norm(centers[i] - centers[j])
        for i in range(num_classes)
        for j in range(i + 1, num_classes)
    ]
    centers *= class_separation / max(min(gaps), 1e-12)

    features = np.concatenate([
        center + noise_scale * rng.standard_normal((per_class, dim)) for center in centers
    ])
    labels = np.repeat(np.arange(num_classes), per_class)
    return LabeledDataset(features, labels, num_classes)


def nearest_count(fraction: float, n: int) -> int:
    """Nearest integer to fraction * n with halves rounded up (2.5 gives 3, unlike `round`)"""
    return int(math.floor(fraction * n + 0.5))


def split_source(
    source: LabeledDataset,
    defender_fraction: float,
    seed: int,
) -> Tuple[LabeledDataset, LabeledDataset]:
    """
    Shuffle the source data and split it into disjoint Defender and Reserved sets

    D_D receives `nearest_count(defender_fraction, len(source))` samples, halves rounding up.

    Args:
        source (LabeledDataset): source data D_S
        defender_fraction (float): fraction of D_S going to D_D, in (0, 1)
        seed (int): shuffle seed

    Returns:
        Tuple[LabeledDataset, LabeledDataset]: (D_D, D_R)

    """
    if not 0.0 < defender_fraction < 1.0:
        raise ArgumentError(f"`defender_fraction` must lie in (0, 1), got {defender_fraction}")

    n_defender = nearest_count(defender_fraction, len(source))
    if n_defender == 0 or n_defender == len(source):
        raise ArgumentError(
            f"splitting {len(source)} samples with fraction {defender_fraction} leaves an empty part"
        )

    order = make_rng(seed).permutation(len(source))
    return source.subset(order[:n_defender]), source.subset(order[n_defender:])


def flip_labels(ds: LabeledDataset, fraction: float, seed: int) -> LabeledDataset:
    """
    Change the labels of `nearest_count(fraction, n)` samples to another class chosen at random,
    halves rounding up

    Args:
        ds (LabeledDataset): dataset to corrupt
        fraction (float): fraction of samples to relabel, in [0, 1]
        seed (int): generator seed

    Returns:
        LabeledDataset: corrupted copy

    """
    if not 0.0 <= fraction <= 1.0:
        raise ArgumentError(f"`fraction` must lie in [0, 1], got {fraction}")

    rng = make_rng(seed)
    n_flip = nearest_count(fraction, len(ds))
    chosen = rng.choice(len(ds), size=n_flip, replace=False)

    labels = ds.labels.copy()
    # shifting by 1..c-1 modulo c picks uniformly among the other classes
    shifts = rng.integers(1, ds.num_classes, size=n_flip)
    labels[chosen] = (labels[chosen] + shifts) % ds.num_classes
    return ds.with_labels(labels)


def save_csv(ds: LabeledDataset, path: Union[str, Path]):
    """
    Write a dataset as CSV with header `f0,...,f{k-1},label`

    Args:
        ds (LabeledDataset): dataset to save
        path (Union[str, Path]): output file

    """
    with open(path, "w", newline="", encoding="utf-8") as fp:
        writer = csv.writer(fp)
        writer.writerow([f"f{i}" for i in range(ds.dim)] + ["label"])
        for features, label in zip(ds.features, ds.labels):
            writer.writerow([repr(float(value)) for value in features] + [int(label)])


def load_csv(path: Union[str, Path], num_classes: Optional[int] = None) -> LabeledDataset:
    """
    Read a dataset written by `save_csv`

    The file stores labels only, so without `num_classes` the class count is inferred as
    max label + 1. A dataset whose highest class has no sample loads back with fewer classes
    and compares unequal to the saved one; pass `num_classes` to restore it exactly.

    Args:
        path (Union[str, Path]): CSV file
        num_classes (int, optional): number of classes. Defaults to max label + 1 (at least 2).

    Returns:
        LabeledDataset: parsed dataset

    """
    with open(path, "r", newline="", encoding="utf-8") as fp:
        rows = list(csv.reader(fp))

    if not rows:
        raise SchemaError("missing header row", line=1)

    header = [name.strip() for name in rows[0]]
    dim = len(header) - 1
    expected = [f"f{i}" for i in range(dim)] + ["label"]
    if dim < 1 or header != expected:
        raise SchemaError(f"header must be `{','.join(expected) if dim >= 1 else 'f0,...,label'}`", line=1)

    features, labels = list(), list()
    for line, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != dim + 1:
            raise SchemaError(f"expected {dim + 1} fields, got {len(row)}", line=line)
        try:
            features.append([float(value) for value in row[:-1]])
        except ValueError as error:
            raise ParseError(f"non-numeric feature ({error})", line=line) from error
        try:
            labels.append(int(row[-1].strip()))
        except ValueError as error:
            raise ParseError(f"label `{row[-1]}` is not an integer", line=line) from error

    if not labels:
        raise SchemaError("no data rows", line=2)

    if num_classes is None:
        num_classes = max(max(labels) + 1, 2)

    logger.debug("Loaded %d samples of dimension %d from %s", len(labels), dim, path)
    return LabeledDataset(np.array(features), np.array(labels), num_classes)


def check_disjoint(defender: LabeledDataset, reserved: LabeledDataset):
    """Raise `ProtocolError` when a sample appears in both sets"""
    overlap = set(defender.keys()).intersection(reserved.keys())
    if overlap:
        raise ProtocolError(f"Defender and Reserved data share {len(overlap)} sample(s)")


def make_ltu_round(
    defender: LabeledDataset,
    reserved: LabeledDataset,
    round_seed: int,
    defender_index: Optional[int] = None,
    reserved_index: Optional[int] = None,
    check: bool = True,
) -> LtuRound:
    """
    Draw one LTU round: hide the membership of one Defender and one Reserved sample

    Args:
        defender (LabeledDataset): Defender data D_D
        reserved (LabeledDataset): Reserved data D_R
        round_seed (int): seed of the round
        defender_index (int, optional): pin d to this index (individual scores). Defaults to None.
        reserved_index (int, optional): pin r to this index. Defaults to None.
        check (bool, optional): verify that the two sets are disjoint. Defaults to True.

    Returns:
        LtuRound: the round

    """
    if check:
        check_disjoint(defender, reserved)

    rng = make_rng(round_seed)
    d_index = int(rng.integers(len(defender)))
    r_index = int(rng.integers(len(reserved)))
    swap = bool(rng.integers(2))

    if defender_index is not None:
        d_index = defender_index
    if reserved_index is not None:
        r_index = reserved_index

    d, r = defender[d_index], reserved[r_index]
    unlabeled = (r, d) if swap else (d, r)

    return LtuRound(
        attack_defender=defender.without(d_index),
        attack_reserved=reserved.without(r_index),
        unlabeled=unlabeled,
        truth=1 if swap else 0,
        round_seed=round_seed,
        held_out_index=d_index,
        reserved_index=r_index,
    )
