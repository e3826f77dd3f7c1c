"""
Interval patterns over binary sequences.

A sample contains the window [tau, tau + ell) when any of its positions in the
window is 1, so support grows with ell. The engine needs supports that shrink
along the tree; the enumerator therefore hands it the complement supports
(n^i - x^i, n1^i - a^i). The CMH statistic and Psi are unchanged by that
relabelling, and reported statistics are computed on the original counts.

Cover masks are Python ints used as bitsets over samples: one mask per
position, one per category and one per (category, case) pair.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from fastcmh._common import DatasetError, intervals_overlap
from fastcmh.stats_core import PatternSupport, StratifiedCounts
from fastcmh.tarone_engine import MiningResult, TaroneState, mine

logger = logging.getLogger(__name__)


def _bitset(flags: np.ndarray) -> int:
    """Pack a boolean vector into an int whose bit s is flags[s]."""
    packed = np.packbits(np.asarray(flags, dtype=bool), bitorder="little")
    return int.from_bytes(packed.tobytes(), "little")


@dataclass(eq=False)
class Dataset:
    """n binary sequences of length L with class labels and a categorical covariate."""
    bits: np.ndarray
    labels: np.ndarray
    covariate: np.ndarray
    counts: StratifiedCounts = field(init=False)

    def __post_init__(self):
        bits = np.asarray(self.bits)
        labels = np.asarray(self.labels)
        covariate = np.asarray(self.covariate)
        if bits.ndim != 2:
            raise DatasetError(f"sequence matrix must be 2-dimensional, got shape {bits.shape}")
        n = bits.shape[0]
        if labels.shape != (n,) or covariate.shape != (n,):
            raise DatasetError(
                f"dimension mismatch: {n} sequences, {labels.size} labels, {covariate.size} covariates"
            )
        if n == 0 or bits.shape[1] == 0:
            raise DatasetError("dataset needs at least one sample and one position")
        if not np.isin(bits, (0, 1)).all():
            raise DatasetError("sequence matrix must be binary")
        if not np.isin(labels, (0, 1)).all():
            raise DatasetError("labels must be 0 or 1")
        if covariate.min() < 0:
            raise DatasetError("covariate categories must be non-negative")
        K = int(covariate.max()) + 1
        n_per = np.bincount(covariate, minlength=K)
        for i in range(K):
            if n_per[i] == 0:
                raise DatasetError(f"category {i} empty")
        n1_per = np.bincount(covariate, weights=labels, minlength=K).astype(np.int64)

        self.bits = bits.astype(np.uint8, copy=False)
        self.labels = labels.astype(np.uint8, copy=False)
        self.covariate = covariate.astype(np.int64, copy=False)
        self.counts = StratifiedCounts(n=tuple(n_per.tolist()), n1=tuple(n1_per.tolist()))

    @property
    def n(self) -> int:
        return self.bits.shape[0]

    @property
    def L(self) -> int:
        return self.bits.shape[1]

    @property
    def K(self) -> int:
        return self.counts.K

    @cached_property
    def column_masks(self) -> List[int]:
        packed = np.packbits(self.bits.astype(bool), axis=0, bitorder="little")
        return [int.from_bytes(packed[:, j].tobytes(), "little") for j in range(self.L)]

    @cached_property
    def category_masks(self) -> List[int]:
        return [_bitset(self.covariate == i) for i in range(self.K)]

    @cached_property
    def case_masks(self) -> List[int]:
        cases = self.labels == 1
        return [_bitset((self.covariate == i) & cases) for i in range(self.K)]

    def collapsed(self) -> "Dataset":
        """Same sequences and labels with every sample in one category."""
        return Dataset(self.bits, self.labels, np.zeros(self.n, dtype=np.int64))

    def with_labels(self, labels: np.ndarray) -> "Dataset":
        return Dataset(self.bits, labels, self.covariate)

    def with_covariate(self, covariate: np.ndarray) -> "Dataset":
        return Dataset(self.bits, self.labels, covariate)

    def same_as(self, other: "Dataset") -> bool:
        return (
            np.array_equal(self.bits, other.bits)
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.covariate, other.covariate)
        )


def dataset_summary(dataset: Dataset) -> dict:
    """Shape and margins of a dataset."""
    return {
        "n": dataset.n,
        "L": dataset.L,
        "K": dataset.K,
        "n_per_category": list(dataset.counts.n),
        "cases_per_category": list(dataset.counts.n1),
        "one_rate": float(dataset.bits.mean()),
    }


@dataclass(frozen=True, order=True)
class Interval:
    """Positions [tau, tau + ell)."""
    tau: int
    ell: int

    @property
    def end(self) -> int:
        return self.tau + self.ell

    def overlaps(self, other: "Interval") -> bool:
        return intervals_overlap(self.tau, self.ell, other.tau, other.ell)


class CoverState:
    """Samples covered by the current window, with per-category counts."""

    __slots__ = ("cover", "x", "a")

    def __init__(self, cover: int, x: Tuple[int, ...], a: Tuple[int, ...]):
        self.cover = cover
        self.x = x
        self.a = a

    @classmethod
    def empty(cls, dataset: Dataset) -> "CoverState":
        zeros = (0,) * dataset.K
        return cls(0, zeros, zeros)

    def extended(self, dataset: Dataset, position: int) -> "CoverState":
        """Cover after adding one more position to the window."""
        cover = self.cover | dataset.column_masks[position]
        x = tuple((cover & mask).bit_count() for mask in dataset.category_masks)
        a = tuple((cover & mask).bit_count() for mask in dataset.case_masks)
        return CoverState(cover, x, a)


def interval_support(dataset: Dataset, interval: Interval) -> PatternSupport:
    """Supports of an interval computed from scratch."""
    if interval.tau < 0 or interval.ell < 1 or interval.end > dataset.L:
        raise DatasetError(f"interval [{interval.tau}, {interval.end}) outside [0, {dataset.L})")
    present = dataset.bits[:, interval.tau:interval.end].any(axis=1)
    x = np.bincount(dataset.covariate[present], minlength=dataset.K)
    a = np.bincount(dataset.covariate[present & (dataset.labels == 1)], minlength=dataset.K)
    return PatternSupport(tuple(x.tolist()), tuple(a.tolist()))


class IntervalNode:
    """Tree node: engine-facing complement supports plus the cover state."""

    __slots__ = ("pattern", "support", "state")

    def __init__(self, pattern: Interval, state: CoverState, counts: StratifiedCounts):
        self.pattern = pattern
        self.state = state
        self.support = tuple(ni - xi for ni, xi in zip(counts.n, state.x))


class IntervalEnumerator:
    """One chain per start position: (tau, 1) -> (tau, 2) -> ..."""

    def __init__(self, dataset: Dataset, max_ell: Optional[int] = None):
        if max_ell is not None and max_ell < 1:
            raise ValueError(f"max_ell must be positive, got {max_ell}")
        self.dataset = dataset
        self.counts = dataset.counts
        self.max_ell = max_ell
        self._empty = CoverState.empty(dataset)

    def _limit(self, tau: int) -> int:
        room = self.dataset.L - tau
        return room if self.max_ell is None else min(room, self.max_ell)

    def _node(self, tau: int, ell: int, previous: CoverState) -> IntervalNode:
        state = previous.extended(self.dataset, tau + ell - 1)
        return IntervalNode(Interval(tau, ell), state, self.counts)

    def roots(self) -> Iterator[IntervalNode]:
        for tau in range(self.dataset.L):
            yield self._node(tau, 1, self._empty)

    def children(self, node: IntervalNode) -> Iterator[IntervalNode]:
        tau, ell = node.pattern.tau, node.pattern.ell
        if ell < self._limit(tau):
            yield self._node(tau, ell + 1, node.state)

    def report_support(self, node: IntervalNode) -> PatternSupport:
        return PatternSupport(node.state.x, node.state.a)


def enumerate_intervals(
    dataset: Dataset,
    state: TaroneState,
    max_ell: Optional[int] = None,
    t_prune: str = "fast",
    pruning: bool = True,
    record_visits: bool = False,
) -> MiningResult:
    """Threshold pass of the Tarone engine over all intervals of the dataset."""
    enumerator = IntervalEnumerator(dataset, max_ell)
    return mine(enumerator, state, t_prune=t_prune, pruning=pruning, record_visits=record_visits)


def filter_overlaps(significant: Sequence) -> list:
    """Greedy clustering: keep the best hit, drop everything overlapping it, repeat.

    Expects items sorted by p-value; each item exposes .pattern (an Interval).
    """
    kept = []
    for item in significant:
        if not any(item.pattern.overlaps(other.pattern) for other in kept):
            kept.append(item)
    return kept
