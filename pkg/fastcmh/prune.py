"""
Pruning bound for the CMH search.

T_prune(x) is the largest CMH statistic any descendant of a pattern with
supports x could reach, i.e. the maximum of max_cmh_statistic(z) over the box
0 <= z^i <= x^i. Inside the region x^i <= min(n1^i, n^i - n1^i) the maximum sits
on a vertex of the box and, per branch, on a prefix of the categories sorted by
a per-category key, which gives an exact O(K log K) evaluation.

The two brute-force evaluators are kept as oracles and as the naive baseline.
"""

import itertools
import math
from typing import Callable, List, Sequence

from fastcmh._common import (
    GRID_SIZE_GUARD,
    MAX_GRID_K,
    MAX_VERTEX_K,
    SearchSpaceTooLargeError,
)
from fastcmh.stats_core import StratifiedCounts, chi2_sf, max_cmh_statistic


class PruneWorkspace:
    """Reusable per-search buffers for eval_t_prune.

    One workspace per traversal; concurrent evaluations need distinct
    workspaces.
    """

    def __init__(self, K: int):
        self.K = K
        self.beta_l: List[float] = [0.0] * K
        self.beta_r: List[float] = [0.0] * K
        self.num_l: List[float] = [0.0] * K
        self.num_r: List[float] = [0.0] * K
        self.var: List[float] = [0.0] * K
        self.idx_l: List[int] = list(range(K))
        self.idx_r: List[int] = list(range(K))

    def load(self, counts: StratifiedCounts, x: Sequence[int]) -> None:
        if counts.K != self.K:
            self.__init__(counts.K)
        for i in range(counts.K):
            xi = x[i]
            gi = counts.gamma[i]
            free = 1.0 - xi / counts.n[i]
            self.beta_l[i] = (1.0 - gi) * free
            self.beta_r[i] = gi * free
            self.num_l[i] = gi * xi
            self.num_r[i] = (1.0 - gi) * xi
            self.var[i] = counts.var_coef[i] * xi * free
            # reset so the stable sort breaks ties by category index
            self.idx_l[i] = i
            self.idx_r[i] = i


def _best_prefix(idx: List[int], keys: List[float], num: List[float], var: List[float]) -> float:
    idx.sort(key=keys.__getitem__)
    best = 0.0
    num_sum = 0.0
    var_sum = 0.0
    for i in idx:
        num_sum += num[i]
        var_sum += var[i]
        if var_sum > 0.0:
            value = num_sum * num_sum / var_sum
            if value > best:
                best = value
    return best


def eval_t_prune(counts: StratifiedCounts, x: Sequence[int], workspace: PruneWorkspace = None) -> float:
    """Exact T_prune for x inside the region x^i <= min(n1^i, n^i - n1^i).

    Left branch (every a at its lower bound, which is 0 in the region) keeps the
    categories with the smallest (1 - gamma)(1 - x/n); right branch (a at its
    upper bound x) keeps those with the smallest gamma (1 - x/n).
    """
    ws = workspace if workspace is not None else PruneWorkspace(counts.K)
    ws.load(counts, x)
    left = _best_prefix(ws.idx_l, ws.beta_l, ws.num_l, ws.var)
    right = _best_prefix(ws.idx_r, ws.beta_r, ws.num_r, ws.var)
    return max(left, right)


def t_prune_bruteforce_vertices(counts: StratifiedCounts, x: Sequence[int]) -> float:
    """Max of the attainable CMH statistic over all 2^K vertices z^i in {0, x^i}."""
    if counts.K > MAX_VERTEX_K:
        raise SearchSpaceTooLargeError(f"vertex enumeration limited to K <= {MAX_VERTEX_K}, got K={counts.K}")
    best = 0.0
    for z in itertools.product(*((0, xi) for xi in x)):
        value = max_cmh_statistic(counts, z)
        if value > best:
            best = value
    return best


def t_prune_bruteforce_grid(counts: StratifiedCounts, x: Sequence[int]) -> float:
    """Max of the attainable CMH statistic over the whole integer box."""
    size = math.prod(xi + 1 for xi in x)
    if counts.K > MAX_GRID_K or size > GRID_SIZE_GUARD:
        raise SearchSpaceTooLargeError(
            f"grid enumeration limited to K <= {MAX_GRID_K} and {GRID_SIZE_GUARD} points, "
            f"got K={counts.K} with {size} points"
        )
    best = 0.0
    for z in itertools.product(*(range(xi + 1) for xi in x)):
        value = max_cmh_statistic(counts, z)
        if value > best:
            best = value
    return best


class PruneChecker:
    """is_not_prunable bound to one T_prune evaluator, with work counters."""

    def __init__(self, counts: StratifiedCounts, evaluator: str = "fast"):
        if evaluator not in ("fast", "vertices"):
            raise ValueError(f"unknown T_prune evaluator: {evaluator}")
        if evaluator == "vertices" and counts.K > MAX_VERTEX_K:
            raise SearchSpaceTooLargeError(f"vertex enumeration limited to K <= {MAX_VERTEX_K}, got K={counts.K}")
        self.counts = counts
        self.evaluator = evaluator
        self.workspace = PruneWorkspace(counts.K)
        self.evaluations = 0
        self.vertex_evaluations = 0

    def t_prune(self, x: Sequence[int]) -> float:
        self.evaluations += 1
        if self.evaluator == "vertices":
            self.vertex_evaluations += 1 << self.counts.K
            return t_prune_bruteforce_vertices(self.counts, x)
        return eval_t_prune(self.counts, x, self.workspace)

    def __call__(self, x: Sequence[int], delta: float) -> bool:
        return is_not_prunable(self.counts, x, delta, lambda counts, z: self.t_prune(z))


def is_not_prunable(
    counts: StratifiedCounts,
    x: Sequence[int],
    delta: float,
    t_prune: Callable[[StratifiedCounts, Sequence[int]], float] = eval_t_prune,
) -> bool:
    """True when some descendant of a pattern with supports x may be testable at delta."""
    for xi, ci in zip(x, counts.cap):
        if xi > ci:
            return True
    return chi2_sf(t_prune(counts, x)) <= delta
