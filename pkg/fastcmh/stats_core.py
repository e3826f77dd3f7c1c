"""
Scalar statistical kernels for stratified 2x2 tables.

The Cochran-Mantel-Haenszel (CMH) statistic, the chi-squared (1 dof) survival
function, attainable cell-count bounds and the minimum attainable p-value of a
pattern given its per-category supports.

All functions are pure; they take a precomputed StratifiedCounts so the inner
loops never divide by n^i more than once per dataset.
"""

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

from fastcmh._common import P_VALUE_FLOOR, DatasetError


@dataclass(frozen=True)
class StratifiedCounts:
    """Per-category margins (n^i, n1^i) of the experiment design."""
    n: Tuple[int, ...]
    n1: Tuple[int, ...]
    gamma: Tuple[float, ...] = field(init=False)
    # gamma^i (1 - gamma^i), the variance coefficient of each category
    var_coef: Tuple[float, ...] = field(init=False)
    # min(n1^i, n^i - n1^i): edge of the region where a_min = 0 and a_max = x
    cap: Tuple[int, ...] = field(init=False)

    def __post_init__(self):
        n = tuple(int(v) for v in self.n)
        n1 = tuple(int(v) for v in self.n1)
        if not n or len(n) != len(n1):
            raise DatasetError(f"need K >= 1 categories with matching margins, got {len(n)} and {len(n1)}")
        for i, (ni, n1i) in enumerate(zip(n, n1)):
            if ni < 1:
                raise DatasetError(f"category {i} empty")
            if not 0 <= n1i <= ni:
                raise DatasetError(f"category {i}: case count {n1i} outside [0, {ni}]")
        gamma = tuple(n1i / ni for ni, n1i in zip(n, n1))
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "n1", n1)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "var_coef", tuple(g * (1.0 - g) for g in gamma))
        object.__setattr__(self, "cap", tuple(min(n1i, ni - n1i) for ni, n1i in zip(n, n1)))

    @property
    def K(self) -> int:
        return len(self.n)

    @property
    def total(self) -> int:
        return sum(self.n)

    @property
    def total_cases(self) -> int:
        return sum(self.n1)

    def collapsed(self) -> "StratifiedCounts":
        """Single-category design with the same totals."""
        return StratifiedCounts(n=(self.total,), n1=(self.total_cases,))


@dataclass(frozen=True)
class PatternSupport:
    """Per-category supports x^i and, optionally, case supports a^i."""
    x: Tuple[int, ...]
    a: Optional[Tuple[int, ...]] = None

    def complement(self, counts: StratifiedCounts) -> "PatternSupport":
        """Swap presence and absence: x -> n - x, a -> n1 - a."""
        w = tuple(ni - xi for ni, xi in zip(counts.n, self.x))
        if self.a is None:
            return PatternSupport(w)
        return PatternSupport(w, tuple(n1i - ai for n1i, ai in zip(counts.n1, self.a)))


# === CELL BOUNDS ===

def amin_amax(x: int, n1: int, n: int) -> Tuple[int, int]:
    """Range of the case cell of a 2x2 table with margins (x, n1, n)."""
    return max(0, x - (n - n1)), min(x, n1)


# === CMH ===

def cmh_variance(counts: StratifiedCounts, x: Sequence[int]) -> float:
    """Denominator of the CMH statistic."""
    total = 0.0
    for xi, ni, vi in zip(x, counts.n, counts.var_coef):
        total += vi * xi * (1.0 - xi / ni)
    return total


def cmh_statistic(counts: StratifiedCounts, support: PatternSupport) -> float:
    """CMH statistic; 0 when every stratum is degenerate."""
    den = cmh_variance(counts, support.x)
    if den <= 0.0:
        return 0.0
    num = 0.0
    for ai, xi, gi in zip(support.a, support.x, counts.gamma):
        num += ai - gi * xi
    return num * num / den


def max_cmh_statistic(counts: StratifiedCounts, x: Sequence[int]) -> float:
    """Largest CMH statistic attainable with supports x.

    The statistic is a convex quadratic in the total case count, so the
    maximum sits at one of the two extremes: every a^i at its lower bound or
    every a^i at its upper bound.
    """
    den = cmh_variance(counts, x)
    if den <= 0.0:
        return 0.0
    low = 0.0
    high = 0.0
    for xi, ni, n1i, gi in zip(x, counts.n, counts.n1, counts.gamma):
        expected = gi * xi
        low += max(0, xi - (ni - n1i)) - expected
        high += min(xi, n1i) - expected
    return max(low * low, high * high) / den


# === CHI-SQUARED (1 DOF) ===

def chi2_sf(t: float) -> float:
    """Upper tail of chi-squared with one degree of freedom.

    P(X >= t) = erfc(sqrt(t / 2)); saturates at the smallest normal double so
    log10 of the result is always finite.
    """
    if t <= 0.0:
        return 1.0
    return max(math.erfc(math.sqrt(0.5 * t)), P_VALUE_FLOOR)


def cmh_pvalue(counts: StratifiedCounts, support: PatternSupport) -> float:
    return chi2_sf(cmh_statistic(counts, support))


def min_attainable_pvalue(counts: StratifiedCounts, x: Sequence[int]) -> float:
    """Psi: the smallest p-value any table with supports x could produce."""
    return chi2_sf(max_cmh_statistic(counts, x))
