"""Tests for the statistical kernels."""

import itertools
import math
import sys

import numpy as np
import pytest
from scipy import stats

from conftest import random_counts
from fastcmh._common import DatasetError
from fastcmh.stats_core import (
    PatternSupport,
    StratifiedCounts,
    amin_amax,
    chi2_sf,
    cmh_pvalue,
    cmh_statistic,
    max_cmh_statistic,
    min_attainable_pvalue,
)


def exhaustive_max_statistic(counts, x):
    """Largest CMH statistic over every attainable a-vector."""
    ranges = [range(lo, hi + 1) for lo, hi in (amin_amax(xi, n1i, ni) for xi, n1i, ni in zip(x, counts.n1, counts.n))]
    return max(cmh_statistic(counts, PatternSupport(tuple(x), a)) for a in itertools.product(*ranges))


def random_support(rng, counts):
    return tuple(int(rng.integers(0, ni + 1)) for ni in counts.n)


class TestStratifiedCounts:
    """Tests for the design margins."""

    def test_derived_fields(self, counts_factory):
        """Should precompute gamma, the variance coefficient and the region cap."""
        counts = counts_factory((4, 10), (2, 7))
        assert counts.K == 2
        assert counts.gamma == (0.5, 0.7)
        assert counts.var_coef[0] == 0.25
        assert counts.cap == (2, 3)
        assert counts.total == 14
        assert counts.total_cases == 9

    def test_gamma_times_n_is_n1(self, rng):
        """Should satisfy gamma^i * n^i = n1^i."""
        for _ in range(100):
            counts = random_counts(rng, 3, 30)
            for g, ni, n1i in zip(counts.gamma, counts.n, counts.n1):
                assert round(g * ni) == n1i

    def test_rejects_empty_category(self, counts_factory):
        """Should reject a category without samples."""
        with pytest.raises(DatasetError, match="category 1 empty"):
            counts_factory((4, 0), (2, 0))

    def test_rejects_case_count_above_n(self, counts_factory):
        """Should reject n1 > n."""
        with pytest.raises(DatasetError):
            counts_factory((4,), (5,))

    def test_rejects_mismatched_lengths(self, counts_factory):
        """Should reject margins of different lengths."""
        with pytest.raises(DatasetError):
            counts_factory((4, 4), (2,))

    def test_collapsed(self, counts_factory):
        """Should sum margins into one category."""
        collapsed = counts_factory((4, 10), (2, 7)).collapsed()
        assert collapsed.n == (14,)
        assert collapsed.n1 == (9,)


class TestAminAmax:
    """Tests for the case-cell bounds."""

    def test_balanced(self):
        """Should give (0, 2) for x=2, n1=2, n=4."""
        assert amin_amax(2, 2, 4) == (0, 2)

    def test_empty_support(self):
        """Should force a=0 when x=0."""
        assert amin_amax(0, 5, 10) == (0, 0)

    def test_lower_bound_active(self):
        """Should give (2, 3) for x=7, n1=3, n=8."""
        assert amin_amax(7, 3, 8) == (2, 3)


class TestCmhStatistic:
    """Tests for cmh_statistic."""

    def test_single_category(self, counts_factory):
        """Should give 4.0 for n=4, n1=2, x=2, a=2."""
        counts = counts_factory((4,), (2,))
        assert cmh_statistic(counts, PatternSupport((2,), (2,))) == pytest.approx(4.0, abs=1e-15)

    def test_zero_numerator(self, counts_factory):
        """Should be 0 when every a^i equals gamma^i x^i."""
        counts = counts_factory((10, 8), (5, 4))
        assert cmh_statistic(counts, PatternSupport((4, 2), (2, 1))) == 0.0

    def test_two_category_regression(self, counts_factory):
        """Should pin the value for (10,5,4,4) and (10,5,6,1)."""
        counts = counts_factory((10, 10), (5, 5))
        # numerator (4 - 2) + (1 - 3) = 0 over denominator 0.6 + 0.6
        assert cmh_statistic(counts, PatternSupport((4, 6), (4, 1))) == 0.0
        assert cmh_statistic(counts, PatternSupport((4, 6), (4, 3))) == pytest.approx(4.0 / 1.2, rel=1e-14)

    def test_zero_denominator(self, counts_factory):
        """Should return 0 when every stratum is degenerate."""
        counts = counts_factory((4, 6), (0, 6))
        assert cmh_statistic(counts, PatternSupport((2, 3), (0, 3))) == 0.0
        counts = counts_factory((4,), (2,))
        assert cmh_statistic(counts, PatternSupport((4,), (2,))) == 0.0

    def test_single_category_matches_pearson(self, rng):
        """Should equal Pearson's chi-squared on 100 random 2x2 tables."""
        checked = 0
        while checked < 100:
            counts = random_counts(rng, 1, 40)
            n, n1 = counts.n[0], counts.n1[0]
            x = int(rng.integers(0, n + 1))
            lo, hi = amin_amax(x, n1, n)
            a = int(rng.integers(lo, hi + 1))
            table = np.array([[a, x - a], [n1 - a, n - n1 - (x - a)]])
            if (table.sum(axis=0) == 0).any() or (table.sum(axis=1) == 0).any():
                continue
            pearson = stats.chi2_contingency(table, correction=False)[0]
            assert cmh_statistic(counts, PatternSupport((x,), (a,))) == pytest.approx(pearson, rel=1e-12, abs=1e-12)
            checked += 1

    def test_complementation_invariance(self, rng):
        """Should be unchanged under x -> n - x, a -> n1 - a."""
        for _ in range(1000):
            counts = random_counts(rng, int(rng.integers(1, 5)), 20)
            x = random_support(rng, counts)
            a = tuple(int(rng.integers(lo, hi + 1)) for lo, hi in
                      (amin_amax(xi, n1i, ni) for xi, n1i, ni in zip(x, counts.n1, counts.n)))
            support = PatternSupport(x, a)
            flipped = support.complement(counts)
            assert cmh_statistic(counts, flipped) == pytest.approx(cmh_statistic(counts, support), rel=1e-12, abs=1e-12)
            assert min_attainable_pvalue(counts, flipped.x) == pytest.approx(
                min_attainable_pvalue(counts, x), rel=1e-12, abs=1e-300
            )


class TestChi2Sf:
    """Tests for the chi-squared survival function."""

    def test_matches_oracle_table(self, chi2_oracle):
        """Should match the high-precision table."""
        for case in chi2_oracle["cases"]:
            assert chi2_sf(case["t"]) == pytest.approx(case["p"], rel=1e-9, abs=1e-10)

    def test_zero(self):
        """Should be exactly 1 at t=0."""
        assert chi2_sf(0.0) == 1.0

    def test_five_percent_quantile(self):
        """Should give 0.05 at the 95% quantile."""
        assert abs(chi2_sf(3.8414588206941245) - 0.05) < 1e-10

    def test_matches_scipy(self):
        """Should agree with scipy on [0, 700]."""
        for t in np.linspace(0.0, 700.0, 351):
            assert chi2_sf(t) == pytest.approx(stats.chi2.sf(t, df=1), rel=1e-9, abs=1e-14)

    def test_monotone(self):
        """Should never increase with t."""
        values = [chi2_sf(t) for t in np.linspace(0.0, 800.0, 2001)]
        assert all(b <= a for a, b in zip(values, values[1:]))

    def test_saturates(self):
        """Should stop at the smallest normal double instead of 0."""
        assert chi2_sf(5000.0) == sys.float_info.min
        assert math.isfinite(math.log10(chi2_sf(1e6)))


class TestMinAttainablePvalue:
    """Tests for Psi."""

    def test_single_category(self, counts_factory):
        """Should give chi2_sf(4) for n=4, n1=2, x=2."""
        counts = counts_factory((4,), (2,))
        assert min_attainable_pvalue(counts, (2,)) == pytest.approx(0.0455002638963584, rel=1e-12)

    def test_empty_support(self, counts_factory):
        """Should be 1 when every x^i is 0."""
        counts = counts_factory((5, 7), (2, 3))
        assert min_attainable_pvalue(counts, (0, 0)) == 1.0

    def test_extremes_match_exhaustive_search(self, rng):
        """Should equal the exhaustive maximum over the a-grid on 1000 instances."""
        for _ in range(1000):
            counts = random_counts(rng, int(rng.integers(1, 4)), 8)
            x = random_support(rng, counts)
            expected = exhaustive_max_statistic(counts, x)
            assert max_cmh_statistic(counts, x) == pytest.approx(expected, rel=1e-12, abs=1e-12)

    def test_is_lower_bound(self, rng):
        """Should never exceed the p-value of any attainable table."""
        for _ in range(300):
            counts = random_counts(rng, int(rng.integers(1, 4)), 10)
            x = random_support(rng, counts)
            psi = min_attainable_pvalue(counts, x)
            bounds = [amin_amax(xi, n1i, ni) for xi, n1i, ni in zip(x, counts.n1, counts.n)]
            for a in itertools.product(*(range(lo, hi + 1) for lo, hi in bounds)):
                assert cmh_pvalue(counts, PatternSupport(x, a)) >= psi * (1 - 1e-12)


class TestPsiNonMonotonicity:
    """Psi can grow with the support of a category."""

    def test_frozen_witness(self):
        """Should pin Psi(10, 0) < Psi(10, 1) for n=(40, 12), n1=(10, 10)."""
        counts = StratifiedCounts((40, 12), (10, 10))
        assert counts.cap == (10, 2)
        assert max_cmh_statistic(counts, (10, 0)) == pytest.approx(40.0, rel=1e-12)
        assert min_attainable_pvalue(counts, (10, 0)) < min_attainable_pvalue(counts, (10, 1))

    def test_random_search_finds_witness(self):
        """Should find a non-monotone instance among mixed-gamma designs."""
        rng = np.random.default_rng(7)
        for _ in range(5000):
            n = rng.integers(4, 41, size=2)
            low = int(rng.integers(1, (n[0] + 1) // 2))
            high = int(rng.integers(n[1] // 2 + 1, n[1]))
            counts = StratifiedCounts(tuple(n.tolist()), (low, high))
            if not (counts.gamma[0] < 0.5 < counts.gamma[1]):
                continue
            x = [int(rng.integers(0, cap + 1)) for cap in counts.cap]
            coordinate = int(rng.integers(0, 2))
            psis = []
            for value in range(counts.cap[coordinate] + 1):
                x[coordinate] = value
                psis.append(min_attainable_pvalue(counts, x))
            if any(later > earlier for earlier, later in zip(psis, psis[1:])):
                return
        pytest.fail("no non-monotone instance found")
