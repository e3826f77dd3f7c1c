"""Tests for the synthetic generators."""

import numpy as np
import pytest

from fastcmh._common import ConfigError, InfeasibleSpecError
from fastcmh.synth import (
    ConfoundSpec,
    GenSpec,
    gen_confounded,
    gen_standard,
    make_rng,
    plant_windows,
    sample_bernoulli_triple,
    triple_pmf,
    window_probability,
)


def mc_tolerance(p, trials):
    return 4.0 * np.sqrt(p * (1.0 - p) / trials)


class TestWindowProbability:
    """Tests for window_probability."""

    def test_single_cell(self):
        """Should equal p_case for ell = 1."""
        assert window_probability(0.7, 1) == pytest.approx(0.7, rel=1e-15)

    def test_hit_rate(self):
        """Should give P(at least one 1) = p_case."""
        for ell in (2, 5, 10):
            q = window_probability(0.8, ell)
            assert 1.0 - (1.0 - q) ** ell == pytest.approx(0.8, rel=1e-12)


class TestGenStandard:
    """Tests for gen_standard."""

    def spec(self, **overrides):
        params = dict(n=400, L=60, K=2, p1=0.2, p_case=0.8, plants=((20, 5),), seed=3)
        params.update(overrides)
        return GenSpec(**params)

    def test_balanced_design(self):
        """Should put n/K samples in each category, half of them cases."""
        dataset = gen_standard(self.spec(K=4))
        assert dataset.counts.n == (100, 100, 100, 100)
        assert dataset.counts.n1 == (50, 50, 50, 50)

    def test_deterministic(self):
        """Should give identical datasets for the same seed."""
        assert gen_standard(self.spec()).same_as(gen_standard(self.spec()))
        assert not gen_standard(self.spec()).same_as(gen_standard(self.spec(seed=4)))

    def test_background_rate(self):
        """Should draw background cells at rate p1."""
        dataset = gen_standard(self.spec())
        background = np.delete(dataset.bits, np.s_[20:25], axis=1)
        assert abs(background.mean() - 0.2) <= mc_tolerance(0.2, background.size)

    def test_case_window_hit_rate(self):
        """Should give cases a hit in the window at rate p_case and leave controls at background."""
        dataset = gen_standard(self.spec(n=2000))
        hits = dataset.bits[:, 20:25].any(axis=1)
        cases = dataset.labels == 1
        assert abs(hits[cases].mean() - 0.8) <= mc_tolerance(0.8, cases.sum())
        control_rate = 1.0 - 0.8 ** 5
        assert abs(hits[~cases].mean() - control_rate) <= mc_tolerance(control_rate, (~cases).sum())

    def test_case_window_hit_rate_large_sample(self):
        """Should hit a 5-position case window at rate p_case over 10^5 cases."""
        spec = GenSpec(n=200000, L=5, K=1, p1=0.2, p_case=0.5, plants=((0, 5),), seed=8)
        dataset = gen_standard(spec)
        cases = dataset.labels == 1
        assert cases.sum() == 100000
        assert abs(dataset.bits[cases].any(axis=1).mean() - 0.5) <= 0.005

    def test_rejects_unbalanced_n(self):
        """Should require n divisible by 2K."""
        with pytest.raises(InfeasibleSpecError):
            gen_standard(self.spec(n=30, K=4))

    def test_rejects_plant_outside(self):
        """Should require plants inside the sequence."""
        with pytest.raises(InfeasibleSpecError):
            gen_standard(self.spec(plants=((58, 5),)))

    def test_rejects_probability(self):
        """Should require 0 < p1 < 1."""
        with pytest.raises(ConfigError):
            gen_standard(self.spec(p1=1.0))

    def test_plant_windows(self):
        """Should list the planted windows."""
        assert plant_windows(self.spec()) == ((20, 5),)


class TestTriple:
    """Tests for the correlated Bernoulli triple."""

    def test_independent(self):
        """Should give 1/8 per cell without correlation."""
        assert np.allclose(triple_pmf(0.0, 0.0), 1 / 8)

    def test_pmf_moments(self):
        """Should have mean 0.5 and the requested covariances."""
        pmf = triple_pmf(0.4, -0.3)
        cells = np.array([[(c >> 2) & 1, (c >> 1) & 1, c & 1] for c in range(8)])
        mean = pmf @ cells
        assert np.allclose(mean, 0.5)
        cov = (cells - 0.5).T @ np.diag(pmf) @ (cells - 0.5)
        assert cov[0, 2] == pytest.approx(0.4 / 4)
        assert cov[1, 2] == pytest.approx(-0.3 / 4)
        assert cov[0, 1] == pytest.approx(0.0, abs=1e-15)

    def test_infeasible(self):
        """Should name the negative cell."""
        with pytest.raises(InfeasibleSpecError, match="< 0"):
            triple_pmf(1.0, 1.0)

    def test_out_of_range(self):
        """Should reject correlations outside [-1, 1]."""
        with pytest.raises(InfeasibleSpecError):
            triple_pmf(1.5, 0.0)

    def test_empirical_correlation(self):
        """Should reproduce the target correlations in samples."""
        rng = make_rng(5)
        z = sample_bernoulli_triple(0.5, 0.5, rng, size=100000).astype(float)
        corr = np.corrcoef(z.T)
        assert abs(corr[0, 2] - 0.5) <= 0.02
        assert abs(corr[1, 2] - 0.5) <= 0.02
        assert abs(corr[0, 1]) <= 0.02

    def test_single_draw(self):
        """Should return one triple when size is omitted."""
        z = sample_bernoulli_triple(0.0, 0.0, make_rng(0))
        assert z.shape == (3,)


class TestGenConfounded:
    """Tests for gen_confounded."""

    def spec(self, **overrides):
        params = dict(n=2000, L=40, p1=0.2, rho_sig=0.0, rho_con=0.9, tau=10, ell=5, p_case=0.8, seed=1)
        params.update(overrides)
        return ConfoundSpec(**params)

    def test_no_flips(self):
        """Should gate the window exactly by the category when p_eps = 0."""
        dataset, draws = gen_confounded(self.spec(p_eps=0.0, rho_con=0.0), return_draws=True)
        assert np.array_equal(draws.z5, draws.z2)
        assert np.array_equal(dataset.covariate, draws.z2)
        assert np.array_equal(dataset.labels, draws.z3)

    def test_flip_rate(self):
        """Should disagree with the category for about p_eps of the samples."""
        _, draws = gen_confounded(self.spec(), return_draws=True)
        rate = np.mean(draws.z5 != draws.z2)
        assert abs(rate - 0.1) <= mc_tolerance(0.1, 2000)

    def test_window_follows_gate(self):
        """Should enrich the window where z5 = 1 only."""
        dataset, draws = gen_confounded(self.spec(), return_draws=True)
        hits = dataset.bits[:, 10:15].any(axis=1)
        gated = draws.z5 == 1
        assert abs(hits[gated].mean() - 0.8) <= mc_tolerance(0.8, gated.sum())
        background = 1.0 - 0.8 ** 5
        assert abs(hits[~gated].mean() - background) <= mc_tolerance(background, (~gated).sum())

    def test_label_tracks_category(self):
        """Should correlate label and category at rho_con."""
        dataset = gen_confounded(self.spec())
        corr = np.corrcoef(dataset.labels, dataset.covariate)[0, 1]
        assert abs(corr - 0.9) <= 3.0 / np.sqrt(2000)

    def test_genuine_plant(self):
        """Should enrich the genuine window where z1 = 1."""
        dataset, draws = gen_confounded(self.spec(genuine_tau=30, rho_sig=0.1), return_draws=True)
        hits = dataset.bits[:, 30:35].any(axis=1)
        gated = draws.z1 == 1
        assert abs(hits[gated].mean() - 0.8) <= mc_tolerance(0.8, gated.sum())

    def test_deterministic(self):
        """Should give identical datasets for the same seed."""
        assert gen_confounded(self.spec()).same_as(gen_confounded(self.spec()))

    def test_infeasible(self):
        """Should reject an infeasible correlation pair."""
        with pytest.raises(InfeasibleSpecError):
            gen_confounded(self.spec(rho_sig=1.0, rho_con=1.0))

    def test_rejects_p_eps(self):
        """Should require 0 <= p_eps < 1."""
        with pytest.raises(InfeasibleSpecError):
            gen_confounded(self.spec(p_eps=1.0))

    def test_default_p_case(self):
        """Should enrich the confounded window to 0.99 unless told otherwise."""
        spec = ConfoundSpec(n=2000, L=40, p1=0.2, rho_sig=0.0, rho_con=0.9, tau=10, ell=5)
        assert spec.p_case == 0.99
