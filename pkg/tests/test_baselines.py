import numpy as np
import pytest

from predrec.baseball.baselines import (BASELINES, NormalMeansData, group_mean, james_stein,
                                        james_stein_factor, naive, parametric_eb_mm,
                                        parametric_eb_mm_prior)
from predrec.errors import DomainError


def normal_means(rng, n=40):
    at_bats = rng.integers(20, 300, size=n)
    return NormalMeansData(rng.normal(0.55, 0.06, size=n) + rng.normal(0.0, np.sqrt(1 / (4 * at_bats))),
                           1.0 / (4.0 * at_bats))


class TestNaiveAndGroupMean:
    def test_naive_is_identity(self):
        np.testing.assert_array_equal(naive(NormalMeansData([0.5, 0.6], [0.01, 0.01])), [0.5, 0.6])
        assert len(naive(NormalMeansData([], []))) == 0

    def test_group_mean(self):
        np.testing.assert_allclose(group_mean(NormalMeansData([0.2, 0.4], [0.01, 0.02])), [0.3, 0.3])
        np.testing.assert_allclose(group_mean(NormalMeansData([0.7] * 5, 0.01)), 0.7)

    def test_group_mean_needs_data(self):
        with pytest.raises(DomainError):
            group_mean(NormalMeansData([], []))

    def test_lengths_must_match(self):
        with pytest.raises(DomainError):
            NormalMeansData.from_arrays([0.1, 0.2, 0.3], [0.1, 0.2])
        with pytest.raises(DomainError):
            NormalMeansData([0.1], [0.0])


class TestJamesStein:
    def test_dispersed_data_barely_shrinks(self):
        n, v = 10, 0.01
        values = np.linspace(-1.0, 1.0, n)
        spread = ((values - values.mean()) ** 2).sum()
        values = values * np.sqrt(1e6 * (n - 3) * v / spread)
        data = NormalMeansData(values, v)
        assert james_stein_factor(data) > 0.99
        np.testing.assert_allclose(james_stein(data), values, atol=1e-2 * np.abs(values).max())

    def test_constant_input_shrinks_fully(self):
        data = NormalMeansData([0.4] * 6, 0.01)
        assert james_stein_factor(data) == 0.0
        np.testing.assert_allclose(james_stein(data), 0.4)

    def test_factor_is_positive_part(self, rng):
        for _ in range(20):
            data = NormalMeansData(rng.normal(0.0, rng.uniform(0.01, 1.0), size=8), rng.uniform(0.01, 0.5, size=8))
            assert 0.0 <= james_stein_factor(data) <= 1.0

    def test_needs_four_observations(self):
        with pytest.raises(DomainError):
            james_stein(NormalMeansData([0.1, 0.2, 0.3], 0.01))


class TestParametricEB:
    def test_degenerate_prior_gives_group_mean(self):
        data = NormalMeansData([0.50, 0.51, 0.49], 1.0)
        mu, tau2 = parametric_eb_mm_prior(data)
        assert tau2 == 0.0
        np.testing.assert_allclose(parametric_eb_mm(data), mu)

    def test_noiseless_observation_is_kept(self):
        values = np.array([0.2, 0.9, 0.4, 0.6, 0.1])
        variances = np.array([1e-12, 0.01, 0.01, 0.01, 0.01])
        estimates = parametric_eb_mm(NormalMeansData(values, variances))
        assert estimates[0] == pytest.approx(0.2, abs=1e-6)

    def test_needs_two_observations(self):
        with pytest.raises(DomainError):
            parametric_eb_mm(NormalMeansData([0.3], 0.01))


class TestShared:
    def test_location_equivariance(self, rng):
        data = normal_means(rng)
        shifted = NormalMeansData(data.values + 0.37, data.variances)
        for name, estimator in BASELINES.items():
            np.testing.assert_allclose(estimator(shifted), estimator(data) + 0.37, rtol=0, atol=1e-12,
                                       err_msg=name)

    def test_shrinkage_stays_in_range(self, rng):
        data = normal_means(rng)
        for name in ('group_mean', 'james_stein', 'parametric_eb_mm'):
            estimates = BASELINES[name](data)
            assert estimates.min() >= data.values.min() - 1e-12, name
            assert estimates.max() <= data.values.max() + 1e-12, name
