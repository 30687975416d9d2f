import numpy as np
import pytest
from scipy import stats

from predrec.core.kernels import KernelModel, Observations
from predrec.core.mixing import GridSpec, from_atoms, init_beta, init_uniform, marginal_density, point_mass, posterior
from predrec.core.recursion import (PrConfig, check_weight_series, derive_seed, fit, pr_step,
                                    predictive_density, weight, weights)
from predrec.errors import ConfigError, DegenerateObservationError, DomainError


def beta_binomial_sample(rng, n, a=30.0, b=120.0, trials=50):
    thetas = rng.beta(a, b, size=n)
    return Observations(rng.binomial(trials, thetas).astype(float), np.full(n, float(trials)))


class TestWeights:
    def test_power_schedule(self):
        assert weight(PrConfig(gamma=1.0), 1) == pytest.approx(0.5)
        assert weight(PrConfig(gamma=0.5, strict_weights=False), 3) == pytest.approx(0.5)
        assert weight(PrConfig(gamma=0.9), 99) == pytest.approx(100 ** -0.9, rel=1e-12)
        assert weight(PrConfig(gamma=0.9), 99) == pytest.approx(0.01585, abs=1e-5)

    def test_vector_matches_scalar(self):
        config = PrConfig(gamma=0.75)
        np.testing.assert_allclose(weights(config, 5), [weight(config, i) for i in range(1, 6)])

    def test_index_starts_at_one(self):
        with pytest.raises(DomainError):
            weight(PrConfig(), 0)

    def test_gamma_outside_admissible_range(self):
        with pytest.raises(ConfigError) as info:
            PrConfig(gamma=1.2)
        assert info.value.field == 'pr.gamma'
        assert '(1/2, 1]' in str(info.value)
        with pytest.raises(ConfigError):
            PrConfig(gamma=0.5)

    def test_relaxed_range(self):
        assert PrConfig(gamma=0.3, strict_weights=False).gamma == 0.3
        with pytest.raises(ConfigError):
            PrConfig(gamma=0.0, strict_weights=False)

    def test_override(self):
        config = PrConfig(weight_override=(0.9, 0.4, 0.2))
        assert weight(config, 2) == 0.4
        with pytest.raises(ConfigError):
            weight(config, 4)
        with pytest.raises(ConfigError) as info:
            PrConfig(weight_override=(0.5, 1.5))
        assert info.value.field == 'pr.weight_override'

    def test_seed_range(self):
        with pytest.raises(ConfigError):
            PrConfig(seed=-1)
        assert PrConfig(seed=2 ** 64 - 1).seed == 2 ** 64 - 1

    def test_series_report(self):
        report = check_weight_series(PrConfig(gamma=0.75), n_terms=10 ** 5)
        assert report.decay_exponent == pytest.approx(0.75, abs=1e-3)
        assert report.satisfied
        constant = check_weight_series(PrConfig(weight_override=(0.5,) * 10))
        assert constant.n_terms == 10
        assert not constant.satisfied

    def test_from_dict_overrides(self):
        config = PrConfig.from_dict({'gamma': 0.8, 'n_permutations': 3}, seed=11, gamma=None)
        assert (config.gamma, config.n_permutations, config.seed) == (0.8, 3, 11)


class TestDeriveSeed:
    def test_stable_and_distinct(self):
        assert derive_seed(7, 1) == derive_seed(7, 1)
        assert derive_seed(7, 1) != derive_seed(7, 2)
        assert derive_seed(7, 1, 0) != derive_seed(7, 1)
        assert derive_seed(7, 0) != derive_seed(7)
        assert derive_seed(7, 1, 0) != derive_seed(7, 1, 0, 0)
        assert 0 <= derive_seed(123, 4, 5) < 2 ** 64


class TestPrStep:
    def test_zero_weight_is_identity(self):
        F = init_beta(GridSpec(200), 3, 7)
        G = pr_step(F, KernelModel.binomial(trials=10), 4, None, 0.0)
        np.testing.assert_allclose(G.support()[1], F.support()[1], rtol=1e-14)

    def test_unit_weight_is_posterior(self):
        F = init_beta(GridSpec(200), 3, 7)
        model = KernelModel.binomial(trials=10)
        np.testing.assert_allclose(pr_step(F, model, 4, None, 1.0).support()[1],
                                   posterior(F, model, 4).support()[1], rtol=1e-12)

    def test_matches_reference_density(self):
        spec = GridSpec()
        F = init_beta(spec, 30, 120)
        model = KernelModel.binomial(trials=100)
        w = 0.5 ** 0.75
        G = pr_step(F, model, 25, None, w)
        nodes, _ = spec.build()
        prior = stats.beta.pdf(nodes, 30, 120)
        step = (1 - 2e-4) / 10 ** 6
        fine = 1e-4 + (np.arange(10 ** 6) + 0.5) * step
        fine_prior = stats.beta.pdf(fine, 30, 120)
        normalizer = fine_prior.sum() * step
        marginal = (fine_prior * stats.binom.pmf(25, 100, fine)).sum() * step / normalizer
        expected = prior / normalizer * ((1 - w) + w * stats.binom.pmf(25, 100, nodes) / marginal)
        keep = expected > 1e-200
        np.testing.assert_allclose(G.grid_density[keep], expected[keep], rtol=1e-6)

    def test_mass_is_conserved(self, rng):
        spec = GridSpec(200)
        model = KernelModel.binomial(trials=30)
        F = init_beta(spec, 2, 5)
        for _ in range(10_000):
            w = rng.uniform(0.0, 1.0)
            y = int(rng.integers(0, 31))
            F = pr_step(F, model, y, None, w)
            assert abs(F.total_mass() - 1.0) <= 1e-12
            F = F.normalized()

    def test_weight_out_of_range(self):
        with pytest.raises(DomainError):
            pr_step(point_mass(0.5), KernelModel.binomial(trials=2), 1, None, 1.5)


class TestFit:
    def test_unrolls_the_recursion(self):
        spec = GridSpec(300)
        model = KernelModel.binomial(trials=10)
        F0 = init_beta(spec, 2, 2)
        config = PrConfig(gamma=0.75, n_permutations=1, shuffle=False, grid=spec)
        result = fit(Observations([3.0, 8.0], [10.0, 10.0]), model, F0, config)
        step1 = pr_step(F0, model, 3, 10, 2 ** -0.75)
        step2 = pr_step(step1, model, 8, 10, 3 ** -0.75)
        np.testing.assert_allclose(result.estimate.support()[1], step2.support()[1], rtol=1e-12)
        assert result.marginals.shape == (1, 2)
        assert result.marginals[0, 0] == pytest.approx(marginal_density(F0, model, 3, 10), rel=1e-12)

    def test_deterministic(self, rng):
        data = beta_binomial_sample(rng, 300)
        model = KernelModel.binomial()
        F0 = init_uniform(GridSpec(400))
        config = PrConfig(gamma=0.9, n_permutations=5, seed=3, grid=GridSpec(400))
        first = fit(data, model, F0, config)
        second = fit(data, model, F0, config)
        np.testing.assert_array_equal(first.estimate.support()[1], second.estimate.support()[1])
        assert first.log_likelihood == second.log_likelihood

    def test_threads_do_not_change_the_result(self, rng):
        data = beta_binomial_sample(rng, 200)
        model = KernelModel.binomial()
        F0 = init_uniform(GridSpec(300))
        config = PrConfig(n_permutations=6, seed=1, grid=GridSpec(300))
        serial = fit(data, model, F0, config, threads=1)
        parallel = fit(data, model, F0, config, threads=4)
        np.testing.assert_array_equal(serial.estimate.support()[1], parallel.estimate.support()[1])

    def test_recovers_beta_binomial_mean(self, rng):
        data = beta_binomial_sample(rng, 2000)
        model = KernelModel.binomial()
        result = fit(data, model, init_uniform(GridSpec()), PrConfig(gamma=0.9, n_permutations=10, seed=0))
        thetas, masses = result.estimate.support()
        assert float(masses @ thetas) == pytest.approx(0.2, abs=0.01)
        assert result.estimate.total_mass() == pytest.approx(1.0, abs=1e-12)

    def test_estimate_is_dominated_by_the_initial_guess(self, rng):
        spec = GridSpec(200)
        F0 = init_uniform(spec)
        density = F0.grid_density.copy()
        density[:50] = 0.0
        F0 = F0.with_masses(density * F0.grid_weights).normalized()
        data = beta_binomial_sample(rng, 100)
        result = fit(data, KernelModel.binomial(), F0, PrConfig(n_permutations=3, grid=spec))
        assert np.all(result.estimate.grid_density[:50] == 0.0)

    def test_orderings_stay_close(self, rng):
        data = beta_binomial_sample(rng, 500)
        model = KernelModel.binomial()
        F0 = init_uniform(GridSpec(400))
        fits = [fit(data, model, F0, PrConfig(gamma=0.9, n_permutations=1, seed=s, grid=GridSpec(400))).estimate
                for s in (1, 2)]
        masses = [F.support()[1] for F in fits]
        spread = np.abs(masses[0] - masses[1]).sum()
        assert spread < np.abs(masses[0] - F0.support()[1]).sum()
        assert spread < np.abs(masses[1] - F0.support()[1]).sum()

    def test_keep_permutations(self, rng):
        data = beta_binomial_sample(rng, 50)
        result = fit(data, KernelModel.binomial(), init_uniform(GridSpec(100)),
                     PrConfig(n_permutations=4, grid=GridSpec(100)), keep_permutations=True)
        assert len(result.per_permutation) == 4
        averaged = np.mean([F.support()[1] for F in result.per_permutation], axis=0)
        np.testing.assert_allclose(result.estimate.support()[1], averaged, rtol=1e-10, atol=1e-15)
        assert np.all(np.isfinite(result.log_likelihoods))

    def test_degenerate_observation_reports_position(self):
        model = KernelModel.normal((-1.0, 1.0))
        config = PrConfig(n_permutations=1, shuffle=False)
        with pytest.raises(DegenerateObservationError) as info:
            fit(Observations([0.0, 100.0]), model, point_mass(0.0), config)
        assert info.value.index == 2
        assert info.value.permutation == 0

    def test_empty_data(self):
        with pytest.raises(DomainError):
            fit(Observations(np.empty(0)), KernelModel.binomial(trials=3), point_mass(0.5), PrConfig())

    def test_initial_guess_outside_kernel_support(self):
        model = KernelModel.normal((-1.0, 1.0))
        with pytest.raises(DomainError):
            fit(Observations([0.0]), model, from_atoms([0.0, 2.0], [0.5, 0.5]), PrConfig())

    def test_predictive_density(self, rng):
        data = beta_binomial_sample(rng, 100)
        model = KernelModel.binomial()
        result = fit(data, model, init_uniform(GridSpec(200)), PrConfig(n_permutations=2, grid=GridSpec(200)))
        assert predictive_density(result, model, 10, 50) == pytest.approx(
            marginal_density(result.estimate, model, 10, 50), rel=1e-12)

    def test_manifest(self, rng):
        data = beta_binomial_sample(rng, 20)
        result = fit(data, KernelModel.binomial(), init_uniform(GridSpec(50)),
                     PrConfig(n_permutations=2, seed=9, grid=GridSpec(50)))
        manifest = result.manifest()
        assert manifest['seed'] == 9
        assert manifest['n_observations'] == 20
        assert manifest['data_sha256'] == data.digest()
