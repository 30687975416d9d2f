import numpy as np
import pandas as pd
import pytest
from scipy import stats

from config import config as shipped_config
from predrec.core.decision import DecisionProblem, NullSet
from predrec.core.kernels import KernelModel
from predrec.core.mixing import GridSpec, from_atoms, init_beta, init_normal, init_uniform, point_mass
from predrec.sim.risk import (SimScenario, YQuadrature, assumption_report, bayes_risk, decision_risk,
                              eb_risk, kl_divergence, load_scenario, marginal_on_quadrature,
                              optimality_trace, summarize_trace, y_quadrature_for)
from predrec.errors import ConfigError, DomainError


def small_scenario(**changes):
    data = {
        'name': 'small',
        'kernel': {'family': 'binomial', 'params': {'trials': 20}},
        'grid': {'node_count': 200},
        'truth': {'kind': 'beta', 'a': 30, 'b': 120},
        'initial': {'kind': 'uniform'},
        'pr': {'gamma': 0.75, 'n_permutations': 1, 'seed': 5},
        'param': 20,
        'sample_sizes': [100],
        'replications': 1,
    }
    data.update(changes)
    return SimScenario.from_dict(data)


class TestBayesRisk:
    def test_point_mass_has_no_risk(self):
        model = KernelModel.normal((-1.0, 1.0))
        assert bayes_risk(point_mass(0.0), model, DecisionProblem.estimation(), param=1.0) == 0.0

    def test_normal_normal_posterior_variance(self):
        F = init_normal(GridSpec(400, (-6.0, 6.0)))
        model = KernelModel.normal((-6.0, 6.0))
        assert bayes_risk(F, model, DecisionProblem.estimation(), param=1.0) == pytest.approx(0.5, abs=2e-3)

    def test_binomial_matches_enumeration(self):
        F = init_beta(GridSpec(300), 3, 7)
        model = KernelModel.binomial(trials=8)
        thetas, masses = F.support()
        expected = 0.0
        for y in range(9):
            joint = masses * stats.binom.pmf(y, 8, thetas)
            mean = joint @ thetas / joint.sum()
            expected += joint @ (thetas - mean) ** 2
        assert bayes_risk(F, model, DecisionProblem.estimation(), param=8) == pytest.approx(expected, rel=1e-10)

    def test_two_point_test_matches_enumeration(self):
        F = from_atoms([0.3, 0.7], [0.6, 0.4])
        model = KernelModel.binomial(trials=10)
        problem = DecisionProblem.test(1.0, 2.0, NullSet(atoms=(0.3,)))
        expected = 0.0
        for y in range(11):
            null = 0.6 * stats.binom.pmf(y, 10, 0.3)
            alternative = 0.4 * stats.binom.pmf(y, 10, 0.7)
            if null / (null + alternative) > problem.threshold:
                expected += problem.kappa2 * alternative
            else:
                expected += problem.kappa1 * null
        assert bayes_risk(F, model, problem, param=10) == pytest.approx(expected, abs=1e-10)


class TestEbRisk:
    def test_wrong_point_mass(self):
        model = KernelModel.normal((-2.0, 2.0))
        risk = decision_risk(point_mass(1.0), point_mass(0.0), model, DecisionProblem.estimation(), param=1.0)
        assert risk == pytest.approx(1.0, rel=1e-8)

    def test_injected_truth_is_optimal(self):
        scenario = small_scenario()
        rho = bayes_risk(scenario.true_F, scenario.model, scenario.problem, param=scenario.param)
        assert eb_risk(scenario.true_F, scenario) == rho

    def test_dominates_bayes_risk(self, rng):
        scenario = small_scenario()
        rho = bayes_risk(scenario.true_F, scenario.model, scenario.problem, param=scenario.param)
        for _ in range(5):
            masses = rng.uniform(0.0, 1.0, size=scenario.initial.n_nodes) * scenario.initial.grid_weights
            rule_F = scenario.initial.with_masses(masses).normalized()
            assert eb_risk(rule_F, scenario) >= rho - 1e-8

    def test_quadrature_spans_the_marginal(self):
        F = init_normal(GridSpec(100, (-3.0, 3.0)), 1.0, 0.5)
        yq = y_quadrature_for(F, KernelModel.normal((-3.0, 3.0)), 4.0)
        assert len(yq) == 4001
        assert not yq.discrete
        assert yq.weights.sum() == pytest.approx(yq.points[-1] - yq.points[0])


class TestKlDivergence:
    def test_identical_is_zero(self):
        yq = YQuadrature(np.arange(11.0), np.ones(11), True)
        p = stats.binom.pmf(np.arange(11), 10, 0.4)
        assert kl_divergence(p, p, yq) == 0.0

    def test_binomial_oracle(self):
        model = KernelModel.binomial(trials=10)
        yq = y_quadrature_for(point_mass(0.5), model, 10)
        p = marginal_on_quadrature(point_mass(0.5), model, yq, 10)
        q = marginal_on_quadrature(point_mass(0.6), model, yq, 10)
        ys = np.arange(11)
        direct = stats.binom.pmf(ys, 10, 0.5)
        other = stats.binom.pmf(ys, 10, 0.6)
        assert kl_divergence(p, q, yq) == pytest.approx(float((direct * np.log(direct / other)).sum()), rel=1e-12)

    def test_distinct_marginals_are_positive(self):
        spec = GridSpec(400)
        model = KernelModel.binomial(trials=50)
        truth = init_beta(spec, 30, 120)
        yq = y_quadrature_for(truth, model, 50)
        p = marginal_on_quadrature(truth, model, yq, 50)
        q = marginal_on_quadrature(init_uniform(spec), model, yq, 50)
        assert kl_divergence(p, q, yq) > 0.0

    def test_support_violation(self):
        yq = YQuadrature(np.arange(3.0), np.ones(3), True)
        with pytest.raises(DomainError):
            kl_divergence(np.array([0.5, 0.5, 0.0]), np.array([1.0, 0.0, 0.0]), yq)


class TestScenario:
    def test_unknown_kernel(self):
        with pytest.raises(ConfigError) as info:
            small_scenario(kernel={'family': 'laplace', 'params': {}})
        assert info.value.field == 'kernel.family'

    def test_sizes_must_increase(self):
        with pytest.raises(ConfigError) as info:
            small_scenario(sample_sizes=[500, 100])
        assert info.value.field == 'sample_sizes'

    def test_shipped_scenarios_load(self):
        assert {'normal_kl', 'beta_binomial'} <= set(shipped_config.list_scenarios())
        scenario = load_scenario(shipped_config.scenario_path('normal_kl'), seed=3, replications=2)
        assert scenario.seed == 3
        assert scenario.replications == 2
        assert scenario.model.theta_support == (-6.0, 6.0)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / 'broken.json'
        path.write_text('{"kernel": ')
        with pytest.raises(ConfigError):
            load_scenario(str(path))


class TestOptimalityTrace:
    def test_single_row_is_reproducible(self):
        first = optimality_trace(small_scenario())
        second = optimality_trace(small_scenario())
        assert len(first) == 1
        pd.testing.assert_frame_equal(first, second)
        assert first['excess_risk'].iloc[0] >= -1e-8
        assert first['kl'].iloc[0] >= -1e-8

    def test_threads_do_not_change_the_trace(self):
        scenario = small_scenario(sample_sizes=[50, 100], replications=3)
        pd.testing.assert_frame_equal(optimality_trace(scenario, threads=1), optimality_trace(scenario, threads=3))

    def test_informative_start_helps(self):
        informed = small_scenario(initial={'kind': 'beta', 'a': 30, 'b': 120},
                                  pr={'gamma': 0.95, 'n_permutations': 1, 'seed': 5}, replications=3)
        uniform = small_scenario(pr={'gamma': 0.95, 'n_permutations': 1, 'seed': 5}, replications=3)
        assert (optimality_trace(informed)['excess_risk'].median()
                < optimality_trace(uniform)['excess_risk'].median())

    def test_summary_gates(self):
        trace = pd.DataFrame({'n': [10, 10, 100, 100], 'replication': [0, 1, 0, 1],
                              'excess_risk': [0.4, 0.2, 0.1, 0.05], 'kl': [0.3, 0.5, 0.1, 0.2],
                              'eb_risk': [1.4, 1.2, 1.1, 1.05], 'bayes_risk': [1.0] * 4})
        summary = summarize_trace(trace)
        assert summary['sample_sizes'] == [10, 100]
        assert summary['median_excess_risk'] == pytest.approx([0.3, 0.075])
        assert summary['median_kl'] == pytest.approx([0.4, 0.15])
        assert summary['excess_risk_nonincreasing'] and summary['kl_decreasing']
        assert summary['risk_dominance']
        assert summary['replications'] == 2

    def test_assumption_report(self):
        report = assumption_report(small_scenario(), n_terms=10 ** 4)
        assert report['kernel_bounded']['bounded']
        assert report['weight_series']['satisfied']
        assert report['likelihood_ratio_moment']['finite']
        assert 'identifiability' in report['notes']


@pytest.mark.slow
class TestConvergence:
    def test_normal_kl_decreases(self):
        scenario = load_scenario(shipped_config.scenario_path('normal_kl'))
        summary = summarize_trace(optimality_trace(scenario, threads=4))
        kl = dict(zip(summary['sample_sizes'], summary['median_kl']))
        assert kl[100] > kl[1000] > kl[5000]
        assert kl[5000] < 0.5 * kl[100]
        # a tenfold sample shrinks KL at least at rate n^(-1/4), with 50% slack
        assert kl[5000] <= 1.5 * kl[500] * 10 ** -0.25
        assert summary['risk_dominance']

    def test_beta_binomial_excess_risk_shrinks(self):
        scenario = load_scenario(shipped_config.scenario_path('beta_binomial'))
        summary = summarize_trace(optimality_trace(scenario, threads=4))
        assert summary['excess_risk_nonincreasing']

    def test_excess_risk_mostly_smaller_at_larger_n(self):
        scenario = small_scenario(kernel={'family': 'binomial', 'params': {'trials': 50}}, param=50,
                                  grid={'node_count': 400}, sample_sizes=[100, 2000], replications=20)
        trace = optimality_trace(scenario, threads=4)
        wide = trace.pivot(index='replication', columns='n', values='excess_risk')
        assert (wide[2000] < wide[100]).mean() >= 0.8
