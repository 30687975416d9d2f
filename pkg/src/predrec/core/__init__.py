"""
Core numerics: kernel families, discretized mixing measures, the predictive
recursion and the decision rules built on a mixing measure.
"""

from .kernels import KernelFamily, KernelModel, Observations, density, check_a4_bound
from .mixing import GridRule, GridSpec, MixingMeasure, marginal_density, posterior
from .recursion import PrConfig, PrFit, fit, pr_step, weight
from .decision import DecisionProblem, NullSet, posterior_mean_rule, test_rule

__all__ = [
    'KernelFamily', 'KernelModel', 'Observations', 'density', 'check_a4_bound',
    'GridRule', 'GridSpec', 'MixingMeasure', 'marginal_density', 'posterior',
    'PrConfig', 'PrFit', 'fit', 'pr_step', 'weight',
    'DecisionProblem', 'NullSet', 'posterior_mean_rule', 'test_rule',
]
