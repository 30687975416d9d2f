"""
Simulation harness for Bayes risk, empirical Bayes risk and KL divergence.
"""

from .risk import SimScenario, bayes_risk, eb_risk, kl_divergence, load_scenario, optimality_trace

__all__ = ['SimScenario', 'bayes_risk', 'eb_risk', 'kl_divergence', 'load_scenario', 'optimality_trace']
