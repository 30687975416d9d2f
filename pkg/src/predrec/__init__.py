"""
predrec - predictive recursion for nonparametric empirical Bayes

Estimates mixing (prior) distributions with the predictive recursion, builds
plug-in empirical Bayes estimation and testing rules from them, checks their
risk by simulation, and runs the batting-average prediction study.

The command-line tools live in predrec.tools and are tied together by predrec.cli.
"""

__version__ = '1.0.0'
