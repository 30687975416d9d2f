#!/usr/bin/env python

from setuptools import setup, find_packages

setup(
    name="predrec-tools",
    version="1.0.0",
    description="Predictive recursion tools for nonparametric empirical Bayes estimation and testing",
    package_dir={"": "src"},
    packages=find_packages(where="src"),
    include_package_data=True,
    package_data={
        "config": ["profiles/*.json", "scenarios/*.json"],
    },
    python_requires=">=3.8",
    install_requires=[
        "numpy>=1.19.0",
        "pandas>=1.5.0",
        "scipy>=1.6.0",
        "tomli>=1.1.0; python_version < '3.11'",
    ],
    extras_require={
        "test": ["pytest>=7.0"],
    },
    entry_points={
        "console_scripts": [
            "predrec=predrec.cli:main",
            "predrec-fit=predrec.tools.fit_tool:main",
            "predrec-decide=predrec.tools.decide_tool:main",
            "predrec-simulate=predrec.tools.simulate_tool:main",
            "predrec-baseball=predrec.tools.baseball_tool:main",
            "predrec-tune=predrec.tools.tune_tool:main",
        ],
    },
)
