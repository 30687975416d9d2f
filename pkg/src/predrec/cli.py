"""
predrec command-line entry point.

Subcommands: fit, decide, simulate, baseball, tune. Each accepts the common flags
--profile, --config PATH, --seed, --out DIR, --threads N (fallback: $PREDREC_THREADS).
Exit codes: 0 on success, 2 for invalid configuration or input format (with a JSON
diagnostic on stderr), 1 for any other failure.
"""

import argparse
import sys
from typing import List, Optional

from . import __version__
from .base import run_guarded
from .tools import baseball_tool, decide_tool, fit_tool, simulate_tool, tune_tool

__all__ = ['build_parser', 'main']

SUBCOMMANDS = {
    'fit': (fit_tool, 'Estimate a mixing distribution with the predictive recursion'),
    'decide': (decide_tool, 'Apply the plug-in empirical Bayes rule of a fit'),
    'simulate': (simulate_tool, 'Trace empirical Bayes risk and KL divergence by simulation'),
    'baseball': (baseball_tool, 'Run the batting-average prediction study'),
    'tune': (tune_tool, 'Tune the PR weight exponent on the batting study'),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='predrec',
        description='Predictive recursion for nonparametric empirical Bayes',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  predrec fit observations.csv --config fit.toml --out results/fit
  predrec decide results/fit observations.csv --out results/decide
  predrec simulate normal_kl --threads 4 --out results/normal_kl
  predrec baseball batting_2005.csv --out results/baseball
  predrec tune batting_2005.csv --gammas 0.5 0.7 0.9
        """
    )
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    subparsers = parser.add_subparsers(dest='command', metavar='COMMAND')
    subparsers.required = True
    for name, (module, description) in SUBCOMMANDS.items():
        subparser = subparsers.add_parser(name, help=description, description=description)
        module.add_arguments(subparser)
        subparser.set_defaults(execute=module.execute)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments, run the subcommand and return its exit code.

    Args:
        argv: Arguments without the program name (default: sys.argv[1:]).
    """
    args = build_parser().parse_args(argv)
    return run_guarded(lambda: args.execute(args))


if __name__ == "__main__":
    sys.exit(main())
