"""
Decide Tool

Applies the plug-in empirical Bayes rule of a fitted mixing distribution to every
row of an observations CSV: posterior means for estimation problems, posterior
null probabilities and a0/a1 actions for test problems.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Optional

from ..base import FileBasedTool, RunManifest, run_guarded
from ..core.decision import DecisionKind, DecisionProblem, apply_rule
from ..core.kernels import KernelFamily, KernelModel
from ..core.mixing import read_measure
from ..errors import ConfigError
from .fit_tool import read_observations

__all__ = ['DecideTool', 'add_arguments', 'execute', 'main']

logger = logging.getLogger(__name__)


class DecideTool(FileBasedTool):
    """Tool that runs decision rules built from a fit directory."""

    def __init__(self, config: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(config)
        self.initialize_directories()

    def load_fit(self, fit_dir: str):
        """
        Read mixing.csv (plus atoms sidecar) and the kernel recorded in fit.json.

        Raises:
            FileNotFoundError: If the fit directory lacks its outputs.
        """
        directory = Path(self.resolve_path(fit_dir))
        for name in ('mixing.csv', 'fit.json'):
            if not (directory / name).exists():
                raise FileNotFoundError(f"{name} not found in fit directory {directory}")
        summary = self.read_json(str(directory / 'fit.json'))
        model = KernelModel.from_dict(summary['kernel'])
        return read_measure(str(directory / 'mixing.csv')), model, directory

    def check_kernel(self, model: KernelModel, family: Optional[str]) -> None:
        """The problem's kernel (flag or problem.kernel.family) must match the fit's."""
        requested = family or self.get_config('problem.kernel.family')
        if requested is None:
            return
        if KernelFamily.parse(requested) is not model.family:
            raise ConfigError(f"Problem kernel '{requested}' does not match the fitted kernel "
                              f"'{model.family.value}'", field="problem.kernel.family")

    def run(self, fit_dir: str, data_file: str, output_dir: Optional[str] = None,
            kernel_family: Optional[str] = None) -> Dict[str, Any]:
        """
        Write decisions.csv (id, y, estimate or posterior_prob, action) and manifest.json.

        Args:
            fit_dir: Output directory of a fit run.
            data_file: Observations CSV.
            output_dir: Output directory.
            kernel_family: Kernel the problem assumes; must match the fit.

        Returns:
            Summary with the row count and output directory.
        """
        manifest = RunManifest('decide')
        F, model, directory = self.load_fit(fit_dir)
        self.check_kernel(model, kernel_family)
        problem = DecisionProblem.from_dict(self.get_config('problem'))
        data = read_observations(self, data_file)

        for name in ('mixing.csv', 'fit.json'):
            manifest.add_input(str(directory / name))
        manifest.add_input(data_file)
        manifest.config = {'problem': problem.to_dict(), 'kernel': model.to_dict()}

        decisions = apply_rule(F, model, problem, data)

        if output_dir:
            self.initialize_directories(output_dir)
        with self.staged_output() as staging:
            self.write_csv(decisions, str(staging / 'decisions.csv'))
            self.write_json(manifest.finish().to_dict(), str(staging / 'manifest.json'))

        summary: Dict[str, Any] = {'output_dir': self.output_dir, 'rows': len(decisions),
                                   'kind': problem.kind.value}
        if problem.kind is DecisionKind.TEST:
            summary['a0'] = int((decisions['action'] == 'a0').sum())
            summary['threshold'] = problem.threshold
        return summary


def add_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('fit_dir', help='Output directory of a previous fit run')
    parser.add_argument('data', help='Observations CSV to decide on')
    parser.add_argument('--kernel', default=None,
                        help='Kernel family the problem assumes (checked against the fit)')
    FileBasedTool.add_standard_arguments(parser)


def execute(args: argparse.Namespace) -> Dict[str, Any]:
    config = DecideTool.load_config(args.profile, args.config_file)
    tool = DecideTool(config)
    results = tool.run(args.fit_dir, args.data, args.out, args.kernel)
    if args.console:
        logger.info(f"Rows decided: {results['rows']} ({results['kind']})")
        if 'a0' in results:
            logger.info(f"a0 chosen for {results['a0']} rows at threshold r={results['threshold']:.4g}")
    return results


def main():
    """
    Main function to run the decide tool as a command-line tool.
    """
    parser = argparse.ArgumentParser(
        description='Apply the plug-in empirical Bayes rule of a fitted prior',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Posterior means under the fitted prior
  predrec-decide results/fit observations.csv --out results/decide

  # Two-point test using the problem section of a config file
  predrec-decide results/fit observations.csv --config test_problem.toml
        """
    )
    add_arguments(parser)
    args = parser.parse_args()
    sys.exit(run_guarded(lambda: execute(args)))


if __name__ == "__main__":
    main()
