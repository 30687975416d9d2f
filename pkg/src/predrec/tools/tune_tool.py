"""
Tune Tool

Chooses the PR weight exponent gamma per group by minimizing the relative
prediction error of the batting study over a grid of gamma values.
"""

import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

import numpy as np

from ..base import FileBasedTool, RunManifest, run_guarded
from ..baseball.records import BattingRecord
from ..baseball.study import StudyConfig, tune_gamma
from .baseball_tool import BaseballTool, add_study_arguments, load_records, study_overrides

__all__ = ['TuneTool', 'gamma_grid', 'add_arguments', 'execute', 'main']

logger = logging.getLogger(__name__)


def gamma_grid(start: float = 0.05, stop: float = 1.0, step: float = 0.05) -> List[float]:
    """Evenly spaced gamma values from start to stop inclusive, rounded to 10 digits."""
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 10) for i in range(count)]


class TuneTool(BaseballTool):
    """Tool that tunes gamma for the batting study."""

    def run(self, records: List[BattingRecord], gammas: List[float], study_config: StudyConfig,
            output_dir: Optional[str] = None, manifest: Optional[RunManifest] = None,
            threads: int = 1) -> Dict[str, Any]:
        """
        Write tuning.csv (gamma, group, relative_error), tuning.json and manifest.json.

        Returns:
            Best gamma per group, the grid and the output directory.
        """
        manifest = manifest or RunManifest('tune')
        manifest.config = {**study_config.to_dict(), 'gammas': list(gammas)}
        manifest.seed = study_config.seed

        result = tune_gamma(records, gammas, study_config, threads=threads)
        summary = {'best_gamma': result.best, 'gammas': sorted(set(float(g) for g in gammas))}

        if output_dir:
            self.initialize_directories(output_dir)
        with self.staged_output() as staging:
            self.write_csv(result.curve, str(staging / 'tuning.csv'))
            self.write_json(summary, str(staging / 'tuning.json'))
            self.write_json(manifest.finish().to_dict(), str(staging / 'manifest.json'))
        return {**summary, 'output_dir': self.output_dir}


def add_arguments(parser: argparse.ArgumentParser) -> None:
    add_study_arguments(parser)
    parser.add_argument('--gammas', type=float, nargs='+', default=None,
                        help='Explicit gamma values (default: 0.05, 0.10, ..., 1.00)')
    parser.add_argument('--gamma-step', type=float, default=0.05,
                        help='Spacing of the default gamma grid')
    FileBasedTool.add_standard_arguments(parser)


def execute(args: argparse.Namespace) -> Dict[str, Any]:
    config = TuneTool.load_config(args.profile, args.config_file)
    tool = TuneTool(config)
    manifest = RunManifest('tune')
    records, _ = load_records(tool, args, manifest)
    gammas = args.gammas or gamma_grid(args.gamma_step, 1.0, args.gamma_step)
    study_config = tool.study_config(args.grid_nodes, **study_overrides(args))
    results = tool.run(records, gammas, study_config, args.out, manifest,
                       TuneTool.resolve_threads(args.threads))
    if args.console:
        for group, gamma in results['best_gamma'].items():
            logger.info(f"Best gamma for {group}: {gamma}")
    return results


def main():
    """
    Main function to run the tune tool as a command-line tool.
    """
    parser = argparse.ArgumentParser(
        description='Tune the PR weight exponent by minimizing prediction error',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Default 0.05-spaced grid
  predrec-tune batting_2005.csv --out results/tune --threads 4

  # A few explicit values on a synthetic season
  predrec-tune --simulate --gammas 0.5 0.7 0.9 --permutations 10
        """
    )
    add_arguments(parser)
    args = parser.parse_args()
    sys.exit(run_guarded(lambda: execute(args)))


if __name__ == "__main__":
    main()
