"""
Baseball Tool

Runs the batting-average prediction study on a batting CSV (or a synthetic season):
per-group PR fits on first-half counts, second-half predictions on the arcsine scale,
relative prediction errors of every method, and prior density exports.
"""

import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

import pandas as pd

from ..base import FileBasedTool, RunManifest, run_guarded
from ..baseball.records import BattingRecord, ingest, simulate_season, write_records
from ..baseball.study import StudyConfig, run_study
from ..core.mixing import GridSpec
from ..errors import ConfigError

__all__ = ['BaseballTool', 'add_study_arguments', 'study_overrides', 'load_records',
           'add_arguments', 'execute', 'main']

logger = logging.getLogger(__name__)


def add_study_arguments(parser: argparse.ArgumentParser) -> None:
    """Flags overriding every study setting."""
    parser.add_argument('data', nargs='?', default=None,
                        help='Batting CSV (player_id,is_pitcher,half,at_bats,hits)')
    parser.add_argument('--simulate', action='store_true',
                        help='Use a synthetic season instead of a data file')
    parser.add_argument('--min-train-at-bats', type=int, default=None,
                        help='First-half at-bats needed for training (default: 11)')
    parser.add_argument('--min-test-at-bats', type=int, default=None,
                        help='Second-half at-bats needed for scoring (default: 11)')
    parser.add_argument('--gamma-pitchers', type=float, default=None,
                        help='PR weight exponent for pitchers (default: 0.5)')
    parser.add_argument('--gamma-nonpitchers', type=float, default=None,
                        help='PR weight exponent for non-pitchers (default: 0.9)')
    parser.add_argument('--f0-pitchers', type=float, nargs=2, metavar=('A', 'B'), default=None,
                        help='Beta(A, B) initial guess for pitchers (default: 30 120)')
    parser.add_argument('--f0-nonpitchers', type=float, nargs=2, metavar=('A', 'B'), default=None,
                        help='Beta(A, B) initial guess for non-pitchers (default: 30 90)')
    parser.add_argument('--permutations', type=int, default=None,
                        help='PR permutations per group (default: 100)')
    parser.add_argument('--grid-nodes', type=int, default=None,
                        help='Theta grid nodes (default: 2000)')


def study_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {
        'min_train_at_bats': args.min_train_at_bats, 'min_test_at_bats': args.min_test_at_bats,
        'gamma_pitchers': args.gamma_pitchers, 'gamma_nonpitchers': args.gamma_nonpitchers,
        'f0_pitchers': args.f0_pitchers, 'f0_nonpitchers': args.f0_nonpitchers,
        'n_permutations': args.permutations, 'seed': args.seed,
    }


class BaseballTool(FileBasedTool):
    """Tool that runs the batting-average study."""

    def __init__(self, config: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(config)
        self.initialize_directories()

    def study_config(self, grid_nodes: Optional[int] = None, **overrides: Any) -> StudyConfig:
        """StudyConfig from the 'study' section, with non-None overrides winning."""
        section = dict(self.get_config('study') or {})
        grid_data = dict(section.pop('grid', None) or {})
        if grid_nodes is not None:
            grid_data['node_count'] = grid_nodes
        return StudyConfig.from_dict(section, grid=GridSpec.from_dict(grid_data), **overrides)

    def run(self, records: List[BattingRecord], study_config: StudyConfig,
            output_dir: Optional[str] = None, manifest: Optional[RunManifest] = None,
            rejected: Optional[pd.DataFrame] = None, threads: int = 1) -> Dict[str, Any]:
        """
        Write report.json, priors_<group>_<method>.csv, predictions_<group>.csv and manifest.json.

        Args:
            records: Batting records.
            study_config: Study settings.
            output_dir: Output directory.
            manifest: Manifest carrying the input digests.
            rejected: Rejected input rows, written as rejected_rows.csv when nonempty.
            threads: Worker threads.

        Returns:
            The report dictionary plus the output directory.
        """
        manifest = manifest or RunManifest('baseball')
        manifest.config = study_config.to_dict()
        manifest.seed = study_config.seed

        report = run_study(records, study_config, threads=threads)
        data = report.to_dict()

        if output_dir:
            self.initialize_directories(output_dir)
        with self.staged_output() as staging:
            self.write_json(data, str(staging / 'report.json'))
            for name, result in report.groups.items():
                for method, frame in result.priors.items():
                    self.write_csv(frame, str(staging / f"priors_{name}_{method}.csv"))
                self.write_csv(result.predictions, str(staging / f"predictions_{name}.csv"))
            if rejected is not None and not rejected.empty:
                self.write_csv(rejected, str(staging / 'rejected_rows.csv'))
            self.write_json(manifest.finish().to_dict(), str(staging / 'manifest.json'))
        return {**data, 'output_dir': self.output_dir}


def load_records(tool: FileBasedTool, args: argparse.Namespace, manifest: RunManifest):
    """
    Records from the data file, or a synthetic season with --simulate.

    Returns:
        (records, rejected rows as a DataFrame)
    """
    if args.simulate:
        seed = args.seed if args.seed is not None else tool.get_config('study.seed', 0)
        records = simulate_season(seed=seed)
        return records, pd.DataFrame(columns=['line', 'message'])
    if not args.data:
        raise ConfigError("Either a batting CSV or --simulate is required", field="data")
    manifest.add_input(args.data)
    result = ingest(args.data)
    rejected = pd.DataFrame([{'line': e.line, 'message': e.message} for e in result.errors],
                            columns=['line', 'message'])
    return result.records, rejected


def add_arguments(parser: argparse.ArgumentParser) -> None:
    add_study_arguments(parser)
    parser.add_argument('--write-data', default=None,
                        help='Also write the records used (e.g. the synthetic season) to this CSV')
    FileBasedTool.add_standard_arguments(parser)


def execute(args: argparse.Namespace) -> Dict[str, Any]:
    config = BaseballTool.load_config(args.profile, args.config_file)
    tool = BaseballTool(config)
    manifest = RunManifest('baseball')
    records, rejected = load_records(tool, args, manifest)
    if args.write_data:
        write_records(records, tool.resolve_path(args.write_data))
    study_config = tool.study_config(args.grid_nodes, **study_overrides(args))
    results = tool.run(records, study_config, args.out, manifest, rejected,
                       BaseballTool.resolve_threads(args.threads))
    if args.console:
        for method, groups in results['relative_errors'].items():
            formatted = ", ".join(f"{group} {value:.3f}" for group, value in groups.items())
            logger.info(f"{method}: {formatted}")
    return results


def main():
    """
    Main function to run the baseball tool as a command-line tool.
    """
    parser = argparse.ArgumentParser(
        description='Batting-average prediction study with PR and comparison estimators',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Study on a batting CSV with the default settings
  predrec-baseball batting_2005.csv --out results/baseball --console

  # Synthetic season, fewer permutations
  predrec-baseball --simulate --permutations 10 --seed 3
        """
    )
    add_arguments(parser)
    args = parser.parse_args()
    sys.exit(run_guarded(lambda: execute(args)))


if __name__ == "__main__":
    main()
