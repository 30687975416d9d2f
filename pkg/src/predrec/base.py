"""
Base classes for predrec tools.

This module provides the base classes shared by every command-line tool:
configuration lookup, logging setup, CSV/JSON I/O and staged output directories.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from contextlib import contextmanager
from typing import Dict, Any, Optional, List, Iterator, Callable
import hashlib
import json
import logging
import os
import shutil
import sys
import tempfile
import time
from pathlib import Path

import pandas as pd

from . import __version__
from .errors import ConfigError, FormatError

logger = logging.getLogger(__name__)

THREADS_ENV_VAR = "PREDREC_THREADS"


class PRTool(ABC):
    """Base class for all predrec tools."""

    def __init__(self, config: Optional[Dict[str, Any]] = None) -> None:
        """
        Initialize the tool.

        Args:
            config: Optional configuration dictionary.
        """
        self.config = config or {}
        self.setup_logging()

    @staticmethod
    def add_standard_arguments(parser):
        """
        Add standard arguments that should be consistent across all command-line tools.

        Args:
            parser: The ArgumentParser instance to add arguments to
        """
        parser.add_argument("--profile", default=None,
                            help="Configuration profile to use (default: use default profile)")
        parser.add_argument("--config", dest="config_file", default=None,
                            help="TOML or JSON config file merged over the profile")
        parser.add_argument("--seed", type=int, default=None,
                            help="Root seed for every random stream (overrides config)")
        parser.add_argument("--out", default=None,
                            help="Output directory (default: general.output_path)")
        parser.add_argument("--threads", type=int, default=None,
                            help=f"Worker threads (fallback: ${THREADS_ENV_VAR}, then 1)")
        parser.add_argument("--console", action="store_true",
                            help="Log detailed output summary (in addition to regular logging)")

    @staticmethod
    def load_config(profile: Optional[str] = None,
                    config_file: Optional[str] = None) -> Dict[str, Any]:
        """
        Load configuration from a profile, optionally merged with a config file.

        Args:
            profile: Name of the profile to load. If None, uses the default profile.
            config_file: Optional TOML/JSON file whose values override the profile.

        Returns:
            The configuration dictionary.
        """
        from config.config import Config

        config_obj = Config(profile=profile)
        if config_file:
            config_obj.merge_file(config_file)
        config_data = config_obj.get()

        log_level = config_data.get('general', {}).get('log_level', 'INFO').upper()

        # Reset any existing handlers to avoid duplicated logs
        for handler in logging.root.handlers[:]:
            logging.root.removeHandler(handler)

        logging.basicConfig(
            level=getattr(logging, log_level, logging.INFO),
            format='%(asctime)s - %(levelname)s - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )
        logging.getLogger().setLevel(getattr(logging, log_level, logging.INFO))

        logging.debug(f"Logging initialized with level: {log_level}")

        return config_data

    @staticmethod
    def resolve_threads(threads: Optional[int] = None) -> int:
        """
        Resolve the worker count from the flag, the environment, or the default of 1.

        Args:
            threads: Value of --threads, if given.

        Returns:
            A positive worker count.
        """
        if threads is None:
            env_value = os.environ.get(THREADS_ENV_VAR)
            if env_value:
                try:
                    threads = int(env_value)
                except ValueError:
                    logger.warning(f"Ignoring non-integer {THREADS_ENV_VAR}={env_value!r}")
                    threads = 1
            else:
                threads = 1
        return max(1, threads)

    def setup_logging(self, level: int = logging.INFO):
        """
        Set up logging for this tool.

        Args:
            level: The logging level to use.
        """
        log_format = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
        logging.basicConfig(level=level, format=log_format)

    def get_config(self, key: str, default: Any = None) -> Any:
        """
        Get a configuration value.

        Args:
            key: The configuration key in dot notation.
            default: Default value if the key is not found.

        Returns:
            The configuration value, or the default if not found.
        """
        parts = key.split('.')
        value = self.config

        for part in parts:
            if isinstance(value, dict) and part in value:
                value = value[part]
            else:
                return default

        return value

    @abstractmethod
    def run(self, *args, **kwargs) -> Any:
        """
        Run the tool. Must be implemented by subclasses.

        Returns:
            The result of running the tool.
        """
        pass


class FileBasedTool(PRTool):
    """Base class for tools that read and write files."""

    OUTPUT_LEDGER = ".predrec_outputs.json"

    def __init__(self, config: Optional[Dict[str, Any]] = None) -> None:
        """
        Initialize the file-based tool.

        Args:
            config: Optional configuration dictionary.
        """
        super().__init__(config)
        self.output_dir = None

    def initialize_directories(self, output_dir: Optional[str] = None):
        """
        Resolve the output directory from the argument or configuration.

        The directory itself is only created when outputs are committed.

        Args:
            output_dir: Explicit output directory (wins over general.output_path).
        """
        self.output_dir = self.resolve_path(
            output_dir or self.get_config('general.output_path', 'output'))
        logger.info(f"Output directory: {self.output_dir}")

    def resolve_path(self, path: str) -> str:
        """
        Resolve a path, expanding user paths and environment variables.

        Args:
            path: The path to resolve.

        Returns:
            The resolved absolute path.
        """
        expanded_path = os.path.expanduser(os.path.expandvars(str(path)))
        return os.path.abspath(expanded_path)

    @contextmanager
    def staged_output(self, output_dir: Optional[str] = None) -> Iterator[Path]:
        """
        Stage outputs in a temporary directory and move them into place on success.

        Files written into the yielded directory appear in the output directory only
        if the block completes; on any exception the staging directory is removed and
        nothing is left behind. A commit first removes the files the previous commit into
        the same directory listed in its ledger, so reruns leave no stale outputs.

        Args:
            output_dir: Target directory (default: self.output_dir).

        Yields:
            Path of the staging directory.
        """
        target = Path(self.resolve_path(output_dir or self.output_dir or 'output'))
        target.parent.mkdir(parents=True, exist_ok=True)
        staging = Path(tempfile.mkdtemp(prefix=f".{target.name}-", dir=str(target.parent)))
        try:
            yield staging
        except BaseException:
            shutil.rmtree(staging, ignore_errors=True)
            raise
        target.mkdir(parents=True, exist_ok=True)
        self._clear_previous_outputs(target)
        written = sorted(item.name for item in staging.iterdir())
        for name in written:
            os.replace(str(staging / name), str(target / name))
        with open(target / self.OUTPUT_LEDGER, 'w', encoding='utf-8') as f:
            json.dump(written, f)
        shutil.rmtree(staging, ignore_errors=True)
        logger.info(f"Results written to {target}")

    def _clear_previous_outputs(self, target: Path) -> None:
        """Remove the files an earlier commit recorded in the ledger; nothing else is touched."""
        ledger = target / self.OUTPUT_LEDGER
        if not ledger.exists():
            return
        try:
            with open(ledger, 'r', encoding='utf-8') as f:
                previous = json.load(f)
        except json.JSONDecodeError:
            logger.warning(f"Unreadable output ledger in {target}; earlier outputs kept")
            return
        for name in previous:
            stale = target / Path(str(name)).name
            if stale.is_dir():
                shutil.rmtree(stale, ignore_errors=True)
            elif stale.exists():
                stale.unlink()
                logger.debug(f"Removed earlier output {stale}")

    def write_csv(self, frame: pd.DataFrame, output_path: str) -> str:
        """
        Write a DataFrame to a CSV file with full float precision.

        Args:
            frame: Data to write
            output_path: Path to the output CSV file

        Returns:
            Absolute path to the created CSV file
        """
        resolved_path = self.resolve_path(output_path)
        os.makedirs(os.path.dirname(resolved_path), exist_ok=True)
        if frame.empty:
            logger.warning(f"No data rows for {resolved_path}; writing header only.")
        frame.to_csv(resolved_path, index=False, float_format='%.17g', lineterminator='\n')
        logger.debug(f"CSV written to {resolved_path}")
        return resolved_path

    def read_csv(self, csv_file: str, required_columns: Optional[List[str]] = None) -> pd.DataFrame:
        """
        Read data from a CSV file.

        Args:
            csv_file: Path to the CSV file to read
            required_columns: Optional list of column names that must be present

        Returns:
            The CSV contents as a DataFrame

        Raises:
            FileNotFoundError: If the CSV file doesn't exist
            FormatError: If required columns are missing
        """
        resolved_path = self.resolve_path(csv_file)

        if not os.path.exists(resolved_path):
            raise FileNotFoundError(f"CSV file not found: {resolved_path}")

        frame = pd.read_csv(resolved_path, float_precision="round_trip")
        if required_columns:
            missing_columns = set(required_columns) - set(frame.columns)
            if missing_columns:
                raise FormatError(f"Required columns missing from CSV: {sorted(missing_columns)}. "
                                  f"Available columns: {list(frame.columns)}")

        logger.info(f"Read {len(frame)} rows from {resolved_path}")
        return frame

    def read_json(self, file_path: str) -> Any:
        """
        Read a JSON file.

        Args:
            file_path: Path to the JSON file.

        Returns:
            The parsed JSON content.
        """
        resolved_path = self.resolve_path(file_path)
        logger.debug(f"Reading JSON file: {resolved_path}")

        with open(resolved_path, 'r', encoding='utf-8') as f:
            return json.load(f)

    def write_json(self, data: Any, file_path: str, indent: int = 2) -> str:
        """
        Write data to a JSON file with sorted keys.

        Args:
            data: The data to write.
            file_path: Path to the output file.
            indent: Number of spaces for indentation (default: 2).

        Returns:
            The absolute path to the created file.
        """
        resolved_path = self.resolve_path(file_path)
        os.makedirs(os.path.dirname(resolved_path), exist_ok=True)

        with open(resolved_path, 'w', encoding='utf-8') as f:
            json.dump(data, f, indent=indent, sort_keys=True)
            f.write('\n')

        logger.debug(f"JSON data written to {resolved_path}")
        return resolved_path

    @staticmethod
    def file_digest(file_path: str) -> str:
        """
        SHA-256 digest of a file's bytes.

        Args:
            file_path: Path to the file.

        Returns:
            Hex digest string.
        """
        digest = hashlib.sha256()
        with open(file_path, 'rb') as f:
            for chunk in iter(lambda: f.read(1 << 16), b''):
                digest.update(chunk)
        return digest.hexdigest()


@dataclass
class RunManifest:
    """
    Provenance of one tool run, written as manifest.json next to its outputs.

    Attributes:
        subcommand: Tool that produced the outputs.
        config: Resolved settings the run used.
        seed: Root seed.
        inputs: Input path -> SHA-256 digest.
        version: predrec version.
        duration_seconds: Wall-clock duration.
    """

    subcommand: str
    config: Dict[str, Any] = field(default_factory=dict)
    seed: Optional[int] = None
    inputs: Dict[str, str] = field(default_factory=dict)
    version: str = ""
    duration_seconds: float = 0.0
    _started: float = field(default_factory=time.perf_counter, repr=False)

    def __post_init__(self):
        if not self.version:
            self.version = __version__

    def add_input(self, path: str) -> None:
        self.inputs[os.path.abspath(path)] = FileBasedTool.file_digest(path)

    def finish(self) -> "RunManifest":
        self.duration_seconds = round(time.perf_counter() - self._started, 6)
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {"subcommand": self.subcommand, "config": self.config, "seed": self.seed,
                "inputs": self.inputs, "version": self.version,
                "duration_seconds": self.duration_seconds}


def run_guarded(action: Callable[[], Any]) -> int:
    """
    Run a tool action and translate failures into exit codes.

    Configuration and input-format errors print a one-line JSON diagnostic on stderr
    and return 2; any other failure is logged and returns 1.

    Args:
        action: Zero-argument callable doing the work.

    Returns:
        The process exit code.
    """
    try:
        action()
        return 0
    except (ConfigError, FormatError) as e:
        diagnostic = {"error": type(e).__name__, "field": getattr(e, 'field', None), "message": str(e)}
        print(json.dumps(diagnostic, sort_keys=True), file=sys.stderr)
        logger.error(f"Error: {e}")
        return 2
    except FileNotFoundError as e:
        logger.error(f"File not found: {e}")
        return 1
    except ValueError as e:
        logger.error(f"Invalid input: {e}")
        return 1
    except Exception as e:
        logger.error(f"An unexpected error occurred: {e}")
        return 1
