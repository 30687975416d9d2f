"""
Configuration Reader for predrec

A lightweight configuration system for the predrec tools that provides:
- Profile-based configuration management (profiles/<profile>.json)
- Optional TOML or JSON config files merged over the profile
- Hierarchical configuration with dot-notation access
- Lookup of the shipped simulation scenarios (scenarios/<name>.json)

Usage:
    # Use the default singleton instance
    from config import config
    gamma = config.get('pr.gamma')

    # Create a custom instance with a specific profile
    from config import Config
    custom_config = Config(profile='study_2005')

The configuration system loads settings in this order (later overrides earlier):
1. Default or specified profile (profiles/<profile>.json)
2. Config files passed to merge_file() (TOML or JSON)
Command-line flags are applied on top by each tool.
"""

import json
from typing import Dict, Any, List, Optional
from pathlib import Path

from predrec.base import FileBasedTool, logger
from predrec.errors import ConfigError

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


class Config(FileBasedTool):
    """
    A JSON/TOML configuration reader for the predrec tools.

    Attributes:
        config_dir (str): Directory containing profile JSON files
        scenario_dir (str): Directory containing simulation scenario JSON files
        profile (str): Currently active profile name
        data (dict): Loaded configuration data
    """

    DEFAULT_CONFIG_DIR = str(Path(__file__).parent / 'profiles')
    DEFAULT_SCENARIO_DIR = str(Path(__file__).parent / 'scenarios')
    DEFAULT_PROFILE = "default"

    def __init__(self, config_dir: str = None, scenario_dir: str = None, profile: str = None,
                 config: Optional[Dict[str, Any]] = None):
        """
        Initialize the Config instance.

        Args:
            config_dir (str, optional): Directory for config profiles.
            scenario_dir (str, optional): Directory for simulation scenarios.
            profile (str, optional): Profile name to use. Defaults to 'default'.
            config (dict, optional): Base configuration dictionary for tool compatibility.
        """
        super().__init__(config)

        self.config_dir = config_dir or self.DEFAULT_CONFIG_DIR
        self.scenario_dir = scenario_dir or self.DEFAULT_SCENARIO_DIR
        self.profile = profile or self.DEFAULT_PROFILE
        self.data = {}

        self._load()

    def run(self) -> Dict[str, Any]:
        """
        Run the config tool (implementation of abstract method from PRTool).

        Returns:
            The full configuration dictionary.
        """
        return self.get_full_config()

    def _load(self):
        """
        Load configuration from the profile JSON file.

        A missing non-default profile leaves an empty configuration and logs a warning;
        a malformed profile is a ConfigError.
        """
        profile_path = Path(self.config_dir) / f"{self.profile}.json"

        if not profile_path.exists():
            logger.warning(f"Profile '{self.profile}' not found. Using empty configuration.")
            self.data = {}
            return

        try:
            self.data = self.read_json(str(profile_path))
        except json.JSONDecodeError as e:
            raise ConfigError(f"Profile '{self.profile}' is not valid JSON: {e}", field="profile")
        logger.info(f"Loaded configuration from '{self.profile}'")

    @staticmethod
    def read_config_file(path: str) -> Dict[str, Any]:
        """
        Read a TOML (.toml) or JSON (anything else) config file.

        Args:
            path: File to read.

        Returns:
            The parsed mapping.

        Raises:
            ConfigError: If the file cannot be parsed or is not a mapping.
        """
        file_path = Path(path)
        if not file_path.exists():
            raise ConfigError(f"Config file not found: {path}", field="config")
        try:
            if file_path.suffix.lower() == '.toml':
                with open(file_path, 'rb') as f:
                    data = tomllib.load(f)
            else:
                with open(file_path, 'r', encoding='utf-8') as f:
                    data = json.load(f)
        except (tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
            raise ConfigError(f"Cannot parse config file {path}: {e}", field="config")
        if not isinstance(data, dict):
            raise ConfigError(f"Config file {path} must contain a mapping", field="config")
        return data

    def merge_file(self, path: str) -> None:
        """
        Deep-merge a TOML/JSON config file over the loaded profile.

        Args:
            path: File to merge.
        """
        self._deep_merge(self.data, self.read_config_file(path))
        logger.info(f"Merged configuration file '{path}'")

    def _deep_merge(self, target: Dict[str, Any], source: Dict[str, Any]):
        """
        Deep merge two dictionaries.

        Args:
            target (dict): The target dictionary to merge into
            source (dict): The source dictionary to merge from

        Note:
            Recursively merges nested dictionaries. Non-dict values in source
            will completely replace values in target.
        """
        for key, value in source.items():
            if key in target and isinstance(target[key], dict) and isinstance(value, dict):
                self._deep_merge(target[key], value)
            else:
                target[key] = value

    def get(self, path: str = None, default: Any = None) -> Any:
        """
        Get a configuration value by path using dot notation.

        Args:
            path (str, optional): Dot notation path to the value (e.g., "pr.gamma").
                If None, returns the entire configuration dictionary.
            default (Any, optional): Value to return if path not found.

        Returns:
            Any: The configuration value at the specified path, or default if not found.

        Examples:
            >>> config.get('study.gamma_pitchers')
            0.5
            >>> config.get('pr.missing', 1)
            1
        """
        if path is None:
            return self.data

        current = self.data
        if path:
            for key in path.split('.'):
                if isinstance(current, dict) and key in current:
                    current = current[key]
                else:
                    return default

        return current

    def list_profiles(self) -> List[str]:
        """
        List all available profile names.

        Returns:
            List[str]: Profile names (without .json extension) in the config directory.
        """
        return sorted(f.stem for f in Path(self.config_dir).glob("*.json"))

    def list_scenarios(self) -> List[str]:
        """
        List the shipped simulation scenario names.

        Returns:
            List[str]: Scenario names (without .json extension).
        """
        return sorted(f.stem for f in Path(self.scenario_dir).glob("*.json"))

    def scenario_path(self, name: str) -> str:
        """
        Resolve a scenario name or path to a scenario file.

        Args:
            name: A shipped scenario name or a path to a JSON file.

        Returns:
            str: Absolute path of the scenario file.

        Raises:
            ConfigError: If neither a file nor a shipped scenario matches.
        """
        candidate = Path(name)
        if candidate.exists():
            return str(candidate.resolve())
        shipped = Path(self.scenario_dir) / f"{name}.json"
        if shipped.exists():
            return str(shipped)
        raise ConfigError(f"Unknown scenario '{name}'. Shipped scenarios: {self.list_scenarios()}",
                          field="scenario")

    def get_full_config(self) -> Dict[str, Any]:
        """
        Return the full configuration dictionary.

        Returns:
            Dict[str, Any]: Complete merged configuration.
        """
        return self.data


# Global singleton instance for convenient access throughout the application
# Usage: from config import config; value = config.get('some.key')
config = Config()
