# Configuration package initialization
"""
predrec - Configuration System

This package provides the profile-based configuration system for the predrec tools.

Quick Usage:
    # Import the pre-configured instance
    from config import config

    gamma = config.get('pr.gamma')

    # Or create a custom instance
    from config import Config
    custom_config = Config(profile='study_2005')

For detailed usage instructions, see the README.md in this directory.
"""

from config.config import Config, config

__all__ = ['Config', 'config']
