"""
Tools Package

One command-line tool per task: fitting a mixing distribution, applying decision
rules, running simulation scenarios, the batting study and gamma tuning.
"""

from ..base import FileBasedTool
from .fit_tool import FitTool
from .decide_tool import DecideTool
from .simulate_tool import SimulateTool
from .baseball_tool import BaseballTool
from .tune_tool import TuneTool

__all__ = [
    'FileBasedTool',
    'FitTool',
    'DecideTool',
    'SimulateTool',
    'BaseballTool',
    'TuneTool',
]
