"""
Batting-average study: record ingestion, comparison estimators and the
train-on-first-half, predict-second-half pipeline.
"""

from .records import BattingRecord, Half, ingest, transform
from .baselines import NormalMeansData, group_mean, james_stein, naive, parametric_eb_mm
from .study import StudyConfig, StudyReport, run_study, tune_gamma

__all__ = [
    'BattingRecord', 'Half', 'ingest', 'transform',
    'NormalMeansData', 'naive', 'group_mean', 'james_stein', 'parametric_eb_mm',
    'StudyConfig', 'StudyReport', 'run_study', 'tune_gamma',
]
