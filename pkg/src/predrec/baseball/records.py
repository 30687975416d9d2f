"""
Batting records: ingestion, the arcsine transform and a synthetic season generator.

Input CSV schema: player_id,is_pitcher,half,at_bats,hits (one row per player per half).
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..errors import DomainError, FormatError

__all__ = [
    'Half', 'BattingRecord', 'RowError', 'IngestResult', 'REQUIRED_COLUMNS',
    'ingest', 'transform', 'transform_counts', 'records_frame', 'simulate_season', 'write_records',
]

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = ['player_id', 'is_pitcher', 'half', 'at_bats', 'hits']

_TRUE = {'1', 'true', 't', 'yes', 'y'}
_FALSE = {'0', 'false', 'f', 'no', 'n'}


class Half(str, Enum):
    FIRST = "first"
    SECOND = "second"

    @classmethod
    def parse(cls, value: str) -> "Half":
        key = str(value).strip().lower()
        aliases = {'first': cls.FIRST, '1': cls.FIRST, 'h1': cls.FIRST,
                   'second': cls.SECOND, '2': cls.SECOND, 'h2': cls.SECOND}
        if key not in aliases:
            raise DomainError(f"half must be 'first' or 'second', got '{value}'")
        return aliases[key]


@dataclass(frozen=True)
class BattingRecord:
    """One player's at-bats and hits in one half of the season."""

    player_id: str
    is_pitcher: bool
    half: Half
    at_bats: int
    hits: int

    def __post_init__(self):
        if not str(self.player_id).strip():
            raise DomainError("player_id must not be empty")
        if self.at_bats < 0:
            raise DomainError(f"at_bats must be >= 0, got {self.at_bats}")
        if not 0 <= self.hits <= self.at_bats:
            raise DomainError(f"hits must lie in [0, at_bats={self.at_bats}], got {self.hits}")


@dataclass(frozen=True)
class RowError:
    """A rejected input row; line counts the header as line 1."""

    line: int
    message: str


@dataclass
class IngestResult:
    records: List[BattingRecord] = field(default_factory=list)
    errors: List[RowError] = field(default_factory=list)


def _parse_flag(value: str) -> bool:
    key = str(value).strip().lower()
    if key in _TRUE:
        return True
    if key in _FALSE:
        return False
    raise DomainError(f"is_pitcher must be 0/1 or true/false, got '{value}'")


def _parse_count(value: str, name: str) -> int:
    text = str(value).strip()
    try:
        number = float(text)
    except ValueError:
        raise DomainError(f"{name} must be an integer, got '{value}'")
    if not number.is_integer():
        raise DomainError(f"{name} must be an integer, got '{value}'")
    return int(number)


def ingest(path: str) -> IngestResult:
    """
    Read and validate a batting CSV.

    Malformed rows are collected with their line numbers and skipped.

    Args:
        path: CSV file with header player_id,is_pitcher,half,at_bats,hits.

    Returns:
        IngestResult with the valid records and the row errors.

    Raises:
        FileNotFoundError: If the file does not exist.
        FormatError: If required columns are missing.
    """
    if not Path(path).exists():
        raise FileNotFoundError(f"Batting data not found: {path}")
    frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    frame.columns = [str(c).strip() for c in frame.columns]
    missing = [c for c in REQUIRED_COLUMNS if c not in frame.columns]
    if missing:
        raise FormatError(f"Batting data {path} is missing columns: {', '.join(missing)}")

    result = IngestResult()
    for offset, row in enumerate(frame[REQUIRED_COLUMNS].itertuples(index=False)):
        line = offset + 2
        try:
            result.records.append(BattingRecord(
                player_id=str(row.player_id).strip(),
                is_pitcher=_parse_flag(row.is_pitcher),
                half=Half.parse(row.half),
                at_bats=_parse_count(row.at_bats, 'at_bats'),
                hits=_parse_count(row.hits, 'hits'),
            ))
        except DomainError as e:
            result.errors.append(RowError(line, str(e)))

    if result.errors:
        logger.warning(f"Rejected {len(result.errors)} row(s) of {path}; first: "
                       f"line {result.errors[0].line}: {result.errors[0].message}")
    logger.info(f"Read {len(result.records)} batting records from {path}")
    return result


def transform(record: BattingRecord) -> Tuple[float, float]:
    """
    Variance-stabilizing transform X = arcsin(sqrt((Y + 1/4) / (n + 1/2))), var 1/(4n).

    Raises:
        DomainError: If the record has no at-bats.
    """
    x, v = transform_counts([record.hits], [record.at_bats])
    return float(x[0]), float(v[0])


def transform_counts(hits: Sequence[int], at_bats: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized transform over arrays of hits and at-bats."""
    hits = np.asarray(hits, dtype=float)
    at_bats = np.asarray(at_bats, dtype=float)
    if np.any(at_bats < 1):
        raise DomainError("the transform needs at_bats >= 1")
    if np.any(hits < 0) or np.any(hits > at_bats):
        raise DomainError("hits must lie in [0, at_bats]")
    return np.arcsin(np.sqrt((hits + 0.25) / (at_bats + 0.5))), 1.0 / (4.0 * at_bats)


def records_frame(records: Sequence[BattingRecord]) -> pd.DataFrame:
    """Records as a DataFrame with the input column layout."""
    return pd.DataFrame({
        'player_id': [r.player_id for r in records],
        'is_pitcher': [bool(r.is_pitcher) for r in records],
        'half': [r.half.value for r in records],
        'at_bats': np.array([r.at_bats for r in records], dtype=np.int64),
        'hits': np.array([r.hits for r in records], dtype=np.int64),
    }, columns=REQUIRED_COLUMNS)


def simulate_season(n_pitchers: int = 90, n_nonpitchers: int = 520, seed: int = 0,
                    pitcher_prior: Tuple[float, float] = (14.0, 86.0),
                    nonpitcher_prior: Tuple[float, float] = (52.0, 148.0),
                    pitcher_at_bats: Tuple[int, int] = (2, 70),
                    nonpitcher_at_bats: Tuple[int, int] = (2, 320)) -> List[BattingRecord]:
    """
    Synthetic two-half season with Beta-distributed true averages.

    Each player gets a true average theta from the group prior, independent uniform
    at-bat counts for both halves and binomial hits. Low at-bat ranges make some
    players fall below the eligibility cutoffs.

    Args:
        n_pitchers: Number of pitchers.
        n_nonpitchers: Number of non-pitchers.
        seed: Seed of the generator.
        pitcher_prior: Beta(a, b) of pitcher averages.
        nonpitcher_prior: Beta(a, b) of non-pitcher averages.
        pitcher_at_bats: Inclusive at-bat range per half for pitchers.
        nonpitcher_at_bats: Inclusive at-bat range per half for non-pitchers.

    Returns:
        Records ordered by player, first half then second half.
    """
    rng = np.random.default_rng(seed)
    records: List[BattingRecord] = []
    groups = [(True, n_pitchers, pitcher_prior, pitcher_at_bats, 'P'),
              (False, n_nonpitchers, nonpitcher_prior, nonpitcher_at_bats, 'H')]
    for is_pitcher, count, (a, b), (lo, hi), prefix in groups:
        thetas = rng.beta(a, b, size=count)
        at_bats = rng.integers(lo, hi + 1, size=(count, 2))
        hits = rng.binomial(at_bats, thetas[:, None])
        for i in range(count):
            player_id = f"{prefix}{i + 1:04d}"
            for column, half in enumerate(Half):
                records.append(BattingRecord(player_id, is_pitcher, half,
                                             int(at_bats[i, column]), int(hits[i, column])))
    logger.info(f"Simulated {n_pitchers} pitchers and {n_nonpitchers} non-pitchers (seed {seed})")
    return records


def write_records(records: Sequence[BattingRecord], path: str) -> str:
    """Write records in the ingest schema (is_pitcher as 1/0)."""
    frame = records_frame(records)
    frame['is_pitcher'] = frame['is_pitcher'].astype(int)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator='\n')
    logger.info(f"Wrote {len(frame)} batting records to {path}")
    return str(path)
