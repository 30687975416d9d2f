"""
Batting-average prediction study.

First-half hits and at-bats train every method, second-half averages on the arcsine
scale are predicted, and each method is scored by

    TSE(delta) = sum over test players of (X'_i - delta_i)^2 - 1/(4 n'_i),

divided by the same statistic for the naive predictor X_i. Pitchers and non-pitchers
are handled as separate groups with their own PR weight exponent and Beta initial guess.
"""

import hashlib
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from ..core.decision import posterior_expectations
from ..core.kernels import KernelModel, Observations
from ..core.mixing import GridSpec, MixingMeasure, cdf, from_density, init_beta, moment
from ..core.recursion import PrConfig, PrFit, derive_seed, fit
from ..errors import ConfigError, DomainError
from .baselines import BASELINES, NormalMeansData, parametric_eb_mm_prior
from .records import BattingRecord, Half, records_frame, transform_counts

__all__ = [
    'Group', 'StudyConfig', 'GroupResult', 'StudyReport', 'TuningResult',
    'PUBLISHED_RELATIVE_ERRORS', 'PUBLISHED_PLAYER_COUNTS', 'METHODS',
    'player_table', 'run_study', 'tune_gamma', 'best_gamma',
]

logger = logging.getLogger(__name__)


class Group(str, Enum):
    PITCHERS = "pitchers"
    NONPITCHERS = "nonpitchers"


METHODS = ['naive', 'group_mean', 'james_stein', 'parametric_eb_mm', 'pr']

# Relative prediction errors reported for the 2005 season, kept for comparison.
PUBLISHED_RELATIVE_ERRORS: Dict[str, Dict[str, float]] = {
    'naive': {'pitchers': 1.0, 'nonpitchers': 1.0},
    'group_mean': {'pitchers': 0.127, 'nonpitchers': 0.378},
    'parametric_eb_mm': {'pitchers': 0.129, 'nonpitchers': 0.387},
    'parametric_eb_ml': {'pitchers': 0.117, 'nonpitchers': 0.398},
    'nonparametric_eb': {'pitchers': 0.212, 'nonpitchers': 0.372},
    'james_stein': {'pitchers': 0.164, 'nonpitchers': 0.359},
    'hierarchical_bayes': {'pitchers': 0.128, 'nonpitchers': 0.391},
    'mixfdr': {'pitchers': 0.156, 'nonpitchers': 0.314},
    'pr': {'pitchers': 0.096, 'nonpitchers': 0.353},
}
PUBLISHED_PLAYER_COUNTS = {
    'training': {'pitchers': 81, 'nonpitchers': 486},
    'test': {'pitchers': 64, 'nonpitchers': 435},
}


@dataclass(frozen=True)
class StudyConfig:
    """
    Settings of the study.

    Attributes:
        min_train_at_bats: First-half at-bats needed to enter training.
        min_test_at_bats: Second-half at-bats needed to be scored.
        gamma_pitchers: PR weight exponent for pitchers.
        gamma_nonpitchers: PR weight exponent for non-pitchers.
        f0_pitchers: Beta(a, b) initial guess for pitchers.
        f0_nonpitchers: Beta(a, b) initial guess for non-pitchers.
        n_permutations: Orderings averaged by PR.
        seed: Root seed.
        grid: Theta grid (inside (0, 1)).
        reference_averages: Batting averages at which prior tail masses are reported.
    """

    min_train_at_bats: int = 11
    min_test_at_bats: int = 11
    gamma_pitchers: float = 0.5
    gamma_nonpitchers: float = 0.9
    f0_pitchers: Tuple[float, float] = (30.0, 120.0)
    f0_nonpitchers: Tuple[float, float] = (30.0, 90.0)
    n_permutations: int = 100
    seed: int = 0
    grid: GridSpec = field(default_factory=GridSpec)
    reference_averages: Tuple[float, ...] = (0.228, 0.324)

    def __post_init__(self):
        for name in ('gamma_pitchers', 'gamma_nonpitchers'):
            value = float(getattr(self, name))
            if not 0.0 < value <= 1.0:
                raise ConfigError(f"{name}={value} must lie in (0, 1]", field=f"study.{name}")
            object.__setattr__(self, name, value)
        for name in ('f0_pitchers', 'f0_nonpitchers'):
            shape = tuple(float(v) for v in getattr(self, name))
            if len(shape) != 2 or min(shape) <= 0:
                raise ConfigError(f"{name} must be two positive Beta parameters, got {list(shape)}",
                                  field=f"study.{name}")
            object.__setattr__(self, name, shape)
        for name in ('min_train_at_bats', 'min_test_at_bats'):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1", field=f"study.{name}")
            object.__setattr__(self, name, int(getattr(self, name)))
        lo, hi = self.grid.bounds
        if lo <= 0.0 or hi >= 1.0:
            raise ConfigError(f"study grid must lie inside (0, 1), got [{lo}, {hi}]", field="grid.bounds")
        object.__setattr__(self, 'reference_averages', tuple(float(c) for c in self.reference_averages))

    def gamma(self, group: Group) -> float:
        return self.gamma_pitchers if group is Group.PITCHERS else self.gamma_nonpitchers

    def f0(self, group: Group) -> Tuple[float, float]:
        return self.f0_pitchers if group is Group.PITCHERS else self.f0_nonpitchers

    def to_dict(self) -> Dict[str, Any]:
        return {
            'min_train_at_bats': self.min_train_at_bats, 'min_test_at_bats': self.min_test_at_bats,
            'gamma_pitchers': self.gamma_pitchers, 'gamma_nonpitchers': self.gamma_nonpitchers,
            'f0_pitchers': list(self.f0_pitchers), 'f0_nonpitchers': list(self.f0_nonpitchers),
            'n_permutations': int(self.n_permutations), 'seed': int(self.seed),
            'grid': self.grid.to_dict(), 'reference_averages': list(self.reference_averages),
        }

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]], grid: Optional[GridSpec] = None,
                  **overrides: Any) -> "StudyConfig":
        """Build from the 'study' config section; non-None keyword overrides win."""
        data = dict(data or {})
        data.update({k: v for k, v in overrides.items() if v is not None})
        known = {f for f in cls.__dataclass_fields__ if f != 'grid'}
        unknown = sorted(set(data) - known - {'grid'})
        if unknown:
            raise ConfigError(f"Unknown study settings: {unknown}", field=f"study.{unknown[0]}")
        kwargs = {k: v for k, v in data.items() if k in known}
        for key in ('f0_pitchers', 'f0_nonpitchers', 'reference_averages'):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        if grid is None and 'grid' in data:
            grid = GridSpec.from_dict(data['grid'])
        if grid is not None:
            kwargs['grid'] = grid
        return cls(**kwargs)


@dataclass(eq=False)
class GroupResult:
    """Per-group outcome of run_study."""

    group: Group
    n_training: int
    n_test: int
    gamma: float
    relative_errors: Dict[str, float]
    tse: Dict[str, float]
    prior_mean: float
    tail_probabilities: Dict[str, Dict[str, float]]
    log_likelihood: float
    priors: Dict[str, pd.DataFrame]
    predictions: pd.DataFrame

    def to_dict(self) -> Dict[str, Any]:
        return {
            'n_training': self.n_training, 'n_test': self.n_test, 'gamma': self.gamma,
            'relative_errors': self.relative_errors, 'tse': self.tse,
            'prior_mean': self.prior_mean, 'tail_probabilities': self.tail_probabilities,
            'log_likelihood': self.log_likelihood,
        }


@dataclass(eq=False)
class StudyReport:
    config: StudyConfig
    groups: Dict[str, GroupResult]
    n_records: int
    data_digest: str

    def relative_errors(self) -> Dict[str, Dict[str, float]]:
        """method -> group -> relative prediction error."""
        table: Dict[str, Dict[str, float]] = {m: {} for m in METHODS}
        for name, result in self.groups.items():
            for method, value in result.relative_errors.items():
                table[method][name] = value
        return table

    def to_dict(self) -> Dict[str, Any]:
        return {
            'config': self.config.to_dict(),
            'n_records': self.n_records,
            'data_sha256': self.data_digest,
            'relative_errors': self.relative_errors(),
            'groups': {name: result.to_dict() for name, result in self.groups.items()},
            'published': {'relative_errors': PUBLISHED_RELATIVE_ERRORS,
                          'player_counts': PUBLISHED_PLAYER_COUNTS},
        }


@dataclass(eq=False)
class TuningResult:
    """Best gamma per group and the full curve (gamma, group, relative_error)."""

    best: Dict[str, float]
    curve: pd.DataFrame


def player_table(records: Sequence[BattingRecord]) -> pd.DataFrame:
    """
    One row per player with first- and second-half totals, sorted by player_id.

    Repeated records of a player and half are summed; a player counts as a pitcher if
    any record says so.
    """
    frame = records_frame(records)
    if frame.empty:
        return pd.DataFrame(columns=['player_id', 'is_pitcher', 'n1', 'y1', 'n2', 'y2'])
    flags = frame.groupby('player_id')['is_pitcher'].any()
    totals = frame.pivot_table(index='player_id', columns='half', values=['at_bats', 'hits'],
                               aggfunc='sum', fill_value=0)
    table = pd.DataFrame(index=flags.index)
    table['is_pitcher'] = flags
    for half, suffix in ((Half.FIRST, '1'), (Half.SECOND, '2')):
        for column, prefix in (('at_bats', 'n'), ('hits', 'y')):
            key = (column, half.value)
            table[prefix + suffix] = totals[key].astype(np.int64) if key in totals.columns else 0
    return table.sort_index().reset_index()


def _group_seed(config: StudyConfig, group: Group, data: Observations) -> int:
    anchor = int(data.digest()[:16], 16)
    return derive_seed(config.seed, list(Group).index(group), anchor)


def _tse(x_test: np.ndarray, v_test: np.ndarray, predictions: np.ndarray) -> float:
    return float(((x_test - predictions) ** 2 - v_test).sum())


def _arcsine_prior_density(mu: float, tau2: float):
    # normal prior for arcsin(sqrt(theta)) mapped to theta; d xi / d theta = 1 / (2 sqrt(theta (1 - theta)))
    def density(thetas: np.ndarray) -> np.ndarray:
        xi = np.arcsin(np.sqrt(thetas))
        return stats.norm.pdf(xi, loc=mu, scale=np.sqrt(tau2)) / (2.0 * np.sqrt(thetas * (1.0 - thetas)))
    return density


def _prior_frame(F: MixingMeasure) -> pd.DataFrame:
    return F.to_frame()[['theta', 'density']]


def _minimum(method: str) -> int:
    return {'james_stein': 4, 'parametric_eb_mm': 2}.get(method, 1)


def _run_group(group: Group, players: pd.DataFrame, config: StudyConfig, threads: int) -> Optional[GroupResult]:
    training = players[players['n1'] >= config.min_train_at_bats]
    test_mask = (training['n2'] >= config.min_test_at_bats).to_numpy()
    if training.empty:
        logger.warning(f"No eligible {group.value} in the training half; group skipped")
        return None
    if not test_mask.any():
        logger.warning(f"No {group.value} with enough second-half at-bats; group skipped")
        return None
    dropped = int((~test_mask).sum())
    if dropped:
        logger.info(f"{dropped} {group.value} kept for training but not scored "
                    f"(fewer than {config.min_test_at_bats} second-half at-bats)")

    n1 = training['n1'].to_numpy()
    y1 = training['y1'].to_numpy()
    x1, v1 = transform_counts(y1, n1)
    x2, v2 = transform_counts(training['y2'].to_numpy()[test_mask], training['n2'].to_numpy()[test_mask])

    model = KernelModel.binomial(bounds=config.grid.bounds)
    a, b = config.f0(group)
    initial = init_beta(config.grid, a, b)
    data = Observations(y1.astype(float), n1.astype(float), tuple(training['player_id']))
    pr_config = PrConfig(gamma=config.gamma(group), n_permutations=config.n_permutations,
                         seed=_group_seed(config, group, data), grid=config.grid,
                         strict_weights=False)
    result: PrFit = fit(data, model, initial, pr_config, threads=threads)

    normal_data = NormalMeansData(x1, v1)
    predictions = {name: estimator(normal_data)[test_mask]
                   for name, estimator in BASELINES.items() if len(normal_data) >= _minimum(name)}
    predictions['pr'] = posterior_expectations(result.estimate, model, y1[test_mask], n1[test_mask],
                                               lambda thetas: np.arcsin(np.sqrt(thetas)))

    tse = {name: _tse(x2, v2, values) for name, values in predictions.items()}
    naive_tse = tse['naive']
    if naive_tse <= 0:
        logger.warning(f"Naive TSE for {group.value} is {naive_tse:.4g}; relative errors are not meaningful")
    relative = {name: (value / naive_tse if naive_tse != 0 else float('nan')) for name, value in tse.items()}

    priors = {'pr': _prior_frame(result.estimate), 'initial': _prior_frame(initial)}
    if len(normal_data) >= 2:
        mu, tau2 = parametric_eb_mm_prior(normal_data)
        if tau2 > 0:
            try:
                priors['parametric_eb_mm'] = _prior_frame(from_density(config.grid, _arcsine_prior_density(mu, tau2)))
            except DomainError as e:
                logger.warning(f"Parametric prior export for {group.value} skipped: {e}")
        else:
            logger.info(f"Parametric EB prior for {group.value} is degenerate (tau^2 = 0); not exported")

    tails = {label: {str(c): 1.0 - cdf(F, c) for c in config.reference_averages}
             for label, F in (('pr', result.estimate), ('initial', initial))}
    frame = pd.DataFrame({'player_id': training['player_id'].to_numpy()[test_mask],
                          'x_train': x1[test_mask], 'x_test': x2})
    for name, values in predictions.items():
        frame[name] = values

    logger.info(f"{group.value}: {len(training)} training / {int(test_mask.sum())} test players, "
                f"PR relative error {relative['pr']:.4f}")
    return GroupResult(group=group, n_training=len(training), n_test=int(test_mask.sum()),
                       gamma=config.gamma(group), relative_errors=relative, tse=tse,
                       prior_mean=moment(result.estimate, 1), tail_probabilities=tails,
                       log_likelihood=result.log_likelihood, priors=priors, predictions=frame)


def run_study(records: Sequence[BattingRecord], config: Optional[StudyConfig] = None,
              threads: int = 1) -> StudyReport:
    """
    Fit, predict and score every method for pitchers and non-pitchers.

    The result does not depend on record order: players are sorted by id and PR seeds
    are anchored on the group's data hash.

    Args:
        records: Batting records of both halves.
        config: Study settings (defaults when None).
        threads: Worker threads for PR permutations.

    Returns:
        StudyReport; groups without eligible players are missing from it.

    Raises:
        DomainError: If the records contain no second-half data at all.
    """
    config = config or StudyConfig()
    players = player_table(records)
    halves = {r.half for r in records}
    if Half.FIRST not in halves or Half.SECOND not in halves:
        raise DomainError("run_study needs records from both halves of the season")

    groups: Dict[str, GroupResult] = {}
    for group in Group:
        subset = players[players['is_pitcher'] == (group is Group.PITCHERS)]
        result = _run_group(group, subset, config, threads)
        if result is not None:
            groups[group.value] = result

    digest = hashlib.sha256(pd.util.hash_pandas_object(players, index=False).to_numpy().tobytes()).hexdigest()
    return StudyReport(config=config, groups=groups, n_records=len(records), data_digest=digest)


def best_gamma(curve: pd.DataFrame) -> Dict[str, float]:
    """Argmin of relative_error per group; ties go to the larger gamma."""
    best: Dict[str, float] = {}
    for name, part in curve.groupby('group', sort=True):
        lowest = part['relative_error'].min()
        best[name] = float(part.loc[part['relative_error'] == lowest, 'gamma'].max())
    return best


def tune_gamma(records: Sequence[BattingRecord], gammas: Sequence[float],
               config: Optional[StudyConfig] = None, threads: int = 1) -> TuningResult:
    """
    PR relative error over a grid of gamma values, per group.

    Every grid point is evaluated; ties go to the larger gamma.

    Raises:
        ConfigError: If a grid value lies outside (0, 1].
    """
    config = config or StudyConfig()
    gammas = sorted({float(g) for g in gammas})
    if not gammas or gammas[0] <= 0.0 or gammas[-1] > 1.0:
        raise ConfigError(f"gamma grid must be nonempty and inside (0, 1], got {gammas}", field="gammas")

    rows: List[Dict[str, Any]] = []
    for gamma in gammas:
        report = run_study(records, replace(config, gamma_pitchers=gamma, gamma_nonpitchers=gamma), threads)
        for name, result in report.groups.items():
            rows.append({'gamma': gamma, 'group': name, 'relative_error': result.relative_errors['pr']})
        logger.info(f"gamma={gamma}: " + ", ".join(
            f"{name} {result.relative_errors['pr']:.4f}" for name, result in report.groups.items()))

    curve = pd.DataFrame(rows, columns=['gamma', 'group', 'relative_error'])
    return TuningResult(best=best_gamma(curve), curve=curve)
