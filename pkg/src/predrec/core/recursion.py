"""
Predictive recursion.

Starting from an initial guess F_0, each observation Y_i updates the mixing measure by

    dF_i = (1 - w_i) dF_{i-1} + w_i p_theta(Y_i) dF_{i-1} / p_{i-1}(Y_i),

with p_{i-1} the marginal under F_{i-1}. fit() runs the recursion over seeded
permutations of the data and averages the final measures.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple
import logging
import math

import numpy as np

from ..errors import ConfigError, DegenerateObservationError, DomainError
from .kernels import KernelModel, Observations, likelihood, likelihood_matrix, resolve_params
from .mixing import GridSpec, MIN_MARGINAL, MixingMeasure, marginal_density

logger = logging.getLogger(__name__)

__all__ = [
    'PrConfig', 'PrFit', 'WeightSeriesReport',
    'weight', 'weights', 'check_weight_series', 'derive_seed',
    'pr_step', 'fit', 'predictive_density',
]

# Likelihood matrices up to this many entries are computed once and shared by all permutations.
MAX_CACHED_ENTRIES = 4_000_000
BLOCK_ROWS = 512
MAX_SEED = 2 ** 64


@dataclass(frozen=True)
class PrConfig:
    """
    Settings of one PR fit.

    Attributes:
        gamma: Weight exponent in w_i = (i + 1)^-gamma.
        n_permutations: Number of data orderings averaged.
        seed: Root seed; permutation k uses derive_seed(seed, k).
        grid: Discretization of Theta used for the initial guess.
        weight_override: Explicit weights w_1, w_2, ... replacing the power schedule.
        shuffle: When False every permutation is the data order as given.
        strict_weights: Require gamma in (1/2, 1]. The baseball study relaxes this to
            (0, 1] because its tuned pitcher gamma sits on the boundary.
    """

    gamma: float = 0.75
    n_permutations: int = 10
    seed: int = 0
    grid: GridSpec = field(default_factory=GridSpec)
    weight_override: Optional[Tuple[float, ...]] = None
    shuffle: bool = True
    strict_weights: bool = True

    def __post_init__(self):
        gamma = float(self.gamma)
        object.__setattr__(self, 'gamma', gamma)
        if self.strict_weights:
            if not 0.5 < gamma <= 1.0:
                raise ConfigError(
                    f"gamma={gamma} is not admissible: weights (i+1)^-gamma need "
                    f"sum w_i = inf and sum w_i^2 < inf, i.e. gamma in (1/2, 1]",
                    field="pr.gamma")
        elif not 0.0 < gamma <= 1.0:
            raise ConfigError(f"gamma={gamma} must lie in (0, 1]", field="pr.gamma")
        elif gamma <= 0.5:
            logger.warning(f"gamma={gamma} is outside (1/2, 1]; sum of squared weights diverges")
        if int(self.n_permutations) != self.n_permutations or self.n_permutations < 1:
            raise ConfigError(f"n_permutations must be an integer >= 1, got {self.n_permutations}",
                              field="pr.n_permutations")
        if int(self.seed) != self.seed or not 0 <= self.seed < MAX_SEED:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}",
                              field="pr.seed")
        object.__setattr__(self, 'seed', int(self.seed))
        if self.weight_override is not None:
            override = tuple(float(w) for w in self.weight_override)
            bad = [w for w in override if not 0.0 < w < 1.0]
            if bad or not override:
                raise ConfigError(f"weight_override values must lie in (0, 1), got {bad[:3] or 'nothing'}",
                                  field="pr.weight_override")
            object.__setattr__(self, 'weight_override', override)

    def to_dict(self) -> Dict[str, Any]:
        return {"gamma": self.gamma, "n_permutations": int(self.n_permutations),
                "seed": self.seed, "grid": self.grid.to_dict(), "shuffle": self.shuffle,
                "weight_override": None if self.weight_override is None else list(self.weight_override)}

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]], grid: Optional[GridSpec] = None,
                  **overrides: Any) -> "PrConfig":
        data = dict(data or {})
        data.update({k: v for k, v in overrides.items() if v is not None})
        kwargs: Dict[str, Any] = {}
        for key in ('gamma', 'n_permutations', 'seed', 'shuffle', 'strict_weights'):
            if key in data:
                kwargs[key] = data[key]
        if data.get('weight_override') is not None:
            kwargs['weight_override'] = tuple(data['weight_override'])
        if grid is not None:
            kwargs['grid'] = grid
        elif 'grid' in data:
            kwargs['grid'] = GridSpec.from_dict(data['grid'])
        return cls(**kwargs)


@dataclass(frozen=True)
class WeightSeriesReport:
    """Outcome of the weight series test."""

    decay_exponent: float
    partial_sum: float
    partial_sum_squares: float
    n_terms: int
    satisfied: bool


@dataclass(frozen=True, eq=False)
class PrFit:
    """
    Result of fit().

    Attributes:
        estimate: Permutation-averaged F_n.
        config: Settings used.
        n_observations: Number of observations processed.
        marginals: p_{i-1}(Y_i) per permutation (rows) and step (columns, in processing order).
        data_digest: SHA-256 of the observations.
        per_permutation: Final measure of each permutation, when retained.
    """

    estimate: MixingMeasure
    config: PrConfig
    n_observations: int
    marginals: np.ndarray
    data_digest: str
    per_permutation: Optional[List[MixingMeasure]] = None

    @property
    def log_likelihoods(self) -> np.ndarray:
        """Sum of log p_{i-1}(Y_i) for each permutation."""
        return np.log(self.marginals).sum(axis=1)

    @property
    def log_likelihood(self) -> float:
        """PR predictive log-likelihood averaged over permutations."""
        return float(self.log_likelihoods.mean())

    def manifest(self) -> Dict[str, Any]:
        return {"seed": self.config.seed, "gamma": self.config.gamma,
                "n_permutations": int(self.config.n_permutations), "shuffle": self.config.shuffle,
                "n_observations": self.n_observations, "data_sha256": self.data_digest,
                "log_likelihood": self.log_likelihood}


def weight(config: PrConfig, i: int) -> float:
    """
    Weight w_i = (i + 1)^-gamma, or the i-th override value.

    Raises:
        DomainError: If i < 1.
        ConfigError: If the override sequence is shorter than i.
    """
    if int(i) != i or i < 1:
        raise DomainError(f"weight index must be an integer >= 1, got {i}")
    if config.weight_override is not None:
        if i > len(config.weight_override):
            raise ConfigError(f"weight_override has {len(config.weight_override)} values, "
                              f"step {i} needs more", field="pr.weight_override")
        return config.weight_override[i - 1]
    return float((i + 1.0) ** -config.gamma)


def weights(config: PrConfig, n: int) -> np.ndarray:
    """Vector of w_1..w_n."""
    if config.weight_override is not None:
        if n > len(config.weight_override):
            raise ConfigError(f"weight_override has {len(config.weight_override)} values, "
                              f"{n} observations need more", field="pr.weight_override")
        return np.asarray(config.weight_override[:n])
    return (np.arange(1, n + 1) + 1.0) ** -config.gamma


def check_weight_series(config: PrConfig, n_terms: int = 10 ** 6) -> WeightSeriesReport:
    """
    Series test for sum w_i = inf and sum w_i^2 < inf.

    The decay exponent of the tail (second half of the first n_terms weights) is fitted
    on the log-log scale and compared with the p-series boundaries 1/2 and 1.
    """
    available = n_terms if config.weight_override is None else min(n_terms, len(config.weight_override))
    w = weights(config, available)
    index = np.arange(1, available + 1)
    tail = slice(available // 2, available)
    if available >= 4:
        slope = np.polyfit(np.log(index[tail] + 1.0), np.log(w[tail]), 1)[0]
        exponent = float(-slope)
    else:
        exponent = math.nan
    satisfied = bool(np.all((w > 0) & (w < 1)) and 0.5 < exponent <= 1.0 + 1e-6)
    return WeightSeriesReport(exponent, float(w.sum()), float((w ** 2).sum()), available, satisfied)


def derive_seed(root: int, *path: int) -> int:
    """Child seed for (root, path...) via numpy's SeedSequence; stable across runs."""
    sequence = np.random.SeedSequence(int(root), spawn_key=tuple(int(p) for p in path))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def pr_step(F: MixingMeasure, model: KernelModel, y: float, param: Optional[float],
            w: float, index: Optional[int] = None) -> MixingMeasure:
    """
    One PR update of F with observation y and weight w.

    Args:
        F: Current mixing measure F_{i-1}.
        model: Kernel model.
        y: Observation Y_i.
        param: Its per-observation parameter.
        w: Weight in [0, 1]; w = 1 reproduces Bayes' formula, w = 0 the identity.
        index: Step index reported in errors.

    Raises:
        DegenerateObservationError: If p_{i-1}(y) vanishes.
    """
    if not 0.0 <= w <= 1.0:
        raise DomainError(f"PR weight must lie in [0, 1], got {w}")
    thetas, masses = F.support()
    kernel = likelihood(model, thetas, y, param)
    marginal = float(kernel @ masses)
    if marginal <= MIN_MARGINAL:
        raise DegenerateObservationError(f"Marginal density of y={y} vanishes", index=index)
    return F.with_masses(masses * ((1.0 - w) + (w / marginal) * kernel))


class _Recursion:
    """Runs the recursion for one permutation over precomputed or blockwise kernel rows."""

    def __init__(self, model: KernelModel, data: Observations, F0: MixingMeasure,
                 config: PrConfig) -> None:
        self.model = model
        self.config = config
        self.thetas, self.masses0 = F0.support()
        self.values = data.values
        self.params = resolve_params(model, data.params, len(data))
        self.weights = weights(config, len(data))
        n = len(data)
        if n * len(self.thetas) <= MAX_CACHED_ENTRIES:
            self.kernel = likelihood_matrix(model, self.thetas, self.values, self.params)
        else:
            self.kernel = None
            # validates every observation up front
            likelihood_matrix(model, self.thetas[:1], self.values, self.params)

    def order(self, permutation: int) -> np.ndarray:
        n = len(self.values)
        if not self.config.shuffle:
            return np.arange(n)
        rng = np.random.default_rng(derive_seed(self.config.seed, permutation))
        return rng.permutation(n)

    def rows(self, index: np.ndarray) -> np.ndarray:
        if self.kernel is not None:
            return self.kernel[index]
        return likelihood_matrix(self.model, self.thetas, self.values[index], self.params[index])

    def __call__(self, permutation: int) -> Tuple[np.ndarray, np.ndarray]:
        order = self.order(permutation)
        masses = self.masses0.copy()
        marginals = np.empty(len(order))
        for start in range(0, len(order), BLOCK_ROWS):
            block = self.rows(order[start:start + BLOCK_ROWS])
            for offset, kernel in enumerate(block):
                step = start + offset
                marginal = float(kernel @ masses)
                if marginal <= MIN_MARGINAL:
                    raise DegenerateObservationError(
                        f"Marginal density of y={self.values[order[step]]} vanishes",
                        index=step + 1, permutation=permutation)
                marginals[step] = marginal
                w = self.weights[step]
                masses *= (1.0 - w) + (w / marginal) * kernel
        logger.debug(f"Permutation {permutation} finished after {len(order)} steps")
        return masses, marginals


def fit(data: Observations, model: KernelModel, F0: MixingMeasure, config: PrConfig,
        threads: int = 1, keep_permutations: bool = False) -> PrFit:
    """
    Run PR over config.n_permutations seeded orderings and average the final measures.

    Args:
        data: Observations (with per-observation parameters where needed).
        model: Kernel model.
        F0: Initial guess.
        config: PR settings.
        threads: Worker threads for permutations.
        keep_permutations: Retain each permutation's final measure.

    Returns:
        A PrFit whose estimate is deterministic given config.seed.

    Raises:
        DomainError: On empty data or an initial guess outside the kernel support.
        DegenerateObservationError: With permutation and step index.
    """
    if len(data) == 0:
        raise DomainError("PR needs at least one observation")
    lo, hi = F0.bounds()
    if not model.contains([lo, hi]):
        raise DomainError(f"Initial guess support [{lo}, {hi}] is not inside the kernel "
                          f"support {list(model.theta_support)}")
    recursion = _Recursion(model, data, F0.normalized(), config)
    n_perm = int(config.n_permutations)
    logger.info(f"Running PR on {len(data)} observations, {n_perm} permutation(s), "
                f"gamma={config.gamma}")

    if threads > 1 and n_perm > 1:
        with ThreadPoolExecutor(max_workers=min(threads, n_perm)) as executor:
            results = list(executor.map(recursion, range(n_perm)))
    else:
        results = [recursion(k) for k in range(n_perm)]

    finals = np.stack([masses for masses, _ in results])
    averaged = finals.mean(axis=0)
    estimate = F0.with_masses(averaged / averaged.sum())
    per_permutation = [F0.with_masses(m / m.sum()) for m in finals] if keep_permutations else None
    return PrFit(estimate=estimate, config=config, n_observations=len(data),
                 marginals=np.stack([marginals for _, marginals in results]),
                 data_digest=data.digest(), per_permutation=per_permutation)


def predictive_density(result: PrFit, model: KernelModel, y: float,
                       param: Optional[float] = None) -> float:
    """p_n(y), the marginal under the fitted mixing measure."""
    return marginal_density(result.estimate, model, y, param)
