"""
Kernel families p_theta(y) used inside every mixture.

A KernelModel fixes the family and the parameter support Theta. Per-observation
nuisance values (normal variance, binomial trial count) travel with the data, not
with the model, since at-bat counts and transformed variances differ per player.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Sequence, Tuple, Union
import hashlib
import logging
import math

import numpy as np
from scipy import integrate, stats

from ..errors import ConfigError, DomainError

logger = logging.getLogger(__name__)

__all__ = [
    'KernelFamily', 'KernelModel', 'Observations', 'A4Report',
    'density', 'likelihood', 'likelihood_matrix', 'log_likelihood_matrix', 'resolve_params',
    'check_observations', 'observation_support', 'check_a4_bound',
    'DEFAULT_BINOMIAL_EPSILON', 'NORMAL_WINDOW_SD',
]

DEFAULT_BINOMIAL_EPSILON = 1e-4
NORMAL_WINDOW_SD = 10.0
POISSON_TAIL_MASS = 1e-15

ArrayLike = Union[float, Sequence[float], np.ndarray]


class KernelFamily(str, Enum):
    """Supported sampling families."""

    NORMAL = "normal"
    BINOMIAL = "binomial"
    POISSON = "poisson"

    @classmethod
    def parse(cls, name: str) -> "KernelFamily":
        aliases = {
            "normal": cls.NORMAL, "normallocation": cls.NORMAL, "normal_location": cls.NORMAL,
            "gaussian": cls.NORMAL,
            "binomial": cls.BINOMIAL,
            "poisson": cls.POISSON,
        }
        key = str(name).strip().lower()
        if key not in aliases:
            raise ConfigError(f"Unknown kernel family '{name}'. "
                              f"Expected one of: {[f.value for f in cls]}", field="kernel.family")
        return aliases[key]


@dataclass(frozen=True)
class KernelModel:
    """
    A sampling family together with its parameter support [theta_lo, theta_hi].

    Attributes:
        family: The kernel family.
        theta_support: Closed interval containing every theta the model is evaluated at.
        default_param: Per-observation parameter used when the data carry none
            (normal variance, binomial trial count; unused for Poisson).
    """

    family: KernelFamily
    theta_support: Tuple[float, float]
    default_param: Optional[float] = None

    def __post_init__(self):
        lo, hi = (float(v) for v in self.theta_support)
        object.__setattr__(self, 'theta_support', (lo, hi))
        if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
            raise DomainError(f"theta_support must be a finite interval, got [{lo}, {hi}]")
        if self.family is KernelFamily.BINOMIAL and (lo <= 0.0 or hi >= 1.0):
            raise DomainError(f"Binomial theta_support must lie inside (0, 1), got [{lo}, {hi}]")
        if self.family is KernelFamily.POISSON and lo < 0.0:
            raise DomainError(f"Poisson theta_support must be nonnegative, got [{lo}, {hi}]")
        if self.family is KernelFamily.NORMAL:
            variance = 1.0 if self.default_param is None else float(self.default_param)
            if variance <= 0:
                raise DomainError(f"Normal variance must be positive, got {variance}")
            object.__setattr__(self, 'default_param', variance)

    @classmethod
    def normal(cls, bounds: Tuple[float, float], variance: float = 1.0) -> "KernelModel":
        return cls(KernelFamily.NORMAL, tuple(bounds), variance)

    @classmethod
    def binomial(cls, trials: Optional[int] = None,
                 epsilon: float = DEFAULT_BINOMIAL_EPSILON,
                 bounds: Optional[Tuple[float, float]] = None) -> "KernelModel":
        if bounds is None:
            if not 0 < epsilon < 0.5:
                raise DomainError(f"Binomial epsilon must lie in (0, 0.5), got {epsilon}")
            bounds = (epsilon, 1.0 - epsilon)
        return cls(KernelFamily.BINOMIAL, tuple(bounds), None if trials is None else float(trials))

    @classmethod
    def poisson(cls, bounds: Tuple[float, float]) -> "KernelModel":
        return cls(KernelFamily.POISSON, tuple(bounds))

    @property
    def is_discrete(self) -> bool:
        return self.family is not KernelFamily.NORMAL

    def contains(self, theta: ArrayLike) -> bool:
        values = np.asarray(theta, dtype=float)
        lo, hi = self.theta_support
        return bool(np.all((values >= lo) & (values <= hi)))

    def to_dict(self) -> Dict[str, Any]:
        """Serialize as the {"family": ..., "params": {...}} kernel object."""
        params: Dict[str, Any] = {"bounds": list(self.theta_support)}
        if self.family is KernelFamily.NORMAL:
            params["variance"] = self.default_param
        elif self.family is KernelFamily.BINOMIAL and self.default_param is not None:
            params["trials"] = int(self.default_param)
        return {"family": self.family.value, "params": params}

    @classmethod
    def from_dict(cls, data: Dict[str, Any],
                  default_bounds: Optional[Tuple[float, float]] = None) -> "KernelModel":
        """
        Build a model from a {"family": ..., "params": {...}} kernel object.

        Args:
            data: The kernel object.
            default_bounds: Bounds used when params carry none (data-driven normal bounds).

        Raises:
            ConfigError: On unknown family or missing/invalid fields.
        """
        if not isinstance(data, dict) or 'family' not in data:
            raise ConfigError("Kernel config must be an object with a 'family' field",
                              field="kernel.family")
        family = KernelFamily.parse(data['family'])
        params = dict(data.get('params') or {})
        bounds = params.get('bounds', default_bounds)
        try:
            if family is KernelFamily.BINOMIAL:
                return cls.binomial(trials=params.get('trials'),
                                    epsilon=float(params.get('epsilon', DEFAULT_BINOMIAL_EPSILON)),
                                    bounds=tuple(bounds) if bounds is not None else None)
            if bounds is None:
                raise ConfigError(f"Kernel '{family.value}' needs params.bounds",
                                  field="kernel.params.bounds")
            if family is KernelFamily.NORMAL:
                return cls.normal(tuple(bounds), float(params.get('variance', 1.0)))
            return cls.poisson(tuple(bounds))
        except DomainError as e:
            raise ConfigError(str(e), field="kernel.params")


@dataclass(frozen=True, eq=False)
class Observations:
    """
    An observation sequence with optional per-observation parameters and ids.

    Attributes:
        values: Observations y_i.
        params: Variances (normal) or trial counts (binomial); None uses the model default.
        ids: Optional identifiers carried through to output tables.
    """

    values: np.ndarray
    params: Optional[np.ndarray] = None
    ids: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        values = np.atleast_1d(np.asarray(self.values, dtype=float))
        object.__setattr__(self, 'values', values)
        if self.params is not None:
            params = np.broadcast_to(np.asarray(self.params, dtype=float), values.shape).copy()
            object.__setattr__(self, 'params', params)
        if self.ids is not None:
            ids = tuple(str(i) for i in self.ids)
            if len(ids) != len(values):
                raise DomainError(f"{len(ids)} ids for {len(values)} observations")
            object.__setattr__(self, 'ids', ids)

    def __len__(self) -> int:
        return len(self.values)

    def subset(self, index: np.ndarray) -> "Observations":
        index = np.asarray(index)
        return Observations(self.values[index],
                            None if self.params is None else self.params[index],
                            None if self.ids is None else tuple(np.asarray(self.ids)[index]))

    def digest(self) -> str:
        """SHA-256 over the observation and parameter bytes (ids excluded)."""
        digest = hashlib.sha256(np.ascontiguousarray(self.values).tobytes())
        if self.params is not None:
            digest.update(np.ascontiguousarray(self.params).tobytes())
        return digest.hexdigest()


@dataclass(frozen=True)
class A4Report:
    """Result of the advisory likelihood-ratio moment probe."""

    bound: float
    finite: bool
    lattice_size: int
    worst_thetas: Tuple[float, float, float] = field(default=(math.nan, math.nan, math.nan))


def resolve_params(model: KernelModel, params: Optional[ArrayLike], count: int) -> np.ndarray:
    """
    Broadcast per-observation parameters, falling back to the model default.

    Args:
        model: The kernel model.
        params: Scalar, per-observation array, or None.
        count: Number of observations.

    Returns:
        Array of length count (zeros for Poisson, where no parameter exists).
    """
    if model.family is KernelFamily.POISSON:
        return np.zeros(count)
    if params is None:
        if model.default_param is None:
            raise DomainError(f"{model.family.value} observations need a per-observation "
                              f"parameter (trial count)")
        params = model.default_param
    values = np.broadcast_to(np.asarray(params, dtype=float), (count,)).copy()
    if model.family is KernelFamily.NORMAL and np.any(values <= 0):
        bad = values[values <= 0][0]
        raise DomainError(f"Normal variance must be positive, got {bad}")
    if model.family is KernelFamily.BINOMIAL:
        if np.any(values < 0) or np.any(values != np.floor(values)):
            bad = values[(values < 0) | (values != np.floor(values))][0]
            raise DomainError(f"Binomial trial count must be a nonnegative integer, got {bad}")
    return values


def check_observations(model: KernelModel, ys: ArrayLike, params: np.ndarray) -> np.ndarray:
    """
    Validate observations against the family's sample space.

    Returns:
        The observations as a float array.

    Raises:
        DomainError: Naming the first offending observation.
    """
    values = np.atleast_1d(np.asarray(ys, dtype=float))
    if not np.all(np.isfinite(values)):
        raise DomainError(f"Observation {values[~np.isfinite(values)][0]} is not finite")
    if model.family is KernelFamily.NORMAL:
        return values
    integral = values == np.floor(values)
    bad = ~integral | (values < 0)
    if model.family is KernelFamily.BINOMIAL:
        bad |= values > params
    if np.any(bad):
        index = int(np.argmax(bad))
        limit = f" with {int(params[index])} trials" if model.family is KernelFamily.BINOMIAL else ""
        raise DomainError(f"Observation y={values[index]} at index {index} is outside the "
                          f"{model.family.value} support{limit}")
    return values


def _kernel_values(model: KernelModel, thetas: np.ndarray, ys: np.ndarray,
                   params: np.ndarray) -> np.ndarray:
    # ys/params are column vectors, thetas a row vector; broadcasting gives obs x support
    if model.family is KernelFamily.NORMAL:
        return stats.norm.pdf(ys, loc=thetas, scale=np.sqrt(params))
    if model.family is KernelFamily.BINOMIAL:
        return stats.binom.pmf(ys, params, thetas)
    return stats.poisson.pmf(ys, thetas)


def density(model: KernelModel, theta: float, y: float, param: Optional[float] = None) -> float:
    """
    Evaluate p_theta(y) with respect to the family's dominating measure.

    Lebesgue measure for the normal family, counting measure for binomial and Poisson.

    Args:
        model: The kernel model.
        theta: Parameter value inside model.theta_support.
        y: Observation.
        param: Per-observation parameter (variance or trial count).

    Returns:
        The density value.

    Raises:
        DomainError: If theta or y is outside its support.
    """
    if not model.contains(theta):
        raise DomainError(f"theta={theta} is outside the support {list(model.theta_support)}")
    params = resolve_params(model, param, 1)
    ys = check_observations(model, y, params)
    value = _kernel_values(model, np.array([float(theta)]), ys[:, None], params[:, None])
    return float(value[0, 0])


def likelihood(model: KernelModel, thetas: np.ndarray, y: float,
               param: Optional[float] = None) -> np.ndarray:
    """
    Evaluate theta -> p_theta(y) over an array of support points.

    Args:
        model: The kernel model.
        thetas: Support points (assumed inside the model support).
        y: A single observation.
        param: Per-observation parameter.

    Returns:
        Array with one kernel value per support point.
    """
    return likelihood_matrix(model, thetas, [y], None if param is None else [param])[0]


def likelihood_matrix(model: KernelModel, thetas: np.ndarray, ys: ArrayLike,
                      params: Optional[ArrayLike] = None) -> np.ndarray:
    """
    Evaluate p_theta(y) for every (observation, support point) pair.

    Args:
        model: The kernel model.
        thetas: Support points, shape (J,).
        ys: Observations, shape (n,).
        params: Per-observation parameters, shape (n,) or scalar or None.

    Returns:
        Array of shape (n, J).
    """
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    resolved = resolve_params(model, params, len(ys))
    ys = check_observations(model, ys, resolved)
    thetas = np.asarray(thetas, dtype=float)
    return _kernel_values(model, thetas[None, :], ys[:, None], resolved[:, None])


def log_likelihood_matrix(model: KernelModel, thetas: np.ndarray, ys: ArrayLike,
                          params: Optional[ArrayLike] = None) -> np.ndarray:
    """Same as likelihood_matrix on the log scale; -inf where the kernel vanishes."""
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    resolved = resolve_params(model, params, len(ys))
    ys = check_observations(model, ys, resolved)
    thetas = np.asarray(thetas, dtype=float)[None, :]
    ys, resolved = ys[:, None], resolved[:, None]
    with np.errstate(divide='ignore'):
        if model.family is KernelFamily.NORMAL:
            return stats.norm.logpdf(ys, loc=thetas, scale=np.sqrt(resolved))
        if model.family is KernelFamily.BINOMIAL:
            return stats.binom.logpmf(ys, resolved, thetas)
        return stats.poisson.logpmf(ys, thetas)


def observation_support(model: KernelModel, param: Optional[float] = None,
                        theta_max: Optional[float] = None) -> np.ndarray:
    """
    Exhaustive observation support of a discrete kernel.

    Binomial: 0..m. Poisson: 0..y_max where y_max is the (1 - 1e-15) quantile at the
    largest theta considered.

    Args:
        model: A discrete kernel model.
        param: Trial count for binomial.
        theta_max: Largest theta to cover (default: upper end of theta_support).

    Returns:
        Integer-valued float array of support points.
    """
    if model.family is KernelFamily.NORMAL:
        raise DomainError("The normal family has no finite observation support; use a y-grid")
    if model.family is KernelFamily.BINOMIAL:
        trials = int(resolve_params(model, param, 1)[0])
        return np.arange(trials + 1, dtype=float)
    upper = model.theta_support[1] if theta_max is None else float(theta_max)
    y_max = int(stats.poisson.ppf(1.0 - POISSON_TAIL_MASS, upper)) if upper > 0 else 0
    return np.arange(y_max + 1, dtype=float)


def check_a4_bound(model: KernelModel, lattice_size: int = 5,
                   param: Optional[float] = None) -> A4Report:
    """
    Probe sup over (theta1, theta2, theta3) of the integral of (p1/p2)^2 p3.

    The supremum is taken over a lattice_size^3 lattice spanning theta_support and the
    integral is a sum over the discrete support or a trapezoid quadrature for the
    normal family. Advisory only: non-finite values are reported, never raised.

    Args:
        model: Kernel model with a compact support.
        lattice_size: Points per axis.
        param: Per-observation parameter to probe at (default: model default).

    Returns:
        An A4Report with the estimated bound and a finiteness flag.
    """
    lo, hi = model.theta_support
    lattice = np.unique(np.linspace(lo, hi, max(1, lattice_size)))
    t1, t2, t3 = (a.ravel() for a in np.meshgrid(lattice, lattice, lattice, indexing='ij'))

    with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
        if model.family is KernelFamily.NORMAL:
            variance = float(resolve_params(model, param, 1)[0])
            sd = math.sqrt(variance)
            spread = hi - lo
            y_lo = lo - 2.0 * spread - NORMAL_WINDOW_SD * sd
            y_hi = hi + 2.0 * spread + NORMAL_WINDOW_SD * sd
            n_points = int(math.ceil((y_hi - y_lo) / (sd / 50.0))) + 1
            ys = np.linspace(y_lo, y_hi, n_points)
            log_p1 = stats.norm.logpdf(ys[None, :], loc=t1[:, None], scale=sd)
            log_p2 = stats.norm.logpdf(ys[None, :], loc=t2[:, None], scale=sd)
            log_p3 = stats.norm.logpdf(ys[None, :], loc=t3[:, None], scale=sd)
            integrand = np.exp(2.0 * (log_p1 - log_p2) + log_p3)
            values = integrate.trapezoid(integrand, ys, axis=1)
        else:
            if model.family is KernelFamily.BINOMIAL:
                ys = observation_support(model, param)
                trials = ys[-1]
                p1 = stats.binom.pmf(ys[None, :], trials, t1[:, None])
                p2 = stats.binom.pmf(ys[None, :], trials, t2[:, None])
                p3 = stats.binom.pmf(ys[None, :], trials, t3[:, None])
            else:
                # tilted mean theta3 * (theta1/theta2)^2 sets how far the sum must run
                tilted = np.max(t3 * (t1 / t2) ** 2) if np.all(t2 > 0) else np.inf
                if not np.isfinite(tilted):
                    return A4Report(math.inf, False, len(lattice))
                ys = observation_support(model, theta_max=max(float(tilted), hi))
                p1 = stats.poisson.pmf(ys[None, :], t1[:, None])
                p2 = stats.poisson.pmf(ys[None, :], t2[:, None])
                p3 = stats.poisson.pmf(ys[None, :], t3[:, None])
            terms = np.where(p3 > 0, (p1 / p2) ** 2 * p3, 0.0)
            values = terms.sum(axis=1)

    values = np.where(np.isnan(values), np.inf, values)
    worst = int(np.argmax(values))
    bound = float(values[worst])
    finite = math.isfinite(bound)
    if not finite:
        logger.warning(f"Likelihood-ratio moment bound is not finite for {model.family.value} "
                       f"on {list(model.theta_support)}")
    return A4Report(bound, finite, len(lattice),
                    (float(t1[worst]), float(t2[worst]), float(t3[worst])))
