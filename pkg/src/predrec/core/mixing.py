"""
Mixing measures on a quadrature grid.

A MixingMeasure is a density on grid nodes (with quadrature weights) plus optional
point masses. Internally every operation works on the flat support
(grid nodes followed by atoms) and the masses carried there, so the recursion and
the decision rules never special-case atoms.
"""

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple
import json
import logging

import numpy as np
import pandas as pd

from ..errors import ConfigError, DegenerateObservationError, DomainError, FormatError
from .kernels import KernelModel, likelihood

logger = logging.getLogger(__name__)

__all__ = [
    'GridRule', 'GridSpec', 'MixingMeasure', 'MIN_MARGINAL',
    'marginal_density', 'posterior', 'moment', 'cdf',
    'init_beta', 'init_uniform', 'init_normal', 'from_density', 'point_mass', 'from_atoms',
    'mixture', 'with_atoms', 'measure_from_config', 'default_normal_bounds',
    'write_measure', 'read_measure',
]

# Marginals below this are treated as zero.
MIN_MARGINAL = 1e-300


class GridRule(str, Enum):
    MIDPOINT = "midpoint"
    TRAPEZOID = "trapezoid"


@dataclass(frozen=True)
class GridSpec:
    """Discretization of Theta: node count, bounds and quadrature rule."""

    node_count: int = 2000
    bounds: Tuple[float, float] = (1e-4, 1.0 - 1e-4)
    rule: GridRule = GridRule.MIDPOINT

    def __post_init__(self):
        lo, hi = (float(v) for v in self.bounds)
        object.__setattr__(self, 'bounds', (lo, hi))
        object.__setattr__(self, 'rule', GridRule(self.rule))
        if int(self.node_count) != self.node_count or self.node_count < 2:
            raise ConfigError(f"grid.node_count must be an integer >= 2, got {self.node_count}",
                              field="grid.node_count")
        if not lo < hi:
            raise ConfigError(f"grid.bounds must satisfy lo < hi, got [{lo}, {hi}]",
                              field="grid.bounds")

    def build(self) -> Tuple[np.ndarray, np.ndarray]:
        """Return (nodes, weights) for the configured rule."""
        lo, hi = self.bounds
        n = int(self.node_count)
        if self.rule is GridRule.MIDPOINT:
            step = (hi - lo) / n
            nodes = lo + (np.arange(n) + 0.5) * step
            weights = np.full(n, step)
        else:
            nodes = np.linspace(lo, hi, n)
            step = (hi - lo) / (n - 1)
            weights = np.full(n, step)
            weights[[0, -1]] = step / 2.0
        return nodes, weights

    def to_dict(self) -> Dict[str, Any]:
        return {"node_count": int(self.node_count), "bounds": list(self.bounds),
                "rule": self.rule.value}

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]],
                  default_bounds: Optional[Tuple[float, float]] = None) -> "GridSpec":
        data = dict(data or {})
        bounds = data.get('bounds', default_bounds)
        kwargs: Dict[str, Any] = {}
        if 'node_count' in data:
            kwargs['node_count'] = int(data['node_count'])
        if bounds is not None:
            kwargs['bounds'] = tuple(bounds)
        if 'rule' in data:
            try:
                kwargs['rule'] = GridRule(data['rule'])
            except ValueError:
                raise ConfigError(f"grid.rule must be one of {[r.value for r in GridRule]}",
                                  field="grid.rule")
        return cls(**kwargs)


def _frozen(values: Iterable[float]) -> np.ndarray:
    array = np.array(values, dtype=float).ravel()
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class MixingMeasure:
    """
    Discretized mixing distribution: grid density plus point masses.

    Attributes:
        grid_nodes: Strictly increasing nodes.
        grid_weights: Quadrature weights (theta-measure) per node.
        grid_density: Density with respect to the grid's Lebesgue part at each node.
        atom_locations: Point-mass locations.
        atom_masses: Point masses.
    """

    grid_nodes: np.ndarray
    grid_weights: np.ndarray
    grid_density: np.ndarray
    atom_locations: np.ndarray = field(default_factory=lambda: np.empty(0))
    atom_masses: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        for name in ('grid_nodes', 'grid_weights', 'grid_density', 'atom_locations', 'atom_masses'):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if not (len(self.grid_nodes) == len(self.grid_weights) == len(self.grid_density)):
            raise DomainError("grid_nodes, grid_weights and grid_density must have equal lengths")
        if len(self.atom_locations) != len(self.atom_masses):
            raise DomainError("atom_locations and atom_masses must have equal lengths")
        if len(self.grid_nodes) > 1 and np.any(np.diff(self.grid_nodes) <= 0):
            raise DomainError("grid_nodes must be strictly increasing")
        if np.any(self.grid_weights <= 0):
            raise DomainError("grid_weights must be positive")
        if np.any(self.grid_density < 0) or np.any(self.atom_masses < 0):
            raise DomainError("densities and atom masses must be nonnegative")
        if not (np.all(np.isfinite(self.grid_density)) and np.all(np.isfinite(self.atom_masses))):
            raise DomainError("densities and atom masses must be finite")
        if len(self.grid_nodes) + len(self.atom_locations) == 0:
            raise DomainError("a mixing measure needs at least one node or atom")

    @property
    def n_nodes(self) -> int:
        return len(self.grid_nodes)

    @property
    def atoms(self) -> List[Tuple[float, float]]:
        return [(float(loc), float(mass)) for loc, mass in zip(self.atom_locations, self.atom_masses)]

    @property
    def grid_masses(self) -> np.ndarray:
        return self.grid_weights * self.grid_density

    def support(self) -> Tuple[np.ndarray, np.ndarray]:
        """Flat support points (nodes then atoms) and the mass carried by each."""
        thetas = np.concatenate([self.grid_nodes, self.atom_locations])
        masses = np.concatenate([self.grid_masses, self.atom_masses])
        return thetas, masses

    def total_mass(self) -> float:
        return float(self.grid_masses.sum() + self.atom_masses.sum())

    def with_masses(self, masses: np.ndarray) -> "MixingMeasure":
        """Same geometry, new flat support masses (nodes then atoms)."""
        masses = np.asarray(masses, dtype=float)
        n = self.n_nodes
        return MixingMeasure(self.grid_nodes, self.grid_weights, masses[:n] / self.grid_weights,
                             self.atom_locations, masses[n:])

    def normalized(self) -> "MixingMeasure":
        total = self.total_mass()
        if total <= 0:
            raise DomainError("cannot normalize a measure with zero mass")
        return self.with_masses(self.support()[1] / total)

    def bounds(self) -> Tuple[float, float]:
        thetas = self.support()[0]
        return float(thetas.min()), float(thetas.max())

    def to_frame(self) -> pd.DataFrame:
        """Grid part as a DataFrame with columns theta, density, weight."""
        return pd.DataFrame({'theta': self.grid_nodes, 'density': self.grid_density,
                             'weight': self.grid_weights})


def _check_support(F: MixingMeasure, model: KernelModel) -> None:
    lo, hi = F.bounds()
    if not model.contains([lo, hi]):
        raise DomainError(f"Mixing measure support [{lo}, {hi}] is not inside the kernel "
                          f"support {list(model.theta_support)}")


def marginal_density(F: MixingMeasure, model: KernelModel, y: float,
                     param: Optional[float] = None) -> float:
    """
    Marginal p_F(y) = sum_j w_j f_j p_{theta_j}(y) + sum_k m_k p_{theta_k}(y).

    Raises:
        DegenerateObservationError: If the marginal vanishes.
    """
    _check_support(F, model)
    thetas, masses = F.support()
    value = float(likelihood(model, thetas, y, param) @ masses)
    if value <= MIN_MARGINAL:
        raise DegenerateObservationError(f"Marginal density of y={y} vanishes under the mixing measure")
    return value


def posterior(F: MixingMeasure, model: KernelModel, y: float,
              param: Optional[float] = None) -> MixingMeasure:
    """
    Bayes' formula dF(theta | y) = p_theta(y) dF(theta) / p_F(y) on the grid and atoms.

    Raises:
        DegenerateObservationError: If the marginal vanishes.
    """
    _check_support(F, model)
    thetas, masses = F.support()
    kernel = likelihood(model, thetas, y, param)
    weighted = masses * kernel
    marginal = float(weighted.sum())
    if marginal <= MIN_MARGINAL:
        raise DegenerateObservationError(f"Marginal density of y={y} vanishes under the mixing measure")
    return F.with_masses(weighted / marginal)


def moment(F: MixingMeasure, k: int = 1) -> float:
    """Raw moment sum_j w_j f_j theta_j^k + sum_k m_k theta_k^k."""
    if int(k) != k or k < 1:
        raise DomainError(f"moment order must be a positive integer, got {k}")
    thetas, masses = F.support()
    return float(masses @ thetas ** int(k))


def cdf(F: MixingMeasure, t: float) -> float:
    """Mass F((-inf, t]] carried by nodes and atoms at or below t."""
    thetas, masses = F.support()
    return float(masses[thetas <= t].sum())


def _from_log_density(spec: GridSpec, log_density: np.ndarray) -> MixingMeasure:
    nodes, weights = spec.build()
    shifted = np.exp(log_density - np.max(log_density))
    return MixingMeasure(nodes, weights, shifted / float(weights @ shifted))


def init_beta(spec: GridSpec, a: float, b: float) -> MixingMeasure:
    """
    Beta(a, b) initial guess, renormalized on the truncated grid.

    Raises:
        DomainError: If a or b is not positive, or the grid is not inside (0, 1).
    """
    if a <= 0 or b <= 0:
        raise DomainError(f"Beta shape parameters must be positive, got a={a}, b={b}")
    lo, hi = spec.bounds
    if lo <= 0.0 or hi >= 1.0:
        raise DomainError(f"Beta grid bounds must lie inside (0, 1), got [{lo}, {hi}]")
    nodes, _ = spec.build()
    return _from_log_density(spec, (a - 1.0) * np.log(nodes) + (b - 1.0) * np.log1p(-nodes))


def init_uniform(spec: GridSpec) -> MixingMeasure:
    nodes, _ = spec.build()
    return _from_log_density(spec, np.zeros_like(nodes))


def init_normal(spec: GridSpec, mean: float = 0.0, sd: float = 1.0) -> MixingMeasure:
    """Normal(mean, sd^2) density truncated to the grid and renormalized."""
    if sd <= 0:
        raise DomainError(f"Normal sd must be positive, got {sd}")
    nodes, _ = spec.build()
    return _from_log_density(spec, -0.5 * ((nodes - mean) / sd) ** 2)


def from_density(spec: GridSpec, density_fn: Callable[[np.ndarray], np.ndarray]) -> MixingMeasure:
    """
    Grid measure with density proportional to density_fn evaluated at the nodes.

    Used to carry a prior stated on another scale over to theta, e.g. a normal prior
    for arcsin(sqrt(theta)) times the Jacobian of the inverse map.

    Raises:
        DomainError: If the density is negative, non-finite or vanishes on the grid.
    """
    nodes, weights = spec.build()
    values = np.asarray(density_fn(nodes), dtype=float)
    if values.shape != nodes.shape or not np.all(np.isfinite(values)) or np.any(values < 0):
        raise DomainError("density_fn must return finite nonnegative values at every node")
    total = float(weights @ values)
    if total <= 0:
        raise DomainError("density_fn vanishes on the grid")
    return MixingMeasure(nodes, weights, values / total)


def from_atoms(locations: Sequence[float], masses: Sequence[float]) -> MixingMeasure:
    """Purely discrete measure; masses are renormalized to one."""
    masses = np.asarray(masses, dtype=float)
    if masses.sum() <= 0:
        raise DomainError("atom masses must have a positive total")
    order = np.argsort(np.asarray(locations, dtype=float), kind='stable')
    return MixingMeasure(np.empty(0), np.empty(0), np.empty(0),
                         np.asarray(locations, dtype=float)[order], masses[order] / masses.sum())


def point_mass(location: float) -> MixingMeasure:
    return from_atoms([location], [1.0])


def mixture(F1: MixingMeasure, F2: MixingMeasure, lam: float) -> MixingMeasure:
    """
    lam * F1 + (1 - lam) * F2 for measures sharing grid and atom locations.

    Raises:
        DomainError: If lam is outside [0, 1] or the geometries differ.
    """
    if not 0.0 <= lam <= 1.0:
        raise DomainError(f"mixture weight must lie in [0, 1], got {lam}")
    if not (np.array_equal(F1.grid_nodes, F2.grid_nodes)
            and np.array_equal(F1.grid_weights, F2.grid_weights)
            and np.array_equal(F1.atom_locations, F2.atom_locations)):
        raise DomainError("mixture components must share grid nodes, weights and atom locations")
    return F1.with_masses(lam * F1.support()[1] + (1.0 - lam) * F2.support()[1])


def with_atoms(F: MixingMeasure, locations: Sequence[float],
               masses: Sequence[float]) -> MixingMeasure:
    """
    Scale F by (1 - sum(masses)) and add point masses, e.g. a point null next to a
    continuous alternative.
    """
    masses = np.asarray(masses, dtype=float)
    locations = np.asarray(locations, dtype=float)
    added = float(masses.sum())
    if np.any(masses < 0) or added > 1.0:
        raise DomainError(f"added atom masses must be nonnegative with total <= 1, got {added}")
    scale = (1.0 - added) / F.total_mass()
    all_locations = np.concatenate([F.atom_locations, locations])
    all_masses = np.concatenate([F.atom_masses * scale, masses])
    order = np.argsort(all_locations, kind='stable')
    return MixingMeasure(F.grid_nodes, F.grid_weights, F.grid_density * scale,
                         all_locations[order], all_masses[order])


def default_normal_bounds(values: Sequence[float], variances: Sequence[float]) -> Tuple[float, float]:
    """Data-driven normal bounds [min X - 3 max sd, max X + 3 max sd]."""
    values = np.asarray(values, dtype=float)
    max_sd = float(np.sqrt(np.max(np.asarray(variances, dtype=float))))
    return float(values.min() - 3.0 * max_sd), float(values.max() + 3.0 * max_sd)


def measure_from_config(data: Optional[Dict[str, Any]], spec: GridSpec,
                        field_prefix: str = "initial") -> MixingMeasure:
    """
    Build a measure from a config object.

    Supported kinds: "uniform", "beta" (a, b), "normal" (mean, sd), "atoms"
    (locations, masses). Any kind may add "atoms": [{"location": .., "mass": ..}]
    which are mixed in with with_atoms.

    Raises:
        ConfigError: On unknown kinds or invalid parameters.
    """
    data = dict(data or {"kind": "uniform"})
    kind = str(data.get('kind', 'uniform')).lower()
    try:
        if kind == 'uniform':
            measure = init_uniform(spec)
        elif kind == 'beta':
            measure = init_beta(spec, float(data.get('a', 1.0)), float(data.get('b', 1.0)))
        elif kind == 'normal':
            measure = init_normal(spec, float(data.get('mean', 0.0)), float(data.get('sd', 1.0)))
        elif kind == 'atoms':
            return from_atoms(data['locations'], data['masses'])
        else:
            raise ConfigError(f"Unknown measure kind '{kind}'. "
                              f"Expected uniform, beta, normal or atoms", field=f"{field_prefix}.kind")
        extra = data.get('atoms') or []
        if extra:
            measure = with_atoms(measure, [float(a['location']) for a in extra],
                                 [float(a['mass']) for a in extra])
        return measure
    except KeyError as e:
        raise ConfigError(f"Missing field {e} in {field_prefix}", field=f"{field_prefix}.{e.args[0]}")
    except DomainError as e:
        raise ConfigError(str(e), field=field_prefix)


def _atoms_path(csv_path: Path) -> Path:
    return csv_path.with_name(f"{csv_path.stem}_atoms.json")


def write_measure(F: MixingMeasure, csv_path: str) -> Tuple[str, str]:
    """
    Write the grid part as CSV (theta, density, weight) and atoms as a JSON sidecar.

    Returns:
        Paths of the CSV and the sidecar.
    """
    path = Path(csv_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    F.to_frame().to_csv(path, index=False, float_format='%.17g', lineterminator='\n')
    sidecar = _atoms_path(path)
    with open(sidecar, 'w', encoding='utf-8') as f:
        json.dump({"atoms": [{"location": loc, "mass": mass} for loc, mass in F.atoms]},
                  f, indent=2, sort_keys=True)
        f.write('\n')
    logger.debug(f"Mixing measure written to {path}")
    return str(path), str(sidecar)


def read_measure(csv_path: str) -> MixingMeasure:
    """Read a measure written by write_measure (the sidecar is optional)."""
    path = Path(csv_path)
    frame = pd.read_csv(path, float_precision="round_trip")
    missing = {'theta', 'density', 'weight'} - set(frame.columns)
    if missing:
        raise FormatError(f"Mixing measure CSV {path} lacks columns {sorted(missing)}")
    atoms: List[Dict[str, float]] = []
    sidecar = _atoms_path(path)
    if sidecar.exists():
        with open(sidecar, 'r', encoding='utf-8') as f:
            atoms = json.load(f).get('atoms', [])
    return MixingMeasure(frame['theta'].to_numpy(), frame['weight'].to_numpy(),
                         frame['density'].to_numpy(),
                         [a['location'] for a in atoms], [a['mass'] for a in atoms])
