"""
Risk and Kullback-Leibler harness.

Bayes risk rho(F), the risk rho_n(F) of the plug-in rule built from a PR estimate, and
KL(p_F, p_{F_n}) are evaluated by quadrature over the observation space: a fixed y-grid
for the normal family, exhaustive enumeration for discrete families. optimality_trace
simulates data from a known F and records how rho_n(F) - rho(F) and the KL divergence
shrink as the sample size grows.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Union
import json
import logging
import math

import numpy as np
import pandas as pd

from ..core.decision import DecisionKind, DecisionProblem
from ..core.kernels import (KernelFamily, KernelModel, Observations, check_a4_bound,
                            likelihood_matrix, log_likelihood_matrix, observation_support,
                            resolve_params)
from ..core.mixing import GridSpec, MixingMeasure, measure_from_config
from ..core.recursion import PrConfig, PrFit, check_weight_series, derive_seed, fit
from ..errors import ConfigError, DegenerateObservationError, DomainError, IllPosedTestError

logger = logging.getLogger(__name__)

__all__ = [
    'YQuadrature', 'SimScenario', 'y_quadrature_for', 'risk_function', 'decision_risk',
    'bayes_risk', 'eb_risk', 'marginal_on_quadrature', 'kl_divergence', 'load_scenario',
    'optimality_trace', 'summarize_trace', 'assumption_report', 'TRACE_COLUMNS',
]

NORMAL_Y_POINTS = 4001
NORMAL_Y_SPAN_SD = 8.0
RISK_SLACK = 1e-8
TRACE_COLUMNS = ['n', 'replication', 'excess_risk', 'kl', 'eb_risk', 'bayes_risk']


@dataclass(frozen=True, eq=False)
class YQuadrature:
    """Observation-space nodes and weights; weights are 1 for discrete families."""

    points: np.ndarray
    weights: np.ndarray
    discrete: bool

    def __len__(self) -> int:
        return len(self.points)


def y_quadrature_for(F: MixingMeasure, model: KernelModel,
                     param: Optional[float] = None) -> YQuadrature:
    """
    Quadrature for integrals against p_theta(y) with theta drawn from F.

    Normal: NORMAL_Y_POINTS trapezoid nodes over the mean of F plus or minus
    NORMAL_Y_SPAN_SD combined standard deviations sqrt(Var_F + sigma^2).
    Binomial and Poisson: the whole (Poisson: tail-truncated) support.
    """
    if model.is_discrete:
        thetas = F.support()[0]
        points = observation_support(model, param, theta_max=float(thetas.max()))
        return YQuadrature(points, np.ones_like(points), True)
    variance = float(resolve_params(model, param, 1)[0])
    thetas, masses = F.normalized().support()
    mean = float(masses @ thetas)
    spread = math.sqrt(float(masses @ (thetas - mean) ** 2) + variance)
    points = np.linspace(mean - NORMAL_Y_SPAN_SD * spread, mean + NORMAL_Y_SPAN_SD * spread,
                         NORMAL_Y_POINTS)
    step = points[1] - points[0]
    weights = np.full(NORMAL_Y_POINTS, step)
    weights[[0, -1]] = step / 2.0
    return YQuadrature(points, weights, False)


def _rule_statistic(rule_F: MixingMeasure, model: KernelModel, problem: DecisionProblem,
                    ys: np.ndarray, param: Optional[float]) -> np.ndarray:
    # posterior mean (estimate) or posterior probability of Theta_0 (test) at each y,
    # computed on the log scale so far-tail y values do not underflow
    thetas, masses = rule_F.support()
    with np.errstate(divide='ignore'):
        log_weighted = log_likelihood_matrix(model, thetas, ys, param) + np.log(masses)
    top = log_weighted.max(axis=1)
    if not np.all(np.isfinite(top)):
        index = int(np.argmax(~np.isfinite(top)))
        raise DegenerateObservationError(f"Marginal density of y={ys[index]} vanishes under the rule",
                                         index=index + 1)
    post = np.exp(log_weighted - top[:, None])
    post /= post.sum(axis=1, keepdims=True)
    if problem.kind is DecisionKind.ESTIMATE:
        return post @ thetas
    mask = problem.null.mask(rule_F)
    if float(masses[mask].sum()) <= 0.0:
        raise IllPosedTestError(f"Theta_0 {problem.null.to_dict()} has zero mass under the rule's prior")
    return post[:, mask].sum(axis=1)


def risk_function(rule_F: MixingMeasure, model: KernelModel, problem: DecisionProblem,
                  thetas: Sequence[float], yq: YQuadrature, param: Optional[float] = None,
                  null_mask: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Frequentist risk R(delta, theta) of the Bayes rule under rule_F at each theta.

    Args:
        rule_F: Prior defining the rule (F for the Bayes rule, F_n for the plug-in rule).
        model: Kernel model.
        problem: Decision problem and losses.
        thetas: Parameter values at which to evaluate the risk.
        yq: Observation quadrature.
        param: Per-observation parameter of the future problem.
        null_mask: Which thetas lie in Theta_0 (test only; defaults to the interval test).

    Returns:
        Array of risks, one per theta.
    """
    thetas = np.asarray(thetas, dtype=float)
    kernel = likelihood_matrix(model, thetas, yq.points, param) * yq.weights[:, None]
    statistic = _rule_statistic(rule_F, model, problem, yq.points, param)
    if problem.kind is DecisionKind.ESTIMATE:
        loss = (statistic[:, None] - thetas[None, :]) ** 2
    else:
        if null_mask is None:
            if problem.null.interval is None:
                raise DomainError("null_mask is required when Theta_0 is an atom set")
            lo, hi = problem.null.interval
            null_mask = (thetas >= lo) & (thetas <= hi)
        accept = statistic > problem.threshold
        # kappa1 for rejecting a true null, kappa2 for accepting a false one
        loss = np.where(accept[:, None], problem.kappa2 * ~null_mask[None, :],
                        problem.kappa1 * null_mask[None, :])
    return (kernel * loss).sum(axis=0)


def decision_risk(rule_F: MixingMeasure, true_F: MixingMeasure, model: KernelModel,
                  problem: DecisionProblem, yq: Optional[YQuadrature] = None,
                  param: Optional[float] = None) -> float:
    """Bayes risk of the rule induced by rule_F when theta is drawn from true_F."""
    truth = true_F.normalized()
    if yq is None:
        yq = y_quadrature_for(truth, model, param)
    thetas, masses = truth.support()
    null_mask = problem.null.mask(truth) if problem.kind is DecisionKind.TEST else None
    risks = risk_function(rule_F, model, problem, thetas, yq, param, null_mask)
    return float(masses @ risks)


def bayes_risk(F: MixingMeasure, model: KernelModel, problem: DecisionProblem,
               yq: Optional[YQuadrature] = None, param: Optional[float] = None) -> float:
    """rho(F), the minimal Bayes risk."""
    return decision_risk(F, F, model, problem, yq, param)


@dataclass(frozen=True, eq=False)
class SimScenario:
    """
    A simulation setting: true F, kernel, loss, sample sizes and PR settings.

    Attributes:
        true_F: Mixing measure the thetas are drawn from.
        model: Kernel model.
        problem: Decision problem and losses.
        sample_sizes: Strictly increasing sample sizes.
        replications: Independent replications per sample size.
        pr_config: PR settings; its seed is the root seed of the whole trace.
        initial: PR initial guess F_0.
        param: Per-observation parameter (normal variance or binomial trials).
        name: Scenario label.
    """

    true_F: MixingMeasure
    model: KernelModel
    problem: DecisionProblem
    sample_sizes: Sequence[int]
    replications: int
    pr_config: PrConfig
    initial: MixingMeasure
    param: Optional[float] = None
    name: str = "scenario"
    notes: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.sample_sizes)
        object.__setattr__(self, 'sample_sizes', sizes)
        if not sizes or any(n < 1 for n in sizes) or any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ConfigError(f"sample_sizes must be positive and strictly increasing, got {list(sizes)}",
                              field="sample_sizes")
        if int(self.replications) != self.replications or self.replications < 1:
            raise ConfigError(f"replications must be an integer >= 1, got {self.replications}",
                              field="replications")

    @property
    def seed(self) -> int:
        return self.pr_config.seed

    def y_quadrature(self) -> YQuadrature:
        return y_quadrature_for(self.true_F, self.model, self.param)

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "kernel": self.model.to_dict(), "problem": self.problem.to_dict(),
                "sample_sizes": list(self.sample_sizes), "replications": int(self.replications),
                "pr": self.pr_config.to_dict(), "param": self.param}

    @classmethod
    def from_dict(cls, data: Dict[str, Any], **overrides: Any) -> "SimScenario":
        """
        Build a scenario from its JSON object.

        Keys: name, kernel, grid, truth, initial, problem, pr, sample_sizes,
        replications, param, notes. Keyword overrides (seed, replications,
        sample_sizes) win over the file.

        Raises:
            ConfigError: Naming the offending field.
        """
        if not isinstance(data, dict):
            raise ConfigError("scenario must be a JSON object", field="scenario")
        for key in ('kernel', 'truth', 'sample_sizes'):
            if key not in data:
                raise ConfigError(f"scenario lacks required field '{key}'", field=key)
        model = KernelModel.from_dict(data['kernel'])
        grid = GridSpec.from_dict(data.get('grid'), default_bounds=model.theta_support)
        if not model.contains(list(grid.bounds)):
            raise ConfigError(f"grid.bounds {list(grid.bounds)} exceed the kernel support "
                              f"{list(model.theta_support)}", field="grid.bounds")
        true_F = measure_from_config(data['truth'], grid, field_prefix="truth")
        initial = measure_from_config(data.get('initial'), grid, field_prefix="initial")
        pr_data = dict(data.get('pr') or {})
        if overrides.get('seed') is not None:
            pr_data['seed'] = overrides['seed']
        pr_config = PrConfig.from_dict(pr_data, grid=grid)
        param = data.get('param')
        try:
            param = None if param is None else float(param)
            if param is not None:
                resolve_params(model, param, 1)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"invalid param: {e}", field="param")
        sample_sizes = overrides.get('sample_sizes') or data['sample_sizes']
        replications = overrides.get('replications') or data.get('replications', 1)
        return cls(true_F=true_F, model=model, problem=DecisionProblem.from_dict(data.get('problem')),
                   sample_sizes=sample_sizes, replications=replications, pr_config=pr_config,
                   initial=initial, param=param, name=str(data.get('name', 'scenario')),
                   notes=dict(data.get('notes') or {}))


def load_scenario(path: str, **overrides: Any) -> SimScenario:
    """Read a scenario JSON file."""
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Scenario {path} is not valid JSON: {e}", field="scenario")
    logger.info(f"Loaded scenario from {path}")
    return SimScenario.from_dict(data, **overrides)


def eb_risk(result: Union[PrFit, MixingMeasure], scenario: SimScenario,
            yq: Optional[YQuadrature] = None) -> float:
    """rho_n(F): risk of the plug-in rule built from a PR estimate (or any F_n) under the true F."""
    estimate = result.estimate if isinstance(result, PrFit) else result
    return decision_risk(estimate, scenario.true_F, scenario.model, scenario.problem,
                         yq or scenario.y_quadrature(), scenario.param)


def marginal_on_quadrature(F: MixingMeasure, model: KernelModel, yq: YQuadrature,
                           param: Optional[float] = None) -> np.ndarray:
    """p_F(y) at every quadrature node."""
    thetas, masses = F.support()
    return likelihood_matrix(model, thetas, yq.points, param) @ masses


def kl_divergence(p: np.ndarray, q: np.ndarray, yq: YQuadrature) -> float:
    """
    K(p, q) = integral of p log(p / q) on the quadrature.

    Raises:
        DomainError: If q vanishes where p is positive.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.shape != yq.points.shape:
        raise DomainError("p, q and the quadrature must have the same length")
    positive = p > 0
    if np.any(positive & (q <= 0)):
        index = int(np.argmax(positive & (q <= 0)))
        raise DomainError(f"q vanishes at y={yq.points[index]} where p is positive")
    terms = np.zeros_like(p)
    terms[positive] = p[positive] * np.log(p[positive] / q[positive])
    return float(yq.weights @ terms)


def _sample(scenario: SimScenario, size: int, rng: np.random.Generator) -> Observations:
    thetas, masses = scenario.true_F.normalized().support()
    drawn = thetas[rng.choice(len(thetas), size=size, p=masses / masses.sum())]
    family = scenario.model.family
    params = resolve_params(scenario.model, scenario.param, size)
    if family is KernelFamily.NORMAL:
        values = rng.normal(drawn, np.sqrt(params))
    elif family is KernelFamily.BINOMIAL:
        values = rng.binomial(params.astype(np.int64), drawn).astype(float)
    else:
        values = rng.poisson(drawn).astype(float)
    return Observations(values, None if family is KernelFamily.POISSON else params)


def _replication_rows(scenario: SimScenario, replication: int, yq: YQuadrature,
                      p_true: np.ndarray, rho: float) -> List[Dict[str, Any]]:
    # one nested sample per replication; each sample size uses its prefix
    rng = np.random.default_rng(np.random.SeedSequence([scenario.seed, replication]))
    data = _sample(scenario, max(scenario.sample_sizes), rng)
    rows = []
    for n in scenario.sample_sizes:
        config = replace(scenario.pr_config, seed=derive_seed(scenario.seed, replication, n))
        result = fit(data.subset(np.arange(n)), scenario.model, scenario.initial, config)
        rho_n = eb_risk(result, scenario, yq)
        if rho_n < rho - RISK_SLACK:
            logger.warning(f"rho_n={rho_n} below rho={rho} at n={n}, replication {replication}")
        kl = kl_divergence(p_true, marginal_on_quadrature(result.estimate, scenario.model, yq,
                                                          scenario.param), yq)
        rows.append({'n': n, 'replication': replication, 'excess_risk': rho_n - rho, 'kl': kl,
                     'eb_risk': rho_n, 'bayes_risk': rho})
        logger.debug(f"replication {replication}, n={n}: excess risk {rho_n - rho:.3g}, KL {kl:.3g}")
    return rows


def optimality_trace(scenario: SimScenario, threads: int = 1) -> pd.DataFrame:
    """
    Simulate (theta_i, Y_i) from the scenario, fit PR at every sample size and replication,
    and record excess risk rho_n - rho and KL(p_F, p_n).

    Returns:
        Long-format table with TRACE_COLUMNS, sorted by (n, replication); deterministic
        given the scenario seed, whatever the thread count.
    """
    yq = scenario.y_quadrature()
    p_true = marginal_on_quadrature(scenario.true_F.normalized(), scenario.model, yq, scenario.param)
    rho = bayes_risk(scenario.true_F, scenario.model, scenario.problem, yq, scenario.param)
    logger.info(f"Scenario '{scenario.name}': rho(F)={rho:.6g}, sizes {list(scenario.sample_sizes)}, "
                f"{scenario.replications} replication(s)")
    reps = range(int(scenario.replications))
    if threads > 1 and scenario.replications > 1:
        with ThreadPoolExecutor(max_workers=min(threads, int(scenario.replications))) as executor:
            chunks = list(executor.map(lambda r: _replication_rows(scenario, r, yq, p_true, rho), reps))
    else:
        chunks = [_replication_rows(scenario, r, yq, p_true, rho) for r in reps]
    frame = pd.DataFrame([row for chunk in chunks for row in chunk], columns=TRACE_COLUMNS)
    return frame.sort_values(['n', 'replication'], kind='stable').reset_index(drop=True)


def summarize_trace(trace: pd.DataFrame) -> Dict[str, Any]:
    """
    Per-sample-size medians of excess risk and KL plus the monotonicity gates.

    rho_n(F) is random, so medians per n are reported rather than an averaged risk.
    """
    medians = trace.groupby('n', sort=True)[['excess_risk', 'kl']].median()
    excess = medians['excess_risk'].to_numpy()
    kl = medians['kl'].to_numpy()
    return {
        "sample_sizes": [int(n) for n in medians.index],
        "median_excess_risk": [float(v) for v in excess],
        "median_kl": [float(v) for v in kl],
        "replications": int(trace['replication'].nunique()),
        "excess_risk_nonincreasing": bool(np.all(np.diff(excess) <= RISK_SLACK)),
        "kl_decreasing": bool(np.all(np.diff(kl) < 0)),
        "risk_dominance": bool(np.all(trace['eb_risk'] >= trace['bayes_risk'] - RISK_SLACK)),
    }


def assumption_report(scenario: SimScenario, n_terms: int = 10 ** 6) -> Dict[str, Any]:
    """
    Checks of the convergence conditions that can be probed numerically.

    Kernel boundedness is probed on the observation quadrature, the weight series by its
    fitted decay exponent and the likelihood-ratio moment by check_a4_bound. Conditions
    that cannot be checked mechanically are carried as notes.
    """
    yq = scenario.y_quadrature()
    lo, hi = scenario.model.theta_support
    probe = np.linspace(lo, hi, 101)
    values = likelihood_matrix(scenario.model, probe, yq.points, scenario.param)
    series = check_weight_series(scenario.pr_config, n_terms)
    moment = check_a4_bound(scenario.model, param=scenario.param)
    notes = {
        "compact_support": f"Theta = [{lo}, {hi}] is compact by construction",
        "identifiability": "assumed for the chosen kernel family",
        "initial_guess_support": "F_0 is positive on the grid; the true F is discretized on the same grid",
    }
    notes.update(scenario.notes)
    return {
        "kernel_bounded": {"max_density": float(values.max()),
                           "bounded": bool(np.all(np.isfinite(values)))},
        "weight_series": {"decay_exponent": series.decay_exponent, "partial_sum": series.partial_sum,
                          "partial_sum_squares": series.partial_sum_squares,
                          "n_terms": series.n_terms, "satisfied": series.satisfied},
        "likelihood_ratio_moment": {"bound": moment.bound, "finite": moment.finite,
                                    "lattice_size": moment.lattice_size},
        "notes": notes,
    }
