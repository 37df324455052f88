"""
Switch distribution

Forward computation of the switch distribution over a sequence of index
sets K_1 <= K_2 <= ... . For every strategy k two log weights are kept:
wa_k, the mass of plans that may still switch again, and wb_k, the mass of
plans whose last switch has already happened. Each outcome applies a loss
update (multiply by the strategy's predictive) and a share update (move a
hazard-sized fraction of the unfrozen mass into a pool and redistribute it
with pi_k). Total work is proportional to the sum of |K_n|.

All weights are natural logs; log-zero is -inf. Weight arrays may carry
leading batch dimensions, every reduction runs over the last axis.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np

from switchcast import config
from switchcast.models import (
    ConfigurationError,
    DataValidationError,
    InvariantViolation,
    ShapeMismatchError,
    UndefinedPosteriorError,
)
from switchcast.predictors import (
    FiniteDistribution,
    HistogramDistribution,
    MixtureDistribution,
    PredictiveDistribution,
)
from switchcast.priors import SwitchPriorConfig

logger = logging.getLogger(__name__)

LOG_ZERO = -np.inf


######################################################################
#  W E I G H T S
######################################################################
@dataclass(frozen=True)
class SwitchWeights:
    """Log weights after n outcomes, indexed by k in K_{n+1}"""

    wa: np.ndarray
    wb: np.ndarray
    n: int = 0
    log_mass: Union[float, np.ndarray] = 0.0
    log_predictive_total: Union[float, np.ndarray] = 0.0

    @property
    def size(self) -> int:
        return self.wa.shape[-1]


def _scalar(value):
    value = np.asarray(value)
    return float(value) if value.ndim == 0 else value


def switch_init(prior: SwitchPriorConfig, batch_shape=()) -> SwitchWeights:
    """wa_k = log(pi_k(k) theta), wb_k = log(pi_k(k) (1-theta)) on K_1"""
    size = prior.kset_schedule.size(1)
    if size < 1:
        raise ConfigurationError("K_1 must be nonempty")
    log_prior = prior.log_model_prior[:size]
    shape = tuple(batch_shape) + (size,)
    wa = np.broadcast_to(log_prior + prior.log_theta, shape).copy()
    wb = np.broadcast_to(log_prior + prior.log_one_minus_theta, shape).copy()
    log_mass = np.full(tuple(batch_shape), np.logaddexp.reduce(log_prior))
    zero = np.zeros(tuple(batch_shape))
    return SwitchWeights(wa, wb, 0, _scalar(log_mass), _scalar(zero))


def switch_step(weights: SwitchWeights, logpreds, prior: SwitchPriorConfig) -> SwitchWeights:
    """Consumes one outcome given log p_k(x_n | x^{n-1}) for every k in K_n"""
    logpreds = np.asarray(logpreds, dtype=float)
    size = weights.size
    if logpreds.shape[-1:] != (size,):
        raise ShapeMismatchError(
            f"Expected {size} log predictives for K_{weights.n + 1}, got shape {logpreds.shape}"
        )
    n = weights.n + 1
    log_hazard, log_stay = prior.log_hazard(n)
    next_size = prior.kset_schedule.size(n + 1)
    if next_size < size:
        raise ConfigurationError(f"index sets must be nested: |K_{n + 1}| < |K_{n}|")
    log_prior = prior.log_model_prior[:next_size]

    with np.errstate(invalid="ignore"):
        # loss update
        wa = weights.wa + logpreds
        wb = weights.wb + logpreds
        mass_a = np.logaddexp.reduce(wa, axis=-1, keepdims=True)
        mass_b = np.logaddexp.reduce(wb, axis=-1, keepdims=True)
        pool = log_hazard + mass_a

        # share update; entering strategies only receive pool mass
        if next_size > size:
            pad = [(0, 0)] * (wa.ndim - 1) + [(0, next_size - size)]
            wa = np.pad(wa, pad, constant_values=LOG_ZERO)
            wb = np.pad(wb, pad, constant_values=LOG_ZERO)
        wa = np.logaddexp(wa + log_stay, pool + log_prior + prior.log_theta)
        wb = np.logaddexp(wb, pool + log_prior + prior.log_one_minus_theta)

        after_loss = np.logaddexp(mass_a, mass_b)[..., 0]
        retained = np.logaddexp(mass_a + log_stay, mass_b)
        log_mass = np.logaddexp(retained, pool + np.logaddexp.reduce(log_prior))[..., 0]
        log_predictive_total = weights.log_predictive_total + after_loss - weights.log_mass

    return SwitchWeights(wa, wb, n, _scalar(log_mass), _scalar(log_predictive_total))


######################################################################
#  R E P O R T I N G
######################################################################
def marginal_loglik(weights: SwitchWeights):
    """log p_sw(x^n) = log sum_k (exp wa_k + exp wb_k)"""
    return _scalar(np.logaddexp.reduce(np.logaddexp(weights.wa, weights.wb), axis=-1))


def joint_log_masses(weights: SwitchWeights) -> np.ndarray:
    """log p_sw(x^n, K_{n+1}=k) for every k"""
    return np.logaddexp(weights.wa, weights.wb)


def posterior_next(weights: SwitchWeights) -> np.ndarray:
    """pi(K_{n+1} = k | x^n) over K_{n+1}"""
    joint = joint_log_masses(weights)
    total = np.logaddexp.reduce(joint, axis=-1, keepdims=True)
    if np.any(total == LOG_ZERO):
        raise UndefinedPosteriorError(f"every switch weight is log-zero after {weights.n} outcomes")
    return np.exp(joint - total)


def select_model(posterior):
    """1-based index of the maximum posterior; ties go to the smallest index"""
    posterior = np.asarray(posterior, dtype=float)
    choice = np.argmax(posterior, axis=-1) + 1
    return int(choice) if np.ndim(choice) == 0 else choice


def switch_predictive(
    weights: SwitchWeights, distributions: Sequence[PredictiveDistribution]
) -> PredictiveDistribution:
    """Posterior mixture of the strategies' one-step predictives"""
    posterior = posterior_next(weights)
    if posterior.ndim != 1 or len(distributions) != len(posterior):
        raise ShapeMismatchError(
            f"Need one predictive per strategy in K_{weights.n + 1} ({len(posterior)}), got {len(distributions)}"
        )
    return mix(posterior, distributions)


def mix(weights, distributions: Sequence[PredictiveDistribution]) -> PredictiveDistribution:
    """Collapses a mixture to a flat distribution when the components allow it"""
    if all(isinstance(item, FiniteDistribution) for item in distributions):
        sizes = {len(item.probs) for item in distributions}
        if len(sizes) == 1:
            return FiniteDistribution(sum(w * item.probs for w, item in zip(weights, distributions)))
    if all(isinstance(item, HistogramDistribution) for item in distributions):
        if len({item.bins for item in distributions}) == 1:
            return HistogramDistribution(
                sum(w * item.densities for w, item in zip(weights, distributions))
            )
    return MixtureDistribution(weights, distributions)


######################################################################
#  C E S A R O - S W I T C H
######################################################################
def _check_snapshots(snapshots: Sequence[PredictiveDistribution]):
    if not snapshots:
        raise DataValidationError("Cesaro prediction needs at least one snapshot")
    alphabet = snapshots[0].alphabet
    for item in snapshots:
        if item.alphabet != alphabet:
            raise ShapeMismatchError(
                f"Incompatible snapshots: {item.alphabet} differs from {alphabet}"
            )


def cesaro_predict(snapshots: Sequence[PredictiveDistribution], outcome) -> float:
    """(1/n) sum of the switch predictives issued at prefixes 0..n-1, at outcome"""
    _check_snapshots(snapshots)
    return float(np.mean([item.prob(outcome) for item in snapshots]))


def cesaro_distribution(snapshots: Sequence[PredictiveDistribution]) -> PredictiveDistribution:
    """The Cesaro-switch predictive as a distribution"""
    _check_snapshots(snapshots)
    count = len(snapshots)
    return mix(np.full(count, 1.0 / count), snapshots)


######################################################################
#  S W I T C H   D I S T R I B U T I O N
######################################################################
@dataclass
class SwitchReport:
    """Per-step records: log p_sw(x^n), posterior on K_{n+1}, selection"""

    n: List[int] = field(default_factory=list)
    log_marginal: List[float] = field(default_factory=list)
    posterior: List[np.ndarray] = field(default_factory=list)
    selected: List[int] = field(default_factory=list)

    def __len__(self):
        return len(self.n)

    def record(self, weights: SwitchWeights):
        posterior = posterior_next(weights)
        total = float(posterior.sum())
        if abs(total - 1.0) > config.POSTERIOR_TOLERANCE:
            raise InvariantViolation(f"posterior sums to {total} at n={weights.n}")
        self.n.append(weights.n)
        self.log_marginal.append(float(marginal_loglik(weights)))
        self.posterior.append(posterior)
        self.selected.append(select_model(posterior))

    def code_length_bits(self) -> np.ndarray:
        return -np.asarray(self.log_marginal) / math.log(2)


class SwitchDistribution:
    """
    Class that runs the switch distribution over a stream of log predictives
    """

    def __init__(self, prior: SwitchPriorConfig):
        self.prior = prior
        self.weights = switch_init(prior)

    def __repr__(self):
        return f"<SwitchDistribution n=[{self.weights.n}] K={self.weights.size}>"

    @property
    def size(self) -> int:
        """|K_{n+1}|, the number of strategies the next outcome needs"""
        return self.weights.size

    def update(self, logpreds) -> "SwitchDistribution":
        self.weights = switch_step(self.weights, logpreds, self.prior)
        return self

    def log_marginal(self) -> float:
        return marginal_loglik(self.weights)

    def posterior(self) -> np.ndarray:
        return posterior_next(self.weights)

    def selected(self) -> int:
        return select_model(self.posterior())

    def run(self, logpred_matrix, record: Optional[Iterable[int]] = None) -> SwitchReport:
        """Consumes an N x K matrix of log predictives

        Args:
            logpred_matrix: row i holds log p_k(x_{i+1} | x^i) for k = 1..K,
                with K at least the largest |K_n| reached
            record: sample sizes to report (default: every n, including 0)
        """
        matrix = np.asarray(logpred_matrix, dtype=float)
        start = self.weights.n
        wanted = None if record is None else set(record)
        report = SwitchReport()
        if wanted is None or start in wanted:
            report.record(self.weights)
        logger.debug("Running switch distribution over %d outcomes", len(matrix))
        for row in matrix:
            self.weights = switch_step(self.weights, row[: self.weights.size], self.prior)
            if wanted is None or self.weights.n in wanted:
                report.record(self.weights)
        return report
