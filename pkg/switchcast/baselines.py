"""
Baselines

Bayesian model averaging with the same pi_k as the switch prior, the
data-independent ceil(n^(1/3)) histogram criterion, the "never much worse
than Bayes" ordering check and a Monte Carlo check that neither mixture
compresses data sampled from the other by many bits.
"""

import logging
import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from switchcast import config
from switchcast.models import (
    DataValidationError,
    InvariantViolation,
    ShapeMismatchError,
    UndefinedPosteriorError,
)
from switchcast.predictors import BernoulliLaplace, MarkovDirichlet, PredictiveDistribution
from switchcast.priors import SwitchPriorConfig
from switchcast.switch import marginal_loglik, mix, posterior_next, switch_init, switch_step

logger = logging.getLogger(__name__)

LOG2 = math.log(2)


######################################################################
#  B A Y E S I A N   M O D E L   A V E R A G I N G
######################################################################
@dataclass(frozen=True)
class BmaState:
    """log pi_k(k) + log p_k(x^n) for every k"""

    log_weights: np.ndarray
    n: int = 0


def bma_init(prior: SwitchPriorConfig, batch_shape=()) -> BmaState:
    """BMA over k = 1..kmax with the switch prior's pi_k"""
    shape = tuple(batch_shape) + (prior.kmax,)
    return BmaState(np.broadcast_to(prior.log_model_prior, shape).copy())


def bma_step(state: BmaState, logpreds) -> Tuple[BmaState, float]:
    """Multiplies in one outcome; returns the new state and log p_bma(x_n | x^{n-1})"""
    logpreds = np.asarray(logpreds, dtype=float)
    if logpreds.shape[-1:] != state.log_weights.shape[-1:]:
        raise ShapeMismatchError(
            f"Expected {state.log_weights.shape[-1]} log predictives, got shape {logpreds.shape}"
        )
    before = logsumexp(state.log_weights, axis=-1)
    if np.any(before == -np.inf):
        raise UndefinedPosteriorError(f"every BMA weight is log-zero after {state.n} outcomes")
    weights = state.log_weights + logpreds
    predictive = logsumexp(weights, axis=-1) - before
    if np.ndim(predictive) == 0:
        predictive = float(predictive)
    return BmaState(weights, state.n + 1), predictive


def bma_log_marginal(state: BmaState):
    """log p_bma(x^n) = log sum_k pi_k(k) p_k(x^n)"""
    value = logsumexp(state.log_weights, axis=-1)
    return float(value) if np.ndim(value) == 0 else value


def bma_posterior(state: BmaState) -> np.ndarray:
    total = logsumexp(state.log_weights, axis=-1, keepdims=True)
    if np.any(total == -np.inf):
        raise UndefinedPosteriorError(f"every BMA weight is log-zero after {state.n} outcomes")
    return np.exp(state.log_weights - total)


def bma_select(state: BmaState):
    """1-based MAP strategy; ties go to the smallest index"""
    choice = np.argmax(bma_posterior(state), axis=-1) + 1
    return int(choice) if np.ndim(choice) == 0 else choice


def bma_predictive(state: BmaState, distributions: Sequence[PredictiveDistribution]) -> PredictiveDistribution:
    posterior = bma_posterior(state)
    if posterior.ndim != 1 or len(distributions) != len(posterior):
        raise ShapeMismatchError(f"Need {len(posterior)} predictives, got {len(distributions)}")
    return mix(posterior, distributions)


def bma_prefix_log_marginals(logpred_matrix, log_prior) -> np.ndarray:
    """log p_bma(x^n) for n = 0..N from an N x K log predictive matrix"""
    matrix = np.asarray(logpred_matrix, dtype=float)
    log_prior = np.asarray(log_prior, dtype=float)
    cumulative = np.vstack([np.zeros((1, matrix.shape[1])), np.cumsum(matrix, axis=0)])
    return logsumexp(cumulative + log_prior[: matrix.shape[1]], axis=1)


######################################################################
#  F I X E D   C R I T E R I O N
######################################################################
def cuberoot_criterion(n: int) -> int:
    """ceil(n^(1/3)) bins, with n = 0 giving 1"""
    if n < 0:
        raise DataValidationError(f"Sample size must be >= 0, got {n}")
    k = max(1, round(n ** (1.0 / 3.0)))
    while k**3 < n:
        k += 1
    while k > 1 and (k - 1) ** 3 >= n:
        k -= 1
    return k


######################################################################
#  O R D E R I N G   C H E C K
######################################################################
def ordering_slack(log_sw, log_bma, log_strategies, prior: SwitchPriorConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Slack of log p_sw >= log pi_m(1) + log p_bma >= log pi_m(1) + log pi_k(k) + log p_k

    Returns two arrays, one per inequality, negative where it is violated.
    log_strategies has one column per strategy in the BMA index set.
    """
    log_sw = np.asarray(log_sw, dtype=float)
    log_bma = np.asarray(log_bma, dtype=float)
    log_strategies = np.atleast_2d(np.asarray(log_strategies, dtype=float))
    upper = log_sw - (prior.log_one_minus_theta + log_bma)
    best = np.max(log_strategies + prior.log_model_prior[: log_strategies.shape[-1]], axis=-1)
    lower = log_bma - best
    return upper, lower


def check_ordering(log_sw, log_bma, log_strategies, prior: SwitchPriorConfig, where: str = "") -> float:
    """Raises InvariantViolation when the ordering fails beyond tolerance"""
    upper, lower = ordering_slack(log_sw, log_bma, log_strategies, prior)
    worst = float(min(np.min(upper), np.min(lower)))
    if worst < -config.ORDERING_TOLERANCE:
        raise InvariantViolation(f"switch/BMA ordering violated by {-worst:.3e} nats {where}".rstrip())
    return worst


######################################################################
#  N O   H Y P E R C O M P R E S S I O N
######################################################################
@dataclass
class HypercompressionResult:
    """Outcome of a no-hypercompression Monte Carlo check"""

    sampler: str
    trials: int
    margin_bits: float
    frequency: float
    bound: float

    @property
    def passed(self) -> bool:
        return self.frequency <= self.bound


def _markov_shape(strategy) -> Tuple[int, int]:
    if isinstance(strategy, BernoulliLaplace):
        return 0, 2
    if isinstance(strategy, MarkovDirichlet):
        return strategy.order, strategy.alphabet.size
    raise DataValidationError(f"{strategy.label} is not a finite-alphabet Markov strategy")


def no_hypercompression_check(
    prior: SwitchPriorConfig,
    strategies,
    n: int,
    trials: int,
    margin_bits: float,
    rng: np.random.Generator,
    sampler: str = "bma",
) -> HypercompressionResult:
    """Samples x^n ancestrally from one mixture and scores it under both

    With sampler "bma" the event counted is -log2 p_sw <= -log2 p_bma - margin;
    with sampler "switch" the roles are swapped. Each symbol is drawn from the
    exact one-step mixture predictive of the sampling mixture.
    """
    if trials < 1:
        raise DataValidationError(f"trials must be >= 1, got {trials}")
    if sampler not in ("bma", "switch"):
        raise DataValidationError(f"Unknown sampler {sampler!r}")
    if len(strategies) != prior.kmax:
        raise ShapeMismatchError(f"Need {prior.kmax} strategies, got {len(strategies)}")
    shapes = [_markov_shape(strategy) for strategy in strategies]
    size = shapes[0][1]
    if any(shape[1] != size for shape in shapes):
        raise ShapeMismatchError("All strategies must share one alphabet")

    rows = np.arange(trials)
    counts = [np.zeros((trials, size**order, size)) for order, _ in shapes]
    data = np.zeros((trials, n), dtype=np.int64)
    bma = bma_init(prior, (trials,))
    weights = switch_init(prior, (trials,))
    for i in range(n):
        probs = np.empty((trials, len(shapes), size))
        contexts = []
        for j, (order, _) in enumerate(shapes):
            if i < order:
                context = None
                probs[:, j, :] = 1.0 / size
            else:
                context = np.zeros(trials, dtype=np.int64)
                for lag in range(order, 0, -1):
                    context = context * size + data[:, i - lag]
                table = counts[j][rows, context]
                probs[:, j, :] = (table + 1.0) / (table.sum(axis=1, keepdims=True) + size)
            contexts.append(context)

        if sampler == "bma":
            mixing = bma_posterior(bma)
        else:
            mixing = np.zeros((trials, len(shapes)))
            mixing[:, : weights.size] = posterior_next(weights)
        predictive = np.einsum("tk,tka->ta", mixing, probs)
        cdf = np.cumsum(predictive, axis=1)
        draws = rng.random(trials)[:, None] * cdf[:, -1:]
        symbols = np.minimum((cdf <= draws).sum(axis=1), size - 1)

        logpreds = np.log(probs[rows, :, symbols])
        bma, _ = bma_step(bma, logpreds)
        weights = switch_step(weights, logpreds[:, : weights.size], prior)
        data[:, i] = symbols
        for j, context in enumerate(contexts):
            if context is not None:
                counts[j][rows, context, symbols] += 1.0

    log_sw = np.asarray(marginal_loglik(weights))
    log_bma = np.asarray(bma_log_marginal(bma))
    gain = (log_sw - log_bma) if sampler == "bma" else (log_bma - log_sw)
    frequency = float(np.mean(gain >= margin_bits * LOG2))
    p = 2.0 ** (-margin_bits)
    bound = p + 3.0 * math.sqrt(p * (1 - p) / trials)
    logger.info(
        "No-hypercompression (%s sampler, %d trials, %.1f bits): frequency %.4f, bound %.4f",
        sampler, trials, margin_bits, frequency, bound,
    )
    return HypercompressionResult(sampler, trials, margin_bits, frequency, bound)
