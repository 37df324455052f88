"""
Prediction strategies

Sequential prediction strategies issue a predictive distribution for the
next outcome given the past. The built-in families are Bayesian: the
Bernoulli-Laplace rule, Markov chains of fixed order with Dirichlet(1,...,1)
priors on the transition probabilities, and equal-width histograms on [0,1]
with uniform priors on the bin probabilities.

Every family can be run two ways: one outcome at a time through immutable
strategy states (observe / predict), or over a whole sequence at once with
log_predictive_sequence, which computes the same numbers with array code.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import singledispatch
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.special import gammaln

from switchcast import config
from switchcast.models import DataValidationError, OutcomeError

logger = logging.getLogger(__name__)

_KEY_LIMIT = 2**62


######################################################################
#  A L P H A B E T S
######################################################################
@dataclass(frozen=True)
class Alphabet:
    """Sample space: symbols 0..size-1, or the unit interval when size is None"""

    size: Optional[int] = None

    def __post_init__(self):
        if self.size is not None and self.size < 1:
            raise DataValidationError(f"Invalid Alphabet: size {self.size} must be >= 1")

    @classmethod
    def finite(cls, size: int) -> "Alphabet":
        return cls(size=size)

    @classmethod
    def unit_interval(cls) -> "Alphabet":
        return cls(size=None)

    @property
    def is_finite(self) -> bool:
        return self.size is not None

    def validate(self, outcome):
        """Raises OutcomeError unless the outcome belongs to the alphabet"""
        if self.is_finite:
            if isinstance(outcome, (bool, np.bool_)) or not isinstance(outcome, (int, np.integer)):
                raise OutcomeError(f"Outcome {outcome!r} is not a symbol")
            if not 0 <= outcome < self.size:
                raise OutcomeError(f"Outcome {outcome} outside alphabet of size {self.size}")
        else:
            value = float(outcome)
            if not 0.0 <= value <= 1.0:
                raise OutcomeError(f"Outcome {outcome} outside [0,1]")
        return outcome

    def validate_sequence(self, sequence) -> np.ndarray:
        """Returns the sequence as an array, rejecting invalid outcomes"""
        if self.is_finite:
            data = np.asarray(sequence)
            if data.size == 0:
                return np.zeros(0, dtype=np.int64)
            if not np.issubdtype(data.dtype, np.integer):
                raise OutcomeError("Finite-alphabet sequences must hold integer symbols")
            data = data.astype(np.int64, copy=False)
            if data.min() < 0 or data.max() >= self.size:
                raise OutcomeError(f"Sequence has symbols outside alphabet of size {self.size}")
            return data
        data = np.asarray(sequence, dtype=float)
        if data.size and (np.isnan(data).any() or data.min() < 0.0 or data.max() > 1.0):
            raise OutcomeError("Unit-interval sequences must lie in [0,1]")
        return data


######################################################################
#  P R E D I C T I V E   D I S T R I B U T I O N S
######################################################################
class PredictiveDistribution:
    """One-step predictive law over an alphabet"""

    alphabet: Alphabet

    def prob(self, outcome) -> float:
        """Probability of a symbol, or density at a point of [0,1]"""
        raise NotImplementedError

    def log_prob(self, outcome) -> float:
        value = self.prob(outcome)
        return math.log(value) if value > 0 else -math.inf

    def total_mass(self) -> float:
        """Sum of probabilities, or integral of the density"""
        raise NotImplementedError

    def is_normalized(self, tolerance: float = config.PREDICTIVE_TOLERANCE) -> bool:
        return abs(self.total_mass() - 1.0) <= tolerance


class FiniteDistribution(PredictiveDistribution):
    """Probability vector indexed by symbol"""

    def __init__(self, probs):
        self.probs = np.asarray(probs, dtype=float)
        self.alphabet = Alphabet.finite(len(self.probs))

    def __repr__(self):
        return f"<FiniteDistribution size={len(self.probs)}>"

    def prob(self, outcome) -> float:
        self.alphabet.validate(outcome)
        return float(self.probs[outcome])

    def total_mass(self) -> float:
        return float(self.probs.sum())


class HistogramDistribution(PredictiveDistribution):
    """Piecewise-constant density over k equal-width bins of [0,1]"""

    def __init__(self, densities):
        self.densities = np.asarray(densities, dtype=float)
        self.alphabet = Alphabet.unit_interval()

    def __repr__(self):
        return f"<HistogramDistribution bins={self.bins}>"

    @property
    def bins(self) -> int:
        return len(self.densities)

    def bin_probs(self) -> np.ndarray:
        """Probability mass of each bin"""
        return self.densities / self.bins

    def prob(self, outcome) -> float:
        self.alphabet.validate(outcome)
        return float(self.densities[bin_index(outcome, self.bins)])

    def total_mass(self) -> float:
        return float(self.densities.mean())


class MixtureDistribution(PredictiveDistribution):
    """Finite mixture of predictive distributions over a common alphabet"""

    def __init__(self, weights, components: Sequence[PredictiveDistribution]):
        self.weights = np.asarray(weights, dtype=float)
        self.components = tuple(components)
        if len(self.weights) != len(self.components) or not self.components:
            raise DataValidationError("Mixture needs one weight per component")
        self.alphabet = self.components[0].alphabet
        if any(item.alphabet != self.alphabet for item in self.components):
            raise DataValidationError("Mixture components must share an alphabet")

    def __repr__(self):
        return f"<MixtureDistribution components={len(self.components)}>"

    def prob(self, outcome) -> float:
        return float(sum(w * c.prob(outcome) for w, c in zip(self.weights, self.components)))

    def probs(self) -> np.ndarray:
        """Mixture probability vector, finite alphabets only"""
        if not self.alphabet.is_finite:
            raise DataValidationError("Only finite mixtures have a probability vector")
        return sum(w * c.probs for w, c in zip(self.weights, self.components))

    def total_mass(self) -> float:
        return float(sum(w * c.total_mass() for w, c in zip(self.weights, self.components)))


######################################################################
#  S T R A T E G Y   S T A T E S
######################################################################
@dataclass(frozen=True)
class BernoulliState:
    """Counts of zeros and ones seen so far"""

    n0: int = 0
    n1: int = 0


@dataclass(frozen=True)
class MarkovState:
    """Per-context symbol counts of an order-r chain plus its recent history"""

    order: int
    alphabet_size: int
    counts: Mapping[Tuple[int, ...], Mapping[int, int]] = field(default_factory=dict)
    history: Tuple[int, ...] = ()
    n: int = 0

    def context_counts(self, context: Tuple[int, ...]) -> np.ndarray:
        row = np.zeros(self.alphabet_size)
        for symbol, count in self.counts.get(tuple(context), {}).items():
            row[symbol] = count
        return row


@dataclass(frozen=True)
class HistogramState:
    """Per-bin counts of a k-bin histogram"""

    counts: Tuple[int, ...]
    n: int = 0

    @property
    def bins(self) -> int:
        return len(self.counts)


######################################################################
#  P R E D I C T   O P E R A T I O N S
######################################################################
def bernoulli_laplace_predict(state: BernoulliState) -> FiniteDistribution:
    """Laplace rule: P(1) = (n1 + 1) / (n0 + n1 + 2)"""
    p_one = (state.n1 + 1) / (state.n0 + state.n1 + 2)
    return FiniteDistribution([1.0 - p_one, p_one])


def markov_dirichlet_predict(state: MarkovState, context=None) -> FiniteDistribution:
    """Dirichlet(1,...,1) predictive for the symbol following a context

    The context defaults to the last r symbols observed. While fewer than r
    symbols are available the prediction is uniform.
    """
    size = state.alphabet_size
    if context is None:
        context = state.history
    context = tuple(context)
    if len(context) < state.order:
        return FiniteDistribution(np.full(size, 1.0 / size))
    if len(context) != state.order:
        raise DataValidationError(
            f"Context of length {len(context)} given to an order-{state.order} chain"
        )
    row = state.context_counts(context)
    return FiniteDistribution((row + 1.0) / (row.sum() + size))


def histogram_predict(state: HistogramState, x) -> float:
    """Density of the add-one histogram estimator at x"""
    Alphabet.unit_interval().validate(x)
    k = state.bins
    return (state.counts[bin_index(x, k)] + 1) / (state.n + k) * k


def histogram_distribution(state: HistogramState) -> HistogramDistribution:
    """The whole k-bin predictive density"""
    k = state.bins
    counts = np.asarray(state.counts, dtype=float)
    return HistogramDistribution((counts + 1.0) / (state.n + k) * k)


######################################################################
#  O B S E R V E
######################################################################
@singledispatch
def observe(state, outcome):
    """Returns the state after one more outcome; the input state is unchanged"""
    raise DataValidationError(f"Cannot observe outcomes for {type(state).__name__}")


@observe.register
def _(state: BernoulliState, outcome):
    Alphabet.finite(2).validate(outcome)
    if outcome == 1:
        return BernoulliState(state.n0, state.n1 + 1)
    return BernoulliState(state.n0 + 1, state.n1)


@observe.register
def _(state: MarkovState, outcome):
    Alphabet.finite(state.alphabet_size).validate(outcome)
    outcome = int(outcome)
    counts = state.counts
    if len(state.history) == state.order:
        counts = dict(state.counts)
        row = dict(counts.get(state.history, {}))
        row[outcome] = row.get(outcome, 0) + 1
        counts[state.history] = row
    history = (state.history + (outcome,))[-state.order:] if state.order else ()
    return MarkovState(state.order, state.alphabet_size, counts, history, state.n + 1)


@observe.register
def _(state: HistogramState, outcome):
    Alphabet.unit_interval().validate(outcome)
    counts = list(state.counts)
    counts[bin_index(outcome, state.bins)] += 1
    return HistogramState(tuple(counts), state.n + 1)


######################################################################
#  S T R A T E G Y   F A M I L I E S
######################################################################
class PredictionStrategy:
    """Base class for a family of sequential prediction strategies"""

    label = "strategy"
    alphabet = Alphabet()

    def __repr__(self):
        return f"<{type(self).__name__} {self.label}>"

    def __eq__(self, other):
        return type(self) is type(other) and (self.label, self.alphabet) == (other.label, other.alphabet)

    def __hash__(self):
        return hash((type(self).__name__, self.label, self.alphabet))

    def initial_state(self):
        raise NotImplementedError

    def predict(self, state) -> PredictiveDistribution:
        raise NotImplementedError

    def observe(self, state, outcome):
        return observe(state, outcome)

    def log_predictive(self, state, outcome) -> float:
        """Natural log of the probability (or density) given to an outcome"""
        return self.predict(state).log_prob(outcome)

    def log_predictive_sequence(self, sequence) -> np.ndarray:
        """Per-position log predictives over a whole sequence"""
        raise NotImplementedError


class BernoulliLaplace(PredictionStrategy):
    """Laplace estimator over {0,1}"""

    label = "bernoulli"
    alphabet = Alphabet.finite(2)

    def initial_state(self) -> BernoulliState:
        return BernoulliState()

    def predict(self, state) -> FiniteDistribution:
        return bernoulli_laplace_predict(state)

    def log_predictive_sequence(self, sequence) -> np.ndarray:
        data = self.alphabet.validate_sequence(sequence)
        seen = np.arange(len(data), dtype=float)
        ones = np.cumsum(data) - data
        hits = np.where(data == 1, ones, seen - ones)
        return np.log(hits + 1.0) - np.log(seen + 2.0)


class MarkovDirichlet(PredictionStrategy):
    """Order-r Markov chain with Dirichlet(1,...,1) transition priors"""

    def __init__(self, order: int, alphabet_size: int):
        if order < 0:
            raise DataValidationError(f"Markov order {order} must be >= 0")
        if alphabet_size ** (order + 1) >= _KEY_LIMIT:
            raise DataValidationError(
                f"Markov order {order} over {alphabet_size} symbols has too many contexts"
            )
        self.order = order
        self.alphabet = Alphabet.finite(alphabet_size)
        self.label = f"markov:{order}"

    def initial_state(self) -> MarkovState:
        return MarkovState(self.order, self.alphabet.size)

    def predict(self, state) -> FiniteDistribution:
        return markov_dirichlet_predict(state)

    def log_predictive_sequence(self, sequence) -> np.ndarray:
        data = self.alphabet.validate_sequence(sequence)
        size, order = self.alphabet.size, self.order
        result = np.full(len(data), -math.log(size))
        if len(data) <= order:
            return result
        context = np.zeros(len(data) - order, dtype=np.int64)
        for lag in range(order, 0, -1):
            context = context * size + data[order - lag:len(data) - lag]
        pair = context * size + data[order:]
        hits = occurrences_before(pair)
        totals = occurrences_before(context)
        result[order:] = np.log(hits + 1.0) - np.log(totals + float(size))
        return result


class HistogramEstimator(PredictionStrategy):
    """Add-one histogram density estimator with k equal-width bins"""

    alphabet = Alphabet.unit_interval()

    def __init__(self, bins: int):
        if bins < 1:
            raise DataValidationError(f"Histogram needs at least one bin, got {bins}")
        self.bins = bins
        self.label = f"histogram:{bins}"

    def initial_state(self) -> HistogramState:
        return HistogramState((0,) * self.bins)

    def predict(self, state) -> HistogramDistribution:
        return histogram_distribution(state)

    def log_predictive(self, state, outcome) -> float:
        return math.log(histogram_predict(state, outcome))

    def log_predictive_sequence(self, sequence) -> np.ndarray:
        data = self.alphabet.validate_sequence(sequence)
        k = self.bins
        hits = occurrences_before(bin_index(data, k))
        seen = np.arange(len(data), dtype=float)
        return np.log(hits + 1.0) - np.log(seen + k) + math.log(k)


def parse_family(spec: str, alphabet_size: Optional[int]) -> PredictionStrategy:
    """Builds a strategy family from a spec such as markov:2 or histogram:4"""
    name, _, arg = spec.strip().partition(":")
    try:
        if name == "bernoulli" and not arg:
            if alphabet_size != 2:
                raise DataValidationError("bernoulli needs the binary alphabet")
            return BernoulliLaplace()
        if name == "markov":
            if alphabet_size is None:
                raise DataValidationError("markov needs a finite alphabet")
            return MarkovDirichlet(int(arg), alphabet_size)
        if name == "histogram":
            if alphabet_size is not None:
                raise DataValidationError("histogram needs the unit-interval alphabet")
            return HistogramEstimator(int(arg))
    except ValueError as error:
        raise DataValidationError(f"Invalid family spec {spec!r}: {error}") from error
    raise DataValidationError(f"Invalid family spec {spec!r}")


######################################################################
#  M A R G I N A L S
######################################################################
def strategy_log_marginal(family: PredictionStrategy, sequence) -> float:
    """Accumulated log loss: sum of log p(x_i | x^{i-1}); 0 for empty input"""
    return float(np.sum(family.log_predictive_sequence(sequence)))


def sequential_log_marginal(family: PredictionStrategy, sequence) -> float:
    """The same chain-rule sum, one observe/predict step at a time"""
    state = family.initial_state()
    total = 0.0
    for outcome in sequence:
        total += family.log_predictive(state, outcome)
        state = family.observe(state, outcome)
    return total


def bernoulli_exact_marginal(n0: int, n1: int) -> float:
    """log(n1! n0! / (n0 + n1 + 1)!), the Beta(1,1) marginal likelihood"""
    if n0 < 0 or n1 < 0:
        raise DataValidationError("Counts must be non-negative")
    return float(gammaln(n1 + 1) + gammaln(n0 + 1) - gammaln(n0 + n1 + 2))


def log_predictive_matrix(families: Sequence[PredictionStrategy], sequence) -> np.ndarray:
    """N x K matrix of log predictives, one column per family"""
    if not families:
        raise DataValidationError("At least one strategy family is required")
    columns = [family.log_predictive_sequence(sequence) for family in families]
    return np.column_stack(columns) if len(columns[0]) else np.zeros((0, len(columns)))


######################################################################
#  U T I L I T Y   F U N C T I O N S
######################################################################
def bin_index(x, k: int):
    """0-based bin of x for bins [0,1/k], (1/k,2/k], ..., ((k-1)/k,1]"""
    values = np.asarray(x, dtype=float)
    index = np.ceil(values * k) - 1
    # correct rounding of x*k at bin edges
    index = index - ((index >= 1) & (values <= index / k))
    index = index + ((index < k - 1) & (values > (index + 1) / k))
    index = np.clip(index, 0, k - 1).astype(np.int64)
    return int(index) if index.ndim == 0 else index


def occurrences_before(keys) -> np.ndarray:
    """For each position, how often its key occurred at earlier positions"""
    keys = np.asarray(keys)
    count = len(keys)
    if count == 0:
        return np.zeros(0)
    order = np.argsort(keys, kind="stable")
    ranked = keys[order]
    starts = np.empty(count, dtype=bool)
    starts[0] = True
    starts[1:] = ranked[1:] != ranked[:-1]
    positions = np.arange(count)
    group_start = np.maximum.accumulate(np.where(starts, positions, 0))
    result = np.empty(count)
    result[order] = positions - group_start
    return result
