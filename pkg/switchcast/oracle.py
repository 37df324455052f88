"""
Brute-force switch oracle

Exact p_sw(x^N) and per-(M, K) masses for tiny instances, computed by
enumeration instead of the forward recursion. Two formulations are kept:

* prior paths: sequences of triples (S_n, M_n, K_n) where S_n flags a switch
  before outcome n, M_n flags that no further switch will happen and K_n is
  the active strategy. The path prior factors through (M_n, K_n) only.
* switch parameters: explicit plans ((t_1, k_1), ..., (t_m, k_m)) with
  t_1 = 0, weighted by the plan prior and scored piecewise.

Both are exponential in N and guarded by hard caps.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Iterator, List, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from switchcast import config
from switchcast.models import DataValidationError, EnumerationCapError, ShapeMismatchError
from switchcast.predictors import PredictionStrategy, log_predictive_matrix
from switchcast.priors import SwitchPriorConfig

logger = logging.getLogger(__name__)

LOG_ZERO = -math.inf

Step = Tuple[int, int, int]


######################################################################
#  D O M A I N   T Y P E S
######################################################################
@dataclass(frozen=True)
class SwitchParameter:
    """A switching plan: strategy k_i is active on outcomes t_i+1 .. t_{i+1}"""

    pairs: Tuple[Tuple[int, int], ...]

    def __post_init__(self):
        pairs = tuple((int(t), int(k)) for t, k in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        if not pairs:
            raise DataValidationError("A switch parameter needs at least one pair")
        if pairs[0][0] != 0:
            raise DataValidationError(f"The first switch time must be 0, got {pairs[0][0]}")
        for (before, _), (after, _) in zip(pairs, pairs[1:]):
            if after <= before:
                raise DataValidationError(f"Switch times must increase: {before} then {after}")
        if any(k < 1 for _, k in pairs):
            raise DataValidationError("Strategy indices start at 1")

    def __len__(self):
        return len(self.pairs)

    @property
    def times(self) -> Tuple[int, ...]:
        return tuple(t for t, _ in self.pairs)

    @property
    def models(self) -> Tuple[int, ...]:
        return tuple(k for _, k in self.pairs)


@dataclass(frozen=True)
class PriorPath:
    """Triples xi_n = (S_n, M_n, K_n) for n = 1..N"""

    steps: Tuple[Step, ...]

    def __len__(self):
        return len(self.steps)

    @property
    def final(self) -> Step:
        return self.steps[-1]


@dataclass
class OracleResult:
    """log p_sw(x^N) and log p_sw(x^N, M_{N+1}=m, K_{N+1}=k) as a 2 x K array"""

    log_marginal: float
    log_masses: np.ndarray


######################################################################
#  H E L P E R S
######################################################################
def _check_caps(length: int, schedule):
    if length > config.ORACLE_MAX_LENGTH:
        raise EnumerationCapError(
            f"Path length {length} exceeds the cap of {config.ORACLE_MAX_LENGTH}"
        )
    widest = max(schedule.size(n) for n in range(1, length + 1))
    if widest > config.ORACLE_MAX_MODELS:
        raise EnumerationCapError(
            f"{widest} strategies exceed the cap of {config.ORACLE_MAX_MODELS}"
        )


def _log_pk(prior: SwitchPriorConfig, k: int, n: int) -> float:
    """pi_k(k) restricted to K_n, without renormalization"""
    if 1 <= k <= prior.kset_schedule.size(n):
        return float(prior.log_model_prior[k - 1])
    return LOG_ZERO


def _log_m_bit(prior: SwitchPriorConfig, m: int) -> float:
    return prior.log_theta if m == 0 else prior.log_one_minus_theta


def _repeat(count: int, log_value: float) -> float:
    """count * log_value with 0 * log-zero taken as 0"""
    return count * log_value if count else 0.0


def _valid_first(step: Step, schedule) -> bool:
    s, m, k = step
    return s == 1 and m in (0, 1) and 1 <= k <= schedule.size(1)


def _valid_transition(prev: Step, step: Step, n: int, schedule) -> bool:
    """Whether xi_n = prev may be followed by xi_{n+1} = step"""
    _, m_prev, k_prev = prev
    s, m, k = step
    if m not in (0, 1) or s not in (0, 1):
        return False
    if m_prev == 1:
        return s == 0 and m == 1 and k == k_prev
    if s == 0:
        return m == 0 and k == k_prev
    return 1 <= k <= schedule.size(n + 1)


######################################################################
#  P R I O R   P A T H S
######################################################################
def _path_arrays(length: int, schedule):
    """All valid paths of the given length as (S, M, K) integer arrays"""
    _check_caps(length, schedule)
    first = schedule.size(1)
    s_paths = np.ones((2 * first, 1), dtype=np.int64)
    m_paths = np.repeat([0, 1], first)[:, None]
    k_paths = np.tile(np.arange(1, first + 1), 2)[:, None]
    for n in range(1, length):
        size = schedule.size(n + 1)
        count = len(s_paths)
        live = np.flatnonzero(m_paths[:, -1] == 0)
        parents = np.concatenate([np.arange(count), np.repeat(live, 2 * size)])
        new_s = np.concatenate([np.zeros(count, dtype=np.int64), np.ones(len(live) * 2 * size, dtype=np.int64)])
        new_m = np.concatenate([m_paths[:, -1], np.tile(np.repeat([0, 1], size), len(live))])
        new_k = np.concatenate([k_paths[:, -1], np.tile(np.arange(1, size + 1), 2 * len(live))])
        s_paths = np.column_stack([s_paths[parents], new_s])
        m_paths = np.column_stack([m_paths[parents], new_m])
        k_paths = np.column_stack([k_paths[parents], new_k])
    return s_paths, m_paths, k_paths


def enumerate_paths(length: int, schedule) -> List[PriorPath]:
    """Every valid prior path of the given length, each exactly once"""
    if length < 1:
        raise DataValidationError(f"Path length must be >= 1, got {length}")
    s_paths, m_paths, k_paths = _path_arrays(length, schedule)
    paths = [
        PriorPath(tuple(zip(s_row.tolist(), m_row.tolist(), k_row.tolist())))
        for s_row, m_row, k_row in zip(s_paths, m_paths, k_paths)
    ]
    logger.debug("Enumerated %d prior paths of length %d", len(paths), length)
    return paths


def conditional_prior_mk(prev: Step, step: Step, n: int, prior: SwitchPriorConfig) -> float:
    """log pi(xi_{n+1} | xi^n), looking only at (M_n, K_n) of the last triple"""
    if not _valid_transition(prev, step, n, prior.kset_schedule):
        return LOG_ZERO
    s, m, k = step
    if prev[1] == 1:
        return 0.0
    log_hazard, log_stay = prior.log_hazard(n)
    if s == 0:
        return log_stay
    return log_hazard + _log_pk(prior, k, n + 1) + _log_m_bit(prior, m)


def prefix_log_prior(history: Sequence[Step], prior: SwitchPriorConfig) -> float:
    """log pi(xi^n) computed from the switch parameters the prefix pins down"""
    schedule = prior.kset_schedule
    history = list(history)
    if not history or not _valid_first(history[0], schedule):
        return LOG_ZERO
    for n, (prev, step) in enumerate(zip(history, history[1:]), start=1):
        if not _valid_transition(prev, step, n, schedule):
            return LOG_ZERO

    starts = [j for j, (s, _, _) in enumerate(history, start=1) if s == 1]
    times = [j - 1 for j in starts]
    total = sum(_log_pk(prior, history[j - 1][2], j) for j in starts)
    law = prior.switch_time_prior
    for before, after in zip(times, times[1:]):
        total += law.log_pmf(after) - law.log_tail(before + 1)
    switches = len(times)
    if history[-1][1] == 1:
        return total + _repeat(switches - 1, prior.log_theta) + prior.log_one_minus_theta
    tail = law.log_tail(len(history)) - law.log_tail(times[-1] + 1)
    return total + _repeat(switches, prior.log_theta) + tail


def conditional_prior(history: Sequence[Step], step: Step, prior: SwitchPriorConfig) -> float:
    """log pi(xi_{n+1} | xi^n) as a ratio of full-history prefix priors"""
    before = prefix_log_prior(history, prior)
    if before == LOG_ZERO:
        return LOG_ZERO
    return prefix_log_prior(list(history) + [step], prior) - before


def path_prior(path, prior: SwitchPriorConfig) -> float:
    """log of pi(xi_1) times the (M, K) conditionals along the path"""
    steps = path.steps if isinstance(path, PriorPath) else tuple(path)
    if not steps or not _valid_first(steps[0], prior.kset_schedule):
        return LOG_ZERO
    _, m, k = steps[0]
    total = _log_pk(prior, k, 1) + _log_m_bit(prior, m)
    for n, (prev, step) in enumerate(zip(steps, steps[1:]), start=1):
        total += conditional_prior_mk(prev, step, n, prior)
        if total == LOG_ZERO:
            break
    return total


def _path_log_priors(s_paths, m_paths, k_paths, prior: SwitchPriorConfig) -> np.ndarray:
    """Vectorized path_prior over enumerated paths"""
    log_pk = prior.log_model_prior
    log_bits = np.array([prior.log_theta, prior.log_one_minus_theta])
    total = log_pk[k_paths[:, 0] - 1] + log_bits[m_paths[:, 0]]
    with np.errstate(invalid="ignore"):
        for n in range(1, s_paths.shape[1]):
            log_hazard, log_stay = prior.log_hazard(n)
            switched = log_hazard + log_pk[k_paths[:, n] - 1] + log_bits[m_paths[:, n]]
            stayed = np.where(m_paths[:, n - 1] == 0, log_stay, 0.0)
            total = total + np.where(s_paths[:, n] == 1, switched, stayed)
    return total


def path_masses(length: int, prior: SwitchPriorConfig) -> np.ndarray:
    """exp(path_prior) for every path of the given length"""
    arrays = _path_arrays(length, prior.kset_schedule)
    return np.exp(_path_log_priors(*arrays, prior))


def _strategy_matrix(sequence, strategies: Sequence[PredictionStrategy], needed: int) -> np.ndarray:
    if len(strategies) < needed:
        raise ShapeMismatchError(f"Need at least {needed} strategies, got {len(strategies)}")
    if len(sequence) == 0:
        return np.zeros((0, len(strategies)))
    return log_predictive_matrix(strategies, sequence)


def _fold_masses(log_joint, final_m, final_k, size: int) -> OracleResult:
    masses = np.full((2, size), LOG_ZERO)
    for m in (0, 1):
        for k in range(1, size + 1):
            selected = log_joint[(final_m == m) & (final_k == k)]
            if len(selected):
                masses[m, k - 1] = logsumexp(selected)
    return OracleResult(float(logsumexp(masses)), masses)


def brute_force_switch(sequence, strategies: Sequence[PredictionStrategy], prior: SwitchPriorConfig) -> OracleResult:
    """Sums path prior times path likelihood over every path of length N+1"""
    length = len(sequence) + 1
    schedule = prior.kset_schedule
    matrix = _strategy_matrix(sequence, strategies, schedule.size(max(1, length - 1)))
    s_paths, m_paths, k_paths = _path_arrays(length, schedule)
    log_joint = _path_log_priors(s_paths, m_paths, k_paths, prior)
    if length > 1:
        rows = np.arange(length - 1)
        log_joint = log_joint + matrix[rows, k_paths[:, :-1] - 1].sum(axis=1)
    return _fold_masses(log_joint, m_paths[:, -1], k_paths[:, -1], schedule.size(length))


######################################################################
#  S W I T C H   P A R A M E T E R S
######################################################################
def q_s_loglik(s: SwitchParameter, strategies: Sequence[PredictionStrategy], sequence) -> float:
    """log q_s(x^n): strategy k_i scores the outcomes t_i+1 .. t_{i+1}"""
    if len(sequence) == 0:
        return 0.0
    if max(s.models) > len(strategies):
        raise ShapeMismatchError(f"Plan uses strategy {max(s.models)} of {len(strategies)}")
    matrix = log_predictive_matrix(strategies, sequence)
    return _q_from_matrix(s, matrix)


def _q_from_matrix(s: SwitchParameter, matrix: np.ndarray) -> float:
    count = len(matrix)
    if count == 0:
        return 0.0
    active = np.searchsorted(np.asarray(s.times), np.arange(count), side="right") - 1
    models = np.asarray(s.models)[active]
    return float(matrix[np.arange(count), models - 1].sum())


def _plan_core(s: SwitchParameter, prior: SwitchPriorConfig) -> float:
    """pi_k and pi_t factors of a plan, without the theta terms"""
    law = prior.switch_time_prior
    total = sum(_log_pk(prior, k, t + 1) for t, k in s.pairs)
    for before, after in zip(s.times, s.times[1:]):
        total += law.log_pmf(after) - law.log_tail(before + 1)
    return total


def switch_parameter_prior(s: SwitchParameter, horizon: int, prior: SwitchPriorConfig) -> Tuple[float, float]:
    """(log pi(s), log mass of plans extending s with no further switch up to horizon)

    pi(s) = theta^(m-1)(1-theta) times the pi_k and pi_t factors. The second
    value is theta^m pi_t(T > horizon | T > t_m) times the same factors; the
    strategy prior of a later switch is charged when that switch happens.
    """
    if s.times[-1] > horizon:
        raise DataValidationError(f"Plan switches at {s.times[-1]}, after the horizon {horizon}")
    law = prior.switch_time_prior
    core = _plan_core(s, prior)
    ended = core + _repeat(len(s) - 1, prior.log_theta) + prior.log_one_minus_theta
    tail = law.log_tail(horizon + 1) - law.log_tail(s.times[-1] + 1)
    return ended, core + _repeat(len(s), prior.log_theta) + tail


def enumerate_switch_parameters(horizon: int, schedule) -> Iterator[SwitchParameter]:
    """Every plan whose later switch times lie in 1..horizon"""
    widest = max(schedule.size(t + 1) for t in range(horizon + 1))
    total = widest * (1 + widest) ** horizon
    if horizon > config.ORACLE_MAX_LENGTH or total > config.ORACLE_MAX_PARAMETERS:
        raise EnumerationCapError(f"Enumerating plans up to time {horizon} is too large ({total})")
    for count in range(horizon + 1):
        for later in itertools.combinations(range(1, horizon + 1), count):
            times = (0,) + later
            choices = [range(1, schedule.size(t + 1) + 1) for t in times]
            for models in itertools.product(*choices):
                yield SwitchParameter(tuple(zip(times, models)))


def brute_force_by_parameters(
    sequence, strategies: Sequence[PredictionStrategy], prior: SwitchPriorConfig
) -> OracleResult:
    """Per-(M, K) masses from plans with all switch times <= N

    Plans that end at m segments land on M_{N+1}=1, plans that continue with
    no further switch up to N land on M_{N+1}=0.
    """
    horizon = len(sequence)
    schedule = prior.kset_schedule
    _check_caps(horizon + 1, schedule)
    matrix = _strategy_matrix(sequence, strategies, schedule.size(max(1, horizon)))
    size = schedule.size(horizon + 1)
    log_joint, final_m, final_k = [], [], []
    for s in enumerate_switch_parameters(horizon, schedule):
        ended, continuing = switch_parameter_prior(s, horizon, prior)
        q = _q_from_matrix(s, matrix)
        log_joint.extend([ended + q, continuing + q])
        final_m.extend([1, 0])
        final_k.extend([s.models[-1]] * 2)
    return _fold_masses(np.asarray(log_joint), np.asarray(final_m), np.asarray(final_k), size)
