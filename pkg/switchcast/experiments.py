"""
Experiments

Harnesses for the catch-up curve on text, the histogram cumulative-risk
comparison, consistency of switch model selection and the cross-check of
two redundancy estimators. Replicates are independent: each draws from its
own Philox stream keyed by (top-level seed, stream, replicate index) and the
results are folded in replicate order, so the worker count never changes the
output.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from switchcast import config
from switchcast.baselines import bma_prefix_log_marginals, check_ordering, cuberoot_criterion
from switchcast.models import DataValidationError, InvariantViolation
from switchcast.predictors import (
    HistogramEstimator,
    MarkovDirichlet,
    PredictionStrategy,
    bin_index,
    log_predictive_matrix,
)
from switchcast.priors import SwitchPriorConfig
from switchcast.sources import (
    STREAM_CONSISTENCY,
    STREAM_CROSS_CHECK,
    STREAM_HISTSIM,
    SourceDensity,
    clip_kl,
    make_rng,
    sample_bernoulli,
    sample_binary_markov,
    sample_source,
)
from switchcast.switch import SwitchDistribution

logger = logging.getLogger(__name__)

LOG2 = math.log(2)
LAST_STEPS = 100


######################################################################
#  G R I D S   A N D   P O O L S
######################################################################
def geometric_grid(n_max: int, ratio: float = config.GRID_RATIO) -> List[int]:
    """Sorted distinct ceil(ratio^j) up to n_max, always ending at n_max"""
    if n_max < 1:
        raise DataValidationError(f"Grid needs n_max >= 1, got {n_max}")
    points = {n_max}
    j = 0
    while True:
        point = math.ceil(ratio**j - 1e-9)
        if point > n_max:
            break
        points.add(point)
        j += 1
    return sorted(points)


def _pool_map(function, tasks: Sequence, workers: int) -> list:
    """Maps tasks in order, inline for one worker"""
    if workers <= 1 or len(tasks) <= 1:
        return [function(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as executor:
        return list(executor.map(function, tasks))


def _standard_error(values: np.ndarray) -> np.ndarray:
    """Across-replicate standard error of the mean along axis 0; 0 for one replicate"""
    count = values.shape[0]
    if count < 2:
        return np.zeros(values.shape[1:])
    return values.std(axis=0, ddof=1) / math.sqrt(count)


######################################################################
#  C A T C H - U P
######################################################################
@dataclass
class CatchupRow:
    """Code lengths in bits and the switch posterior after n outcomes"""

    n: int
    labels: Tuple[str, ...]
    codelen_bits: Tuple[float, ...]
    codelen_bits_bma: float
    codelen_bits_sw: float
    posterior: Tuple[float, ...]
    selected: str

    def header(self) -> List[str]:
        return (
            ["n"]
            + [f"codelen_bits_{label}" for label in self.labels]
            + ["codelen_bits_bma", "codelen_bits_sw"]
            + [f"post_{label}" for label in self.labels]
            + ["selected"]
        )

    def record(self) -> list:
        return (
            [self.n]
            + list(self.codelen_bits)
            + [self.codelen_bits_bma, self.codelen_bits_sw]
            + list(self.posterior)
            + [self.selected]
        )


def _record_points(total: int, stride: int) -> List[int]:
    points = list(range(stride, total + 1, stride))
    if not points or points[-1] != total:
        points.append(total)
    return points


def run_families(
    data,
    families: Sequence[PredictionStrategy],
    prior: SwitchPriorConfig,
    stride: int,
    labels: Optional[Sequence[str]] = None,
    selected_names: Optional[Sequence[str]] = None,
) -> List[CatchupRow]:
    """Single pass recording per-family, BMA and switch code lengths every `stride` outcomes"""
    if len(data) == 0:
        raise DataValidationError("Need at least one outcome")
    if len(families) != prior.kmax:
        raise DataValidationError(f"{len(families)} families for a prior over {prior.kmax} strategies")
    labels = tuple(labels or [family.label.replace(":", "") for family in families])
    names = tuple(selected_names or [family.label for family in families])

    matrix = log_predictive_matrix(families, data)
    cumulative = np.cumsum(matrix, axis=0)
    bma = bma_prefix_log_marginals(matrix, prior.log_model_prior)
    points = _record_points(len(data), stride)
    report = SwitchDistribution(prior).run(matrix, record=points)

    index = np.asarray(report.n)
    verify_records(
        np.asarray(report.log_marginal),
        bma[index],
        cumulative[index - 1],
        report.posterior,
        prior,
        monotone=all(family.alphabet.is_finite for family in families),
    )
    rows = []
    for n, log_sw, posterior, selected in zip(report.n, report.log_marginal, report.posterior, report.selected):
        padded = np.zeros(len(families))
        padded[: len(posterior)] = posterior
        rows.append(
            CatchupRow(
                n=n,
                labels=labels,
                codelen_bits=tuple(-cumulative[n - 1] / LOG2),
                codelen_bits_bma=float(-bma[n] / LOG2),
                codelen_bits_sw=float(-log_sw / LOG2),
                posterior=tuple(padded),
                selected=names[selected - 1],
            )
        )
    return rows


def run_catchup(corpus, orders: Sequence[int], prior: SwitchPriorConfig, stride: int = 1000) -> List[CatchupRow]:
    """Catch-up curve for Markov orders over a byte corpus"""
    if len(set(orders)) != len(orders):
        raise DataValidationError(f"Orders must be distinct: {list(orders)}")
    families = [MarkovDirichlet(order, config.BYTE_ALPHABET_SIZE) for order in orders]
    logger.info("Catch-up over %d bytes for orders %s", len(corpus), list(orders))
    return run_families(
        corpus,
        families,
        prior,
        stride,
        labels=[f"k{order}" for order in orders],
        selected_names=[str(order) for order in orders],
    )


def verify_records(
    log_sw, log_bma, log_k, posteriors, prior: SwitchPriorConfig, monotone: bool = True
) -> Dict[str, int]:
    """Checks the switch/BMA ordering, posterior normalization and monotone code lengths

    Arrays hold natural-log marginals at the recorded sample sizes, one row each.
    Code lengths of densities may decrease, so `monotone` is off for them.
    """
    count = len(log_sw)
    if prior.kset_schedule.size(1) == prior.kmax:
        try:
            check_ordering(log_sw, log_bma, log_k, prior, "in emitted rows")
        except InvariantViolation as error:
            logger.error(str(error))
            raise
        logger.info("invariant ok: switch-bma band (%d checks)", count)
    else:
        logger.info("switch-bma band skipped: index sets grow with n")

    totals = np.array([float(np.sum(posterior)) for posterior in posteriors])
    if np.any(np.abs(totals - 1.0) > config.POSTERIOR_TOLERANCE):
        logger.error("Posterior does not sum to one in an emitted row")
        raise InvariantViolation("switch posterior is not normalized")
    logger.info("invariant ok: posterior normalization (%d checks)", count)
    checks = {"switch-bma band": count, "posterior normalization": count}
    if not monotone:
        return checks

    lengths = -np.column_stack([log_k, log_bma, log_sw]) / LOG2
    if np.any(np.diff(lengths, axis=0) < -config.ORDERING_TOLERANCE):
        logger.error("A cumulative code length decreased")
        raise InvariantViolation("cumulative code lengths must be nondecreasing")
    logger.info("invariant ok: nondecreasing code lengths (%d checks)", lengths.size)
    checks["monotone code length"] = lengths.size
    return checks


def catchup_crossovers(rows: Sequence[CatchupRow], first: str, second: str) -> List[int]:
    """Sample sizes where codelen(first) - codelen(second) changes sign"""
    labels = rows[0].labels if rows else ()
    if first not in labels or second not in labels:
        raise DataValidationError(f"Unknown labels {first!r}, {second!r}")
    i, j = labels.index(first), labels.index(second)
    crossings = []
    previous = 0.0
    for row in rows:
        sign = np.sign(row.codelen_bits[i] - row.codelen_bits[j])
        if sign != 0 and previous != 0 and sign != previous:
            crossings.append(row.n)
        if sign != 0:
            previous = sign
    return crossings


######################################################################
#  H I S T O G R A M   R I S K
######################################################################
@dataclass
class RiskCurve:
    """Mean cumulative redundancy in bits across replicates on a grid of n"""

    estimator: str
    grid: Tuple[int, ...]
    mean: Tuple[float, ...]
    se: Tuple[float, ...]
    replicates: int
    seed: int


@dataclass
class ReplicateResult:
    """Realized cumulative redundancy of every estimator for one replicate"""

    index: int
    grid: Tuple[int, ...]
    redundancy: Dict[str, np.ndarray] = field(default_factory=dict)
    final_posterior: Optional[np.ndarray] = None


def estimator_bins(label: str, n: int) -> int:
    """Largest bin count an estimator needs over n outcomes"""
    if label == "cuberoot":
        return cuberoot_criterion(max(n - 1, 0))
    if label.startswith("fixed:"):
        return int(label.split(":", 1)[1])
    return 0


def _histogram_matrix(data, bins: int) -> np.ndarray:
    families = [HistogramEstimator(k) for k in range(1, bins + 1)]
    return log_predictive_matrix(families, data)


def _estimator_log_marginals(label, matrix, prior, grid) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """log p_hat(x^n) at grid points; also the final switch posterior"""
    index = np.asarray(grid) - 1
    if label == "switch":
        report = SwitchDistribution(prior).run(matrix[:, : prior.kmax], record=grid)
        return np.asarray(report.log_marginal), report.posterior[-1]
    if label == "bma":
        return bma_prefix_log_marginals(matrix[:, : prior.kmax], prior.log_model_prior)[index + 1], None
    if label == "cuberoot":
        columns = np.array([cuberoot_criterion(i) for i in range(len(matrix))]) - 1
        chosen = matrix[np.arange(len(matrix)), columns]
        return np.cumsum(chosen)[index], None
    k = int(label.split(":", 1)[1])
    return np.cumsum(matrix[:, k - 1])[index], None


def _histsim_replicate(task) -> ReplicateResult:
    density, n_max, estimators, prior, seed, index = task
    rng = make_rng(seed, STREAM_HISTSIM, index)
    data = sample_source(density, rng, n_max)
    grid = tuple(geometric_grid(n_max))
    bins = max([prior.kmax] + [estimator_bins(label, n_max) for label in estimators])
    matrix = _histogram_matrix(data, bins)
    log_true = np.cumsum(density.log_density(data))[np.asarray(grid) - 1]
    result = ReplicateResult(index, grid)
    for label in estimators:
        log_hat, posterior = _estimator_log_marginals(label, matrix, prior, grid)
        result.redundancy[label] = (log_true - log_hat) / LOG2
        if posterior is not None:
            result.final_posterior = posterior
    return result


def histsim_replicates(
    density: SourceDensity,
    n_max: int,
    replicates: int,
    estimators: Sequence[str],
    prior: SwitchPriorConfig,
    seed: int,
    workers: int = 1,
) -> List[ReplicateResult]:
    """Per-replicate realized redundancies, ordered by replicate index"""
    if not density.in_rate_class:
        logger.warning(
            "Source %s is outside the smooth class (c0=%.3g, c1=%.3g, c2=%.3g)",
            density.label, density.c0, density.c1, density.c2,
        )
    tasks = [(density, n_max, tuple(estimators), prior, seed, index) for index in range(replicates)]
    logger.info("Histogram simulation: %d replicates of n=%d on %d workers", replicates, n_max, workers)
    return _pool_map(_histsim_replicate, tasks, workers)


def run_histsim(
    density: SourceDensity,
    n_max: int,
    replicates: int,
    estimators: Sequence[str],
    prior: SwitchPriorConfig,
    seed: int,
    workers: int = 1,
) -> List[RiskCurve]:
    """Mean cumulative redundancy curves, one per estimator"""
    results = histsim_replicates(density, n_max, replicates, estimators, prior, seed, workers)
    curves = []
    for label in estimators:
        values = np.vstack([result.redundancy[label] for result in results])
        if not np.all(np.isfinite(values)):
            raise InvariantViolation(f"non-finite redundancy for estimator {label}")
        curves.append(
            RiskCurve(
                estimator=label,
                grid=results[0].grid,
                mean=tuple(values.mean(axis=0)),
                se=tuple(_standard_error(values)),
                replicates=replicates,
                seed=seed,
            )
        )
    return curves


######################################################################
#  C O N S I S T E N C Y
######################################################################
@dataclass
class ConsistencyTrace:
    """Switch posterior on K_{m+1} at recorded m for one seed"""

    seed: int
    grid: Tuple[int, ...]
    posterior: np.ndarray
    selected: Tuple[int, ...]


def consistency_grid(n: int) -> List[int]:
    """Geometric grid plus each of the last 100 sample sizes"""
    return sorted(set(geometric_grid(n)) | set(range(max(1, n - LAST_STEPS + 1), n + 1)))


def _consistency_replicate(task) -> ConsistencyTrace:
    theta_star, transition, n, families, prior, seed, index = task
    rng = make_rng(seed, STREAM_CONSISTENCY, index)
    if transition is None:
        data = sample_bernoulli(theta_star, n, rng)
    else:
        data = sample_binary_markov(transition, n, rng)
    grid = consistency_grid(n)
    report = SwitchDistribution(prior).run(log_predictive_matrix(families, data), record=grid)
    posterior = np.zeros((len(grid), len(families)))
    for row, values in enumerate(report.posterior):
        posterior[row, : len(values)] = values
    return ConsistencyTrace(index, tuple(report.n), posterior, tuple(report.selected))


def run_consistency(
    theta_star: float,
    n: int,
    seeds: int,
    families: Sequence[PredictionStrategy],
    prior: SwitchPriorConfig,
    seed: int,
    transition: Optional[Sequence[float]] = None,
    workers: int = 1,
) -> List[ConsistencyTrace]:
    """Posterior traces of switch model selection on i.i.d. Bernoulli or Markov data"""
    if len(families) != prior.kmax:
        raise DataValidationError(f"{len(families)} families for a prior over {prior.kmax} strategies")
    source = f"markov {list(transition)}" if transition is not None else f"Bernoulli({theta_star})"
    logger.info("Consistency: %d seeds of n=%d from %s", seeds, n, source)
    tasks = [
        (theta_star, None if transition is None else tuple(transition), n, tuple(families), prior, seed, index)
        for index in range(seeds)
    ]
    return _pool_map(_consistency_replicate, tasks, workers)


def consistency_summary(traces: Sequence[ConsistencyTrace], target: int = 1, level: float = 0.9) -> Dict[str, float]:
    """Fraction of seeds selecting `target` at the end, and holding posterior > level over the last steps"""
    final = [trace.selected[-1] == target for trace in traces]
    held = [bool(np.all(trace.posterior[-LAST_STEPS:, target - 1] > level)) for trace in traces]
    return {"selected_final": float(np.mean(final)), "held_last_steps": float(np.mean(held))}


######################################################################
#  R E D U N D A N C Y   C R O S S - C H E C K
######################################################################
@dataclass
class CrossCheck:
    """Realized log-ratio and summed per-step KL estimates of cumulative redundancy"""

    realized_mean: float
    realized_se: float
    kl_mean: float
    kl_se: float
    replicates: int

    def agree(self, pooled: float = 3.0) -> bool:
        spread = math.hypot(self.realized_se, self.kl_se)
        return abs(self.realized_mean - self.kl_mean) <= pooled * spread


def _cross_check_bins(strategy, n: int) -> np.ndarray:
    """Bin count used to predict x_{i+1}, for i = 0..n-1"""
    if isinstance(strategy, int):
        return np.full(n, strategy)
    if strategy == "cuberoot":
        return np.array([cuberoot_criterion(i) for i in range(n)])
    if str(strategy).startswith("fixed:"):
        return np.full(n, int(str(strategy).split(":", 1)[1]))
    raise DataValidationError(f"Unsupported cross-check strategy {strategy!r}")


def path_kl_bits(density: SourceDensity, data, bins: np.ndarray) -> np.ndarray:
    """D(p* || p_hat_i) in bits for the add-one histogram fitted to x^i, i = 0..n-1"""
    entropy = density.entropy_bits()
    result = np.empty(len(data))
    for k in np.unique(bins):
        steps = np.flatnonzero(bins == k)
        onehot = np.zeros((len(data), k))
        onehot[np.arange(len(data)), bin_index(data, int(k))] = 1.0
        before = np.vstack([np.zeros((1, k)), np.cumsum(onehot, axis=0)[:-1]])[steps]
        densities = k * (before + 1.0) / (steps[:, None] + k)
        result[steps] = entropy - np.log2(densities) @ density.bin_masses(int(k))
    return clip_kl(result)


def cross_check_redundancy(
    density: SourceDensity, strategy, n: int, replicates: int, seed: int
) -> CrossCheck:
    """Estimates cumulative redundancy at n two ways, averaged over replicates"""
    bins = _cross_check_bins(strategy, n)
    widest = int(bins.max())
    realized, summed = [], []
    for index in range(replicates):
        data = sample_source(density, make_rng(seed, STREAM_CROSS_CHECK, index), n)
        matrix = _histogram_matrix(data, widest)
        log_hat = matrix[np.arange(n), bins - 1].sum()
        realized.append((density.log_density(data).sum() - log_hat) / LOG2)
        summed.append(path_kl_bits(density, data, bins).sum())
    realized, summed = np.array(realized), np.array(summed)
    return CrossCheck(
        realized_mean=float(realized.mean()),
        realized_se=float(_standard_error(realized[:, None])[0]),
        kl_mean=float(summed.mean()),
        kl_se=float(_standard_error(summed[:, None])[0]),
        replicates=replicates,
    )


######################################################################
#  T A B L E S
######################################################################
def _cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".12g")
    return str(value)


def catchup_table(rows: Sequence[CatchupRow]) -> Tuple[List[str], List[List[str]]]:
    if not rows:
        raise DataValidationError("No rows to tabulate")
    return rows[0].header(), [[_cell(value) for value in row.record()] for row in rows]


def histsim_table(curves: Sequence[RiskCurve]) -> Tuple[List[str], List[List[str]]]:
    header = ["n", "estimator", "redundancy_bits_mean", "redundancy_bits_se", "replicates"]
    records = [
        [_cell(n), curve.estimator, _cell(mean), _cell(se), _cell(curve.replicates)]
        for curve in curves
        for n, mean, se in zip(curve.grid, curve.mean, curve.se)
    ]
    return header, records


def consistency_table(traces: Sequence[ConsistencyTrace]) -> Tuple[List[str], List[List[str]]]:
    if not traces:
        raise DataValidationError("No traces to tabulate")
    width = traces[0].posterior.shape[1]
    header = ["seed", "n"] + [f"post_k{index}" for index in range(1, width + 1)] + ["selected"]
    records = [
        [_cell(trace.seed), _cell(n)] + [_cell(value) for value in row] + [_cell(selected)]
        for trace in traces
        for n, row, selected in zip(trace.grid, trace.posterior, trace.selected)
    ]
    return header, records
