"""
Self test

Runs the oracle-equivalence, ordering and prior-mass suites against the
engine and reports pass/fail counts per suite.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from switchcast import config
from switchcast.baselines import bma_prefix_log_marginals, ordering_slack
from switchcast.oracle import brute_force_switch, path_masses
from switchcast.predictors import MarkovDirichlet, log_predictive_matrix
from switchcast.priors import ConstantSchedule, SwitchPriorConfig, UniformModelPrior, build_prior
from switchcast.sources import STREAM_SELFTEST, make_rng
from switchcast.switch import SwitchDistribution, switch_init, switch_step

logger = logging.getLogger(__name__)

THETAS = (0.1, 0.5, 0.9)
MODEL_COUNTS = (1, 2, 3)
ORDERING_LENGTH = 500


@dataclass
class SelftestReport:
    """Pass/fail counts per suite"""

    suites: Dict[str, Tuple[int, int]] = field(default_factory=dict)

    def add(self, name: str, passed: int, failed: int):
        self.suites[name] = (passed, failed)
        level = logging.INFO if failed == 0 else logging.ERROR
        logger.log(level, "%s: %d passed, %d failed", name, passed, failed)

    @property
    def failed(self) -> int:
        return sum(failed for _, failed in self.suites.values())

    @property
    def passed(self) -> int:
        return sum(passed for passed, _ in self.suites.values())

    def rows(self):
        return [[name, str(passed), str(failed)] for name, (passed, failed) in self.suites.items()]


def _binary_families():
    return [MarkovDirichlet(order, 2) for order in range(max(MODEL_COUNTS))]


def _same(left: np.ndarray, right: np.ndarray, tolerance: float) -> bool:
    both_zero = np.isneginf(left) & np.isneginf(right)
    close = np.abs(np.where(both_zero, 0.0, left - right)) <= tolerance
    return bool(np.all(both_zero | close))


def oracle_equivalence(max_length: int = 6, tolerance: float = 1e-12) -> Tuple[int, int]:
    """Engine vs path enumeration on every binary sequence up to max_length"""
    families = _binary_families()
    passed = failed = 0
    for length in range(max_length + 1):
        for sequence in itertools.product((0, 1), repeat=length):
            data = np.array(sequence, dtype=np.int64)
            matrix = log_predictive_matrix(families, data) if length else np.zeros((0, len(families)))
            for count, theta in itertools.product(MODEL_COUNTS, THETAS):
                prior = build_prior(count, theta)
                weights = switch_init(prior)
                for row in matrix:
                    weights = switch_step(weights, row[:count], prior)
                oracle = brute_force_switch(data, families[:count], prior)
                engine = np.vstack([weights.wa, weights.wb])
                if _same(engine, oracle.log_masses, tolerance):
                    passed += 1
                else:
                    failed += 1
                    logger.error("oracle mismatch: x=%s K=%d theta=%s", sequence, count, theta)
    return passed, failed


def ordering_suite(sequences: int = 100, length: int = ORDERING_LENGTH, seed: int = 0) -> Tuple[int, int]:
    """Switch/BMA ordering on every prefix of random binary sequences"""
    families = _binary_families()
    prior = build_prior(len(families))
    passed = failed = 0
    for index in range(sequences):
        data = (make_rng(seed, STREAM_SELFTEST, index).random(length) < 0.5).astype(np.int64)
        matrix = log_predictive_matrix(families, data)
        report = SwitchDistribution(prior).run(matrix)
        log_bma = bma_prefix_log_marginals(matrix, prior.log_model_prior)
        cumulative = np.vstack([np.zeros((1, len(families))), np.cumsum(matrix, axis=0)])
        upper, lower = ordering_slack(np.asarray(report.log_marginal), log_bma, cumulative, prior)
        ok = min(upper.min(), lower.min()) >= -config.ORDERING_TOLERANCE
        passed += int(ok)
        failed += int(not ok)
    return passed, failed


def prior_mass_suite(max_length: int = 6, tolerance: float = 1e-12) -> Tuple[int, int]:
    """Path masses sum to one when pi_k is normalized over the index set"""
    passed = failed = 0
    for length, count, theta in itertools.product(range(1, max_length + 1), MODEL_COUNTS, THETAS):
        prior = SwitchPriorConfig(theta, UniformModelPrior(count), kset_schedule=ConstantSchedule(count))
        total = float(path_masses(length, prior).sum())
        if abs(total - 1.0) <= tolerance:
            passed += 1
        else:
            failed += 1
            logger.error("prior mass %.17g at length %d, K=%d, theta=%s", total, length, count, theta)
    return passed, failed


def run_selftest(max_length: int = 6, sequences: int = 100, seed: int = 0) -> SelftestReport:
    """Runs all three suites"""
    max_length = min(max_length, config.ORACLE_MAX_LENGTH - 1)
    report = SelftestReport()
    report.add("oracle equivalence", *oracle_equivalence(max_length))
    report.add("switch-bma ordering", *ordering_suite(sequences, seed=seed))
    report.add("prior total mass", *prior_mass_suite(max_length))
    return report
