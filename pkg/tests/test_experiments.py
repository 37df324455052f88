"""
Test cases for the experiment harness
"""

import math
import time
from unittest import TestCase

import numpy as np

from switchcast.experiments import (
    CatchupRow,
    catchup_crossovers,
    catchup_table,
    consistency_grid,
    consistency_summary,
    consistency_table,
    cross_check_redundancy,
    estimator_bins,
    geometric_grid,
    histsim_replicates,
    histsim_table,
    path_kl_bits,
    run_catchup,
    run_consistency,
    run_families,
    run_histsim,
    verify_records,
)
from switchcast.models import DataValidationError, InvariantViolation
from switchcast.predictors import MarkovDirichlet
from switchcast.priors import build_prior
from switchcast.sources import linear_density, make_rng, sample_bernoulli, sample_source, uniform_density

TEXT = (
    b"the cat sat on the mat and the dog sat on the log while the cat and the dog "
    b"watched the rat that ran on the mat and the log and the cat sat again on the mat"
)


######################################################################
#  G R I D S
######################################################################
class TestGrids(TestCase):
    """Test Cases for sample-size grids"""

    def test_small_grid(self):
        """It should cover every n when the ratio steps are small"""
        self.assertEqual(geometric_grid(10), list(range(1, 11)))

    def test_grid_end(self):
        """It should be sorted, distinct and end at n_max"""
        grid = geometric_grid(1000)
        self.assertEqual(grid[0], 1)
        self.assertEqual(grid[-1], 1000)
        self.assertEqual(grid, sorted(set(grid)))
        self.assertIn(math.ceil(1.2**20 - 1e-9), grid)
        self.assertRaises(DataValidationError, geometric_grid, 0)

    def test_consistency_grid(self):
        """It should add each of the last 100 sample sizes"""
        grid = consistency_grid(500)
        self.assertEqual(grid[-100:], list(range(401, 501)))
        self.assertEqual(consistency_grid(50), list(range(1, 51)))

    def test_estimator_bins(self):
        """It should size the histogram table for each estimator"""
        self.assertEqual(estimator_bins("cuberoot", 1000), 10)
        self.assertEqual(estimator_bins("fixed:7", 10), 7)
        self.assertEqual(estimator_bins("switch", 10), 0)


######################################################################
#  C A T C H - U P
######################################################################
class TestCatchup(TestCase):
    """Test Cases for the catch-up experiment"""

    def test_rows(self):
        """It should record code lengths every stride and at the end"""
        corpus = np.frombuffer(TEXT, dtype=np.uint8).astype(np.int64)
        rows = run_catchup(corpus, [0, 1], build_prior(2), stride=50)
        self.assertEqual([row.n for row in rows], [50, 100, 150, len(corpus)])
        final = rows[-1]
        self.assertEqual(final.labels, ("k0", "k1"))
        self.assertIn(final.selected, ("0", "1"))
        self.assertAlmostEqual(sum(final.posterior), 1.0)
        # within one bit of BMA at theta = 1/2
        self.assertLessEqual(final.codelen_bits_sw, final.codelen_bits_bma + 1 + 1e-9)
        best = min(length - math.log2(p) for length, p in zip(final.codelen_bits, (1 / 2, 1 / 6)))
        self.assertLessEqual(final.codelen_bits_bma, best + 1e-9)

    def test_table(self):
        """It should tabulate rows under a fixed header"""
        data = sample_bernoulli(0.3, 23, make_rng(0, 1))
        families = [MarkovDirichlet(0, 2), MarkovDirichlet(1, 2)]
        rows = run_families(data, families, build_prior(2), 5)
        header, records = catchup_table(rows)
        self.assertEqual(
            header,
            [
                "n",
                "codelen_bits_markov0",
                "codelen_bits_markov1",
                "codelen_bits_bma",
                "codelen_bits_sw",
                "post_markov0",
                "post_markov1",
                "selected",
            ],
        )
        self.assertEqual([record[0] for record in records], ["5", "10", "15", "20", "23"])
        self.assertIn(records[-1][-1], ("markov:0", "markov:1"))
        self.assertRaises(DataValidationError, catchup_table, [])

    def test_bad_inputs(self):
        """It should reject repeated orders, empty data and mismatched priors"""
        corpus = np.frombuffer(TEXT, dtype=np.uint8).astype(np.int64)
        self.assertRaises(DataValidationError, run_catchup, corpus, [1, 1], build_prior(2))
        families = [MarkovDirichlet(0, 2)]
        self.assertRaises(DataValidationError, run_families, np.zeros(0, dtype=np.int64), families, build_prior(1), 5)
        self.assertRaises(DataValidationError, run_families, np.zeros(5, dtype=np.int64), families, build_prior(2), 5)

    def test_crossovers(self):
        """It should find where one code length overtakes another"""

        def row(n, first, second):
            return CatchupRow(n, ("k1", "k2"), (first, second), 0.0, 0.0, (0.5, 0.5), "1")

        rows = [row(10, 5.0, 6.0), row(20, 7.0, 7.0), row(30, 9.0, 8.0), row(40, 9.5, 9.9)]
        self.assertEqual(catchup_crossovers(rows, "k1", "k2"), [30, 40])
        self.assertRaises(DataValidationError, catchup_crossovers, rows, "k1", "k3")

    def test_linear_time(self):
        """It should take about twice as long for twice the corpus"""
        corpus = make_rng(0, 1).integers(97, 123, size=200_000)

        def elapsed(size):
            timings = []
            for _ in range(3):
                start = time.perf_counter()
                run_catchup(corpus[:size], [1, 2], build_prior(2), stride=10_000)
                timings.append(time.perf_counter() - start)
            return min(timings)

        ratio = elapsed(200_000) / elapsed(100_000)
        self.assertGreaterEqual(ratio, 1.5)
        self.assertLessEqual(ratio, 2.5)


######################################################################
#  R U N T I M E   C H E C K S
######################################################################
class TestVerifyRecords(TestCase):
    """Test Cases for verify_records"""

    def setUp(self):
        self.prior = build_prior(2)
        self.log_k = np.array([[-1.0, -1.2], [-2.0, -2.1]])
        self.log_bma = np.array([-1.5, -2.4])
        self.log_sw = np.array([-1.6, -2.5])
        self.posteriors = [np.array([0.6, 0.4]), np.array([0.5, 0.5])]

    def test_pass(self):
        """It should count the checks that held"""
        checks = verify_records(self.log_sw, self.log_bma, self.log_k, self.posteriors, self.prior)
        self.assertEqual(checks["switch-bma band"], 2)
        self.assertEqual(checks["monotone code length"], 8)

    def test_band(self):
        """It should raise when switch falls too far below BMA"""
        self.assertRaises(
            InvariantViolation,
            verify_records,
            self.log_sw - 5,
            self.log_bma,
            self.log_k,
            self.posteriors,
            self.prior,
        )

    def test_normalization(self):
        """It should raise on an unnormalized posterior"""
        posteriors = [np.array([0.6, 0.6]), np.array([0.5, 0.5])]
        self.assertRaises(
            InvariantViolation, verify_records, self.log_sw, self.log_bma, self.log_k, posteriors, self.prior
        )

    def test_monotone(self):
        """It should raise when a code length shrinks, unless told not to check"""
        log_k = self.log_k[::-1].copy()
        log_bma = self.log_bma[::-1].copy()
        log_sw = self.log_sw[::-1].copy()
        self.assertRaises(
            InvariantViolation, verify_records, log_sw, log_bma, log_k, self.posteriors, self.prior
        )
        checks = verify_records(log_sw, log_bma, log_k, self.posteriors, self.prior, monotone=False)
        self.assertNotIn("monotone code length", checks)

    def test_growth_skips_band(self):
        """It should skip the band when the index sets grow"""
        prior = build_prior(2, schedule="growth:1")
        with self.assertLogs("switchcast.experiments", level="INFO") as logs:
            verify_records(self.log_sw - 5, self.log_bma, self.log_k, self.posteriors, prior)
        self.assertTrue(any("skipped" in line for line in logs.output))


######################################################################
#  H I S T O G R A M   R I S K
######################################################################
class TestHistsim(TestCase):
    """Test Cases for the histogram risk experiment"""

    def setUp(self):
        self.density = linear_density(0.5, 1.0)
        self.estimators = ["switch", "bma", "cuberoot", "fixed:2"]
        self.prior = build_prior(8)

    def test_curves(self):
        """It should return one mean curve per estimator on the grid"""
        curves = run_histsim(self.density, 60, 3, self.estimators, self.prior, seed=5, workers=1)
        self.assertEqual([curve.estimator for curve in curves], self.estimators)
        for curve in curves:
            self.assertEqual(curve.grid, tuple(geometric_grid(60)))
            self.assertTrue(np.all(np.isfinite(curve.mean)))
            self.assertTrue(np.all(np.asarray(curve.se) >= 0))
            self.assertEqual(curve.replicates, 3)
        header, records = histsim_table(curves)
        self.assertEqual(header[:2], ["n", "estimator"])
        self.assertEqual(len(records), 4 * len(curves[0].grid))

    def test_reproducible(self):
        """It should give identical results for the same seed and any worker count"""
        first = run_histsim(self.density, 40, 2, self.estimators, self.prior, seed=9, workers=1)
        second = run_histsim(self.density, 40, 2, self.estimators, self.prior, seed=9, workers=2)
        for one, two in zip(first, second):
            self.assertEqual(one.mean, two.mean)

    def test_one_replicate(self):
        """It should report a zero standard error for one replicate"""
        curves = run_histsim(self.density, 20, 1, ["bma"], self.prior, seed=0)
        self.assertTrue(np.all(np.asarray(curves[0].se) == 0))

    def test_switch_near_bma(self):
        """It should keep the switch code within one bit of BMA"""
        results = histsim_replicates(self.density, 80, 2, ["switch", "bma"], self.prior, seed=2)
        for result in results:
            gap = result.redundancy["switch"] - result.redundancy["bma"]
            self.assertTrue(np.all(gap <= 1 + 1e-9))
            self.assertAlmostEqual(float(result.final_posterior.sum()), 1.0)

    def test_outside_class(self):
        """It should warn about sources outside the smooth class"""
        with self.assertLogs("switchcast.experiments", level="WARNING"):
            histsim_replicates(uniform_density(), 10, 1, ["bma"], self.prior, seed=0)


class TestHistsimRates(TestCase):
    """Test Cases for histogram risk at a realistic sample size"""

    @classmethod
    def setUpClass(cls):
        cls.curves = {
            curve.estimator: curve
            for curve in run_histsim(
                linear_density(0.5, 1.0), 20_000, 20, ["switch", "bma", "cuberoot"], build_prior(142), seed=1
            )
        }

    def test_switch_beats_cuberoot(self):
        """It should keep the switch within three times the cube-root criterion's risk"""
        switch, cuberoot = self.curves["switch"], self.curves["cuberoot"]
        for n, mean, reference in zip(switch.grid, switch.mean, cuberoot.mean):
            if n >= 1000:
                self.assertLessEqual(mean, 3 * reference, f"n={n}")
        self.assertEqual(switch.grid[-1], 20_000)

    def test_switch_tracks_bma(self):
        """It should keep the switch within one bit of BMA up to two pooled standard errors"""
        switch, bma = self.curves["switch"], self.curves["bma"]
        for n, sw_mean, sw_se, bma_mean, bma_se in zip(switch.grid, switch.mean, switch.se, bma.mean, bma.se):
            self.assertLessEqual(sw_mean, bma_mean + 1 + 2 * math.hypot(sw_se, bma_se), f"n={n}")

    def test_uniform_source(self):
        """It should put posterior mass above 0.9 on one bin for a uniform source"""
        results = histsim_replicates(uniform_density(), 5000, 20, ["switch"], build_prior(71), seed=1)
        concentrated = [result.final_posterior[0] > 0.9 for result in results]
        self.assertGreaterEqual(sum(concentrated), 18)


######################################################################
#  C O N S I S T E N C Y
######################################################################
class TestConsistency(TestCase):
    """Test Cases for the consistency experiment"""

    def test_traces(self):
        """It should record normalized posteriors for every seed"""
        families = [MarkovDirichlet(0, 2), MarkovDirichlet(1, 2)]
        traces = run_consistency(0.7, 300, 2, families, build_prior(2), seed=1)
        self.assertEqual([trace.seed for trace in traces], [0, 1])
        for trace in traces:
            self.assertEqual(list(trace.grid), consistency_grid(300))
            self.assertTrue(np.allclose(trace.posterior.sum(axis=1), 1.0))
        summary = consistency_summary(traces, target=1)
        self.assertTrue(0.0 <= summary["selected_final"] <= 1.0)
        self.assertTrue(0.0 <= summary["held_last_steps"] <= 1.0)
        header, records = consistency_table(traces)
        self.assertEqual(header, ["seed", "n", "post_k1", "post_k2", "selected"])
        self.assertEqual(len(records), 2 * len(consistency_grid(300)))

    def test_markov_source(self):
        """It should select the Markov chain on strongly dependent data"""
        families = [MarkovDirichlet(0, 2), MarkovDirichlet(1, 2)]
        traces = run_consistency(0.5, 2000, 2, families, build_prior(2), seed=3, transition=(0.05, 0.95))
        summary = consistency_summary(traces, target=2)
        self.assertEqual(summary["selected_final"], 1.0)

    def test_bernoulli_selection(self):
        """It should settle on the order-0 model for i.i.d. Bernoulli data"""
        families = [MarkovDirichlet(0, 2), MarkovDirichlet(1, 2)]
        traces = run_consistency(0.7, 10_000, 10, families, build_prior(2), seed=4)
        summary = consistency_summary(traces, target=1)
        self.assertGreaterEqual(summary["selected_final"], 0.9)
        self.assertGreaterEqual(summary["held_last_steps"], 0.9)

    def test_markov_selection(self):
        """It should settle on the order-1 model for a first-order Markov source"""
        families = [MarkovDirichlet(0, 2), MarkovDirichlet(1, 2)]
        traces = run_consistency(0.5, 10_000, 10, families, build_prior(2), seed=4, transition=(0.9, 0.2))
        summary = consistency_summary(traces, target=2)
        self.assertGreaterEqual(summary["selected_final"], 0.9)
        self.assertGreaterEqual(summary["held_last_steps"], 0.9)

    def test_mismatch(self):
        """It should reject a prior over a different number of families"""
        self.assertRaises(
            DataValidationError, run_consistency, 0.5, 10, 1, [MarkovDirichlet(0, 2)], build_prior(2), 0
        )


######################################################################
#  C R O S S - C H E C K
######################################################################
class TestCrossCheck(TestCase):
    """Test Cases for the redundancy cross-check"""

    def test_one_bin(self):
        """It should charge the source entropy per step to a single bin"""
        density = linear_density(0.5, 1.0)
        data = sample_source(density, make_rng(0, 2), 30)
        kl = path_kl_bits(density, data, np.ones(30, dtype=np.int64))
        self.assertTrue(np.allclose(kl, density.entropy_bits()))

    def test_agreement(self):
        """It should estimate the same redundancy two ways"""
        density = linear_density(0.5, 1.0)
        check = cross_check_redundancy(density, "fixed:4", 1000, 50, seed=0)
        self.assertEqual(check.replicates, 50)
        self.assertGreater(check.kl_mean, 0)
        self.assertTrue(check.agree(3.0))
        self.assertTrue(cross_check_redundancy(density, "cuberoot", 100, 40, seed=0).agree(3.0))

    def test_unsupported(self):
        """It should reject strategies it cannot replay"""
        self.assertRaises(DataValidationError, cross_check_redundancy, uniform_density(), "switch", 10, 1, 0)
