"""
Test cases for sources, densities and random streams
"""

import math
import os
import tempfile
from unittest import TestCase
from unittest.mock import patch

import numpy as np
from scipy.stats import kstest

from switchcast.models import DataValidationError, InvariantViolation
from switchcast.predictors import HistogramDistribution
from switchcast.sources import (
    STREAM_CONSISTENCY,
    STREAM_HISTSIM,
    SourceDensity,
    clip_kl,
    exact_step_kl,
    linear_density,
    load_sequence,
    make_rng,
    parse_density,
    piecewise_density,
    read_corpus,
    sample_bernoulli,
    sample_binary_markov,
    sample_source,
    uniform_density,
)
from tests.factories import LinearDensityFactory


######################################################################
#  R A N D O M   S T R E A M S
######################################################################
class TestStreams(TestCase):
    """Test Cases for seeded random streams"""

    def test_reproducible(self):
        """It should give the same draws for the same seed, stream and index"""
        first = make_rng(7, STREAM_HISTSIM, 3).random(5)
        second = make_rng(7, STREAM_HISTSIM, 3).random(5)
        self.assertTrue(np.array_equal(first, second))

    def test_independent(self):
        """It should give different draws to different streams and replicates"""
        base = make_rng(7, STREAM_HISTSIM, 0).random(5)
        self.assertFalse(np.array_equal(base, make_rng(7, STREAM_HISTSIM, 1).random(5)))
        self.assertFalse(np.array_equal(base, make_rng(7, STREAM_CONSISTENCY, 0).random(5)))
        self.assertFalse(np.array_equal(base, make_rng(8, STREAM_HISTSIM, 0).random(5)))


######################################################################
#  D E N S I T I E S
######################################################################
class TestDensities(TestCase):
    """Test Cases for piecewise-linear source densities"""

    def test_linear(self):
        """It should report bounds and class membership of a + b x"""
        density = linear_density(0.5, 1.0)
        self.assertEqual(density.label, "linear:0.5,1")
        self.assertAlmostEqual(density.c0, 0.5)
        self.assertAlmostEqual(density.c1, 1.5)
        self.assertAlmostEqual(density.c2, 1.0)
        self.assertTrue(density.in_rate_class)
        self.assertAlmostEqual(float(density.cdf(0.5)), 0.375)
        self.assertTrue(np.allclose(density.bin_masses(2), [0.375, 0.625]))

    def test_factory(self):
        """It should build valid linear densities from the factory"""
        density = LinearDensityFactory()
        self.assertAlmostEqual(float(density.cdf(1.0)), 1.0)
        self.assertGreater(density.c0, 0)

    def test_uniform(self):
        """It should have zero entropy in bits and sit outside the rate class"""
        density = uniform_density()
        self.assertAlmostEqual(density.entropy_bits(), 0.0)
        self.assertFalse(density.in_rate_class)

    def test_piecewise(self):
        """It should build step densities that jump between pieces"""
        density = piecewise_density([1.5, 0.5])
        self.assertEqual(density.c2, math.inf)
        self.assertFalse(density.in_rate_class)
        self.assertAlmostEqual(float(density.density(0.25)), 1.5)
        self.assertAlmostEqual(float(density.density(0.75)), 0.5)
        self.assertAlmostEqual(float(density.inverse_cdf(0.75)), 0.5)

    def test_entropy(self):
        """It should integrate p log2 p by quadrature"""
        density = linear_density(0.5, 1.0)
        # closed form of the integral of (0.5 + x) log(0.5 + x) over [0,1]
        exact = (1.125 * math.log(1.5) - 0.125 * math.log(0.5) - 0.5) / math.log(2)
        self.assertAlmostEqual(density.entropy_bits(), exact, places=10)

    def test_inverse_cdf(self):
        """It should invert the CDF, endpoints included"""
        for density in (uniform_density(), linear_density(0.5, 1.0), piecewise_density([0.5, 1.0, 1.5])):
            self.assertAlmostEqual(float(density.inverse_cdf(0.0)), 0.0, places=12)
            self.assertAlmostEqual(float(density.inverse_cdf(1.0)), 1.0, places=12)
            u = np.linspace(0.01, 0.99, 25)
            self.assertTrue(np.allclose(density.cdf(density.inverse_cdf(u)), u))

    def test_invalid(self):
        """It should reject densities that are not positive or do not integrate to one"""
        self.assertRaises(DataValidationError, linear_density, 0.0, 2.0)
        self.assertRaises(DataValidationError, linear_density, 1.0, 1.0)
        self.assertRaises(DataValidationError, SourceDensity, "bad", (0.0, 0.5), (1.0,), (0.0,))
        self.assertRaises(DataValidationError, SourceDensity, "bad", (0.0, 1.0), (1.0, 1.0), (0.0,))

    def test_parse(self):
        """It should parse density specs"""
        self.assertEqual(parse_density("uniform"), uniform_density())
        self.assertEqual(parse_density("linear:0.5,1").c1, 1.5)
        self.assertEqual(parse_density("piecewise:0.5,1.5").label, "piecewise:0.5,1.5")
        for spec in ("linear:1", "linear:a,b", "triangle", "uniform:2"):
            self.assertRaises(DataValidationError, parse_density, spec)

    def test_sampling(self):
        """It should draw from the density by inversion"""
        draws = sample_source(linear_density(0.5, 1.0), make_rng(3, STREAM_HISTSIM), 20000)
        self.assertEqual(draws.shape, (20000,))
        self.assertAlmostEqual(float(draws.mean()), 0.25 + 1 / 3, delta=0.01)
        self.assertIsInstance(sample_source(uniform_density(), make_rng(3, STREAM_HISTSIM)), float)

    def test_goodness_of_fit(self):
        """It should pass a Kolmogorov-Smirnov test against the density's CDF"""
        density = linear_density(0.5, 1.0)
        draws = sample_source(density, make_rng(11, STREAM_HISTSIM), 100_000)
        self.assertLess(kstest(draws, density.cdf).statistic, 0.01)


######################################################################
#  R I S K
######################################################################
class TestStepKl(TestCase):
    """Test Cases for the exact per-step KL risk"""

    def test_uniform(self):
        """It should be zero for the uniform source and uniform predictive"""
        self.assertAlmostEqual(exact_step_kl(uniform_density(), HistogramDistribution([1.0, 1.0])), 0.0)

    def test_two_bins(self):
        """It should match the hand integral for a 2-bin predictive"""
        risk = exact_step_kl(uniform_density(), HistogramDistribution([1.5, 0.5]))
        self.assertAlmostEqual(risk, 1 - 0.5 * math.log2(3), places=10)
        self.assertAlmostEqual(risk, 0.2075, places=4)

    def test_empty_bin(self):
        """It should reject a predictive with an empty bin"""
        self.assertRaises(DataValidationError, exact_step_kl, uniform_density(), HistogramDistribution([2.0, 0.0]))

    def test_negative_kl(self):
        """It should raise on a KL value below zero beyond tolerance"""
        with patch.object(SourceDensity, "entropy_bits", return_value=-1.0):
            self.assertRaises(
                InvariantViolation, exact_step_kl, uniform_density(), HistogramDistribution([1.0, 1.0])
            )

    def test_clip_rounding(self):
        """It should round values just below zero up to zero"""
        self.assertEqual(clip_kl(-1e-14), 0.0)
        self.assertEqual(list(clip_kl([0.5, -5e-13])), [0.5, 0.0])
        self.assertRaises(InvariantViolation, clip_kl, [0.5, -1e-9])


######################################################################
#  B I N A R Y   S O U R C E S   A N D   F I L E S
######################################################################
class TestBinarySources(TestCase):
    """Test Cases for Bernoulli and Markov sources"""

    def test_bernoulli(self):
        """It should draw ones at rate theta"""
        data = sample_bernoulli(0.7, 10000, make_rng(0, STREAM_CONSISTENCY))
        self.assertEqual(set(np.unique(data)), {0, 1})
        self.assertAlmostEqual(float(data.mean()), 0.7, delta=0.03)

    def test_markov(self):
        """It should follow the transition probabilities"""
        data = sample_binary_markov((0.1, 0.9), 20000, make_rng(0, STREAM_CONSISTENCY))
        after_one = data[1:][data[:-1] == 1]
        after_zero = data[1:][data[:-1] == 0]
        self.assertAlmostEqual(float(after_one.mean()), 0.9, delta=0.02)
        self.assertAlmostEqual(float(after_zero.mean()), 0.1, delta=0.02)
        self.assertAlmostEqual(float(data.mean()), 0.5, delta=0.05)
        self.assertEqual(len(sample_binary_markov((0.5, 0.5), 0, make_rng(0, 1))), 0)


class TestFiles(TestCase):
    """Test Cases for corpus and sequence files"""

    def setUp(self):
        self.tempdir = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tempdir.cleanup()

    def write(self, name, content, mode="w"):
        path = os.path.join(self.tempdir.name, name)
        with open(path, mode) as handle:
            handle.write(content)
        return path

    def test_corpus(self):
        """It should read bytes as symbols 0..255"""
        path = self.write("corpus.bin", bytes([0, 65, 255]), "wb")
        self.assertEqual(list(read_corpus(path)), [0, 65, 255])
        self.assertEqual(list(load_sequence(path, "bytes")), [0, 65, 255])

    def test_empty_corpus(self):
        """It should reject an empty corpus"""
        path = self.write("empty.txt", "")
        self.assertRaises(DataValidationError, read_corpus, path)

    def test_missing_corpus(self):
        """It should raise FileNotFoundError for a missing corpus"""
        self.assertRaises(FileNotFoundError, read_corpus, os.path.join(self.tempdir.name, "none.txt"))

    def test_binary(self):
        """It should read 0/1 strings ignoring whitespace"""
        path = self.write("bits.txt", "0110\n10 1\n")
        self.assertEqual(list(load_sequence(path, "binary")), [0, 1, 1, 0, 1, 0, 1])
        self.assertRaises(DataValidationError, load_sequence, self.write("bad.txt", "0120"), "binary")

    def test_unit(self):
        """It should read numbers in [0,1]"""
        path = self.write("unit.txt", "0.1 0.5\n1.0\n")
        self.assertTrue(np.allclose(load_sequence(path, "unit"), [0.1, 0.5, 1.0]))
        self.assertRaises(DataValidationError, load_sequence, self.write("big.txt", "0.5 1.5"), "unit")
        self.assertRaises(DataValidationError, load_sequence, self.write("text.txt", "half"), "unit")
        self.assertRaises(DataValidationError, load_sequence, path, "ternary")
