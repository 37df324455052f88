"""
Data sources

Reference densities on [0,1] with closed-form CDFs and inverse CDFs,
binary sources for the consistency runs, byte corpora, and the seeded
random streams every experiment draws from.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from switchcast import config
from switchcast.models import DataValidationError, InvariantViolation
from switchcast.predictors import HistogramDistribution

logger = logging.getLogger(__name__)

# Independent random streams, one per use
STREAM_HISTSIM = 0
STREAM_CONSISTENCY = 1
STREAM_CROSS_CHECK = 2
STREAM_HYPERCOMPRESSION = 3
STREAM_SELFTEST = 4


def make_rng(seed: int, stream: int, index: int = 0) -> np.random.Generator:
    """Philox generator for replicate `index` of `stream` under the top-level seed"""
    sequence = np.random.SeedSequence(seed, spawn_key=(stream, index))
    return np.random.Generator(np.random.Philox(sequence))


######################################################################
#  S O U R C E   D E N S I T I E S
######################################################################
@dataclass(frozen=True)
class SourceDensity:
    """
    Piecewise-linear density on [0,1]

    Piece i covers [edges[i], edges[i+1]] with density intercepts[i] + slopes[i] * x.
    """

    label: str
    edges: Tuple[float, ...]
    intercepts: Tuple[float, ...]
    slopes: Tuple[float, ...]

    def __post_init__(self):
        if len(self.edges) != len(self.intercepts) + 1 or len(self.slopes) != len(self.intercepts):
            raise DataValidationError(f"Malformed density {self.label}")
        ends = np.array(self.edges, dtype=float)
        if ends[0] != 0.0 or ends[-1] != 1.0 or np.any(np.diff(ends) <= 0):
            raise DataValidationError(f"Density {self.label} must cover [0,1] with increasing edges")
        if self.c0 <= 0:
            raise DataValidationError(f"Density {self.label} must be positive on [0,1]")
        total = float(self._piece_masses().sum())
        if abs(total - 1.0) > 1e-9:
            raise DataValidationError(f"Density {self.label} integrates to {total}, not 1")

    def __repr__(self):
        return f"<SourceDensity {self.label}>"

    def _arrays(self):
        return (
            np.array(self.edges, dtype=float),
            np.array(self.intercepts, dtype=float),
            np.array(self.slopes, dtype=float),
        )

    def _piece_masses(self) -> np.ndarray:
        edges, a, b = self._arrays()
        lo, hi = edges[:-1], edges[1:]
        return a * (hi - lo) + 0.5 * b * (hi**2 - lo**2)

    def _endpoint_values(self) -> np.ndarray:
        edges, a, b = self._arrays()
        return np.concatenate([a + b * edges[:-1], a + b * edges[1:]])

    @property
    def c0(self) -> float:
        """Lower bound of the density"""
        return float(self._endpoint_values().min())

    @property
    def c1(self) -> float:
        """Upper bound of the density"""
        return float(self._endpoint_values().max())

    @property
    def c2(self) -> float:
        """Bound on |p'|; infinite when the density jumps between pieces"""
        edges, a, b = self._arrays()
        inner = edges[1:-1]
        left = a[:-1] + b[:-1] * inner
        right = a[1:] + b[1:] * inner
        if np.any(np.abs(left - right) > 1e-12):
            return math.inf
        return float(np.abs(b).max())

    @property
    def in_rate_class(self) -> bool:
        """c0 < 1 < c1 with a bounded derivative"""
        return self.c0 < 1 < self.c1 and math.isfinite(self.c2)

    def _piece(self, x) -> np.ndarray:
        edges = np.array(self.edges, dtype=float)
        return np.clip(np.searchsorted(edges, x, side="right") - 1, 0, len(self.intercepts) - 1)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        _, a, b = self._arrays()
        piece = self._piece(x)
        return a[piece] + b[piece] * x

    def log_density(self, x):
        return np.log(self.density(x))

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        edges, a, b = self._arrays()
        before = np.concatenate([[0.0], np.cumsum(self._piece_masses())])
        piece = self._piece(x)
        lo = edges[piece]
        return before[piece] + a[piece] * (x - lo) + 0.5 * b[piece] * (x**2 - lo**2)

    def inverse_cdf(self, u):
        """x with F(x) = u, solving the quadratic within the right piece"""
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        edges, a, b = self._arrays()
        before = np.concatenate([[0.0], np.cumsum(self._piece_masses())])
        piece = np.clip(np.searchsorted(before, u, side="right") - 1, 0, len(a) - 1)
        lo = edges[piece]
        start = a[piece] + b[piece] * lo
        rest = np.maximum(u - before[piece], 0.0)
        # stable root of start*y + b/2*y^2 = rest
        step = 2.0 * rest / (start + np.sqrt(np.maximum(start**2 + 2.0 * b[piece] * rest, 0.0)))
        return np.clip(lo + step, edges[piece], edges[piece + 1])

    def bin_masses(self, bins: int) -> np.ndarray:
        """P*(bin) for k equal-width bins"""
        return np.diff(self.cdf(np.linspace(0.0, 1.0, bins + 1)))

    def entropy_bits(self) -> float:
        """Integral of p log2 p over [0,1] by Gauss-Legendre quadrature per piece"""
        nodes, weights = np.polynomial.legendre.leggauss(config.KL_QUADRATURE_NODES)
        edges = np.array(self.edges, dtype=float)
        total = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            x = 0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)
            p = self.density(x)
            total += 0.5 * (hi - lo) * float(np.dot(weights, p * np.log2(p)))
        return total


def uniform_density() -> SourceDensity:
    return SourceDensity("uniform", (0.0, 1.0), (1.0,), (0.0,))


def linear_density(a: float, b: float) -> SourceDensity:
    """Density a + b*x; requires a + b/2 = 1"""
    return SourceDensity(f"linear:{a:g},{b:g}", (0.0, 1.0), (float(a),), (float(b),))


def piecewise_density(levels: Sequence[float]) -> SourceDensity:
    """Piecewise-constant density on equal-width pieces"""
    count = len(levels)
    if count < 1:
        raise DataValidationError("piecewise density needs at least one level")
    edges = tuple(float(x) for x in np.linspace(0.0, 1.0, count + 1))
    label = "piecewise:" + ",".join(f"{level:g}" for level in levels)
    return SourceDensity(label, edges, tuple(float(level) for level in levels), (0.0,) * count)


def parse_density(spec: str) -> SourceDensity:
    """uniform | linear:<a>,<b> | piecewise:<d1>,<d2>,..."""
    name, _, arg = str(spec).strip().partition(":")
    try:
        values = [float(item) for item in arg.split(",")] if arg else []
    except ValueError as error:
        raise DataValidationError(f"Invalid density spec {spec!r}: {error}") from error
    if name == "uniform" and not values:
        return uniform_density()
    if name == "linear" and len(values) == 2:
        return linear_density(*values)
    if name == "piecewise" and values:
        return piecewise_density(values)
    raise DataValidationError(f"Invalid density spec {spec!r}")


def sample_source(density: SourceDensity, rng: np.random.Generator, size: Optional[int] = None):
    """Inverse-CDF draws from the density"""
    draws = density.inverse_cdf(rng.random(size))
    return float(draws) if size is None else draws


######################################################################
#  R I S K
######################################################################
def exact_step_kl(density: SourceDensity, predictive: HistogramDistribution) -> float:
    """D(p* || p_hat) in bits for a k-bin histogram predictive"""
    if np.any(predictive.densities <= 0):
        raise DataValidationError("Histogram predictive has an empty bin; KL is infinite")
    masses = density.bin_masses(predictive.bins)
    cross = float(np.dot(masses, np.log2(predictive.densities)))
    return float(clip_kl(density.entropy_bits() - cross))


def clip_kl(values):
    """Rounds KL values within KL_TOLERANCE below zero up to zero"""
    values = np.asarray(values, dtype=float)
    worst = float(np.min(values)) if values.size else 0.0
    if worst < -config.KL_TOLERANCE:
        raise InvariantViolation(f"negative KL divergence {worst:.3e} bits")
    return np.maximum(values, 0.0)


######################################################################
#  B I N A R Y   S O U R C E S   A N D   C O R P O R A
######################################################################
def sample_bernoulli(theta: float, n: int, rng: np.random.Generator) -> np.ndarray:
    return (rng.random(n) < theta).astype(np.int64)


def sample_binary_markov(transition: Sequence[float], n: int, rng: np.random.Generator) -> np.ndarray:
    """Order-1 chain with P(1|0), P(1|1) = transition, started in its stationary law"""
    up, stay = transition
    draws = rng.random(n)
    data = np.zeros(n, dtype=np.int64)
    previous = draws[0] < up / (up + 1.0 - stay) if n else 0
    for i in range(n):
        if i:
            previous = draws[i] < (stay if previous else up)
        data[i] = previous
    return data


def read_corpus(path) -> np.ndarray:
    """Bytes of a corpus file as symbols in 0..255"""
    with open(path, "rb") as handle:
        raw = handle.read()
    if not raw:
        raise DataValidationError(f"Corpus {path} is empty")
    logger.info("Read %d bytes from %s", len(raw), path)
    return np.frombuffer(raw, dtype=np.uint8).astype(np.int64)


def load_sequence(path, alphabet: str) -> np.ndarray:
    """Reads outcomes for a named alphabet

    bytes: raw file bytes; binary: the characters 0 and 1, whitespace ignored;
    unit: whitespace-separated numbers in [0,1].
    """
    if alphabet == "bytes":
        return read_corpus(path)
    with open(path, "r", encoding="utf-8") as handle:
        text = handle.read()
    if alphabet == "binary":
        symbols = "".join(text.split())
        if not symbols or set(symbols) - {"0", "1"}:
            raise DataValidationError(f"{path} must hold a nonempty string of 0s and 1s")
        return np.frombuffer(symbols.encode("ascii"), dtype=np.uint8).astype(np.int64) - ord("0")
    if alphabet == "unit":
        try:
            values = np.array([float(item) for item in text.split()])
        except ValueError as error:
            raise DataValidationError(f"{path} must hold numbers in [0,1]: {error}") from error
        if values.size == 0 or values.min() < 0 or values.max() > 1:
            raise DataValidationError(f"{path} must hold a nonempty list of numbers in [0,1]")
        return values
    raise DataValidationError(f"Unknown alphabet {alphabet!r}")
