"""
Switch priors

The prior on switching plans factors into a geometric prior on the number
of switch points (parameter theta), a prior on strategy indices (pi_k) and a
prior on switch times (pi_t), restricted to the nested index sets K_n given
by a schedule.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import zeta

from switchcast import config
from switchcast.models import ConfigurationError

logger = logging.getLogger(__name__)


######################################################################
#  P R I O R S   O N   S T R A T E G Y   I N D I C E S
######################################################################
@dataclass(frozen=True)
class HarmonicModelPrior:
    """pi_k(k) = 1/(k(k+1))"""

    label = "harmonic"

    def log_pmf(self, k: int) -> float:
        return -math.log(k) - math.log(k + 1)


@dataclass(frozen=True)
class UniformModelPrior:
    """pi_k(k) = 1/kmax on {1..kmax}"""

    kmax: int
    label = "uniform"

    def log_pmf(self, k: int) -> float:
        return -math.log(self.kmax) if 1 <= k <= self.kmax else -math.inf


@dataclass(frozen=True)
class ZetaModelPrior:
    """pi_k(k) = k^-alpha / zeta(alpha)"""

    alpha: float
    label = "zeta"

    def __post_init__(self):
        if not self.alpha > 1:
            raise ConfigurationError(f"zeta prior needs alpha > 1, got {self.alpha}")

    def log_pmf(self, k: int) -> float:
        return -self.alpha * math.log(k) - math.log(zeta(self.alpha))


######################################################################
#  P R I O R S   O N   S W I T C H   T I M E S
######################################################################
@dataclass(frozen=True)
class HarmonicTimePrior:
    """pi_t(t) = 1/(t(t+1)), with tail sum 1/n"""

    label = "harmonic"

    def log_pmf(self, t: int) -> float:
        return -math.log(t) - math.log(t + 1)

    def log_tail(self, n: int) -> float:
        return -math.log(n)


@dataclass(frozen=True)
class GeometricTimePrior:
    """pi_t(t) = (1-rho) rho^(t-1); its hazard is the constant 1-rho"""

    rho: float
    label = "geometric"

    def __post_init__(self):
        if not 0 < self.rho < 1:
            raise ConfigurationError(f"geometric switch-time prior needs 0 < rho < 1, got {self.rho}")

    def log_pmf(self, t: int) -> float:
        return math.log1p(-self.rho) + (t - 1) * math.log(self.rho)

    def log_tail(self, n: int) -> float:
        return (n - 1) * math.log(self.rho)


@dataclass(frozen=True)
class ZetaTimePrior:
    """pi_t(t) = t^-alpha / zeta(alpha), tails from the Hurwitz zeta function"""

    alpha: float
    label = "zeta"

    def __post_init__(self):
        if not self.alpha > 1:
            raise ConfigurationError(f"zeta prior needs alpha > 1, got {self.alpha}")

    def log_pmf(self, t: int) -> float:
        return -self.alpha * math.log(t) - math.log(zeta(self.alpha))

    def log_tail(self, n: int) -> float:
        tail = zeta(self.alpha, n)
        return math.log(tail) - math.log(zeta(self.alpha)) if tail > 0 else -math.inf


######################################################################
#  I N D E X   S E T   S C H E D U L E S
######################################################################
@dataclass(frozen=True)
class ConstantSchedule:
    """K_n = {1..kmax} for every n"""

    kmax: int

    def size(self, n: int) -> int:  # pylint: disable=unused-argument
        return self.kmax


@dataclass(frozen=True)
class GrowthSchedule:
    """K_n = {1..min(kmax, ceil(n^tau))}"""

    kmax: int
    tau: float

    def __post_init__(self):
        if not 0 <= self.tau <= 1:
            raise ConfigurationError(f"growth schedule needs 0 <= tau <= 1, got {self.tau}")

    def size(self, n: int) -> int:
        return min(self.kmax, max(1, math.ceil(n**self.tau - 1e-12)))


######################################################################
#  S W I T C H   P R I O R   C O N F I G U R A T I O N
######################################################################
@dataclass(frozen=True)
class SwitchPriorConfig:
    """
    Class that represents the prior of a switch distribution
    """

    theta: float = config.DEFAULT_THETA
    model_prior: object = field(default_factory=HarmonicModelPrior)
    switch_time_prior: object = field(default_factory=HarmonicTimePrior)
    kset_schedule: object = field(default_factory=lambda: ConstantSchedule(1))

    def __post_init__(self):
        if not 0 <= self.theta < 1:
            raise ConfigurationError(f"theta must satisfy 0 <= theta < 1, got {self.theta}")
        if self.kmax < 1:
            raise ConfigurationError("the index set schedule must allow at least one strategy")
        log_prior = self.log_model_prior
        if not np.all(np.isfinite(log_prior)):
            raise ConfigurationError("pi_k must be positive on every allowed index")
        total = float(np.exp(log_prior).sum())
        if total > 1 + config.PREDICTIVE_TOLERANCE:
            raise ConfigurationError(f"pi_k sums to {total} > 1 over the allowed indices")

    @property
    def kmax(self) -> int:
        return self.kset_schedule.kmax

    @cached_property
    def log_model_prior(self) -> np.ndarray:
        """log pi_k(k) for k = 1..kmax"""
        return np.array([self.model_prior.log_pmf(k) for k in range(1, self.kmax + 1)])

    @property
    def log_theta(self) -> float:
        return math.log(self.theta) if self.theta > 0 else -math.inf

    @property
    def log_one_minus_theta(self) -> float:
        return math.log1p(-self.theta)

    def log_hazard(self, n: int):
        """(log pi_t(T=n | T>=n), log pi_t(T>n | T>=n)) for n >= 1"""
        if n < 1:
            raise ConfigurationError(f"hazard is defined for n >= 1, got {n}")
        prior = self.switch_time_prior
        log_tail = prior.log_tail(n)
        if log_tail == -math.inf:
            raise ConfigurationError(f"switch-time prior has no mass left at n={n}")
        return prior.log_pmf(n) - log_tail, prior.log_tail(n + 1) - log_tail

    def describe(self) -> dict:
        return {
            "theta": self.theta,
            "prior_k": self.model_prior.label,
            "prior_t": self.switch_time_prior.label,
            "kmax": self.kmax,
        }


def hazard(prior: SwitchPriorConfig, n: int) -> float:
    """pi_t(T=n) / pi_t(T>=n), computed from the configured tail"""
    return math.exp(prior.log_hazard(n)[0])


######################################################################
#  P A R S I N G
######################################################################
def _split(spec: str):
    name, _, arg = str(spec).strip().partition(":")
    try:
        value = float(arg) if arg else None
    except ValueError as error:
        raise ConfigurationError(f"bad prior parameter in {spec!r}") from error
    return name, value


def parse_model_prior(spec: str, kmax: int):
    """harmonic | uniform | zeta:<alpha>"""
    name, value = _split(spec)
    if name == "harmonic" and value is None:
        return HarmonicModelPrior()
    if name == "uniform" and value is None:
        return UniformModelPrior(kmax)
    if name == "zeta" and value is not None:
        return ZetaModelPrior(value)
    raise ConfigurationError(f"unknown strategy prior {spec!r}")


def parse_switch_time_prior(spec: str):
    """harmonic | geometric:<rho> | zeta:<alpha>"""
    name, value = _split(spec)
    if name == "harmonic" and value is None:
        return HarmonicTimePrior()
    if name == "geometric" and value is not None:
        return GeometricTimePrior(value)
    if name == "zeta" and value is not None:
        return ZetaTimePrior(value)
    raise ConfigurationError(f"unknown switch-time prior {spec!r}")


def parse_schedule(spec: str, kmax: int):
    """constant | growth:<tau>"""
    name, value = _split(spec)
    if name == "constant" and value is None:
        return ConstantSchedule(kmax)
    if name == "growth" and value is not None:
        return GrowthSchedule(kmax, value)
    raise ConfigurationError(f"unknown index set schedule {spec!r}")


def build_prior(
    kmax: int,
    theta: float = config.DEFAULT_THETA,
    prior_k: str = config.DEFAULT_PRIOR_K,
    prior_t: str = config.DEFAULT_PRIOR_T,
    schedule: str = config.DEFAULT_SCHEDULE,
) -> SwitchPriorConfig:
    """Builds a SwitchPriorConfig from selector strings"""
    prior = SwitchPriorConfig(
        theta=theta,
        model_prior=parse_model_prior(prior_k, kmax),
        switch_time_prior=parse_switch_time_prior(prior_t),
        kset_schedule=parse_schedule(schedule, kmax),
    )
    logger.debug("Switch prior %s", prior.describe())
    return prior
