"""
Models for switchcast runs

The run configuration and the error types shared by every module are stored
in this module
"""

import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace
from typing import List, Optional

from switchcast import config

logger = logging.getLogger(__name__)


######################################################################
#  E R R O R S
######################################################################
class DataValidationError(Exception):
    """Used for data validation errors: bad outcomes, specs or settings"""


class OutcomeError(DataValidationError):
    """Used when an outcome lies outside the alphabet or the unit interval"""


class ShapeMismatchError(DataValidationError):
    """Used when arrays indexed by strategy do not line up"""


class ConfigurationError(Exception):
    """Used for prior configurations that cannot define a switch distribution"""


class UndefinedPosteriorError(ArithmeticError):
    """Used when every weight is log-zero so no posterior exists"""


class EnumerationCapError(Exception):
    """Used when a brute-force enumeration would exceed its hard caps"""


class InvariantViolation(Exception):
    """Used when a runtime invariant check fails"""


######################################################################
#  R U N   C O N F I G U R A T I O N
######################################################################
SUBCOMMANDS = ("catchup", "histsim", "consistency", "switch", "selftest")
ALPHABETS = ("bytes", "binary", "unit")

# keys written into a manifest next to the config echo
MANIFEST_KEYS = ("version", "input_sha256", "outputs")

_DEFAULTS = {
    "catchup": {"orders": [1, 2], "stride": 1000, "alphabet": "bytes"},
    "histsim": {
        "n": 20000,
        "replicates": 20,
        "density": "linear:0.5,1",
        "estimators": ["switch", "bma", "cuberoot"],
        "alphabet": "unit",
    },
    "consistency": {
        "n": 10000,
        "seeds": 10,
        "theta_star": 0.7,
        "models": ["markov:0", "markov:1"],
        "alphabet": "binary",
    },
    "switch": {"models": ["markov:1", "markov:2"], "stride": 100},
    "selftest": {"n": 6, "replicates": 100, "alphabet": "binary"},
}


def _parse_list(value, convert=str):
    """Accepts a list or a comma separated string"""
    if value is None:
        return None
    if isinstance(value, str):
        items = [item.strip() for item in value.split(",") if item.strip()]
    else:
        items = list(value)
    return [convert(item) for item in items]


@dataclass
class RunConfig:  # pylint: disable=too-many-instance-attributes
    """
    Class that represents one validated invocation of the command line
    """

    subcommand: str = "switch"
    input: Optional[str] = None
    alphabet: str = "bytes"
    orders: List[int] = field(default_factory=list)
    models: List[str] = field(default_factory=list)
    n: Optional[int] = None
    replicates: int = 1
    seed: int = 0
    seeds: int = 1
    density: str = "uniform"
    estimators: List[str] = field(default_factory=list)
    theta_star: float = 0.5
    transition: Optional[List[float]] = None
    out: str = config.OUTPUT_DIR
    stride: int = 1
    workers: int = config.WORKERS
    kmax: Optional[int] = None
    theta: float = config.DEFAULT_THETA
    prior_k: str = config.DEFAULT_PRIOR_K
    prior_t: str = config.DEFAULT_PRIOR_T
    schedule: str = config.DEFAULT_SCHEDULE
    log_level: str = config.LOG_LEVEL

    def __repr__(self):
        return f"<RunConfig {self.subcommand} seed=[{self.seed}]>"

    def serialize(self) -> dict:
        """Serializes a RunConfig into a flat dictionary"""
        return asdict(self)

    def deserialize(self, data: dict):
        """
        Deserializes a RunConfig from a flat dictionary

        Keys missing from the dictionary keep their current value.

        Args:
            data (dict): A dictionary containing the run settings
        """
        try:
            known = {item.name for item in fields(self)}
            for key, value in data.items():
                if key in MANIFEST_KEYS:
                    continue
                if key not in known:
                    raise DataValidationError(f"Invalid RunConfig: unknown field {key}")
                setattr(self, key, value)
        except AttributeError as error:
            raise DataValidationError(
                "Invalid RunConfig: body contained bad or no data - " + str(error)
            ) from error
        self._coerce()
        return self

    @classmethod
    def build(cls, subcommand: str, flags: Optional[dict] = None, config_path=None):
        """Builds a RunConfig from defaults, a config file and flags

        Flags win over config file values, which win over the environment.

        Args:
            subcommand (string): the subcommand being run
            flags (dict): flag values, None meaning not given
            config_path (string): optional path of a flat JSON config file
        """
        if subcommand not in SUBCOMMANDS:
            raise DataValidationError(f"Invalid subcommand: {subcommand}")
        try:
            seed = config.env_seed()
        except ValueError as error:
            raise DataValidationError(
                f"Invalid RunConfig: seed from ${config.SEED_ENV} must be an integer, "
                f"got {os.getenv(config.SEED_ENV)!r}"
            ) from error
        run = cls(subcommand=subcommand, seed=seed)
        run.deserialize(_DEFAULTS[subcommand])
        if config_path:
            file_data = load_config_file(config_path)
            file_data.pop("subcommand", None)
            base = os.path.dirname(os.path.abspath(config_path))
            if file_data.get("input") and not os.path.isabs(file_data["input"]):
                file_data["input"] = os.path.join(base, file_data["input"])
            run.deserialize(file_data)
        given = {key: value for key, value in (flags or {}).items() if value is not None}
        run.deserialize(given)
        if run.input:
            run.input = os.path.abspath(run.input)
        run.validate()
        return run

    def _coerce(self):
        """Normalizes list-valued fields given as comma separated strings"""
        try:
            self.orders = _parse_list(self.orders, int) or []
            self.models = _parse_list(self.models) or []
            self.estimators = _parse_list(self.estimators) or []
            self.transition = _parse_list(self.transition, float)
        except (TypeError, ValueError) as error:
            raise DataValidationError(f"Invalid RunConfig: {error}") from error

    def validate(self):
        """Rejects invalid combinations, naming the offending field"""
        # pylint: disable=too-many-branches, import-outside-toplevel, cyclic-import
        _check(self.subcommand in SUBCOMMANDS, "subcommand", self.subcommand)
        _check(self.alphabet in ALPHABETS, "alphabet", self.alphabet)
        _check(
            isinstance(self.theta, (int, float)) and 0 <= self.theta < 1,
            "theta",
            self.theta,
            "must satisfy 0 <= theta < 1",
        )
        _check(_is_count(self.replicates), "replicates", self.replicates, "must be >= 1")
        _check(_is_count(self.seeds), "seeds", self.seeds, "must be >= 1")
        _check(_is_count(self.stride), "stride", self.stride, "must be >= 1")
        _check(_is_count(self.workers), "workers", self.workers, "must be >= 1")
        _check(self.n is None or _is_count(self.n), "n", self.n, "must be >= 1")
        _check(self.kmax is None or _is_count(self.kmax), "kmax", self.kmax, "must be >= 1")
        _check(self.kmax is None or self.subcommand == "histsim", "kmax", self.kmax, "only applies to histsim")
        _check(isinstance(self.seed, int) and self.seed >= 0, "seed", self.seed)
        _check(
            isinstance(self.theta_star, (int, float)) and 0 < self.theta_star < 1,
            "theta_star",
            self.theta_star,
        )
        if self.transition is not None:
            _check(
                len(self.transition) == 2 and all(0 < p < 1 for p in self.transition),
                "transition",
                self.transition,
                "must be two probabilities P(1|0),P(1|1)",
            )

        from switchcast import priors, predictors, sources

        try:
            priors.parse_model_prior(self.prior_k, self.kmax or 1)
            priors.parse_switch_time_prior(self.prior_t)
            priors.parse_schedule(self.schedule, self.kmax or 1)
        except (ConfigurationError, DataValidationError) as error:
            raise DataValidationError(f"Invalid RunConfig: {error}") from error

        if self.subcommand in ("catchup", "switch"):
            _check(bool(self.input), "input", self.input, "is required")
            if not os.path.isfile(self.input):
                raise DataValidationError(f"Invalid RunConfig: input file {self.input} not found")
        if self.subcommand == "catchup":
            _check(bool(self.orders), "orders", self.orders, "must be nonempty")
            _check(len(set(self.orders)) == len(self.orders), "orders", self.orders, "must be distinct")
            _check(all(order >= 0 for order in self.orders), "orders", self.orders)
        if self.subcommand in ("switch", "consistency"):
            _check(bool(self.models), "models", self.models, "must be nonempty")
            size = alphabet_size(self.alphabet)
            for spec in self.models:
                predictors.parse_family(spec, size)
        if self.subcommand == "histsim":
            sources.parse_density(self.density)
            _check(bool(self.estimators), "estimators", self.estimators, "must be nonempty")
            for label in self.estimators:
                _check(_valid_estimator(label), "estimators", label)
        out_parent = os.path.dirname(os.path.abspath(self.out)) or "."
        _check(os.path.isdir(out_parent), "out", self.out, "parent directory must exist")
        logger.debug("Validated %s", self)
        return self

    def resolved_kmax(self) -> int:
        """Returns kmax, defaulting to ceil(sqrt(n)) for histogram runs"""
        if self.kmax:
            return self.kmax
        if self.subcommand == "histsim":
            return max(1, math.ceil(math.sqrt(self.n or 1)))
        if self.subcommand == "catchup":
            return len(self.orders)
        return max(1, len(self.models))

    def copy(self, **changes):
        """Returns a copy with some fields replaced"""
        return replace(self, **changes)


######################################################################
#  U T I L I T Y   F U N C T I O N S
######################################################################
def load_config_file(path) -> dict:
    """Reads a flat JSON config file"""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except FileNotFoundError as error:
        raise DataValidationError(f"Invalid RunConfig: config file {path} not found") from error
    except json.JSONDecodeError as error:
        raise DataValidationError(f"Invalid RunConfig: config file {path} is not JSON - {error}") from error
    if not isinstance(data, dict):
        raise DataValidationError("Invalid RunConfig: config file must hold a flat JSON object")
    return data


def alphabet_size(alphabet: str) -> Optional[int]:
    """Number of symbols for a named alphabet, None for the unit interval"""
    if alphabet == "bytes":
        return config.BYTE_ALPHABET_SIZE
    if alphabet == "binary":
        return 2
    return None


def _is_count(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool) and value >= 1


def _valid_estimator(label: str) -> bool:
    if label in ("switch", "bma", "cuberoot"):
        return True
    name, _, arg = label.partition(":")
    return name == "fixed" and arg.isdigit() and int(arg) >= 1


def _check(condition: bool, name: str, value, detail: str = "is out of range"):
    if not condition:
        raise DataValidationError(f"Invalid RunConfig: {name}={value!r} {detail}")
