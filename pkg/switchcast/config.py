"""
Global Configuration for switchcast

Values are read from the environment (and an optional .env file) when the
module is imported. Command-line flags and config files override them.
"""

import os
from dotenv import load_dotenv

load_dotenv()

# Environment variable consulted when no seed is given on the command line
# or in a config file
SEED_ENV = "SWITCHCAST_SEED"

# Worker processes for replicate-level parallelism
WORKERS = int(os.getenv("SWITCHCAST_WORKERS", "0")) or os.cpu_count() or 1

# Logging
LOG_LEVEL = os.getenv("SWITCHCAST_LOG_LEVEL", "INFO")
LOGGER_NAME = "switchcast"

# Where experiment outputs go when --out is not given
OUTPUT_DIR = os.getenv("SWITCHCAST_OUT", "out")

# Switch prior defaults
DEFAULT_THETA = 0.5
DEFAULT_PRIOR_K = "harmonic"
DEFAULT_PRIOR_T = "harmonic"
DEFAULT_SCHEDULE = "constant"

# Brute-force oracle guards
ORACLE_MAX_LENGTH = 8
ORACLE_MAX_MODELS = 4
ORACLE_MAX_PARAMETERS = 200_000

# Numerics
PREDICTIVE_TOLERANCE = 1e-12
POSTERIOR_TOLERANCE = 1e-9
ORDERING_TOLERANCE = 1e-9
KL_TOLERANCE = 1e-12
KL_QUADRATURE_NODES = 64
GRID_RATIO = 1.2

# Bytes read by the catchup and switch subcommands
BYTE_ALPHABET_SIZE = 256


def env_seed(default: int = 0) -> int:
    """Returns the fallback seed from the environment"""
    value = os.getenv(SEED_ENV)
    if value is None or value.strip() == "":
        return default
    return int(value)
