"""
Operational settings read from the process environment.

Experiment parameters live in the experiment config document (see `districtflow.schema`);
the values here only control how runs are executed on a machine.
"""

import logging
import os
from pathlib import Path

import environ

from districtflow.exceptions import ConfigError

logger = logging.getLogger(__name__)

# Build paths inside the project
BASE_DIR = Path(__file__).resolve().parent.parent

DEV = (BASE_DIR / "tests").exists()

env = environ.Env()

####################################################################################################
# Execution                                                                                        #
####################################################################################################

DISTRICTFLOW_LOG_LEVEL = env.str("DISTRICTFLOW_LOG_LEVEL", default="DEBUG" if DEV else "INFO")
DISTRICTFLOW_MAX_WORKERS = env.int("DISTRICTFLOW_MAX_WORKERS", default=os.cpu_count() or 1)

####################################################################################################
# Exact oracle caps                                                                                #
####################################################################################################

# Candidate labelings n_D^|V| tested during exhaustive enumeration
DISTRICTFLOW_ENUMERATION_CAP = env.int("DISTRICTFLOW_ENUMERATION_CAP", default=2**24)
# Extended states of a dense transition matrix
DISTRICTFLOW_DENSE_STATE_CAP = env.int("DISTRICTFLOW_DENSE_STATE_CAP", default=20_000)

####################################################################################################
# Run defaults                                                                                     #
####################################################################################################

DISTRICTFLOW_CHECKPOINT_INTERVAL = env.int("DISTRICTFLOW_CHECKPOINT_INTERVAL", default=100_000)
DISTRICTFLOW_SNAPSHOT_INTERVAL = env.int("DISTRICTFLOW_SNAPSHOT_INTERVAL", default=10)
DISTRICTFLOW_BOOTSTRAP_SAMPLES = env.int("DISTRICTFLOW_BOOTSTRAP_SAMPLES", default=10_000)

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


def validate_settings():
    # type: () -> None
    """Validate operational settings at startup."""
    if DISTRICTFLOW_LOG_LEVEL.upper() not in LOG_LEVELS:
        raise ConfigError("DISTRICTFLOW_LOG_LEVEL", f"unknown log level {DISTRICTFLOW_LOG_LEVEL!r}")

    positive = {
        "DISTRICTFLOW_MAX_WORKERS": DISTRICTFLOW_MAX_WORKERS,
        "DISTRICTFLOW_ENUMERATION_CAP": DISTRICTFLOW_ENUMERATION_CAP,
        "DISTRICTFLOW_DENSE_STATE_CAP": DISTRICTFLOW_DENSE_STATE_CAP,
        "DISTRICTFLOW_CHECKPOINT_INTERVAL": DISTRICTFLOW_CHECKPOINT_INTERVAL,
        "DISTRICTFLOW_SNAPSHOT_INTERVAL": DISTRICTFLOW_SNAPSHOT_INTERVAL,
        "DISTRICTFLOW_BOOTSTRAP_SAMPLES": DISTRICTFLOW_BOOTSTRAP_SAMPLES,
    }
    for name, value in positive.items():
        if not isinstance(value, int):
            raise ConfigError(name, f"{name} must be an integer, got {type(value).__name__}")
        if value < 1:
            raise ConfigError(name, f"{name} must be positive, got {value}")
