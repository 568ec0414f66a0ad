"""
Business logic for building run manifests.
"""

import hashlib
import json
import logging
import platform
import subprocess
from datetime import UTC, datetime

import numpy as np
import scipy

from districtflow import __version__, settings
from districtflow.schema import ExperimentConfig

logger = logging.getLogger(__name__)


def canonical_json(data):
    # type: (dict) -> str
    """Deterministic JSON text: sorted keys, no insignificant whitespace."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def config_hash(config):
    # type: (ExperimentConfig) -> str
    """
    Hash of the experiment configuration guarding checkpoint resumption.

    The output directory is excluded so a run may be resumed from a moved directory.

    :param config: The experiment configuration
    :return: Hex encoded sha256 of the canonical JSON of the config
    """
    data = config.model_dump(mode="json", exclude={"out"})
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()


def build_id():
    # type: () -> str|None
    """Git commit of the source tree, None outside a checkout."""
    try:
        result = subprocess.run(
            ["git", "rev-parse", "--short=12", "HEAD"],
            cwd=settings.BASE_DIR,
            capture_output=True,
            text=True,
            timeout=5,
            check=True,
        )
    except (OSError, subprocess.SubprocessError):
        return None
    return result.stdout.strip() or None


def build_manifest(config, seeds, started, finished, chains=None):
    # type: (ExperimentConfig, list[int], datetime, datetime, list[dict]|None) -> dict
    """
    Build the manifest written next to the run outputs.

    :param config: The experiment configuration (echoed in full)
    :param seeds: Per-chain entropy derived from (seed, chain index)
    :param started: Run start time
    :param finished: Run end time
    :param chains: Optional per-chain details (steps, resumed_from, wall-clock)
    :return: Manifest document
    """
    manifest = {
        "config": config.model_dump(mode="json"),
        "config_hash": config_hash(config),
        "version": __version__,
        "build": build_id(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "seeds": [str(s) for s in seeds],
        "started": started.astimezone(UTC).isoformat(),
        "finished": finished.astimezone(UTC).isoformat(),
        "wall_clock_seconds": round((finished - started).total_seconds(), 3),
    }
    if chains is not None:
        manifest["chains"] = chains
    return manifest
