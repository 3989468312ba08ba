"""
Django settings for the pphi project.

There is no web surface and no database: Django provides the settings layer,
logging configuration, management commands and the test runner.

For the full list of Django settings and their values, see
https://docs.djangoproject.com/en/4.2/ref/settings/
"""

import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Unused (no sessions or signing), but Django refuses to start without one.
SECRET_KEY = "pphi-insecure-not-used-for-anything"

DEBUG = False

ALLOWED_HOSTS: List[str] = []


# Application definition

INSTALLED_APPS = [
    "pphi.apps.lattice",
    "pphi.apps.gff",
    "pphi.apps.wick",
    "pphi.apps.norms",
    "pphi.apps.flow",
    "pphi.apps.variational",
    "pphi.apps.mcmc",
    "pphi.apps.extremes",
    "pphi.apps.harness",
]

MIDDLEWARE: List[str] = []

DATABASES: Dict[str, Any] = {}

USE_TZ = True
TIME_ZONE = "UTC"


def _env_flag(name: str, default: bool = False) -> bool:
    value = os.environ.get(name)
    if value is None:
        return default
    return value.strip().lower() in ("1", "true", "yes", "on")


TESTING = any("test" in arg for arg in sys.argv)


# Logging

PPHI_LOG_LEVEL = os.environ.get("PPHI_LOG_LEVEL", "WARNING" if TESTING else "INFO")

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "timestamped": {
            "format": "%(asctime)s %(levelname)s %(name)s: %(message)s",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "timestamped",
        },
    },
    "loggers": {
        "pphi": {
            "handlers": ["console"],
            "level": PPHI_LOG_LEVEL,
            "propagate": False,
        },
    },
}


# Numerics

# Worker threads for replica/chain scheduling; results never depend on it.
PPHI_WORKERS = int(os.environ.get("PPHI_WORKERS", os.cpu_count() or 1))

# Inner Monte-Carlo samples are drawn in chunks of this many fields.
PPHI_MC_CHUNK = 256

# gzip every field dump and JSONL stream.
PPHI_COMPRESS = _env_flag("PPHI_COMPRESS")

# Relative truncation tolerance of the automatic T_max and t_min rules.
PPHI_TAIL_TOLERANCE = 1e-4

# Default geometric ratio of the scale grid.
PPHI_DEFAULT_RHO = 0.7

# Energy cut-off rule: factor times the pilot quantile of v0.
PPHI_CUTOFF_QUANTILE = 0.999
PPHI_CUTOFF_FACTOR = 10.0
PPHI_CUTOFF_PILOT = 256

# MALA step-size adaptation target.
PPHI_MALA_TARGET_ACCEPTANCE = 0.574

# Minimum sample size accepted by the Gumbel fit.
PPHI_GUMBEL_MIN_SAMPLES = 50

# Resolution of the Hölder norm's trigonometric refinement.
PPHI_HOLDER_REFINE = 8

# Replicas handled per scheduling batch; bounds memory and sets how often the
# statistics stream is flushed.
PPHI_REPLICA_BATCH = 64

# Override the following in local.py
try:
    from .local import *  # noqa  # pylint: disable=unused-wildcard-import,wildcard-import
except ImportError:
    if not TESTING:
        logging.debug("No local.py settings override")
