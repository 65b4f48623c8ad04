"""
Settings for itsus
"""
import os

SECRET_KEY = os.environ.get("ITSUS_SECRET_KEY", "itsus-insecure-local-key")

DEBUG = False

INSTALLED_APPS = [
    "itsus",
]

DATABASES = {}

USE_TZ = True

# Parent directory of the campaign outputs when the run configuration names none.
ITSUS_OUTPUT_ROOT = os.environ.get("ITSUS_OUTPUT_ROOT", "./itsus-runs")

# Windows run concurrently when the run command is given no --jobs.
ITSUS_DEFAULT_JOBS = int(os.environ.get("ITSUS_DEFAULT_JOBS", "1"))

# The long acceptance runs are skipped unless this is set.
ITSUS_RUN_ACCEPTANCE = os.environ.get("ITSUS_RUN_ACCEPTANCE", "").lower() in ("1", "true", "yes")

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "standard": {
            "format": "%(asctime)s %(levelname)s %(process)d [%(name)s] %(message)s",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "standard",
        },
    },
    "loggers": {
        "itsus": {
            "handlers": ["console"],
            "level": os.environ.get("ITSUS_LOG_LEVEL", "INFO"),
            "propagate": False,
        },
    },
}
