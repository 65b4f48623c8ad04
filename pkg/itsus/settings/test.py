"""
Settings for the itsus test suite
"""
import tempfile

from itsus.settings.base import *

ITSUS_OUTPUT_ROOT = tempfile.gettempdir()
ITSUS_DEFAULT_JOBS = 1

# Keep the test output readable, the tests assert on log records with assertLogs.
LOGGING["loggers"]["itsus"]["level"] = "WARNING"
