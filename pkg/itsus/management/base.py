"""
Shared plumbing of the itsus management commands.
"""
import logging
import math

from django.core.management.base import BaseCommand, CommandError

from itsus.config import list_presets, load_config, load_preset
from itsus.exceptions import ConfigError, ItsUsError

logger = logging.getLogger(__name__)

VERBOSITY_LEVELS = {0: logging.ERROR, 1: logging.INFO, 2: logging.DEBUG, 3: logging.DEBUG}


class ItsUsCommand(BaseCommand):
    """
    A management command whose toolkit errors become a `CommandError` carrying the error's
    exit code.

    Subclasses implement `run(**options)` instead of `handle`.
    """

    def handle(self, *args, **options):
        logging.getLogger("itsus").setLevel(VERBOSITY_LEVELS.get(options.get("verbosity", 1), logging.INFO))
        try:
            return self.run(**options)
        except ItsUsError as exc:
            logger.error("%s failed: %s", self.__module__.rsplit(".", 1)[-1], exc)
            raise CommandError(str(exc), returncode=exc.exit_code) from exc

    def run(self, **options):
        raise NotImplementedError


def add_config_arguments(parser):
    """
    --config PATH or --preset NAME, plus the common overrides.
    """
    parser.add_argument("--config", type=str, help="Path of the YAML run configuration")
    parser.add_argument("--preset", type=str, help="Name of a built-in run configuration")
    parser.add_argument("--seed", type=int, default=None, help="Override the configured seed")
    parser.add_argument("--out", type=str, default=None, help="Output directory of the campaign")
    parser.add_argument(
        "--replicas", type=int, default=None, help="Independent walkers per window"
    )


def resolve_config(options):
    if options.get("config") and options.get("preset"):
        raise ConfigError("config", "give either --config or --preset, not both")
    if options.get("config"):
        config = load_config(options["config"])
    elif options.get("preset"):
        config = load_preset(options["preset"])
    else:
        raise ConfigError("config", f"--config or --preset is required, presets: {list_presets()}")
    return config.with_overrides(
        seed=options.get("seed"), output=options.get("out"), replicas=options.get("replicas")
    )


def value_range(values, degrees=False):
    if values is None:
        return None
    scale = math.pi / 180.0 if degrees else 1.0
    return (values[0] * scale, values[1] * scale)
