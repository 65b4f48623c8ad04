"""
Command line entry point of itsus, dispatching to the Django management commands.
"""
import os
import sys


def main(argv=None):
    """
    Run `itsus <command> [options]`, e.g. `itsus run --preset butane-its-us --jobs 4`.
    """
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "itsus.settings.base")
    from django.core.management import execute_from_command_line

    execute_from_command_line(["itsus"] + list(sys.argv[1:] if argv is None else argv))
