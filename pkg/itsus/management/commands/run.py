"""
Command that runs every window of a sampling campaign.
"""
import logging

from itsus.campaign import DONE, Campaign
from itsus.config import list_presets, load_preset
from itsus.management.base import ItsUsCommand, add_config_arguments, resolve_config

log = logging.getLogger(__name__)


class Command(ItsUsCommand):
    """
    Command that runs a plain MD, ITS, US or ITS-US campaign.

    Example to run the butane analog with four concurrent windows:
      python manage.py run --preset butane-its-us --jobs 4 --out runs/butane
    """

    help = """runs the windows of a campaign and writes their trajectories and the manifest."""

    def add_arguments(self, parser):
        """
        Arguments of this command.
        """
        add_config_arguments(parser)
        parser.add_argument(
            "--jobs",
            type=int,
            default=None,
            help="Windows run concurrently, default to the ITSUS_DEFAULT_JOBS setting",
        )
        parser.add_argument(
            "--force", action="store_true", help="Run again the windows already done"
        )
        parser.add_argument(
            "--list-presets", action="store_true", help="List the built-in configurations"
        )

    def run(self, **options):
        if options["list_presets"]:
            for name in list_presets():
                self.stdout.write(f"{name}\t{load_preset(name).description}")
            return
        campaign = Campaign(resolve_config(options), jobs=options["jobs"])
        manifest = campaign.run(force=options["force"])
        done = sum(1 for entry in manifest["windows"] if entry["status"] == DONE)
        self.stdout.write(
            f"{done}/{len(manifest['windows'])} windows done, manifest {campaign.manifest_path}"
        )
