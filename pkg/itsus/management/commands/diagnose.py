"""
Command that reports per window sampling diagnostics of a campaign.
"""
import os

from itsus import formats
from itsus.analysis import energy_distribution, overlap_and_occupancy
from itsus.campaign import load_campaign, wham_input
from itsus.management.base import ItsUsCommand


class Command(ItsUsCommand):
    """
    Command that reports the sampled energy distribution of every window and, given a
    hidden collective variable, which windows stay trapped in one hidden basin.

    Example:
      python manage.py diagnose runs/hidden-barrier-us/manifest.yml --hidden-cv y
    """

    help = """reports energy distributions and hidden basin occupancy of every window."""

    def add_arguments(self, parser):
        parser.add_argument("manifest", type=str)
        parser.add_argument("--hidden-cv", type=str, default=None)
        parser.add_argument("--reaction-cv", type=str, default=None)
        parser.add_argument("--threshold", type=float, default=0.0)
        parser.add_argument("--bins", type=int, default=50, help="Energy histogram bins")
        parser.add_argument("--skip", type=float, default=None, help="Discard the first fs")
        parser.add_argument("--report", type=str, default=None, help="Path of the YAML report")

    def run(self, **options):
        _, config = load_campaign(options["manifest"])
        skip = config.analysis.skip if options["skip"] is None else options["skip"]
        data = wham_input(options["manifest"], skip=skip, stride=config.analysis.stride)
        report = {
            "energy": {
                samples.window_id: energy_distribution(samples.energy, options["bins"]).to_config()
                for samples in data.windows
            }
        }
        hidden = options["hidden_cv"] or config.analysis.hidden_cv
        if hidden:
            reaction = options["reaction_cv"] or config.analysis_cvs()[0]
            occupancy = overlap_and_occupancy(
                {samples.window_id: samples.cvs for samples in data.windows},
                reaction,
                hidden,
                threshold=options["threshold"],
            )
            report["occupancy"] = occupancy.to_config()
            report["trapped"] = list(occupancy.trapped())
            report["both_basins"] = list(occupancy.both_basins())
            self.stdout.write(
                f"{len(report['trapped'])} trapped window(s), "
                f"{len(report['both_basins'])} window(s) visiting both basins"
            )
        for window_id, energy in report["energy"].items():
            self.stdout.write(f"window {window_id}\tmean U {energy['mean']:.3f}\tstd U {energy['std']:.3f}")
        path = options["report"] or os.path.join(
            os.path.dirname(os.path.abspath(options["manifest"])), "diagnostics.yml"
        )
        formats.write_yaml(path, report)
