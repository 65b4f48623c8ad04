"""
Command that calibrates the ITS temperature weights of a run configuration.
"""
from itsus.campaign import Campaign
from itsus.exceptions import CalibrationNotConverged, ConfigError
from itsus.management.base import ItsUsCommand, add_config_arguments, resolve_config


class Command(ItsUsCommand):
    """
    Command that determines the weights n_k with short trial simulations and writes the
    schedule file and the calibration report. The schedule is written even when the
    calibration does not converge; the command then exits with code 3.

    Example:
      python manage.py calibrate --preset butane-its --out runs/butane-its
    """

    help = """calibrates the ITS weights and writes the schedule file and the report."""

    def add_arguments(self, parser):
        add_config_arguments(parser)
        parser.add_argument(
            "--window",
            type=int,
            default=None,
            help="Calibrate under the bias of this window id instead of the shared schedule",
        )

    def run(self, **options):
        config = resolve_config(options)
        campaign = Campaign(config)
        window = None
        if options["window"] is not None:
            windows = {w.id: w for w in campaign.windows() if w is not None}
            if options["window"] not in windows:
                raise ConfigError("window", f"no window with id {options['window']}")
            window = windows[options["window"]]
        start = config.windows.start if config.windows else None
        schedule, report = campaign.calibrate(window=window, start=start)
        self.stdout.write(
            f"{schedule.size} temperatures, flatness {report.flatness:.3g} after "
            f"{report.iterations} round(s), written to {campaign.output}"
        )
        if not report.converged:
            raise CalibrationNotConverged(
                f"calibration did not reach flatness {config.its.calibration.flatness:g}, "
                f"best {report.flatness:.3g}"
            )
