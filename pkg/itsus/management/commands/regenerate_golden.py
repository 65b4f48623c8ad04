"""
Command that regenerates the golden fixtures and reports their drift.
"""
from itsus import formats
from itsus.fixtures import GOLDEN_DIR, regenerate_golden
from itsus.management.base import ItsUsCommand


class Command(ItsUsCommand):
    """
    Command that recomputes every pinned value of the golden fixtures. It exits with code 5
    when a value drifts beyond its tolerance or a golden file cannot be read.

    Example checking the oracle values at a perturbed quadrature resolution:
      python manage.py regenerate_golden --resolution 1536
    """

    help = """recomputes the pinned values of the golden fixtures and reports drift."""

    def add_arguments(self, parser):
        parser.add_argument("--directory", type=str, default=str(GOLDEN_DIR))
        parser.add_argument("--resolution", type=int, default=None, help="Oracle quadrature nodes")
        parser.add_argument("--jobs", type=int, default=1, help="Fixtures regenerated concurrently")
        parser.add_argument("--write", action="store_true", help="Store the recomputed values")
        parser.add_argument("--report", type=str, default=None, help="Path of the YAML report")

    def run(self, **options):
        report = regenerate_golden(
            options["directory"],
            write=options["write"],
            resolution=options["resolution"],
            jobs=options["jobs"],
        )
        if options["report"]:
            formats.write_yaml(options["report"], report.to_config())
        for entry in report.entries:
            status = "ok" if entry.ok else "DRIFT"
            self.stdout.write(
                f"{status}\t{entry.fixture}.{entry.name}\t{entry.pinned!r}\t{entry.recomputed!r}"
            )
        for name, message in sorted(report.errors.items()):
            self.stdout.write(f"ERROR\t{name}\t{message}")
        if not options["write"]:
            report.raise_for_drift()
