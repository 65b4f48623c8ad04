"""
Command that compares two PMF files.
"""
from itsus import formats
from itsus.analysis import compare_pmfs
from itsus.exceptions import OracleNotConverged, ToleranceExceeded
from itsus.management.base import ItsUsCommand, value_range
from itsus.oracle import SELF_CONVERGENCE_TOLERANCE


class Command(ItsUsCommand):
    """
    Command that aligns two PMFs on their shared non-empty bins and reports the RMSD, the
    largest absolute difference and the barrier heights. With `--tolerance` it exits with
    code 4 when the RMSD exceeds it, for CI use.

    Example:
      python manage.py compare runs/butane/pmf-phi.tsv runs/butane/pmf-phi-oracle.tsv --tolerance 0.15
    """

    help = """compares two PMFs and reports RMSD, max |ΔA| and barrier heights."""

    def add_arguments(self, parser):
        parser.add_argument("first", type=str, help="PMF file")
        parser.add_argument("second", type=str, help="PMF file on the same grid")
        parser.add_argument("--tolerance", type=float, default=None, help="Largest RMSD, kcal/mol")
        parser.add_argument(
            "--region", type=float, nargs=2, default=None, help="Bounds along the first axis"
        )
        parser.add_argument("--degrees", action="store_true", help="--region is in degrees")
        parser.add_argument("--report", type=str, default=None, help="Path of the YAML report")

    def run(self, **options):
        first = formats.read_pmf(options["first"])
        second = formats.read_pmf(options["second"])
        for name, result in ((options["first"], first), (options["second"], second)):
            drift = result.metadata.get("self_convergence")
            if drift is not None and drift > SELF_CONVERGENCE_TOLERANCE:
                raise OracleNotConverged(f"{name}: quadrature not converged, changes by {drift:.3g} kcal/mol")
        comparison = compare_pmfs(first, second, value_range(options["region"], options["degrees"]))
        report = comparison.to_config()
        report.update(first=options["first"], second=options["second"], tolerance=options["tolerance"])
        passed = options["tolerance"] is None or comparison.rmsd <= options["tolerance"]
        report["passed"] = passed
        if options["report"]:
            formats.write_yaml(options["report"], report)
        self.stdout.write(
            f"rmsd {comparison.rmsd:.4f} max_abs {comparison.max_abs:.4f} "
            f"barrier {comparison.barrier_a:.4f} vs {comparison.barrier_b:.4f} "
            f"over {comparison.shared_bins} bins"
        )
        if not passed:
            raise ToleranceExceeded(
                f"rmsd {comparison.rmsd:.4f} kcal/mol exceeds the tolerance {options['tolerance']:g}"
            )
