"""
Command that turns WHAM sample weights into potentials of mean force.
"""
import os

from itsus import formats
from itsus.analysis import HistogramGrid, estimate_pmf, marginalize, pmf, replica_pmf, weighted_density
from itsus.exceptions import ConfigError
from itsus.management.base import ItsUsCommand, value_range
from itsus.oracle import reference_pmf, reference_pmf_2d
from itsus.potentials import SurfaceSpec, make_surface
from itsus.utils import beta


class Command(ItsUsCommand):
    """
    Command that bins the unbiased samples of a `weights.tsv` file along one or two
    collective variables and writes the PMF.

    Examples:
      python manage.py pmf runs/butane/weights.tsv --cv phi --bootstrap 200
      python manage.py pmf runs/amide-2d/weights.tsv --cv omega eta --marginalize eta --oracle
    """

    help = """writes the PMF of WHAM weighted samples along one or two collective variables."""

    def add_arguments(self, parser):
        parser.add_argument("weights", type=str, help="weights.tsv written by the wham command")
        parser.add_argument("--cv", nargs="+", required=True, help="One or two collective variables")
        parser.add_argument("--bins", type=int, nargs="+", default=None)
        parser.add_argument(
            "--range",
            type=float,
            nargs=2,
            action="append",
            default=None,
            help="Bounds of a non-periodic axis, once per collective variable",
        )
        parser.add_argument("--degrees", action="store_true", help="--range is in degrees")
        parser.add_argument("--marginalize", type=str, default=None, help="Axis integrated out")
        parser.add_argument("--bootstrap", type=int, default=0, help="Block bootstrap resamples")
        parser.add_argument("--blocks", type=int, default=20, help="Blocks per trajectory")
        parser.add_argument("--per-replica", action="store_true", help="Mean and std over replicas")
        parser.add_argument("--oracle", action="store_true", help="Also write the quadrature PMF")
        parser.add_argument("--seed", type=int, default=0, help="Seed of the bootstrap")
        parser.add_argument("--out", type=str, default=None, help="Path of the PMF file")

    def _path(self, options, names, suffix=""):
        if options["out"] and not suffix:
            return options["out"]
        if options["out"]:
            root, extension = os.path.splitext(options["out"])
            return f"{root}{suffix}{extension or '.tsv'}"
        directory = os.path.dirname(os.path.abspath(options["weights"]))
        return os.path.join(directory, f"pmf-{'-'.join(names)}{suffix}.tsv")

    def run(self, **options):
        names = tuple(options["cv"])
        if len(names) > 2:
            raise ConfigError("cv", "at most two collective variables")
        if options["marginalize"] and (len(names) != 2 or options["marginalize"] not in names):
            raise ConfigError("marginalize", "needs two collective variables, one of them named")
        metadata, samples = formats.read_weights(options["weights"])
        for key in ("surface", "temperature"):
            if key not in metadata:
                raise ConfigError(f"{options['weights']}.{key}", "missing from the weights header")
        surface = make_surface(SurfaceSpec.from_config(metadata["surface"]))
        beta0 = beta(float(metadata["temperature"]))
        ranges = None
        if options["range"]:
            ranges = [value_range(r, options["degrees"]) for r in options["range"]]
        grid = HistogramGrid.for_surface(surface, names, options["bins"], ranges)
        for name in names:
            samples.cv(name)

        if options["per_replica"]:
            result = replica_pmf(samples, names, grid, beta0)
        else:
            result = estimate_pmf(
                samples, names, grid, beta0,
                n_blocks=options["blocks"], n_resamples=options["bootstrap"], seed=options["seed"],
            )
        header = {"source": os.path.abspath(options["weights"]), "wham_converged": metadata.get("converged")}
        written = [self._path(options, names)]
        formats.write_pmf(written[-1], result, header)

        if options["oracle"]:
            oracle = (
                reference_pmf(surface, names[0], grid, beta0)
                if len(names) == 1
                else reference_pmf_2d(surface, names, grid, beta0)
            )
            written.append(self._path(options, names, "-oracle"))
            formats.write_pmf(written[-1], oracle)

        if options["marginalize"]:
            remaining = tuple(n for n in names if n != options["marginalize"])
            density = marginalize(weighted_density(samples, names, grid), options["marginalize"])
            written.append(self._path(options, remaining, "-marginal"))
            formats.write_pmf(written[-1], pmf(density, beta0), {**header, "marginalized": options["marginalize"]})
            if options["oracle"]:
                written.append(self._path(options, remaining, "-marginal-oracle"))
                formats.write_pmf(written[-1], reference_pmf(surface, remaining[0], density.grid, beta0))

        for path in written:
            self.stdout.write(path)
