"""
Command that solves the WHAM equations of a finished campaign.
"""
import os

from itsus import formats
from itsus.campaign import load_campaign, wham_input
from itsus.exceptions import WhamNotConverged
from itsus.management.base import ItsUsCommand
from itsus.wham import solve, unbiased_density


class Command(ItsUsCommand):
    """
    Command that pools every window of a campaign, solves for the window free energies and
    writes `f.tsv`, `weights.tsv` and the `wham.yml` report next to the manifest.

    Example analysing the 150 ps following the first 10 ps of every trajectory:
      python manage.py wham runs/butane/manifest.yml --skip 10000 --max-time 160000
    """

    help = """solves WHAM for a campaign and writes the free energies and sample weights."""

    def add_arguments(self, parser):
        parser.add_argument("manifest", type=str, help="Path of the campaign manifest")
        parser.add_argument("--skip", type=float, default=None, help="Discard the first fs")
        parser.add_argument("--max-time", type=float, default=None, help="Last fs analysed")
        parser.add_argument("--stride", type=int, default=None, help="Keep every n-th record")
        parser.add_argument("--tolerance", type=float, default=None, help="kcal/mol")
        parser.add_argument("--max-iterations", type=int, default=None)
        parser.add_argument("--out", type=str, default=None, help="Output directory")

    def run(self, **options):
        manifest, config = load_campaign(options["manifest"])
        analysis = config.analysis

        def option(name, default):
            return default if options[name] is None else options[name]

        data = wham_input(
            options["manifest"],
            skip=option("skip", analysis.skip),
            max_time=option("max_time", analysis.max_time),
            stride=option("stride", analysis.stride),
        )
        solution = solve(
            data,
            tol=option("tolerance", analysis.tolerance),
            max_iter=option("max_iterations", analysis.max_iterations),
        )
        output = options["out"] or os.path.dirname(os.path.abspath(options["manifest"]))
        metadata = {
            "name": manifest["name"],
            "method": manifest["method"],
            "temperature": manifest["temperature"],
            "surface": manifest["surface"],
            "converged": solution.converged,
        }
        formats.write_free_energies(os.path.join(output, "f.tsv"), solution.window_ids, solution.f, metadata)
        samples = unbiased_density(solution, data)
        formats.write_weights(
            os.path.join(output, "weights.tsv"), samples, solution.log_weights, metadata
        )
        formats.write_yaml(
            os.path.join(output, "wham.yml"),
            {
                "converged": solution.converged,
                "iterations": solution.iterations,
                "residual": solution.residual,
                "samples": data.n_samples,
                "isolated_windows": list(solution.isolated_windows),
                "window_ids": list(solution.window_ids),
                "f": solution.f,
                "overlap": solution.overlap,
            },
        )
        self.stdout.write(
            f"WHAM {'converged' if solution.converged else 'did not converge'} after "
            f"{solution.iterations} iterations, residual {solution.residual:.3g} kcal/mol, "
            f"{data.n_samples} samples in {len(data.windows)} windows"
        )
        for window_id in solution.isolated_windows:
            self.stderr.write(f"warning: window {window_id} does not overlap with any other window")
        if not solution.converged:
            raise WhamNotConverged(
                f"residual {solution.residual:.3g} after {solution.iterations} iterations"
            )
