import os

import numpy as np
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from itsus import formats
from itsus.tests.commands import CommandTestMixin
from itsus.tests.factories import WindowsDataFactory

DYNAMICS = {"temperature": 300, "n_steps": 2000, "record_stride": 10}


class TorsionPmfCommandTestCase(CommandTestMixin, SimpleTestCase):
    """
    The `pmf` management command along the torsion of an umbrella campaign.
    """

    def setUp(self):
        super().setUp()
        config = self.write_config(
            method="us", dynamics=DYNAMICS, windows=WindowsDataFactory(count=12, force_constant=10)
        )
        self.call("run", "--config", config, "--out", self.path("run"))
        self.call("wham", self.path("run", "manifest.yml"), "--tolerance", "1e-4")
        self.weights = self.path("run", "weights.tsv")

    def test_pmf(self):
        output = self.call("pmf", self.weights, "--cv", "phi")
        path = self.path("run", "pmf-phi.tsv")
        self.assertEqual(output.splitlines(), [path])
        result = formats.read_pmf(path)
        self.assertEqual(result.grid.shape, (72,))
        self.assertEqual(np.nanmin(result.values), 0.0)
        self.assertAlmostEqual(result.temperature, 300.0)
        self.assertTrue(result.metadata["wham_converged"])

    def test_bootstrap_and_oracle(self):
        output = self.call(
            "pmf", self.weights, "--cv", "phi", "--bins", "36", "--bootstrap", "4", "--blocks", "5", "--oracle"
        )
        self.assertEqual(len(output.splitlines()), 2)
        result = formats.read_pmf(self.path("run", "pmf-phi.tsv"))
        self.assertEqual(result.metadata["resamples"], 4)
        self.assertEqual(result.errors.shape, (36,))
        oracle = formats.read_pmf(self.path("run", "pmf-phi-oracle.tsv"))
        self.assertEqual(oracle.origin, "oracle")
        self.assertEqual(oracle.grid, result.grid)

    def test_out(self):
        self.call("pmf", self.weights, "--cv", "phi", "--oracle", "--out", self.path("phi.tsv"))
        self.assertTrue(os.path.exists(self.path("phi.tsv")))
        self.assertTrue(os.path.exists(self.path("phi-oracle.tsv")))

    def test_too_many_cvs(self):
        with self.assertRaises(CommandError) as context:
            self.call("pmf", self.weights, "--cv", "phi", "phi", "phi")
        self.assertEqual(context.exception.returncode, 1)

    def test_marginalize_needs_two_cvs(self):
        with self.assertRaises(CommandError) as context:
            self.call("pmf", self.weights, "--cv", "phi", "--marginalize", "phi")
        self.assertEqual(context.exception.returncode, 1)

    def test_unknown_cv(self):
        with self.assertRaises(CommandError) as context:
            self.call("pmf", self.weights, "--cv", "psi")
        self.assertEqual(context.exception.returncode, 1)

    def test_missing_weights(self):
        with self.assertRaises(CommandError) as context:
            self.call("pmf", self.path("nowhere.tsv"), "--cv", "phi")
        self.assertEqual(context.exception.returncode, 1)


class JointPmfCommandTestCase(CommandTestMixin, SimpleTestCase):
    """
    Joint and marginal PMFs of a plain MD run on the double-channel surface.
    """

    def setUp(self):
        super().setUp()
        config = self.write_config(surface={"name": "double-channel"}, dynamics=DYNAMICS)
        self.call("run", "--config", config, "--out", self.path("run"))
        self.call("wham", self.path("run", "manifest.yml"))
        self.weights = self.path("run", "weights.tsv")

    def test_marginal_with_oracle(self):
        output = self.call(
            "pmf", self.weights, "--cv", "x", "y", "--bins", "10", "20", "--marginalize", "y", "--oracle"
        )
        names = ["pmf-x-y.tsv", "pmf-x-y-oracle.tsv", "pmf-x-marginal.tsv", "pmf-x-marginal-oracle.tsv"]
        self.assertEqual(output.splitlines(), [self.path("run", name) for name in names])
        joint = formats.read_pmf(self.path("run", "pmf-x-y.tsv"))
        self.assertEqual(joint.grid.shape, (10, 20))
        marginal = formats.read_pmf(self.path("run", "pmf-x-marginal.tsv"))
        self.assertEqual(marginal.grid.names, ("x",))
        self.assertEqual(marginal.metadata["marginalized"], "y")
        self.assertEqual(formats.read_pmf(self.path("run", "pmf-x-marginal-oracle.tsv")).grid, marginal.grid)

    def test_range(self):
        self.call("pmf", self.weights, "--cv", "x", "--bins", "8", "--range", "-2", "2")
        result = formats.read_pmf(self.path("run", "pmf-x.tsv"))
        self.assertEqual((result.grid.axes[0].lower, result.grid.axes[0].upper), (-2.0, 2.0))
