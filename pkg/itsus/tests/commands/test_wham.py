import os

import numpy as np
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from itsus import formats
from itsus.tests.commands import CommandTestMixin
from itsus.tests.factories import WindowsDataFactory

DYNAMICS = {"temperature": 300, "n_steps": 2000, "record_stride": 10}


class WhamCommandTestCase(CommandTestMixin, SimpleTestCase):
    """
    The `wham` management command on a short umbrella campaign.
    """

    def setUp(self):
        super().setUp()
        config = self.write_config(
            method="us", dynamics=DYNAMICS, windows=WindowsDataFactory(count=12, force_constant=10)
        )
        self.call("run", "--config", config, "--out", self.path("run"))
        self.manifest = self.path("run", "manifest.yml")

    def test_outputs(self):
        output = self.call("wham", self.manifest, "--tolerance", "1e-4")
        self.assertIn("WHAM converged", output)
        metadata, window_ids, f = formats.read_free_energies(self.path("run", "f.tsv"))
        self.assertEqual(list(window_ids), list(range(12)))
        self.assertEqual(f[0], 0.0)
        self.assertEqual(metadata["method"], "us")
        self.assertTrue(metadata["converged"])
        _, samples = formats.read_weights(self.path("run", "weights.tsv"))
        self.assertEqual(len(samples.weights), 12 * 200)
        self.assertAlmostEqual(samples.weights.sum(), 1.0)
        report = formats.read_yaml(self.path("run", "wham.yml"))
        self.assertEqual(report["samples"], 12 * 200)
        self.assertTrue(np.allclose(np.sum(report["overlap"], axis=1), 1.0))

    def test_skip_and_output_directory(self):
        """
        --skip drops the first records of every trajectory and --out moves the files.
        """
        self.call("wham", self.manifest, "--skip", "1000", "--tolerance", "1e-4", "--out", self.path("wham"))
        self.assertEqual(formats.read_yaml(self.path("wham", "wham.yml"))["samples"], 12 * 100)
        self.assertFalse(os.path.exists(self.path("run", "f.tsv")))

    def test_not_converged(self):
        """
        The files are written and the command exits with code 2.
        """
        with self.assertRaises(CommandError) as context:
            self.call("wham", self.manifest, "--tolerance", "1e-12", "--max-iterations", "1")
        self.assertEqual(context.exception.returncode, 2)
        self.assertFalse(formats.read_yaml(self.path("run", "wham.yml"))["converged"])
        self.assertTrue(os.path.exists(self.path("run", "weights.tsv")))

    def test_missing_manifest(self):
        with self.assertRaises(CommandError) as context:
            self.call("wham", self.path("nowhere", "manifest.yml"))
        self.assertEqual(context.exception.returncode, 1)
