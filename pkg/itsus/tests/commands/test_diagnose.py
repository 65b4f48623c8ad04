from django.core.management.base import CommandError
from django.test import SimpleTestCase

from itsus import formats
from itsus.tests.commands import CommandTestMixin

DYNAMICS = {"temperature": 300, "n_steps": 2000, "record_stride": 10}
WINDOWS = {"cv": "x", "range": [-1.5, 1.5], "count": 3, "force_constant": 60, "start": [0.0, 1.0]}


class DiagnoseCommandTestCase(CommandTestMixin, SimpleTestCase):
    """
    The `diagnose` management command on umbrella windows along x of the double-channel surface.
    """

    def setUp(self):
        super().setUp()
        config = self.write_config(
            method="us", surface={"name": "double-channel"}, dynamics=DYNAMICS, windows=WINDOWS
        )
        self.call("run", "--config", config, "--out", self.path("run"))
        self.manifest = self.path("run", "manifest.yml")

    def test_energy_only(self):
        self.call("diagnose", self.manifest)
        report = formats.read_yaml(self.path("run", "diagnostics.yml"))
        self.assertEqual(sorted(report["energy"]), ["0", "1", "2"])
        self.assertEqual(report["energy"]["1"]["count"], 200)
        self.assertNotIn("occupancy", report)

    def test_hidden_basins(self):
        """
        The window on the hidden barrier cannot cross it in 2 ps.
        """
        report_path = self.path("diagnostics.yml")
        output = self.call("diagnose", self.manifest, "--hidden-cv", "y", "--report", report_path)
        self.assertIn("trapped window(s)", output)
        report = formats.read_yaml(report_path)
        self.assertIn(1, report["trapped"])
        self.assertNotIn(1, report["both_basins"])
        self.assertEqual([w["id"] for w in report["occupancy"]["windows"]], [0, 1, 2])

    def test_unknown_hidden_cv(self):
        with self.assertRaises(CommandError) as context:
            self.call("diagnose", self.manifest, "--hidden-cv", "z")
        self.assertEqual(context.exception.returncode, 1)
