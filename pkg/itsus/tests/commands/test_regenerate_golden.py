import os
import shutil

from django.core.management.base import CommandError
from django.test import SimpleTestCase

from itsus import formats
from itsus.fixtures import GOLDEN_DIR
from itsus.tests.commands import CommandTestMixin


class RegenerateGoldenCommandTestCase(CommandTestMixin, SimpleTestCase):
    """
    The `regenerate_golden` management command on a copy of a few golden files.
    """

    def setUp(self):
        super().setUp()
        for name in ("bias-energy-wrapped", "density-ratio", "harmonic-partition"):
            shutil.copy(os.path.join(GOLDEN_DIR, f"{name}.yml"), self.directory.name)

    def pin(self, name, value):
        path = self.path(f"{name}.yml")
        data = formats.read_yaml(path)
        data["pinned"][0]["value"] = value
        formats.write_yaml(path, data)
        return path

    def test_no_drift(self):
        report = self.path("report", "golden.yml")
        output = self.call("regenerate_golden", "--directory", self.directory.name, "--report", report)
        lines = output.splitlines()
        self.assertEqual(len(lines), 3)
        self.assertTrue(all(line.startswith("ok\t") for line in lines))
        self.assertIn("ok\tdensity-ratio.delta_a\t", output)
        self.assertTrue(formats.read_yaml(report)["ok"])

    def test_drift(self):
        self.pin("density-ratio", 1.3723)
        with self.assertRaises(CommandError) as context:
            self.call("regenerate_golden", "--directory", self.directory.name)
        self.assertEqual(context.exception.returncode, 5)
        self.assertIn("density-ratio.delta_a", str(context.exception))

    def test_write(self):
        """
        --write re-pins the drifted value and exits successfully.
        """
        path = self.pin("density-ratio", 1.3723)
        output = self.call("regenerate_golden", "--directory", self.directory.name, "--write")
        self.assertIn("DRIFT\tdensity-ratio.delta_a\t1.3723\t", output)
        self.assertAlmostEqual(formats.read_yaml(path)["pinned"][0]["value"], 1.3727, places=4)
        self.call("regenerate_golden", "--directory", self.directory.name)

    def test_corrupted_file(self):
        with open(self.path("broken.yml"), "w", encoding="utf-8") as handle:
            handle.write("name: broken\npinned: [\n")
        with self.assertLogs("itsus.fixtures", "ERROR"):
            with self.assertRaises(CommandError) as context:
                self.call("regenerate_golden", "--directory", self.directory.name)
        self.assertEqual(context.exception.returncode, 5)
