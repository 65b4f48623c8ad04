import os
import tempfile

import numpy as np
from django.test import SimpleTestCase

from itsus import formats
from itsus.analysis import GridAxis, HistogramGrid, Pmf, WeightedSamples
from itsus.exceptions import ConfigError
from itsus.integrator import PlainForce, run_trajectory
from itsus.potentials import SurfaceSpec, make_surface
from itsus.tests.factories import DynamicsConfigFactory, ItsScheduleFactory
from itsus.utils import beta


class FormatsTestCase(SimpleTestCase):
    """
    Delimited and YAML files.
    """

    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.addCleanup(self.directory.cleanup)

    def path(self, name):
        return os.path.join(self.directory.name, name)

    def test_plain(self):
        """
        numpy values become YAML friendly Python values.
        """
        value = formats.plain({"a": np.float64(1.5), 2: (np.int64(3), np.array([1.0, 2.0]))})
        self.assertEqual(value, {"a": 1.5, "2": [3, [1.0, 2.0]]})
        self.assertIs(type(value["a"]), float)

    def test_table_header(self):
        """
        Metadata lines come first, then the tab separated column header.
        """
        path = self.path("table.tsv")
        formats.write_table(path, {"name": "demo", "values": [1, 2]}, ["a", "b"], [[1.0, 2.0], [3.0, 0.1]])
        with open(path, encoding="utf-8") as handle:
            lines = handle.read().splitlines()
        self.assertEqual(lines[0], "# name: demo")
        self.assertEqual(lines[1], "# values: [1, 2]")
        self.assertEqual(lines[2], "a\tb")
        metadata, columns, rows = formats.read_table(path)
        self.assertEqual(metadata, {"name": "demo", "values": [1, 2]})
        self.assertEqual(columns, ["a", "b"])
        self.assertEqual(rows[1, 1], 0.1)

    def test_empty_table(self):
        path = self.path("nested/empty.tsv")
        formats.write_table(path, {}, ["a"], np.zeros((0, 1)))
        _, _, rows = formats.read_table(path)
        self.assertEqual(rows.shape, (0, 1))

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            formats.read_table(self.path("missing.tsv"))

    def test_missing_header(self):
        path = self.path("bad.tsv")
        with open(path, "w", encoding="utf-8") as handle:
            handle.write("# only: metadata\n")
        with self.assertRaises(ConfigError):
            formats.read_table(path)

    def test_trajectory_file(self):
        """
        Trajectories keep their columns, window id and exact values.
        """
        surface = make_surface(SurfaceSpec("double-channel"))
        trajectory = run_trajectory(
            surface, PlainForce(surface), surface.collective_variables(),
            DynamicsConfigFactory(n_steps=20, record_stride=5, replicas=2), window_id=3,
        )
        path = self.path("window-0003.tsv")
        formats.write_trajectory(path, trajectory, {"window": {"id": 3}})
        metadata, columns, _ = formats.read_table(path)
        self.assertEqual(
            columns, ["time", "replica", "coord:x", "coord:y", "U", "cv:x", "cv:y", "window_id"]
        )
        self.assertEqual(metadata["window"], {"id": 3})
        loaded = formats.read_trajectory(path)
        self.assertEqual(loaded.window_id, 3)
        self.assertEqual(loaded.cv_names, ("x", "y"))
        np.testing.assert_array_equal(loaded.coords, trajectory.coords)
        np.testing.assert_array_equal(loaded.replica, trajectory.replica)

    def test_not_a_trajectory(self):
        path = self.path("table.tsv")
        formats.write_table(path, {}, ["a", "b"], [[1.0, 2.0]])
        with self.assertRaises(ConfigError):
            formats.read_trajectory(path)

    def test_schedule_file(self):
        schedule = ItsScheduleFactory(log_n=(0.0, -0.1, -0.25, -0.6))
        path = self.path("schedule.tsv")
        formats.write_schedule(path, schedule)
        loaded = formats.read_schedule(path)
        self.assertEqual(loaded.log_n, schedule.log_n)
        np.testing.assert_allclose(loaded.temperatures, schedule.temperatures)
        self.assertAlmostEqual(loaded.beta0, beta(300.0))

    def test_schedule_needs_production_temperature(self):
        path = self.path("schedule.tsv")
        formats.write_table(path, {}, ["temperature", "beta", "log_n"], [[300.0, 1.0, 0.0]])
        with self.assertRaises(ConfigError):
            formats.read_schedule(path)

    def test_pmf_file(self):
        """
        Empty bins are written as nan and the grid travels in the header.
        """
        grid = HistogramGrid((GridAxis("x", 0.0, 2.0, 2), GridAxis("y", -1.0, 1.0, 2)))
        result = Pmf(
            grid=grid,
            values=np.array([[0.0, 1.0], [np.nan, 2.0]]),
            errors=np.array([[0.1, 0.2], [np.nan, 0.3]]),
            counts=np.array([[4, 2], [0, 1]]),
            beta0=beta(300.0),
            metadata={"cvs": ["x", "y"]},
        )
        path = self.path("pmf-x-y.tsv")
        formats.write_pmf(path, result)
        with open(path, encoding="utf-8") as handle:
            self.assertIn("nan", handle.read())
        loaded = formats.read_pmf(path)
        self.assertEqual(loaded.grid, grid)
        self.assertTrue(np.isnan(loaded.values[1, 0]))
        self.assertEqual(loaded.values[1, 1], 2.0)
        self.assertEqual(loaded.metadata, {"cvs": ["x", "y"]})
        self.assertAlmostEqual(loaded.temperature, 300.0)

    def test_weights_file(self):
        """
        Log weights are read back as normalized weights.
        """
        samples = WeightedSamples(
            cvs={"phi": np.array([0.1, 0.2, 0.3])},
            weights=np.zeros(3),
            energy=np.array([1.0, 2.0, 3.0]),
            window_id=np.array([0, 0, 1]),
            replica=np.zeros(3, dtype=int),
            time=np.array([10.0, 20.0, 10.0]),
        )
        path = self.path("weights.tsv")
        formats.write_weights(path, samples, np.log([0.5, 0.25, 0.25]), {"temperature": 300.0})
        metadata, loaded = formats.read_weights(path)
        self.assertEqual(metadata["temperature"], 300.0)
        np.testing.assert_allclose(loaded.weights, [0.5, 0.25, 0.25])
        np.testing.assert_array_equal(loaded.window_id, [0, 0, 1])
        np.testing.assert_array_equal(loaded.cv("phi"), [0.1, 0.2, 0.3])

    def test_free_energies_file(self):
        path = self.path("f.tsv")
        formats.write_free_energies(path, [0, 1, 2], [0.0, 1.5, 2.5])
        metadata, ids, f = formats.read_free_energies(path)
        self.assertEqual(metadata["gauge"], "f_first=0")
        np.testing.assert_array_equal(ids, [0, 1, 2])
        np.testing.assert_array_equal(f, [0.0, 1.5, 2.5])

    def test_yaml(self):
        path = self.path("report.yml")
        formats.write_yaml(path, {"rmsd": np.float64(0.25), "bins": np.arange(2)})
        self.assertEqual(formats.read_yaml(path), {"rmsd": 0.25, "bins": [0, 1]})

    def test_invalid_yaml(self):
        path = self.path("broken.yml")
        with open(path, "w", encoding="utf-8") as handle:
            handle.write("a: [1, 2\n")
        with self.assertRaises(ConfigError):
            formats.read_yaml(path)
