import math
import os
import tempfile

import yaml
from django.test import SimpleTestCase

from itsus.config import (METHODS, AnalysisConfig, ItsConfig, RunConfig, WindowAxisConfig, list_presets,
                          load_config, load_preset)
from itsus.exceptions import ConfigError, InvalidParameter
from itsus.potentials import SurfaceSpec, make_surface
from itsus.tests.factories import (ItsDataFactory, RunConfigDataFactory, SurfaceDataFactory,
                                   WindowsDataFactory)


class RunConfigTestCase(SimpleTestCase):
    """
    Parsing and validation of run configurations.
    """

    def test_plain_md(self):
        config = RunConfig.from_config(RunConfigDataFactory())
        self.assertEqual(config.method, "md")
        self.assertEqual(config.dynamics.seed, 7)
        self.assertEqual(config.dynamics.n_steps, 200)
        self.assertIsNone(config.window_schedule())
        self.assertFalse(config.uses_its)
        self.assertEqual(config.analysis_cvs(), ("phi",))

    def test_unknown_top_level_key(self):
        with self.assertRaises(ConfigError) as context:
            RunConfig.from_config(RunConfigDataFactory(temperature=300))
        self.assertEqual(context.exception.field, "config.temperature")

    def test_unknown_nested_key(self):
        """
        Errors name the dotted path of the entry.
        """
        data = RunConfigDataFactory(method="us", windows=WindowsDataFactory(width=3))
        with self.assertRaises(ConfigError) as context:
            RunConfig.from_config(data)
        self.assertEqual(context.exception.field, "windows.width")

    def test_unknown_method(self):
        with self.assertRaises(ConfigError) as context:
            RunConfig.from_config(RunConfigDataFactory(method="remd"))
        self.assertEqual(context.exception.field, "method")
        self.assertEqual(METHODS, ("md", "its", "us", "its-us"))

    def test_sections_required_by_the_method(self):
        with self.assertRaises(ConfigError) as context:
            RunConfig.from_config(RunConfigDataFactory(method="its-us", its=ItsDataFactory()))
        self.assertEqual(context.exception.field, "windows")

    def test_sections_unused_by_the_method(self):
        with self.assertRaises(ConfigError) as context:
            RunConfig.from_config(RunConfigDataFactory(its=ItsDataFactory()))
        self.assertEqual(context.exception.field, "its")

    def test_invalid_surface_parameter(self):
        data = RunConfigDataFactory(surface=SurfaceDataFactory(params={"v4": 1.0}))
        with self.assertRaises(InvalidParameter):
            RunConfig.from_config(data)

    def test_umbrella_windows_in_degrees(self):
        """
        Degrees are converted; force constants stay per radian squared.
        """
        config = RunConfig.from_config(RunConfigDataFactory(method="us", windows=WindowsDataFactory()))
        schedule = config.window_schedule()
        self.assertEqual(len(schedule), 4)
        self.assertAlmostEqual(schedule.windows[0].center, -math.pi / 2)
        self.assertAlmostEqual(schedule.windows[-1].center, math.pi)
        self.assertEqual(schedule.windows[0].force_constant, 45.0)

    def test_sin2_force_constants(self):
        windows = WindowsDataFactory(
            range=None, count=None, centers=[0, 90, 180], force_constant=[70, 160],
            force_constant_profile="sin2",
        )
        config = RunConfig.from_config(RunConfigDataFactory(method="us", windows=windows))
        constants = [window.force_constant for window in config.window_schedule()]
        self.assertAlmostEqual(constants[0], 70.0)
        self.assertAlmostEqual(constants[1], 160.0)
        self.assertAlmostEqual(constants[2], 70.0)
        primary = config.windows.primary
        self.assertEqual(primary.force_constants, (70.0, 160.0))
        self.assertEqual(primary.force_constant_profile, "sin2")

    def test_profile_over_a_range(self):
        axis = WindowAxisConfig(
            cv="phi", value_range=(-math.pi, math.pi), count=4, force_constants=(10.0, 30.0),
            force_constant_profile="sin2",
        )
        schedule = axis.schedule(make_surface(SurfaceSpec("torsion-1d")))
        expected = [10.0 + 20.0 * math.sin(window.center) ** 2 for window in schedule]
        for window, constant in zip(schedule, expected):
            self.assertAlmostEqual(window.force_constant, constant)
        self.assertTrue(all(isinstance(k, float) for k in axis.force_constants))

    def test_unsupported_profile(self):
        windows = WindowsDataFactory(force_constant=[70, 160], force_constant_profile="linear")
        with self.assertRaises(ConfigError) as context:
            RunConfig.from_config(RunConfigDataFactory(method="us", windows=windows))
        self.assertEqual(context.exception.field, "windows.force_constant_profile")

    def test_windows_need_centers_or_range(self):
        with self.assertRaises(ConfigError):
            RunConfig.from_config(RunConfigDataFactory(method="us", windows={"cv": "phi", "force_constant": 1}))

    def test_window_cv_must_exist(self):
        with self.assertRaises(ConfigError):
            RunConfig.from_config(RunConfigDataFactory(method="us", windows=WindowsDataFactory(cv="psi")))

    def test_start_dimension(self):
        data = RunConfigDataFactory(method="us", windows=WindowsDataFactory(start=[0, 0]))
        with self.assertRaises(ConfigError) as context:
            RunConfig.from_config(data)
        self.assertEqual(context.exception.field, "windows.start")

    def test_two_dimensional_windows(self):
        data = RunConfigDataFactory(
            method="us",
            surface=SurfaceDataFactory(name="double-channel"),
            windows={
                "cv": "x", "range": [-1, 1], "count": 3, "force_constant": 60,
                "second": {"cv": "y", "range": [-2, 2], "count": 2, "force_constant": 20},
            },
        )
        config = RunConfig.from_config(data)
        self.assertEqual(len(config.window_schedule()), 6)
        self.assertEqual(config.analysis_cvs(), ("x", "y"))

    def test_analysis_cv_must_exist(self):
        with self.assertRaises(ConfigError) as context:
            RunConfig.from_config(RunConfigDataFactory(analysis={"cvs": ["psi"]}))
        self.assertEqual(context.exception.field, "analysis.cvs")

    def test_overrides(self):
        config = RunConfig.from_config(RunConfigDataFactory()).with_overrides(seed=11, output="/tmp/out", replicas=4)
        self.assertEqual(config.seed, 11)
        self.assertEqual(config.dynamics.seed, 11)
        self.assertEqual(config.dynamics.replicas, 4)
        self.assertEqual(config.output, "/tmp/out")
        data = config.to_config()
        self.assertEqual(data["seed"], 11)
        self.assertEqual(data["dynamics"]["replicas"], 4)
        self.assertEqual(data["output"], "/tmp/out")


class ItsConfigTestCase(SimpleTestCase):
    def test_ladder(self):
        config = ItsConfig.from_config(ItsDataFactory())
        self.assertEqual(len(config.temperatures), 4)
        self.assertAlmostEqual(config.temperatures[0], 273.0)
        self.assertAlmostEqual(config.temperatures[-1], 450.0)
        self.assertEqual(config.calibration.rounds, 2)
        self.assertEqual(config.calibration.mixing, 0.5)

    def test_explicit_temperatures(self):
        config = ItsConfig.from_config({"temperatures": [300, 350]})
        self.assertEqual(config.temperatures, (300.0, 350.0))

    def test_ladder_or_temperatures_required(self):
        with self.assertRaises(ConfigError) as context:
            ItsConfig.from_config({"per_window": True})
        self.assertEqual(context.exception.field, "its.ladder")

    def test_missing_ladder_bound(self):
        with self.assertRaises(ConfigError) as context:
            ItsConfig.from_config({"ladder": {"min": 273, "count": 4}})
        self.assertEqual(context.exception.field, "its.ladder.max")

    def test_invalid_mixing(self):
        with self.assertRaises(ConfigError) as context:
            ItsConfig.from_config(ItsDataFactory(calibration={"mixing": 1.5}))
        self.assertEqual(context.exception.field, "its.calibration.mixing")

    def test_schedule_relative_to_the_file(self):
        config = ItsConfig.from_config(ItsDataFactory(schedule="schedule.tsv"), base_dir="/data/runs")
        self.assertEqual(config.schedule, os.path.join("/data/runs", "schedule.tsv"))


class AnalysisConfigTestCase(SimpleTestCase):
    def test_defaults(self):
        config = AnalysisConfig.from_config(None)
        self.assertEqual(config.cvs, ())
        self.assertEqual(config.stride, 1)
        self.assertEqual(config.resamples, AnalysisConfig.DEFAULT_RESAMPLES)

    def test_angles_in_degrees(self):
        config = AnalysisConfig.from_config({"cvs": "omega", "region": [-135, -45], "degrees": True})
        self.assertEqual(config.cvs, ("omega",))
        self.assertAlmostEqual(config.region[0], -0.75 * math.pi)
        self.assertAlmostEqual(config.region[1], -0.25 * math.pi)

    def test_at_most_two_cvs(self):
        with self.assertRaises(ConfigError):
            AnalysisConfig.from_config({"cvs": ["x", "y", "z"]})

    def test_invalid_number(self):
        with self.assertRaises(ConfigError) as context:
            AnalysisConfig.from_config({"skip": "soon"})
        self.assertEqual(context.exception.field, "analysis.skip")

    def test_invalid_bins(self):
        for bins in ("many", [36, "x"], 0, [None]):
            with self.subTest(bins=bins):
                with self.assertRaises(ConfigError) as context:
                    AnalysisConfig.from_config({"bins": bins})
                self.assertEqual(context.exception.field, "analysis.bins")

    def test_invalid_ranges(self):
        """
        Every range is null or a [min, max] pair of numbers.
        """
        for ranges, field in (
            ([["a", 1.0]], "analysis.ranges.0"),
            ([None, [1.0]], "analysis.ranges.1"),
            ([None, 5.0], "analysis.ranges.1"),
            (3.0, "analysis.ranges"),
        ):
            with self.subTest(ranges=ranges):
                with self.assertRaises(ConfigError) as context:
                    AnalysisConfig.from_config({"ranges": ranges})
                self.assertEqual(context.exception.field, field)

    def test_ranges_in_degrees(self):
        config = AnalysisConfig.from_config({"bins": [36, 18], "ranges": [None, [-90, 90]], "degrees": True})
        self.assertEqual(config.bins, (36, 18))
        self.assertIsNone(config.ranges[0])
        self.assertAlmostEqual(config.ranges[1][1], 0.5 * math.pi)


class ConfigFileTestCase(SimpleTestCase):
    """
    Configuration files and the built-in presets.
    """

    def test_every_preset_loads(self):
        names = list_presets()
        self.assertIn("butane-its-us", names)
        self.assertEqual(len(names), 11)
        for name in names:
            with self.subTest(preset=name):
                config = load_preset(name)
                self.assertEqual(config.name, name)
                self.assertTrue(config.description)

    def test_amide_force_constant_profile(self):
        """
        The amide windows are stiffest in the transition region.
        """
        schedule = load_preset("amide-us").window_schedule()
        self.assertEqual(len(schedule), 54)
        by_center = {round(math.degrees(w.center)): w.force_constant for w in schedule}
        self.assertAlmostEqual(by_center[180], 70.0)
        self.assertAlmostEqual(by_center[-90], 160.0)

    def test_amide_presets_share_the_ladder(self):
        """
        ITS alone on the amide surface runs without windows on the ITS-US ladder.
        """
        its = load_preset("amide-its")
        its_us = load_preset("amide-its-us")
        self.assertEqual(its.method, "its")
        self.assertEqual(its.surface, its_us.surface)
        self.assertEqual(its.its.temperatures, its_us.its.temperatures)
        self.assertIsNone(its.window_schedule())
        self.assertEqual(its.analysis.hidden_cv, "eta")

    def test_unknown_preset(self):
        with self.assertRaises(ConfigError) as context:
            load_preset("propane")
        self.assertEqual(context.exception.field, "preset")

    def test_load_file(self):
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "run.yml")
            with open(path, "w", encoding="utf-8") as handle:
                yaml.safe_dump(RunConfigDataFactory(method="its", its=ItsDataFactory(schedule="s.tsv")), handle)
            config = load_config(path)
        self.assertEqual(config.method, "its")
        self.assertEqual(config.its.schedule, os.path.join(directory, "s.tsv"))

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            load_config("/nonexistent/run.yml")

    def test_invalid_yaml(self):
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "run.yml")
            with open(path, "w", encoding="utf-8") as handle:
                handle.write("method: [md\n")
            with self.assertRaises(ConfigError):
                load_config(path)
