import numpy as np
from django.test import SimpleTestCase

from itsus.exceptions import ConfigError, SimulationDiverged
from itsus.integrator import DynamicsConfig, PlainForce, initial_state, langevin_step, run_trajectory
from itsus.potentials import SurfaceSpec, make_surface
from itsus.tests.factories import DynamicsConfigFactory
from itsus.utils import BOLTZMANN


class DynamicsConfigTestCase(SimpleTestCase):
    """
    Parsing of the dynamics section.
    """

    def test_defaults(self):
        """
        An empty section gives the documented defaults.
        """
        cfg = DynamicsConfig.from_config({}, seed=3)
        self.assertEqual(cfg.dt, DynamicsConfig.DEFAULT_DT)
        self.assertEqual(cfg.temperature, DynamicsConfig.DEFAULT_TEMPERATURE)
        self.assertEqual(cfg.seed, 3)

    def test_unknown_key(self):
        """
        Unknown keys are rejected naming the dotted path.
        """
        with self.assertRaises(ConfigError) as context:
            DynamicsConfig.from_config({"timestep": 1.0})
        self.assertEqual(context.exception.field, "dynamics.timestep")

    def test_non_positive_step(self):
        """
        The time step must be positive.
        """
        with self.assertRaises(ConfigError) as context:
            DynamicsConfig.from_config({"dt": 0})
        self.assertEqual(context.exception.field, "dynamics.dt")

    def test_per_coordinate_masses(self):
        """
        One mass per coordinate or a single shared one.
        """
        cfg = DynamicsConfig.from_config({"mass": [1.0, 2.0]})
        np.testing.assert_array_equal(cfg.masses(2), [1.0, 2.0])
        with self.assertRaises(ConfigError):
            cfg.masses(3)


class RunTrajectoryTestCase(SimpleTestCase):
    """
    The leap-frog Langevin integrator.
    """

    def setUp(self):
        self.surface = make_surface(SurfaceSpec("torsion-1d"))
        self.cvs = self.surface.collective_variables()

    def test_record_stride(self):
        """
        10 steps recorded every 5 steps give two records at 5 and 10 fs.
        """
        cfg = DynamicsConfigFactory(n_steps=10, record_stride=5)
        trajectory = run_trajectory(self.surface, PlainForce(self.surface), self.cvs, cfg)
        self.assertEqual(len(trajectory), 2)
        np.testing.assert_allclose(trajectory.time, [5.0, 10.0])

    def test_records_original_energy(self):
        """
        The recorded energy is U at the recorded coordinates.
        """
        cfg = DynamicsConfigFactory(n_steps=20)
        trajectory = run_trajectory(self.surface, PlainForce(self.surface), self.cvs, cfg)
        np.testing.assert_allclose(trajectory.energy, self.surface.energy(trajectory.coords))
        record = next(trajectory.records())
        self.assertEqual(record.window_id, 0)
        self.assertEqual(len(record.cvs), 1)

    def test_determinism(self):
        """
        The same seed and window give identical trajectories.
        """
        cfg = DynamicsConfigFactory(n_steps=50, seed=5)
        first = run_trajectory(self.surface, PlainForce(self.surface), self.cvs, cfg, window_id=3)
        second = run_trajectory(self.surface, PlainForce(self.surface), self.cvs, cfg, window_id=3)
        np.testing.assert_array_equal(first.coords, second.coords)

    def test_windows_use_distinct_streams(self):
        """
        Two window ids draw different noise from the same seed.
        """
        cfg = DynamicsConfigFactory(n_steps=50, seed=5)
        first = run_trajectory(self.surface, PlainForce(self.surface), self.cvs, cfg, window_id=0)
        second = run_trajectory(self.surface, PlainForce(self.surface), self.cvs, cfg, window_id=1)
        self.assertFalse(np.array_equal(first.coords, second.coords))

    def test_replicas(self):
        """
        Every record step stores one sample per replica, tagged with its index.
        """
        cfg = DynamicsConfigFactory(n_steps=10, record_stride=5, replicas=3)
        trajectory = run_trajectory(self.surface, PlainForce(self.surface), self.cvs, cfg)
        self.assertEqual(len(trajectory), 6)
        np.testing.assert_array_equal(trajectory.replica, [0, 1, 2, 0, 1, 2])

    def test_periodic_coordinates_are_wrapped(self):
        """
        Torsion coordinates stay inside (-π, π].
        """
        cfg = DynamicsConfigFactory(n_steps=500, temperature=2000.0)
        trajectory = run_trajectory(self.surface, PlainForce(self.surface), self.cvs, cfg)
        self.assertTrue(np.all(np.abs(trajectory.coords) <= np.pi))

    def test_divergence_names_the_window(self):
        """
        A non finite force raises SimulationDiverged with the window id.
        """

        def broken(coords):
            return np.zeros(coords.shape[:-1]), np.full(coords.shape, np.nan)

        cfg = DynamicsConfigFactory(n_steps=10)
        with self.assertRaises(SimulationDiverged) as context:
            run_trajectory(self.surface, broken, self.cvs, cfg, window_id=7)
        self.assertEqual(context.exception.window_id, 7)
        self.assertEqual(context.exception.exit_code, 2)

    def test_segment(self):
        """
        A segment keeps the records after `skip`, up to `max_time`, every `stride`.
        """
        cfg = DynamicsConfigFactory(n_steps=100, record_stride=10, replicas=2)
        trajectory = run_trajectory(self.surface, PlainForce(self.surface), self.cvs, cfg)
        segment = trajectory.segment(skip=20.0, max_time=80.0, stride=2)
        np.testing.assert_allclose(np.unique(segment.time), [30.0, 50.0, 70.0])
        self.assertEqual(len(segment), 6)

    def test_state_step(self):
        """
        A step advances time by dt and keeps the batch shape.
        """
        cfg = DynamicsConfigFactory(replicas=4)
        state = initial_state(self.surface, cfg)
        state = langevin_step(state, PlainForce(self.surface), cfg)
        self.assertEqual(state.coords.shape, (4, 1))
        self.assertEqual(state.time, cfg.dt)
        self.assertEqual(state.step, 1)


class EquipartitionTestCase(SimpleTestCase):
    """
    The thermostat samples the canonical distribution.
    """

    def test_harmonic_potential_energy(self):
        """
        ⟨½κx²⟩ = ½k_BT on a harmonic coordinate at 300 K.
        """
        surface = make_surface(SurfaceSpec("harmonic", {"kappa": 10.0}))
        cfg = DynamicsConfigFactory(
            n_steps=20000, record_stride=10, replicas=32, friction=0.05, equilibration=500
        )
        trajectory = run_trajectory(
            surface, PlainForce(surface), surface.collective_variables(), cfg
        )
        expected = 0.5 * BOLTZMANN * cfg.temperature
        self.assertAlmostEqual(trajectory.energy.mean() / expected, 1.0, delta=0.05)

    def test_torsion_visits_every_well(self):
        """
        Plain MD at 300 K started in the anti well crosses into both gauche wells.
        """
        surface = make_surface(SurfaceSpec("torsion-1d"))
        cfg = DynamicsConfigFactory(n_steps=50000, record_stride=20, replicas=32, friction=0.05, seed=21)
        phi = run_trajectory(surface, PlainForce(surface), surface.collective_variables(), cfg).cv("phi")
        wells = {
            "anti": np.abs(phi) > 2.6,
            "gauche+": (phi > 0.5) & (phi < 1.6),
            "gauche-": (phi < -0.5) & (phi > -1.6),
        }
        for name, visited in wells.items():
            with self.subTest(well=name):
                self.assertGreater(visited.sum(), 0)
