"""
Leap-frog Langevin (stochastic dynamics) integrator.

The integrator propagates a batch of independent walkers (replicas) of shape
(n_replicas, dim) with any force provider, a callable mapping coordinates to the pair
(effective energy, effective force).

Units: time in fs, energy in kcal/mol, mass in amu, coordinates in Å or radians.
"""
import functools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .exceptions import ConfigError, SimulationDiverged
from .potentials import CollectiveVariable, PotentialSurface
from .utils import ACCELERATION_UNIT, BOLTZMANN, beta, random_generator, wrap_periodic

logger = logging.getLogger(__name__)

ForceProvider = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]


class PlainForce:
    """
    The unbiased force provider: (U, -∇U).
    """

    def __init__(self, surface: PotentialSurface):
        self.surface = surface

    def __call__(self, coords):
        energy, gradient = self.surface.energy_and_gradient(coords)
        return energy, -gradient


@dataclass(frozen=True)
class DynamicsConfig:
    """
    Parameters of a Langevin trajectory.
    """

    DEFAULT_DT = 1.0
    DEFAULT_TEMPERATURE = 300.0
    # 1/fs, not given by the method; chosen for fast thermalization on the toy surfaces
    DEFAULT_FRICTION = 0.01
    DEFAULT_MASS = 1.0
    DEFAULT_N_STEPS = 10000
    DEFAULT_RECORD_STRIDE = 10

    dt: float = DEFAULT_DT
    temperature: float = DEFAULT_TEMPERATURE
    friction: float = DEFAULT_FRICTION
    mass: Tuple[float, ...] = (DEFAULT_MASS,)
    seed: int = 0
    n_steps: int = DEFAULT_N_STEPS
    record_stride: int = DEFAULT_RECORD_STRIDE
    replicas: int = 1
    equilibration: int = 0

    def __post_init__(self):
        if isinstance(self.mass, (int, float)):
            object.__setattr__(self, "mass", (float(self.mass),))
        checks = (
            ("dt", self.dt > 0, "must be positive"),
            ("temperature", self.temperature > 0, "must be positive"),
            ("friction", self.friction >= 0, "must not be negative"),
            ("mass", all(m > 0 for m in self.mass), "must be positive"),
            ("n_steps", self.n_steps >= 1, "must be at least 1"),
            ("record_stride", self.record_stride >= 1, "must be at least 1"),
            ("replicas", self.replicas >= 1, "must be at least 1"),
            ("equilibration", self.equilibration >= 0, "must not be negative"),
        )
        for key, valid, message in checks:
            if not valid:
                raise ConfigError(f"dynamics.{key}", message)

    @property
    def beta(self) -> float:
        return beta(self.temperature)

    @property
    def kT(self) -> float:
        return BOLTZMANN * self.temperature

    def masses(self, dim: int) -> np.ndarray:
        if len(self.mass) == 1:
            return np.full(dim, self.mass[0])
        if len(self.mass) != dim:
            raise ConfigError("dynamics.mass", f"expected 1 or {dim} values, got {len(self.mass)}")
        return np.array(self.mass, dtype=float)

    @classmethod
    def from_config(cls, data, seed=0, path="dynamics") -> "DynamicsConfig":
        """
        Parse the `dynamics` section of a run configuration.
        """
        data = dict(data or {})
        known = {
            "dt": float,
            "temperature": float,
            "friction": float,
            "mass": None,
            "n_steps": int,
            "record_stride": int,
            "replicas": int,
            "equilibration": int,
        }
        for key in data:
            if key not in known:
                raise ConfigError(f"{path}.{key}", "unknown key")
        values = {}
        for key, value in data.items():
            try:
                if key == "mass":
                    values[key] = (
                        tuple(float(m) for m in value)
                        if isinstance(value, (list, tuple))
                        else (float(value),)
                    )
                else:
                    values[key] = known[key](value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{path}.{key}", f"invalid value {value!r}") from exc
        return cls(seed=int(seed), **values)


@dataclass
class SimState:
    """
    Coordinates and half step velocities of a batch of walkers plus the rng stream
    that drives their noise. The generator is advanced in place by every step.
    """

    coords: np.ndarray
    velocities: np.ndarray
    time: float
    rng: np.random.Generator
    periods: np.ndarray = field(repr=False)
    step: int = 0


class TrajectoryRecord(NamedTuple):
    """
    One recorded sample.
    """

    time: float
    replica: int
    coords: np.ndarray
    energy: float
    cvs: Tuple[float, ...]
    window_id: int


@dataclass
class Trajectory:
    """
    The samples recorded by one window, every replica included, as column arrays.

    `energy` holds the original potential U(R), never the biased or tempered one.
    """

    window_id: int
    coord_names: Tuple[str, ...]
    cv_names: Tuple[str, ...]
    time: np.ndarray
    replica: np.ndarray
    coords: np.ndarray
    energy: np.ndarray
    cvs: np.ndarray

    def __len__(self):
        return len(self.time)

    def records(self) -> Iterator[TrajectoryRecord]:
        for index in range(len(self)):
            yield TrajectoryRecord(
                time=float(self.time[index]),
                replica=int(self.replica[index]),
                coords=self.coords[index],
                energy=float(self.energy[index]),
                cvs=tuple(float(v) for v in self.cvs[index]),
                window_id=self.window_id,
            )

    def cv(self, name: str) -> np.ndarray:
        return self.cvs[:, self.cv_names.index(name)]

    def select(self, mask) -> "Trajectory":
        return Trajectory(
            window_id=self.window_id,
            coord_names=self.coord_names,
            cv_names=self.cv_names,
            time=self.time[mask],
            replica=self.replica[mask],
            coords=self.coords[mask],
            energy=self.energy[mask],
            cvs=self.cvs[mask],
        )

    def segment(self, skip=0.0, max_time=None, stride=1) -> "Trajectory":
        """
        Samples recorded after `skip` fs and up to `max_time` fs, keeping every `stride`-th
        record of each replica.
        """
        mask = self.time > skip
        if max_time is not None:
            mask &= self.time <= max_time
        if stride > 1:
            order = np.zeros(len(self), dtype=int)
            for replica in np.unique(self.replica):
                rows = np.flatnonzero(self.replica == replica)
                order[rows] = np.arange(len(rows))
            mask &= order % stride == 0
        return self.select(mask)


@functools.lru_cache(maxsize=64)
def _coefficients(cfg: DynamicsConfig, dim: int):
    masses = cfg.masses(dim)
    alpha = -math.expm1(-cfg.friction * cfg.dt)
    kick = cfg.dt * ACCELERATION_UNIT / masses
    noise = np.sqrt(ACCELERATION_UNIT * cfg.kT / masses * alpha * (2.0 - alpha))
    return kick, alpha, noise


def initial_state(
    surface: PotentialSurface,
    cfg: DynamicsConfig,
    coords=None,
    stream: Sequence[int] = (0,),
) -> SimState:
    """
    Walkers at `coords` (the surface reference point by default) with velocities drawn from
    the Maxwell-Boltzmann distribution at the bath temperature.
    """
    if coords is None:
        coords = surface.reference_coords
    coords = np.array(coords, dtype=float)
    coords = np.broadcast_to(coords, (cfg.replicas, surface.dim)).copy()
    rng = random_generator(cfg.seed, *stream)
    sigma = np.sqrt(ACCELERATION_UNIT * cfg.kT / cfg.masses(surface.dim))
    velocities = rng.standard_normal(coords.shape) * sigma
    periods = np.array([np.nan if p is None else p for p in surface.periods])
    return SimState(coords=coords, velocities=velocities, time=0.0, rng=rng, periods=periods)


def langevin_step(state: SimState, force: ForceProvider, cfg: DynamicsConfig) -> SimState:
    """
    One leap-frog stochastic dynamics step:

        v' = v(t - dt/2) + dt·F(x)/m
        Δv = -α v' + sqrt(kT/m · (1 - e^(-2γdt)))·ξ,      α = 1 - e^(-γdt)
        x(t + dt) = x + (v' + Δv/2)·dt,    v(t + dt/2) = v' + Δv

    Periodic coordinates are wrapped after the drift.
    """
    kick, alpha, noise = _coefficients(cfg, state.coords.shape[-1])
    _, f = force(state.coords)
    if not np.all(np.isfinite(f)):
        raise SimulationDiverged(state.coords.copy(), step=state.step)
    velocities = state.velocities + kick * f
    dv = noise * state.rng.standard_normal(velocities.shape) - alpha * velocities
    coords = state.coords + (velocities + 0.5 * dv) * cfg.dt
    periodic = ~np.isnan(state.periods)
    if periodic.any():
        coords[..., periodic] = wrap_periodic(coords[..., periodic], state.periods[periodic])
    return SimState(
        coords=coords,
        velocities=velocities + dv,
        time=state.time + cfg.dt,
        rng=state.rng,
        periods=state.periods,
        step=state.step + 1,
    )


def run_trajectory(
    surface: PotentialSurface,
    force: ForceProvider,
    cvs: Sequence[CollectiveVariable],
    cfg: DynamicsConfig,
    initial_coords=None,
    window_id: int = 0,
    state: Optional[SimState] = None,
) -> Trajectory:
    """
    Run `cfg.equilibration` unrecorded steps and then `cfg.n_steps` steps, recording every
    `cfg.record_stride` steps the coordinates, the original energy U(R) and all the
    collective variables of every replica.

    The rng stream is derived from (cfg.seed, window_id) unless a `state` is given.
    """
    if state is None:
        state = initial_state(surface, cfg, initial_coords, stream=(window_id,))
    logger.info(
        "Window %d: running %d steps (+%d equilibration) with %d replica(s)",
        window_id, cfg.n_steps, cfg.equilibration, cfg.replicas,
    )
    times, replicas, coords, energies, values = [], [], [], [], []
    replica_ids = np.arange(state.coords.shape[0])
    try:
        for _ in range(cfg.equilibration):
            state = langevin_step(state, force, cfg)
        start = state.step
        for step in range(1, cfg.n_steps + 1):
            state = langevin_step(state, force, cfg)
            if step % cfg.record_stride == 0:
                times.append(np.full(len(replica_ids), state.time - start * cfg.dt))
                replicas.append(replica_ids)
                coords.append(state.coords.copy())
                energies.append(surface.energy(state.coords))
                values.append(np.stack([cv.value(state.coords) for cv in cvs], axis=-1))
    except SimulationDiverged as exc:
        logger.error("Window %d diverged at step %d", window_id, exc.step)
        raise SimulationDiverged(exc.coords, window_id=window_id, step=exc.step) from exc

    n_cvs = len(cvs)
    trajectory = Trajectory(
        window_id=window_id,
        coord_names=tuple(surface.COORDINATES),
        cv_names=tuple(cv.name for cv in cvs),
        time=np.concatenate(times) if times else np.zeros(0),
        replica=np.concatenate(replicas) if replicas else np.zeros(0, dtype=int),
        coords=np.concatenate(coords) if coords else np.zeros((0, surface.dim)),
        energy=np.concatenate(energies) if energies else np.zeros(0),
        cvs=np.concatenate(values) if values else np.zeros((0, n_cvs)),
    )
    logger.info("Window %d: recorded %d samples", window_id, len(trajectory))
    return trajectory
