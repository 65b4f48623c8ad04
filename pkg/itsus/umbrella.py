"""
Umbrella sampling: harmonic restraints on collective variables, window schedules and the
composition of the biased, optionally ITS tempered, potential.

    V_i(Ω) = ½ K_i (Ω - ω_i)²

On periodic collective variables the difference is the minimal image, wrapped into
(-period/2, period/2].
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .exceptions import ConfigError, EmptySchedule, MismatchedLengths
from .potentials import CollectiveVariable, PotentialSurface
from .tempering import ItsSchedule, effective_energy, force_scale
from .utils import wrap_periodic

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Restraint:
    """
    One harmonic term ½K(Ω - ω)² on a collective variable.
    """

    cv: CollectiveVariable
    center: float
    force_constant: float

    def __post_init__(self):
        if not self.force_constant > 0:
            raise ConfigError("windows.force_constant", "must be positive")
        object.__setattr__(self, "center", float(wrap_periodic(self.center, self.cv.period)))
        object.__setattr__(self, "force_constant", float(self.force_constant))

    def delta(self, value):
        return wrap_periodic(np.asarray(value, dtype=float) - self.center, self.cv.period)

    def energy(self, value):
        delta = self.delta(value)
        return 0.5 * self.force_constant * delta * delta

    def force(self, coords):
        """
        -K Δ dΩ/dR.
        """
        delta = self.delta(self.cv.value(coords))
        return -self.force_constant * np.asarray(delta)[..., np.newaxis] * self.cv.gradient(coords)


@dataclass(frozen=True)
class UmbrellaWindow:
    """
    A sampling window: the harmonic bias on `cv` centred at `center`, plus optional `extra`
    restraints on other collective variables for multidimensional umbrella sampling.
    """

    id: int
    cv: CollectiveVariable
    center: float
    force_constant: float
    extra: Tuple[Restraint, ...] = ()

    def __post_init__(self):
        primary = Restraint(self.cv, self.center, self.force_constant)
        object.__setattr__(self, "center", primary.center)
        object.__setattr__(self, "force_constant", primary.force_constant)
        object.__setattr__(self, "extra", tuple(self.extra))

    @property
    def restraints(self) -> Tuple[Restraint, ...]:
        return (Restraint(self.cv, self.center, self.force_constant),) + self.extra

    @property
    def cv_names(self) -> Tuple[str, ...]:
        return tuple(restraint.cv.name for restraint in self.restraints)

    def energy_from_values(self, values) -> np.ndarray:
        """
        Bias energy from a mapping of collective variable name to values.
        """
        return sum(restraint.energy(values[restraint.cv.name]) for restraint in self.restraints)

    def energy(self, coords):
        return sum(restraint.energy(restraint.cv.value(coords)) for restraint in self.restraints)

    def force(self, coords):
        return sum(restraint.force(coords) for restraint in self.restraints)

    def to_config(self) -> dict:
        return {
            "id": self.id,
            "restraints": [
                {"cv": r.cv.name, "center": r.center, "force_constant": r.force_constant}
                for r in self.restraints
            ],
        }

    @classmethod
    def from_config(cls, data, surface: PotentialSurface) -> "UmbrellaWindow":
        restraints = [
            Restraint(surface.cv(item["cv"]), item["center"], item["force_constant"])
            for item in data["restraints"]
        ]
        primary, extra = restraints[0], tuple(restraints[1:])
        return cls(
            id=int(data["id"]),
            cv=primary.cv,
            center=primary.center,
            force_constant=primary.force_constant,
            extra=extra,
        )


def bias_energy(w: UmbrellaWindow, cv_value) -> float:
    """
    ½K_i Δ² of the window's primary restraint, Δ the minimal image difference on periodic CVs.
    """
    return w.restraints[0].energy(cv_value)


def bias_force(w: UmbrellaWindow, coords) -> np.ndarray:
    """
    -K_i Δ ∂Ω/∂R summed over the window restraints.
    """
    return w.force(coords)


@dataclass(frozen=True)
class WindowSchedule:
    """
    The ordered windows of an umbrella campaign and their step budgets.
    """

    windows: Tuple[UmbrellaWindow, ...]
    n_steps: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if not self.windows:
            raise EmptySchedule("a window schedule needs at least one window")
        ids = [window.id for window in self.windows]
        if len(set(ids)) != len(ids):
            raise ConfigError("windows", "window ids must be unique")
        if self.n_steps is not None and len(self.n_steps) != len(self.windows):
            raise MismatchedLengths("one step budget per window is required")

    def __len__(self):
        return len(self.windows)

    def __iter__(self):
        return iter(self.windows)

    @property
    def centers(self) -> np.ndarray:
        return np.array([window.center for window in self.windows])


def _per_window(values, count, name):
    if np.ndim(values) == 0:
        return [float(values)] * count
    values = [float(v) for v in values]
    if len(values) != count:
        raise MismatchedLengths(f"{name}: expected {count} values, got {len(values)}")
    return values


def window_centers(cv: CollectiveVariable, value_range, count) -> np.ndarray:
    """
    `count` evenly spaced centres. A periodic range (lo, hi] excludes its lower end, so
    (-180°, 180°] with 40 windows gives -171°, -162°, ..., 180°.
    """
    if count is None or count < 1:
        raise EmptySchedule("the window count must be at least 1")
    lo, hi = value_range
    if cv.periodic:
        return lo + (hi - lo) * np.arange(1, count + 1) / count
    if count == 1:
        return np.array([0.5 * (lo + hi)])
    return np.linspace(lo, hi, count)


def window_schedule(
    cv: CollectiveVariable,
    value_range=None,
    count=None,
    centers=None,
    force_constants=1.0,
    first_id: int = 0,
) -> WindowSchedule:
    """
    Windows over `value_range` when `count` is given, or at explicit `centers`.
    `force_constants` is one value for all windows or one per window.
    """
    if centers is None:
        if value_range is None:
            raise ConfigError("windows.range", "a range is required with a window count")
        centers = window_centers(cv, value_range, count)
    centers = [float(c) for c in centers]
    if not centers:
        raise EmptySchedule("the window schedule is empty")
    constants = _per_window(force_constants, len(centers), "force constants")
    return WindowSchedule(
        windows=tuple(
            UmbrellaWindow(id=first_id + index, cv=cv, center=center, force_constant=constant)
            for index, (center, constant) in enumerate(zip(centers, constants))
        )
    )


def outer_schedule(first: WindowSchedule, second: WindowSchedule) -> WindowSchedule:
    """
    Two dimensional windows: every window of `first` combined with every window of `second`.
    """
    windows = []
    for a in first:
        for b in second:
            windows.append(
                UmbrellaWindow(
                    id=len(windows),
                    cv=a.cv,
                    center=a.center,
                    force_constant=a.force_constant,
                    extra=a.extra + b.restraints,
                )
            )
    return WindowSchedule(windows=tuple(windows))


class BiasedSystem:
    """
    Force provider of a surface with an optional ITS schedule and an optional window.

    Without ITS the energy is U + V_i with force F + F_bias. With ITS it is Ũ(U) + V_i with
    force s(U)·F + F_bias: only the physical potential is tempered, the bias stays outside.
    """

    def __init__(
        self,
        surface: PotentialSurface,
        its: Optional[ItsSchedule] = None,
        window: Optional[UmbrellaWindow] = None,
    ):
        self.surface = surface
        self.its = its
        self.window = window

    def __call__(self, coords):
        potential, gradient = self.surface.energy_and_gradient(coords)
        if self.its is None:
            energy, force = potential, -gradient
        else:
            energy = effective_energy(self.its, potential)
            scale = force_scale(self.its, potential)
            force = -np.asarray(scale)[..., np.newaxis] * gradient
        if self.window is not None:
            energy = energy + self.window.energy(coords)
            force = force + self.window.force(coords)
        return energy, force

    def __repr__(self):
        return f"BiasedSystem({self.surface!r}, its={self.its is not None}, window={self.window})"


def total_energy_force(system: BiasedSystem, coords):
    """
    Total biased (and tempered) energy and force of `system` at `coords`.
    """
    return system(coords)


def window_start(
    surface: PotentialSurface,
    window: UmbrellaWindow,
    start=None,
    n_iterations: int = 200,
    max_displacement: float = 0.05,
) -> np.ndarray:
    """
    Starting coordinates for `window`: the restrained coordinates are set to the window
    centres and a short steepest descent on U + V_i relaxes the rest.
    """
    coords = np.array(surface.reference_coords if start is None else start, dtype=float)
    for restraint in window.restraints:
        coords[restraint.cv.index] = restraint.center
    system = BiasedSystem(surface, window=window)
    step = 0.01
    energy, force = system(coords)
    for _ in range(n_iterations):
        norm = float(np.linalg.norm(force))
        if norm < 1e-8:
            break
        trial = coords + min(step, max_displacement / norm) * force
        trial_energy, trial_force = system(trial)
        if trial_energy < energy:
            coords, energy, force = trial, trial_energy, trial_force
            step *= 1.2
        else:
            step *= 0.5
    for index, period in enumerate(surface.periods):
        if period is not None:
            coords[index] = wrap_periodic(coords[index], period)
    return coords

