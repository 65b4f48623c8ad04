"""
Deterministic fixtures and the golden files that pin their values.

A golden file under `golden/v<version>/` names a generator, its parameters and the pinned
values with their provenance:

```
  name: gaussian-wham
  generator: gaussian_wham
  parameters: {kappa: 1.0, force_constants: [0.0, 4.0], centers: [0.0, 1.0], beta0: 1.0}
  pinned:
    - name: analytic_f
      value: 1.2047
      provenance: DERIVED     # PAPER | TRIVIAL | DERIVED
      tolerance: 1.0e-4
```

`regenerate_golden` runs every generator again and reports the drift of each pinned value.
"""
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import formats
from .analysis import Density, GridAxis, HistogramGrid, barrier_height, pmf
from .exceptions import ConfigError, DriftDetected, ItsUsError
from .integrator import DynamicsConfig, PlainForce, initial_state, run_trajectory
from .oracle import QuadratureSpec, locate_stationary, reference_partition, reference_pmf
from .potentials import SurfaceSpec, make_surface
from .umbrella import Restraint, UmbrellaWindow
from .utils import beta, random_generator
from .wham import WhamInput, WindowSamples, solve

logger = logging.getLogger(__name__)

GOLDEN_VERSION = 1
GOLDEN_DIR = Path(__file__).parent / "golden" / f"v{GOLDEN_VERSION}"
PROVENANCES = ("PAPER", "TRIVIAL", "DERIVED")


@dataclass(frozen=True)
class PinnedValue:
    name: str
    value: float
    provenance: str
    tolerance: float
    note: str = ""

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ConfigError(
                f"pinned.{self.name}.provenance", f"expected one of {', '.join(PROVENANCES)}"
            )
        if not self.tolerance >= 0:
            raise ConfigError(f"pinned.{self.name}.tolerance", "must not be negative")

    def to_config(self) -> dict:
        data = {
            "name": self.name,
            "value": float(self.value),
            "provenance": self.provenance,
            "tolerance": float(self.tolerance),
        }
        if self.note:
            data["note"] = self.note
        return data


@dataclass(frozen=True)
class Fixture:
    """
    A generator with its parameters and the values it must reproduce.
    """

    name: str
    generator: str
    parameters: Dict = field(default_factory=dict)
    pinned: Tuple[PinnedValue, ...] = ()
    description: str = ""

    @classmethod
    def from_config(cls, data, path="fixture") -> "Fixture":
        if not isinstance(data, dict):
            raise ConfigError(path, "expected a mapping")
        for key in ("name", "generator", "pinned"):
            if key not in data:
                raise ConfigError(f"{path}.{key}", "required")
        if data["generator"] not in GENERATORS:
            raise ConfigError(f"{path}.generator", f"unknown generator '{data['generator']}'")
        try:
            pinned = tuple(PinnedValue(**item) for item in data["pinned"])
        except TypeError as exc:
            raise ConfigError(f"{path}.pinned", str(exc)) from exc
        return cls(
            name=str(data["name"]),
            generator=data["generator"],
            parameters=dict(data.get("parameters") or {}),
            pinned=pinned,
            description=str(data.get("description", "")),
        )

    def to_config(self) -> dict:
        data = {"name": self.name}
        if self.description:
            data["description"] = self.description
        data.update(
            generator=self.generator,
            parameters=self.parameters,
            pinned=[value.to_config() for value in self.pinned],
        )
        return data


@dataclass
class GaussianWhamFixture:
    data: WhamInput
    analytic_f: np.ndarray


def gaussian_free_energy(kappa, force_constant, center, beta0) -> float:
    """
    Free energy of a harmonic bias K on U = ½κx², relative to the unbiased system:

        f = -(1/2β) ln(κ/(κ+K)) + ½ κK c²/(κ+K)
    """
    if force_constant == 0:
        return 0.0
    total = kappa + force_constant
    return -0.5 / beta0 * math.log(kappa / total) + 0.5 * kappa * force_constant * center**2 / total


def generate_gaussian_wham_fixture(
    kappa: float,
    force_constants: Sequence[float],
    centers: Sequence[float],
    n_samples: int,
    seed: int,
    beta0: float = 1.0,
) -> GaussianWhamFixture:
    """
    Samples drawn directly from each biased harmonic distribution, a Gaussian of mean
    Kc/(κ+K) and variance 1/(β0(κ+K)), plus the closed form f of every window.
    A zero force constant is an unbiased window.
    """
    if not kappa > 0:
        raise ConfigError("fixture.kappa", "must be positive")
    if len(force_constants) != len(centers):
        raise ConfigError("fixture.centers", "one center per force constant is required")
    if any(k < 0 for k in force_constants):
        raise ConfigError("fixture.force_constants", "must not be negative")
    cv = make_surface(SurfaceSpec("harmonic", {"kappa": kappa})).cv("x")
    windows = []
    for index, (force_constant, center) in enumerate(zip(force_constants, centers)):
        total = kappa + force_constant
        rng = random_generator(seed, index)
        x = force_constant * center / total + rng.standard_normal(n_samples) / math.sqrt(beta0 * total)
        window = None
        if force_constant > 0:
            window = UmbrellaWindow(index, cv, center, force_constant)
        windows.append(
            WindowSamples(window_id=index, energy=0.5 * kappa * x * x, cvs={"x": x}, window=window)
        )
    analytic = np.array(
        [gaussian_free_energy(kappa, k, c, beta0) for k, c in zip(force_constants, centers)]
    )
    return GaussianWhamFixture(data=WhamInput(windows=tuple(windows), beta0=beta0), analytic_f=analytic)


def _gaussian_wham(parameters, resolution=None):
    fixture = generate_gaussian_wham_fixture(
        parameters["kappa"],
        parameters["force_constants"],
        parameters["centers"],
        parameters["n_samples"],
        parameters["seed"],
        parameters.get("beta0", 1.0),
    )
    solution = solve(fixture.data)
    analytic = fixture.analytic_f - fixture.analytic_f[0]
    return {
        "analytic_f": float(analytic[-1]),
        "wham_f": float(solution.f[-1]),
        "wham_error": float(np.max(np.abs(solution.f - analytic))),
    }


def _bias_energy(parameters, resolution=None):
    surface = make_surface(SurfaceSpec("torsion-1d"))
    restraint = Restraint(
        surface.cv("phi"),
        math.radians(parameters["center"]),
        parameters["force_constant"],
    )
    return {"energy": float(restraint.energy(math.radians(parameters["value"])))}


def _density_ratio(parameters, resolution=None):
    grid = HistogramGrid((GridAxis("x", 0.0, 2.0, 2),))
    ratio = parameters["ratio"]
    density = Density(grid, np.array([ratio, 1.0]) / (1.0 + ratio), np.array([ratio, 1]))
    result = pmf(density, beta(parameters["temperature"]))
    return {"delta_a": float(result.values[1] - result.values[0])}


def _quad(resolution):
    return QuadratureSpec() if resolution is None else QuadratureSpec(resolution=resolution)


def _partition(parameters, resolution=None):
    surface = make_surface(SurfaceSpec(parameters["surface"], parameters.get("params", {})))
    return {"partition": reference_partition(surface, parameters["beta"], _quad(resolution))}


def _surface_energy(parameters, resolution=None):
    surface = make_surface(SurfaceSpec(parameters["surface"], parameters.get("params", {})))
    return {"energy": float(surface.energy(np.array(parameters["coords"], dtype=float)))}


def _stationary_barrier(parameters, resolution=None):
    surface = make_surface(SurfaceSpec(parameters["surface"], parameters.get("params", {})))
    energies = [point.energy for point in locate_stationary(surface)]
    return {"barrier": float(max(energies) - min(energies))}


def _trajectory(parameters, resolution=None):
    """
    A short seeded trajectory; with `from_rest` the walkers start with zero velocity, and with
    zero friction the path is the plain leap-frog map and does not depend on the seed.
    """
    surface = make_surface(SurfaceSpec(parameters["surface"], parameters.get("params", {})))
    cfg = DynamicsConfig.from_config(parameters["dynamics"], seed=parameters.get("seed", 0))
    state = initial_state(surface, cfg, parameters.get("coords"))
    if parameters.get("from_rest", False):
        state.velocities = np.zeros_like(state.velocities)
    trajectory = run_trajectory(surface, PlainForce(surface), surface.collective_variables(), cfg, state=state)
    step = np.rint(trajectory.time / cfg.dt).astype(int)
    values = {}
    for name in trajectory.cv_names:
        values.update({f"{name}_{s}": float(v) for s, v in zip(step, trajectory.cv(name))})
    values.update({f"energy_{s}": float(e) for s, e in zip(step, trajectory.energy)})
    return values


def _oracle_barrier(parameters, resolution=None):
    surface = make_surface(SurfaceSpec(parameters["surface"], parameters.get("params", {})))
    result = reference_pmf(
        surface, parameters["cv"], beta0=beta(parameters["temperature"]), quad=_quad(resolution)
    )
    return {"barrier": barrier_height(result)}


GENERATORS: Dict[str, Callable] = {
    "gaussian_wham": _gaussian_wham,
    "bias_energy": _bias_energy,
    "density_ratio": _density_ratio,
    "partition": _partition,
    "surface_energy": _surface_energy,
    "stationary_barrier": _stationary_barrier,
    "oracle_barrier": _oracle_barrier,
    "trajectory": _trajectory,
}


def regenerate(fixture: Fixture, resolution: Optional[int] = None) -> Dict[str, float]:
    """
    Run the fixture's generator; `resolution` overrides the oracle quadrature resolution.
    """
    return GENERATORS[fixture.generator](fixture.parameters, resolution)


@dataclass(frozen=True)
class Drift:
    fixture: str
    name: str
    pinned: float
    recomputed: Optional[float]
    tolerance: float

    @property
    def drift(self) -> float:
        if self.recomputed is None or not math.isfinite(self.recomputed):
            return math.inf
        return abs(self.recomputed - self.pinned)

    @property
    def ok(self) -> bool:
        return self.drift <= self.tolerance

    def to_config(self) -> dict:
        return {
            "fixture": self.fixture,
            "name": self.name,
            "pinned": self.pinned,
            "recomputed": self.recomputed,
            "tolerance": self.tolerance,
            "drift": self.drift,
            "ok": self.ok,
        }


@dataclass
class DriftReport:
    entries: List[Drift] = field(default_factory=list)
    errors: Dict[str, str] = field(default_factory=dict)

    @property
    def drifted(self) -> List[Drift]:
        return [entry for entry in self.entries if not entry.ok]

    @property
    def ok(self) -> bool:
        return not self.drifted and not self.errors

    def to_config(self) -> dict:
        return {
            "ok": self.ok,
            "entries": [entry.to_config() for entry in self.entries],
            "errors": dict(self.errors),
        }

    def raise_for_drift(self):
        if self.errors:
            name, message = sorted(self.errors.items())[0]
            raise DriftDetected(f"fixture {name}: {message}")
        if self.drifted:
            first = self.drifted[0]
            raise DriftDetected(
                f"{len(self.drifted)} pinned value(s) drifted, first {first.fixture}.{first.name}: "
                f"{first.recomputed!r} vs {first.pinned!r} (tolerance {first.tolerance:g})"
            )


def load_fixtures(directory=GOLDEN_DIR) -> Tuple[List[Fixture], Dict[str, str]]:
    """
    Every fixture of `directory` plus the files that could not be parsed, by file name.
    """
    fixtures, errors = [], {}
    for path in sorted(Path(directory).glob("*.yml")):
        try:
            fixtures.append(Fixture.from_config(formats.read_yaml(path), path.stem))
        except ItsUsError as exc:
            logger.error("Golden file %s is corrupted: %s", path, exc)
            errors[path.stem] = str(exc)
    return fixtures, errors


def _regenerate_safely(fixture, resolution):
    try:
        return regenerate(fixture, resolution), None
    except (ItsUsError, KeyError, TypeError, ValueError) as exc:
        return None, f"{exc.__class__.__name__}: {exc}"


def regenerate_golden(directory=GOLDEN_DIR, write=False, resolution=None, jobs=1) -> DriftReport:
    """
    Recompute every pinned value under `directory` and report its drift. With `write` the
    recomputed values replace the pinned ones.
    """
    fixtures, errors = load_fixtures(directory)
    report = DriftReport(errors=errors)
    if jobs > 1 and len(fixtures) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            results = list(executor.map(_regenerate_safely, fixtures, [resolution] * len(fixtures)))
    else:
        results = [_regenerate_safely(fixture, resolution) for fixture in fixtures]

    for fixture, (values, error) in zip(fixtures, results):
        if error is not None:
            report.errors[fixture.name] = error
            continue
        for pinned in fixture.pinned:
            recomputed = values.get(pinned.name)
            report.entries.append(
                Drift(fixture.name, pinned.name, pinned.value, recomputed, pinned.tolerance)
            )
        if write:
            updated = tuple(
                PinnedValue(p.name, values.get(p.name, p.value), p.provenance, p.tolerance, p.note)
                for p in fixture.pinned
            )
            path = os.path.join(directory, f"{fixture.name}.yml")
            formats.write_yaml(path, Fixture(
                fixture.name, fixture.generator, fixture.parameters, updated, fixture.description
            ).to_config())

    for entry in report.drifted:
        logger.warning(
            "Fixture %s.%s drifted by %.3g (tolerance %.3g)",
            entry.fixture, entry.name, entry.drift, entry.tolerance,
        )
    logger.info(
        "Regenerated %d pinned value(s) from %d fixture(s), %d drifted",
        len(report.entries), len(fixtures), len(report.drifted),
    )
    return report
