"""
Run configuration.

A run is described by a YAML file with the sections `surface`, `dynamics`, `its`, `windows`
and `analysis` plus the top level keys `name`, `method`, `seed` and `output`:

```
  name: butane-its-us
  method: its-us            # md | its | us | its-us
  seed: 2024
  surface:
    name: torsion-1d
  dynamics:
    temperature: 300
    n_steps: 20000
  its:
    ladder: {min: 273, max: 450, count: 60}
    calibration: {rounds: 30, n_steps: 20000}
  windows:
    cv: phi
    degrees: true
    range: [-180, 180]
    count: 40
    force_constant: 45      # kcal/mol/rad², always per radian squared
  analysis:
    cvs: [phi]
    bins: 72
```

Unknown keys are errors and every error names the dotted path of the offending entry.
Sections that hold angles accept `degrees: true`; everything is radians internally.
"""
import logging
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Tuple

import yaml

from .exceptions import ConfigError, ItsUsError
from .integrator import DynamicsConfig
from .potentials import SurfaceSpec, make_surface
from .tempering import temperature_ladder
from .umbrella import WindowSchedule, outer_schedule, window_centers, window_schedule

logger = logging.getLogger(__name__)

METHODS = ("md", "its", "us", "its-us")
PRESETS_DIR = Path(__file__).parent / "presets"


def _check_keys(data, known, path):
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(path, "expected a mapping")
    for key in data:
        if key not in known:
            raise ConfigError(f"{path}.{key}", "unknown key")
    return data


def _number(data, key, path, kind=float, default=None):
    value = data.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool):
        raise ConfigError(f"{path}.{key}", f"expected a number, got {value!r}")
    try:
        return kind(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}.{key}", f"expected a number, got {value!r}") from exc


def _numbers(data, key, path, scale=1.0):
    value = data.get(key)
    if value is None:
        return None
    values = value if isinstance(value, (list, tuple)) else [value]
    try:
        return tuple(float(v) * scale for v in values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}.{key}", f"expected numbers, got {value!r}") from exc


def _range(value, path, scale=1.0):
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(path, f"expected [min, max], got {value!r}")
    try:
        return float(value[0]) * scale, float(value[1]) * scale
    except (TypeError, ValueError) as exc:
        raise ConfigError(path, f"expected numbers, got {value!r}") from exc


def _angle_scale(data):
    return math.pi / 180.0 if data.get("degrees") else 1.0


@dataclass(frozen=True)
class CalibrationConfig:
    DEFAULT_ROUNDS = 30
    DEFAULT_MIXING = 0.5
    DEFAULT_FLATNESS = 5.0
    DEFAULT_N_STEPS = 20000

    rounds: int = DEFAULT_ROUNDS
    mixing: float = DEFAULT_MIXING
    flatness: float = DEFAULT_FLATNESS
    n_steps: int = DEFAULT_N_STEPS

    @classmethod
    def from_config(cls, data, path="its.calibration"):
        data = _check_keys(data, ("rounds", "mixing", "flatness", "n_steps"), path)
        config = cls(
            rounds=_number(data, "rounds", path, int, cls.DEFAULT_ROUNDS),
            mixing=_number(data, "mixing", path, float, cls.DEFAULT_MIXING),
            flatness=_number(data, "flatness", path, float, cls.DEFAULT_FLATNESS),
            n_steps=_number(data, "n_steps", path, int, cls.DEFAULT_N_STEPS),
        )
        if config.rounds < 1:
            raise ConfigError(f"{path}.rounds", "must be at least 1")
        if not 0 < config.mixing <= 1:
            raise ConfigError(f"{path}.mixing", "must be in (0, 1]")
        if not config.flatness > 1:
            raise ConfigError(f"{path}.flatness", "must be greater than 1")
        if config.n_steps < 1:
            raise ConfigError(f"{path}.n_steps", "must be at least 1")
        return config


@dataclass(frozen=True)
class ItsConfig:
    """
    The temperature ladder, an optional precomputed schedule file and the calibration budget.
    """

    temperatures: Tuple[float, ...]
    schedule: Optional[str] = None
    calibration: CalibrationConfig = field(default_factory=CalibrationConfig)
    per_window: bool = False

    @classmethod
    def from_config(cls, data, base_dir=None, path="its"):
        data = _check_keys(data, ("ladder", "temperatures", "schedule", "calibration", "per_window"), path)
        temperatures = _numbers(data, "temperatures", path)
        if temperatures is None:
            if "ladder" not in data:
                raise ConfigError(f"{path}.ladder", "a ladder or explicit temperatures are required")
            ladder = _check_keys(data["ladder"], ("min", "max", "count", "spacing"), f"{path}.ladder")
            for key in ("min", "max", "count"):
                if key not in ladder:
                    raise ConfigError(f"{path}.ladder.{key}", "required")
            temperatures = tuple(
                float(t)
                for t in temperature_ladder(
                    _number(ladder, "min", f"{path}.ladder"),
                    _number(ladder, "max", f"{path}.ladder"),
                    _number(ladder, "count", f"{path}.ladder", int),
                    ladder.get("spacing", "geometric"),
                )
            )
        if any(t <= 0 for t in temperatures):
            raise ConfigError(f"{path}.temperatures", "must be positive")
        schedule = data.get("schedule")
        if schedule is not None and base_dir is not None:
            schedule = os.path.join(base_dir, schedule)
        return cls(
            temperatures=temperatures,
            schedule=schedule,
            calibration=CalibrationConfig.from_config(data.get("calibration"), f"{path}.calibration"),
            per_window=bool(data.get("per_window", False)),
        )


@dataclass(frozen=True)
class WindowAxisConfig:
    """
    Windows along one collective variable: explicit centres or a range and a count, and one
    force constant or one per window. A two value `force_constant` with
    `force_constant_profile: sin2` interpolates K = K_min + (K_max - K_min) sin²(centre).
    """

    cv: str
    centers: Optional[Tuple[float, ...]] = None
    value_range: Optional[Tuple[float, float]] = None
    count: Optional[int] = None
    force_constants: Tuple[float, ...] = (1.0,)
    force_constant_profile: Optional[str] = None

    PROFILES = ("sin2",)
    KNOWN = ("cv", "degrees", "range", "count", "centers", "force_constant", "force_constant_profile")

    @classmethod
    def from_config(cls, data, path, extra_keys=()):
        data = _check_keys(data, cls.KNOWN + tuple(extra_keys), path)
        if "cv" not in data:
            raise ConfigError(f"{path}.cv", "required")
        scale = _angle_scale(data)
        centers = _numbers(data, "centers", path, scale)
        value_range = _numbers(data, "range", path, scale)
        count = _number(data, "count", path, int)
        if centers is None and (value_range is None or count is None):
            raise ConfigError(path, "give either 'centers' or both 'range' and 'count'")
        if value_range is not None and len(value_range) != 2:
            raise ConfigError(f"{path}.range", "expected two values")
        if "force_constant" not in data:
            raise ConfigError(f"{path}.force_constant", "required")
        constants = _numbers(data, "force_constant", path)
        profile = data.get("force_constant_profile")
        if profile is not None:
            if profile not in cls.PROFILES or len(constants) != 2:
                raise ConfigError(
                    f"{path}.force_constant_profile", "only 'sin2' with [K_min, K_max] is supported"
                )
        return cls(
            cv=str(data["cv"]),
            centers=centers,
            value_range=tuple(value_range) if value_range else None,
            count=count,
            force_constants=constants,
            force_constant_profile=profile,
        )

    def schedule(self, surface, first_id=0) -> WindowSchedule:
        cv = surface.cv(self.cv)
        constants = self.force_constants
        if self.force_constant_profile == "sin2":
            centers = self.centers
            if centers is None:
                centers = window_centers(cv, self.value_range, self.count)
            low, high = constants
            constants = [low + (high - low) * math.sin(c) ** 2 for c in centers]
            return window_schedule(cv, centers=centers, force_constants=constants, first_id=first_id)
        constants = constants[0] if len(constants) == 1 else constants
        try:
            return window_schedule(
                cv,
                value_range=self.value_range,
                count=self.count,
                centers=self.centers,
                force_constants=constants,
                first_id=first_id,
            )
        except ItsUsError:
            raise
        except ValueError as exc:
            raise ConfigError("windows", str(exc)) from exc


@dataclass(frozen=True)
class WindowsConfig:
    primary: WindowAxisConfig
    second: Optional[WindowAxisConfig] = None
    start: Optional[Tuple[float, ...]] = None

    @classmethod
    def from_config(cls, data, path="windows"):
        data = _check_keys(data, WindowAxisConfig.KNOWN + ("second", "start"), path)
        primary = WindowAxisConfig.from_config(
            {k: v for k, v in data.items() if k not in ("second", "start")}, path
        )
        second = None
        if data.get("second") is not None:
            second = WindowAxisConfig.from_config(data["second"], f"{path}.second")
        start = _numbers(data, "start", path, _angle_scale(data))
        return cls(primary=primary, second=second, start=start)

    def schedule(self, surface) -> WindowSchedule:
        first = self.primary.schedule(surface)
        if self.second is None:
            return first
        return outer_schedule(first, self.second.schedule(surface))


@dataclass(frozen=True)
class AnalysisConfig:
    DEFAULT_STRIDE = 1
    DEFAULT_TOLERANCE = 1e-6
    DEFAULT_MAX_ITERATIONS = 100000
    DEFAULT_BLOCKS = 20
    DEFAULT_RESAMPLES = 200

    cvs: Tuple[str, ...] = ()
    bins: Optional[Tuple[int, ...]] = None
    ranges: Optional[Tuple[Optional[Tuple[float, float]], ...]] = None
    skip: float = 0.0
    max_time: Optional[float] = None
    stride: int = DEFAULT_STRIDE
    tolerance: float = DEFAULT_TOLERANCE
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    blocks: int = DEFAULT_BLOCKS
    resamples: int = DEFAULT_RESAMPLES
    hidden_cv: Optional[str] = None
    region: Optional[Tuple[float, float]] = None

    KNOWN = (
        "cvs", "bins", "ranges", "degrees", "skip", "max_time", "stride", "tolerance",
        "max_iterations", "blocks", "resamples", "hidden_cv", "region",
    )

    @classmethod
    def from_config(cls, data, path="analysis"):
        data = _check_keys(data, cls.KNOWN, path)
        scale = _angle_scale(data)
        cvs = data.get("cvs", ())
        cvs = (cvs,) if isinstance(cvs, str) else tuple(str(c) for c in cvs)
        if len(cvs) > 2:
            raise ConfigError(f"{path}.cvs", "at most two collective variables")
        bins = data.get("bins")
        if bins is not None:
            bins = tuple(
                _number({"bins": b}, "bins", path, int, 0)
                for b in (bins if isinstance(bins, (list, tuple)) else [bins])
            )
            if any(b is None or b < 1 for b in bins):
                raise ConfigError(f"{path}.bins", "must be at least 1")
        ranges = data.get("ranges")
        if ranges is not None:
            if not isinstance(ranges, (list, tuple)):
                raise ConfigError(f"{path}.ranges", f"expected one [min, max] pair per cv, got {ranges!r}")
            ranges = tuple(
                None if r is None else _range(r, f"{path}.ranges.{index}", scale)
                for index, r in enumerate(ranges)
            )
        region = _numbers(data, "region", path, scale)
        config = cls(
            cvs=cvs,
            bins=bins,
            ranges=ranges,
            skip=_number(data, "skip", path, float, 0.0),
            max_time=_number(data, "max_time", path, float),
            stride=_number(data, "stride", path, int, cls.DEFAULT_STRIDE),
            tolerance=_number(data, "tolerance", path, float, cls.DEFAULT_TOLERANCE),
            max_iterations=_number(data, "max_iterations", path, int, cls.DEFAULT_MAX_ITERATIONS),
            blocks=_number(data, "blocks", path, int, cls.DEFAULT_BLOCKS),
            resamples=_number(data, "resamples", path, int, cls.DEFAULT_RESAMPLES),
            hidden_cv=data.get("hidden_cv"),
            region=region,
        )
        if config.stride < 1:
            raise ConfigError(f"{path}.stride", "must be at least 1")
        if not config.tolerance > 0:
            raise ConfigError(f"{path}.tolerance", "must be positive")
        return config


@dataclass(frozen=True)
class RunConfig:
    """
    A parsed run configuration. `raw` keeps the document it was parsed from.
    """

    name: str
    method: str
    surface: SurfaceSpec
    dynamics: DynamicsConfig
    its: Optional[ItsConfig] = None
    windows: Optional[WindowsConfig] = None
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    output: Optional[str] = None
    seed: int = 0
    description: str = ""
    budget_scale: Optional[float] = None
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    KNOWN = (
        "name", "description", "budget_scale", "method", "seed", "surface", "dynamics", "its",
        "windows", "analysis", "output",
    )

    @classmethod
    def from_config(cls, data, base_dir=None) -> "RunConfig":
        data = _check_keys(data, cls.KNOWN, "config")
        if not data:
            raise ConfigError("config", "empty configuration")
        method = data.get("method")
        if method not in METHODS:
            raise ConfigError("method", f"expected one of {', '.join(METHODS)}, got {method!r}")
        if "surface" not in data:
            raise ConfigError("surface", "required")
        seed = _number(data, "seed", "config", int, 0)
        surface = SurfaceSpec.from_config(data["surface"])

        its = None
        if method in ("its", "its-us"):
            if data.get("its") is None:
                raise ConfigError("its", f"required for method {method}")
            its = ItsConfig.from_config(data["its"], base_dir)
        elif data.get("its") is not None:
            raise ConfigError("its", f"not used by method {method}")

        windows = None
        if method in ("us", "its-us"):
            if data.get("windows") is None:
                raise ConfigError("windows", f"required for method {method}")
            windows = WindowsConfig.from_config(data["windows"])
        elif data.get("windows") is not None:
            raise ConfigError("windows", f"not used by method {method}")

        config = cls(
            name=str(data.get("name", "run")),
            method=method,
            surface=surface,
            dynamics=DynamicsConfig.from_config(data.get("dynamics"), seed=seed),
            its=its,
            windows=windows,
            analysis=AnalysisConfig.from_config(data.get("analysis")),
            output=data.get("output"),
            seed=seed,
            description=str(data.get("description", "")),
            budget_scale=_number(data, "budget_scale", "config", float),
            raw=dict(data),
        )
        config.validate()
        return config

    def validate(self):
        """
        Cross section checks that need the surface.
        """
        surface = self.make_surface()
        if self.windows is not None:
            self.windows.schedule(surface)
            if self.windows.start is not None and len(self.windows.start) != surface.dim:
                raise ConfigError("windows.start", f"expected {surface.dim} coordinates")
        for name in self.analysis_cvs():
            try:
                surface.cv(name)
            except ConfigError as exc:
                raise ConfigError("analysis.cvs", str(exc)) from exc
        self.dynamics.masses(surface.dim)

    def make_surface(self):
        return make_surface(self.surface)

    def analysis_cvs(self) -> Tuple[str, ...]:
        if self.analysis.cvs:
            return self.analysis.cvs
        if self.windows is not None:
            names = (self.windows.primary.cv,)
            if self.windows.second is not None:
                names += (self.windows.second.cv,)
            return names
        return (self.make_surface().COORDINATES[0],)

    def window_schedule(self) -> Optional[WindowSchedule]:
        return self.windows.schedule(self.make_surface()) if self.windows else None

    @property
    def uses_its(self) -> bool:
        return self.its is not None

    def with_overrides(self, seed=None, output=None, replicas=None) -> "RunConfig":
        """
        The configuration with command line overrides applied.
        """
        config = self
        if seed is not None:
            config = replace(config, seed=int(seed), dynamics=replace(config.dynamics, seed=int(seed)))
        if replicas is not None:
            config = replace(config, dynamics=replace(config.dynamics, replicas=int(replicas)))
        if output is not None:
            config = replace(config, output=output)
        return config

    def to_config(self) -> dict:
        data = dict(self.raw)
        data["seed"] = self.seed
        data.setdefault("dynamics", {})
        data["dynamics"] = dict(data["dynamics"] or {}, replicas=self.dynamics.replicas)
        if self.output is not None:
            data["output"] = self.output
        if self.its is not None and self.its.schedule:
            data["its"] = dict(data["its"], schedule=os.path.abspath(self.its.schedule))
        return data


def load_config(path) -> RunConfig:
    """
    Parse the run configuration file at `path`.
    """
    try:
        with open(path, encoding="utf-8") as handle:
            data = yaml.safe_load(handle)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError("config", f"invalid YAML in {path}: {exc}") from exc
    return RunConfig.from_config(data, base_dir=os.path.dirname(os.path.abspath(path)))


def list_presets():
    return sorted(p.stem for p in PRESETS_DIR.glob("*.yml"))


def load_preset(name) -> RunConfig:
    path = PRESETS_DIR / f"{name}.yml"
    if not path.exists():
        raise ConfigError("preset", f"unknown preset '{name}', expected one of {list_presets()}")
    return load_config(path)
