"""
Analytic potential energy surfaces, their gradients and the collective variables measured on them.

All the surfaces evaluate on arrays of shape (..., dim) so a batch of walkers is evaluated in a
single call. Energies are in kcal/mol, angles in radians.
"""
import abc
import logging
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Optional, Tuple

import numpy as np

from .exceptions import (ConfigError, DimensionMismatch, InvalidParameter,
                         UnknownSurface)
from .utils import wrap_periodic

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class CollectiveVariable:
    """
    A scalar projection of the coordinates: the coordinate `index` of a `dim` dimensional
    surface, wrapped into (-period/2, period/2] when `period` is set.
    """

    name: str
    index: int
    dim: int
    period: Optional[float] = None

    @property
    def periodic(self) -> bool:
        return self.period is not None

    def _check(self, coords):
        coords = np.asarray(coords, dtype=float)
        if coords.shape[-1:] != (self.dim,):
            raise DimensionMismatch(
                f"collective variable '{self.name}' expects {self.dim} coordinates, "
                f"got shape {coords.shape}"
            )
        return coords

    def value(self, coords):
        coords = self._check(coords)
        return wrap_periodic(coords[..., self.index], self.period)

    def gradient(self, coords):
        """
        dΩ/dR, a unit vector along the projected coordinate.
        """
        coords = self._check(coords)
        grad = np.zeros_like(coords)
        grad[..., self.index] = 1.0
        return grad


def cv_value(cv: CollectiveVariable, coords):
    """
    Value of the collective variable `cv` at `coords`.
    """
    return cv.value(coords)


class PotentialSurface(abc.ABC):
    """
    Base class of the analytic surfaces.

    Subclasses declare the coordinate names, their periods, the documented default
    parameters with their admissible ranges and implement `_energy_and_gradient`.
    Instances are immutable after construction.
    """

    NAME = None
    COORDINATES = ()
    PERIODS = ()
    # name -> (default, lower bound, upper bound); bounds are exclusive, None is unbounded
    PARAMETERS = {}
    # quadrature domain for each coordinate
    DOMAIN = ()
    # where walkers start when no coordinates are given
    REFERENCE_COORDS = ()

    def __init__(self, **params):
        self.validate_params(params)
        values = {key: spec[0] for key, spec in self.PARAMETERS.items()}
        values.update({key: float(value) for key, value in params.items()})
        self._params = MappingProxyType(values)

    @classmethod
    def validate_params(cls, params: Mapping):
        """
        Check the parameter overrides, raising `InvalidParameter` naming the offending key.
        """
        for key, value in params.items():
            if key not in cls.PARAMETERS:
                raise InvalidParameter(key, f"not a parameter of surface '{cls.NAME}'")
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise InvalidParameter(key, f"expected a real number, got {value!r}")
            if not math.isfinite(value):
                raise InvalidParameter(key, "must be finite")
            _, lower, upper = cls.PARAMETERS[key]
            if lower is not None and value <= lower:
                raise InvalidParameter(key, f"must be greater than {lower}")
            if upper is not None and value >= upper:
                raise InvalidParameter(key, f"must be lower than {upper}")

    @property
    def name(self) -> str:
        return self.NAME

    @property
    def params(self) -> Mapping:
        return self._params

    @property
    def dim(self) -> int:
        return len(self.COORDINATES)

    @property
    def periods(self) -> Tuple[Optional[float], ...]:
        return tuple(self.PERIODS)

    @property
    def domain(self) -> Tuple[Tuple[float, float], ...]:
        return tuple(self.DOMAIN)

    @property
    def reference_coords(self) -> np.ndarray:
        return np.array(self.REFERENCE_COORDS, dtype=float)

    def collective_variables(self) -> Tuple[CollectiveVariable, ...]:
        """
        One coordinate projection per coordinate, named after the coordinate.
        """
        return tuple(
            CollectiveVariable(name=name, index=index, dim=self.dim, period=period)
            for index, (name, period) in enumerate(zip(self.COORDINATES, self.PERIODS))
        )

    def cv(self, name: str) -> CollectiveVariable:
        for candidate in self.collective_variables():
            if candidate.name == name:
                return candidate
        raise ConfigError("cv", f"surface '{self.NAME}' has no collective variable '{name}'")

    def energy_and_gradient(self, coords):
        coords = np.asarray(coords, dtype=float)
        if coords.shape[-1:] != (self.dim,):
            raise DimensionMismatch(
                f"surface '{self.NAME}' expects {self.dim} coordinates, got shape {coords.shape}"
            )
        return self._energy_and_gradient(coords)

    def energy(self, coords):
        return self.energy_and_gradient(coords)[0]

    @abc.abstractmethod
    def _energy_and_gradient(self, coords):
        raise NotImplementedError

    def __repr__(self):
        params = ", ".join(f"{key}={value:g}" for key, value in self._params.items())
        return f"{type(self).__name__}({params})"


def evaluate(surface: PotentialSurface, coords):
    """
    Energy (kcal/mol) and gradient dU/dR of `surface` at `coords`. The force is the negated gradient.
    """
    return surface.energy_and_gradient(coords)


class HarmonicSurface(PotentialSurface):
    """
    U(x) = ½κx², the closed form reference for thermostat, calibration and WHAM checks.
    """

    NAME = "harmonic"
    COORDINATES = ("x",)
    PERIODS = (None,)
    PARAMETERS = {"kappa": (1.0, 0.0, None)}
    REFERENCE_COORDS = (0.0,)

    @property
    def domain(self):
        # ½κL² = 60 kcal/mol
        half_width = math.sqrt(120.0 / self._params["kappa"])
        return ((-half_width, half_width),)

    def _energy_and_gradient(self, coords):
        kappa = self._params["kappa"]
        x = coords[..., 0]
        return 0.5 * kappa * x * x, kappa * coords


class DoubleChannelSurface(PotentialSurface):
    """
    Two minima A(-1, ·) and B(+1, ·) joined by two parallel channels around y = ±1 at x = 0,
    separated by a hidden barrier at the origin:

        U = h(x²-1)² + w·g(x)·(y²-1)² + c·exp(-(x²+y²)/(2σc²)) + t·y·(x²-1)²·g(x)
        g(x) = exp(-x²/(2σx²))

    The reaction coordinate is x and the hidden coordinate is y. The defaults h = 5, w = 4,
    c = 6, σx = 0.5, σc = 0.3 and t = 0 give the plain three term surface.

    The tilt term is an addition to that form: a positive `t` makes the y < 0 channel lower
    than the y > 0 one and leaves the wells at x = ±1 unchanged. With t = 0 the channels are
    mirror images and a run confined to one of them is off by at most k_BT ln 2 near x = 0,
    too little to show the hidden barrier in a PMF along x.

    The hidden-barrier presets therefore use t = 1 together with c = 3 instead of 6. The
    lower origin bump keeps the crossing between the channels reachable for the ITS ladder
    (273-700 K) within the preset budget; restraints on x alone still do not move a window
    out of the upper channel it starts in.
    """

    NAME = "double-channel"
    COORDINATES = ("x", "y")
    PERIODS = (None, None)
    PARAMETERS = {
        "h": (5.0, 0.0, None),
        "w": (4.0, 0.0, None),
        "c": (6.0, None, None),
        "sigma_x": (0.5, 0.0, None),
        "sigma_c": (0.3, 0.0, None),
        "tilt": (0.0, None, None),
    }
    DOMAIN = ((-2.5, 2.5), (-6.0, 6.0))
    REFERENCE_COORDS = (-1.0, -1.0)

    def _energy_and_gradient(self, coords):
        p = self._params
        x = coords[..., 0]
        y = coords[..., 1]
        q = x * x - 1.0
        r = y * y - 1.0
        g = np.exp(-x * x / (2.0 * p["sigma_x"] ** 2))
        e = np.exp(-(x * x + y * y) / (2.0 * p["sigma_c"] ** 2))
        tilt = p["tilt"]

        energy = p["h"] * q * q + p["w"] * g * r * r + p["c"] * e + tilt * y * q * q * g

        dg = -x / p["sigma_x"] ** 2 * g
        grad = np.empty_like(coords)
        grad[..., 0] = (
            4.0 * p["h"] * x * q
            + p["w"] * r * r * dg
            - p["c"] * e * x / p["sigma_c"] ** 2
            + tilt * y * (4.0 * x * q * g + q * q * dg)
        )
        grad[..., 1] = (
            4.0 * p["w"] * g * y * r
            - p["c"] * e * y / p["sigma_c"] ** 2
            + tilt * q * q * g
        )
        return energy, grad


class TorsionSurface(PotentialSurface):
    """
    Butane like torsion U(φ) = ½[V1(1+cos φ) + V2(1-cos 2φ) + V3(1+cos 3φ)].

    φ = ±π is the anti minimum (U = 0) and φ = 0 the cis maximum at U = V1 + V3; the
    defaults put the cis barrier at 5.0 kcal/mol with two gauche wells near ±60°.
    """

    NAME = "torsion-1d"
    COORDINATES = ("phi",)
    PERIODS = (TWO_PI,)
    PARAMETERS = {
        "v1": (2.0, None, None),
        "v2": (-0.3, None, None),
        "v3": (3.0, None, None),
    }
    DOMAIN = ((-math.pi, math.pi),)
    REFERENCE_COORDS = (math.pi,)

    def _energy_and_gradient(self, coords):
        p = self._params
        phi = coords[..., 0]
        energy = 0.5 * (
            p["v1"] * (1.0 + np.cos(phi))
            + p["v2"] * (1.0 - np.cos(2.0 * phi))
            + p["v3"] * (1.0 + np.cos(3.0 * phi))
        )
        grad = np.empty_like(coords)
        grad[..., 0] = 0.5 * (
            -p["v1"] * np.sin(phi)
            + 2.0 * p["v2"] * np.sin(2.0 * phi)
            - 3.0 * p["v3"] * np.sin(3.0 * phi)
        )
        return energy, grad


class AmideSurface(PotentialSurface):
    """
    Peptide bond like isomerization in (ω, η'), both periodic.

    Trans well at ω = ±π, cis well at ω = 0 (`cis_offset` higher). Along ω the barrier
    at ±π/2 is `omega_barrier` + `cis_offset`/2. Near the transition region a switch
    g(ω) = exp(-κ(1 + cos 2ω)) replaces the planar η' well k_p(1 - cos η') by a double well
    with minima at η' = ±`path_angle` separated by a hidden barrier `hidden_barrier` at
    η' = 0, so the isomerization proceeds through two mirror paths. `path_bias` tilts
    the two paths by ±path_bias·sin(path_angle).

        U = A sin²ω + B(1 + cos ω)/2 + (1 - g) k_p (1 - cos η') + g [W(η') + t sin η']
        W(η') = D ((1 - cos η') - c*)² / c*²,   c* = 1 - cos(path_angle)

    The planarity constant is chosen so the two transition channels carry the same
    η' entropy as the planar well, which keeps the marginal ω barrier close to
    `DESIGN_BARRIER`.
    """

    NAME = "amide-2d"
    COORDINATES = ("omega", "eta")
    PERIODS = (TWO_PI, TWO_PI)
    PARAMETERS = {
        "omega_barrier": (11.0, 0.0, None),
        "cis_offset": (2.0, None, None),
        "switch": (3.0, 0.0, None),
        "planarity": (9.2, 0.0, None),
        "hidden_barrier": (4.0, 0.0, None),
        "path_angle": (math.radians(50.0), 0.0, math.pi),
        "path_bias": (0.5, None, None),
    }
    DOMAIN = ((-math.pi, math.pi), (-math.pi, math.pi))
    REFERENCE_COORDS = (math.pi, 0.0)

    # marginal PMF barrier along ω targeted by the default coefficients (kcal/mol)
    DESIGN_BARRIER = 11.9

    def _energy_and_gradient(self, coords):
        p = self._params
        omega = coords[..., 0]
        eta = coords[..., 1]
        kappa = p["switch"]
        c_star = 1.0 - math.cos(p["path_angle"])

        g = np.exp(-kappa * (1.0 + np.cos(2.0 * omega)))
        dg = 2.0 * kappa * np.sin(2.0 * omega) * g

        sin_eta = np.sin(eta)
        cos_eta = np.cos(eta)
        planar = p["planarity"] * (1.0 - cos_eta)
        d_planar = p["planarity"] * sin_eta
        u = (1.0 - cos_eta) - c_star
        double_well = p["hidden_barrier"] * u * u / (c_star * c_star)
        d_double_well = 2.0 * p["hidden_barrier"] * u * sin_eta / (c_star * c_star)
        paths = double_well + p["path_bias"] * sin_eta
        d_paths = d_double_well + p["path_bias"] * cos_eta

        energy = (
            p["omega_barrier"] * np.sin(omega) ** 2
            + 0.5 * p["cis_offset"] * (1.0 + np.cos(omega))
            + (1.0 - g) * planar
            + g * paths
        )
        grad = np.empty_like(coords)
        grad[..., 0] = (
            p["omega_barrier"] * np.sin(2.0 * omega)
            - 0.5 * p["cis_offset"] * np.sin(omega)
            + dg * (paths - planar)
        )
        grad[..., 1] = (1.0 - g) * d_planar + g * d_paths
        return energy, grad


SURFACES = {
    surface.NAME: surface
    for surface in (HarmonicSurface, DoubleChannelSurface, TorsionSurface, AmideSurface)
}


@dataclass(frozen=True)
class SurfaceSpec:
    """
    A surface name plus parameter overrides, as read from the run configuration.
    """

    name: str
    params: Mapping = field(default_factory=dict)

    @classmethod
    def from_config(cls, data) -> "SurfaceSpec":
        """
        Parse the `surface` section of a run configuration.
        """
        if isinstance(data, str):
            data = {"name": data}
        if not isinstance(data, Mapping):
            raise ConfigError("surface", "expected a mapping with 'name' and 'params'")
        unknown = set(data) - {"name", "params"}
        if unknown:
            raise ConfigError(f"surface.{sorted(unknown)[0]}", "unknown key")
        name = data.get("name")
        if name not in SURFACES:
            raise UnknownSurface(name)
        params = data.get("params") or {}
        if not isinstance(params, Mapping):
            raise ConfigError("surface.params", "expected a mapping")
        SURFACES[name].validate_params(params)
        return cls(name=name, params=dict(params))

    def to_config(self) -> dict:
        return {"name": self.name, "params": dict(self.params)}


def make_surface(spec: SurfaceSpec) -> PotentialSurface:
    """
    Build the surface named by `spec`, applying its parameter overrides.
    """
    try:
        surface_class = SURFACES[spec.name]
    except KeyError as exc:
        raise UnknownSurface(spec.name) from exc
    surface = surface_class(**spec.params)
    logger.debug("Built surface %r", surface)
    return surface
