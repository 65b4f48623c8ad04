"""
Brute force references on the analytic surfaces: exact PMFs and partition functions by
dense grid quadrature and stationary points by a grid scan refined with a root finder.
"""
import logging
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage, optimize
from scipy.special import logsumexp

from .analysis import HistogramGrid, Pmf
from .exceptions import ConfigError, DomainTooSmall, OracleNotConverged
from .potentials import CollectiveVariable, PotentialSurface
from .utils import wrap_periodic

logger = logging.getLogger(__name__)

DEFAULT_RESOLUTION = 2048
MIN_RESOLUTION = 64
# boundary density over maximum density
BOUNDARY_TOLERANCE = 1e-12
SELF_CONVERGENCE_TOLERANCE = 1e-3


@dataclass(frozen=True)
class QuadratureSpec:
    """
    Uniform trapezoidal quadrature: `resolution` nodes per dimension over `domain`
    (the surface's own domain when None). `beta` is used when a call gives none.
    """

    resolution: Union[int, Tuple[int, ...]] = DEFAULT_RESOLUTION
    domain: Optional[Tuple[Tuple[float, float], ...]] = None
    beta: Optional[float] = None

    def __post_init__(self):
        resolutions = np.atleast_1d(self.resolution)
        if np.any(resolutions < MIN_RESOLUTION):
            raise ConfigError(
                "oracle.resolution", f"at least {MIN_RESOLUTION} nodes per dimension are required"
            )

    def resolution_for(self, dim) -> Tuple[int, ...]:
        if np.ndim(self.resolution) == 0:
            return (int(self.resolution),) * dim
        if len(self.resolution) != dim:
            raise ConfigError("oracle.resolution", f"expected {dim} values")
        return tuple(int(r) for r in self.resolution)

    def domain_for(self, surface: PotentialSurface):
        domain = self.domain if self.domain is not None else surface.domain
        if len(domain) != surface.dim:
            raise ConfigError("oracle.domain", f"expected {surface.dim} intervals")
        return tuple(tuple(float(v) for v in interval) for interval in domain)

    def doubled(self) -> "QuadratureSpec":
        resolution = (
            2 * self.resolution
            if np.ndim(self.resolution) == 0
            else tuple(2 * r for r in self.resolution)
        )
        return QuadratureSpec(resolution=resolution, domain=self.domain, beta=self.beta)


def _nodes(lower, upper, count, periodic):
    """
    Nodes and log trapezoid weights. On a periodic axis the rule is the plain rectangle
    rule over one period.
    """
    if periodic:
        width = (upper - lower) / count
        nodes = lower + width * np.arange(count)
        return nodes, np.full(count, np.log(width))
    nodes = np.linspace(lower, upper, count)
    width = (upper - lower) / (count - 1)
    weights = np.full(count, width)
    weights[[0, -1]] *= 0.5
    return nodes, np.log(weights)


def _resolve_beta(beta, quad):
    beta = beta if beta is not None else quad.beta
    if beta is None or not beta > 0:
        raise ConfigError("oracle.beta", "a positive inverse temperature is required")
    return beta


def _log_boltzmann(surface, axes_nodes, beta):
    mesh = np.meshgrid(*axes_nodes, indexing="ij")
    coords = np.stack(mesh, axis=-1)
    return -beta * surface.energy(coords)


def _check_boundaries(surface, log_boltzmann, axes):
    """
    `axes` lists the mesh axes that are integrated over; non periodic ones must carry
    negligible density at both ends.
    """
    peak = np.max(log_boltzmann)
    for axis in axes:
        if surface.periods[axis] is not None:
            continue
        edges = np.concatenate(
            [np.take(log_boltzmann, 0, axis=axis).ravel(), np.take(log_boltzmann, -1, axis=axis).ravel()]
        )
        if np.max(edges) - peak > np.log(BOUNDARY_TOLERANCE):
            raise DomainTooSmall(
                f"surface '{surface.name}': density at the boundary of coordinate "
                f"'{surface.COORDINATES[axis]}' exceeds {BOUNDARY_TOLERANCE:g} of its maximum"
            )


def _evaluation_points(axis, bin_average, resolution):
    if not bin_average:
        return axis.centers, 1
    per_bin = max(1, resolution // axis.bins)
    offsets = ((np.arange(per_bin) + 0.5) / per_bin - 0.5) * axis.width
    return (axis.centers[:, np.newaxis] + offsets[np.newaxis, :]).ravel(), per_bin


def reference_log_density(
    surface: PotentialSurface,
    grid: HistogramGrid,
    beta: float,
    quad: QuadratureSpec,
    bin_average: bool = False,
) -> np.ndarray:
    """
    ln ∫ exp(-βU) δ(Θ - θ) dR at the grid bin centres (or averaged over each bin), the
    coordinates not on the grid integrated out.
    """
    resolution = quad.resolution_for(surface.dim)
    domain = quad.domain_for(surface)
    positions = [surface.cv(name).index for name in grid.names]
    axes_nodes, log_weights, per_bin = [], [], []
    for index in range(surface.dim):
        if index in positions:
            axis = grid.axes[positions.index(index)]
            points, count = _evaluation_points(axis, bin_average, resolution[index])
            axes_nodes.append(points)
            log_weights.append(np.zeros(len(points)))
            per_bin.append(count)
        else:
            lower, upper = domain[index]
            nodes, weights = _nodes(lower, upper, resolution[index], surface.periods[index] is not None)
            axes_nodes.append(nodes)
            log_weights.append(weights)

    log_boltzmann = _log_boltzmann(surface, axes_nodes, beta)
    integrated = tuple(i for i in range(surface.dim) if i not in positions)
    _check_boundaries(surface, log_boltzmann, integrated)
    for index in integrated:
        shape = [1] * surface.dim
        shape[index] = -1
        log_boltzmann = log_boltzmann + log_weights[index].reshape(shape)
    log_density = logsumexp(log_boltzmann, axis=integrated) if integrated else log_boltzmann

    # remaining axes follow the surface coordinate order
    ranks = np.argsort(np.argsort(positions))
    log_density = np.transpose(log_density, ranks)
    if bin_average:
        for position, axis in enumerate(grid.axes):
            count = per_bin[ranks[position]]
            shape = list(log_density.shape)
            shape[position:position + 1] = [axis.bins, count]
            log_density = logsumexp(log_density.reshape(shape), axis=position + 1) - np.log(count)
    return log_density


def _to_pmf(log_density, grid, beta, quad, origin="oracle"):
    values = -log_density / beta
    values = values - values.min()
    return Pmf(
        grid=grid,
        values=values,
        errors=np.zeros_like(values),
        counts=np.zeros(grid.shape, dtype=int),
        beta0=beta,
        origin=origin,
        metadata={"resolution": list(np.atleast_1d(quad.resolution).tolist())},
    )


def _resolve_grid(surface, cvs, grid):
    names = tuple(cv.name if isinstance(cv, CollectiveVariable) else cv for cv in cvs)
    if grid is None:
        return HistogramGrid.for_surface(surface, names)
    if grid.names != names:
        raise ConfigError("oracle.grid", f"grid axes {grid.names} do not match {names}")
    return grid


def _check_self_convergence(surface, grid, beta0, quad, bin_average, result):
    finer = -reference_log_density(surface, grid, beta0, quad.doubled(), bin_average) / beta0
    finite = np.isfinite(result.values) & np.isfinite(finer)
    drift = float(np.max(np.abs((finer - finer[finite].min()) - result.values)[finite]))
    result.metadata["self_convergence"] = drift
    if drift > SELF_CONVERGENCE_TOLERANCE:
        raise OracleNotConverged(
            f"oracle PMF of surface '{surface.name}' along {list(grid.names)} changes by {drift:.3g} "
            f"kcal/mol when the resolution {list(np.atleast_1d(quad.resolution))} is doubled"
        )
    logger.debug("Oracle PMF of '%s' self convergence %.3g kcal/mol", surface.name, drift)


def reference_pmf(
    surface: PotentialSurface,
    cv,
    grid: Optional[HistogramGrid] = None,
    beta0: Optional[float] = None,
    quad: Optional[QuadratureSpec] = None,
    bin_average: bool = False,
    check_convergence: bool = True,
) -> Pmf:
    """
    A(θ) = -(1/β0) ln ∫ exp(-β0 U) δ(Θ - θ) dR along one collective variable, aligned so
    that its minimum is 0.

    The quadrature is repeated at twice the resolution unless `check_convergence` is off;
    the largest change in any bin is recorded in the metadata and raises
    OracleNotConverged above 1e-3 kcal/mol.
    """
    quad = quad or QuadratureSpec()
    beta0 = _resolve_beta(beta0, quad)
    grid = _resolve_grid(surface, (cv,), grid)
    result = _to_pmf(reference_log_density(surface, grid, beta0, quad, bin_average), grid, beta0, quad)
    if check_convergence:
        _check_self_convergence(surface, grid, beta0, quad, bin_average, result)
    return result


def reference_pmf_2d(
    surface: PotentialSurface,
    cvs: Sequence,
    grid: Optional[HistogramGrid] = None,
    beta0: Optional[float] = None,
    quad: Optional[QuadratureSpec] = None,
    bin_average: bool = False,
    check_convergence: bool = True,
) -> Pmf:
    if len(cvs) != 2:
        raise ConfigError("oracle.cvs", "a two dimensional PMF needs two collective variables")
    quad = quad or QuadratureSpec()
    beta0 = _resolve_beta(beta0, quad)
    grid = _resolve_grid(surface, cvs, grid)
    result = _to_pmf(reference_log_density(surface, grid, beta0, quad, bin_average), grid, beta0, quad)
    if check_convergence:
        _check_self_convergence(surface, grid, beta0, quad, bin_average, result)
    return result


def reference_log_partition(surface: PotentialSurface, beta, quad: Optional[QuadratureSpec] = None) -> float:
    quad = quad or QuadratureSpec()
    beta = _resolve_beta(beta, quad)
    resolution = quad.resolution_for(surface.dim)
    domain = quad.domain_for(surface)
    nodes, log_weights = zip(
        *[
            _nodes(lower, upper, count, period is not None)
            for (lower, upper), count, period in zip(domain, resolution, surface.periods)
        ]
    )
    log_boltzmann = _log_boltzmann(surface, nodes, beta)
    _check_boundaries(surface, log_boltzmann, tuple(range(surface.dim)))
    for index, weights in enumerate(log_weights):
        shape = [1] * surface.dim
        shape[index] = -1
        log_boltzmann = log_boltzmann + weights.reshape(shape)
    return float(logsumexp(log_boltzmann))


def reference_partition(surface: PotentialSurface, beta, quad: Optional[QuadratureSpec] = None) -> float:
    """
    Z(β) = ∫ exp(-βU) dR over the quadrature domain.
    """
    return float(np.exp(reference_log_partition(surface, beta, quad)))


class StationaryPoint(NamedTuple):
    coords: np.ndarray
    energy: float
    kind: str


def numerical_hessian(surface: PotentialSurface, coords, step=1e-5) -> np.ndarray:
    """
    Central differences of the analytic gradient, symmetrized.
    """
    coords = np.asarray(coords, dtype=float)
    hessian = np.empty((surface.dim, surface.dim))
    for index in range(surface.dim):
        shift = np.zeros(surface.dim)
        shift[index] = step
        _, forward = surface.energy_and_gradient(coords + shift)
        _, backward = surface.energy_and_gradient(coords - shift)
        hessian[index] = (forward - backward) / (2.0 * step)
    return 0.5 * (hessian + hessian.T)


def classify(hessian) -> str:
    eigenvalues = np.linalg.eigvalsh(hessian)
    if np.all(eigenvalues > 0):
        return "minimum"
    if np.all(eigenvalues < 0):
        return "maximum"
    return "saddle"


def _separation(surface, first, second):
    delta = np.asarray(first) - np.asarray(second)
    for index, period in enumerate(surface.periods):
        if period is not None:
            delta[index] -= period * np.round(delta[index] / period)
    return float(np.linalg.norm(delta))


def locate_stationary(
    surface: PotentialSurface,
    region=None,
    resolution: Optional[int] = None,
    tolerance: float = 1e-8,
) -> List[StationaryPoint]:
    """
    Minima, saddles and maxima of `surface` inside `region` (the surface domain by default).

    Local minima of |∇U|² on a uniform grid seed a root search on ∇U; every root is
    classified by the eigenvalues of a finite difference Hessian.
    """
    region = tuple(region) if region is not None else surface.domain
    if resolution is None:
        resolution = 721 if surface.dim == 1 else 121
    periodic = [
        period is not None and np.isclose(hi - lo, period)
        for (lo, hi), period in zip(region, surface.periods)
    ]
    axes_nodes = [
        np.linspace(lo, hi, resolution, endpoint=not wraps)
        for (lo, hi), wraps in zip(region, periodic)
    ]
    coords = np.stack(np.meshgrid(*axes_nodes, indexing="ij"), axis=-1)
    _, gradient = surface.energy_and_gradient(coords)
    norm = np.sum(gradient * gradient, axis=-1)
    modes = ["wrap" if wraps else "nearest" for wraps in periodic]
    candidates = norm == ndimage.minimum_filter(norm, size=3, mode=modes)
    for index, wraps in enumerate(periodic):
        if not wraps:
            candidates[(slice(None),) * index + (0,)] = False
            candidates[(slice(None),) * index + (-1,)] = False

    points: List[StationaryPoint] = []
    for start in coords[candidates]:
        solution = optimize.root(
            lambda x: surface.energy_and_gradient(x)[1],
            start,
            jac=lambda x: numerical_hessian(surface, x),
            tol=tolerance,
        )
        if not solution.success:
            continue
        found = np.array(solution.x, dtype=float)
        for index, period in enumerate(surface.periods):
            found[index] = wrap_periodic(found[index], period)
        energy, gradient = surface.energy_and_gradient(found)
        if np.linalg.norm(gradient) > 1e-6:
            continue
        inside = all(
            wraps or lo <= value <= hi
            for value, (lo, hi), wraps in zip(found, region, periodic)
        )
        if not inside:
            continue
        if any(_separation(surface, found, point.coords) < 1e-4 for point in points):
            continue
        points.append(StationaryPoint(found, float(energy), classify(numerical_hessian(surface, found))))

    points.sort(key=lambda point: point.energy)
    logger.debug("Found %d stationary points on '%s'", len(points), surface.name)
    return points
