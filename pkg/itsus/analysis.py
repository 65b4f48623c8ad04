"""
Densities and potentials of mean force from weighted samples, plus the diagnostics used to
judge a sampling campaign: potential energy distributions, hidden basin occupancy and the
overlap between windows.

    ρ(θ) = Σ_l w_l δ(Θ(R_l) - θ),        A(θ) = -(1/β0) ln ρ(θ)

The δ function is realized by fixed width binning. Empty bins are NaN everywhere: in the
arrays, in the PMF gauge and in the output files.
"""
import logging
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np

from .exceptions import (ConfigError, IncompatibleGrids, MissingCV, SamplesOutsideGrid,
                         TooFewSamples)
from .utils import random_generator, temperature

logger = logging.getLogger(__name__)

DEFAULT_PERIODIC_BINS = 72
DEFAULT_BINS_2D = 64
DEFAULT_BLOCKS = 20
DEFAULT_RESAMPLES = 200


@dataclass(frozen=True)
class GridAxis:
    """
    One binned dimension. Periodic axes cover exactly one period.
    """

    name: str
    lower: float
    upper: float
    bins: int
    period: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "lower", float(self.lower))
        object.__setattr__(self, "upper", float(self.upper))
        object.__setattr__(self, "bins", int(self.bins))
        if self.bins < 2:
            raise ConfigError("analysis.bins", "at least 2 bins are required")
        if not self.upper > self.lower:
            raise ConfigError("analysis.range", f"empty range [{self.lower}, {self.upper}]")
        if self.period is not None:
            object.__setattr__(self, "period", float(self.period))
            if not np.isclose(self.upper - self.lower, self.period, rtol=1e-9, atol=0.0):
                raise ConfigError(
                    "analysis.range", f"a periodic axis must span one period ({self.period:g})"
                )

    @property
    def periodic(self) -> bool:
        return self.period is not None

    @property
    def width(self) -> float:
        return (self.upper - self.lower) / self.bins

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.lower, self.upper, self.bins + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.lower + (np.arange(self.bins) + 0.5) * self.width

    def bin_index(self, values) -> np.ndarray:
        """
        Bin of every value, -1 outside a non-periodic axis.
        """
        values = np.asarray(values, dtype=float)
        if self.periodic:
            offset = np.mod(values - self.lower, self.period)
            return np.minimum(np.floor(offset / self.width).astype(int), self.bins - 1)
        index = np.floor((values - self.lower) / self.width).astype(int)
        index = np.minimum(index, self.bins - 1)
        outside = (values < self.lower) | (values > self.upper) | ~np.isfinite(values)
        return np.where(outside, -1, index)

    def to_config(self) -> dict:
        return {
            "name": self.name,
            "lower": self.lower,
            "upper": self.upper,
            "bins": self.bins,
            "period": self.period,
        }


@dataclass(frozen=True)
class HistogramGrid:
    axes: Tuple[GridAxis, ...]

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))
        if not self.axes:
            raise ConfigError("analysis.cvs", "a grid needs at least one axis")

    @classmethod
    def for_surface(cls, surface, cv_names: Sequence[str], bins=None, ranges=None):
        """
        A grid over the quadrature domain of `surface` along the named collective variables.
        One period for periodic ones. `ranges` overrides the bounds of non-periodic axes.
        """
        if bins is None:
            bins = DEFAULT_PERIODIC_BINS if len(cv_names) == 1 else DEFAULT_BINS_2D
        bins = [bins] * len(cv_names) if np.ndim(bins) == 0 else list(bins)
        ranges = list(ranges) if ranges is not None else [None] * len(cv_names)
        if len(bins) != len(cv_names) or len(ranges) != len(cv_names):
            raise ConfigError("analysis", "one bin count and range per collective variable")
        axes = []
        for name, count, value_range in zip(cv_names, bins, ranges):
            cv = surface.cv(name)
            lower, upper = surface.domain[cv.index]
            if value_range is not None and not cv.periodic:
                lower, upper = value_range
            axes.append(GridAxis(name, lower, upper, count, cv.period))
        return cls(tuple(axes))

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(axis.name for axis in self.axes)

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(axis.bins for axis in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def bin_volume(self) -> float:
        return float(np.prod([axis.width for axis in self.axes]))

    def flat_index(self, columns) -> np.ndarray:
        """
        Flat bin index of every sample, -1 for samples outside the grid.
        """
        indices = [axis.bin_index(values) for axis, values in zip(self.axes, columns)]
        outside = np.zeros(indices[0].shape, dtype=bool)
        for index in indices:
            outside |= index < 0
        flat = np.ravel_multi_index([np.maximum(i, 0) for i in indices], self.shape)
        flat[outside] = -1
        return flat

    def without(self, name) -> "HistogramGrid":
        return HistogramGrid(tuple(axis for axis in self.axes if axis.name != name))

    def axis_position(self, name) -> int:
        try:
            return self.names.index(name)
        except ValueError as exc:
            raise MissingCV(f"grid has no axis '{name}'") from exc


@dataclass
class WeightedSamples:
    """
    Pooled samples with their unbiased weights.
    """

    cvs: Mapping[str, np.ndarray]
    weights: np.ndarray
    energy: np.ndarray
    window_id: np.ndarray
    replica: np.ndarray
    time: np.ndarray

    def __len__(self):
        return len(self.weights)

    def cv(self, name) -> np.ndarray:
        try:
            return self.cvs[name]
        except KeyError as exc:
            raise MissingCV(f"samples carry no collective variable '{name}'") from exc

    def select(self, mask) -> "WeightedSamples":
        return WeightedSamples(
            cvs={name: values[mask] for name, values in self.cvs.items()},
            weights=self.weights[mask],
            energy=self.energy[mask],
            window_id=self.window_id[mask],
            replica=self.replica[mask],
            time=self.time[mask],
        )


@dataclass
class Density:
    grid: HistogramGrid
    values: np.ndarray
    counts: np.ndarray

    def normalization(self) -> float:
        return float(self.values.sum() * self.grid.bin_volume)


@dataclass
class Pmf:
    """
    A(θ) per bin in kcal/mol, NaN for empty bins, with per bin uncertainties.
    """

    grid: HistogramGrid
    values: np.ndarray
    errors: np.ndarray
    counts: np.ndarray
    beta0: float
    origin: str = "wham"
    metadata: dict = field(default_factory=dict)

    @property
    def temperature(self) -> float:
        return temperature(self.beta0)

    @property
    def empty(self) -> np.ndarray:
        return np.isnan(self.values)

    def barrier_height(self, region=None) -> float:
        return barrier_height(self, region)


def _histogram(grid, columns, weights):
    index = grid.flat_index(columns)
    inside = index >= 0
    if not inside.any():
        raise SamplesOutsideGrid(f"no sample falls inside the {grid.names} grid")
    total = weights[inside].sum()
    if not total > 0:
        raise SamplesOutsideGrid("the samples inside the grid carry no weight")
    if not inside.all():
        logger.debug("%d samples fall outside the grid", int((~inside).sum()))
    values = np.bincount(index[inside], weights=weights[inside], minlength=grid.size)
    counts = np.bincount(index[inside], minlength=grid.size)
    return (
        (values / total / grid.bin_volume).reshape(grid.shape),
        counts.reshape(grid.shape),
    )


def weighted_density(samples: WeightedSamples, cvs: Sequence[str], grid: HistogramGrid) -> Density:
    """
    ρ per bin: the weight falling in the bin over the bin volume, normalized over the grid.
    """
    if isinstance(cvs, str):
        cvs = (cvs,)
    if tuple(cvs) != grid.names:
        raise IncompatibleGrids(f"grid axes {grid.names} do not match {tuple(cvs)}")
    columns = [samples.cv(name) for name in cvs]
    values, counts = _histogram(grid, columns, np.asarray(samples.weights, dtype=float))
    return Density(grid=grid, values=values, counts=counts)


def _free_energy(values, beta0):
    with np.errstate(divide="ignore"):
        energy = np.where(values > 0, -np.log(np.where(values > 0, values, 1.0)) / beta0, np.nan)
    if np.all(np.isnan(energy)):
        return energy
    return energy - np.nanmin(energy)


def pmf(density: Density, beta0: float, errors=None, origin="wham") -> Pmf:
    """
    A = -(1/β0) ln ρ per non-empty bin, shifted so that its minimum is 0.
    """
    values = _free_energy(density.values, beta0)
    if errors is None:
        errors = np.where(np.isnan(values), np.nan, 0.0)
    return Pmf(
        grid=density.grid,
        values=values,
        errors=np.asarray(errors, dtype=float),
        counts=density.counts,
        beta0=beta0,
        origin=origin,
    )


def pmf_2d(samples: WeightedSamples, cvs: Sequence[str], grid: HistogramGrid, beta0: float) -> Pmf:
    """
    Joint PMF over a pair of collective variables.
    """
    if len(cvs) != 2 or grid.ndim != 2:
        raise IncompatibleGrids("a two dimensional PMF needs two collective variables")
    return pmf(weighted_density(samples, cvs, grid), beta0)


def marginalize(density: Density, axis) -> Density:
    """
    Integrate the axis `axis` (a name or a position) out of a joint density.
    """
    position = axis if isinstance(axis, int) else density.grid.axis_position(axis)
    removed = density.grid.axes[position]
    return Density(
        grid=HistogramGrid(density.grid.axes[:position] + density.grid.axes[position + 1:]),
        values=density.values.sum(axis=position) * removed.width,
        counts=density.counts.sum(axis=position),
    )


def _trajectory_blocks(samples: WeightedSamples, n_blocks):
    blocks = []
    keys = np.stack([samples.window_id, samples.replica], axis=-1)
    for key in np.unique(keys, axis=0):
        rows = np.flatnonzero((keys == key).all(axis=-1))
        rows = rows[np.argsort(samples.time[rows], kind="stable")]
        pieces = [piece for piece in np.array_split(rows, min(n_blocks, len(rows))) if len(piece)]
        blocks.append(pieces)
    return blocks


def bootstrap_errors(
    samples: WeightedSamples,
    cvs: Sequence[str],
    grid: HistogramGrid,
    beta0: float,
    n_blocks: int = DEFAULT_BLOCKS,
    n_resamples: int = DEFAULT_RESAMPLES,
    seed: int = 0,
) -> np.ndarray:
    """
    Block bootstrap standard error of the PMF.

    Every trajectory (window and replica) is cut into `n_blocks` contiguous blocks which are
    resampled with replacement; the unbiased weights are kept fixed.
    """
    if n_resamples < 2:
        raise ConfigError("analysis.resamples", "at least 2 resamples are required")
    rng = random_generator(seed, 0xB007)
    blocks = _trajectory_blocks(samples, n_blocks)
    columns = [samples.cv(name) for name in cvs]
    weights = np.asarray(samples.weights, dtype=float)
    estimates = np.full((n_resamples,) + grid.shape, np.nan)
    for resample in range(n_resamples):
        rows = np.concatenate(
            [
                np.concatenate([pieces[i] for i in rng.integers(0, len(pieces), len(pieces))])
                for pieces in blocks
            ]
        )
        try:
            values, _ = _histogram(grid, [c[rows] for c in columns], weights[rows])
        except SamplesOutsideGrid:
            continue
        estimates[resample] = _free_energy(values, beta0)
    available = np.sum(~np.isnan(estimates), axis=0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        errors = np.nanstd(estimates, axis=0, ddof=1)
    return np.where(available >= 2, errors, 0.0)


def estimate_pmf(
    samples: WeightedSamples,
    cvs: Sequence[str],
    grid: HistogramGrid,
    beta0: float,
    n_blocks: int = DEFAULT_BLOCKS,
    n_resamples: int = DEFAULT_RESAMPLES,
    seed: int = 0,
) -> Pmf:
    """
    PMF with block bootstrap uncertainties. `n_resamples=0` skips the bootstrap.
    """
    result = pmf(weighted_density(samples, cvs, grid), beta0)
    if n_resamples:
        errors = bootstrap_errors(samples, cvs, grid, beta0, n_blocks, n_resamples, seed)
        result.errors = np.where(result.empty, np.nan, errors)
        result.metadata.update({"blocks": n_blocks, "resamples": n_resamples})
    return result


def replica_pmf(samples: WeightedSamples, cvs: Sequence[str], grid: HistogramGrid, beta0: float) -> Pmf:
    """
    Mean and standard deviation over the PMFs of the individual replicas.
    """
    estimates = []
    for replica in np.unique(samples.replica):
        subset = samples.select(samples.replica == replica)
        try:
            estimates.append(pmf(weighted_density(subset, cvs, grid), beta0).values)
        except SamplesOutsideGrid:
            logger.warning("Replica %d has no sample inside the grid", replica)
    if len(estimates) < 2:
        raise TooFewSamples("per replica PMFs need at least two replicas")
    estimates = np.array(estimates)
    pooled = weighted_density(samples, cvs, grid)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        mean = np.nanmean(estimates, axis=0)
        spread = np.nanstd(estimates, axis=0, ddof=1)
    mean = mean - np.nanmin(mean)
    result = Pmf(
        grid=grid,
        values=mean,
        errors=np.where(np.isnan(mean), np.nan, np.nan_to_num(spread)),
        counts=pooled.counts,
        beta0=beta0,
    )
    result.metadata["replicas"] = len(estimates)
    return result


@dataclass
class EnergyDistribution:
    edges: np.ndarray
    density: np.ndarray
    mean: float
    std: float
    count: int

    def to_config(self) -> dict:
        return {"mean": self.mean, "std": self.std, "count": self.count}


def energy_distribution(energies, bins=50, weights=None) -> EnergyDistribution:
    """
    Normalized histogram of the potential energy with its mean and standard deviation.
    """
    energies = np.asarray(energies, dtype=float)
    if energies.size < 2:
        raise TooFewSamples(f"an energy distribution needs 2 samples, got {energies.size}")
    if weights is None:
        weights = np.full(energies.shape, 1.0 / energies.size)
    else:
        weights = np.asarray(weights, dtype=float) / np.sum(weights)
    density, edges = np.histogram(energies, bins=bins, weights=weights, density=True)
    mean = float(np.sum(weights * energies))
    std = float(np.sqrt(np.sum(weights * (energies - mean) ** 2)))
    return EnergyDistribution(edges=edges, density=density, mean=mean, std=std, count=energies.size)


@dataclass
class OccupancyReport:
    """
    Per window occupancy of the two hidden basins (hidden CV below and above zero) and the
    pairwise overlap coefficients of the windows along the reaction coordinate.
    """

    window_ids: Tuple[int, ...]
    occupancy: np.ndarray
    overlap: np.ndarray

    def trapped(self, extreme=0.98) -> Tuple[int, ...]:
        """
        Windows that stay in a single hidden basin.
        """
        mask = self.occupancy.max(axis=1) > extreme
        return tuple(w for w, m in zip(self.window_ids, mask) if m)

    def both_basins(self, minimum=0.05) -> Tuple[int, ...]:
        mask = self.occupancy.min(axis=1) > minimum
        return tuple(w for w, m in zip(self.window_ids, mask) if m)

    def to_config(self) -> dict:
        return {
            "windows": [
                {"id": int(w), "occupancy": [float(p) for p in row]}
                for w, row in zip(self.window_ids, self.occupancy)
            ],
            "overlap": [[float(v) for v in row] for row in self.overlap],
        }


def overlap_coefficient(first, second) -> float:
    """
    Σ min(p, q) of two normalized histograms, 1 for identical distributions.
    """
    return float(np.minimum(first, second).sum())


def overlap_and_occupancy(
    windows: Mapping[int, Mapping[str, np.ndarray]],
    reaction_cv: str,
    hidden_cv: str,
    threshold: float = 0.0,
    axis: Optional[GridAxis] = None,
) -> OccupancyReport:
    """
    `windows` maps a window id to its samples by collective variable name. A sample
    occupies the lower basin when its hidden CV is below `-threshold` and the upper one
    above `threshold`; samples in between count for neither.
    """
    ids = tuple(sorted(windows))
    for window_id in ids:
        for name in (reaction_cv, hidden_cv):
            if name not in windows[window_id]:
                raise MissingCV(f"window {window_id} carries no collective variable '{name}'")
    if axis is None:
        values = np.concatenate([np.asarray(windows[w][reaction_cv]) for w in ids])
        lower, upper = float(values.min()), float(values.max())
        if upper <= lower:
            upper = lower + 1.0
        axis = GridAxis(reaction_cv, lower, upper, 100)

    occupancy = np.zeros((len(ids), 2))
    histograms = np.zeros((len(ids), axis.bins))
    for row, window_id in enumerate(ids):
        hidden = np.asarray(windows[window_id][hidden_cv], dtype=float)
        if hidden.size:
            occupancy[row] = (np.mean(hidden < -threshold), np.mean(hidden > threshold))
        index = axis.bin_index(windows[window_id][reaction_cv])
        index = index[index >= 0]
        if index.size:
            histograms[row] = np.bincount(index, minlength=axis.bins) / index.size

    overlap = np.array([[overlap_coefficient(p, q) for q in histograms] for p in histograms])
    return OccupancyReport(window_ids=ids, occupancy=occupancy, overlap=overlap)


def _region_mask(result: Pmf, region):
    if region is None:
        return np.ones(result.grid.shape, dtype=bool)
    centers = result.grid.axes[0].centers
    mask = (centers >= region[0]) & (centers <= region[1])
    return np.broadcast_to(
        mask.reshape((-1,) + (1,) * (result.grid.ndim - 1)), result.grid.shape
    )


def barrier_height(result: Pmf, region=None) -> float:
    """
    max A - min A over the non-empty bins whose first coordinate lies in `region`.
    """
    values = result.values[_region_mask(result, region) & ~result.empty]
    if values.size == 0:
        return float("nan")
    return float(values.max() - values.min())


@dataclass
class PmfComparison:
    rmsd: float
    max_abs: float
    barrier_a: float
    barrier_b: float
    shared_bins: int

    @property
    def barrier_delta(self) -> float:
        return self.barrier_a - self.barrier_b

    def to_config(self) -> dict:
        return {
            "rmsd": self.rmsd,
            "max_abs": self.max_abs,
            "barrier_a": self.barrier_a,
            "barrier_b": self.barrier_b,
            "barrier_delta": self.barrier_delta,
            "shared_bins": self.shared_bins,
        }


def compare_pmfs(a: Pmf, b: Pmf, region=None) -> PmfComparison:
    """
    RMSD and max |ΔA| over the bins non-empty in both PMFs (restricted to `region` along
    the first axis), each PMF realigned to zero minimum over those bins.
    """
    if a.grid != b.grid:
        raise IncompatibleGrids(f"cannot compare PMFs on grids {a.grid} and {b.grid}")
    shared = ~a.empty & ~b.empty & _region_mask(a, region)
    if not shared.any():
        raise IncompatibleGrids("the PMFs share no non-empty bin")
    first = a.values[shared] - a.values[shared].min()
    second = b.values[shared] - b.values[shared].min()
    delta = first - second
    return PmfComparison(
        rmsd=float(np.sqrt(np.mean(delta * delta))),
        max_abs=float(np.abs(delta).max()),
        barrier_a=float(first.max()),
        barrier_b=float(second.max()),
        shared_bins=int(shared.sum()),
    )
