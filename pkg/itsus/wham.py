"""
Generalized, binless WHAM over umbrella and ITS-umbrella windows.

Window j samples exp(-β0 [Ũ_j(R) + V_j(Ω(R))]); relative to the unbiased ensemble its samples
carry the bias exp(-b_jl) with

    b_jl = β0 (Ũ_j(U_l) - U_l + V_j(Ω_l))

and the window free energies solve, over every sample l of every window,

    exp(-β0 f_i) = Σ_l exp(-b_il) / Σ_j m_j exp(β0 f_j - b_jl)

A window with no umbrella bias and no ITS schedule contributes b = 0, so a plain MD run is a
single unbiased window and a standalone ITS run a single window with only the ITS term.
"""
import functools
import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from .analysis import HistogramGrid, WeightedSamples, weighted_density
from .exceptions import ConfigError, EmptyWindow, InvalidSamples, MissingCV
from .tempering import ItsSchedule, effective_energy
from .umbrella import UmbrellaWindow

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-6
DEFAULT_MAX_ITERATIONS = 100000
# windows x samples above which the bias matrix is rebuilt chunk by chunk every sweep
MAX_MATRIX_ENTRIES = 20_000_000
OVERLAP_WARNING = 1e-3


@dataclass
class WindowSamples:
    """
    The samples of one window: original energies U, collective variables by name, the
    window's umbrella bias and ITS schedule (either may be None).
    """

    window_id: int
    energy: np.ndarray
    cvs: Mapping[str, np.ndarray]
    window: Optional[UmbrellaWindow] = None
    its: Optional[ItsSchedule] = None
    time: Optional[np.ndarray] = None
    replica: Optional[np.ndarray] = None

    def __post_init__(self):
        self.energy = np.asarray(self.energy, dtype=float)
        self.cvs = {name: np.asarray(values, dtype=float) for name, values in self.cvs.items()}
        count = len(self.energy)
        if self.time is None:
            self.time = np.arange(count, dtype=float)
        if self.replica is None:
            self.replica = np.zeros(count, dtype=int)

    @property
    def count(self) -> int:
        return len(self.energy)

    @classmethod
    def from_trajectory(cls, trajectory, window=None, its=None) -> "WindowSamples":
        return cls(
            window_id=trajectory.window_id,
            energy=trajectory.energy,
            cvs={name: trajectory.cv(name) for name in trajectory.cv_names},
            window=window,
            its=its,
            time=trajectory.time,
            replica=trajectory.replica,
        )


def bias_log_factor(window: Optional[UmbrellaWindow], its: Optional[ItsSchedule], beta0, energy, cvs):
    """
    β0 (Ũ_j(U) - U + V_j(Ω)) for samples of energy `energy` and collective variables `cvs`.

    Ũ depends on the coordinates only through U, so the ITS term needs nothing but U.
    """
    energy = np.asarray(energy, dtype=float)
    value = np.zeros_like(energy)
    if its is not None:
        value = value + beta0 * (effective_energy(its, energy) - energy)
    if window is not None:
        for name in window.cv_names:
            if name not in cvs:
                raise MissingCV(f"window {window.id} biases '{name}' which the samples do not carry")
        value = value + beta0 * window.energy_from_values(cvs)
    return value


@dataclass
class WhamInput:
    windows: Tuple[WindowSamples, ...]
    beta0: float

    def __post_init__(self):
        self.windows = tuple(self.windows)
        if not self.windows:
            raise EmptyWindow("WHAM needs at least one window")
        if not self.beta0 > 0:
            raise ConfigError("wham.temperature", "must be positive")
        for samples in self.windows:
            if samples.count == 0:
                raise EmptyWindow(f"window {samples.window_id} has no samples")
            if not np.all(np.isfinite(samples.energy)):
                raise InvalidSamples(f"window {samples.window_id} has non finite energies")
            if samples.its is not None and not np.isclose(samples.its.beta0, self.beta0):
                raise ConfigError(
                    "its", f"window {samples.window_id} uses a schedule at another temperature"
                )
        ids = [samples.window_id for samples in self.windows]
        if len(set(ids)) != len(ids):
            raise ConfigError("windows", "window ids must be unique")

    @property
    def window_ids(self) -> Tuple[int, ...]:
        return tuple(samples.window_id for samples in self.windows)

    @property
    def counts(self) -> np.ndarray:
        return np.array([samples.count for samples in self.windows], dtype=float)

    @property
    def n_samples(self) -> int:
        return int(self.counts.sum())

    @property
    def cv_names(self) -> Tuple[str, ...]:
        names = set(self.windows[0].cvs)
        for samples in self.windows[1:]:
            names &= set(samples.cvs)
        return tuple(name for name in self.windows[0].cvs if name in names)

    def pooled(self, attribute) -> np.ndarray:
        return np.concatenate([getattr(samples, attribute) for samples in self.windows])

    def pooled_cvs(self) -> dict:
        return dict(self._pooled_cvs)

    @functools.cached_property
    def _pooled_cvs(self):
        return {
            name: np.concatenate([samples.cvs[name] for samples in self.windows])
            for name in self.cv_names
        }

    @functools.cached_property
    def _pooled_energy(self):
        return self.pooled("energy")

    def window_index(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.windows)), self.counts.astype(int))

    def bias_matrix(self, start=0, stop=None) -> np.ndarray:
        """
        b_jl for every window j and the pooled samples l in [start, stop).
        """
        energy = self._pooled_energy[start:stop]
        cvs = {name: values[start:stop] for name, values in self._pooled_cvs.items()}
        return np.array(
            [
                bias_log_factor(samples.window, samples.its, self.beta0, energy, cvs)
                for samples in self.windows
            ]
        ).reshape(len(self.windows), len(energy))


class _BiasBlocks:
    """
    The bias matrix, held whole when small and rebuilt by column chunks otherwise.
    """

    def __init__(self, data: WhamInput):
        self.data = data
        n_windows, n_samples = len(data.windows), data.n_samples
        if n_windows * n_samples <= MAX_MATRIX_ENTRIES:
            self.bounds = [(0, n_samples)]
            self.cache = [data.bias_matrix()]
        else:
            chunk = max(1, MAX_MATRIX_ENTRIES // (4 * n_windows))
            self.bounds = [(s, min(s + chunk, n_samples)) for s in range(0, n_samples, chunk)]
            self.cache = None
            logger.info("WHAM bias matrix evaluated in %d chunks", len(self.bounds))

    def __iter__(self):
        for position, (start, stop) in enumerate(self.bounds):
            matrix = self.cache[position] if self.cache else self.data.bias_matrix(start, stop)
            yield start, stop, matrix


def _log_denominators(log_counts, beta0, f, b):
    return logsumexp(log_counts[:, np.newaxis] + beta0 * f[:, np.newaxis] - b, axis=0)


def _sweep(data: WhamInput, blocks, f):
    log_counts = np.log(data.counts)
    log_numerator = np.full(len(f), -np.inf)
    for _, _, b in blocks:
        log_denominator = _log_denominators(log_counts, data.beta0, f, b)
        log_numerator = np.logaddexp(
            log_numerator, logsumexp(-b - log_denominator[np.newaxis, :], axis=1)
        )
    updated = -log_numerator / data.beta0
    return updated - updated[0]


def wham_sweep(data: WhamInput, f) -> np.ndarray:
    """
    One self-consistent update of the window free energies, gauge fixed to f_1 = 0.
    """
    return _sweep(data, _BiasBlocks(data), np.asarray(f, dtype=float))


def sample_log_weights(data: WhamInput, f, blocks=None) -> np.ndarray:
    """
    Normalized log of the unbiased weight of every pooled sample,
    w_l ∝ 1 / Σ_j m_j exp(β0 f_j - b_jl).
    """
    blocks = blocks or _BiasBlocks(data)
    log_counts = np.log(data.counts)
    f = np.asarray(f, dtype=float)
    log_weights = np.concatenate(
        [-_log_denominators(log_counts, data.beta0, f, b) for _, _, b in blocks]
    )
    return log_weights - logsumexp(log_weights)


def overlap_matrix(data: WhamInput, f, blocks=None) -> np.ndarray:
    """
    O_ij: the mean probability, over the samples of window i, that a sample belongs to
    window j. Rows sum to one.
    """
    blocks = blocks or _BiasBlocks(data)
    log_counts = np.log(data.counts)
    f = np.asarray(f, dtype=float)
    index = data.window_index()
    overlap = np.zeros((len(f), len(f)))
    for start, stop, b in blocks:
        log_terms = log_counts[:, np.newaxis] + data.beta0 * f[:, np.newaxis] - b
        posterior = np.exp(log_terms - logsumexp(log_terms, axis=0)[np.newaxis, :])
        np.add.at(overlap, index[start:stop], posterior.T)
    return overlap / data.counts[:, np.newaxis]


@dataclass
class WhamSolution:
    window_ids: Tuple[int, ...]
    f: np.ndarray
    log_weights: np.ndarray
    iterations: int
    residual: float
    converged: bool
    beta0: float
    overlap: Optional[np.ndarray] = None
    isolated_windows: Tuple[int, ...] = field(default_factory=tuple)

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def free_energy(self, window_id) -> float:
        return float(self.f[self.window_ids.index(window_id)])


def _isolated(window_ids, overlap):
    if len(window_ids) < 2:
        return ()
    leaking = 1.0 - np.diag(overlap)
    return tuple(w for w, value in zip(window_ids, leaking) if value < OVERLAP_WARNING)


def solve(
    data: WhamInput,
    tol: float = DEFAULT_TOLERANCE,
    max_iter: int = DEFAULT_MAX_ITERATIONS,
    f0: Optional[Sequence[float]] = None,
) -> WhamSolution:
    """
    Iterate the WHAM equations until no f_i moves by more than `tol` (kcal/mol).

    An unconverged solve returns the iterate with the smallest residual flagged with
    `converged=False`; it never raises.
    """
    if not tol > 0:
        raise ConfigError("wham.tolerance", "must be positive")
    if max_iter < 1:
        raise ConfigError("wham.max_iterations", "must be at least 1")
    blocks = _BiasBlocks(data)
    f = np.zeros(len(data.windows)) if f0 is None else np.asarray(f0, dtype=float) - f0[0]
    best = (np.inf, f)
    residual, converged, iteration = np.inf, False, 0
    for iteration in range(1, max_iter + 1):
        updated = _sweep(data, blocks, f)
        residual = float(np.max(np.abs(updated - f))) if len(f) else 0.0
        f = updated
        if residual < best[0]:
            best = (residual, f)
        if residual < tol:
            converged = True
            break
        if iteration % 1000 == 0:
            logger.debug("WHAM iteration %d: residual %.3g", iteration, residual)

    if not converged:
        residual, f = best
        logger.warning(
            "WHAM did not converge in %d iterations, best residual %.3g kcal/mol",
            max_iter, residual,
        )
    else:
        logger.info("WHAM converged in %d iterations, residual %.3g", iteration, residual)

    overlap = overlap_matrix(data, f, blocks)
    isolated = _isolated(data.window_ids, overlap)
    if isolated:
        logger.warning(
            "Windows %s do not overlap with any other window (overlap below %g)",
            list(isolated), OVERLAP_WARNING,
        )
    return WhamSolution(
        window_ids=data.window_ids,
        f=f,
        log_weights=sample_log_weights(data, f, blocks),
        iterations=iteration,
        residual=residual,
        converged=converged,
        beta0=data.beta0,
        overlap=overlap,
        isolated_windows=isolated,
    )


def unbiased_weights(solution: WhamSolution) -> np.ndarray:
    """
    Normalized unbiased weight of every pooled sample.
    """
    weights = solution.weights
    return weights / weights.sum()


def unbiased_density(solution: WhamSolution, data: WhamInput, grid: Optional[HistogramGrid] = None):
    """
    The pooled samples with their unbiased weights; binned on `grid` when one is given.
    """
    samples = WeightedSamples(
        cvs=data.pooled_cvs(),
        weights=unbiased_weights(solution),
        energy=data.pooled("energy"),
        window_id=np.repeat(np.array(data.window_ids), data.counts.astype(int)),
        replica=data.pooled("replica"),
        time=data.pooled("time"),
    )
    if grid is None:
        return samples
    return weighted_density(samples, grid.names, grid)
