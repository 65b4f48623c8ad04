"""
Integrated tempering sampling: a generalized ensemble summing Boltzmann factors over a
temperature ladder,

    exp(-β0 Ũ) = Σ_k n_k exp(-β_k U)

with the effective potential Ũ, the force scale s(U) = dŨ/dU, the calibration of the
weights n_k and the per temperature sampling weights p_k.

The weights are kept as ln n_k and every sum over the ladder is a max shifted
log-sum-exp, since β_k·U spans hundreds of units on large ladders.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import List, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp, softmax

from .exceptions import ConfigError, NonPositivePartition
from .utils import beta as beta_of, temperature as temperature_of

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ItsSchedule:
    """
    The temperature ladder {β_k} with the weights {ln n_k} and the production β0.
    """

    betas: Tuple[float, ...]
    log_n: Tuple[float, ...]
    beta0: float

    def __post_init__(self):
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        object.__setattr__(self, "log_n", tuple(float(n) for n in self.log_n))
        if not self.betas:
            raise ConfigError("its", "the temperature ladder is empty")
        if len(self.betas) != len(self.log_n):
            raise ConfigError("its", "betas and log_n have different lengths")
        if any(b <= 0 for b in self.betas) or self.beta0 <= 0:
            raise ConfigError("its", "inverse temperatures must be positive")
        if len(set(self.betas)) != len(self.betas):
            raise ConfigError("its", "ladder temperatures must be distinct")
        if not np.all(np.isfinite(self.log_n)):
            raise ConfigError("its", "weights must be positive and finite")
        if not min(self.betas) <= self.beta0 <= max(self.betas):
            logger.warning(
                "ITS ladder %.1f-%.1f K does not bracket the production temperature %.1f K",
                self.temperatures.min(), self.temperatures.max(), temperature_of(self.beta0),
            )

    @classmethod
    def from_temperatures(cls, temperatures, production_temperature, log_n=None) -> "ItsSchedule":
        temperatures = [float(t) for t in temperatures]
        if log_n is None:
            log_n = [0.0] * len(temperatures)
        return cls(
            betas=tuple(beta_of(t) for t in temperatures),
            log_n=tuple(log_n),
            beta0=beta_of(production_temperature),
        )

    @property
    def size(self) -> int:
        return len(self.betas)

    @property
    def beta_array(self) -> np.ndarray:
        return np.asarray(self.betas)

    @property
    def log_n_array(self) -> np.ndarray:
        return np.asarray(self.log_n)

    @property
    def temperatures(self) -> np.ndarray:
        return temperature_of(self.beta_array)

    def with_log_n(self, log_n) -> "ItsSchedule":
        return ItsSchedule(betas=self.betas, log_n=tuple(log_n), beta0=self.beta0)


def _log_terms(its: ItsSchedule, U):
    U = np.asarray(U, dtype=float)
    return its.log_n_array - its.beta_array * U[..., np.newaxis]


def effective_energy(its: ItsSchedule, U):
    """
    Ũ = -(1/β0) ln Σ_k n_k exp(-β_k U).
    """
    return -logsumexp(_log_terms(its, U), axis=-1) / its.beta0


def temperature_posteriors(its: ItsSchedule, U):
    """
    n_k exp(-β_k U) / Σ_j n_j exp(-β_j U): the share of each ladder temperature in the
    generalized weight of a configuration of energy U.
    """
    return softmax(_log_terms(its, U), axis=-1)


def force_scale(its: ItsSchedule, U):
    """
    s(U) = Σ n_k β_k exp(-β_k U) / (β0 Σ n_k exp(-β_k U)), the factor turning the physical
    force into the ITS force. A one term ladder at β0 gives exactly 1.
    """
    return temperature_posteriors(its, U) @ its.beta_array / its.beta0


def temperature_weights(its: ItsSchedule, Z) -> np.ndarray:
    """
    p_k = n_k Z_k / Σ_j n_j Z_j for per temperature partition functions Z_k.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.shape != (its.size,):
        raise ConfigError("its", f"expected {its.size} partition functions, got {Z.shape}")
    if np.any(Z <= 0) or not np.all(np.isfinite(Z)):
        raise NonPositivePartition(f"partition functions must be positive, got {Z}")
    return softmax(its.log_n_array + np.log(Z))


def temperature_ladder(t_min, t_max, count, spacing="geometric") -> np.ndarray:
    """
    `count` temperatures from `t_min` to `t_max`, geometric (default) or linear in T.
    """
    if count < 1:
        raise ConfigError("its.count", "must be at least 1")
    if count == 1:
        return np.array([float(t_min)])
    if spacing == "geometric":
        return np.geomspace(t_min, t_max, count)
    if spacing == "linear":
        return np.linspace(t_min, t_max, count)
    raise ConfigError("its.spacing", f"unknown spacing '{spacing}'")


@dataclass
class CalibrationReport:
    """
    History of a weight calibration.
    """

    iterations: int = 0
    sampled_weights: List[List[float]] = field(default_factory=list)
    flatness_history: List[float] = field(default_factory=list)
    final_log_n: List[float] = field(default_factory=list)
    flatness: float = 1.0
    converged: bool = True

    def to_config(self) -> dict:
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "flatness": float(self.flatness),
            "flatness_history": [float(f) for f in self.flatness_history],
            "final_log_n": [float(n) for n in self.final_log_n],
            "sampled_weights": [[float(p) for p in row] for row in self.sampled_weights],
        }

    @classmethod
    def from_config(cls, data) -> "CalibrationReport":
        return cls(**data)


def sampled_weights(its: ItsSchedule, energies) -> np.ndarray:
    """
    p̂_k: the posterior share of each temperature averaged over sampled energies.
    """
    return temperature_posteriors(its, np.asarray(energies)).mean(axis=0)


def flatness(weights) -> float:
    weights = np.asarray(weights)
    smallest = weights.min()
    return float("inf") if smallest <= 0 else float(weights.max() / smallest)


def update_weights(its: ItsSchedule, weights, mixing) -> ItsSchedule:
    """
    ln n_k ← ln n_k - mixing·ln(p̂_k N), gauge fixed so ln n_1 = 0.
    """
    weights = np.maximum(np.asarray(weights), np.finfo(float).tiny)
    log_n = its.log_n_array - mixing * np.log(weights * its.size)
    return its.with_log_n(log_n - log_n[0])


def calibrate_weights(
    surface,
    temperatures: Sequence[float],
    cfg,
    rounds: int = 30,
    mixing: float = 0.5,
    flatness_threshold: float = 5.0,
    initial_coords=None,
    window=None,
    window_id: int = 0,
) -> Tuple[ItsSchedule, CalibrationReport]:
    """
    Determine n_k so that n_1 Z_1 = ... = n_N Z_N with short trial simulations.

    Starting from n_k = 1, every round runs a trial ITS trajectory (`cfg` gives its length,
    temperature and replicas) under the current weights, estimates the sampled share p̂_k of
    each temperature and corrects ln n_k by -mixing·ln(p̂_k N). The calibration stops once
    max p̂ / min p̂ drops below `flatness_threshold`. When `window` is given the trial runs
    under that umbrella bias, giving the per window weights.

    An unconverged calibration returns the flattest schedule seen, with the report flagged.
    """
    from .integrator import run_trajectory
    from .umbrella import BiasedSystem

    schedule = ItsSchedule.from_temperatures(temperatures, cfg.temperature)
    report = CalibrationReport(final_log_n=list(schedule.log_n))
    if schedule.size == 1:
        report.sampled_weights.append([1.0])
        return schedule, report
    if rounds < 1:
        raise ConfigError("its.calibration.rounds", "must be at least 1")

    best = (float("inf"), schedule)
    cvs = surface.collective_variables()
    coords = initial_coords
    for iteration in range(rounds):
        system = BiasedSystem(surface, its=schedule, window=window)
        trial_cfg = replace(cfg, seed=cfg.seed + iteration)
        trajectory = run_trajectory(
            surface, system, cvs, trial_cfg, initial_coords=coords, window_id=window_id
        )
        weights = sampled_weights(schedule, trajectory.energy)
        ratio = flatness(weights)
        report.iterations = iteration + 1
        report.sampled_weights.append(weights.tolist())
        report.flatness_history.append(ratio)
        logger.info("ITS calibration round %d: flatness %.3g", iteration + 1, ratio)
        if ratio < best[0]:
            best = (ratio, schedule)
        if ratio < flatness_threshold:
            report.flatness = ratio
            report.final_log_n = list(schedule.log_n)
            return schedule, report
        schedule = update_weights(schedule, weights, mixing)
        coords = trajectory.coords[-trial_cfg.replicas:] if len(trajectory) else coords

    ratio, schedule = best
    report.flatness = ratio
    report.final_log_n = list(schedule.log_n)
    report.converged = False
    logger.warning(
        "ITS calibration did not reach flatness %.3g in %d rounds, best %.3g",
        flatness_threshold, rounds, ratio,
    )
    return schedule, report
