"""
Small numerical helpers shared by the sampling modules.
"""
import numpy as np

# kcal/(mol K)
BOLTZMANN = 0.0019872041

# kcal/mol/(amu Å) expressed in Å/fs²
ACCELERATION_UNIT = 4.184e-4


def beta(temperature) -> float:
    """
    Inverse thermal energy 1/(k_B T) in mol/kcal.
    """
    return 1.0 / (BOLTZMANN * temperature)


def temperature(beta_value) -> float:
    """
    Temperature in Kelvin of an inverse thermal energy.
    """
    return 1.0 / (BOLTZMANN * beta_value)


def wrap_periodic(values, period):
    """
    Reduce `values` into the half open interval (-period/2, +period/2].

    A `None` period leaves the values untouched.
    """
    if period is None:
        return values
    values = np.asarray(values, dtype=float)
    return values - period * np.ceil((values - 0.5 * period) / period)


def random_generator(seed, *stream):
    """
    A numpy generator for the rng stream identified by `seed` and the `stream` integers,
    like (seed, window id). Distinct streams are statistically independent.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), *[int(s) for s in stream]]))
