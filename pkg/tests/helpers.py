"""Session-wide caches for expensive runs shared by several test modules."""

from functools import lru_cache

from slabstack.recurrence import TARGETS, RecurrenceConfig, average_series
from slabstack.montecarlo import RngSpec, run_mc


@lru_cache(maxsize=None)
def series(tau1, N, target="tau", estimate_error=True):
    return average_series(tau1, N, TARGETS[target], RecurrenceConfig(estimate_error=estimate_error))


@lru_cache(maxsize=None)
def mc(tau1, N_values, trials, seed=1, workers=1, matrix_check=False):
    return run_mc(tau1, N_values, trials, RngSpec(seed), matrix_check=matrix_check, workers=workers)
