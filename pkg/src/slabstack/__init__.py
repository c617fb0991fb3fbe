"""Transmission statistics of a stack of identical slabs separated by random gaps."""

__version__ = "0.1.0"

from .bounds import envelopes, lambda_bound, ratio_and_extrapolate, upsilon, upsilon_agm
from .model import (
    ExactStats,
    SlabParams,
    compose_eta,
    exact_statistics,
    f_small_n,
    fold_phases,
    simulate_matrix_stack,
    slab_params,
    tau_from_eta,
)
from .montecarlo import RngSpec, run_mc
from .recurrence import (
    IDENTITY_C,
    LOG_TAU,
    SECOND_MOMENT,
    TAU,
    RecurrenceConfig,
    average_over_stack,
    average_series,
)
from .stats import EnsembleStats
