"""Monte Carlo ensembles of random stacks.

Every realization draws ``N - 1`` gap phases uniformly on ``[0, 2 pi)`` and
folds the composition law over them. Trials are generated in fixed-size
chunks; chunk ``c`` of stream ``s`` for stack size ``N`` draws from a Philox
(counter-based) generator keyed by ``(seed, s, N, c)``. Trial ``i`` therefore
depends only on ``(seed, s, N, i)`` and not on how chunks are spread over
workers, and chunk results are merged in chunk order.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, Iterable

import numpy as np

from .errors import MatrixCheckError, SlabDomainError
from .model import SlabParams, fold_phases, simulate_matrix_stack, slab_params, tau_from_eta
from .stats import EnsembleStats, merge_all

__all__ = ["RngSpec", "chunk_generator", "draw_phases", "sample_realization", "run_mc"]

log = logging.getLogger(__name__)

CHUNK_SIZE = 16384
MATRIX_CHECK_EVERY = 1000
MATRIX_CHECK_MAX_N = 50
MATRIX_CHECK_RTOL = 1e-10


@dataclass(frozen=True)
class RngSpec:
    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not 0 <= v < 2**64:
                raise SlabDomainError(f"{name} must be an unsigned 64-bit integer, got {v!r}")


def chunk_generator(rng: RngSpec, N: int, chunk: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(rng.seed), spawn_key=(int(rng.stream_id), int(N), int(chunk)))
    return np.random.Generator(np.random.Philox(ss))


def draw_phases(gen: np.random.Generator, N: int, size=None):
    """Gap phases, shape ``(N - 1,)`` or ``(N - 1, size)``."""
    shape = (N - 1,) if size is None else (N - 1, size)
    return 2.0 * math.pi * gen.random(shape)


def sample_realization(params: SlabParams, N: int, gen: np.random.Generator) -> float:
    """Rapidity of one random N-slab stack."""
    if N < 1:
        raise SlabDomainError(f"N must be >= 1, got {N}")
    return fold_phases(params, draw_phases(gen, N))


def _run_chunk(params: SlabParams, N: int, rng: RngSpec, chunk: int, size: int,
               chunk_size: int, matrix_check: bool) -> EnsembleStats:
    first = chunk * chunk_size
    phases = draw_phases(chunk_generator(rng, N, chunk), N, size)
    eta = np.atleast_1d(fold_phases(params, phases))
    if matrix_check and N <= MATRIX_CHECK_MAX_N:
        j = np.arange((-first) % MATRIX_CHECK_EVERY, size, MATRIX_CHECK_EVERY)
        if j.size:
            tau_m, _ = simulate_matrix_stack(params, phases[:, j])
            tau_s, _ = tau_from_eta(eta[j])
            rel = np.abs(np.atleast_1d(tau_m) - tau_s) / np.atleast_1d(tau_s)
            bad = np.flatnonzero(~(rel <= MATRIX_CHECK_RTOL))
            if bad.size:
                k = j[bad[0]]
                raise MatrixCheckError(
                    f"matrix/scalar mismatch: seed={rng.seed} stream={rng.stream_id} "
                    f"tau1={params.tau1} N={N} trial={first + k} "
                    f"rel_err={rel[bad[0]]:.3e} phases={phases[:, k].tolist()}"
                )
    return EnsembleStats.from_etas(params.tau1, N, eta, first_index=first)


def run_mc(tau1: float, N_values: Iterable[int], trials: int, rng: RngSpec,
           matrix_check: bool = False, workers: int = 1,
           chunk_size: int = CHUNK_SIZE) -> Dict[int, EnsembleStats]:
    """Simulate `trials` stacks for every N in `N_values`.

    Returns a dict ``N -> EnsembleStats``. Output is bit-identical for any
    `workers`, given the same `rng` and `chunk_size`.
    """
    params = slab_params(tau1)
    N_values = [int(n) for n in N_values]
    if not N_values:
        raise SlabDomainError("N_values must not be empty")
    if any(n < 1 for n in N_values):
        raise SlabDomainError("every N must be >= 1")
    if trials < 1:
        raise SlabDomainError("trials must be >= 1")
    if workers < 1:
        raise SlabDomainError("workers must be >= 1")
    n_chunks = -(-trials // chunk_size)
    tasks = [
        (N, c, min(chunk_size, trials - c * chunk_size))
        for N in N_values
        for c in range(n_chunks)
    ]

    def work(task):
        N, c, size = task
        return _run_chunk(params, N, rng, c, size, chunk_size, matrix_check)

    if workers == 1:
        parts = [work(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, tasks))
    out = {}
    for i, N in enumerate(N_values):
        out[N] = merge_all(parts[i * n_chunks:(i + 1) * n_chunks])
        log.debug("N=%d: %d trials, mean tau %.6g", N, out[N].count, out[N].tau_mean)
    return out
