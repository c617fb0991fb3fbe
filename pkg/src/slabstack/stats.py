"""Mergeable ensemble statistics for sampled stack rapidities.

``tau`` and ``log tau`` are bounded enough for Welford/Chan accumulators.
``1/tau``, ``cosh eta`` and ``cosh^2 eta`` reach ``e^160`` and beyond for long
stacks, so they are kept as log-sum-exp totals split over a fixed number of
blocks; the blocks feed a leave-one-block-out jackknife for their errors.
Realization ``i`` always lands in block ``i % N_BLOCKS``, so any sharding of a
run merges to the same blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import IncompatibleStatsError
from .model import log_cosh, tau_from_eta

N_BLOCKS = 64
LSE_QUANTITIES = ("inv_tau", "cosh", "cosh_sq")
UNRELIABLE_REL_SE = 0.3


def _lse(x):
    if x.size == 0:
        return -math.inf
    top = x.max()
    return float(top + np.log(np.sum(np.exp(x - top))))


@dataclass
class EnsembleStats:
    """Running statistics of one ``(tau1, N)`` ensemble."""

    tau1: float
    N: int
    count: int = 0
    tau_mean: float = 0.0
    tau_m2: float = 0.0
    log_tau_mean: float = 0.0
    log_tau_m2: float = 0.0
    block_count: np.ndarray = field(default_factory=lambda: np.zeros(N_BLOCKS, dtype=np.int64))
    # rows follow LSE_QUANTITIES
    block_lse: np.ndarray = field(
        default_factory=lambda: np.full((len(LSE_QUANTITIES), N_BLOCKS), -np.inf)
    )

    @classmethod
    def from_etas(cls, tau1: float, N: int, eta, first_index: int = 0) -> "EnsembleStats":
        """Statistics of realizations ``first_index, first_index + 1, ...``."""
        eta = np.asarray(eta, dtype=float).ravel()
        st = cls(tau1, N)
        n = eta.size
        if n == 0:
            return st
        tau, log_tau = tau_from_eta(eta)
        tau = np.atleast_1d(tau)
        log_tau = np.atleast_1d(log_tau)
        st.count = n
        st.tau_mean = float(tau.mean())
        st.tau_m2 = float(np.sum((tau - st.tau_mean) ** 2))
        st.log_tau_mean = float(log_tau.mean())
        st.log_tau_m2 = float(np.sum((log_tau - st.log_tau_mean) ** 2))
        lc = np.atleast_1d(log_cosh(eta))
        logs = (-log_tau, lc, 2.0 * lc)
        for b in range(N_BLOCKS):
            start = (b - first_index) % N_BLOCKS
            st.block_count[b] = len(range(start, n, N_BLOCKS))
            for q, x in enumerate(logs):
                st.block_lse[q, b] = _lse(x[start::N_BLOCKS])
        return st

    def copy(self) -> "EnsembleStats":
        return EnsembleStats(self.tau1, self.N, self.count, self.tau_mean, self.tau_m2,
                             self.log_tau_mean, self.log_tau_m2,
                             self.block_count.copy(), self.block_lse.copy())

    def merge(self, other: "EnsembleStats") -> "EnsembleStats":
        """Statistics of the concatenated samples (Chan's pairwise update)."""
        if self.tau1 != other.tau1 or self.N != other.N:
            raise IncompatibleStatsError(
                f"cannot merge (tau1={self.tau1}, N={self.N}) "
                f"with (tau1={other.tau1}, N={other.N})"
            )
        if other.count == 0:
            return self.copy()
        if self.count == 0:
            return other.copy()
        na, nb = self.count, other.count
        n = na + nb
        out = EnsembleStats(self.tau1, self.N, n)
        out.tau_mean, out.tau_m2 = _chan(na, self.tau_mean, self.tau_m2,
                                         nb, other.tau_mean, other.tau_m2)
        out.log_tau_mean, out.log_tau_m2 = _chan(na, self.log_tau_mean, self.log_tau_m2,
                                                 nb, other.log_tau_mean, other.log_tau_m2)
        out.block_count = self.block_count + other.block_count
        out.block_lse = np.logaddexp(self.block_lse, other.block_lse)
        return out

    # -- Welford quantities

    @property
    def se_tau(self) -> float:
        return _se(self.tau_m2, self.count)

    @property
    def se_log_tau(self) -> float:
        return _se(self.log_tau_m2, self.count)

    @property
    def jensen_ok(self) -> bool:
        """``log(mean tau) >= mean(log tau)`` on this sample."""
        return self.count == 0 or math.log(self.tau_mean) >= self.log_tau_mean - 1e-12 * abs(
            self.log_tau_mean
        )

    # -- log-sum-exp quantities

    def _row(self, quantity: str) -> np.ndarray:
        try:
            return self.block_lse[LSE_QUANTITIES.index(quantity)]
        except ValueError:
            raise KeyError(f"unknown quantity {quantity!r}; use one of {LSE_QUANTITIES}") from None

    def log_mean(self, quantity: str) -> float:
        """Natural log of the sample mean of ``1/tau``, ``cosh eta`` or ``cosh^2 eta``."""
        if self.count == 0:
            return math.nan
        return float(np.logaddexp.reduce(self._row(quantity))) - math.log(self.count)

    def rel_se(self, quantity: str) -> float:
        """Jackknife standard error of the mean, relative to the mean."""
        row = self._row(quantity)
        full = self.block_count > 0
        k = int(full.sum())
        if k < 2:
            return math.nan
        total = float(np.logaddexp.reduce(row))
        nb = self.block_count[full]
        # leave-one-block-out means, in units of the full-sample mean
        rho = -np.expm1(row[full] - total) * self.count / (self.count - nb)
        return float(math.sqrt((k - 1) / k * np.sum((rho - rho.mean()) ** 2)))

    def unreliable(self, quantity: str) -> bool:
        r = self.rel_se(quantity)
        return not (r <= UNRELIABLE_REL_SE)


def _chan(na, ma, m2a, nb, mb, m2b):
    n = na + nb
    delta = mb - ma
    mean = ma + delta * (nb / n)
    m2 = m2a + m2b + delta * delta * (na * nb / n)
    return mean, m2


def _se(m2, n):
    if n < 2:
        return math.nan
    return math.sqrt(m2 / (n - 1) / n)


def merge_all(parts):
    """Left fold of `merge` in the given order."""
    parts = list(parts)
    out = parts[0].copy()
    for p in parts[1:]:
        out = out.merge(p)
    return out
