"""Exponential envelopes for the average transmission and the A - B/N probe."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional

import numpy as np

from .errors import ConvergenceError, SeriesGapError, SlabDomainError
from .model import slab_params

__all__ = [
    "BoundsReport",
    "upsilon",
    "upsilon_agm",
    "agm",
    "lambda_bound",
    "LAMBDA_BREAK",
    "envelopes",
    "ray_crossing",
    "ratio_and_extrapolate",
    "conjecture_trend",
]

LAMBDA_BREAK = 2.0 - math.sqrt(2.0)


def upsilon(tau1: float, quad_nodes: int = 64, max_nodes: int = 1 << 24) -> float:
    """Per-slab factor of the upper envelope.

    ``(1/2pi) * integral over a period of (C + S cos phi)^(-1/2)``, by the
    periodic trapezoid rule with node doubling until two successive values
    agree to 1e-12. The integrand is written as
    ``(e^(-2 theta) + 2 S cos^2(phi/2))^(-1/2)`` to avoid cancellation near
    ``phi = pi`` for opaque slabs.
    """
    p = slab_params(tau1)
    if quad_nodes < 16:
        raise SlabDomainError("quad_nodes must be at least 16")
    floor = math.exp(-p.two_theta)  # C - S

    def trap(m):
        phi = 2.0 * math.pi * np.arange(m) / m
        return float(np.mean(1.0 / np.sqrt(floor + 2.0 * p.S * np.cos(0.5 * phi) ** 2)))

    m = quad_nodes
    prev = trap(m)
    while True:
        m *= 2
        cur = trap(m)
        change = abs(cur - prev)
        if change <= 1e-12:
            return cur
        if m >= max_nodes:
            if change > 1e-10:
                raise ConvergenceError(
                    f"upsilon({tau1}) did not converge with {m} nodes (change {change:.3g})"
                )
            return cur
        prev = cur


def agm(a: float, b: float) -> float:
    """Arithmetic-geometric mean."""
    for _ in range(64):
        if abs(a - b) <= 1e-16 * a:
            break
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return 0.5 * (a + b)


def upsilon_agm(tau1: float) -> float:
    """Closed form of `upsilon` through the complete elliptic integral.

    The period integral equals ``4 K(m) / sqrt(C + S)`` with
    ``m = 2S/(C + S)``, and ``K(m) = pi / (2 agm(1, sqrt(1 - m)))``. Since
    ``C +/- S = e^(+/-2 theta)`` this collapses to ``1 / agm(e^theta, e^-theta)``.
    """
    p = slab_params(tau1)
    return 1.0 / agm(math.exp(p.theta), math.exp(-p.theta))


def lambda_bound(tau1: float) -> float:
    """Per-slab factor of the lower envelope (minimum of f3/f2 over C')."""
    t = slab_params(tau1).tau1
    if t >= LAMBDA_BREAK:
        return 1.0 / (2.0 - t)
    return math.sqrt(t - 0.25 * t * t)


@dataclass
class BoundsReport:
    """Envelopes (natural logs) for ``N = 2 .. N_max`` plus optional ratio data."""

    tau1: float
    upsilon: float
    lambda_: float
    N: np.ndarray
    upper_envelope_log: np.ndarray
    lower_envelope_log: np.ndarray
    bk_lower_log: np.ndarray
    ray_value: np.ndarray
    r: Dict[int, float] = field(default_factory=dict)
    A: Dict[int, float] = field(default_factory=dict)
    B: Dict[int, float] = field(default_factory=dict)


def envelopes(tau1: float, N_max: int, upsilon_value: Optional[float] = None) -> BoundsReport:
    """Upper and lower envelopes, the Jensen bound tau1^N, and the ray-optics value."""
    t = slab_params(tau1).tau1
    if N_max < 2:
        raise SlabDomainError("N_max must be >= 2")
    ups = upsilon(t) if upsilon_value is None else upsilon_value
    lam = lambda_bound(t)
    n = np.arange(2, N_max + 1)
    log_tau2 = math.log(t / (2.0 - t))
    return BoundsReport(
        tau1=t,
        upsilon=ups,
        lambda_=lam,
        N=n,
        upper_envelope_log=log_tau2 + (n - 2) * math.log(ups),
        lower_envelope_log=log_tau2 + (n - 2) * math.log(lam),
        bk_lower_log=n * math.log(t),
        ray_value=t / (t + n * (1.0 - t)),
    )


def ray_crossing(tau1: float, N_limit: int = 10**7) -> Optional[int]:
    """Smallest N at which the ray-optics average exceeds the upper envelope."""
    t = slab_params(tau1).tau1
    if t == 1.0:
        return None
    log_ups = math.log(upsilon(t))
    log_tau2 = math.log(t / (2.0 - t))
    start = 2
    while start <= N_limit:
        n = np.arange(start, min(2 * start + 1024, N_limit) + 1)
        gap = np.log(t / (t + n * (1.0 - t))) - (log_tau2 + (n - 2) * log_ups)
        hit = np.flatnonzero(gap > 0)
        if hit.size:
            return int(n[hit[0]])
        start = int(n[-1]) + 1
    return None


def ratio_and_extrapolate(tau2_mean: float, series: Mapping[int, float]):
    """Ratio series ``r_N`` and the two-point ``A - B/N`` extrapolants.

    `series` maps N to ``log <tau_N>``. ``r_N = (<tau_N>/<tau_2>)^(1/(N-2))``;
    the pair ``(N-1, N)`` gives ``A_N = N r_N - (N-1) r_{N-1}`` and
    ``B_N = N (A_N - r_N)``, the exact solution of ``r = A - B/N`` at both
    points. A and B are therefore keyed by the larger N of each pair.
    """
    ns = sorted(int(k) for k in series)
    if not ns:
        raise SeriesGapError("empty series")
    if ns[0] < 3:
        raise SlabDomainError("the ratio series starts at N = 3")
    if ns != list(range(ns[0], ns[-1] + 1)):
        raise SeriesGapError("series N values must be consecutive")
    log_tau2 = math.log(tau2_mean)
    r = {n: math.exp((series[n] - log_tau2) / (n - 2)) for n in ns}
    A, B = {}, {}
    for n in ns[1:]:
        a = n * r[n] - (n - 1) * r[n - 1]
        A[n] = a
        B[n] = n * (a - r[n])
    return r, A, B


def conjecture_trend(upsilon_value: float, A: Mapping[int, float], N_from: int = 50) -> dict:
    """Summary of how the extrapolants approach the upper-envelope factor.

    Reported only; the limit is a conjecture, not something to assert.
    """
    ns = sorted(n for n in A if n >= N_from)
    gaps = [abs(upsilon_value - A[n]) for n in ns]
    steps = np.diff(gaps)
    return {
        "upsilon": upsilon_value,
        "N_from": ns[0] if ns else None,
        "N_to": ns[-1] if ns else None,
        "gap_first": gaps[0] if gaps else None,
        "gap_last": gaps[-1] if gaps else None,
        "monotone_non_increasing": bool(np.all(steps <= 0)) if gaps else None,
        "fraction_of_decreasing_steps": float(np.mean(steps <= 0)) if steps.size else None,
        "A_below_upsilon": bool(all(A[n] <= upsilon_value for n in ns)),
    }
