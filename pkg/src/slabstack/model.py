"""Single-slab parameterization, the composition law and closed-form statistics.

A stack is described by the rapidity ``eta = 2*theta_tot`` with
``cosh(eta) = C_tot`` and transmission ``tau = 2/(cosh(eta) + 1)``.  All
functions here accept numpy arrays and broadcast; scalars in give floats out.
Rapidities are kept as plain floats (never as ``cosh(eta)``) so that stacks of
thousands of slabs stay representable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import SlabDomainError

__all__ = [
    "SlabParams",
    "ExactStats",
    "slab_params",
    "log_sinh",
    "log_cosh",
    "compose_eta",
    "tau_from_eta",
    "transfer_product",
    "flux_defect",
    "simulate_matrix_stack",
    "fold_phases",
    "exact_statistics",
    "f_small_n",
]

LOG2 = math.log(2.0)
TWO_PI = 2.0 * math.pi
# cosh(eta) leaves double range here; switch asinh to its asymptotic form
_ASINH_SWITCH = 300.0


def _out(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


@dataclass(frozen=True)
class SlabParams:
    """Constants of one slab.

    Attributes
    ----------
    tau1 : float
        Single-slab transmission probability in (0, 1].
    C, S : float
        ``cosh(2 theta)`` and ``sinh(2 theta)``.
    theta : float
        Slab rapidity, ``cosh(theta) = 1/sqrt(tau1)``.
    """

    tau1: float
    C: float
    S: float
    theta: float

    @property
    def two_theta(self) -> float:
        """Rapidity ``eta`` of a single slab."""
        return 2.0 * self.theta

    @property
    def log_C(self) -> float:
        return math.log1p(2.0 * (1.0 - self.tau1) / self.tau1)


def _check_tau1(tau1) -> float:
    try:
        t = float(tau1)
    except (TypeError, ValueError):
        raise SlabDomainError(f"tau1 must be a real number, got {tau1!r}") from None
    if not (0.0 < t <= 1.0):
        raise SlabDomainError(f"tau1 must lie in (0, 1], got {t!r}")
    return t


def slab_params(tau1: float) -> SlabParams:
    """Build the slab constants for transmission probability `tau1`."""
    t = _check_tau1(tau1)
    C = 2.0 / t - 1.0
    S = (2.0 / t) * math.sqrt(1.0 - t)
    theta = math.asinh(math.sqrt((1.0 - t) / t))
    return SlabParams(tau1=t, C=C, S=S, theta=theta)


def log_sinh(x):
    """``log(sinh(x))`` for ``x >= 0`` without overflow; ``-inf`` at 0."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return _out(x + np.log(-np.expm1(-2.0 * x)) - LOG2)


def log_cosh(x):
    """``log(cosh(x))`` without overflow, accurate near 0."""
    x = np.abs(np.asarray(x, dtype=float))
    small = x < 1.0
    xs = np.where(small, x, 0.0)
    near = np.log1p(2.0 * np.sinh(0.5 * xs) ** 2)
    far = x + np.log1p(np.exp(-2.0 * x)) - LOG2
    return _out(np.where(small, near, far))


def compose_eta(eta1, eta2, psi):
    """Rapidity of two stacks joined by a gap of phase `psi`.

    Solves ``cosh(eta) = cosh(eta1) cosh(eta2) + cos(psi) sinh(eta1) sinh(eta2)``
    through the equivalent half-angle form

        sinh^2(eta/2) = sinh^2((eta1 - eta2)/2) + cos^2(psi/2) sinh(eta1) sinh(eta2)

    evaluated in log space. This is accurate near ``eta = 0`` (no arccosh of a
    number close to 1) and never overflows.
    """
    a = np.asarray(eta1, dtype=float)
    b = np.asarray(eta2, dtype=float)
    hi = np.maximum(a, b)
    lo = np.minimum(a, b)
    d = hi - lo
    half = 0.5 * np.mod(np.asarray(psi, dtype=float), TWO_PI)
    with np.errstate(divide="ignore"):
        t_diff = 2.0 * np.asarray(log_sinh(0.5 * d))
        t_prod = (
            np.log(np.square(np.cos(half)))
            + np.asarray(log_sinh(hi))
            + np.asarray(log_sinh(lo))
        )
    log_s = 0.5 * np.logaddexp(t_diff, t_prod)  # log sinh(eta/2)
    small = log_s < _ASINH_SWITCH
    eta = np.where(
        small,
        2.0 * np.arcsinh(np.exp(np.minimum(log_s, _ASINH_SWITCH))),
        2.0 * (log_s + LOG2),
    )
    return _out(np.clip(eta, d, hi + lo))


def tau_from_eta(eta):
    """Return ``(tau, log_tau)`` for rapidity `eta`.

    ``tau`` underflows to 0 for very large `eta`; ``log_tau`` stays finite.
    """
    eta = np.asarray(eta, dtype=float)
    log_tau = -2.0 * np.asarray(log_cosh(0.5 * eta))
    return _out(np.exp(log_tau)), _out(log_tau)


def fold_phases(params: SlabParams, phases):
    """Rapidity of an N-slab stack by folding `compose_eta` over its gaps.

    `phases` has shape ``(N-1,)`` or ``(N-1, batch)``.
    """
    phases = np.asarray(phases, dtype=float)
    eta = np.full(phases.shape[1:], params.two_theta)
    for psi in phases:
        eta = compose_eta(eta, params.two_theta, psi)
    return _out(eta)


# -- matrix cross-check -----------------------------------------------------

_MATRIX_LIMIT = 1e150


def transfer_product(params: SlabParams, phases, check_flux: bool = False,
                     relative: bool = True):
    """Complex product ``t D(x_1) t D(x_2) ... D(x_{N-1}) t``.

    With ``relative=False`` the gap matrices are taken literally,
    ``x_n = phi_n / 2``. A partial product has the form
    ``D(gamma) t(theta_acc) D(gamma')``, so a literal gap phase is seen by the
    next slab shifted by ``2 gamma'``. With ``relative=True`` (default) each
    phase is measured from the outgoing phase of the stack built so far,
    ``x_n = (phi_n - 2 gamma'_n) / 2``, where ``2 gamma'`` is read off the
    partial product as ``arg T00 - arg T01``. Both conventions produce the
    same distribution of transmissions for uniform phases; only the relative
    one reproduces `fold_phases` realization by realization.

    Returns the four entries ``(T00, T01, T10, T11)``, each an array shaped
    like ``phases[0]``. With `check_flux`, the largest relative flux defect
    seen on any intermediate product is returned as a fifth element.
    """
    phases = np.asarray(phases, dtype=float)
    shape = phases.shape[1:]
    # extended precision: this path exists to check the float64 scalar path
    tau = np.longdouble(params.tau1)
    ch = 1 / np.sqrt(tau)
    sh = np.sqrt((1 - tau) / tau)
    t00 = np.full(shape, ch, dtype=np.clongdouble)
    t01 = np.full(shape, sh, dtype=np.clongdouble)
    t10 = np.full(shape, sh, dtype=np.clongdouble)
    t11 = np.full(shape, ch, dtype=np.clongdouble)
    worst = float(np.max(flux_defect(t00, t01, t10, t11), initial=0.0))
    for phi in phases:
        x = np.asarray(phi, dtype=np.longdouble) / 2
        if relative:
            x = x - (np.angle(t00) - np.angle(t01)) / 2
        ep = np.exp(1j * x.astype(np.clongdouble))
        em = np.conj(ep)
        x00, x10 = t00 * ep, t10 * ep
        x01, x11 = t01 * em, t11 * em
        t00 = x00 * ch + x01 * sh
        t01 = x00 * sh + x01 * ch
        t10 = x10 * ch + x11 * sh
        t11 = x10 * sh + x11 * ch
        big = max(np.max(np.abs(t00), initial=0.0), np.max(np.abs(t11), initial=0.0))
        if not big < _MATRIX_LIMIT:
            raise OverflowError(
                "transfer-matrix entries left the safe range; "
                "use the scalar log-domain path for stacks this long"
            )
        if check_flux:
            worst = max(worst, float(np.max(flux_defect(t00, t01, t10, t11), initial=0.0)))
    if check_flux:
        return t00, t01, t10, t11, worst
    return t00, t01, t10, t11


def flux_defect(t00, t01, t10, t11):
    """Largest entry of ``T^H diag(1,-1) T - diag(1,-1)``, relative to ``|T|_F^2``.

    Every entry of ``T^H diag(1,-1) T`` is bounded by the squared Frobenius
    norm, which is therefore the scale rounding errors are measured against.
    """
    a00, a01, a10, a11 = (np.abs(t) ** 2 for t in (t00, t01, t10, t11))
    m00 = a00 - a10 - 1
    m11 = a01 - a11 + 1
    m01 = np.conj(t00) * t01 - np.conj(t10) * t11
    scale = a00 + a01 + a10 + a11
    return np.maximum(np.maximum(np.abs(m00), np.abs(m11)), np.abs(m01)) / scale


def simulate_matrix_stack(params: SlabParams, phases, relative: bool = True):
    """Transmission of a stack computed from the full 2x2 transfer matrix.

    Returns ``(tau, eta)`` with ``tau = 1/|T11|^2`` and ``eta = 2 asinh|T10|``.
    See `transfer_product` for the meaning of `relative`.
    """
    t00, t01, t10, t11 = transfer_product(params, phases, relative=relative)
    tau = (1 / np.abs(t11) ** 2).astype(float)
    eta = np.arcsinh(np.abs(t10)).astype(float) * 2.0
    return _out(tau), _out(eta)


# -- closed forms -----------------------------------------------------------


@dataclass(frozen=True)
class ExactStats:
    """Closed-form statistics of an N-slab stack.

    Exponentially large averages are carried as natural logs; the plain
    properties exponentiate them and may return ``inf``.
    """

    tau1: float
    N: int
    mean_log_tau: float
    bk_lower: float
    ray: float
    log_mean_inv_tau: float
    log_mean_cosh: float
    log_mean_cosh_sq: float
    normalized_cosh_variance: float
    mean_tau2: Optional[float] = None
    mean_tau3: Optional[float] = None

    @property
    def mean_inv_tau(self) -> float:
        return _safe_exp(self.log_mean_inv_tau)

    @property
    def mean_cosh(self) -> float:
        return _safe_exp(self.log_mean_cosh)

    @property
    def mean_cosh_sq(self) -> float:
        return _safe_exp(self.log_mean_cosh_sq)

    def as_row(self) -> dict:
        return {
            "tau1": self.tau1,
            "N": self.N,
            "mean_log_tau": self.mean_log_tau,
            "bk_lower": self.bk_lower,
            "ray": self.ray,
            "mean_inv_tau": self.mean_inv_tau,
            "log_mean_inv_tau": self.log_mean_inv_tau,
            "mean_cosh": self.mean_cosh,
            "log_mean_cosh": self.log_mean_cosh,
            "mean_cosh_sq": self.mean_cosh_sq,
            "log_mean_cosh_sq": self.log_mean_cosh_sq,
            "normalized_cosh_variance": self.normalized_cosh_variance,
            "mean_tau2": self.mean_tau2,
            "mean_tau3": self.mean_tau3,
        }


def _safe_exp(x: float) -> float:
    return math.exp(x) if x < 709.0 else math.inf


def exact_statistics(tau1: float, N: int) -> ExactStats:
    """Every closed-form average available for an N-slab stack."""
    p = slab_params(tau1)
    N = int(N)
    if N < 1:
        raise SlabDomainError(f"N must be >= 1, got {N}")
    t = p.tau1
    log_t = math.log(t)
    log_C = p.log_C
    # (3C^2 - 1)/2 = 1 + 3 S^2 / 2
    log_g = math.log1p(1.5 * p.S * p.S)
    log_cosh_mean = N * log_C
    # 1/3 + 2/3 g^N = 1 + 2/3 (g^N - 1)
    x = N * log_g
    if x < 30.0:
        log_cosh_sq = math.log1p(2.0 / 3.0 * math.expm1(x))
    else:
        log_cosh_sq = float(np.logaddexp(-math.log(3.0), math.log(2.0 / 3.0) + x))
    # <cosh^2>/<cosh>^2 - 1 = 2/3 [(1 + tanh^2(2 theta)/2)^N - 1] - 1/3 [1 - C^(-2N)]
    half_tanh_sq = 0.5 * (p.S / p.C) ** 2
    grow = N * math.log1p(half_tanh_sq)
    variance = (
        2.0 / 3.0 * math.expm1(grow) + 1.0 / 3.0 * math.expm1(-2.0 * N * log_C)
        if grow < 709.0 else math.inf
    )
    return ExactStats(
        tau1=t,
        N=N,
        mean_log_tau=N * log_t,
        bk_lower=_safe_exp(N * log_t),
        ray=t / (t + N * (1.0 - t)),
        log_mean_inv_tau=float(np.logaddexp(0.0, log_cosh_mean)) - LOG2,
        log_mean_cosh=log_cosh_mean,
        log_mean_cosh_sq=log_cosh_sq,
        normalized_cosh_variance=variance,
        mean_tau2=t / (2.0 - t) if N == 2 else None,
        mean_tau3=t / math.sqrt(4.0 / t - 3.0) if N == 3 else None,
    )


def f_small_n(n: int, c_prime, params: SlabParams):
    """Intermediate averages ``f_1``, ``f_2``, ``f_3`` of the tau recurrence."""
    c = np.asarray(c_prime, dtype=float)
    if np.any(c < 1.0):
        raise SlabDomainError("c_prime must be >= 1")
    C = params.C
    if n == 1:
        return _out(2.0 / (c + 1.0))
    if n == 2:
        return _out(2.0 / (c + C))
    if n == 3:
        return _out(2.0 / np.sqrt((c + 1.0) * (2.0 * C * C + c - 1.0)))
    raise SlabDomainError(f"closed forms exist only for n in (1, 2, 3), got {n}")
